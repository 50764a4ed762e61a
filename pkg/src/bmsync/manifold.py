"""Points and tangent vectors on the product Stiefel manifold.

A point is n stacked blocks S_i of shape d x p with orthonormal rows
(S_i S_i^T = I_d); tangent vectors at S satisfy the blockwise relation
Sdot_i S_i^T + S_i Sdot_i^T = 0. Retraction is the blockwise polar factor,
which is the metric projection onto the manifold and agrees with the
exponential map to second order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._rng import rng_from
from .errors import ParseError, ShapeError, ValidationError

#: Blockwise feasibility / tangency residual bound.
FEASIBILITY_TOL = 1e-10


def _as_stack(arr, n: int, d: int, name: str) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim == 3:
        if out.shape[0] != n or out.shape[1] != d:
            raise ShapeError(f"{name}: expected (n, d, p) = ({n}, {d}, *), got {out.shape}")
        out = out.reshape(n * d, out.shape[2])
    if out.ndim != 2 or out.shape[0] != n * d:
        raise ShapeError(f"{name}: expected {n * d} stacked rows, got shape {out.shape}")
    return np.ascontiguousarray(out)


@dataclass(frozen=True)
class ProductStiefelPoint:
    """n stacked d x p blocks with orthonormal rows, stored as an (n*d) x p array."""

    n: int
    d: int
    p: int
    stack: np.ndarray

    def __post_init__(self):
        if self.p < self.d:
            raise ValidationError(f"need p >= d, got p={self.p}, d={self.d}")
        arr = _as_stack(self.stack, self.n, self.d, "stack")
        if arr.shape[1] != self.p:
            raise ShapeError(f"stack width {arr.shape[1]} != p={self.p}")
        blocks = arr.reshape(self.n, self.d, self.p)
        gram = blocks @ blocks.transpose(0, 2, 1)
        err = np.linalg.norm(gram - np.eye(self.d), axis=(1, 2))
        worst = int(np.argmax(err))
        if err[worst] > FEASIBILITY_TOL:
            raise ValidationError(
                f"block {worst} violates S_i S_i^T = I: residual {err[worst]:.3e}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "stack", arr)

    @property
    def blocks(self) -> np.ndarray:
        """(n, d, p) view of the stacked blocks."""
        return self.stack.reshape(self.n, self.d, self.p)

    def block(self, i: int) -> np.ndarray:
        return self.stack[i * self.d:(i + 1) * self.d]


@dataclass(frozen=True)
class TangentDirection:
    """Stacked tangent blocks at a given base point."""

    stack: np.ndarray
    base: ProductStiefelPoint

    def __post_init__(self):
        S = self.base
        arr = _as_stack(self.stack, S.n, S.d, "stack")
        if arr.shape[1] != S.p:
            raise ShapeError(f"tangent width {arr.shape[1]} != p={S.p}")
        Vb = arr.reshape(S.n, S.d, S.p)
        skew = Vb @ S.blocks.transpose(0, 2, 1)
        res = np.linalg.norm(skew + skew.transpose(0, 2, 1), axis=(1, 2))
        scale = np.maximum(1.0, np.linalg.norm(Vb, axis=(1, 2)))
        worst = int(np.argmax(res / scale))
        if res[worst] > FEASIBILITY_TOL * scale[worst]:
            raise ValidationError(
                f"block {worst} violates tangency: residual {res[worst]:.3e}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "stack", arr)

    @property
    def blocks(self) -> np.ndarray:
        S = self.base
        return self.stack.reshape(S.n, S.d, S.p)

    def norm(self) -> float:
        return float(np.linalg.norm(self.stack))


def as_orthogonal_blocks(ref, n: int, d: int, tol: float = 1e-8) -> np.ndarray:
    """Canonicalize a reference to an (n, d, d) array of orthogonal blocks.

    For d = 1 a length-n vector of unit scalars (e.g. a +-1 sign vector) is
    accepted directly.
    """
    arr = np.asarray(ref, dtype=np.float64)
    if d == 1 and arr.ndim == 1:
        arr = arr.reshape(n, 1, 1)
    if arr.shape == (n * d, d):
        arr = arr.reshape(n, d, d)
    if arr.shape != (n, d, d):
        raise ShapeError(f"expected (n, d, d) = ({n}, {d}, {d}) orthogonal blocks, got {arr.shape}")
    gram = arr @ arr.transpose(0, 2, 1)
    err = np.linalg.norm(gram - np.eye(d), axis=(1, 2))
    worst = int(np.argmax(err))
    if err[worst] > tol:
        raise ValidationError(f"reference block {worst} is not orthogonal: residual {err[worst]:.3e}")
    return np.ascontiguousarray(arr)


def project_tangent(S: ProductStiefelPoint, Z) -> TangentDirection:
    """Project stacked ambient blocks onto the tangent space at S."""
    arr = _as_stack(Z, S.n, S.d, "Z")
    if arr.shape[1] != S.p:
        raise ShapeError(f"Z width {arr.shape[1]} != p={S.p}")
    return TangentDirection(kernels.project_tangent(S.stack, arr, S.n, S.d), S)


def retract(S: ProductStiefelPoint, V: TangentDirection, t: float) -> ProductStiefelPoint:
    """Blockwise polar retraction of S + t*V; retract(S, V, 0) is S exactly."""
    if not np.array_equal(V.base.stack, S.stack):
        raise ValidationError("tangent direction is not based at the given point")
    if t == 0.0:
        return S
    Y = S.stack + t * V.stack
    return ProductStiefelPoint(S.n, S.d, S.p, kernels.polar_factor(Y, S.n, S.d))


def polish_orthonormal(stack: np.ndarray, n: int, d: int) -> np.ndarray:
    """One Newton-Schulz sweep, R <- (3 R - R R^T R)/2 per block.

    The polar factor of an ill-conditioned Gaussian block carries an
    orthonormality error of order eps * cond; one sweep squares that error
    away to the machine floor.
    """
    k = stack.shape[1]
    Rb = stack.reshape(n, d, k)
    out = 1.5 * Rb - 0.5 * (Rb @ Rb.transpose(0, 2, 1)) @ Rb
    return out.reshape(n * d, k)


def random_point(n: int, d: int, p: int, seed: int) -> ProductStiefelPoint:
    """Blockwise orthonormal-row factor of i.i.d. standard Gaussian blocks."""
    if p < d:
        raise ValidationError(f"need p >= d, got p={p}, d={d}")
    G = rng_from(seed).standard_normal((n * d, p))
    return ProductStiefelPoint(n, d, p, polish_orthonormal(kernels.polar_factor(G, n, d), n, d))


def random_tangent(S: ProductStiefelPoint, seed: int) -> TangentDirection:
    """Tangent projection of blockwise i.i.d. standard Gaussian blocks."""
    G = rng_from(seed).standard_normal((S.n * S.d, S.p))
    return project_tangent(S, G)


def proof_direction(S: ProductStiefelPoint, o_hat, phi) -> TangentDirection:
    """Tangent direction O_i Phi - S_i Phi^T O_i^T S_i built from a reference
    orthogonal stack and a d x p probe matrix."""
    O = as_orthogonal_blocks(o_hat, S.n, S.d, tol=FEASIBILITY_TOL)
    P = np.asarray(phi, dtype=np.float64)
    if P.shape != (S.d, S.p):
        raise ShapeError(f"phi must be (d, p) = ({S.d}, {S.p}), got {P.shape}")
    Sb = S.blocks
    first = O @ P
    second = ((Sb @ P.T) @ O.transpose(0, 2, 1)) @ Sb
    return TangentDirection((first - second).reshape(S.n * S.d, S.p), S)


def embed_reference(ref, n: int, d: int, p: int) -> ProductStiefelPoint:
    """Canonical embedding [O_i | 0] of an orthogonal reference into width p."""
    O = as_orthogonal_blocks(ref, n, d)
    stack = np.zeros((n * d, p))
    stack[:, :d] = O.reshape(n * d, d)
    return ProductStiefelPoint(n, d, p, stack)


def write_point_text(S: ProductStiefelPoint, path) -> None:
    """Candidate-point text format: 'n d p' header, then n*d rows of p values."""
    with open(path, "w") as fh:
        fh.write(f"{S.n} {S.d} {S.p}\n")
        for row in S.stack:
            fh.write(" ".join(f"{x:.17g}" for x in row))
            fh.write("\n")


def read_point_text(path) -> ProductStiefelPoint:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ParseError(f"{path}: expected 'n d p' header")
        try:
            n, d, p = (int(h) for h in header)
        except ValueError as exc:
            raise ParseError(f"{path}: non-integer header") from exc
        rows = []
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != p:
                raise ParseError(f"{path}:{line_no}: expected {p} values, got {len(vals)}")
            try:
                rows.append([float(v) for v in vals])
            except ValueError as exc:
                raise ParseError(f"{path}:{line_no}: non-numeric value") from exc
    if len(rows) != n * d:
        raise ParseError(f"{path}: expected {n * d} rows, got {len(rows)}")
    return ProductStiefelPoint(n, d, p, np.array(rows))
