"""Block-structured symmetric matrices and dense spectral routines.

An (n*d) x (n*d) real symmetric matrix is viewed as an n x n grid of d x d
blocks. Everything downstream (certificates, model generators, the solver)
builds on the types and operations here. Storage is dense; at desk scale
(n*d up to a couple thousand) dense symmetric eigendecomposition is cheap
and certified-accurate, which the threshold formulas require.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ParseError, ShapeError, ValidationError

#: Relative asymmetry accepted by the BlockSymMatrix invariant.
SYMMETRY_RTOL = 1e-12
#: Relative asymmetry accepted when reading matrices from disk.
READ_SYMMETRY_RTOL = 1e-9
#: Eigenpair residual contract for eigen_sym.
EIGEN_RESIDUAL_TOL = 1e-8

_FORMAT_MAGIC = "SYNCMAT"
_FORMAT_VERSION = "1"


def _as_square_float(entries, name: str = "entries") -> np.ndarray:
    arr = np.ascontiguousarray(entries, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be a square 2-d array, got shape {arr.shape}")
    return arr


def asymmetry(arr: np.ndarray) -> float:
    """Max absolute entry of M - M^T."""
    return float(np.max(np.abs(arr - arr.T))) if arr.size else 0.0


@dataclass(frozen=True)
class BlockSymMatrix:
    """Symmetric (n*d) x (n*d) matrix stored densely, addressed in d x d blocks.

    Invariants (checked at construction): n >= 1, d >= 1, entries square of
    matching size, and max|M - M^T| <= 1e-12 * max|M|.
    """

    n: int
    d: int
    entries: np.ndarray

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValidationError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        arr = _as_square_float(self.entries)
        m = self.n * self.d
        if arr.shape != (m, m):
            raise ShapeError(f"expected shape {(m, m)} for n={self.n}, d={self.d}, got {arr.shape}")
        scale = float(np.max(np.abs(arr))) if arr.size else 0.0
        if asymmetry(arr) > SYMMETRY_RTOL * scale:
            raise ValidationError(
                f"matrix is asymmetric beyond tolerance: max|M-M^T|={asymmetry(arr):.3e}, "
                f"allowed {SYMMETRY_RTOL * scale:.3e}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def size(self) -> int:
        return self.n * self.d

    def block(self, i: int, j: int) -> np.ndarray:
        d = self.d
        return self.entries[i * d:(i + 1) * d, j * d:(j + 1) * d]


@dataclass(frozen=True)
class SpectralSummary:
    """Full ascending spectrum of a symmetric matrix plus an accuracy bound.

    ``residual`` is the max over eigenpairs of ||M v - lambda v|| divided by
    max(1, operator-norm estimate); the contract is residual <= 1e-8.
    """

    eigenvalues: np.ndarray
    residual: float

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=np.float64)
        if np.any(np.diff(vals) < 0):
            raise ValidationError("eigenvalues must be sorted ascending")
        vals.setflags(write=False)
        object.__setattr__(self, "eigenvalues", vals)

    @property
    def min_eig(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max_eig(self) -> float:
        return float(self.eigenvalues[-1])

    def kth_smallest(self, k: int) -> float:
        """1-indexed: kth_smallest(1) is the minimum."""
        if not 1 <= k <= len(self.eigenvalues):
            raise IndexError(f"k={k} outside 1..{len(self.eigenvalues)}")
        return float(self.eigenvalues[k - 1])


@dataclass(frozen=True)
class PsdCheck:
    is_psd: bool
    min_eig: float


def bdg(X, n: int, d: int) -> BlockSymMatrix:
    """Symmetrized block-diagonal part of an (n*d) x (n*d) matrix.

    Block i of the output equals (X_ii + X_ii^T)/2; all off-diagonal blocks
    are exactly zero. The input need not be symmetric.
    """
    arr = _as_square_float(X, "X")
    if arr.shape[0] != n * d:
        raise ShapeError(f"X has shape {arr.shape}, expected {(n * d, n * d)}")
    return BlockSymMatrix(n, d, kernels.bdg(arr, n, d))


def eigen_sym(M: BlockSymMatrix) -> SpectralSummary:
    """Full spectrum of a BlockSymMatrix, ascending, with a residual bound."""
    w, V = np.linalg.eigh(M.entries)
    R = M.entries @ V - V * w
    op_est = max(abs(float(w[0])), abs(float(w[-1])))
    residual = float(np.max(np.linalg.norm(R, axis=0))) / max(1.0, op_est)
    summary = SpectralSummary(w, residual)
    if residual > EIGEN_RESIDUAL_TOL:
        raise ValidationError(f"eigenpair residual {residual:.3e} exceeds contract {EIGEN_RESIDUAL_TOL}")
    return summary


def psd_check(M: BlockSymMatrix, rel_tol: float = 1e-8) -> PsdCheck:
    """PSD test with tolerance relative to max(1, largest eigenvalue)."""
    summary = eigen_sym(M)
    floor = -rel_tol * max(1.0, summary.max_eig)
    return PsdCheck(is_psd=summary.min_eig >= floor, min_eig=summary.min_eig)


def opnorm_estimate(M: BlockSymMatrix | np.ndarray, iters: int = 60) -> float:
    """Deterministic power-iteration estimate of the operator norm.

    Used only as a scale (step sizes, convergence thresholds), so a percent
    of accuracy is plenty.
    """
    arr = M.entries if isinstance(M, BlockSymMatrix) else np.asarray(M, dtype=np.float64)
    m = arr.shape[0]
    if m == 0:
        return 0.0
    v = 1.0 + 1.0 / (2.0 + np.arange(m))
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = arr @ v
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return est


def write_matrix(M: BlockSymMatrix, path) -> None:
    """Write in the SYNCMAT 1 text format (17 significant digits)."""
    m = M.size
    with open(path, "w") as fh:
        fh.write(f"{_FORMAT_MAGIC} {_FORMAT_VERSION} {M.n} {M.d}\n")
        for i in range(m):
            fh.write(" ".join(f"{x:.17g}" for x in M.entries[i]))
            fh.write("\n")


def read_matrix(path) -> BlockSymMatrix:
    """Read a SYNCMAT 1 file, validating shape and symmetry.

    Asymmetry up to 1e-9 (relative) is repaired by symmetrizing; anything we
    wrote ourselves round-trips bitwise.
    """
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != _FORMAT_MAGIC or header[1] != _FORMAT_VERSION:
            raise ParseError(f"{path}: malformed header {' '.join(header)!r}")
        try:
            n, d = int(header[2]), int(header[3])
        except ValueError as exc:
            raise ParseError(f"{path}: non-integer dimensions in header") from exc
        if n < 1 or d < 1:
            raise ParseError(f"{path}: invalid dimensions n={n}, d={d}")
        m = n * d
        rows = []
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != m:
                raise ParseError(f"{path}:{line_no}: expected {m} values, got {len(vals)}")
            try:
                rows.append([float(v) for v in vals])
            except ValueError as exc:
                raise ParseError(f"{path}:{line_no}: non-numeric value") from exc
    if len(rows) != m:
        raise ParseError(f"{path}: expected {m} body rows, got {len(rows)}")
    arr = np.array(rows, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(arr))))
    asym = asymmetry(arr)
    if asym > READ_SYMMETRY_RTOL * scale:
        raise ValidationError(f"{path}: asymmetry {asym:.3e} exceeds {READ_SYMMETRY_RTOL * scale:.3e}")
    if asym > SYMMETRY_RTOL * float(np.max(np.abs(arr)) if arr.size else 0.0):
        arr = 0.5 * (arr + arr.T)
    return BlockSymMatrix(n, d, arr)
