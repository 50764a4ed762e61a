"""Generators for the benchmark measurement models and monotone adversaries.

Every generator is a pure function of (parameters, seed): it draws from
``numpy.random.default_rng(seed)`` in a fixed, documented order and returns a
ModelInstance holding the data matrix, the planted ground truth (when one is
defined), and generation metadata. Diagonal conventions follow the model
definitions literally: Gaussian noise and Bernoulli adjacency draws carry a
zero diagonal; the signed-coupling model keeps its +1 diagonal, whose energy
contribution is a constant offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._rng import rng_from
from .blockmat import BlockSymMatrix
from .errors import ShapeError, ThresholdUndefinedError, ValidationError
from .manifold import polish_orthonormal


@dataclass(frozen=True)
class ModelInstance:
    """A generated data matrix with optional planted truth and metadata.

    ``truth`` is a +-1 vector of length n for scalar (d = 1) models and an
    (n, d, d) stack of orthogonal blocks otherwise.
    """

    A: BlockSymMatrix
    d: int
    truth: np.ndarray | None
    meta: dict

    @property
    def n(self) -> int:
        return self.A.n


@dataclass(frozen=True)
class AdversarySpec:
    """Symmetric perturbation whose sign pattern agrees with a sign vector x.

    Construction guarantees delta o x x^T >= 0 entrywise; the induced
    certificate increment bdg(delta x x^T) - delta is checked to be PSD.
    """

    delta: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        D = np.ascontiguousarray(self.delta, dtype=np.float64)
        xv = np.asarray(self.x, dtype=np.float64).reshape(-1)
        n = xv.shape[0]
        if D.shape != (n, n):
            raise ShapeError(f"delta must be ({n}, {n}), got {D.shape}")
        if np.max(np.abs(D - D.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(D), initial=0.0)):
            raise ValidationError("delta must be symmetric")
        if np.min(D * np.outer(xv, xv)) < 0:
            raise ValidationError("delta violates the sign pattern delta o x x^T >= 0")
        L = certificate_increment(D, xv)
        w = np.linalg.eigvalsh(L)
        if w[0] < -1e-10 * max(1.0, w[-1]):
            raise ValidationError(f"bdg(delta x x^T) - delta is not PSD: min eig {w[0]:.3e}")
        D.setflags(write=False)
        object.__setattr__(self, "delta", D)
        xv.setflags(write=False)
        object.__setattr__(self, "x", xv)


def certificate_increment(delta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """bdg(delta x x^T) - delta for a scalar (d = 1) perturbation."""
    return np.diag((delta @ x) * x) - delta


def _sym_from_upper(n: int, iu, values: np.ndarray) -> np.ndarray:
    A = np.zeros((n, n))
    A[iu] = values
    return A + A.T


def gen_z2(n: int, sigma: float, seed: int) -> ModelInstance:
    """Rank-one +-1 signal plus symmetric Gaussian noise with zero diagonal.

    Draw order: sign vector x, then the upper-triangular noise entries.
    """
    if n < 2:
        raise ValidationError(f"need n >= 2, got {n}")
    if sigma < 0:
        raise ValidationError(f"need sigma >= 0, got {sigma}")
    rng = rng_from(seed)
    x = rng.integers(0, 2, size=n) * 2.0 - 1.0
    iu = np.triu_indices(n, 1)
    W = _sym_from_upper(n, iu, rng.standard_normal(iu[0].shape[0]))
    A = np.outer(x, x) + sigma * W
    return ModelInstance(
        A=BlockSymMatrix(n, 1, A), d=1, truth=x,
        meta={"model": "z2", "n": n, "d": 1, "sigma": float(sigma), "seed": int(seed)},
    )


def gen_sbm(n: int, p_in: float, p_out: float, seed: int) -> ModelInstance:
    """Two balanced communities; entries are centered Bernoulli draws.

    Entry (i, j), i < j, is Ber(p_in) - (p_in + p_out)/2 inside a community
    and Ber(p_out) - (p_in + p_out)/2 across; symmetric, zero diagonal.
    """
    if n < 2 or n % 2 != 0:
        raise ValidationError(f"need even n >= 2, got {n}")
    if not (0 <= p_out < p_in <= 1):
        raise ValidationError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    rng = rng_from(seed)
    x = np.concatenate([np.ones(n // 2), -np.ones(n // 2)])
    iu = np.triu_indices(n, 1)
    same = x[iu[0]] * x[iu[1]] > 0
    prob = np.where(same, p_in, p_out)
    draws = (rng.random(iu[0].shape[0]) < prob).astype(np.float64)
    A = _sym_from_upper(n, iu, draws - (p_in + p_out) / 2.0)
    return ModelInstance(
        A=BlockSymMatrix(n, 1, A), d=1, truth=x,
        meta={"model": "sbm", "n": n, "d": 1, "p_in": float(p_in), "p_out": float(p_out),
              "seed": int(seed)},
    )


def gen_signed_kuramoto(n: int, theta: float, seed: int) -> ModelInstance:
    """All-ones coupling with each off-diagonal pair flipped to -1 w.p. theta.

    A = J - 2B with B a symmetric Bernoulli(theta) adjacency (zero diagonal);
    the diagonal of A stays +1. The boundary theta = 1 (all repulsive) is
    accepted since it is a well-defined limit.
    """
    if n < 2:
        raise ValidationError(f"need n >= 2, got {n}")
    if not 0 <= theta <= 1:
        raise ValidationError(f"need 0 <= theta <= 1, got {theta}")
    rng = rng_from(seed)
    iu = np.triu_indices(n, 1)
    b_upper = (rng.random(iu[0].shape[0]) < theta).astype(np.float64)
    B = _sym_from_upper(n, iu, b_upper)
    A = np.ones((n, n)) - 2.0 * B
    return ModelInstance(
        A=BlockSymMatrix(n, 1, A), d=1, truth=np.ones(n),
        meta={"model": "kuramoto", "n": n, "d": 1, "theta": float(theta), "seed": int(seed),
              "b_matrix": B.astype(np.uint8)},
    )


def gen_od_sync(n: int, d: int, sigma: float, seed: int) -> ModelInstance:
    """Gram matrix of Haar orthogonal blocks plus symmetric block Gaussian noise.

    Draw order: the n Gaussian d x d matrices whose polar factors give the
    planted blocks, then one (n*d) x (n*d) Gaussian whose upper off-diagonal
    blocks are kept, mirrored below, and whose diagonal blocks are symmetrized.
    """
    if n < 2 or d < 1:
        raise ValidationError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    if sigma < 0:
        raise ValidationError(f"need sigma >= 0, got {sigma}")
    rng = rng_from(seed)
    G = rng.standard_normal((n * d, d))
    O = polish_orthonormal(kernels.polar_factor(G, n, d), n, d).reshape(n, d, d)
    raw = rng.standard_normal((n * d, n * d))
    W = np.zeros((n * d, n * d))
    for i in range(n):
        ri = slice(i * d, (i + 1) * d)
        W[ri, ri] = 0.5 * (raw[ri, ri] + raw[ri, ri].T)
        for j in range(i + 1, n):
            rj = slice(j * d, (j + 1) * d)
            W[ri, rj] = raw[ri, rj]
            W[rj, ri] = raw[ri, rj].T
    Os = O.reshape(n * d, d)
    A = Os @ Os.T + sigma * W
    return ModelInstance(
        A=BlockSymMatrix(n, d, A), d=d, truth=O,
        meta={"model": "odsync", "n": n, "d": d, "sigma": float(sigma), "seed": int(seed)},
    )


def gen_procrustes(n: int, d: int, m: int, sigma: float, seed: int,
                   A_bar: np.ndarray | None = None) -> ModelInstance:
    """Pairwise products of rotated noisy copies of a shared point cloud.

    Copy i is O_i A_bar + sigma W_i with Haar O_i and Gaussian W_i; the data
    matrix has (i, j)-block A_i A_j^T for all pairs including i = j, so it is
    the PSD Gram matrix of the stacked copies. Draw order: A_bar (when not
    supplied), the n rotation seeds, then the noise stack.
    """
    if n < 2 or d < 1:
        raise ValidationError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    if m < d:
        raise ValidationError(f"need m >= d, got m={m}, d={d}")
    if sigma < 0:
        raise ValidationError(f"need sigma >= 0, got {sigma}")
    rng = rng_from(seed)
    if A_bar is None:
        A_bar = rng.standard_normal((d, m))
    else:
        A_bar = np.asarray(A_bar, dtype=np.float64)
        if A_bar.shape != (d, m):
            raise ShapeError(f"A_bar must be ({d}, {m}), got {A_bar.shape}")
    G = rng.standard_normal((n * d, d))
    O = polish_orthonormal(kernels.polar_factor(G, n, d), n, d).reshape(n, d, d)
    W = rng.standard_normal((n * d, m))
    P = (O @ A_bar).reshape(n * d, m) + sigma * W
    A = P @ P.T
    return ModelInstance(
        A=BlockSymMatrix(n, d, A), d=d, truth=O,
        meta={"model": "procrustes", "n": n, "d": d, "m": int(m), "sigma": float(sigma),
              "seed": int(seed), "a_bar": A_bar},
    )


def gen_adversary(x: np.ndarray, n: int, density: float, magnitude: float, seed: int) -> AdversarySpec:
    """Random sign-aligned perturbation: each off-diagonal pair is nonzero
    with probability ``density``, with value sign(x_i x_j) * u * magnitude for
    u uniform on (0, 1). Draw order: the density mask, then the magnitudes."""
    if not 0 <= density <= 1:
        raise ValidationError(f"need density in [0, 1], got {density}")
    if magnitude <= 0:
        raise ValidationError(f"need magnitude > 0, got {magnitude}")
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    if xv.shape != (n,):
        raise ShapeError(f"x must have length {n}, got {xv.shape}")
    if not np.all(np.abs(xv) == 1.0):
        raise ValidationError("x must be a +-1 vector")
    rng = rng_from(seed)
    iu = np.triu_indices(n, 1)
    mask = rng.random(iu[0].shape[0]) < density
    mags = rng.random(iu[0].shape[0]) * magnitude
    signs = xv[iu[0]] * xv[iu[1]]
    delta = _sym_from_upper(n, iu, np.where(mask, signs * mags, 0.0))
    return AdversarySpec(delta=delta, x=xv)


def apply_adversary(inst: ModelInstance, adv: AdversarySpec) -> ModelInstance:
    """Add the perturbation to a scalar-model instance whose truth matches."""
    if inst.d != 1:
        raise ValidationError("adversaries are defined for d = 1 instances only")
    if inst.truth is None or not np.array_equal(np.asarray(inst.truth), adv.x):
        raise ValidationError("adversary sign vector does not match the instance truth")
    meta = dict(inst.meta)
    meta["adversary_entries"] = int(np.count_nonzero(np.triu(adv.delta, 1)))
    meta["adversary_max"] = float(np.max(np.abs(adv.delta), initial=0.0))
    return ModelInstance(
        A=BlockSymMatrix(inst.A.n, 1, inst.A.entries + adv.delta),
        d=1, truth=inst.truth, meta=meta,
    )


@dataclass(frozen=True)
class ThresholdResult:
    bound: float
    description: str
    constant_unspecified: bool


def corollary_thresholds(model: str, **params) -> ThresholdResult:
    """Closed-form parameter thresholds for the benign-landscape corollaries.

    Absolute constants the analysis leaves unspecified (``c0`` for sbm, ``c``
    for odsync/gopp) are explicit inputs defaulting to 1; results computed
    with a defaulted constant are flagged ``constant_unspecified``.
    """
    if model == "z2":
        n, p = params["n"], params["p"]
        if p < 4:
            raise ThresholdUndefinedError(f"z2 threshold needs p >= 4, got p={p}")
        bound = (p - 3) / (4.0 * (p + 1)) * math.sqrt(n / math.log(n))
        return ThresholdResult(bound, "max noise level sigma for a benign landscape", False)
    if model == "kuramoto":
        n, p = params["n"], params["p"]
        gamma = params.get("gamma", 1.0)
        if p < 4:
            raise ThresholdUndefinedError(f"kuramoto threshold needs p >= 4, got p={p}")
        bound = 0.5 - (p + 1) / (p - 3) * math.sqrt(3.0 * (gamma + 1.0) * math.log(n) / n)
        return ThresholdResult(bound, "max repulsive-edge probability theta for global synchrony", False)
    if model == "sbm":
        p = params["p"]
        c0 = params.get("c0", 1.0)
        if p < 4:
            raise ThresholdUndefinedError(f"sbm threshold needs p >= 4, got p={p}")
        bound = 2.0 * c0 * (p + 1) / (p - 3)
        return ThresholdResult(
            bound, "min (a-b)/sqrt(a+b) for a benign landscape, with p_in=a log(n)/n, p_out=b log(n)/n",
            "c0" not in params)
    if model == "odsync":
        n, d, p = params["n"], params["d"], params["p"]
        c = params.get("c", 1.0)
        if p < d + 3:
            raise ThresholdUndefinedError(f"odsync threshold needs p >= d + 3, got p={p}, d={d}")
        bound = (p - d - 2) / (p + 3 * d - 2) * math.sqrt(n) / (
            c * math.sqrt(d) * (math.sqrt(d) + 4.0 * math.sqrt(math.log(n))))
        return ThresholdResult(bound, "max noise level sigma for a benign landscape", "c" not in params)
    if model == "gopp":
        n, d, p, m = params["n"], params["d"], params["p"], params["m"]
        gamma = params.get("gamma", 1.0)
        kappa = params.get("kappa", 1.0)
        abar_norm = params.get("abar_norm", 1.0)
        c = params.get("c", 1.0)
        num = p + d - 2.0 * kappa ** 2 * d - 2.0
        if num <= 0:
            raise ThresholdUndefinedError(
                f"gopp threshold needs p + d - 2 k^2 d - 2 > 0, got p={p}, d={d}, kappa={kappa}")
        bound = num / (p + d + 2.0 * kappa ** 2 * d - 2.0) * math.sqrt(n) * abar_norm / (
            c * kappa ** 4 * math.sqrt(d)
            * (math.sqrt(n * d) + math.sqrt(m) + math.sqrt(2.0 * gamma * n * math.log(n))))
        return ThresholdResult(bound, "max noise level sigma for a benign landscape", "c" not in params)
    raise ValidationError(f"unknown model {model!r}")


_GENERATORS = {
    "z2": lambda n, seed, **kw: gen_z2(n, kw.get("sigma", 0.0), seed),
    "sbm": lambda n, seed, **kw: gen_sbm(n, kw.get("p_in", 0.5), kw.get("p_out", 0.1), seed),
    "kuramoto": lambda n, seed, **kw: gen_signed_kuramoto(n, kw.get("theta", 0.0), seed),
    "odsync": lambda n, seed, **kw: gen_od_sync(n, kw.get("d", 2), kw.get("sigma", 0.0), seed),
    "procrustes": lambda n, seed, **kw: gen_procrustes(
        n, kw.get("d", 2), kw.get("m", 2 * kw.get("d", 2)), kw.get("sigma", 0.0), seed),
}

MODEL_NAMES = tuple(sorted(_GENERATORS))

#: Scalar parameters echoed into sidecar metadata, per model.
_DECLARED_PARAMS = {
    "z2": ("sigma",),
    "sbm": ("p_in", "p_out"),
    "kuramoto": ("theta",),
    "odsync": ("sigma",),
    "procrustes": ("m", "sigma"),
}


def generate(model: str, n: int, seed: int, **params) -> ModelInstance:
    """Dispatch to a named generator (used by the CLI and the sweep harness)."""
    if model not in _GENERATORS:
        raise ValidationError(f"unknown model {model!r}; choose from {', '.join(MODEL_NAMES)}")
    return _GENERATORS[model](n, seed, **params)


def write_sidecar(inst: ModelInstance, path) -> None:
    """key=value metadata file: model, dimensions, declared parameters, seed,
    and the planted truth (+-1 list, or row-major orthogonal blocks)."""
    meta = inst.meta
    model = meta["model"]
    with open(path, "w") as fh:
        fh.write(f"model={model}\n")
        fh.write(f"n={inst.A.n}\n")
        fh.write(f"d={inst.d}\n")
        for key in _DECLARED_PARAMS.get(model, ()):
            val = meta[key]
            fh.write(f"{key}={val:d}\n" if isinstance(val, int) else f"{key}={val:.17g}\n")
        for key in ("adversary_density", "adversary_magnitude", "adversary_seed"):
            if key in meta:
                val = meta[key]
                fh.write(f"{key}={val:d}\n" if isinstance(val, int) else f"{key}={val:.17g}\n")
        fh.write(f"seed={meta['seed']}\n")
        if inst.truth is not None:
            t = np.asarray(inst.truth)
            if inst.d == 1:
                fh.write("truth=" + ",".join(str(int(v)) for v in t) + "\n")
            else:
                fh.write("truth=" + ",".join(f"{v:.17g}" for v in t.reshape(-1)) + "\n")


def read_sidecar(path, n: int | None = None, d: int | None = None) -> dict:
    """Parse a sidecar file back into a metadata dict; truth becomes an array
    once the dimensions are known (from the file itself or the arguments)."""
    meta: dict = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, val = line.split("=", 1)
            meta[key] = val
    for key in ("n", "d", "seed", "m"):
        if key in meta:
            meta[key] = int(meta[key])
    for key in ("sigma", "theta", "p_in", "p_out", "adversary_density", "adversary_magnitude"):
        if key in meta:
            meta[key] = float(meta[key])
    n = meta.get("n", n)
    d = meta.get("d", d)
    if "truth" in meta and n is not None and d is not None:
        vals = np.array([float(v) for v in meta["truth"].split(",")])
        meta["truth"] = vals if d == 1 else vals.reshape(n, d, d)
    return meta
