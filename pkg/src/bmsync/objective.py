"""Energy, Riemannian derivatives, and the global-optimality certificate.

The energy of a point S on the product Stiefel manifold is
``-0.5 * <A, S S^T>``. Note this includes the diagonal blocks of A, so it
differs from the strict pairwise sum over i < j by the constant
``-0.5 * sum_i tr(A_ii)``, which does not depend on S; gradients and all
landscape statements are unaffected, and one code path serves every model.

At a candidate point the certificate matrix ``L = bdg(A S S^T) - A`` is
assembled; L positive semidefinite with L S = 0 and a positive (d+1)-th
smallest eigenvalue certifies that S S^T is the unique global minimizer, and
the spectrum of L yields the minimal embedding width with a benign landscape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._rng import derive_seed, rng_from
from .blockmat import BlockSymMatrix, SpectralSummary, eigen_sym, opnorm_estimate
from .errors import ShapeError, ThresholdUndefinedError, ValidationError
from .manifold import ProductStiefelPoint, TangentDirection, as_orthogonal_blocks

#: Default certification tolerances (an order above eigensolver residuals).
DEFAULT_TOL_GRAD = 1e-8
DEFAULT_TOL_PSD = 1e-8

#: Tangency residual accepted when a quadratic form is evaluated.
_TANGENCY_CHECK_TOL = 1e-8


def _check_pair(A: BlockSymMatrix, S: ProductStiefelPoint) -> None:
    if A.n != S.n or A.d != S.d:
        raise ShapeError(f"matrix blocks ({A.n}, {A.d}) do not match point blocks ({S.n}, {S.d})")


def energy(A: BlockSymMatrix, S: ProductStiefelPoint) -> float:
    """-0.5 * <A, S S^T> (diagonal blocks included; see module docstring)."""
    _check_pair(A, S)
    return -0.5 * float(np.vdot(S.stack, A.entries @ S.stack))


def riemannian_gradient(A: BlockSymMatrix, S: ProductStiefelPoint) -> TangentDirection:
    """Blockwise -P_{S_i}(sum_j A_ij S_j)."""
    _check_pair(A, S)
    Z = A.entries @ S.stack
    return TangentDirection(-kernels.project_tangent(S.stack, Z, S.n, S.d), S)


def _tangency_guard(S: ProductStiefelPoint, V: TangentDirection) -> None:
    if not np.array_equal(V.base.stack, S.stack):
        raise ValidationError("direction is not based at the given point")
    Vb = V.blocks
    skew = Vb @ S.blocks.transpose(0, 2, 1)
    res = np.linalg.norm(skew + skew.transpose(0, 2, 1), axis=(1, 2))
    scale = np.maximum(1.0, np.linalg.norm(Vb, axis=(1, 2)))
    if np.any(res > _TANGENCY_CHECK_TOL * scale):
        raise ValidationError("direction violates tangency beyond tolerance")


def hessian_quadratic_form(A: BlockSymMatrix, S: ProductStiefelPoint, V: TangentDirection) -> float:
    """<bdg(A S S^T) - A, V V^T> for a tangent direction V at S."""
    _check_pair(A, S)
    _tangency_guard(S, V)
    lam = kernels.block_sym_outer(A.entries @ S.stack, S.stack, S.n, S.d)
    Vb = V.blocks
    diag_part = float(np.sum(lam * (Vb @ Vb.transpose(0, 2, 1))))
    full_part = float(np.vdot(V.stack, A.entries @ V.stack))
    return diag_part - full_part


def assemble_block_diag(blocks: np.ndarray, n: int, d: int) -> np.ndarray:
    """Dense (n*d) x (n*d) matrix with the given (n, d, d) diagonal blocks."""
    out = np.zeros((n * d, n * d))
    for i in range(n):
        out[i * d:(i + 1) * d, i * d:(i + 1) * d] = blocks[i]
    return out


@dataclass(frozen=True)
class Certificate:
    """Certificate matrix L = bdg(A S S^T) - A at a candidate point, with its
    spectral summary and the quantities the optimality test consumes."""

    L: BlockSymMatrix
    lambda_block: np.ndarray
    spectrum: SpectralSummary
    grad_residual: float
    is_psd: bool
    kth_gap: float
    p_min_benign: int | None
    a_opnorm: float
    n: int
    d: int

    @property
    def lambda_max(self) -> float:
        return self.spectrum.max_eig


@dataclass(frozen=True)
class CertifyResult:
    certified: bool
    reason: str


def build_certificate(A: BlockSymMatrix, S: ProductStiefelPoint, psd_rtol: float = DEFAULT_TOL_PSD) -> Certificate:
    """Assemble L, its spectrum, the residual ||L S||_F, and the implied
    minimal benign embedding width."""
    _check_pair(A, S)
    n, d = A.n, A.d
    lam = kernels.block_sym_outer(A.entries @ S.stack, S.stack, n, d)
    L_entries = assemble_block_diag(lam, n, d) - A.entries
    L = BlockSymMatrix(n, d, L_entries)
    spectrum = eigen_sym(L)
    grad_residual = float(np.linalg.norm(L.entries @ S.stack))
    is_psd = spectrum.min_eig >= -psd_rtol * max(1.0, spectrum.max_eig)
    kth_gap = spectrum.kth_smallest(d + 1) if d + 1 <= n * d else float("nan")
    p_min = None
    if math.isfinite(kth_gap) and kth_gap > 0:
        p_min = benign_threshold_p(spectrum.max_eig, kth_gap, d)
    return Certificate(
        L=L,
        lambda_block=lam,
        spectrum=spectrum,
        grad_residual=grad_residual,
        is_psd=is_psd,
        kth_gap=kth_gap,
        p_min_benign=p_min,
        a_opnorm=opnorm_estimate(A),
        n=n,
        d=d,
    )


def certify_global(cert: Certificate, tol_grad: float = DEFAULT_TOL_GRAD,
                   tol_psd: float = DEFAULT_TOL_PSD) -> CertifyResult:
    """Global-optimality test: L PSD, L S = 0 within tolerance, positive gap."""
    if cert.spectrum.min_eig < -tol_psd * max(1.0, cert.spectrum.max_eig):
        return CertifyResult(False, "L not PSD")
    if cert.grad_residual > tol_grad * cert.a_opnorm:
        return CertifyResult(False, "LS residual above tolerance")
    if not (math.isfinite(cert.kth_gap) and cert.kth_gap > tol_psd * cert.spectrum.max_eig):
        return CertifyResult(False, "spectral gap not positive")
    return CertifyResult(True, "certified")


def benign_threshold_p(lambda_max: float, lambda_kth: float, d: int) -> int:
    """Smallest integer p with p >= (2*lambda_max/lambda_kth - 1)*d + 2.

    For d = 1 this coincides with 2*lambda_max/lambda_2 + 1.
    """
    if lambda_kth <= 0:
        raise ThresholdUndefinedError(f"threshold undefined: lambda_kth={lambda_kth} <= 0")
    bound = (2.0 * lambda_max / lambda_kth - 1.0) * d + 2.0
    return int(math.ceil(bound - 1e-12))


@dataclass(frozen=True)
class AlphaCondition:
    alpha: float
    p_min: int | None


def alpha_condition(L: BlockSymMatrix, x: np.ndarray, r: float) -> AlphaCondition:
    """Deviation of L from r * (I - x x^T / n) in operator norm, as a fraction
    alpha of r, and the smallest p with alpha <= (p-3)/(p+1)."""
    if L.d != 1:
        raise ValidationError("alpha_condition is defined for d = 1 only")
    if r <= 0:
        raise ValidationError(f"need r > 0, got {r}")
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    n = L.n
    if xv.shape != (n,):
        raise ShapeError(f"x must have length {n}, got {xv.shape}")
    if not np.all(np.abs(xv) == 1.0):
        raise ValidationError("x must be a +-1 vector")
    target = r * (np.eye(n) - np.outer(xv, xv) / n)
    dev = np.linalg.eigvalsh(L.entries - target)
    alpha = float(max(abs(dev[0]), abs(dev[-1]))) / r
    if alpha >= 1.0:
        return AlphaCondition(alpha, None)
    return AlphaCondition(alpha, int(math.ceil((3.0 + alpha) / (1.0 - alpha) - 1e-12)))


def x_matrix(S: ProductStiefelPoint, o_hat) -> np.ndarray:
    """n x n alignment Gram: X_ij = <O_i^T S_i, O_j^T S_j>; PSD with X_ii = d."""
    O = as_orthogonal_blocks(o_hat, S.n, S.d)
    T = (O.transpose(0, 2, 1) @ S.blocks).reshape(S.n, S.d * S.p)
    return T @ T.T


# ---------------------------------------------------------------------------
# Randomized battery for the algebraic facts the landscape analysis rests on.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LemmaCheck:
    name: str
    trials: int
    violations: int
    worst_margin: float  # most negative slack margin observed (>= -slack passes)


@dataclass(frozen=True)
class LemmaReport:
    checks: tuple[LemmaCheck, ...]
    gauss_draws: int
    gauss_max_se_ratio: float
    passed: bool

    def summary_lines(self) -> list[str]:
        lines = []
        for c in self.checks:
            status = "pass" if c.violations == 0 else "FAIL"
            lines.append(
                f"{status} {c.name}: {c.trials} trials, {c.violations} violations, "
                f"worst margin {c.worst_margin:.3e}"
            )
        status = "pass" if self.gauss_max_se_ratio <= 5.0 else "FAIL"
        lines.append(
            f"{status} gaussian_moment_identities: {self.gauss_draws} draws, "
            f"max |mean-target|/SE = {self.gauss_max_se_ratio:.3f}"
        )
        return lines


def _random_psd(rng: np.random.Generator, n: int) -> np.ndarray:
    R = rng.standard_normal((n, rng.integers(n, 2 * n + 1)))
    return R @ R.T


def _gram_with_diag(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    G = _random_psd(rng, n)
    scale = np.sqrt(d / np.diag(G))
    return G * np.outer(scale, scale)


def gauss_identity_check(draws: int = 100000, seed: int = 0, d: int = 2, p: int = 5) -> float:
    """Monte Carlo check of the two Gaussian moment identities used by the
    expected-direction computation; returns max |mean - target| / SE."""
    rng = rng_from(derive_seed("gauss-check", seed))
    U = rng.standard_normal((d, p))
    V = rng.standard_normal((d, p))
    Phi = rng.standard_normal((draws, d, p))
    # First identity: E Phi U^T V Phi^T = <U, V> I_d.
    t1 = np.einsum("mdp,pq,meq->mde", Phi, U.T @ V, Phi)
    target1 = float(np.vdot(U, V)) * np.eye(d)
    # Second identity: E Phi U^T Phi V^T = U V^T.
    t2 = np.einsum("mdp,ep,meq,fq->mdf", Phi, U, Phi, V)
    target2 = U @ V.T
    worst = 0.0
    for samples, target in ((t1, target1), (t2, target2)):
        mean = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / math.sqrt(draws)
        ratio = np.abs(mean - target) / np.maximum(se, 1e-300)
        worst = max(worst, float(ratio.max()))
    return worst


def proof_lemma_checks(trials: int = 1000, seed: int = 0, slack: float = 1e-9,
                       gauss_draws: int = 100000) -> LemmaReport:
    """Randomized verification battery; failures are reported, never raised.

    Checks, each over ``trials`` random instances:
      - gram diagonal bound: PSD X with diag d satisfies
        0 <= n d^2 - ||X||_F^2 / n <= 2 d (n d - <X, J>/n);
      - Hadamard product of PSD matrices is PSD, and <X, Y> <= ||X|| ||Y||_*;
      - gap inequality: when X's d-dim null space lies in Y's,
        <X, Y> >= lambda_{d+1}(X) tr((I - Pi) Y);
      - absorption: bdg(Lam S S^T) = Lam for block-diagonal symmetric Lam.
    Plus a Monte Carlo check of the Gaussian moment identities.
    """
    rng = rng_from(derive_seed("lemma-battery", seed))
    results = []

    viol = 0
    worst = math.inf
    for _ in range(trials):
        n = int(rng.integers(3, 13))
        d = int(rng.integers(1, 4))
        X = _gram_with_diag(rng, n, d)
        lhs = n * d * d - float(np.sum(X * X)) / n
        rhs = 2.0 * d * (n * d - float(np.sum(X)) / n)
        margin = min(lhs, rhs - lhs)
        worst = min(worst, margin)
        if margin < -slack:
            viol += 1
    results.append(LemmaCheck("gram_diag_bound", trials, viol, worst))

    viol = 0
    worst = math.inf
    for _ in range(trials):
        n = int(rng.integers(3, 13))
        X = _random_psd(rng, n)
        Y = _random_psd(rng, n)
        had_min = float(np.linalg.eigvalsh(X * Y)[0])
        wX = np.linalg.eigvalsh(X)
        wY = np.linalg.eigvalsh(Y)
        trace_margin = float(wX[-1]) * float(np.sum(np.abs(wY))) - float(np.vdot(X, Y))
        scale = max(1.0, float(wX[-1]) * float(wY[-1]))
        margin = min(had_min / scale, trace_margin / scale)
        worst = min(worst, margin)
        if margin < -slack:
            viol += 1
    results.append(LemmaCheck("hadamard_and_trace", trials, viol, worst))

    viol = 0
    worst = math.inf
    for _ in range(trials):
        n = int(rng.integers(3, 13))
        d = int(rng.integers(1, min(3, n - 1) + 1))
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        Q2 = Q[:, d:]
        evals = rng.uniform(0.1, 2.0, size=n - d)
        X = (Q2 * evals) @ Q2.T
        B = _random_psd(rng, n - d)
        Y = Q2 @ B @ Q2.T
        Pi = Q[:, :d] @ Q[:, :d].T
        lhs = float(np.vdot(X, Y))
        rhs = float(np.min(evals)) * float(np.trace((np.eye(n) - Pi) @ Y))
        scale = max(1.0, abs(lhs))
        margin = (lhs - rhs) / scale
        worst = min(worst, margin)
        if margin < -slack:
            viol += 1
    results.append(LemmaCheck("gap_inequality", trials, viol, worst))

    from .manifold import random_point  # local import to avoid cycle at load

    viol = 0
    worst = math.inf
    for k in range(trials):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(1, 4))
        p = int(rng.integers(d, d + 4))
        S = random_point(n, d, p, derive_seed("absorption", seed, k))
        blocks = rng.standard_normal((n, d, d))
        blocks = 0.5 * (blocks + blocks.transpose(0, 2, 1))
        lam_full = assemble_block_diag(blocks, n, d)
        out = kernels.bdg(lam_full @ (S.stack @ S.stack.T), n, d)
        err = float(np.max(np.abs(out - lam_full)))
        margin = 1e-10 - err
        worst = min(worst, margin)
        if err > 1e-10:
            viol += 1
    results.append(LemmaCheck("bdg_absorption", trials, viol, worst))

    gauss_ratio = gauss_identity_check(gauss_draws, seed)
    passed = all(c.violations == 0 for c in results) and gauss_ratio <= 5.0
    return LemmaReport(tuple(results), gauss_draws, gauss_ratio, passed)
