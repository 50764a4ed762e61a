"""Riemannian gradient descent with backtracking and saddle escape.

The scheme is deliberately simple so landscape phenomena stay legible:
Armijo line search along the negative Riemannian gradient with the polar
retraction; once the gradient is converged, random tangent probes (plus
reference-direction probes when a planted truth is available) look for
negative curvature, stepping along any witness found and resuming descent.
The run ends at a point that is gradient-converged and probe-clean, and a
global-optimality certificate is attached.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._rng import derive_seed, rng_from
from .blockmat import BlockSymMatrix, opnorm_estimate
from .errors import ValidationError
from .manifold import (
    ProductStiefelPoint,
    TangentDirection,
    as_orthogonal_blocks,
    proof_direction,
    random_tangent,
    random_point,
    retract,
)
from .objective import Certificate, build_certificate, certify_global, energy, hessian_quadratic_form

#: Line-search steps below this are treated as underflow.
_MIN_STEP = 1e-16


@dataclass(frozen=True)
class SolverConfig:
    """Descent parameters; ``initial_step`` defaults to 1 over the estimated
    operator norm of the data matrix."""

    p: int
    max_iters: int = 5000
    grad_tol: float = 1e-9
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float | None = None
    escape_probes: int = 30
    escape_step: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError("max_iters must be positive")
        for name in ("grad_tol", "armijo_c", "escape_step"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValidationError("backtrack_factor must lie in (0, 1)")
        if self.initial_step is not None and self.initial_step <= 0:
            raise ValidationError("initial_step must be positive")
        if self.escape_probes < 0:
            raise ValidationError("escape_probes must be nonnegative")


@dataclass(frozen=True)
class ProbeResult:
    is_socp: bool
    witness: TangentDirection | None
    min_quadform: float


@dataclass(frozen=True)
class SolveReport:
    final_point: ProductStiefelPoint
    energy_trace: list[float]
    grad_norm_trace: list[float]
    iterations: int
    status: str
    certificate: Certificate
    certified: bool
    certify_reason: str
    escapes: int


def _unit_tangent(V: TangentDirection) -> TangentDirection | None:
    nrm = V.norm()
    if nrm <= 1e-300:
        return None
    return TangentDirection(V.stack / nrm, V.base)


def socp_probe(A: BlockSymMatrix, S: ProductStiefelPoint, k: int, seed: int,
               tol: float = 1e-8, o_hat=None, a_opnorm: float | None = None,
               warn: bool = True) -> ProbeResult:
    """Search for negative curvature at a (near-)critical point.

    Evaluates the Hessian quadratic form on k unit-norm random tangents plus,
    when a reference orthogonal stack is supplied, k unit-norm reference
    directions with fresh Gaussian probe matrices. ``is_socp`` means no value
    fell below -tol * ||A||_op.
    """
    a_op = opnorm_estimate(A) if a_opnorm is None else a_opnorm
    if warn:
        grad = A.entries @ S.stack
        gnorm = float(np.linalg.norm(kernels.project_tangent(S.stack, grad, S.n, S.d)))
        if gnorm > 1e-4 * max(1.0, a_op) * math.sqrt(S.n * S.d):
            warnings.warn(
                f"socp_probe called away from a critical point (grad norm {gnorm:.3e})",
                stacklevel=2,
            )
    refs = None if o_hat is None else as_orthogonal_blocks(o_hat, S.n, S.d)
    best_q = math.inf
    witness = None
    for j in range(k):
        V = _unit_tangent(random_tangent(S, derive_seed("probe-rand", seed, j)))
        if V is None:
            continue
        q = hessian_quadratic_form(A, S, V)
        if q < best_q:
            best_q, witness = q, V
    if refs is not None:
        for j in range(k):
            phi = rng_from(derive_seed("probe-ref", seed, j)).standard_normal((S.d, S.p))
            V = _unit_tangent(proof_direction(S, refs, phi))
            if V is None:
                continue
            q = hessian_quadratic_form(A, S, V)
            if q < best_q:
                best_q, witness = q, V
    if not math.isfinite(best_q):
        return ProbeResult(True, None, 0.0)
    is_socp = best_q >= -tol * a_op
    return ProbeResult(is_socp, None if is_socp else witness, best_q)


def solve(A: BlockSymMatrix, d: int, cfg: SolverConfig, truth=None,
          start: ProductStiefelPoint | None = None) -> SolveReport:
    """Minimize the energy over the product Stiefel manifold, escape probed
    saddles, and certify the final point.

    The run starts from ``random_point(cfg.seed)`` unless an explicit warm
    start is supplied.
    """
    if A.d != d:
        raise ValidationError(f"matrix block size {A.d} != requested d={d}")
    if cfg.p < d:
        raise ValidationError(f"need p >= d, got p={cfg.p}, d={d}")
    n = A.n
    o_hat = None if truth is None else as_orthogonal_blocks(truth, n, d)
    a_op = opnorm_estimate(A)
    step0 = cfg.initial_step if cfg.initial_step is not None else (1.0 / a_op if a_op > 0 else 1.0)
    # Convergence scale ||A||_op * sqrt(n d), capped at 10 * grad_tol * ||A||_op
    # so that at default tolerances the stop threshold never exceeds the
    # certificate's residual gate (the residual ||L S||_F equals the gradient
    # norm identically, so stopping above that gate could never certify).
    grad_threshold = cfg.grad_tol * a_op * min(math.sqrt(n * d), 10.0)

    if start is not None and (start.n != n or start.d != d or start.p != cfg.p):
        raise ValidationError("start point does not match the instance dimensions")
    S = start if start is not None else random_point(n, d, cfg.p, cfg.seed)
    f = energy(A, S)
    energies = [f]
    grad_norms: list[float] = []
    iterations = 0
    escapes = 0
    status = "max_iters"
    step_work = step0

    while iterations < cfg.max_iters:
        Z = A.entries @ S.stack
        lam = kernels.block_sym_outer(Z, S.stack, n, d)
        grad_stack = (lam @ S.blocks - Z.reshape(n, d, cfg.p)).reshape(n * d, cfg.p)
        gnorm = float(np.linalg.norm(grad_stack))
        grad_norms.append(gnorm)

        if gnorm <= grad_threshold:
            probe = socp_probe(
                A, S, cfg.escape_probes, derive_seed("escape", cfg.seed, escapes),
                o_hat=o_hat, a_opnorm=a_op, warn=False,
            )
            if probe.witness is None:
                status = "converged" if escapes == 0 else f"escaped_{escapes}_times"
                break
            up = retract(S, probe.witness, cfg.escape_step)
            down = retract(S, probe.witness, -cfg.escape_step)
            f_up, f_down = energy(A, up), energy(A, down)
            cand, f_cand = (up, f_up) if f_up <= f_down else (down, f_down)
            if f_cand >= f:
                # Curvature too shallow to realize a decrease at this step size.
                status = "converged" if escapes == 0 else f"escaped_{escapes}_times"
                break
            S, f = cand, f_cand
            energies.append(f)
            iterations += 1
            escapes += 1
            continue

        direction = TangentDirection(-grad_stack, S)
        df0 = -gnorm * gnorm
        t = step_work
        underflow = False
        # The 1e-12|f| slack keeps acceptance meaningful once the true Armijo
        # decrease drops below the floating-point resolution of the energy;
        # accepted steps stay within the report's monotonicity contract.
        slack = 1e-12 * abs(f)
        while True:
            cand = retract(S, direction, t)
            f_cand = energy(A, cand)
            if f_cand <= f + cfg.armijo_c * t * df0 + slack:
                break
            t *= cfg.backtrack_factor
            if t < _MIN_STEP:
                underflow = True
                break
        if underflow:
            status = "step_underflow"
            break
        if f_cand > f + cfg.armijo_c * t * df0 and step_work > 1e-6 * step0:
            # Acceptance leaned on the fp slack: the energy can no longer
            # resolve the decrease. Shrink the working step so marginal
            # curvature modes (t * lambda near 2) keep contracting instead of
            # entering a period-two cycle at the fp floor.
            step_work = 0.5 * step_work
        S, f = cand, f_cand
        energies.append(f)
        iterations += 1

    certificate = build_certificate(A, S)
    verdict = certify_global(certificate)
    return SolveReport(
        final_point=S,
        energy_trace=energies,
        grad_norm_trace=grad_norms,
        iterations=iterations,
        status=status,
        certificate=certificate,
        certified=verdict.certified,
        certify_reason=verdict.reason,
        escapes=escapes,
    )


def round_to_orthogonal(S: ProductStiefelPoint) -> np.ndarray:
    """Extract (n, d, d) orthogonal blocks from a numerically rank-d point.

    Block 1 is the gauge reference: R_i is the polar factor of S_i S_1^T.
    Requires the (d+1)-th singular value of the stack to be at most 1e-6
    times the d-th, and the recovered Gram to match S S^T to 1e-6.
    """
    svals = np.linalg.svd(S.stack, compute_uv=False)
    if svals[S.d - 1] <= 0:
        raise ValidationError("not rank-d: stack has fewer than d nonzero singular values")
    if S.p > S.d and svals[S.d] / svals[S.d - 1] > 1e-6:
        raise ValidationError(
            f"not rank-d: singular value ratio {svals[S.d] / svals[S.d - 1]:.3e} above 1e-6"
        )
    T = (S.blocks @ S.block(0).T).reshape(S.n * S.d, S.d)
    R = kernels.polar_factor(T, S.n, S.d)
    gram_err = R @ R.T - S.stack @ S.stack.T
    block_norms = np.sqrt(
        (gram_err * gram_err).reshape(S.n, S.d, S.n, S.d).sum(axis=(1, 3))
    )
    worst = float(block_norms.max())
    if worst > 1e-6:
        raise ValidationError(f"rounding inconsistent with S S^T: worst block error {worst:.3e}")
    return R.reshape(S.n, S.d, S.d)


def alignment_error(S: ProductStiefelPoint, truth) -> float:
    """n d - <X, J>/n for the alignment Gram X; zero iff S S^T matches the
    truth Gram exactly."""
    if truth is None:
        raise ValidationError("alignment_error needs a ground truth")
    O = as_orthogonal_blocks(truth, S.n, S.d)
    T = (O.transpose(0, 2, 1) @ S.blocks).sum(axis=0)
    return S.n * S.d - float(np.sum(T * T)) / S.n
