"""Low-rank factorization for orthogonal-group synchronization.

Solve the nonconvex factorized relaxation over products of Stiefel manifolds,
certify global optimality from the spectrum of the certificate matrix at the
solution, evaluate closed-form benign-landscape thresholds, generate the
standard statistical models (plus monotone adversaries), and integrate the
coupled-oscillator gradient flow.
"""

from .blockmat import (
    BlockSymMatrix,
    PsdCheck,
    SpectralSummary,
    bdg,
    eigen_sym,
    opnorm_estimate,
    psd_check,
    read_matrix,
    write_matrix,
)
from .errors import (
    FlowStepError,
    ParseError,
    ShapeError,
    SingularBlockError,
    ThresholdUndefinedError,
    ValidationError,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .kuramoto import (
    FlowConfig,
    FlowTrace,
    flow,
    lift_coupling,
    min_pairwise_inner,
    order_parameter,
    ring_coupling,
    twisted_state,
)
from .manifold import (
    ProductStiefelPoint,
    TangentDirection,
    embed_reference,
    project_tangent,
    proof_direction,
    random_point,
    random_tangent,
    read_point_text,
    retract,
    write_point_text,
)
from .models import (
    AdversarySpec,
    ModelInstance,
    ThresholdResult,
    apply_adversary,
    corollary_thresholds,
    gen_adversary,
    gen_od_sync,
    gen_procrustes,
    gen_sbm,
    gen_signed_kuramoto,
    gen_z2,
    generate,
)
from .objective import (
    AlphaCondition,
    Certificate,
    CertifyResult,
    LemmaReport,
    alpha_condition,
    benign_threshold_p,
    build_certificate,
    certify_global,
    energy,
    gauss_identity_check,
    hessian_quadratic_form,
    proof_lemma_checks,
    riemannian_gradient,
    x_matrix,
)
from .solver import (
    ProbeResult,
    SolveReport,
    SolverConfig,
    alignment_error,
    round_to_orthogonal,
    socp_probe,
    solve,
)

__version__ = "0.1.0"
