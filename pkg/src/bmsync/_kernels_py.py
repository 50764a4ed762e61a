"""Pure-numpy kernel backend.

Reference implementation of the blockwise hot kernels. The compiled backend
(``_kernels_cy``) mirrors these signatures exactly; see ``kernels`` for the
selection logic. All inputs are float64 arrays; stacks of n blocks of shape
d x k are stored as (n*d) x k arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularBlockError

BACKEND = "py"

# Relative floor under which a block Gram matrix counts as rank deficient.
_SINGULAR_RTOL = 1e-13


def bdg(X: np.ndarray, n: int, d: int) -> np.ndarray:
    """Symmetrized block-diagonal part: keep each d x d diagonal block of X,
    replace it by its symmetric part, zero everything else."""
    out = np.zeros_like(X)
    blocks = X.reshape(n, d, n, d)
    for i in range(n):
        B = blocks[i, :, i, :]
        out[i * d:(i + 1) * d, i * d:(i + 1) * d] = 0.5 * (B + B.T)
    return out


def block_sym_outer(Z: np.ndarray, S: np.ndarray, n: int, d: int) -> np.ndarray:
    """Per-block symmetrized products (n, d, d): 0.5 * (Z_i S_i^T + S_i Z_i^T)."""
    p = S.shape[1]
    Zb = Z.reshape(n, d, p)
    Sb = S.reshape(n, d, p)
    M = Zb @ Sb.transpose(0, 2, 1)
    return 0.5 * (M + M.transpose(0, 2, 1))


def project_tangent(S: np.ndarray, Z: np.ndarray, n: int, d: int) -> np.ndarray:
    """Blockwise tangent-space projection: Z_i - sym(Z_i S_i^T) S_i."""
    p = S.shape[1]
    Sb = S.reshape(n, d, p)
    lam = block_sym_outer(Z, S, n, d)
    out = Z.reshape(n, d, p) - lam @ Sb
    return out.reshape(n * d, p)


def polar_factor(Y: np.ndarray, n: int, d: int) -> np.ndarray:
    """Blockwise polar factor: the row-orthonormal matrix (Y_i Y_i^T)^{-1/2} Y_i.

    Raises SingularBlockError (with the offending block index) when a block is
    numerically rank deficient.
    """
    k = Y.shape[1]
    Yb = Y.reshape(n, d, k)
    if d == 1:
        norms = np.linalg.norm(Yb, axis=2)
        bad = norms <= _SINGULAR_RTOL
        if np.any(bad):
            raise SingularBlockError(int(np.argmax(bad)))
        return (Yb / norms[:, :, None]).reshape(n, k)
    M = Yb @ Yb.transpose(0, 2, 1)
    w, U = np.linalg.eigh(M)
    floor = _SINGULAR_RTOL * np.maximum(w[:, -1], 1.0)
    bad = w[:, 0] <= floor
    if np.any(bad):
        raise SingularBlockError(int(np.argmax(bad)))
    inv_sqrt = (U / np.sqrt(w)[:, None, :]) @ U.transpose(0, 2, 1)
    return (inv_sqrt @ Yb).reshape(n * d, k)
