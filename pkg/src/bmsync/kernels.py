"""Kernel backend selection.

The blockwise hot kernels exist twice: a compiled Cython extension
(``bmsync._kernels_cy``) and a pure-numpy fallback (``bmsync._kernels_py``).
The compiled one is preferred when importable. Set ``BMSYNC_KERNELS=py`` or
``=cy`` to force a backend (``cy`` raises if the extension is missing).

Both backends are deterministic and agree to floating-point roundoff; a given
process always uses one backend, so reproducibility contracts hold per run.
"""

from __future__ import annotations

import os

_requested = os.environ.get("BMSYNC_KERNELS", "auto").lower()

if _requested not in ("auto", "cy", "py"):
    raise ValueError(f"BMSYNC_KERNELS must be auto, cy, or py; got {_requested!r}")

if _requested in ("auto", "cy"):
    try:
        from . import _kernels_cy as _impl
    except ImportError:
        if _requested == "cy":
            raise
        from . import _kernels_py as _impl
else:
    from . import _kernels_py as _impl

BACKEND: str = _impl.BACKEND

bdg = _impl.bdg
block_sym_outer = _impl.block_sym_outer
project_tangent = _impl.project_tangent
polar_factor = _impl.polar_factor
