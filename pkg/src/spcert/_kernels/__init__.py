"""Hot stencil kernels with a compiled core and a NumPy fallback.

The implicit solver evaluates, once per nonlinear iteration, the face
gradients, face diffusivities and the flux divergence of the current
iterate. Those loops dominate runtime, so they exist twice:

* ``_stencils_cy`` -- Cython extension built by setup.py (optional),
* ``_stencils_np`` -- vectorized NumPy reference implementation.

Selection happens once at import. Set ``SPCERT_KERNELS=numpy`` to force the
fallback, ``SPCERT_KERNELS=cython`` to require the extension (ImportError if
it is not built). Both backends implement the same contract and agree to
floating-point rounding; see benchmarks/bench_kernels.py for a comparison.
"""

import os

from . import _stencils_np

_requested = os.environ.get("SPCERT_KERNELS", "auto").lower()

if _requested not in ("auto", "cython", "numpy"):
    raise ValueError(f"SPCERT_KERNELS must be auto|cython|numpy, got {_requested!r}")

if _requested in ("auto", "cython"):
    try:
        from . import _stencils_cy as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _stencils_np
        BACKEND = "numpy"
else:
    _impl = _stencils_np
    BACKEND = "numpy"

flux_arrays_1d = _impl.flux_arrays_1d
flux_arrays_2d = _impl.flux_arrays_2d

__all__ = ["BACKEND", "flux_arrays_1d", "flux_arrays_2d"]
