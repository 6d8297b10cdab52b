"""Backend dispatch for the hot numerical kernels.

The numba-jitted kernels are used by default.  Set the environment variable
``PROJREG_NUMBA=0`` before import to force the pure-numpy fallback (same
signatures, same results up to floating-point reassociation).  If numba is
not importable the fallback is selected automatically.
"""

import os

_flag = os.environ.get("PROJREG_NUMBA", "1").strip().lower()

if _flag in ("0", "false", "off", "no"):
    from . import np_impl as _impl
else:
    try:
        from . import nb_impl as _impl
    except ImportError:
        from . import np_impl as _impl

BACKEND = _impl.BACKEND
volterra_design_matrix = _impl.volterra_design_matrix
piecewise_eval = _impl.piecewise_eval
orthonormal_legendre_table = _impl.orthonormal_legendre_table
