"""Backend selection for the banded kernels.

The compiled extension ``tmwave._kernels`` is used when it imports; otherwise
the numpy implementation in ``tmwave._kernels_py`` takes over. Setting
``TMWAVE_PURE_PYTHON=1`` forces the fallback (used by the benchmark and the
backend-equivalence tests).
"""

import os

import numpy as np

from tmwave import _kernels_py

_compiled = None
if os.environ.get("TMWAVE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from tmwave import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def backends():
    """Available implementations keyed by name."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out


def band_matvec(bands, x):
    return _impl.band_matvec(np.ascontiguousarray(bands, dtype=float),
                             np.ascontiguousarray(x, dtype=float))


def band_ldlt(bands, pivot_tol):
    return _impl.band_ldlt(np.ascontiguousarray(bands, dtype=float), float(pivot_tol))


def band_ldlt_solve(lbands, d, b):
    return _impl.band_ldlt_solve(np.ascontiguousarray(lbands, dtype=float),
                                 np.ascontiguousarray(d, dtype=float),
                                 np.ascontiguousarray(b, dtype=float))


def scatter_bands(elem, dofmap, n, p):
    return _impl.scatter_bands(np.ascontiguousarray(elem, dtype=float),
                               np.ascontiguousarray(dofmap, dtype=np.int64),
                               int(n), int(p))


def assemble_p2_bands(wq, table):
    return _impl.assemble_p2_bands(np.ascontiguousarray(wq, dtype=float),
                                   np.ascontiguousarray(table, dtype=float))


def lumped_p2_diagonal(wn, lengths, lobatto):
    return _impl.lumped_p2_diagonal(np.ascontiguousarray(wn, dtype=float),
                                    np.ascontiguousarray(lengths, dtype=float),
                                    np.ascontiguousarray(lobatto, dtype=float))
