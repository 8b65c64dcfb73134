"""Kernel backend selection.

The compiled Cython core is preferred when built; otherwise the NumPy
fallback is used.  ``PREFRL_KERNELS=numpy`` forces the fallback,
``PREFRL_KERNELS=compiled`` errors out if the extension is missing.
Both backends expose the same function set and agree numerically to
~1e-12 (bit-identical within a backend for identical inputs).
"""

import os

from . import _pykernels


def _load_compiled():
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_forced = os.environ.get("PREFRL_KERNELS", "").strip().lower()
if _forced in ("numpy", "py", "python"):
    kernels = _pykernels
elif _forced in ("compiled", "c", "cy", "cython"):
    kernels = _load_compiled()
    if kernels is None:
        raise ImportError(
            "PREFRL_KERNELS=compiled but the extension is not built; "
            "run `pip install -e . --no-build-isolation` with Cython available"
        )
else:
    kernels = _load_compiled() or _pykernels


def name():
    return kernels.NAME


def available():
    """Name -> module for every importable backend (used by tests/benchmarks)."""
    out = {"numpy": _pykernels}
    compiled = _load_compiled()
    if compiled is not None:
        out["compiled"] = compiled
    return out


def use(backend_name):
    """Switch the active backend in-process (tests/benchmarks only)."""
    global kernels
    kernels = available()[backend_name]
