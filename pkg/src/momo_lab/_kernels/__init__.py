"""Hot kernels: compiled extension when built, numpy fallback otherwise.

Set ``MOMO_LAB_PURE=1`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("MOMO_LAB_PURE", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

sieve_block = _impl.sieve_block
neumaier_cumsum = _impl.neumaier_cumsum
thue_morse_bits = _impl.thue_morse_bits


def backends():
    """Available kernel modules keyed by name (for tests and benchmarks)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
