"""Selection between numba-compiled kernels and the pure-numpy fallback.

Set ``OAKESHMM_DISABLE_NUMBA=1`` before import to force the numpy path.  The
flag is read once; :func:`use_numba` reports the decision.
"""
import os

_FLAG = os.environ.get("OAKESHMM_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def njit(*args, **kws):
    """``numba.njit`` with caching, or an identity decorator when numba is off."""
    if HAS_NUMBA:
        import numba

        kws.setdefault("cache", True)
        return numba.njit(*args, **kws)
    if len(args) == 1 and callable(args[0]) and not kws:
        return args[0]
    return lambda f: f


def use_numba():
    return HAS_NUMBA
