"""Optional numba dependency.

Set ``TORUSFLOW_BACKEND=numpy`` to force the pure-numpy kernels even when
numba is importable.  ``TORUSFLOW_THREADS`` selects the thread count used by
the parallel kernel variants (default 1, i.e. the serial kernels).
"""
import os

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_backend():
    name = os.environ.get("TORUSFLOW_BACKEND", "numba" if HAVE_NUMBA else "numpy").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"TORUSFLOW_BACKEND: must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("TORUSFLOW_BACKEND=numba but numba is not installed")
    return name


def _env_threads():
    raw = os.environ.get("TORUSFLOW_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"TORUSFLOW_THREADS: must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"TORUSFLOW_THREADS: must be a positive integer, got {raw!r}")
    return n


BACKEND = _env_backend()
THREADS = _env_threads()


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or an identity decorator without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


if HAVE_NUMBA:
    prange = numba.prange
    if THREADS > 1:
        numba.set_num_threads(min(THREADS, numba.config.NUMBA_NUM_THREADS))
else:  # pragma: no cover
    prange = range
