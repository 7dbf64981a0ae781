"""Numerical backend selection.

The hot propagation kernels in :mod:`rampedgate._kernels` are written as
plain scalar-loop Python and compiled with numba when it is available.
Setting the environment variable ``RAMPEDGATE_BACKEND=numpy`` (before the
package is imported) disables JIT compilation and selects the vectorized
pure-numpy fallback path in the propagator.  ``RAMPEDGATE_BACKEND=numba``
forces JIT and raises if numba cannot be imported.

``benchmarks/benchmark_backends.py`` compares the two paths.
"""

import os

_ENV_VAR = "RAMPEDGATE_BACKEND"
_requested = os.environ.get(_ENV_VAR, "auto").lower()

if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"{_ENV_VAR} must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    _numba_enabled = False
else:
    try:
        import numba  # noqa: F401

        _numba_enabled = True
    except ImportError:
        if _requested == "numba":
            raise
        _numba_enabled = False


def numba_enabled() -> bool:
    """True when kernels are JIT compiled."""
    return _numba_enabled


def active_backend() -> str:
    return "numba" if _numba_enabled else "numpy"


def maybe_njit(func=None, **options):
    """``numba.njit`` when the numba backend is active, identity otherwise."""

    def wrap(f):
        if _numba_enabled:
            import numba

            options.setdefault("cache", False)
            return numba.njit(**options)(f)
        return f

    if func is not None:
        return wrap(func)
    return wrap
