"""Selects the closed-loop kernel backend at import.

The compiled Cython kernel is preferred; the pure-numpy implementation is
the fallback and the behavioral reference.  ``benchmarks/bench_loop.py``
compares the two.
"""

from . import _loop_py

try:
    from . import _loop_cy

    _DEFAULT = _loop_cy
except ImportError:
    _loop_cy = None
    _DEFAULT = _loop_py

BACKEND = _DEFAULT.BACKEND_NAME

run_unconstrained_loop = _DEFAULT.run_unconstrained_loop


def available_backends() -> tuple:
    return ("python", "compiled") if _loop_cy is not None else ("python",)


def get_loop(backend: str | None = None):
    """Kernel function for an explicit backend name (None = default)."""
    if backend is None:
        return run_unconstrained_loop
    if backend == "python":
        return _loop_py.run_unconstrained_loop
    if backend == "compiled":
        if _loop_cy is None:
            raise ValueError("compiled kernel is not built; run "
                             "`python setup.py build_ext --inplace`")
        return _loop_cy.run_unconstrained_loop
    raise ValueError(f"unknown backend {backend!r}")
