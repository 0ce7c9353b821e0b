"""Kernel backend selection.

The counting kernels exist twice: a numba-compiled version and a pure
NumPy version with identical semantics.  The environment variable
``TAILCOP_KERNELS`` picks the backend:

* ``auto`` (default): numba if it imports, NumPy otherwise;
* ``numba``: require numba, fail if unavailable;
* ``numpy``: force the pure NumPy path.

``benchmarks/bench_kernels.py`` times one against the other.
"""

from __future__ import annotations

import os

import numpy as np

from . import numpy_impl

FAMILY_ANEGLOG = numpy_impl.FAMILY_ANEGLOG
FAMILY_MIXED = numpy_impl.FAMILY_MIXED

_ENV_VAR = "TAILCOP_KERNELS"


def _load_backend(name: str):
    if name == "numpy":
        return numpy_impl, "numpy"
    try:
        from . import numba_impl
    except ImportError:
        if name == "numba":
            raise
        return numpy_impl, "numpy"
    return numba_impl, "numba"


_choice = os.environ.get(_ENV_VAR, "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"{_ENV_VAR}={_choice!r}: expected 'auto', 'numba' or 'numpy'"
    )
_impl, _backend_name = _load_backend(_choice)


def backend() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return _backend_name


def set_backend(name: str) -> str:
    """Switch backends at runtime (used by tests and benchmarks)."""
    global _impl, _backend_name
    _impl, _backend_name = _load_backend(name)
    return _backend_name


def count_pairs_leq(r2_by_r1, a, c):
    return _impl.count_pairs_leq(r2_by_r1, a, c)


def segment_sums(W, indptr, indices):
    return _impl.segment_sums(W, indptr, indices)


def dm_weighted_counts(W, order1, order2, r1, r2, q1, q2):
    return _impl.dm_weighted_counts(W, order1, order2, r1, r2, q1, q2)


def resample_count_matrix(r1, r2, idx, a, c):
    return _impl.resample_count_matrix(r1, r2, idx, a, c)


def ev_conditional_quantile(u, p, family, theta, p1, p2):
    return _impl.ev_conditional_quantile(
        np.ascontiguousarray(u, dtype=np.float64),
        np.ascontiguousarray(p, dtype=np.float64),
        family,
        theta,
        p1,
        p2,
    )


def clayton_conditional_quantile(u1, p, theta):
    """Closed-form conditional quantile of the Clayton copula.

    Given U1 = u1 and a uniform p, returns u2 with
    C(u2 | u1) = p.  One vectorized expression, so it needs no compiled
    counterpart.
    """
    u1 = np.asarray(u1, dtype=float)
    p = np.asarray(p, dtype=float)
    return (
        (p ** (-theta / (1.0 + theta)) - 1.0) * u1**-theta + 1.0
    ) ** (-1.0 / theta)
