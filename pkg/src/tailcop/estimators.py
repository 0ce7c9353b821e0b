"""Nonparametric tail copula estimation.

The empirical tail copula at a point ``x`` counts sample points whose
componentwise ranks fall below thresholds of order ``k * x`` and divides
by ``k``, where ``k`` is the number of order statistics considered
extreme.  Two counting rules are supported:

* ``rank``: thresholds ``floor(k * x)``, from comparing ranks with
  ``k * x`` directly;
* ``copula``: thresholds ``ceil(k * x)``, from composing the empirical
  copula with empirical marginal quantiles.

They differ by at most ``2 / k`` anywhere.  Upper-tail estimation
reflects ranks (``r -> n + 1 - r``) and reuses the lower-tail path.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

__all__ = [
    "DataError",
    "TiesError",
    "BivariateSample",
    "EmpiricalTailCopula",
    "generalized_inverse",
    "known_margins_tail_copula",
    "partial_derivatives",
    "read_sample",
]


class DataError(ValueError):
    """Input data unusable: wrong shape, non-finite entries, or ties."""


class TiesError(DataError):
    """Tied values within a column; ranks would be ambiguous."""


def _column_ranks(col, break_ties: bool):
    order = np.argsort(col, kind="stable")
    sorted_col = col[order]
    if not break_ties and np.any(sorted_col[1:] == sorted_col[:-1]):
        raise TiesError(
            "tied values within a column; pass break_ties=True to rank "
            "them by order of occurrence"
        )
    ranks = np.empty(col.shape[0], dtype=np.int64)
    ranks[order] = np.arange(1, col.shape[0] + 1)
    return ranks


class BivariateSample:
    """An (n, 2) data matrix together with its componentwise ranks.

    Ranks are 1-based; ties raise :class:`TiesError` unless
    ``break_ties`` is set, in which case equal values are ranked in order
    of occurrence.
    """

    def __init__(self, data, break_ties: bool = False):
        data = np.atleast_2d(np.asarray(data, dtype=float))
        if data.ndim != 2 or data.shape[1] != 2:
            raise DataError(f"expected an (n, 2) array, got shape {data.shape}")
        if data.shape[0] < 2:
            raise DataError("need at least two observations")
        if not np.all(np.isfinite(data)):
            raise DataError("data contains NaN or infinite entries")
        self.data = data
        self.ranks = np.column_stack(
            (_column_ranks(data[:, 0], break_ties),
             _column_ranks(data[:, 1], break_ties))
        )

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def __len__(self):
        return self.data.shape[0]


def read_sample(path, delimiter: str | None = ",",
                break_ties: bool = False) -> BivariateSample:
    """Load a two-column CSV (optional single header line) as a sample."""
    skiprows = 0
    try:
        with open(path) as fh:
            first = fh.readline()
    except OSError as exc:
        raise DataError(str(exc)) from exc
    fields = first.strip().split(delimiter) if delimiter else first.split()
    try:
        [float(f) for f in fields if f != ""]
    except ValueError:
        skiprows = 1
    try:
        data = np.loadtxt(path, delimiter=delimiter, skiprows=skiprows,
                          ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if data.shape[1] != 2:
        raise DataError(
            f"{path}: expected 2 columns, found {data.shape[1]}"
        )
    return BivariateSample(data, break_ties=break_ties)


def _check_eval_points(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if np.any(np.isnan(x1)) or np.any(np.isnan(x2)):
        raise ValueError("evaluation points contain NaN")
    if np.any(x1 < 0) or np.any(x2 < 0):
        raise ValueError("evaluation points must lie in [0, inf]^2")
    return np.broadcast_arrays(x1, x2)


def rank_thresholds(x, k: int, n: int, rule: str):
    """Integer rank thresholds for coordinate values ``x``.

    ``inf`` maps to ``n`` (no constraint); results are clipped to [0, n].
    """
    x = np.asarray(x, dtype=float)
    kx = k * x
    if rule == "rank":
        m = np.floor(kx)
    elif rule == "copula":
        m = np.ceil(kx)
    else:
        raise ValueError(f"unknown counting rule {rule!r}")
    m = np.where(np.isinf(x), n, m)
    return np.clip(m, 0, n).astype(np.int64)


class EmpiricalTailCopula:
    """Empirical tail copula of a bivariate sample.

    Parameters
    ----------
    sample : BivariateSample
    k : int
        Number of extreme order statistics; ``1 <= k <= n``.
    tail : {"lower", "upper"}
        Which joint tail to estimate.  The upper tail reflects ranks and
        counts strictly-above-threshold exceedances, which on reflected
        ranks is a ceiling threshold.
    """

    def __init__(self, sample: BivariateSample, k: int, tail: str = "lower"):
        if tail not in ("lower", "upper"):
            raise ValueError(f"tail must be 'lower' or 'upper', got {tail!r}")
        k = int(k)
        if not 1 <= k <= sample.n:
            raise ValueError(f"k={k} outside [1, n={sample.n}]")
        self.sample = sample
        self.k = k
        self.tail = tail
        n = sample.n
        ranks = sample.ranks if tail == "lower" else n + 1 - sample.ranks
        self.ranks = ranks
        self.order1 = np.argsort(ranks[:, 0])
        self.order2 = np.argsort(ranks[:, 1])
        self.r2_by_r1 = ranks[self.order1, 1]

    @property
    def n(self) -> int:
        return self.sample.n

    def _default_rule(self, rule):
        # the strict '>' in the upper-tail definition turns into a ceiling
        # threshold on reflected ranks for either counting rule
        if self.tail == "upper":
            return "copula"
        return rule

    def evaluate(self, x1, x2, rule: str = "rank"):
        """Estimate the tail copula at (x1, x2); broadcasts over arrays."""
        if rule not in ("rank", "copula"):
            raise ValueError(f"unknown counting rule {rule!r}")
        x1b, x2b = _check_eval_points(x1, x2)
        shape = x1b.shape
        eff_rule = self._default_rule(rule)
        a = rank_thresholds(x1b.ravel(), self.k, self.n, eff_rule)
        c = rank_thresholds(x2b.ravel(), self.k, self.n, eff_rule)
        counts = _kernels.count_pairs_leq(self.r2_by_r1, a, c)
        out = counts / self.k
        if shape == ():
            return float(out[0])
        return out.reshape(shape)

    def angular(self, phi, rule: str = "rank"):
        """Estimate along the quarter circle: L-hat(cos phi, sin phi)."""
        phi = np.asarray(phi, dtype=float)
        return self.evaluate(np.cos(phi), np.sin(phi), rule=rule)


def partial_derivatives(est: EmpiricalTailCopula, x1, x2, which: int,
                        h: float | None = None, rule: str = "rank"):
    """Finite-difference partial derivative of the empirical tail copula.

    Central differences with bandwidth ``h`` (default ``k ** -0.5``).
    Within ``h`` of the axis the evaluation point is shifted outward so
    the stencil stays in the domain; at an infinite coordinate the
    derivative is defined as 0.
    """
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    if h is None:
        h = est.k ** -0.5
    x1b, x2b = _check_eval_points(x1, x2)
    shape = x1b.shape
    x1b = np.atleast_1d(x1b).astype(float)
    x2b = np.atleast_1d(x2b).astype(float)
    xp = x1b if which == 1 else x2b
    xo = x2b if which == 1 else x1b
    xp_eff = np.where(xp < h, h, xp)
    hi = est.evaluate(*((xp_eff + h, xo) if which == 1 else (xo, xp_eff + h)),
                      rule=rule)
    lo = est.evaluate(*((xp_eff - h, xo) if which == 1 else (xo, xp_eff - h)),
                      rule=rule)
    out = (np.asarray(hi) - np.asarray(lo)) / (2.0 * h)
    out = np.where(np.isinf(xp), 0.0, out)
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def known_margins_tail_copula(sample: BivariateSample, margins, k: int,
                              x1, x2, tail: str = "lower"):
    """Tail copula estimate when the true marginal CDFs are known.

    Counts points with ``F_p(X_ip) <= k * x_p / n`` and divides by ``k``.
    ``margins`` is a pair of callables mapping data to uniforms, or None
    when the data already are uniform.  The upper tail counts
    ``F_p(X_ip) > 1 - k * x_p / n`` instead.
    """
    if tail not in ("lower", "upper"):
        raise ValueError(f"tail must be 'lower' or 'upper', got {tail!r}")
    k = int(k)
    if not 1 <= k <= sample.n:
        raise ValueError(f"k={k} outside [1, n={sample.n}]")
    x1b, x2b = _check_eval_points(x1, x2)
    shape = x1b.shape
    n = sample.n
    if margins is None:
        u1 = sample.data[:, 0]
        u2 = sample.data[:, 1]
    else:
        f1, f2 = margins
        u1 = np.asarray(f1(sample.data[:, 0]), dtype=float)
        u2 = np.asarray(f2(sample.data[:, 1]), dtype=float)
    with np.errstate(invalid="ignore"):
        t1 = np.where(np.isinf(x1b.ravel()), np.inf, k * x1b.ravel() / n)
        t2 = np.where(np.isinf(x2b.ravel()), np.inf, k * x2b.ravel() / n)
    if tail == "upper":
        inside = ((1.0 - u1[None, :]) < t1[:, None]) \
            & ((1.0 - u2[None, :]) < t2[:, None])
    else:
        inside = (u1[None, :] <= t1[:, None]) & (u2[None, :] <= t2[:, None])
    out = inside.sum(axis=1) / k
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def generalized_inverse(values, p, survival: bool = False):
    """Generalized inverse of the empirical CDF of ``values``.

    For the CDF ``G`` this is ``inf{x : G(x) >= p}`` for ``p > 0`` and
    ``sup{x : G(x) = 0}`` at ``p = 0``.  With ``survival=True`` the
    inverse of the empirical survival function ``1 - G`` is taken
    instead: the largest observation still exceeded with probability at
    least ``p``, with ``p = 0`` giving the boundary of the region the
    sample never exceeds.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.shape[0] == 0:
        raise ValueError("values must be a nonempty 1-D array")
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
        raise ValueError("p must lie in [0, 1]")
    n = values.shape[0]
    sorted_vals = np.sort(values)
    m = np.ceil(n * p_arr).astype(np.int64)
    if survival:
        idx = np.clip(n - m - 1, 0, n - 1)
        out = sorted_vals[idx]
        out = np.where(m == 0, sorted_vals[n - 1], out)
    else:
        out = sorted_vals[np.clip(m - 1, 0, n - 1)]
        out = np.where(m == 0, sorted_vals[0], out)
    if p_arr.ndim == 0:
        return float(out)
    return out
