"""Multiplier and resampling bootstrap for the empirical tail copula.

All processes approximate the weak limit of ``sqrt(k) * (L-hat - L)``.
Draws are built from i.i.d. nonnegative multiplier weights ``xi`` with
mean ``mu`` and standard deviation ``tau`` (default: the two-point
distribution on {0, 2} with probability 1/2 each, so ``mu = tau = 1``):

* ``beta``: the centered weighted indicator sum.  It approximates the
  limit of the *known-margins* process, which is why it is not a valid
  bootstrap for ``L-hat`` on its own.
* ``pdm`` (partial-derivatives multiplier): corrects ``beta`` with
  estimated partial derivatives times its marginal sections.
* ``dm`` (direct multiplier): recomputes the estimator with weighted
  empirical margins and weighted counts.
* ``resample``: classical multinomial resampling of the sample, with
  within-resample ties ranked by order of occurrence.

The ``known_margins`` kind is the multiplier analogue when the true
marginal CDFs are available.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Callable

import numpy as np

from . import _kernels
from .estimators import (
    BivariateSample,
    EmpiricalTailCopula,
    partial_derivatives,
    rank_thresholds,
)
from .rng import as_generator

__all__ = [
    "MultiplierScheme",
    "TWO_POINT",
    "BootstrapEnsemble",
    "KINDS",
    "angular_points",
    "default_point_set",
    "draw_weights",
    "process_beta",
    "process_pdm",
    "process_dm",
    "process_resample",
    "process_known_margins",
    "build_ensemble",
]

KINDS = ("beta", "pdm", "dm", "resample", "known_margins")


@dataclasses.dataclass(frozen=True)
class MultiplierScheme:
    """Multiplier weight distribution with its first two moments.

    ``draw(rng, n)`` must return n i.i.d. nonnegative weights; ``mu`` and
    ``tau`` are their mean and standard deviation, used to rescale the
    processes.  The default two-point scheme satisfies every moment
    condition the limit theory needs (weights are bounded).
    """

    name: str
    mu: float = 1.0
    tau: float = 1.0
    draw: Callable | None = None

    def draw_weights(self, rng, n: int) -> np.ndarray:
        if self.draw is not None:
            w = np.asarray(self.draw(rng, n), dtype=float)
            if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError(
                    f"scheme {self.name!r} returned invalid weights"
                )
            return w
        return 2.0 * rng.integers(0, 2, size=n).astype(float)


TWO_POINT = MultiplierScheme(name="two_point_0_2", mu=1.0, tau=1.0)


def draw_weights(scheme: MultiplierScheme, n: int, rng=None) -> np.ndarray:
    return scheme.draw_weights(as_generator(rng), n)


def angular_points(phi) -> np.ndarray:
    """(cos phi, sin phi) rows for angles on [0, pi/2]."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    return np.column_stack((np.cos(phi), np.sin(phi)))


def default_point_set(phi) -> np.ndarray:
    """Angular points plus both marginal sections, the set the
    partial-derivatives correction evaluates."""
    ang = angular_points(phi)
    m1 = np.column_stack((ang[:, 0], np.full(len(ang), np.inf)))
    m2 = np.column_stack((np.full(len(ang), np.inf), ang[:, 1]))
    return np.vstack((ang, m1, m2))


def _as_points(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    scalar = x1.ndim == 0 and x2.ndim == 0
    x1, x2 = np.broadcast_arrays(np.atleast_1d(x1), np.atleast_1d(x2))
    return np.column_stack((x1.ravel(), x2.ravel())), scalar


def _weight_matrix(weights):
    W = np.asarray(weights, dtype=float)
    if W.ndim == 1:
        W = W[None, :]
    if np.any(W < 0) or not np.all(np.isfinite(W)):
        raise ValueError("multiplier weights must be finite and nonnegative")
    wbar = W.mean(axis=1)
    if np.any(wbar == 0):
        raise ValueError("multiplier weights sum to zero")
    return W, wbar


def _membership_csr(keep1, keep2, points, thresholds1, thresholds2):
    """CSR lists of sample indices satisfying both per-point constraints."""
    chunks = []
    sizes = np.empty(len(points), dtype=np.int64)
    for p in range(len(points)):
        idx = np.flatnonzero(
            (keep1 <= thresholds1[p]) & (keep2 <= thresholds2[p])
        )
        chunks.append(idx)
        sizes[p] = idx.shape[0]
    indptr = np.zeros(len(points) + 1, dtype=np.int64)
    np.cumsum(sizes, out=indptr[1:])
    indices = (
        np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
    )
    return indptr, indices.astype(np.int64)


def _beta_rows(est: EmpiricalTailCopula, W, wbar, points,
               scheme: MultiplierScheme):
    n, k = est.n, est.k
    a = rank_thresholds(points[:, 0], k, n, "copula")
    c = rank_thresholds(points[:, 1], k, n, "copula")
    indptr, indices = _membership_csr(
        est.ranks[:, 0], est.ranks[:, 1], points, a, c
    )
    counts = np.diff(indptr)
    S = _kernels.segment_sums(W, indptr, indices)
    scale = (scheme.mu / scheme.tau) / math.sqrt(k)
    return scale * (S / wbar[:, None] - counts[None, :])


def _pdm_rows(est, W, wbar, points, scheme, h):
    P = len(points)
    m1 = np.column_stack((points[:, 0], np.full(P, np.inf)))
    m2 = np.column_stack((np.full(P, np.inf), points[:, 1]))
    aug = np.vstack((points, m1, m2))
    beta = _beta_rows(est, W, wbar, aug, scheme)
    d1 = partial_derivatives(est, points[:, 0], points[:, 1], 1, h=h)
    d2 = partial_derivatives(est, points[:, 0], points[:, 1], 2, h=h)
    d1 = np.atleast_1d(d1)
    d2 = np.atleast_1d(d2)
    return (
        beta[:, :P]
        - d1[None, :] * beta[:, P:2 * P]
        - d2[None, :] * beta[:, 2 * P:]
    )


def _dm_rows(est, W, wbar, points, scheme):
    n, k = est.n, est.k
    with np.errstate(invalid="ignore"):
        q1 = np.where(np.isinf(points[:, 0]), np.inf, k * points[:, 0] / n)
        q2 = np.where(np.isinf(points[:, 1]), np.inf, k * points[:, 1] / n)
    S = _kernels.dm_weighted_counts(
        W, est.order1, est.order2, est.ranks[:, 0], est.ranks[:, 1], q1, q2
    )
    lam_hat = np.atleast_1d(
        est.evaluate(points[:, 0], points[:, 1], rule="copula")
    )
    scale = (scheme.mu / scheme.tau) * math.sqrt(k)
    return scale * (S / (k * wbar[:, None]) - lam_hat[None, :])


def _resample_rows(est, idx_matrix, points):
    n, k = est.n, est.k
    a = rank_thresholds(points[:, 0], k, n, "rank")
    c = rank_thresholds(points[:, 1], k, n, "rank")
    counts = _kernels.resample_count_matrix(
        est.ranks[:, 0], est.ranks[:, 1], idx_matrix, a, c
    )
    lam_hat = np.atleast_1d(
        est.evaluate(points[:, 0], points[:, 1], rule="rank")
    )
    return math.sqrt(k) * (counts / k - lam_hat[None, :])


def _km_rows(sample, margins, k, W, wbar, points, scheme):
    n = sample.n
    if margins is None:
        u1 = sample.data[:, 0]
        u2 = sample.data[:, 1]
    else:
        f1, f2 = margins
        u1 = np.asarray(f1(sample.data[:, 0]), dtype=float)
        u2 = np.asarray(f2(sample.data[:, 1]), dtype=float)
    t1 = np.where(np.isinf(points[:, 0]), np.inf, k * points[:, 0] / n)
    t2 = np.where(np.isinf(points[:, 1]), np.inf, k * points[:, 1] / n)
    indptr, indices = _membership_csr(u1, u2, points, t1, t2)
    counts = np.diff(indptr)
    S = _kernels.segment_sums(W, indptr, indices)
    scale = (scheme.mu / scheme.tau) / math.sqrt(k)
    return scale * (S / wbar[:, None] - counts[None, :])


def _scalar_out(rows, scalar):
    return float(rows[0, 0]) if scalar else rows[0]


def process_beta(est: EmpiricalTailCopula, weights, x1, x2,
                 scheme: MultiplierScheme = TWO_POINT):
    """Centered multiplier indicator sum at (x1, x2) for one weight draw."""
    points, scalar = _as_points(x1, x2)
    W, wbar = _weight_matrix(weights)
    return _scalar_out(_beta_rows(est, W, wbar, points, scheme), scalar)


def process_pdm(est: EmpiricalTailCopula, weights, x1, x2,
                scheme: MultiplierScheme = TWO_POINT, h: float | None = None):
    """Partial-derivatives multiplier process for one weight draw."""
    points, scalar = _as_points(x1, x2)
    W, wbar = _weight_matrix(weights)
    return _scalar_out(_pdm_rows(est, W, wbar, points, scheme, h), scalar)


def process_dm(est: EmpiricalTailCopula, weights, x1, x2,
               scheme: MultiplierScheme = TWO_POINT):
    """Direct multiplier process (weighted margins and weighted counts)."""
    points, scalar = _as_points(x1, x2)
    W, wbar = _weight_matrix(weights)
    return _scalar_out(_dm_rows(est, W, wbar, points, scheme), scalar)


def process_resample(est: EmpiricalTailCopula, indices, x1, x2):
    """Resampled estimator difference sqrt(k) * (L-hat* - L-hat)."""
    points, scalar = _as_points(x1, x2)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx[None, :]
    if idx.shape[1] != est.n or np.any(idx < 0) or np.any(idx >= est.n):
        raise ValueError("resample indices must be row indices of the sample")
    return _scalar_out(_resample_rows(est, idx, points), scalar)


def process_known_margins(sample: BivariateSample, margins, k: int, weights,
                          x1, x2, scheme: MultiplierScheme = TWO_POINT):
    """Multiplier process when the true marginal CDFs are known.

    ``margins`` is a pair of callables mapping data to uniforms, or None
    when the data already are uniform.
    """
    points, scalar = _as_points(x1, x2)
    W, wbar = _weight_matrix(weights)
    return _scalar_out(
        _km_rows(sample, margins, int(k), W, wbar, points, scheme), scalar
    )


@dataclasses.dataclass
class BootstrapEnsemble:
    """A matrix of bootstrap process draws evaluated on a point set.

    ``draws[b, p]`` is the b-th realization at ``points[p]``.
    """

    kind: str
    points: np.ndarray
    draws: np.ndarray
    n: int
    k: int
    scheme: MultiplierScheme
    tail: str = "lower"
    h: float | None = None
    degenerate_redraws: int = 0
    seed: int | list | None = None

    @property
    def B(self) -> int:
        return self.draws.shape[0]

    def to_csv(self, path):
        """Write draws as CSV (rows = draws) plus a JSON metadata sidecar."""
        path = str(path)
        header = ",".join(
            f"({x1:.17g};{x2:.17g})" for x1, x2 in self.points
        )
        np.savetxt(path, self.draws, delimiter=",", header=header,
                   comments="")
        meta = {
            "kind": self.kind,
            "n": self.n,
            "k": self.k,
            "B": self.B,
            "tail": self.tail,
            "h": self.h,
            "seed": self.seed,
            "scheme": {"name": self.scheme.name, "mu": self.scheme.mu,
                       "tau": self.scheme.tau},
            "degenerate_redraws": self.degenerate_redraws,
            "points": self.points.tolist(),
        }
        with open(path + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2)


def _draw_weight_matrix(scheme, streams, n):
    B = len(streams)
    W = np.empty((B, n))
    redraws = 0
    for b, gen in enumerate(streams):
        w = scheme.draw_weights(gen, n)
        if w.mean() == 0.0:
            # an all-zero draw carries no information; redraw once
            w = scheme.draw_weights(gen, n)
            redraws += 1
            if w.mean() == 0.0:
                raise RuntimeError(
                    f"multiplier draw degenerate twice in row {b}"
                )
        W[b] = w
    return W, redraws


def build_ensemble(kind: str, sample, k: int, B: int, points,
                   scheme: MultiplierScheme = TWO_POINT, rng=None,
                   tail: str = "lower", h: float | None = None,
                   margins=None) -> BootstrapEnsemble:
    """Draw ``B`` bootstrap process realizations on ``points``.

    ``sample`` may be a :class:`BivariateSample` or a prebuilt
    :class:`EmpiricalTailCopula`.  Row ``b`` draws from the b-th stream
    derived from ``rng``, so equal seeds give bit-identical ensembles no
    matter how rows are scheduled.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown ensemble kind {kind!r}")
    if B < 1:
        raise ValueError("B must be positive")
    if kind == "known_margins" and tail != "lower":
        raise ValueError("known-margins ensembles support the lower tail "
                         "only")
    if isinstance(sample, EmpiricalTailCopula):
        est = sample
        sample = est.sample
        if est.k != int(k) or est.tail != tail:
            raise ValueError("estimator does not match requested k/tail")
    else:
        est = EmpiricalTailCopula(sample, k, tail=tail)
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("points must be an (P, 2) array")
    gen = as_generator(rng)
    streams = gen.spawn(B)
    redraws = 0
    if kind == "resample":
        idx = np.empty((B, est.n), dtype=np.int64)
        for b, g in enumerate(streams):
            idx[b] = g.integers(0, est.n, size=est.n)
        rows = _resample_rows(est, idx, points)
    else:
        W, redraws = _draw_weight_matrix(scheme, streams, est.n)
        wbar = W.mean(axis=1)
        if kind == "beta":
            rows = _beta_rows(est, W, wbar, points, scheme)
        elif kind == "pdm":
            rows = _pdm_rows(est, W, wbar, points, scheme, h)
        elif kind == "dm":
            rows = _dm_rows(est, W, wbar, points, scheme)
        else:
            rows = _km_rows(sample, margins, est.k, W, wbar, points, scheme)
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
    elif isinstance(rng, (tuple, list)):
        seed = [int(v) for v in rng]
    else:
        seed = None
    return BootstrapEnsemble(
        kind=kind, points=points, draws=rows, n=est.n, k=est.k,
        scheme=scheme, tail=tail, h=h, degenerate_redraws=redraws,
        seed=seed,
    )
