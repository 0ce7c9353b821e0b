"""Inference built on the empirical tail copula and its bootstrap.

Everything here works through the angular representation: a tail copula
restricted to the quarter circle, ``f(phi) = L(cos phi, sin phi)``, and
the squared angular distance ``rho(f, g) = integral (f - g)^2 dphi``
discretized by a quadrature grid.

Provided statistics:

* a two-sample test for equality of tail copulas;
* a minimum-distance parameter estimator within a parametric family,
  with a bootstrap for its distribution and confidence intervals;
* a goodness-of-fit test for a parametric family.

Bootstrap quantiles use the ``ceil(B * beta)``-th order statistic, and
p-values count ``>=`` exceedances without smoothing.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
from scipy.optimize import minimize_scalar

from .bootstrap import (
    TWO_POINT,
    BootstrapEnsemble,
    MultiplierScheme,
    angular_points,
    build_ensemble,
)
from .estimators import BivariateSample, EmpiricalTailCopula
from .models import FAMILIES, THETA_BOUNDS, TailCopulaModel
from .rng import as_generator

__all__ = [
    "AngularGrid",
    "angular_distance",
    "true_cov_Gtilde",
    "true_cov_Ghat",
    "true_cov_matrix",
    "empirical_quantile",
    "TestReport",
    "two_sample_test",
    "MDEstimate",
    "md_estimate",
    "md_bootstrap",
    "md_confidence_interval",
    "analytic_md_variance",
    "gof_test",
]


@dataclasses.dataclass(frozen=True)
class AngularGrid:
    """Quadrature nodes and weights on [0, pi/2].

    The default midpoint rule uses ``m`` equally spaced midpoints with
    constant weights summing to pi/2.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be matching 1-D arrays")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(nodes < 0) or np.any(nodes > math.pi / 2):
            raise ValueError("nodes must lie in [0, pi/2]")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")

    @classmethod
    def midpoint(cls, m: int = 100) -> "AngularGrid":
        m = int(m)
        if m < 1:
            raise ValueError("grid needs at least one node")
        step = math.pi / 2 / m
        nodes = (np.arange(m) + 0.5) * step
        return cls(nodes=nodes, weights=np.full(m, step))

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def points(self) -> np.ndarray:
        return angular_points(self.nodes)


def _values_on(grid: AngularGrid, f):
    if callable(f):
        return np.asarray(f(grid.nodes), dtype=float)
    f = np.asarray(f, dtype=float)
    if f.shape != grid.nodes.shape:
        raise ValueError("values do not match the grid")
    return f


def angular_distance(f, g, grid: AngularGrid | None = None) -> float:
    """Squared angular L2 distance between two tail copulas.

    ``f`` and ``g`` are callables of the angle or value arrays on the
    grid nodes.
    """
    if grid is None:
        grid = AngularGrid.midpoint()
    fv = _values_on(grid, f)
    gv = _values_on(grid, g)
    return float(np.sum(grid.weights * (fv - gv) ** 2))


# ---------------------------------------------------------------------------
# limit covariances


def true_cov_Gtilde(model: TailCopulaModel, x, y) -> float:
    """Limit covariance of the known-margins process: L(x ^ y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(model.tail_copula(min(x[0], y[0]), min(x[1], y[1])))


def true_cov_Ghat(model: TailCopulaModel, x, y) -> float:
    """Limit covariance of sqrt(k) * (L-hat - L) at finite points x, y.

    Expands the representation of the limit process (the known-margins
    field minus its partial-derivative-weighted marginal sections) into
    nine closed-form terms.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("x and y must be finite")
    mat = true_cov_matrix(model, np.vstack((x, y)))
    return float(mat[0, 1])


def true_cov_matrix(model: TailCopulaModel, points) -> np.ndarray:
    """Limit covariance matrix of sqrt(k) * (L-hat - L) on finite points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (P, 2) array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    x1 = pts[:, 0]
    x2 = pts[:, 1]
    d1 = np.atleast_1d(model.partial(x1, x2, 1))
    d2 = np.atleast_1d(model.partial(x1, x2, 2))
    L = model.tail_copula
    m1 = np.minimum.outer(x1, x1)
    m2 = np.minimum.outer(x2, x2)
    X1, Y1 = np.meshgrid(x1, x1, indexing="ij")
    X2, Y2 = np.meshgrid(x2, x2, indexing="ij")
    D1x, D1y = np.meshgrid(d1, d1, indexing="ij")
    D2x, D2y = np.meshgrid(d2, d2, indexing="ij")
    # each term is paired with its transpose partner so every partial sum
    # is exactly symmetric in floating point
    out = np.asarray(L(m1, m2), dtype=float)
    out -= D1y * L(m1, X2) + D1x * L(m1, Y2)
    out -= D2y * L(X1, m2) + D2x * L(Y1, m2)
    out += D1x * D1y * m1
    out += D1x * D2y * L(X1, Y2) + D2x * D1y * L(Y1, X2)
    out += D2x * D2y * m2
    return out


# ---------------------------------------------------------------------------
# quantiles and reports


def empirical_quantile(values, beta: float) -> float:
    """The ceil(B * beta)-th order statistic; beta = 0 gives the minimum."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.shape[0] == 0:
        raise ValueError("values must be a nonempty 1-D array")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    B = values.shape[0]
    # rounding guard: B * beta may land an ulp above an intended integer
    m = max(1, math.ceil(round(B * beta, 9)))
    return float(np.sort(values)[min(m, B) - 1])


def _pvalue(boot, statistic) -> float:
    boot = np.asarray(boot, dtype=float)
    return float(np.mean(boot >= statistic))


@dataclasses.dataclass
class TestReport:
    """Outcome of a bootstrap test."""

    test: str
    statistic: float
    p_value: float
    alpha: float
    quantile: float
    reject: bool
    kind: str
    B: int
    quantiles: dict
    params: dict
    bootstrap: np.ndarray | None = None

    def to_dict(self, include_bootstrap: bool = False) -> dict:
        out = {
            "test": self.test,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "quantile": self.quantile,
            "reject": bool(self.reject),
            "kind": self.kind,
            "B": self.B,
            "quantiles": self.quantiles,
            "params": self.params,
        }
        if include_bootstrap and self.bootstrap is not None:
            out["bootstrap"] = [float(v) for v in self.bootstrap]
        return out

    def to_json(self, path=None, include_bootstrap: bool = False):
        text = json.dumps(self.to_dict(include_bootstrap), indent=2)
        if path is None:
            return text
        with open(path, "w") as fh:
            fh.write(text)
        return text


def _report_quantiles(boot) -> dict:
    return {
        str(beta): empirical_quantile(boot, beta)
        for beta in (0.85, 0.90, 0.95)
    }


# ---------------------------------------------------------------------------
# two-sample equality test


def two_sample_test(sample_x, sample_y, k1: int, k2: int, B: int = 500,
                    alpha: float = 0.05, kind: str = "pdm",
                    scheme: MultiplierScheme = TWO_POINT,
                    grid: AngularGrid | None = None, rng=None,
                    tail: str = "lower", h: float | None = None,
                    keep_bootstrap: bool = True) -> TestReport:
    """Test equality of the tail copulas behind two independent samples.

    The statistic is the scaled squared angular distance between the two
    empirical tail copulas; its null distribution is approximated by the
    matching combination of bootstrap processes of each sample.
    """
    if kind not in ("pdm", "dm"):
        raise ValueError("two-sample test supports kinds 'pdm' and 'dm'")
    if grid is None:
        grid = AngularGrid.midpoint()
    est_x = _as_estimator(sample_x, k1, tail)
    est_y = _as_estimator(sample_y, k2, tail)
    k1, k2 = est_x.k, est_y.k
    lam_x = est_x.angular(grid.nodes)
    lam_y = est_y.angular(grid.nodes)
    statistic = (
        k1 * k2 / (k1 + k2)
        * float(np.sum(grid.weights * (lam_x - lam_y) ** 2))
    )
    gen = as_generator(rng)
    gx, gy = gen.spawn(2)
    pts = grid.points()
    ens_x = build_ensemble(kind, est_x, k1, B, pts, scheme=scheme, rng=gx,
                           tail=tail, h=h)
    ens_y = build_ensemble(kind, est_y, k2, B, pts, scheme=scheme, rng=gy,
                           tail=tail, h=h)
    cx = math.sqrt(k2 / (k1 + k2))
    cy = math.sqrt(k1 / (k1 + k2))
    diff = cx * ens_x.draws - cy * ens_y.draws
    boot = diff**2 @ grid.weights
    quantile = empirical_quantile(boot, 1.0 - alpha)
    return TestReport(
        test="equal-tail-copulas",
        statistic=float(statistic),
        p_value=_pvalue(boot, statistic),
        alpha=alpha,
        quantile=quantile,
        reject=bool(statistic > quantile),
        kind=kind,
        B=B,
        quantiles=_report_quantiles(boot),
        params={"k1": k1, "k2": k2, "n1": est_x.n, "n2": est_y.n,
                "grid": grid.size, "tail": tail, "scheme": scheme.name,
                "seed": _seed_of(rng)},
        bootstrap=boot if keep_bootstrap else None,
    )


def _seed_of(rng):
    """Echo the seed into reports when the caller passed one explicitly."""
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    if isinstance(rng, (tuple, list)):
        return [int(v) for v in rng]
    return None


def _as_estimator(sample, k, tail) -> EmpiricalTailCopula:
    if isinstance(sample, EmpiricalTailCopula):
        return sample
    if isinstance(sample, BivariateSample):
        return EmpiricalTailCopula(sample, k, tail=tail)
    return EmpiricalTailCopula(BivariateSample(sample), k, tail=tail)


# ---------------------------------------------------------------------------
# minimum-distance estimation


@dataclasses.dataclass
class MDEstimate:
    """Minimum-distance fit of a parametric family."""

    family: str
    theta: float
    objective: float
    k: int

    @property
    def lambda_coef(self) -> float:
        return FAMILIES[self.family](self.theta).lambda_coef()

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "theta": self.theta,
            "objective": self.objective,
            "k": self.k,
            "lambda": self.lambda_coef,
        }


def md_estimate(sample, k: int, family: str,
                grid: AngularGrid | None = None,
                bounds: tuple[float, float] | None = None,
                tail: str = "lower") -> MDEstimate:
    """Fit the family parameter by minimizing the angular distance to the
    empirical tail copula.

    Five bracketing starts across the bounds guard against flat or
    multimodal objectives; the chosen bracket is refined by bounded
    golden-section/parabolic search to 1e-8 in theta.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if grid is None:
        grid = AngularGrid.midpoint()
    est = _as_estimator(sample, k, tail)
    lam_hat = est.angular(grid.nodes)
    cos_phi = np.cos(grid.nodes)
    sin_phi = np.sin(grid.nodes)
    cls = FAMILIES[family]
    w = grid.weights

    def objective(theta: float) -> float:
        model_vals = cls(theta).tail_copula(cos_phi, sin_phi)
        return float(np.sum(w * (lam_hat - model_vals) ** 2))

    lo, hi = bounds if bounds is not None else THETA_BOUNDS[family]
    if not lo < hi:
        raise ValueError("bounds must satisfy lo < hi")
    starts = np.linspace(lo, hi, 5)
    values = [objective(t) for t in starts]
    best = int(np.argmin(values))
    b_lo = starts[max(best - 1, 0)]
    b_hi = starts[min(best + 1, len(starts) - 1)]
    res = minimize_scalar(
        objective, bounds=(b_lo, b_hi), method="bounded",
        options={"xatol": 1e-8},
    )
    theta, value = float(res.x), float(res.fun)
    # keep a bracket endpoint if the refinement did not beat it
    for t, v in zip((lo, hi, starts[best]), map(objective, (lo, hi, starts[best]))):
        if v < value:
            theta, value = float(t), float(v)
    return MDEstimate(family=family, theta=theta, objective=value, k=est.k)


def _md_weights(est, family, theta, grid):
    """gamma(phi) such that the bootstrap parameter draw is the weighted
    angular integral of a process draw."""
    cls = FAMILIES[family]
    model = cls(theta)
    cos_phi = np.cos(grid.nodes)
    sin_phi = np.sin(grid.nodes)
    delta = np.atleast_1d(model.theta_partial(cos_phi, sin_phi))
    ddelta = np.atleast_1d(model.theta_partial2(cos_phi, sin_phi))
    lam_model = model.tail_copula(cos_phi, sin_phi)
    lam_hat = est.angular(grid.nodes)
    normal = float(np.sum(
        grid.weights * (delta**2 + ddelta * (lam_model - lam_hat))
    ))
    if abs(normal) < 1e-10:
        raise ArithmeticError(
            "minimum-distance normal equation is singular at theta="
            f"{theta}"
        )
    return delta / normal, delta


def md_bootstrap(sample, k: int, family: str, theta: float,
                 ensemble: BootstrapEnsemble,
                 grid: AngularGrid | None = None,
                 tail: str = "lower") -> np.ndarray:
    """Bootstrap draws of the scaled estimation error of the MD fit.

    ``ensemble`` must hold pdm or dm draws on the grid's angular points;
    each row maps to one draw of ``sqrt(k) * (theta-hat - theta)``.
    """
    if ensemble.kind not in ("pdm", "dm"):
        raise ValueError(
            "md bootstrap needs an ensemble approximating the estimator "
            "limit (pdm or dm)"
        )
    if grid is None:
        grid = AngularGrid.midpoint()
    if ensemble.draws.shape[1] != grid.size or not np.allclose(
        ensemble.points, grid.points(), equal_nan=True
    ):
        raise ValueError("ensemble points do not match the grid")
    est = _as_estimator(sample, k, tail)
    gamma, _ = _md_weights(est, family, theta, grid)
    return ensemble.draws @ (grid.weights * gamma)


def md_confidence_interval(theta: float, boot, k: int,
                           alpha: float = 0.05) -> tuple[float, float]:
    """Bootstrap confidence interval for the MD parameter estimate."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    scale = 1.0 / math.sqrt(k)
    hi_q = empirical_quantile(boot, 1.0 - alpha / 2.0)
    lo_q = empirical_quantile(boot, alpha / 2.0)
    return (theta - scale * hi_q, theta - scale * lo_q)


def analytic_md_variance(model: TailCopulaModel,
                         grid: AngularGrid | None = None) -> float:
    """Limit variance of sqrt(k) * (theta-hat - theta) at the true model.

    Double quadrature of the limit covariance kernel against the MD
    weight function.
    """
    if grid is None:
        grid = AngularGrid.midpoint()
    cos_phi = np.cos(grid.nodes)
    sin_phi = np.sin(grid.nodes)
    delta = np.atleast_1d(model.theta_partial(cos_phi, sin_phi))
    normal = float(np.sum(grid.weights * delta**2))
    gamma = delta / normal
    R = true_cov_matrix(model, grid.points())
    wg = grid.weights * gamma
    return float(wg @ R @ wg)


# ---------------------------------------------------------------------------
# goodness of fit


def gof_test(sample, k: int, family: str, B: int = 500, alpha: float = 0.05,
             kind: str = "pdm", scheme: MultiplierScheme = TWO_POINT,
             grid: AngularGrid | None = None, rng=None, tail: str = "lower",
             h: float | None = None,
             keep_bootstrap: bool = True) -> TestReport:
    """Test whether the tail copula belongs to a parametric family.

    Fits the family by minimum distance, measures the scaled angular
    distance between fit and empirical estimate, and bootstraps the
    statistic with the fitted-parameter fluctuation removed.
    """
    if kind not in ("pdm", "dm"):
        raise ValueError("gof test supports kinds 'pdm' and 'dm'")
    if grid is None:
        grid = AngularGrid.midpoint()
    est = _as_estimator(sample, k, tail)
    k = est.k
    fit = md_estimate(est, k, family, grid=grid, tail=tail)
    model = FAMILIES[family](fit.theta)
    lam_hat = est.angular(grid.nodes)
    lam_model = model.tail_copula(np.cos(grid.nodes), np.sin(grid.nodes))
    statistic = k * float(np.sum(grid.weights * (lam_hat - lam_model) ** 2))
    ens = build_ensemble(kind, est, k, B, grid.points(), scheme=scheme,
                         rng=rng, tail=tail, h=h)
    gamma, delta = _md_weights(est, family, fit.theta, grid)
    theta_draws = ens.draws @ (grid.weights * gamma)
    residual = ens.draws - theta_draws[:, None] * delta[None, :]
    boot = residual**2 @ grid.weights
    quantile = empirical_quantile(boot, 1.0 - alpha)
    return TestReport(
        test="goodness-of-fit",
        statistic=float(statistic),
        p_value=_pvalue(boot, statistic),
        alpha=alpha,
        quantile=quantile,
        reject=bool(statistic > quantile),
        kind=kind,
        B=B,
        quantiles=_report_quantiles(boot),
        params={"family": family, "theta": fit.theta, "k": k, "n": est.n,
                "grid": grid.size, "tail": tail, "scheme": scheme.name,
                "seed": _seed_of(rng)},
        bootstrap=boot if keep_bootstrap else None,
    )
