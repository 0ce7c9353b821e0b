"""Parametric tail copula families.

A (lower) tail copula ``L(x1, x2)`` describes joint extremes of a bivariate
distribution: it is the limit of ``t * P(U1 <= x1/t, U2 <= x2/t)`` for
uniform marginals.  Every family here is positively homogeneous,
``L(t*x) = t*L(x)``, vanishes on the axes and satisfies
``L(x1, inf) = x1``, ``L(inf, x2) = x2``.

Implemented families (config names in parentheses):

* Clayton (``clayton``): ``L(x) = (x1**-t + x2**-t)**(-1/t)``, ``t > 0``.
* Convex Clayton mixture (``convex_clayton``): one third of the Clayton
  tail copula, arising from a 1/3 : 2/3 convex combination of a Clayton
  copula with independence.
* Asymmetric negative logistic (``aneglog``):
  ``L(x) = ((p1*x1)**-t + (p2*x2)**-t)**(-1/t)`` with fixed shape
  ``p1 = 2/3``, ``p2 = 1``.
* Mixed (``mixed``): ``L(x) = t * x1 * x2 / (x1 + x2)``, ``t in [0, 1]``.

The tail dependence coefficient is ``lambda = L(1, 1)``.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .rng import as_generator

__all__ = [
    "TailCopulaModel",
    "Clayton",
    "ConvexClayton",
    "AsymNegLogistic",
    "Mixed",
    "FAMILIES",
    "THETA_BOUNDS",
    "make_model",
    "model_from_config",
    "solve_theta",
]

# Default search intervals for the dependence parameter, also used by the
# minimum-distance fitter.
THETA_BOUNDS = {
    "clayton": (0.05, 20.0),
    "convex_clayton": (0.05, 20.0),
    "aneglog": (0.05, 20.0),
    "mixed": (0.0, 1.0),
}


def _as_float_arrays(*args):
    arrs = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in args))
    return arrs, arrs[0].ndim == 0


def _ret(value, scalar):
    return float(value) if scalar else value


def _clayton_log_core(x1, x2, theta):
    """log of (x1**-t + x2**-t)**(-1/t), in log-sum-exp form.

    Written so that coordinates equal to 0 give -inf and coordinates equal
    to +inf drop out, matching the limits of the closed form.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        a = -theta * np.log(x1)
        b = -theta * np.log(x2)
        hi = np.maximum(a, b)
        lo = np.minimum(a, b)
        out = -(hi + np.log1p(np.exp(lo - hi))) / theta
    # lo - hi is NaN when both coordinates are 0 (inf - inf) or both inf.
    out = np.where(np.isinf(x1) & np.isinf(x2), np.inf, out)
    out = np.where((x1 <= 0) | (x2 <= 0), -np.inf, out)
    return out


def _clayton_value(x1, x2, theta):
    return np.exp(_clayton_log_core(x1, x2, theta))


def _clayton_partial1(x1, x2, theta):
    """Interior first partial of the Clayton tail copula in x1."""
    logv = _clayton_log_core(x1, x2, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp((1.0 + theta) * (logv - np.log(x1)))
    return out


def _clayton_theta_partial(x1, x2, theta):
    """Interior d/dtheta of the Clayton tail copula (log-derivative form)."""
    a = -np.log(x1)
    b = -np.log(x2)
    m = np.maximum(a * theta, b * theta)
    ea = np.exp(a * theta - m)
    eb = np.exp(b * theta - m)
    s = ea + eb
    log_s = m + np.log(s)
    ds_over_s = (a * ea + b * eb) / s
    lam = np.exp(-log_s / theta)
    return lam * (log_s / theta**2 - ds_over_s / theta)


def _clayton_theta_partial2(x1, x2, theta):
    """Interior second theta-derivative of the Clayton tail copula."""
    a = -np.log(x1)
    b = -np.log(x2)
    m = np.maximum(a * theta, b * theta)
    ea = np.exp(a * theta - m)
    eb = np.exp(b * theta - m)
    s = ea + eb
    log_s = m + np.log(s)
    r1 = (a * ea + b * eb) / s
    r2 = (a * a * ea + b * b * eb) / s
    lp = log_s / theta**2 - r1 / theta
    lpp = -2.0 * log_s / theta**3 + 2.0 * r1 / theta**2 - (r2 - r1 * r1) / theta
    lam = np.exp(-log_s / theta)
    return lam * (lpp + lp * lp)


class TailCopulaModel:
    """Base class: a tail copula family with one dependence parameter."""

    family = ""

    def __init__(self, theta: float):
        self.theta = float(theta)
        self._validate()

    def _validate(self):
        lo, hi = THETA_BOUNDS[self.family]
        if not (lo <= self.theta <= hi) or not math.isfinite(self.theta):
            raise ValueError(
                f"{self.family}: theta={self.theta} outside [{lo}, {hi}]"
            )

    def __repr__(self):
        return f"{type(self).__name__}(theta={self.theta!r})"

    # -- values ----------------------------------------------------------

    def tail_copula(self, x1, x2):
        """Evaluate L(x1, x2); broadcasts, accepts 0 and inf coordinates."""
        raise NotImplementedError

    def angular(self, phi):
        """L(cos(phi), sin(phi)) on the quarter circle."""
        phi = np.asarray(phi, dtype=float)
        return self.tail_copula(np.cos(phi), np.sin(phi))

    def lambda_coef(self) -> float:
        """Tail dependence coefficient L(1, 1)."""
        return float(self.tail_copula(1.0, 1.0))

    # -- first partials in x ---------------------------------------------

    def _interior_partial(self, x1, x2, which):
        raise NotImplementedError

    def _axis_limit(self, which) -> float:
        """Value of the partial on the axis x_which = 0 (other coord > 0).

        This is the limit of L(1, t) (or L(t, 1)) as t grows: the partial
        derivative jumps there, it is not the limit of interior partials
        along other paths.
        """
        raise NotImplementedError

    def partial(self, x1, x2, which: int):
        """First partial derivative of L in coordinate ``which`` (1 or 2).

        Conventions at the boundary: 0 when the differentiated coordinate
        is infinite or both coordinates are 0; the axis limit when the
        differentiated coordinate is 0 and the other is positive; 0 when
        the other coordinate is 0; 1 when the other coordinate is infinite.
        """
        if which not in (1, 2):
            raise ValueError("which must be 1 or 2")
        (x1, x2), scalar = _as_float_arrays(x1, x2)
        xp, xo = (x1, x2) if which == 1 else (x2, x1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._interior_partial(x1, x2, which)
        out = np.where(xo == 0.0, 0.0, out)
        out = np.where((xp == 0.0) & (xo > 0.0), self._axis_limit(which), out)
        out = np.where(np.isinf(xo) & np.isfinite(xp) & (xp > 0), 1.0, out)
        out = np.where(np.isinf(xp), 0.0, out)
        return _ret(out, scalar)

    # -- theta derivatives -------------------------------------------------

    def _interior_theta_partial(self, x1, x2):
        h = 1e-5 * max(1.0, abs(self.theta))
        up = type(self)(self.theta + h)
        dn = type(self)(self.theta - h)
        return (up.tail_copula(x1, x2) - dn.tail_copula(x1, x2)) / (2.0 * h)

    def _interior_theta_partial2(self, x1, x2):
        h = 1e-4
        up = type(self)(self.theta + h)
        dn = type(self)(self.theta - h)
        return (
            up.tail_copula(x1, x2)
            - 2.0 * self.tail_copula(x1, x2)
            + dn.tail_copula(x1, x2)
        ) / h**2

    def theta_partial(self, x1, x2):
        """d L / d theta; zero on the axes and at infinite coordinates."""
        (x1, x2), scalar = _as_float_arrays(x1, x2)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._interior_theta_partial(x1, x2)
        degenerate = (x1 <= 0) | (x2 <= 0) | np.isinf(x1) | np.isinf(x2)
        return _ret(np.where(degenerate, 0.0, out), scalar)

    def theta_partial2(self, x1, x2):
        """Second theta-derivative of L, same boundary conventions."""
        (x1, x2), scalar = _as_float_arrays(x1, x2)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._interior_theta_partial2(x1, x2)
        degenerate = (x1 <= 0) | (x2 <= 0) | np.isinf(x1) | np.isinf(x2)
        return _ret(np.where(degenerate, 0.0, out), scalar)

    # -- sampling ----------------------------------------------------------

    def sample(self, n: int, rng=None) -> np.ndarray:
        """Draw ``n`` pairs with uniform marginals whose lower tail copula
        is this model.  Returns an (n, 2) array."""
        raise NotImplementedError


class Clayton(TailCopulaModel):
    """Clayton family; lambda = 2**(-1/theta)."""

    family = "clayton"

    def tail_copula(self, x1, x2):
        (x1, x2), scalar = _as_float_arrays(x1, x2)
        return _ret(_clayton_value(x1, x2, self.theta), scalar)

    def _interior_partial(self, x1, x2, which):
        if which == 1:
            return _clayton_partial1(x1, x2, self.theta)
        return _clayton_partial1(x2, x1, self.theta)

    def _axis_limit(self, which):
        return 1.0

    def _interior_theta_partial(self, x1, x2):
        return _clayton_theta_partial(x1, x2, self.theta)

    def _interior_theta_partial2(self, x1, x2):
        return _clayton_theta_partial2(x1, x2, self.theta)

    def sample(self, n, rng=None):
        # Conditional quantile of the Clayton copula is available in closed
        # form, so sampling is exact inversion of two uniforms.
        gen = as_generator(rng)
        u1 = gen.random(n)
        p = gen.random(n)
        u2 = _kernels.clayton_conditional_quantile(u1, p, self.theta)
        return np.column_stack((u1, u2))


class ConvexClayton(TailCopulaModel):
    """One-third Clayton / two-thirds independence convex combination."""

    family = "convex_clayton"
    weight = 1.0 / 3.0

    def tail_copula(self, x1, x2):
        (x1, x2), scalar = _as_float_arrays(x1, x2)
        out = self.weight * _clayton_value(x1, x2, self.theta)
        # the convex combination must keep the marginal sections exact
        out = np.where(np.isinf(x1) & np.isfinite(x2), x2, out)
        out = np.where(np.isinf(x2) & np.isfinite(x1), x1, out)
        out = np.where(np.isinf(x1) & np.isinf(x2), np.inf, out)
        return _ret(out, scalar)

    def _interior_partial(self, x1, x2, which):
        if which == 1:
            return self.weight * _clayton_partial1(x1, x2, self.theta)
        return self.weight * _clayton_partial1(x2, x1, self.theta)

    def _axis_limit(self, which):
        return self.weight

    def sample(self, n, rng=None, return_component=False):
        gen = as_generator(rng)
        u1 = gen.random(n)
        p = gen.random(n)
        pick = gen.random(n) < self.weight
        u2 = np.where(
            pick, _kernels.clayton_conditional_quantile(u1, p, self.theta), p
        )
        out = np.column_stack((u1, u2))
        if return_component:
            return out, pick
        return out


class _ExtremeValueSampled(TailCopulaModel):
    """Families sampled through the survival copula of an extreme-value
    copula with stable tail dependence function l(x) = x1 + x2 - L(x)."""

    _kernel_family = -1

    def _shape(self) -> tuple[float, float]:
        return (1.0, 1.0)

    def sample(self, n, rng=None):
        gen = as_generator(rng)
        u = gen.random(n)
        p = gen.random(n)
        p1, p2 = self._shape()
        v = _kernels.ev_conditional_quantile(
            u, p, self._kernel_family, self.theta, p1, p2
        )
        # reflect: joint upper extremes of the EV copula become the lower
        # tail of the returned pair
        return np.column_stack((1.0 - u, 1.0 - v))


class AsymNegLogistic(_ExtremeValueSampled):
    """Asymmetric negative logistic family with fixed shape (2/3, 1)."""

    family = "aneglog"
    psi1 = 2.0 / 3.0
    psi2 = 1.0
    _kernel_family = _kernels.FAMILY_ANEGLOG

    def _shape(self):
        return (self.psi1, self.psi2)

    def tail_copula(self, x1, x2):
        (x1, x2), scalar = _as_float_arrays(x1, x2)
        out = _clayton_value(self.psi1 * x1, self.psi2 * x2, self.theta)
        # with psi1 < 1 the interior values tend to psi1*x1 as x2 grows;
        # the marginal sections are fixed by convention, not by continuity
        out = np.where(np.isinf(x1) & np.isfinite(x2), x2, out)
        out = np.where(np.isinf(x2) & np.isfinite(x1), x1, out)
        out = np.where(np.isinf(x1) & np.isinf(x2), np.inf, out)
        return _ret(out, scalar)

    def _interior_partial(self, x1, x2, which):
        if which == 1:
            return self.psi1 * _clayton_partial1(
                self.psi1 * x1, self.psi2 * x2, self.theta
            )
        return self.psi2 * _clayton_partial1(
            self.psi2 * x2, self.psi1 * x1, self.theta
        )

    def _axis_limit(self, which):
        # limit of L(1, t) resp. L(t, 1): the surviving scale coefficient
        return self.psi1 if which == 1 else self.psi2


class Mixed(_ExtremeValueSampled):
    """Mixed family L(x) = theta * x1 * x2 / (x1 + x2); lambda = theta / 2."""

    family = "mixed"
    _kernel_family = _kernels.FAMILY_MIXED

    def tail_copula(self, x1, x2):
        (x1, x2), scalar = _as_float_arrays(x1, x2)
        with np.errstate(invalid="ignore"):
            out = self.theta * x1 * x2 / (x1 + x2)
        out = np.where(np.isinf(x1) & np.isfinite(x2), x2, out)
        out = np.where(np.isinf(x2) & np.isfinite(x1), x1, out)
        out = np.where(np.isinf(x1) & np.isinf(x2), np.inf, out)
        out = np.where((x1 == 0.0) | (x2 == 0.0), 0.0, out)
        return _ret(out, scalar)

    def _interior_partial(self, x1, x2, which):
        xo = x2 if which == 1 else x1
        return self.theta * xo**2 / (x1 + x2) ** 2

    def _axis_limit(self, which):
        return self.theta

    def _interior_theta_partial(self, x1, x2):
        return x1 * x2 / (x1 + x2)

    def _interior_theta_partial2(self, x1, x2):
        return np.zeros(np.broadcast(x1, x2).shape)


FAMILIES = {
    cls.family: cls for cls in (Clayton, ConvexClayton, AsymNegLogistic, Mixed)
}


def solve_theta(family: str, lambda_target: float, tol: float = 1e-12) -> float:
    """Invert lambda(theta) = L(1,1) by bisection on the family bounds.

    The coefficient is strictly increasing in theta for every family, so a
    plain bisection converges; we stop when the bracket collapses or the
    coefficient matches to ``tol``.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    cls = FAMILIES[family]
    lo, hi = THETA_BOUNDS[family]
    f_lo = cls(lo).lambda_coef() - lambda_target
    f_hi = cls(hi).lambda_coef() - lambda_target
    if f_lo > 0 or f_hi < 0:
        raise ValueError(
            f"{family}: lambda={lambda_target} not reachable on theta in "
            f"[{lo}, {hi}] (range [{f_lo + lambda_target:.6g}, "
            f"{f_hi + lambda_target:.6g}])"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = cls(mid).lambda_coef() - lambda_target
        if abs(val) <= tol:
            return mid
        if val < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def make_model(family: str, theta: float | None = None,
               lambda_coef: float | None = None) -> TailCopulaModel:
    """Build a model from either theta or a target dependence coefficient."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if (theta is None) == (lambda_coef is None):
        raise ValueError("give exactly one of theta or lambda_coef")
    if theta is None:
        theta = solve_theta(family, lambda_coef)
    return FAMILIES[family](theta)


def model_from_config(cfg: dict) -> TailCopulaModel:
    """Build a model from a config mapping.

    Accepts ``{"family": ..., "theta": ...}`` or
    ``{"family": ..., "lambda": ...}``.
    """
    if "family" not in cfg:
        raise ValueError("model config needs a 'family' entry")
    extra = set(cfg) - {"family", "theta", "lambda"}
    if extra:
        raise ValueError(f"unknown model config keys: {sorted(extra)}")
    return make_model(
        cfg["family"], theta=cfg.get("theta"), lambda_coef=cfg.get("lambda")
    )
