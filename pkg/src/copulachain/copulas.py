"""Bivariate copula families and their convex mixtures.

Every family exposes the joint distribution function, the conditional
distribution ``C_{,1}(u, v) = P(V <= v | U = u)``, the density of the
absolutely continuous part and the conditional quantile used to simulate
the Markov chain generated by the copula.  Evaluation is vectorized over
numpy arrays; scalar inputs return Python-level floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, special

from .errors import BadWeights, InvalidSpec, NoConvergence, NumericalFailure, OutOfRangeParameter
from .student import t_logpdf, t_quantile

# Coordinates are clamped to [CLAMP, 1 - CLAMP] before evaluating formulas.
CLAMP = 1e-15
WEIGHT_TOL = 1e-12
MAX_MIXTURE_DEPTH = 4
MAX_BISECTION = 200
T_CDF_TOL = 1e-8


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _check_unit(name: str, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~((x >= 0.0) & (x <= 1.0))):
        raise ValueError(f"{name} must lie in [0, 1]")
    return x


class Copula:
    """Common evaluation logic; subclasses supply the interior formulas."""

    has_singular_part = False
    closed_form_cdf = True

    @property
    def label(self) -> str:
        return type(self).__name__

    def __str__(self) -> str:
        return self.label

    def depth(self) -> int:
        return 0

    # interior formulas, inputs already clamped and broadcast
    def _cdf(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _conditional(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _density(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cdf(self, u, v):
        u, v = np.broadcast_arrays(_check_unit("u", u), _check_unit("v", v))
        uc = np.clip(u, CLAMP, 1.0 - CLAMP)
        vc = np.clip(v, CLAMP, 1.0 - CLAMP)
        out = self._cdf(uc, vc)
        # exact boundary conditions, then the Frechet-Hoeffding bounds
        out = np.clip(out, np.maximum(u + v - 1.0, 0.0), np.minimum(u, v))
        out = np.where(u == 1.0, v, np.where(v == 1.0, u, out))
        out = np.where((u == 0.0) | (v == 0.0), 0.0, out)
        return _out(out)

    def conditional_cdf(self, u, v):
        u, v = np.broadcast_arrays(_check_unit("u", u), _check_unit("v", v))
        uc = np.clip(u, CLAMP, 1.0 - CLAMP)
        vc = np.clip(v, CLAMP, 1.0 - CLAMP)
        out = np.clip(self._conditional(uc, vc), 0.0, 1.0)
        out = np.where(v == 0.0, 0.0, np.where(v == 1.0, 1.0, out))
        return _out(out)

    def density(self, u, v):
        u, v = np.broadcast_arrays(_check_unit("u", u), _check_unit("v", v))
        uc = np.clip(u, CLAMP, 1.0 - CLAMP)
        vc = np.clip(v, CLAMP, 1.0 - CLAMP)
        return _out(np.maximum(self._density(uc, vc), 0.0))

    def inverse_conditional(self, u: float, p: float, tol: float = 1e-12) -> float:
        """Leftmost v with ``conditional_cdf(u, v) >= p``, to within ``tol``."""
        u, p = float(u), float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError("probability must lie in [0, 1]")
        if tol <= 0:
            raise ValueError("tol must be positive")
        u = min(max(u, CLAMP), 1.0 - CLAMP)
        if p == 0.0:
            return 0.0
        return self._inverse(u, p, tol)

    def _inverse(self, u: float, p: float, tol: float) -> float:
        return bisect_conditional(self._scalar_conditional(u), p, tol)

    def _scalar_conditional(self, u: float) -> Callable[[float], float]:
        uu = np.float64(u)

        def f(v: float) -> float:
            if v >= 1.0:
                return 1.0
            if v <= 0.0:
                return 0.0
            vc = min(max(v, CLAMP), 1.0 - CLAMP)
            return min(max(float(self._conditional(uu, np.float64(vc))), 0.0), 1.0)

        return f


def bisect_conditional(f: Callable[[float], float], p: float, tol: float) -> float:
    """Bisection for the leftmost crossing of a nondecreasing function of v.

    Keeps ``f(lo) < p <= f(hi)`` and returns ``hi``, so a jump across ``p``
    resolves to the jump location.  Refinement continues past ``tol`` while
    the residual ``f(hi) - p`` still exceeds ``tol``.
    """
    lo, hi = 0.0, 1.0
    fhi = f(hi)
    for _ in range(MAX_BISECTION):
        if hi - lo <= tol and fhi - p <= tol:
            return hi
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return hi
        fmid = f(mid)
        if fmid >= p:
            hi, fhi = mid, fmid
        else:
            lo = mid
    if hi - lo > tol:
        raise NoConvergence("conditional quantile bisection exhausted", hi - lo)
    return hi


@dataclass(frozen=True)
class Independence(Copula):
    """Product copula: consecutive states are independent."""

    def _cdf(self, u, v):
        return u * v

    def _conditional(self, u, v):
        return v + 0.0 * u

    def _density(self, u, v):
        return np.ones_like(u + v)

    def _inverse(self, u, p, tol):
        return p


@dataclass(frozen=True)
class FrechetM(Copula):
    """Upper Frechet bound min(u, v): the chain never moves."""

    has_singular_part = True

    def _cdf(self, u, v):
        return np.minimum(u, v)

    def _conditional(self, u, v):
        return np.where(v >= u, 1.0, 0.0)

    def _density(self, u, v):
        return np.zeros_like(u + v)

    def conditional_cdf(self, u, v):
        # the unit step sits exactly at v = u, so compare unclamped values
        u, v = np.broadcast_arrays(_check_unit("u", u), _check_unit("v", v))
        return _out(np.where(v >= u, 1.0, 0.0))

    def _inverse(self, u, p, tol):
        return u


@dataclass(frozen=True)
class Clayton(Copula):
    theta: float

    def __post_init__(self):
        t = float(self.theta)
        if not (math.isfinite(t) and t > 0):
            raise OutOfRangeParameter("theta", self.theta, "(0, inf)", "Clayton")
        object.__setattr__(self, "theta", t)

    @property
    def label(self):
        return f"Clayton(theta={_fmt(self.theta)})"

    # With a = -theta*ln(u), b = -theta*ln(v) the core sum is
    # S = u^-theta + v^-theta - 1 = e^a + e^b - 1, evaluated in log space.
    def _logs(self, u, v):
        a = -self.theta * np.log(u)
        b = -self.theta * np.log(v)
        hi, lo = np.maximum(a, b), np.minimum(a, b)
        log_s = hi + np.log1p(np.expm1(lo) * np.exp(-hi))
        return a, b, log_s

    def _cdf(self, u, v):
        _, _, log_s = self._logs(u, v)
        return np.exp(-log_s / self.theta)

    def _conditional(self, u, v):
        a, _, log_s = self._logs(u, v)
        return np.exp((self.theta + 1) / self.theta * (a - log_s))

    def _density(self, u, v):
        t = self.theta
        a, b, log_s = self._logs(u, v)
        return (1 + t) * np.exp((t + 1) / t * (a + b) - (2 * t + 1) / t * log_s)

    def _inverse(self, u, p, tol):
        # v^-theta = 1 + (p^(-theta/(1+theta)) - 1) u^-theta
        t = self.theta
        w = math.expm1(-t / (1 + t) * math.log(p))
        if w <= 0.0:
            return 1.0
        z = math.log(w) - t * math.log(u)
        log1p_term = z + math.log1p(math.exp(-z)) if z > 0 else math.log1p(math.exp(z))
        return math.exp(-log1p_term / t)

    def _scalar_conditional(self, u):
        t = self.theta
        a = -t * math.log(u)
        k = (t + 1) / t

        def f(v):
            if v >= 1.0:
                return 1.0
            if v <= 0.0:
                return 0.0
            b = -t * math.log(min(max(v, CLAMP), 1.0 - CLAMP))
            hi, lo = max(a, b), min(a, b)
            log_s = hi + math.log1p(math.expm1(lo) * math.exp(-hi))
            return min(math.exp(k * (a - log_s)), 1.0)

        return f


@dataclass(frozen=True)
class Gumbel(Copula):
    beta: float

    def __post_init__(self):
        b = float(self.beta)
        if not (math.isfinite(b) and b >= 1):
            raise OutOfRangeParameter("beta", self.beta, "[1, inf)", "Gumbel")
        object.__setattr__(self, "beta", b)

    @property
    def label(self):
        return f"Gumbel(beta={_fmt(self.beta)})"

    # x = -ln u, y = -ln v, w = (x^beta + y^beta)^(1/beta) and C = exp(-w)
    def _parts(self, u, v):
        x, y = -np.log(u), -np.log(v)
        hi, lo = np.maximum(x, y), np.minimum(x, y)
        w = hi * np.power(1.0 + np.power(lo / hi, self.beta), 1.0 / self.beta)
        return x, y, w

    def _cdf(self, u, v):
        _, _, w = self._parts(u, v)
        return np.exp(-w)

    def _conditional(self, u, v):
        x, _, w = self._parts(u, v)
        return np.exp(x - w) * np.power(x / w, self.beta - 1.0)

    def _density(self, u, v):
        b = self.beta
        x, y, w = self._parts(u, v)
        return np.exp(x + y - w) * np.power(x * y / (w * w), b - 1.0) * (1.0 + (b - 1.0) / w)

    def _scalar_conditional(self, u):
        b = self.beta
        x = -math.log(u)

        def f(v):
            if v >= 1.0:
                return 1.0
            if v <= 0.0:
                return 0.0
            y = -math.log(min(max(v, CLAMP), 1.0 - CLAMP))
            hi, lo = max(x, y), min(x, y)
            w = hi * (1.0 + (lo / hi) ** b) ** (1.0 / b)
            return min(math.exp(x - w) * (x / w) ** (b - 1.0), 1.0)

        return f


@dataclass(frozen=True)
class StudentT(Copula):
    """t copula with correlation ``rho`` and ``nu`` degrees of freedom.

    The joint distribution function has no elementary form; it is computed
    as the integral over the smaller coordinate of the closed-form
    conditional distribution, which keeps it exactly symmetric.
    """

    rho: float
    nu: float
    closed_form_cdf = False

    def __post_init__(self):
        r, n = float(self.rho), float(self.nu)
        if not (math.isfinite(r) and -1 < r < 1):
            raise OutOfRangeParameter("rho", self.rho, "(-1, 1)", "StudentT")
        if not (math.isfinite(n) and n > 2):
            raise OutOfRangeParameter("nu", self.nu, "(2, inf)", "StudentT")
        object.__setattr__(self, "rho", r)
        object.__setattr__(self, "nu", n)

    @property
    def label(self):
        return f"StudentT(rho={_fmt(self.rho)}, nu={_fmt(self.nu)})"

    def conditional_from_quantiles(self, x, y):
        """Conditional cdf in t-quantile coordinates x = t^-1(u), y = t^-1(v)."""
        r, n = self.rho, self.nu
        scale = np.sqrt((n + 1) / ((n + x * x) * (1 - r * r)))
        with np.errstate(invalid="ignore"):
            z = (y - r * x) * scale
        return special.stdtr(n + 1, z)

    def _conditional(self, u, v):
        return self.conditional_from_quantiles(t_quantile(u, self.nu), t_quantile(v, self.nu))

    def _density(self, u, v):
        r, n = self.rho, self.nu
        x, y = t_quantile(u, n), t_quantile(v, n)
        one_r2 = 1 - r * r
        log_joint = (
            -math.log(2 * math.pi)
            - 0.5 * math.log(one_r2)
            - (n + 2) / 2 * np.log1p((x * x - 2 * r * x * y + y * y) / (n * one_r2))
        )
        return np.exp(log_joint - t_logpdf(x, n) - t_logpdf(y, n))

    def _cdf(self, u, v):
        s, t = np.minimum(u, v), np.maximum(u, v)
        out = np.empty(s.shape)
        for idx in np.ndindex(s.shape):
            out[idx] = self._cdf_point(float(s[idx]), float(t[idx]))
        return out

    def _cdf_point(self, s: float, t: float) -> float:
        y = t_quantile(t, self.nu)
        val, err = integrate.quad(
            lambda x: float(self.conditional_from_quantiles(t_quantile(x, self.nu), y)),
            0.0,
            s,
            epsabs=1e-12,
            epsrel=1e-12,
            limit=200,
        )
        if not err <= T_CDF_TOL:
            raise NumericalFailure(f"{self.label} cdf quadrature at ({s}, {t})", err)
        return val

    def _inverse(self, u, p, tol):
        # v = t_nu(rho*x + t_{nu+1}^-1(p) * sqrt((nu + x^2)(1 - rho^2)/(nu + 1)))
        r, n = self.rho, self.nu
        x = t_quantile(u, n)
        z = t_quantile(p, n + 1)
        if math.isinf(z):
            return 1.0 if z > 0 else 0.0
        y = r * x + z * math.sqrt((n + x * x) * (1 - r * r) / (n + 1))
        return float(special.stdtr(n, y))

    def _scalar_conditional(self, u):
        r, n = self.rho, self.nu
        x = t_quantile(u, n)
        scale = math.sqrt((n + 1) / ((n + x * x) * (1 - r * r)))

        def f(v):
            if v >= 1.0:
                return 1.0
            if v <= 0.0:
                return 0.0
            y = t_quantile(min(max(v, CLAMP), 1.0 - CLAMP), n)
            return float(special.stdtr(n + 1, (y - r * x) * scale))

        return f


@dataclass(frozen=True)
class MarshallOlkin(Copula):
    """min(u v^(1-alpha), v u^(1-beta)); singular on the curve u^beta = v^alpha."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            x = float(getattr(self, name))
            if not (math.isfinite(x) and 0 <= x <= 1):
                raise OutOfRangeParameter(name, getattr(self, name), "[0, 1]", "MarshallOlkin")
            object.__setattr__(self, name, x)

    @property
    def has_singular_part(self):
        return self.alpha > 0 and self.beta > 0

    @property
    def label(self):
        return f"MarshallOlkin(alpha={_fmt(self.alpha)}, beta={_fmt(self.beta)})"

    def _upper_branch(self, u, v):
        # first argument of the min is active
        return u * np.power(v, 1 - self.alpha) <= v * np.power(u, 1 - self.beta)

    def _cdf(self, u, v):
        return np.minimum(u * np.power(v, 1 - self.alpha), v * np.power(u, 1 - self.beta))

    def _conditional(self, u, v):
        return np.where(
            self._upper_branch(u, v),
            np.power(v, 1 - self.alpha),
            (1 - self.beta) * v * np.power(u, -self.beta),
        )

    def _density(self, u, v):
        return np.where(
            self._upper_branch(u, v),
            (1 - self.alpha) * np.power(v, -self.alpha),
            (1 - self.beta) * np.power(u, -self.beta),
        )

    def _scalar_conditional(self, u):
        a, b = self.alpha, self.beta
        ub = u ** (1 - b)
        lower_coef = (1 - b) * u ** (-b)

        def f(v):
            if v >= 1.0:
                return 1.0
            if v <= 0.0:
                return 0.0
            v = min(max(v, CLAMP), 1.0 - CLAMP)
            va = v ** (1 - a)
            return min(va if u * va <= v * ub else lower_coef * v, 1.0)

        return f


@dataclass(frozen=True)
class Mixture(Copula):
    """Convex combination of copulas; every quantity is weight-linear."""

    components: tuple[Copula, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.asarray(self.weights, dtype=float)
        if not comps:
            raise InvalidSpec("a mixture needs at least one component")
        if not all(isinstance(c, Copula) for c in comps):
            raise InvalidSpec("mixture components must be copulas")
        if w.shape != (len(comps),):
            raise BadWeights(f"expected {len(comps)} weights, got {w.size}")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise BadWeights(f"weights must be nonnegative, got {list(w)}")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise BadWeights(f"weights sum to {total!r}, expected 1")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", tuple(float(x) for x in w / total))
        if self.depth() > MAX_MIXTURE_DEPTH:
            raise InvalidSpec(f"mixture nesting depth exceeds {MAX_MIXTURE_DEPTH}")

    def depth(self):
        return 1 + max(c.depth() for c in self.components)

    @property
    def has_singular_part(self):
        return any(w > 0 and c.has_singular_part for c, w in zip(self.components, self.weights))

    @property
    def closed_form_cdf(self):
        return all(c.closed_form_cdf for c in self.components)

    @property
    def label(self):
        parts = ", ".join(f"{_fmt(w)}*{c.label}" for c, w in zip(self.components, self.weights))
        return f"Mixture({parts})"

    def _combine(self, method: str, u, v):
        out = 0.0
        for c, w in zip(self.components, self.weights):
            out = out + w * np.asarray(getattr(c, method)(u, v))
        return out

    def _cdf(self, u, v):
        return self._combine("_cdf", u, v)

    def _conditional(self, u, v):
        return self._combine("_conditional", u, v)

    def _density(self, u, v):
        return self._combine("_density", u, v)

    def conditional_cdf(self, u, v):
        return _out(self._combine("conditional_cdf", u, v))

    def _scalar_conditional(self, u):
        fs = [(w, c._scalar_conditional(u)) for c, w in zip(self.components, self.weights) if w > 0]

        def f(v):
            return min(sum(w * g(v) for w, g in fs), 1.0)

        return f


# --- construction from plain data ------------------------------------------

_ALIASES = {
    "independence": "independence",
    "product": "independence",
    "pi": "independence",
    "frechetm": "frechetm",
    "frechet_m": "frechetm",
    "m": "frechetm",
    "clayton": "clayton",
    "gumbel": "gumbel",
    "studentt": "studentt",
    "student_t": "studentt",
    "t": "studentt",
    "marshallolkin": "marshallolkin",
    "marshall_olkin": "marshallolkin",
    "mo": "marshallolkin",
    "mixture": "mixture",
}

_PARAMS = {
    "independence": (),
    "frechetm": (),
    "clayton": ("theta",),
    "gumbel": ("beta",),
    "studentt": ("rho", "nu"),
    "marshallolkin": ("alpha", "beta"),
}

_CLASSES = {
    "independence": Independence,
    "frechetm": FrechetM,
    "clayton": Clayton,
    "gumbel": Gumbel,
    "studentt": StudentT,
    "marshallolkin": MarshallOlkin,
}


def validate(raw: Any, _depth: int = 0) -> Copula:
    """Build a validated copula from a mapping such as ``{"family": "clayton", "theta": 1}``.

    Mixtures are ``{"family": "mixture", "components": [...], "weights": [...]}``.
    Already-constructed copulas are returned unchanged.
    """
    if isinstance(raw, Copula):
        return raw
    if not isinstance(raw, Mapping):
        raise InvalidSpec(f"copula description must be a mapping, got {type(raw).__name__}")
    family = str(raw.get("family", "")).strip().lower().replace("-", "_").replace(" ", "_")
    key = _ALIASES.get(family) or _ALIASES.get(family.replace("_", ""))
    if key is None:
        raise InvalidSpec(f"unknown copula family {raw.get('family')!r}")
    if key == "mixture":
        if _depth >= MAX_MIXTURE_DEPTH:
            raise InvalidSpec(f"mixture nesting depth exceeds {MAX_MIXTURE_DEPTH}")
        comps = raw.get("components")
        weights = raw.get("weights")
        if not isinstance(comps, Sequence) or isinstance(comps, str) or not comps:
            raise InvalidSpec("mixture needs a nonempty 'components' list")
        if not isinstance(weights, Sequence) or isinstance(weights, str):
            raise BadWeights("mixture needs a 'weights' list")
        try:
            w = [float(x) for x in weights]
        except (TypeError, ValueError):
            raise BadWeights(f"weights must be numbers, got {weights!r}") from None
        return Mixture(tuple(validate(c, _depth + 1) for c in comps), tuple(w))
    kwargs = {}
    for name in _PARAMS[key]:
        if name not in raw:
            raise InvalidSpec(f"{_CLASSES[key].__name__} requires parameter {name!r}")
        try:
            kwargs[name] = float(raw[name])
        except (TypeError, ValueError):
            raise InvalidSpec(f"parameter {name} must be a number, got {raw[name]!r}") from None
    extra = set(raw) - {"family", *_PARAMS[key]}
    if extra:
        raise InvalidSpec(f"unexpected keys for {key}: {sorted(extra)}")
    return _CLASSES[key](**kwargs)


def describe(spec: Copula) -> dict:
    """Inverse of :func:`validate`: a JSON-ready description."""
    if isinstance(spec, Mixture):
        return {
            "family": "mixture",
            "components": [describe(c) for c in spec.components],
            "weights": list(spec.weights),
        }
    name = {v: k for k, v in _CLASSES.items()}[type(spec)]
    out: dict[str, Any] = {"family": name}
    for p in _PARAMS[name]:
        out[p] = getattr(spec, p)
    return out


# --- functional surface -----------------------------------------------------


def cdf(spec: Copula, u, v):
    return spec.cdf(u, v)


def conditional_cdf(spec: Copula, u, v):
    return spec.conditional_cdf(u, v)


def density(spec: Copula, u, v):
    """Density of the absolutely continuous part and the singular-part flag."""
    return spec.density(u, v), spec.has_singular_part


def inverse_conditional(spec: Copula, u: float, prob: float, tol: float = 1e-12) -> float:
    return spec.inverse_conditional(u, prob, tol)
