"""Univariate Student t helpers used by the t copula.

The quantile is obtained from the inverse regularized incomplete beta
function and polished with Newton steps on the lower tail, which keeps
relative accuracy for probabilities close to 0 or 1.
"""

import math

import numpy as np
from scipy import special

NEWTON_TOL = 1e-10
_NEWTON_STEPS = 8


def t_cdf(x, nu):
    return special.stdtr(nu, x)


def t_logpdf(x, nu):
    x = np.asarray(x, dtype=float)
    const = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * np.log(nu * np.pi)
    return const - (nu + 1) / 2 * np.log1p(x * x / nu)


def t_quantile(p, nu):
    """Quantile of the t distribution with ``nu`` degrees of freedom.

    For the lower tail probability q = min(p, 1 - p) the magnitude solves
    I_{nu/(nu+t^2)}(nu/2, 1/2) = 2q.
    """
    if isinstance(p, float):
        return _t_quantile_scalar(p, nu)
    p = np.asarray(p, dtype=float)
    shape = p.shape
    p = np.atleast_1d(p).ravel()
    q = np.minimum(p, 1.0 - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = special.betaincinv(nu / 2, 0.5, 2.0 * q)
        s = -np.sqrt(nu * (1.0 / x - 1.0))
    s[q <= 0.0] = -np.inf
    s[q >= 0.5] = 0.0

    # Newton polish on the lower tail: solve stdtr(nu, s) = q for s < 0
    live = np.flatnonzero(np.isfinite(s) & (s < 0))
    for _ in range(_NEWTON_STEPS):
        if live.size == 0:
            break
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = (special.stdtr(nu, s[live]) - q[live]) / np.exp(t_logpdf(s[live], nu))
        step[~np.isfinite(step)] = 0.0
        s[live] -= step
        live = live[np.abs(step) > NEWTON_TOL * np.maximum(1.0, np.abs(s[live]))]
    t = np.where(p < 0.5, s, -s).reshape(shape)
    return t[()] if t.ndim == 0 else t


def _t_quantile_scalar(p: float, nu: float) -> float:
    q = min(p, 1.0 - p)
    if q <= 0.0:
        return -math.inf if p < 0.5 else math.inf
    if q >= 0.5:
        return 0.0
    x = special.betaincinv(nu / 2, 0.5, 2.0 * q)
    s = -math.sqrt(nu * (1.0 / x - 1.0))
    logc = math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2) - 0.5 * math.log(nu * math.pi)
    for _ in range(_NEWTON_STEPS):
        dens = math.exp(logc - (nu + 1) / 2 * math.log1p(s * s / nu))
        if dens == 0.0:
            break
        step = (special.stdtr(nu, s) - q) / dens
        s -= step
        if abs(step) <= NEWTON_TOL * max(1.0, abs(s)):
            break
    return s if p < 0.5 else -s
