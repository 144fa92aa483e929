"""Mixing coefficients of checkerboard Markov chains.

For a doubly stochastic matrix P the chain coarse-grained to the grid has

* beta  = (1/m) sum_i sum_j (P_ij - 1/m)^+   (mean total variation of the rows),
* phi   = max_i sum_j (P_ij - 1/m)^+         (worst row),
* rho   = largest singular value of P - J/m  (norm on mean-zero functions),

where J is the all-ones matrix.  The supremum over Borel sets in beta and
phi is attained by the set where the row density exceeds one, so these
values are exact for the checkerboard chain.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .copulas import Copula
from .errors import NoConvergence
from .grid import TransitionMatrix, discretize

SVD_MAX_M = 512
POWER_TOL = 1e-10
POWER_BUDGET = 10**5
RATE_FLOOR = 1e-13
MAX_LAGS = 64
DOEBLIN_FLOOR = 1e-9
PROFILE_COLUMNS = ("lag", "beta", "rho", "phi", "rho1_pow")


def _positive_part(p: TransitionMatrix) -> np.ndarray:
    return np.maximum(p.entries - 1.0 / p.m, 0.0).sum(axis=1)


def beta_coeff(p: TransitionMatrix) -> float:
    return float(_positive_part(p).mean())


def phi_coeff(p: TransitionMatrix) -> float:
    return float(_positive_part(p).max())


def rho_coeff(p: TransitionMatrix, method: str = "auto") -> float:
    """Operator norm of the transition matrix on mean-zero vectors.

    ``method`` is "svd", "power" or "auto" (SVD up to m = 512).
    """
    if method == "auto":
        method = "svd" if p.m <= SVD_MAX_M else "power"
    if method == "svd":
        return float(np.linalg.svd(p.entries - 1.0 / p.m, compute_uv=False)[0])
    if method == "power":
        return power_iteration_norm(p.entries - 1.0 / p.m)
    raise ValueError(f"unknown method {method!r}")


def power_iteration_norm(a: np.ndarray, tol: float = POWER_TOL, budget: int = POWER_BUDGET) -> float:
    """Largest singular value of ``a`` by power iteration on a^T a."""
    n = a.shape[1]
    # deterministic start with components along every mean-zero direction
    x = np.cos(np.arange(1, n + 1) * 2.399963229728653) + np.linspace(-1, 1, n)
    x -= x.mean()
    norm = np.linalg.norm(x)
    if norm == 0:
        return 0.0
    x /= norm
    sigma2 = 0.0
    for _ in range(budget):
        y = a.T @ (a @ x)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0
        x = y / new
        if abs(new - sigma2) <= tol * new:
            return math.sqrt(new)
        sigma2 = new
    raise NoConvergence("power iteration budget exhausted", abs(new - sigma2) / new)


def geometric_rate(values, lags) -> float | None:
    """exp of the least-squares slope of log(value) against lag.

    Only values above 1e-13 enter the fit; None when fewer than two do.
    """
    values = np.asarray(values, dtype=float)
    lags = np.asarray(lags, dtype=float)
    if values.shape != lags.shape or values.size < 2:
        raise ValueError("values and lags must be equal-length arrays of length >= 2")
    keep = values > RATE_FLOOR
    if keep.sum() < 2:
        return None
    x, y = lags[keep], np.log(values[keep])
    xc = x - x.mean()
    if not np.any(xc):
        return None
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    return min(math.exp(slope), 1.0)


@dataclass(frozen=True, eq=False)
class MixingProfile:
    spec_id: str
    m: int
    lags: np.ndarray
    beta: np.ndarray
    rho: np.ndarray
    phi: np.ndarray
    fitted_rates: dict = field(default_factory=dict)
    # coefficient names whose profile fails to strictly decrease where positive
    nondecreasing: tuple[str, ...] = ()

    @property
    def rho1_pow(self) -> np.ndarray:
        return self.rho[0] ** self.lags

    def check(self) -> dict[str, bool]:
        """Chain inequalities every profile must satisfy."""
        return {
            "beta_le_phi": bool(np.all(self.beta <= self.phi + 1e-12)),
            "rho_le_rho1_pow": bool(np.all(self.rho <= self.rho1_pow + 1e-9)),
            "rho_le_2sqrt_phi": bool(np.all(self.rho <= 2 * np.sqrt(self.phi) + 1e-9)),
        }

    def rows(self) -> list[tuple]:
        return list(zip(self.lags.tolist(), self.beta, self.rho, self.phi, self.rho1_pow))

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for lag, *vals in self.rows():
            w.writerow([lag] + [f"{x:.15g}" for x in vals])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="ascii", newline="\n")
        return text


def _strictly_decreasing(x: np.ndarray) -> bool:
    pos = x[x > RATE_FLOOR]
    return bool(np.all(np.diff(pos) < 0))


def profile_from_matrix(p: TransitionMatrix, n_max: int) -> MixingProfile:
    if int(n_max) != n_max or not 1 <= n_max <= MAX_LAGS:
        raise ValueError(f"n_max must be an integer in [1, {MAX_LAGS}], got {n_max}")
    n_max = int(n_max)
    beta, rho, phi = [], [], []
    pn = p
    for n in range(1, n_max + 1):
        if n > 1:
            pn = TransitionMatrix(pn.entries @ p.entries, p.spec_id, "fold")
        beta.append(beta_coeff(pn))
        rho.append(rho_coeff(pn))
        phi.append(phi_coeff(pn))
    lags = np.arange(1, n_max + 1)
    arrays = {"beta": np.array(beta), "rho": np.array(rho), "phi": np.array(phi)}
    rates = {}
    for name, vals in arrays.items():
        rate = geometric_rate(vals, lags) if n_max >= 2 else None
        rates[name] = 0.0 if rate is None else rate
    flagged = tuple(k for k, v in arrays.items() if n_max >= 2 and not _strictly_decreasing(v))
    return MixingProfile(p.spec_id, p.m, lags, fitted_rates=rates, nondecreasing=flagged, **arrays)


def mixing_profile(spec: Copula, m: int, n_max: int) -> MixingProfile:
    """beta, rho and phi at lags 1..n_max of the chain discretized at resolution m."""
    return profile_from_matrix(discretize(spec, m), n_max)


@dataclass(frozen=True)
class DoeblinReport:
    spec_id: str
    m: int
    density_floor: float
    epsilon: float
    phi_bound: float
    grid_phi1: float
    applicable: bool

    def holds(self) -> bool | None:
        """grid phi_1 <= 1 - epsilon; None when the density floor vanishes."""
        if not self.applicable:
            return None
        return self.grid_phi1 <= self.phi_bound + 1e-9


def density_floor(spec: Copula, m: int) -> float:
    """Minimum of the absolutely continuous density over the (2m)^2 midpoint grid."""
    x = (np.arange(2 * m) + 0.5) / (2 * m)
    dens = np.asarray(spec.density(x[:, None], x[None, :]))
    return float(dens.min())


def doeblin_report(spec: Copula, m: int) -> DoeblinReport:
    """Density floor c, epsilon = c/(1+c) and the implied bound phi_1 <= 1 - epsilon."""
    c = min(max(density_floor(spec, m), 0.0), 1.0)
    applicable = c >= DOEBLIN_FLOOR
    eps = c / (1 + c) if applicable else 0.0
    return DoeblinReport(
        spec_id=spec.label,
        m=m,
        density_floor=c,
        epsilon=eps,
        phi_bound=1.0 - eps,
        grid_phi1=phi_coeff(discretize(spec, m)),
        applicable=applicable,
    )
