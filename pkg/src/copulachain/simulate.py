"""Simulation of the stationary chain generated by a copula and a marginal.

The uniform chain starts from U_0 drawn from stream 0 of the counter-based
generator and moves by U_{k+1} = C_{,1}^{-1}(U_k, V_k), with V_k draw k of
stream 1.  Observed values are F^{-1}(U_k) for the generalized inverse of
the marginal F, so every marginal shares the same underlying uniform path.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .copulas import Copula
from .errors import InvalidSpec, NoConvergence, TooShort
from .grid import TransitionMatrix
from .rng import GENERATOR_ID, uniforms

INVERSE_TOL = 1e-12
STATE_STREAM = 0
INNOVATION_STREAM = 1


# --- marginals ----------------------------------------------------------------


class Marginal:
    """Distribution function given by breakpoints with left limits and values.

    Between consecutive breakpoints the function is linear from ``value[k]``
    to ``left[k+1]``; ``value[k] - left[k]`` is the atom at ``x[k]``.
    """

    label = "Marginal"

    def _breakpoints(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def cdf(self, x):
        xs, left, value = self._breakpoints()
        x = np.asarray(x, dtype=float)
        if len(xs) == 1:
            out = np.where(x >= xs[0], 1.0, 0.0)
            return float(out) if out.ndim == 0 else out
        k = np.searchsorted(xs, x, side="right") - 1
        kc = np.clip(k, 0, len(xs) - 2)
        span = xs[kc + 1] - xs[kc]
        frac = np.clip((x - xs[kc]) / span, 0.0, 1.0)
        out = value[kc] + frac * (left[kc + 1] - value[kc])
        out = np.where(x == xs[kc + 1], value[kc + 1], out)
        out = np.where(k < 0, 0.0, np.where(k >= len(xs) - 1, 1.0, out))
        return float(out) if out.ndim == 0 else out

    def support(self) -> tuple[float, float]:
        xs, _, _ = self._breakpoints()
        return float(xs[0]), float(xs[-1])

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class Uniform01(Marginal):
    label = "Uniform01"

    def _breakpoints(self):
        return np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([0.0, 1.0])


def _check_cdf_table(knots, values) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(knots, dtype=float)
    f = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != f.shape or x.size < 2:
        raise InvalidSpec("knots and cdf values must be equal-length lists with at least two entries")
    if np.any(~np.isfinite(x)) or np.any(np.diff(x) <= 0):
        raise InvalidSpec("knots must be finite and strictly increasing")
    if np.any(np.diff(f) < 0) or f[0] != 0.0 or f[-1] != 1.0:
        raise InvalidSpec("cdf values must be nondecreasing from 0 to 1")
    return x, f


@dataclass(frozen=True)
class PiecewiseLinearCDF(Marginal):
    knots: tuple[float, ...]
    cdf_values: tuple[float, ...]

    def __post_init__(self):
        x, f = _check_cdf_table(self.knots, self.cdf_values)
        object.__setattr__(self, "knots", tuple(x.tolist()))
        object.__setattr__(self, "cdf_values", tuple(f.tolist()))

    @property
    def label(self):
        return f"PiecewiseLinearCDF(knots={list(self.knots)}, cdf={list(self.cdf_values)})"

    def _breakpoints(self):
        f = np.array(self.cdf_values)
        return np.array(self.knots), f, f


@dataclass(frozen=True)
class PointMassMixture(Marginal):
    """Atoms with probabilities plus an optional piecewise-linear remainder.

    The continuous part carries the leftover weight 1 - sum(weights).
    """

    atoms: tuple[float, ...]
    weights: tuple[float, ...]
    knots: tuple[float, ...] = ()
    cdf_values: tuple[float, ...] = ()

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if a.ndim != 1 or a.shape != w.shape or a.size == 0:
            raise InvalidSpec("atoms and weights must be nonempty equal-length lists")
        if np.any(~np.isfinite(a)) or np.any(np.diff(a) <= 0):
            raise InvalidSpec("atoms must be finite and strictly increasing")
        if np.any(w < 0) or w.sum() > 1 + 1e-12:
            raise InvalidSpec("atom weights must be nonnegative with total at most 1")
        rest = 1.0 - float(w.sum())
        if self.knots:
            x, f = _check_cdf_table(self.knots, self.cdf_values)
            object.__setattr__(self, "knots", tuple(x.tolist()))
            object.__setattr__(self, "cdf_values", tuple(f.tolist()))
        elif rest > 1e-12:
            raise InvalidSpec(f"atom weights sum to {w.sum()!r}; a continuous part is needed for the rest")
        object.__setattr__(self, "atoms", tuple(a.tolist()))
        object.__setattr__(self, "weights", tuple(w.tolist()))

    @property
    def label(self):
        s = f"PointMassMixture(atoms={list(self.atoms)}, weights={list(self.weights)}"
        if self.knots:
            s += f", knots={list(self.knots)}, cdf={list(self.cdf_values)}"
        return s + ")"

    def _breakpoints(self):
        atoms, w = np.array(self.atoms), np.array(self.weights)
        rest = max(1.0 - w.sum(), 0.0)
        xs = np.union1d(atoms, np.array(self.knots, dtype=float))
        if self.knots:
            kx, kf = np.array(self.knots), np.array(self.cdf_values)
            cont = np.interp(xs, kx, kf, left=0.0, right=1.0)
        else:
            cont = np.zeros_like(xs)
        before = np.array([w[atoms < x].sum() for x in xs])
        at = np.array([w[atoms == x].sum() for x in xs])
        left = before + rest * cont
        value = left + at
        value[-1] = 1.0
        return xs, left, value


def marginal_from_dict(raw: Any) -> Marginal:
    if isinstance(raw, Marginal):
        return raw
    if raw is None:
        return Uniform01()
    if not isinstance(raw, Mapping):
        raise InvalidSpec("marginal description must be a mapping")
    kind = str(raw.get("kind", "uniform01")).lower().replace("_", "")
    try:
        if kind in ("uniform", "uniform01"):
            return Uniform01()
        if kind == "piecewiselinearcdf":
            return PiecewiseLinearCDF(tuple(raw["knots"]), tuple(raw["cdf_values"]))
        if kind == "pointmassmixture":
            return PointMassMixture(
                tuple(raw["atoms"]),
                tuple(raw["weights"]),
                tuple(raw.get("knots", ())),
                tuple(raw.get("cdf_values", ())),
            )
    except KeyError as exc:
        raise InvalidSpec(f"marginal {kind!r} is missing field {exc.args[0]!r}") from None
    raise InvalidSpec(f"unknown marginal kind {raw.get('kind')!r}")


def generalized_inverse(marginal: Marginal, u):
    """inf{x : F(x) >= u}; flat stretches give their left end, jumps their location."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u >= 0) & (u <= 1))):
        raise ValueError("u must lie in [0, 1]")
    if isinstance(marginal, Uniform01):
        return float(u) if u.ndim == 0 else u.copy()
    xs, left, value = marginal._breakpoints()
    # first breakpoint whose value reaches u; its linear piece starts at k-1
    k = np.searchsorted(value, u, side="left")
    k = np.clip(k, 0, len(xs) - 1)
    prev = np.maximum(k - 1, 0)
    rise = left[k] - value[prev]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = (u - value[prev]) / rise
        x_lin = xs[prev] + frac * (xs[k] - xs[prev])
    on_slope = (k > 0) & (u <= left[k]) & (rise > 0)
    out = np.where(on_slope, x_lin, xs[k])
    return float(out) if out.ndim == 0 else out


# --- chains -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChainPath:
    values: np.ndarray
    seed: int
    spec_id: str
    marginal_id: str
    generator_id: str = GENERATOR_ID

    @property
    def n(self) -> int:
        return len(self.values)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write(f"# spec: {self.spec_id}\n")
        buf.write(f"# marginal: {self.marginal_id}\n")
        buf.write(f"# seed: {self.seed}\n")
        buf.write(f"# generator: {self.generator_id}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, x in enumerate(self.values):
            w.writerow([i, f"{x:.16e}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="ascii", newline="\n")
        return text


def uniform_path(spec: Copula, n: int, seed: int) -> np.ndarray:
    if int(n) != n or n < 1:
        raise ValueError(f"path length must be a positive integer, got {n}")
    n = int(n)
    u0 = uniforms(seed, STATE_STREAM, 0, 1)[0]
    innovations = uniforms(seed, INNOVATION_STREAM, 0, n - 1).tolist()
    path = np.empty(n)
    path[0] = u = float(u0)
    inverse = spec.inverse_conditional
    for k, v in enumerate(innovations):
        try:
            u = inverse(u, v, INVERSE_TOL)
        except NoConvergence as exc:
            raise NoConvergence("chain step failed", exc.bracket_width, step=k + 1) from exc
        path[k + 1] = u
    return path


def sample_chain(spec: Copula, marginal: Marginal, n: int, seed: int) -> ChainPath:
    """Stationary path of length n; bitwise reproducible from the seed."""
    u = uniform_path(spec, n, seed)
    values = generalized_inverse(marginal, u)
    return ChainPath(np.atleast_1d(values), int(seed), spec.label, marginal.label)


def empirical_transition(paths: ChainPath | Sequence[ChainPath], m: int) -> TransitionMatrix:
    """Row-normalized counts of consecutive cell pairs, pooled over the given paths.

    Rows never visited are filled with 1/m and listed in ``empty_rows``.
    """
    if isinstance(paths, ChainPath):
        paths = [paths]
    if int(m) != m or m < 2:
        raise ValueError(f"resolution m must be an integer >= 2, got {m}")
    counts = np.zeros((m, m))
    for path in paths:
        if path.marginal_id != Uniform01.label:
            raise ValueError("empirical transitions need a Uniform01 path")
        if path.n < m * m:
            raise TooShort(f"path of length {path.n} is shorter than m^2 = {m * m}")
        cells = np.minimum((path.values * m).astype(np.int64), m - 1)
        np.add.at(counts, (cells[:-1], cells[1:]), 1.0)
    totals = counts.sum(axis=1)
    empty = np.flatnonzero(totals == 0)
    p = np.divide(counts, totals[:, None], out=np.full((m, m), 1.0 / m), where=totals[:, None] > 0)
    spec_ids = sorted({path.spec_id for path in paths})
    return TransitionMatrix(p, "; ".join(spec_ids), "empirical", tuple(empty.tolist()))
