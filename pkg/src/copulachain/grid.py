"""Checkerboard discretization of copulas into doubly stochastic matrices.

Entry (i, j) of the m x m matrix is m times the copula mass of the cell
((i-1)/m, i/m] x ((j-1)/m, j/m], i.e. the probability that the chain moves
to column cell j given that it sits in row cell i.  On this coarse-grained
chain the fold product of copulas is exactly matrix multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .copulas import Copula, Mixture, StudentT, WEIGHT_TOL
from .errors import BadWeights, NumericalFailure, ResolutionMismatch
from .student import t_quantile

STOCHASTIC_TOL = 1e-12
MAX_RESOLUTION = 4096
MAX_POWER = 10**6
SINKHORN_SWEEPS = 1000
QUADRATURE_TOL = 1e-8
# nodes of the two Gauss-Legendre rules compared for the error estimate
GL_ORDERS = (16, 24)
# number of geometric halvings toward a corner singularity
CORNER_LEVELS = 52


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    entries: np.ndarray
    spec_id: str = ""
    method: str = "cdf-difference"
    empty_rows: tuple[int, ...] = ()

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"transition matrix must be square, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "empty_rows", tuple(int(i) for i in self.empty_rows))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def stochastic_error(self) -> float:
        """Largest deviation of a row or column sum from 1."""
        return float(max(np.abs(self.row_sums() - 1).max(), np.abs(self.col_sums() - 1).max()))

    def is_doubly_stochastic(self, tol: float = STOCHASTIC_TOL) -> bool:
        return bool(self.entries.min() >= 0 and self.stochastic_error() <= tol)

    def masses(self) -> np.ndarray:
        """Copula mass of every cell (entries divided by m)."""
        return self.entries / self.m

    def __matmul__(self, other: "TransitionMatrix") -> "TransitionMatrix":
        return fold(self, other)

    def __repr__(self):
        return f"TransitionMatrix(m={self.m}, spec_id={self.spec_id!r}, method={self.method!r})"


def _check_m(m: int) -> int:
    if int(m) != m or not 2 <= m <= MAX_RESOLUTION:
        raise ValueError(f"resolution m must be an integer in [2, {MAX_RESOLUTION}], got {m}")
    return int(m)


def independence_matrix(m: int) -> TransitionMatrix:
    return TransitionMatrix(np.full((m, m), 1.0 / m), "Independence", "cdf-difference")


def identity_matrix(m: int) -> TransitionMatrix:
    return TransitionMatrix(np.eye(m), "FrechetM", "cdf-difference")


# --- cell volumes -------------------------------------------------------------


def _nodes(m: int) -> np.ndarray:
    return np.arange(m + 1) / m


def _cdf_masses(spec: Copula, m: int) -> np.ndarray:
    x = _nodes(m)
    grid = np.asarray(spec.cdf(x[:, None], x[None, :]))
    vol = np.diff(np.diff(grid, axis=0), axis=1)
    # second differences of monotone values can dip below zero by rounding only
    return np.maximum(vol, 0.0)


@lru_cache(maxsize=None)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _pieces(lo: float, hi: float) -> list[tuple[float, float]]:
    """Split [lo, hi] with geometric refinement toward the ends 0 and 1.

    The t-copula conditional behaves like a fractional power of the distance
    to the corner, so a graded mesh restores fast Gauss-Legendre convergence.
    """
    inner_lo, inner_hi = lo, hi
    left, right = [], []
    if lo == 0.0:
        mid = 0.5 * (lo + hi) if hi == 1.0 else hi
        inner_lo = mid
        b = mid
        for _ in range(CORNER_LEVELS):
            left.append((0.5 * b, b))
            b *= 0.5
        left.append((0.0, b))
        left.reverse()
    if hi == 1.0:
        mid = inner_lo if lo == 0.0 else lo
        inner_hi = mid
        d = 1.0 - mid
        for _ in range(CORNER_LEVELS):
            right.append((1.0 - d, 1.0 - 0.5 * d))
            d *= 0.5
        right.append((1.0 - d, 1.0))
    body = [(inner_lo, inner_hi)] if inner_hi > inner_lo else []
    return left + body + right


def _strip_integrals(spec: StudentT, cells: Sequence[tuple[float, float]], v: np.ndarray, order: int) -> np.ndarray:
    """Integral over each x-cell of the conditional cdf at every v.

    Returns an array of shape (len(cells), len(v)); row k equals
    C(hi_k, v) - C(lo_k, v).
    """
    gx, gw = _gauss_legendre(order)
    xs, ws, owner = [], [], []
    for k, (lo, hi) in enumerate(cells):
        for a, b in _pieces(lo, hi):
            half = 0.5 * (b - a)
            xs.append(a + half * (gx + 1.0))
            ws.append(half * gw)
            owner.append(np.full(order, k))
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    owner = np.concatenate(owner)
    x = np.clip(x, 1e-300, np.nextafter(1.0, 0.0))
    qx = t_quantile(x, spec.nu)
    qv = t_quantile(v, spec.nu)
    h = spec.conditional_from_quantiles(qx[:, None], qv[None, :])
    weighted = w[:, None] * h
    starts = np.flatnonzero(np.r_[True, owner[1:] != owner[:-1]])
    return np.add.reduceat(weighted, starts, axis=0)


def _quadrature_masses(spec: StudentT, m: int, rows: Sequence[int] | None = None) -> np.ndarray:
    """Cell masses by integrating the conditional cdf across each row strip."""
    rows = range(1, m + 1) if rows is None else rows
    cells = [((i - 1) / m, i / m) for i in rows]
    v = _nodes(m)
    coarse, fine = (_strip_integrals(spec, cells, v, n) for n in GL_ORDERS)
    err = float(np.abs(fine - coarse).max())
    if err > QUADRATURE_TOL:
        raise NumericalFailure(f"{spec.label} cell quadrature at m={m}", err)
    return np.maximum(np.diff(fine, axis=1), 0.0)


def cell_volumes(spec: Copula, m: int) -> np.ndarray:
    """All m x m cell masses, before any balancing."""
    m = _check_m(m)
    if isinstance(spec, Mixture):
        return sum(w * cell_volumes(c, m) for c, w in zip(spec.components, spec.weights))
    if spec.closed_form_cdf:
        return _cdf_masses(spec, m)
    return _quadrature_masses(spec, m)


def cell_volume(spec: Copula, i: int, j: int, m: int) -> float:
    """Copula mass of cell (i, j), 1-based, on the m x m grid."""
    if not (1 <= i <= m and 1 <= j <= m):
        raise IndexError(f"cell ({i}, {j}) outside a {m}x{m} grid")
    if isinstance(spec, Mixture):
        return float(sum(w * cell_volume(c, i, j, m) for c, w in zip(spec.components, spec.weights)))
    if spec.closed_form_cdf:
        u = np.array([i - 1, i]) / m
        v = np.array([j - 1, j]) / m
        c = np.asarray(spec.cdf(u[:, None], v[None, :]))
        return max(float(c[1, 1] - c[0, 1] - c[1, 0] + c[0, 0]), 0.0)
    return float(_quadrature_masses(spec, m, rows=[i])[0, j - 1])


# --- construction -------------------------------------------------------------


def sinkhorn(entries: np.ndarray, tol: float = STOCHASTIC_TOL, max_sweeps: int = SINKHORN_SWEEPS) -> np.ndarray:
    """Alternate row and column normalization until both sums are within ``tol`` of 1."""
    a = np.array(entries, dtype=float)
    for _ in range(max_sweeps):
        a /= a.sum(axis=1, keepdims=True)
        a /= a.sum(axis=0, keepdims=True)
        if np.abs(a.sum(axis=1) - 1).max() <= tol:
            break
    return a


def _method(spec: Copula) -> str:
    return "cdf-difference" if spec.closed_form_cdf else "density-quadrature"


def _entries(spec: Copula, m: int) -> np.ndarray:
    if isinstance(spec, Mixture):
        return sum(w * _entries(c, m) for c, w in zip(spec.components, spec.weights))
    p = m * cell_volumes(spec, m)
    if not spec.closed_form_cdf:
        # exchangeable family: symmetrize, then restore exact uniform margins
        p = sinkhorn(0.5 * (p + p.T))
        p = 0.5 * (p + p.T)
    return p


def discretize(spec: Copula, m: int) -> TransitionMatrix:
    m = _check_m(m)
    return TransitionMatrix(_entries(spec, m), spec.label, _method(spec))


def _same_m(mats: Iterable[TransitionMatrix]) -> int:
    ms = {p.m for p in mats}
    if len(ms) != 1:
        raise ResolutionMismatch(f"matrices have different resolutions {sorted(ms)}")
    return ms.pop()


def fold(p: TransitionMatrix, q: TransitionMatrix) -> TransitionMatrix:
    """Fold product of the two checkerboard copulas (matrix product)."""
    _same_m([p, q])
    return TransitionMatrix(p.entries @ q.entries, f"{p.spec_id} * {q.spec_id}", "fold")


def power(p: TransitionMatrix, n: int) -> TransitionMatrix:
    """n-fold product of ``p`` with itself by repeated squaring."""
    if int(n) != n or n < 1:
        raise ValueError(f"power must be a positive integer, got {n}")
    if n > MAX_POWER:
        raise ValueError(f"power {n} exceeds the limit {MAX_POWER}")
    n = int(n)
    if n == 1:
        return p
    result = None
    base = p.entries
    k = n
    while k:
        if k & 1:
            result = base if result is None else result @ base
        k >>= 1
        if k:
            base = base @ base
    return TransitionMatrix(result, f"{p.spec_id}^{n}", "fold")


def mix(pairs: Sequence[tuple[float, TransitionMatrix]]) -> TransitionMatrix:
    """Convex combination of transition matrices."""
    if not pairs:
        raise BadWeights("mix needs at least one (weight, matrix) pair")
    w = np.array([float(a) for a, _ in pairs])
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise BadWeights(f"weights must be nonnegative, got {list(w)}")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise BadWeights(f"weights sum to {w.sum()!r}, expected 1")
    m = _same_m(p for _, p in pairs)
    out = np.zeros((m, m))
    for a, (_, p) in zip(w, pairs):
        out += a * p.entries
    label = " + ".join(f"{a:.12g}*({p.spec_id})" for a, (_, p) in zip(w, pairs))
    return TransitionMatrix(out, label, "mix")


def checkerboard_cdf(p: TransitionMatrix, u, v):
    """Distribution function of the checkerboard copula with cell masses ``p/m``.

    Bilinear between grid nodes, where it equals the cumulative cell mass.
    """
    m = p.m
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    cum = np.zeros((m + 1, m + 1))
    cum[1:, 1:] = np.cumsum(np.cumsum(p.masses(), axis=0), axis=1)
    su, sv = np.clip(u, 0.0, 1.0) * m, np.clip(v, 0.0, 1.0) * m
    k = np.minimum(np.floor(su).astype(int), m - 1)
    l = np.minimum(np.floor(sv).astype(int), m - 1)
    a, b = su - k, sv - l
    out = (
        (1 - a) * (1 - b) * cum[k, l]
        + a * (1 - b) * cum[k + 1, l]
        + (1 - a) * b * cum[k, l + 1]
        + a * b * cum[k + 1, l + 1]
    )
    return float(out) if out.ndim == 0 else out


# --- text grid files ------------------------------------------------------------


def save_matrix(p: TransitionMatrix, path: str | Path) -> None:
    """Write ``m=<int>`` then m rows of 17-significant-digit entries."""
    lines = [f"m={p.m}"]
    lines += [" ".join(f"{x:.16e}" for x in row) for row in p.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def load_matrix(path: str | Path, spec_id: str = "", method: str = "file") -> TransitionMatrix:
    text = Path(path).read_text(encoding="ascii").splitlines()
    if not text or not text[0].startswith("m="):
        raise ValueError(f"{path}: missing 'm=<int>' header")
    m = int(text[0][2:])
    rows = [line.split() for line in text[1:] if line.strip()]
    if len(rows) != m or any(len(r) != m for r in rows):
        raise ValueError(f"{path}: expected {m} rows of {m} entries")
    return TransitionMatrix(np.array(rows, dtype=float), spec_id, method)
