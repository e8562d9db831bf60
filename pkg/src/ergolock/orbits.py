"""Periodic orbit enumeration, Birkhoff averages and orbit continuation.

Two enumeration routes are used:

* expanding piecewise maps (doubling, tent, Markov): one candidate per
  Lyndon word of branch symbols, solved by iterating the contracting
  composition of inverse branches and then validated forward;
* continuous maps with critical points (logistic, quadratic, sine,
  polynomial, glued extensions): roots of f^p(x) - x located lap by lap,
  where laps are bounded by preimages of the turning points, plus forward
  iteration of each turning point to catch attracting cycles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import dynamics as dyn
from .dynamics import MapSpec
from .errors import BranchStructureUnavailable, NewtonDiverged, PeriodChanged
from .potentials import Potential, distance

RESIDUAL_TOL = 1e-10
MIN_PERIOD_TOL = 1e-8
DEDUP_TOL = 1e-9
TIE_TOL = 1e-12
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
BURN_IN = 10_000

_SYMBOLS = "0123456789abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class PeriodicOrbit:
    points: tuple
    period: int
    multiplier: float
    itinerary: str
    gap: float
    lo: float = 0.0
    hi: float = 1.0
    circle: bool = False

    @property
    def base_point(self) -> float:
        return self.points[0]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points)


@dataclass(frozen=True)
class OrbitContinuation:
    source: PeriodicOrbit
    target: PeriodicOrbit
    d_g: float
    success: bool


# ------------------------------------------------------------------ utilities

def least_rotation(s: Sequence) -> int:
    """Booth's algorithm: start index of the lexicographically least rotation."""
    s = list(s)
    n = len(s)
    if n == 0:
        return 0
    ss = s + s
    f = [-1] * (2 * n)
    k = 0
    for j in range(1, 2 * n):
        sj = ss[j]
        i = f[j - k - 1]
        while i != -1 and sj != ss[k + i + 1]:
            if sj < ss[k + i + 1]:
                k = j - i - 1
            i = f[i]
        if sj != ss[k + i + 1]:
            if sj < ss[k]:
                k = j
            f[j - k] = -1
        else:
            f[j - k] = i + 1
    return k % n


def lyndon_words(k: int, n: int) -> list:
    """All Lyndon words over range(k) of length <= n (Fredricksen-Kessler-Maiorana)."""
    out = []
    w = [-1]
    while w:
        w[-1] += 1
        out.append(tuple(w))
        m = len(w)
        while len(w) < n:
            w.append(w[len(w) - m])
        while w and w[-1] == k - 1:
            w.pop()
    return out


def _wrap_signed(m: MapSpec, d):
    """Signed difference reduced to [-L/2, L/2) on circle maps."""
    if not m.circle:
        return d
    L = m.length
    return d - np.round(d / L) * L


def _fp(m: MapSpec, x, p: int):
    """f^p on arrays, clipped to the domain (guards rounding at the boundary)."""
    for _ in range(p):
        x = dyn._raw(m, x)
        x = dyn.wrap(m, x) if m.circle else np.clip(x, m.lo, m.hi)
    return x


def _fp_and_deriv(m: MapSpec, x, p: int):
    x = np.asarray(x, dtype=float)
    d = np.ones_like(x)
    for _ in range(p):
        d = d * dyn._raw_deriv(m, x, 1)
        x = dyn._raw(m, x)
        x = dyn.wrap(m, x) if m.circle else np.clip(x, m.lo, m.hi)
    return x, d


def _residual(m: MapSpec, x, p: int):
    return np.abs(_wrap_signed(m, _fp(m, np.asarray(x, float), p) - x))


def _symbols(idx: Iterable[int]) -> str:
    return "".join(_SYMBOLS[int(i)] for i in idx)


def residual_bound(multiplier: float) -> float:
    """Admissible |f^p(x) - x| for a stored orbit.

    A float base point carries half an ulp of error which f^p amplifies by
    the multiplier, so the bound scales with it beyond magnitude 1.
    """
    return RESIDUAL_TOL * max(1.0, abs(multiplier))


def minimal_period_ok(m: MapSpec, x: float, p: int) -> bool:
    for q in range(1, p):
        if p % q == 0 and float(_residual(m, x, q)) <= MIN_PERIOD_TOL:
            return False
    return True


def make_orbit(m: MapSpec, x0: float, p: int) -> PeriodicOrbit:
    """Build the canonical orbit record through x0 (assumed p-periodic)."""
    pts = _orbit_matrix(m, np.array([float(x0)]), p)[0]
    word = [int(i) for i in np.atleast_1d(dyn.branch_of(m, pts))]
    return _orbit_from_points(m, pts, word)


def same_orbit(o1: PeriodicOrbit, o2: PeriodicOrbit, tol: float = DEDUP_TOL) -> bool:
    """Orbit-set equality within tol (Hausdorff distance, circle-aware)."""
    if o1.period != o2.period:
        return False
    a, b = o1.as_array(), o2.as_array()
    d = distance(a[:, None], b[None, :], o1.circle, o1.hi - o1.lo)
    return bool(max(d.min(axis=1).max(), d.min(axis=0).max()) <= tol)


class _OrbitSet:
    """Orbits bucketed by rounded point so duplicate lookups are O(1)."""

    _CELL = 1e-7

    def __init__(self, circle: bool = False, lo: float = 0.0, hi: float = 1.0):
        self.items: list = []
        self.index: dict = {}
        self.circle, self.lo, self.hi = circle, lo, hi

    def _key(self, x: float) -> int:
        if self.circle and x > self.hi - 2 * self._CELL:
            x = self.lo
        return int(math.floor(x / self._CELL))

    def find(self, x: float, p: int):
        k = self._key(x)
        for kk in (k - 1, k, k + 1):
            for o in self.index.get((p, kk), ()):
                d = distance(x, o.as_array(), self.circle, self.hi - self.lo)
                if float(d.min()) <= DEDUP_TOL:
                    return o
        return None

    def add(self, o: PeriodicOrbit) -> bool:
        q = self.find(o.base_point, o.period)
        if q is not None and same_orbit(o, q):
            return False
        self.items.append(o)
        for x in o.points:
            self.index.setdefault((o.period, self._key(x)), []).append(o)
        return True

    def sorted(self) -> list:
        return sorted(self.items, key=lambda o: (o.period, o.itinerary, o.base_point))


def _polish_batch(m: MapSpec, X: np.ndarray, p: int, lo=None, hi=None, steps: int = 4):
    X = np.asarray(X, dtype=float).copy()
    R = _residual(m, X, p)
    for _ in range(steps):
        y, d = _fp_and_deriv(m, X, p)
        g = _wrap_signed(m, y - X)
        den = d - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            C = X - g / den
        if lo is not None:
            C = np.minimum(np.maximum(C, lo), hi)
        C = dyn.wrap(m, C) if m.circle else np.clip(C, m.lo, m.hi)
        ok = np.isfinite(C)
        C = np.where(ok, C, X)
        Rc = _residual(m, C, p)
        better = Rc < R
        if not np.any(better):
            break
        X = np.where(better, C, X)
        R = np.where(better, Rc, R)
    return X


def _orbit_matrix(m: MapSpec, X: np.ndarray, p: int) -> np.ndarray:
    cols = [np.asarray(X, dtype=float)]
    for _ in range(p - 1):
        cols.append(_fp(m, cols[-1], 1))
    return np.stack(cols, axis=1)


def _orbit_from_points(m: MapSpec, pts: np.ndarray, word: list) -> PeriodicOrbit:
    p = len(pts)
    k = least_rotation(word)
    best = word[k:] + word[:k]
    ks = [j for j in range(p) if word[j:] + word[:j] == best]
    k = min(ks, key=lambda j: pts[j])
    pts = np.roll(pts, -k)
    word = word[k:] + word[:k]
    mult = float(np.prod(dyn._raw_deriv(m, pts, 1)))
    if p >= 2:
        d = distance(pts[:, None], pts[None, :], m.circle, m.length)
        gap = float(d[~np.eye(p, dtype=bool)].min())
    else:
        gap = math.inf
    return PeriodicOrbit(tuple(pts.tolist()), p, mult, _symbols(word), gap, m.lo, m.hi, m.circle)


def _accept_batch(m: MapSpec, X, p: int, out: _OrbitSet, words=None):
    """Validate candidate base points of period p and add new orbits."""
    X = np.atleast_1d(np.asarray(X, dtype=float))
    if X.size == 0:
        return
    pts = _orbit_matrix(m, X, p)
    idx = dyn.branch_of(m, pts)
    ok = np.ones(len(X), dtype=bool)
    if words is not None:
        ok &= np.all(idx == words, axis=1)
    mult = np.prod(dyn._raw_deriv(m, pts, 1), axis=1)
    ok &= _residual(m, X, p) <= RESIDUAL_TOL * np.maximum(1.0, np.abs(mult))
    for q in range(1, p):
        if p % q == 0:
            ok &= _residual(m, X, q) > MIN_PERIOD_TOL
    for i in np.nonzero(ok)[0]:
        if out.find(float(X[i]), p) is None:
            out.add(_orbit_from_points(m, pts[i], [int(v) for v in idx[i]]))


# ---------------------------------------------------------- symbolic route

def _inverse_mixed(m: MapSpec, idx: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    for i in np.unique(idx):
        sel = idx == i
        out[sel] = dyn.inverse_branch(m, int(i), y[sel], clamp=True)
    return out


def _enumerate_symbolic(m: MapSpec, max_period: int) -> list:
    k = len(dyn.pieces(m))
    words = lyndon_words(k, max_period)
    out = _OrbitSet(m.circle, m.lo, m.hi)
    mid = 0.5 * (m.lo + m.hi)
    for p in range(1, max_period + 1):
        W = np.array([w for w in words if len(w) == p], dtype=int)
        if W.size == 0:
            continue
        X = np.full(len(W), mid)
        for _ in range(5000):
            prev = X
            for j in range(p - 1, -1, -1):
                X = _inverse_mixed(m, W[:, j], X)
            if np.max(np.abs(X - prev)) <= 1e-15:
                break
        X = _polish_batch(m, X, p)
        # forward itinerary must reproduce the word: inadmissible words clamp elsewhere
        _accept_batch(m, X, p, out, W)
    return out.sorted()


# ---------------------------------------------------------------- lap route

def _unique_sorted(x: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    x = np.sort(x[np.isfinite(x)])
    if x.size == 0:
        return x
    keep = np.concatenate([[True], np.diff(x) > tol])
    return x[keep]


def _preimages(m: MapSpec, y: np.ndarray) -> np.ndarray:
    parts = [dyn.inverse_branch(m, i, y) for i in range(len(dyn.pieces(m)))]
    return _unique_sorted(np.concatenate(parts)) if parts else y


def _critical_cycles(m: MapSpec, max_period: int) -> list:
    """(x, q) pairs for cycles attracting a turning point."""
    found = []
    for c in dyn.turning_points(m):
        x = np.asarray(float(c))
        for _ in range(BURN_IN):
            x = _fp(m, x, 1)
        tail = [float(x)]
        for _ in range(max_period):
            x = _fp(m, x, 1)
            tail.append(float(x))
        for q in range(1, max_period + 1):
            if abs(tail[q] - tail[0]) < DEDUP_TOL:
                found.append((tail[0], q))
                break
    return found


def _enumerate_laps(m: MapSpec, max_period: int, samples: int = 32) -> list:
    out = _OrbitSet(m.circle, m.lo, m.hi)
    level = np.asarray([t for t in dyn.turning_points(m) if m.lo < t < m.hi], dtype=float)
    bounds = level.copy()
    t = np.linspace(0.0, 1.0, samples + 1)
    for p in range(1, max_period + 1):
        B = _unique_sorted(np.concatenate([[m.lo, m.hi], bounds]))
        L, R = B[:-1], B[1:]
        X = L[:, None] + (R - L)[:, None] * t[None, :]
        G = _fp(m, X, p) - X
        cands = list(X[np.abs(G) <= 1e-13])
        sgn = np.sign(G)
        li, lj = np.nonzero(sgn[:, :-1] * sgn[:, 1:] < 0)
        xl, xr = X[li, lj], X[li, lj + 1]
        gl = G[li, lj]
        for _ in range(64):
            xm = 0.5 * (xl + xr)
            gm = _fp(m, xm, p) - xm
            left = np.sign(gm) == np.sign(gl)
            xl = np.where(left, xm, xl)
            gl = np.where(left, gm, gl)
            xr = np.where(left, xr, xm)
        roots = _polish_batch(m, 0.5 * (xl + xr), p, X[li, lj], X[li, lj + 1])
        _accept_batch(m, np.concatenate([np.asarray(cands, dtype=float), roots]), p, out)
        if p < max_period:
            level = _preimages(m, level)
            bounds = np.concatenate([bounds, level])
    for x, q in _critical_cycles(m, max_period):
        _accept_batch(m, _polish_batch(m, np.array([x]), q), q, out)
    return out.sorted()


def enumerate_periodic(m: MapSpec, max_period: int) -> list:
    """All periodic orbits of minimal period <= max_period found by the route for m."""
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    fam = m.family
    if fam == "doubling":
        return _enumerate_symbolic(m, max_period)
    if fam == "tent":
        if m.params[0] > 1.0:
            return _enumerate_symbolic(m, max_period)
        return _enumerate_laps(m, max_period)
    if fam == "markov":
        if min(abs(s) for s in m.params[2]) > 1.0:
            return _enumerate_symbolic(m, max_period)
        if dyn.is_continuous(m):
            return _enumerate_laps(m, max_period)
        raise BranchStructureUnavailable("non-expanding discontinuous Markov map")
    if fam in ("logistic", "quadratic", "sine", "polynomial", "polyext"):
        return _enumerate_laps(m, max_period)
    raise BranchStructureUnavailable(fam)


# ------------------------------------------------------------------ averages

def birkhoff_average(orbit: PeriodicOrbit, p: Potential) -> float:
    return float(np.mean(p(orbit.as_array())))


def orbit_averages(orbits: Sequence[PeriodicOrbit], p: Potential) -> np.ndarray:
    if not orbits:
        return np.zeros(0)
    pts = np.concatenate([o.as_array() for o in orbits])
    vals = p(pts)
    lens = np.array([o.period for o in orbits])
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
    return np.add.reduceat(vals, starts) / lens


def tie_tolerance(averages) -> float:
    """TIE_TOL relative to the spread of the averages.

    Relative rather than absolute so that the tie pattern, and hence the
    selected orbit, is unchanged when the potential is scaled or shifted.
    """
    averages = np.asarray(averages, dtype=float)
    return TIE_TOL * float(np.max(averages) - np.min(averages))


def tied_indices(averages) -> np.ndarray:
    averages = np.asarray(averages, dtype=float)
    return np.nonzero(averages >= np.max(averages) - tie_tolerance(averages))[0]


def select_maximizing(orbits: Sequence[PeriodicOrbit], averages) -> int:
    """Index of the argmax with ties (see tie_tolerance) broken by period then itinerary."""
    tied = tied_indices(averages)
    return int(min(tied, key=lambda i: (orbits[i].period, orbits[i].itinerary, orbits[i].base_point)))


def maximizing_orbit(m: MapSpec, p: Potential, max_period: int,
                     orbits: Sequence[PeriodicOrbit] | None = None):
    """(orbit, Q_est) with the largest Birkhoff average among enumerated orbits."""
    if orbits is None:
        orbits = enumerate_periodic(m, max_period)
    orbits = [o for o in orbits if o.period <= max_period]
    avg = orbit_averages(orbits, p)
    i = select_maximizing(orbits, avg)
    return orbits[i], float(avg[i])


# -------------------------------------------------------------- continuation

def _inverse_iteration(m: MapSpec, itinerary: str, x: float, sweeps: int = 2000) -> float:
    idx = np.array([_SYMBOLS.index(c) for c in itinerary])
    X = np.asarray([x], dtype=float)
    for _ in range(sweeps):
        prev = X
        for j in range(len(idx) - 1, -1, -1):
            X = dyn.inverse_branch(m, int(idx[j]), X, clamp=True)
        if abs(float(X[0] - prev[0])) <= 1e-15:
            break
    return float(X[0])


def continue_orbit(source: PeriodicOrbit, map_f: MapSpec, map_g: MapSpec) -> OrbitContinuation:
    """Follow a hyperbolic orbit of map_f to the nearby orbit of map_g.

    The target keeps the source's point order so that d_g compares
    corresponding points.
    """
    p = source.period
    x = float(source.base_point)
    converged = False
    for _ in range(NEWTON_MAX_ITER):
        y, d = _fp_and_deriv(map_g, np.asarray(x), p)
        g = float(_wrap_signed(map_g, y - x))
        if abs(g) <= NEWTON_TOL:
            converged = True
            break
        den = float(d) - 1.0
        if den == 0.0 or not math.isfinite(den):
            break
        x = x - g / den
        if map_g.circle:
            x = float(dyn.wrap(map_g, x))
        elif not (map_g.lo - 1e-12 <= x <= map_g.hi + 1e-12):
            break
        x = min(max(x, map_g.lo), map_g.hi)
    if not converged and abs(source.multiplier) > 1.0 and len(source.itinerary) == p:
        try:
            x = _inverse_iteration(map_g, source.itinerary, float(source.base_point))
            converged = float(_residual(map_g, x, p)) <= NEWTON_TOL * max(1.0, abs(source.multiplier))
        except (ValueError, IndexError):
            converged = False
    if not converged:
        raise NewtonDiverged(f"no period-{p} orbit of the target map near {source.base_point}")
    if not minimal_period_ok(map_g, x, p):
        raise PeriodChanged(f"continued orbit has period below {p}")
    pts = [x]
    for _ in range(p - 1):
        pts.append(float(_fp(map_g, np.asarray(pts[-1]), 1)))
    pts = np.asarray(pts)
    word = [int(i) for i in np.atleast_1d(dyn.branch_of(map_g, pts))]
    mult = float(np.prod(dyn._raw_deriv(map_g, pts, 1)))
    if p >= 2:
        dd = distance(pts[:, None], pts[None, :], map_g.circle, map_g.length)
        gap = float(dd[~np.eye(p, dtype=bool)].min())
    else:
        gap = math.inf
    target = PeriodicOrbit(tuple(pts.tolist()), p, mult, _symbols(word), gap,
                           map_g.lo, map_g.hi, map_g.circle)
    d_g = float(np.max(distance(source.as_array(), pts, map_g.circle, map_g.length)))
    return OrbitContinuation(source, target, d_g, True)


def continue_along_path(source: PeriodicOrbit, family: Callable[[float], MapSpec],
                        params: Sequence[float], max_halvings: int = 20) -> list:
    """Continue an orbit through a sequence of parameters, halving steps on divergence."""
    out = []
    cur, t_cur = source, float(params[0])
    for t_next in params[1:]:
        t_next = float(t_next)
        step, depth = t_next - t_cur, 0
        while t_cur != t_next:
            t_try = t_cur + step if abs(step) < abs(t_next - t_cur) else t_next
            try:
                c = continue_orbit(cur, family(t_cur), family(t_try))
            except NewtonDiverged:
                depth += 1
                if depth > max_halvings:
                    raise
                step /= 2.0
                continue
            cur, t_cur = c.target, t_try
        out.append(cur)
    return out


def estimate_dg(map_f: MapSpec, map_g: MapSpec, orbit: PeriodicOrbit) -> float:
    return continue_orbit(orbit, map_f, map_g).d_g
