"""Hölder potentials, their seminorms, and derived potentials.

Every potential is an immutable dataclass carrying its Hölder exponent and
the metric it is measured in (interval or circle).  ``p(x)`` evaluates,
``p.seminorm()`` returns a :class:`SeminormReport`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, GridMismatch


@dataclass(frozen=True)
class SeminormReport:
    holder_seminorm: float
    sup_norm: float
    exact_flag: bool


def distance(x, y, circle: bool = False, period: float = 1.0):
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    if circle:
        d = np.mod(d, period)
        d = np.minimum(d, period - d)
    return d


@lru_cache(maxsize=64)
def sine_modulus(alpha: float) -> float:
    """sup over t > 0 of 2|sin(pi t)| / t^alpha."""
    if alpha >= 1.0:
        return 2.0 * math.pi
    # interior critical point solves tan(pi t) = pi t / alpha on (0, 1/2)
    g = lambda t: math.pi * t * math.cos(math.pi * t) - alpha * math.sin(math.pi * t)
    t = brentq(g, 1e-9, 0.5)
    return 2.0 * math.sin(math.pi * t) / t ** alpha


class Potential:
    """Base class: subclasses define ``_value`` on prepared arrays."""

    alpha: float
    lo: float
    hi: float
    circle: bool

    def _check(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")

    def _prepare(self, x):
        arr = np.asarray(x, dtype=float)
        L = self.hi - self.lo
        if self.circle:
            arr = arr - np.floor((arr - self.lo) / L) * L
            return np.where(arr >= self.hi, self.lo, arr)
        slack = 1e-12 * L
        if np.any(arr < self.lo - slack) or np.any(arr > self.hi + slack) or np.any(np.isnan(arr)):
            raise DomainError(f"point outside [{self.lo}, {self.hi}]")
        return np.clip(arr, self.lo, self.hi)

    def __call__(self, x):
        scalar = np.ndim(x) == 0
        v = self._value(self._prepare(x))
        return float(v) if scalar else np.asarray(v, dtype=float)

    def dist(self, x, y):
        return distance(x, y, self.circle, self.hi - self.lo)

    def diameter(self) -> float:
        L = self.hi - self.lo
        return L / 2.0 if self.circle else L

    def scaled(self, c: float) -> "Potential":
        raise NotImplementedError

    def shifted(self, c: float) -> "Potential":
        return Sum((self, Linear(0.0, c, self.alpha, self.lo, self.hi, self.circle)))

    def __add__(self, other: "Potential") -> "Potential":
        return Sum((self, other))


@dataclass(frozen=True)
class Cosine(Potential):
    """amp * cos(2 pi (x - theta))."""
    theta: float = 0.0
    amp: float = 1.0
    alpha: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    circle: bool = True

    def __post_init__(self):
        self._check()

    def _value(self, x):
        return self.amp * np.cos(2.0 * np.pi * (x - self.theta))

    def seminorm(self) -> SeminormReport:
        return SeminormReport(abs(self.amp) * sine_modulus(self.alpha), abs(self.amp), True)

    def scaled(self, c):
        return replace(self, amp=self.amp * c)


@dataclass(frozen=True)
class Linear(Potential):
    slope: float = 1.0
    offset: float = 0.0
    alpha: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    circle: bool = False

    def __post_init__(self):
        self._check()

    def _value(self, x):
        return self.slope * x + self.offset

    def seminorm(self) -> SeminormReport:
        D = self.hi - self.lo
        semi = abs(self.slope) * D ** (1.0 - self.alpha)
        sup = max(abs(self.offset + self.slope * self.lo), abs(self.offset + self.slope * self.hi))
        return SeminormReport(semi, sup, True)

    def scaled(self, c):
        return replace(self, slope=self.slope * c, offset=self.offset * c)


def constant(c: float, lo: float = 0.0, hi: float = 1.0, circle: bool = False,
             alpha: float = 1.0) -> Linear:
    return Linear(0.0, c, alpha, lo, hi, circle)


@dataclass(frozen=True)
class DistanceToOrbit(Potential):
    """-scale * d(x, O)^alpha."""
    points: tuple = ()
    alpha: float = 1.0
    scale: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    circle: bool = False

    def __post_init__(self):
        self._check()
        if not self.points:
            raise ValueError("orbit must be nonempty")

    def _value(self, x):
        pts = np.asarray(self.points)
        d = distance(np.asarray(x)[..., None], pts, self.circle, self.hi - self.lo).min(axis=-1)
        return -self.scale * d ** self.alpha

    def max_distance(self) -> float:
        pts = np.sort(np.asarray(self.points))
        L = self.hi - self.lo
        if self.circle:
            gaps = np.diff(np.concatenate([pts, [pts[0] + L]]))
            return float(gaps.max() / 2.0)
        inner = np.diff(pts).max() / 2.0 if len(pts) > 1 else 0.0
        return float(max(pts[0] - self.lo, self.hi - pts[-1], inner))

    def seminorm(self) -> SeminormReport:
        return SeminormReport(abs(self.scale), abs(self.scale) * self.max_distance() ** self.alpha, True)

    def scaled(self, c):
        return replace(self, scale=self.scale * c)


def distance_potential(orbit, alpha: float, scale: float) -> DistanceToOrbit:
    """-scale * d(., O)^alpha for a periodic orbit O."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return DistanceToOrbit(tuple(float(x) for x in orbit.points), alpha, scale,
                           orbit.lo, orbit.hi, orbit.circle)


@dataclass(frozen=True)
class GridSampled(Potential):
    """Piecewise-linear interpolant of values at increasing nodes.

    On the circle the interpolation wraps from the last node to the first.
    """
    nodes: tuple = ()
    values: tuple = ()
    alpha: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    circle: bool = False

    def __post_init__(self):
        self._check()
        if len(self.nodes) != len(self.values) or len(self.nodes) < 1:
            raise ValueError("nodes and values must have equal nonzero length")

    @classmethod
    def from_arrays(cls, nodes, values, alpha=1.0, lo=0.0, hi=1.0, circle=False):
        return cls(tuple(np.asarray(nodes, float).tolist()), tuple(np.asarray(values, float).tolist()),
                   alpha, lo, hi, circle)

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.nodes)

    @property
    def v(self) -> np.ndarray:
        return np.asarray(self.values)

    def _value(self, x):
        xs, vs = self.x, self.v
        if self.circle:
            L = self.hi - self.lo
            xs = np.concatenate([[xs[-1] - L], xs, [xs[0] + L]])
            vs = np.concatenate([[vs[-1]], vs, [vs[0]]])
        return np.interp(x, xs, vs)

    def _pairwise(self, xs, vs) -> float:
        if len(xs) < 2:
            return 0.0
        if self.alpha == 1.0:
            if self.circle:
                L = self.hi - self.lo
                xs = np.concatenate([xs, [xs[0] + L]])
                vs = np.concatenate([vs, [vs[0]]])
            dx = np.diff(xs)
            ok = dx > 0
            return float(np.max(np.abs(np.diff(vs))[ok] / dx[ok]))
        best = 0.0
        for s in range(0, len(xs), 512):
            d = distance(xs[s:s + 512, None], xs[None, :], self.circle, self.hi - self.lo)
            dv = np.abs(vs[s:s + 512, None] - vs[None, :])
            ok = d > 0
            if np.any(ok):
                best = max(best, float(np.max(dv[ok] / d[ok] ** self.alpha)))
        return best

    def seminorm(self, refine: bool = False, max_nodes: int = 1 << 14) -> SeminormReport:
        xs, vs = self.x, self.v
        est = self._pairwise(xs, vs)
        if refine and self.alpha < 1.0:
            while 2 * len(xs) <= max_nodes:
                mid = 0.5 * (xs[:-1] + xs[1:])
                xs = np.sort(np.concatenate([xs, mid]))
                vs = self._value(xs)
                new = self._pairwise(xs, vs)
                done = new <= est * 1.01
                est = max(est, new)
                if done:
                    break
        return SeminormReport(est, float(np.max(np.abs(self.v))), False)

    def scaled(self, c):
        return replace(self, values=tuple((self.v * c).tolist()))


@dataclass(frozen=True)
class Step(Potential):
    """Constant on each cell [b_i, b_{i+1}) (last cell closed)."""
    breakpoints: tuple = (0.0, 1.0)
    values: tuple = (0.0,)
    alpha: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    circle: bool = False

    def __post_init__(self):
        self._check()
        if len(self.values) != len(self.breakpoints) - 1:
            raise ValueError("need one value per cell")

    def _value(self, x):
        b = np.asarray(self.breakpoints)
        i = np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(self.values) - 1)
        return np.asarray(self.values)[i]

    def seminorm(self) -> SeminormReport:
        v = np.asarray(self.values)
        semi = 0.0 if np.all(v == v[0]) else math.inf
        return SeminormReport(semi, float(np.max(np.abs(v))), True)

    def scaled(self, c):
        return replace(self, values=tuple(float(c * v) for v in self.values))


@dataclass(frozen=True)
class Trig(Potential):
    """sum_k a_k cos(2 pi k t) + b_k sin(2 pi k t), t = (x - lo)/(hi - lo)."""
    a: tuple = ()
    b: tuple = ()
    alpha: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    circle: bool = True

    def __post_init__(self):
        self._check()
        if len(self.a) != len(self.b):
            raise ValueError("coefficient tuples must have equal length")

    def _value(self, x):
        x = (np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo)
        out = np.zeros_like(x)
        for k, (ak, bk) in enumerate(zip(self.a, self.b), start=1):
            t = 2.0 * np.pi * k * x
            out = out + ak * np.cos(t) + bk * np.sin(t)
        return out

    def seminorm(self) -> SeminormReport:
        # rigorous upper bounds: each harmonic is c_k cos(2 pi k x - phase)
        c = np.hypot(np.asarray(self.a, float), np.asarray(self.b, float))
        k = np.arange(1, len(c) + 1, dtype=float)
        semi = float(np.sum(c * k ** self.alpha) * sine_modulus(self.alpha)) if len(c) else 0.0
        semi *= (self.hi - self.lo) ** (-self.alpha)
        return SeminormReport(semi, float(np.sum(c)), False)

    def scaled(self, c):
        return replace(self, a=tuple(c * v for v in self.a), b=tuple(c * v for v in self.b))


@dataclass(frozen=True)
class Sum(Potential):
    terms: tuple = ()

    def __post_init__(self):
        if not self.terms:
            raise ValueError("empty sum")
        t0 = self.terms[0]
        object.__setattr__(self, "alpha", min(t.alpha for t in self.terms))
        object.__setattr__(self, "lo", t0.lo)
        object.__setattr__(self, "hi", t0.hi)
        object.__setattr__(self, "circle", t0.circle)

    def _value(self, x):
        return sum(t._value(t._prepare(x)) for t in self.terms)

    def seminorm(self) -> SeminormReport:
        reps = [t.seminorm() for t in self.terms]
        return SeminormReport(sum(r.holder_seminorm for r in reps), sum(r.sup_norm for r in reps),
                              len(reps) == 1 and reps[0].exact_flag)

    def scaled(self, c):
        return Sum(tuple(t.scaled(c) for t in self.terms))


def eval_potential(p: Potential, x):
    return p(x)


def seminorm(p: Potential) -> SeminormReport:
    return p.seminorm()


def cohomologous(p: Potential, u: GridSampled, m) -> GridSampled:
    """Grid potential with values p + u - u o f at the nodes of u."""
    from .dynamics import evaluate
    if (abs(u.lo - m.lo) > 1e-12 or abs(u.hi - m.hi) > 1e-12 or u.circle != m.circle):
        raise GridMismatch("grid function and map live on different domains")
    xs = u.x
    vals = p(xs) + u.v - u(evaluate(m, xs))
    return GridSampled.from_arrays(xs, vals, p.alpha, u.lo, u.hi, u.circle)
