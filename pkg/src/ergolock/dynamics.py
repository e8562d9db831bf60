"""One-dimensional map families with exact evaluation and derivatives.

A :class:`MapSpec` is an immutable description (family tag plus parameters)
and every operation here is a pure function of it, so specs can be shared
freely between threads.  Evaluation is vectorized over numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .errors import DomainError, NonDifferentiable, NotExpanding, OrderTooHigh

FAMILIES = ("doubling", "tent", "logistic", "quadratic", "markov", "sine",
            "polynomial", "polyext")

# tolerance (relative to domain length) for accepting points on the boundary
_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class MapSpec:
    family: str
    params: tuple = ()
    lo: float = 0.0
    hi: float = 1.0
    smoothness_order: int = 2
    circle: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown map family {self.family!r}")
        if not self.lo < self.hi:
            raise ValueError("domain must satisfy lo < hi")
        if self.smoothness_order < 1:
            raise ValueError("smoothness_order must be >= 1")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def __call__(self, x):
        return evaluate(self, x)


@dataclass(frozen=True)
class HyperbolicEstimate:
    K: float
    delta: float
    lam: float
    lip: float
    region: tuple
    method: str


# ---------------------------------------------------------------- constructors

def doubling() -> MapSpec:
    return MapSpec("doubling", (), 0.0, 1.0, 8, True)


def tent(s: float) -> MapSpec:
    if not 0.0 <= s <= 2.0:
        raise ValueError("tent slope must lie in [0, 2] to map [0,1] into itself")
    return MapSpec("tent", (float(s),), 0.0, 1.0, 1, False)


def logistic(a: float, r: int = 2) -> MapSpec:
    if not 0.0 <= a <= 4.0:
        raise ValueError("logistic parameter must lie in [0, 4]")
    return MapSpec("logistic", (float(a),), 0.0, 1.0, r, False)


def quadratic(c: float, r: int = 2) -> MapSpec:
    if not -2.0 <= c <= 0.25:
        raise ValueError("quadratic parameter must lie in [-2, 1/4]")
    beta = (1.0 + math.sqrt(1.0 - 4.0 * c)) / 2.0
    return MapSpec("quadratic", (float(c),), -beta, beta, r, False)


def markov(breakpoints: Sequence, left_values: Sequence, slopes: Sequence,
           check: bool = True) -> MapSpec:
    """Piecewise-linear map: on [b_i, b_{i+1}) it is v_i + s_i (x - b_i).

    Inputs may be ``Fraction`` instances, in which case the Markov condition
    (every piece endpoint image is a breakpoint) is checked exactly.
    """
    bps, vals, sl = list(breakpoints), list(left_values), list(slopes)
    if len(bps) < 2 or len(vals) != len(bps) - 1 or len(sl) != len(vals):
        raise ValueError("need n+1 breakpoints and n values/slopes")
    if any(bps[i] >= bps[i + 1] for i in range(len(bps) - 1)):
        raise ValueError("breakpoints must increase")
    if check:
        exact = all(isinstance(v, (int, Fraction)) for v in bps + vals + sl)
        conv = Fraction if exact else float
        B = [conv(b) for b in bps]
        tol = 0 if exact else 1e-12
        for i, (v, s) in enumerate(zip(vals, sl)):
            v, s = conv(v), conv(s)
            for y in (v, v + s * (B[i + 1] - B[i])):
                if y < B[0] - tol or y > B[-1] + tol:
                    raise ValueError(f"piece {i} leaves the domain")
                if not any(abs(y - b) <= tol for b in B):
                    raise ValueError(f"piece {i} endpoint image {y} is not a breakpoint")
    params = (tuple(float(b) for b in bps), tuple(float(v) for v in vals),
              tuple(float(s) for s in sl))
    return MapSpec("markov", params, float(bps[0]), float(bps[-1]), 1, False)


def sine(offset: float, amp: float, lo: float = 0.0, hi: float = 1.0, r: int = 2,
         check_range: bool = True) -> MapSpec:
    """f(x) = offset + amp * sin(2 pi x)."""
    m = MapSpec("sine", (float(offset), float(amp)), float(lo), float(hi), r, False)
    if check_range:
        _check_range(m)
    return m


def polynomial(coeffs: Sequence[float], lo: float = 0.0, hi: float = 1.0, r: int = 2,
               check_range: bool = True) -> MapSpec:
    """Polynomial with ascending coefficients in x."""
    m = MapSpec("polynomial", tuple(float(c) for c in coeffs), float(lo), float(hi), r, False)
    if check_range:
        _check_range(m)
    return m


def _check_range(m: MapSpec, n: int = 10001):
    xs = np.linspace(m.lo, m.hi, n)
    ys = _raw(m, xs)
    slack = _DOMAIN_SLACK * m.length
    if ys.min() < m.lo - slack or ys.max() > m.hi + slack:
        raise ValueError("map does not send its domain into itself")


# ------------------------------------------------------------------ evaluation

def wrap(m: MapSpec, x):
    """Reduce onto [lo, hi) by floor (never a signed remainder)."""
    x = np.asarray(x, dtype=float)
    y = x - np.floor((x - m.lo) / m.length) * m.length
    return np.where(y >= m.hi, m.lo, y)


def _prepare(m: MapSpec, x):
    arr = np.asarray(x, dtype=float)
    if m.circle:
        return wrap(m, arr)
    slack = _DOMAIN_SLACK * m.length
    if np.any(arr < m.lo - slack) or np.any(arr > m.hi + slack) or np.any(np.isnan(arr)):
        raise DomainError(f"point outside [{m.lo}, {m.hi}]")
    return np.clip(arr, m.lo, m.hi)


def _markov_index(m: MapSpec, x):
    bps = np.asarray(m.params[0])
    idx = np.searchsorted(bps, x, side="right") - 1
    return np.clip(idx, 0, len(bps) - 2)


def _polyext_parts(m: MapSpec):
    a0, a, b, b0, left, right, inner = m.params
    return a0, a, b, b0, np.asarray(left), np.asarray(right), inner


def _raw(m: MapSpec, x):
    """Image without domain handling (x already a float array)."""
    fam, p = m.family, m.params
    if fam == "doubling":
        return 2.0 * x
    if fam == "tent":
        return np.where(x < 0.5, p[0] * x, p[0] * (1.0 - x))
    if fam == "logistic":
        return p[0] * x * (1.0 - x)
    if fam == "quadratic":
        return x * x + p[0]
    if fam == "markov":
        bps, vals, sl = (np.asarray(q) for q in p)
        i = _markov_index(m, x)
        return vals[i] + sl[i] * (x - bps[i])
    if fam == "sine":
        return p[0] + p[1] * np.sin(2.0 * np.pi * x)
    if fam == "polynomial":
        return P.polyval(x, np.asarray(p))
    if fam == "polyext":
        a0, a, b, b0, left, right, inner = _polyext_parts(m)
        x = np.asarray(x, dtype=float)
        mid = np.clip(x, a, b)
        out = np.asarray(_raw(inner, mid), dtype=float).copy()
        lm, rm = x < a, x > b
        if np.any(lm):
            out = np.where(lm, P.polyval(x - a, left), out)
        if np.any(rm):
            out = np.where(rm, P.polyval(x - b, right), out)
        return out
    raise ValueError(fam)


def evaluate(m: MapSpec, x):
    """Image of x (scalar or array)."""
    scalar = np.ndim(x) == 0
    arr = _prepare(m, x)
    y = _raw(m, arr)
    if m.circle:
        y = wrap(m, y)
    return float(y) if scalar else np.asarray(y, dtype=float)


def iterate(m: MapSpec, x, n: int):
    for _ in range(n):
        x = evaluate(m, x)
    return x


def _raw_deriv(m: MapSpec, x, order: int):
    fam, p = m.family, m.params
    x = np.asarray(x, dtype=float)
    zero = np.zeros_like(x)
    if fam == "doubling":
        return zero + (2.0 if order == 1 else 0.0)
    if fam == "tent":
        if order >= 2:
            return zero
        return np.where(x < 0.5, p[0], -p[0])
    if fam == "logistic":
        if order == 1:
            return p[0] * (1.0 - 2.0 * x)
        return zero + (-2.0 * p[0] if order == 2 else 0.0)
    if fam == "quadratic":
        if order == 1:
            return 2.0 * x
        return zero + (2.0 if order == 2 else 0.0)
    if fam == "markov":
        if order >= 2:
            return zero
        return np.asarray(p[2])[_markov_index(m, x)]
    if fam == "sine":
        w = 2.0 * np.pi
        return p[1] * w ** order * np.sin(w * x + order * np.pi / 2.0)
    if fam == "polynomial":
        c = P.polyder(np.asarray(p), order) if order <= len(p) - 1 else np.zeros(1)
        return P.polyval(x, c) + zero
    if fam == "polyext":
        a0, a, b, b0, left, right, inner = _polyext_parts(m)
        out = np.asarray(_raw_deriv(inner, np.clip(x, a, b), order), dtype=float) + zero
        lm, rm = x < a, x > b
        if np.any(lm):
            out = np.where(lm, P.polyval(x - a, _pder(left, order)), out)
        if np.any(rm):
            out = np.where(rm, P.polyval(x - b, _pder(right, order)), out)
        return out
    raise ValueError(fam)


def _pder(c, order):
    return P.polyder(c, order) if order <= len(c) - 1 else np.zeros(1)


def _kinks(m: MapSpec) -> list:
    """Interior points where the first derivative does not exist."""
    if m.family == "tent":
        return [0.5]
    if m.family == "markov":
        return list(m.params[0][1:-1])
    return []


def derivative(m: MapSpec, x, order: int = 1, strict: bool = True):
    """Exact derivative of the given order.

    With ``strict`` the breakpoints of piecewise families raise
    :class:`NonDifferentiable`; otherwise the owning piece's one-sided value
    is returned (used for multipliers along orbits).
    """
    if order > m.smoothness_order:
        raise OrderTooHigh(f"order {order} exceeds smoothness {m.smoothness_order}")
    if order == 0:
        return evaluate(m, x)
    scalar = np.ndim(x) == 0
    arr = _prepare(m, x)
    if strict:
        for k in _kinks(m):
            if np.any(arr == k):
                raise NonDifferentiable(f"breakpoint {k}")
    d = _raw_deriv(m, arr, order)
    return float(d) if scalar else np.asarray(d, dtype=float)


# -------------------------------------------------------------- branch structure

def turning_points(m: MapSpec) -> list:
    """Interior points separating monotone laps (critical points, kinks, jumps)."""
    fam, p = m.family, m.params
    if fam in ("doubling", "tent", "logistic"):
        return [0.5]
    if fam == "quadratic":
        return [0.0]
    if fam == "markov":
        return list(p[0][1:-1])
    if fam == "sine":
        k0 = math.ceil((m.lo - 0.25) * 2.0)
        out, k = [], k0
        while 0.25 + k / 2.0 < m.hi:
            t = 0.25 + k / 2.0
            if m.lo < t < m.hi:
                out.append(t)
            k += 1
        return out
    if fam == "polynomial":
        return _poly_turning(np.asarray(p), m.lo, m.hi)
    if fam == "polyext":
        a0, a, b, b0, left, right, inner = _polyext_parts(m)
        out = [t + a for t in _poly_turning(left, a0 - a, 0.0)]
        out += [t for t in turning_points(inner) if a < t < b]
        out += [t + b for t in _poly_turning(right, 0.0, b0 - b)]
        return sorted(out)
    raise ValueError(fam)


def _poly_turning(c, lo, hi) -> list:
    d = P.polyder(c)
    if len(d) <= 1:
        return []
    roots = P.polyroots(d)
    out = []
    for z in roots:
        if abs(z.imag) < 1e-12 and lo < z.real < hi:
            t = z.real
            eps = 1e-7 * max(1.0, hi - lo)
            if np.sign(P.polyval(t - eps, d)) != np.sign(P.polyval(t + eps, d)):
                out.append(float(t))
    return sorted(set(out))


def pieces(m: MapSpec) -> list:
    """Monotone pieces as (left, right) pairs covering the domain in order."""
    if m.family == "markov":
        b = m.params[0]
        return [(b[i], b[i + 1]) for i in range(len(b) - 1)]
    pts = [m.lo] + [t for t in turning_points(m) if m.lo < t < m.hi] + [m.hi]
    return [(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]


def is_continuous(m: MapSpec) -> bool:
    if m.family == "doubling":
        return False
    if m.family == "markov":
        bps, vals, sl = m.params
        for i in range(len(vals) - 1):
            if abs(vals[i] + sl[i] * (bps[i + 1] - bps[i]) - vals[i + 1]) > 1e-12:
                return False
    return True


def branch_of(m: MapSpec, x):
    """Piece index of x with half-open ownership [b_i, b_{i+1}), last closed."""
    pc = pieces(m)
    inner = np.asarray([l for l, _ in pc[1:]])
    arr = np.asarray(x, dtype=float)
    if m.circle:
        arr = wrap(m, arr)
    return np.searchsorted(inner, arr, side="right")


def piece_image(m: MapSpec, i: int) -> tuple:
    l, r = pieces(m)[i]
    if m.family == "doubling":
        return (0.0, 1.0)
    ends = _raw(m, np.array([l, r]))
    if m.family == "markov":
        bps, vals, sl = m.params
        ends = np.array([vals[i], vals[i] + sl[i] * (r - l)])
    return (float(ends.min()), float(ends.max()))


def inverse_branch(m: MapSpec, i: int, y, clamp: bool = False):
    """Preimage of y on monotone piece i (vectorized).

    Values outside the piece image give nan unless ``clamp`` is set, in which
    case y is first clipped into the image (used by contracting inverse
    iteration).
    """
    y = np.asarray(y, dtype=float)
    lo_im, hi_im = piece_image(m, i)
    if clamp:
        y = np.clip(y, lo_im, hi_im)
    tol = 1e-13 * max(1.0, hi_im - lo_im)
    bad = (y < lo_im - tol) | (y > hi_im + tol)
    yc = np.clip(y, lo_im, hi_im)
    fam, p = m.family, m.params
    l, r = pieces(m)[i]
    if fam == "doubling":
        x = (yc + i) / 2.0
    elif fam == "tent":
        s = p[0]
        x = yc / s if i == 0 else 1.0 - yc / s
    elif fam == "logistic":
        d = np.sqrt(np.maximum(0.0, 1.0 - 4.0 * yc / p[0]))
        x = (1.0 - d) / 2.0 if i == 0 else (1.0 + d) / 2.0
    elif fam == "quadratic":
        s = np.sqrt(np.maximum(0.0, yc - p[0]))
        x = -s if i == 0 else s
    elif fam == "markov":
        x = p[0][i] + (yc - p[1][i]) / p[2][i]
    else:
        x = _generic_inverse(m, l, r, yc)
    x = np.clip(x, l, r)
    return np.where(bad, np.nan, x)


def _generic_inverse(m: MapSpec, l: float, r: float, y):
    fl, fr = float(_raw(m, np.array(l))), float(_raw(m, np.array(r)))
    out = np.empty_like(y)
    flat = out.reshape(-1)
    for j, v in enumerate(y.reshape(-1)):
        if v == fl:
            flat[j] = l
        elif v == fr:
            flat[j] = r
        else:
            flat[j] = brentq(lambda t: float(_raw(m, np.array(t))) - v, l, r,
                             xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return out


def inverse_branches(m: MapSpec, y: float) -> list:
    """All (branch, preimage) pairs with f(x) = y; coincident preimages reported once."""
    if m.circle:
        y = float(wrap(m, y))
    out = []
    pc = pieces(m)
    half_open = not is_continuous(m)
    for i, (l, r) in enumerate(pc):
        x = float(inverse_branch(m, i, y))
        if math.isnan(x):
            continue
        if half_open and i < len(pc) - 1 and x >= r:
            continue
        if any(abs(x - q) <= 1e-12 for _, q in out):
            continue
        out.append((i, x))
    return out


# ---------------------------------------------------------- hyperbolic estimates

def _region_list(m: MapSpec, region) -> list:
    if region is None:
        return [(m.lo, m.hi)]
    if len(region) == 2 and np.ndim(region[0]) == 0:
        return [(float(region[0]), float(region[1]))]
    return [(float(l), float(r)) for l, r in region]


def _poly_sup_abs(c, lo, hi) -> float:
    """Exact sup of |poly| on [lo, hi] from endpoint and critical values."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    pts = [lo, hi]
    if len(c) > 2:
        for z in P.polyroots(P.polyder(c)):
            if abs(z.imag) < 1e-12 and lo < z.real < hi:
                pts.append(z.real)
    return float(np.max(np.abs(P.polyval(np.asarray(pts), c))))


def sup_abs_derivative(m: MapSpec, order: int, lo: float | None = None,
                       hi: float | None = None) -> float:
    """Sup of |f^(order)| over [lo, hi] (default the domain), exact where cheap."""
    lo = m.lo if lo is None else lo
    hi = m.hi if hi is None else hi
    fam, p = m.family, m.params
    if order == 0 and fam in ("doubling", "tent", "markov", "sine"):
        xs = np.linspace(lo, hi, 10001)
        slack = sup_abs_derivative(m, 1, lo, hi) * (xs[1] - xs[0]) / 2.0
        return float(np.max(np.abs(_raw(m, xs)))) + (slack if fam == "sine" else 0.0)
    if fam == "doubling":
        return 2.0 if order == 1 else 0.0
    if fam == "tent":
        return p[0] if order == 1 else 0.0
    if fam == "markov":
        bps, vals, sl = p
        if order >= 2:
            return 0.0
        return max(abs(s) for i, s in enumerate(sl) if bps[i] < hi and bps[i + 1] > lo)
    if fam == "logistic":
        return _poly_sup_abs(_pder(np.array([0.0, p[0], -p[0]]), order), lo, hi)
    if fam == "quadratic":
        return _poly_sup_abs(_pder(np.array([p[0], 0.0, 1.0]), order), lo, hi)
    if fam == "polynomial":
        return _poly_sup_abs(_pder(np.asarray(p), order), lo, hi)
    if fam == "sine":
        amp = abs(p[1]) * (2.0 * np.pi) ** order
        # sup of |sin| over the phase interval; touch 1 if a peak lies inside
        phase = order * np.pi / 2.0
        t0, t1 = 2 * np.pi * lo + phase, 2 * np.pi * hi + phase
        k = math.ceil((t0 - np.pi / 2) / np.pi)
        if np.pi / 2 + k * np.pi <= t1:
            return float(amp)
        return float(amp * max(abs(math.sin(t0)), abs(math.sin(t1))))
    if fam == "polyext":
        a0, a, b, b0, left, right, inner = _polyext_parts(m)
        vals = []
        if lo < a:
            vals.append(_poly_sup_abs(_pder(left, order), lo - a, min(hi, a) - a))
        if hi > b:
            vals.append(_poly_sup_abs(_pder(right, order), max(lo, b) - b, hi - b))
        if hi > a and lo < b:
            vals.append(sup_abs_derivative(inner, order, max(lo, a), min(hi, b)))
        return max(vals)
    raise ValueError(fam)


def lipschitz(m: MapSpec) -> float:
    return sup_abs_derivative(m, 1)


def _inf_abs_derivative(m: MapSpec, lo: float, hi: float, grid_n: int):
    """(infimum lower bound of |f'| on [lo,hi], method tag)."""
    fam, p = m.family, m.params
    if fam in ("doubling", "tent"):
        return (2.0 if fam == "doubling" else p[0]), "AnalyticDerivativeBound"
    if fam == "markov":
        bps, vals, sl = p
        return min(abs(s) for i, s in enumerate(sl)
                   if bps[i] <= hi and bps[i + 1] >= lo), "AnalyticDerivativeBound"
    if fam in ("logistic", "quadratic"):
        # |f'| is affine in x and vanishes only at the critical point
        crit = 0.5 if fam == "logistic" else 0.0
        if lo <= crit <= hi:
            return 0.0, "AnalyticDerivativeBound"
        d = np.abs(_raw_deriv(m, np.array([lo, hi]), 1))
        return float(d.min()), "AnalyticDerivativeBound"
    xs = np.linspace(lo, hi, max(grid_n, 2))
    h = xs[1] - xs[0] if len(xs) > 1 else 0.0
    margin = sup_abs_derivative(m, 2, lo, hi) * h / 2.0 if m.smoothness_order >= 2 else 0.0
    return float(np.min(np.abs(_raw_deriv(m, xs, 1))) - margin), "GridInfimum"


def estimate_hyperbolic(m: MapSpec, region=None, grid_n: int = 1001) -> HyperbolicEstimate:
    """Expansion constants (K, delta, lambda, lip) over a region.

    delta is the largest radius whose neighborhood of the region keeps
    |f'| >= (1 + lambda)/2, capped at the domain length.
    """
    regs = _region_list(m, region)
    for l, r in regs:
        if l < m.lo - 1e-12 or r > m.hi + 1e-12 or l > r:
            raise DomainError("region must lie inside the domain")
    lam, method = math.inf, "AnalyticDerivativeBound"
    for l, r in regs:
        v, meth = _inf_abs_derivative(m, l, r, grid_n)
        lam = min(lam, v)
        if meth == "GridInfimum":
            method = meth
    if not lam > 1.0:
        raise NotExpanding(f"inferred lambda {lam} <= 1")
    thresh = (1.0 + lam) / 2.0

    def ok(d):
        for l, r in regs:
            lo, hi = max(m.lo, l - d), min(m.hi, r + d)
            v, _ = _inf_abs_derivative(m, lo, hi, grid_n)
            if v < thresh:
                return False
        return True

    cap = m.length
    if ok(cap):
        delta = cap
    else:
        lo_d, hi_d = 0.0, cap
        for _ in range(60):
            mid = 0.5 * (lo_d + hi_d)
            if ok(mid):
                lo_d = mid
            else:
                hi_d = mid
        delta = lo_d
    return HyperbolicEstimate(1.0, delta, lam, lipschitz(m), tuple(regs), method)


# ------------------------------------------------------- exact doubling orbits

# 2 has multiplicative order (q - 1)/2 modulo this prime, so orbits of k/q
# do not repeat within any practical horizon
DOUBLING_PRIME = 1_000_000_007


def doubling_orbit_exact(numerators, n: int, q: int = DOUBLING_PRIME) -> np.ndarray:
    """Points f^j(k/q), j < n, for the doubling map computed in integers.

    Floating-point doubling loses one bit per step and collapses to 0 after
    about 53 steps; integer arithmetic modulo q avoids that.
    """
    k = np.asarray(numerators, dtype=np.int64).reshape(-1, 1) % q
    pw = np.empty(n, dtype=np.int64)
    v = 1
    for j in range(n):
        pw[j] = v
        v = (2 * v) % q
    return ((k * pw[None, :]) % q) / float(q)
