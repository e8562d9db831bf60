"""Polynomial extensions of an interval map beyond its boundary.

Given f on M = [a, b] of class C^r, the map is continued past each endpoint
by its order-r Taylor polynomial plus a free top-degree term,

    g_k(x) = sum_{i<=r} f^(i)(a)/i! (x-a)^i + (-1)^(r+1) k/(r+1)! (x-a)^(r+1)   (x <= a)
    h_k(x) = sum_{i<=r} f^(i)(b)/i! (x-b)^i +           k/(r+1)! (x-b)^(r+1)   (x >= b)

so that derivatives up to order r match at the glue points.  Choosing k
large makes the outer pieces strongly expanding; the outer endpoints a0, b0
are then placed so that {a0, b0} is mapped into itself.  The glued map is a
``polyext`` MapSpec holding the original f unchanged as its middle piece.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq, minimize

from . import dynamics as dyn
from .dynamics import MapSpec
from .errors import CaseSearchFailed, DomainError, SearchFailed, ZeroDerivativeAtBoundary
from .orbits import enumerate_periodic, maximizing_orbit
from .potentials import Cosine, Potential

LEFT, RIGHT = "left", "right"
W_MIN = 1e-8
THETA = 2.0  # every outer piece has |F'| > 2 beyond its cut


# ------------------------------------------------------------------ polynomials

@dataclass(frozen=True)
class BoundaryPolynomial:
    side: str
    anchor: float
    r: int
    taylor: tuple  # f^(i)(anchor) / i!, i = 0..r
    k: float

    @property
    def degree(self) -> int:
        return self.r + 1

    @property
    def coeffs(self) -> np.ndarray:
        """Ascending coefficients in t = x - anchor."""
        sgn = (-1.0) ** (self.r + 1) if self.side == LEFT else 1.0
        top = sgn * self.k / math.factorial(self.r + 1)
        return np.array(list(self.taylor) + [top], dtype=float)

    def __call__(self, x):
        return P.polyval(np.asarray(x, dtype=float) - self.anchor, self.coeffs)

    def deriv(self, x, order: int = 1):
        c = dyn._pder(self.coeffs, order)
        return P.polyval(np.asarray(x, dtype=float) - self.anchor, c)


def taylor_coeffs(f: MapSpec, x: float, r: int | None = None) -> tuple:
    r = f.smoothness_order if r is None else r
    return tuple(float(dyn.derivative(f, x, i, strict=False)) / math.factorial(i)
                 for i in range(r + 1))


def boundary_polynomial(f: MapSpec, side: str, k: float, hyperbolic: bool = True) -> BoundaryPolynomial:
    if side not in (LEFT, RIGHT):
        raise ValueError(f"side must be {LEFT!r} or {RIGHT!r}")
    anchor = f.lo if side == LEFT else f.hi
    tc = taylor_coeffs(f, anchor)
    if hyperbolic and tc[1] == 0.0:
        raise ZeroDerivativeAtBoundary(f"f'({anchor}) = 0")
    return BoundaryPolynomial(side, float(anchor), f.smoothness_order, tc, float(k))


def cr_norm(m: MapSpec, r: int | None = None, lo: float | None = None,
            hi: float | None = None) -> float:
    """max_{i<=r} sup |m^(i)| over [lo, hi]."""
    r = m.smoothness_order if r is None else r
    return max(dyn.sup_abs_derivative(m, i, lo, hi) for i in range(r + 1))


def k_w(r: int, norm: float, w: float) -> float:
    """Top coefficient making |poly'| > 2 at distance w from the anchor."""
    s = sum(w ** i / math.factorial(i) for i in range(r))
    return math.factorial(r) / w ** r * (norm * s + 2.0)


def kappa(theta: float, a: float, a0: float, b: float, b0: float) -> float:
    """Admissible C^r size of zero-boundary perturbations of F."""
    return min(theta / 2.0, a - a0, b0 - b)


def tau_margin(f: MapSpec) -> float:
    return 0.5 * min(f(f.lo) - f.lo, f.hi - f(f.hi))


# ---------------------------------------------------------------- claim search

@dataclass(frozen=True)
class ClaimResult:
    claim: str
    side: str
    k: float
    cut: float
    w: float
    target: float
    theta_small: float
    poly: BoundaryPolynomial


def _positive_beyond(c: np.ndarray, t0: float, direction: int) -> bool:
    """True when the polynomial c(t) is > 0 for every t strictly beyond t0."""
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    if len(c) == 0:
        return False
    if len(c) > 1:
        for z in P.polyroots(c):
            if abs(z.imag) < 1e-9 and (z.real - t0) * direction > 1e-12:
                return False
    return P.polyval(t0 + direction * 1e-9, c) > 0 and P.polyval(t0 + direction, c) > 0


def _first_root(c: np.ndarray, direction: int, cap: float) -> float:
    d = P.polyder(c)
    best = cap
    if len(d) > 1:
        for z in P.polyroots(d):
            t = z.real * direction
            if abs(z.imag) < 1e-12 and 0.0 < t < best:
                best = t
    return best


def claim_parameters(f: MapSpec, side: str) -> ClaimResult:
    """Top coefficient and cut point for one side of f.

    The derivative sign at the anchor selects the target level: the outer
    polynomial leaves M's interior band [a+tau, b-tau] through b-tau when
    it moves upward and through a+tau when it moves downward.
    """
    a, b = f.lo, f.hi
    tau = tau_margin(f)
    base = boundary_polynomial(f, side, 0.0)
    r = base.r
    slope = base.taylor[1]
    sgn = 1 if slope > 0 else -1
    direction = 1 if side == RIGHT else -1
    # the outer piece moves upward away from the anchor iff sgn * direction > 0
    target = b - tau if sgn * direction > 0 else a + tau
    claim = {(RIGHT, 1): "A", (RIGHT, -1): "B", (LEFT, 1): "C", (LEFT, -1): "D"}[(side, sgn)]
    k_sign = sgn if side == RIGHT else -sgn
    norm = cr_norm(f)
    c0 = base.coeffs[:-1]
    theta_small = _first_root(c0, direction, b - a)
    f_anchor = base.taylor[0]
    w = theta_small
    while w >= W_MIN:
        k = k_sign * k_w(r, norm, w)
        poly = BoundaryPolynomial(side, base.anchor, r, base.taylor, k)
        v = float(poly(base.anchor + direction * w))
        if (v - target) * (f_anchor - target) <= 0.0:
            lo_x, hi_x = sorted((base.anchor, base.anchor + direction * w))
            cut = brentq(lambda x: float(poly(x)) - target, lo_x, hi_x, xtol=1e-15, rtol=1e-15)
            # sgn * poly' - 2 > 0 beyond the cut, in the outward coordinate s
            q = sgn * dyn._pder(poly.coeffs, 1)
            q[0] -= 2.0
            if _positive_beyond(_reflect(q, direction), (cut - base.anchor) * direction, 1):
                return ClaimResult(claim, side, float(k), float(cut), float(w), float(target),
                                   float(theta_small), poly)
        w *= 0.5
    raise SearchFailed(f"{side} side: no crossing of level {target} for w >= {W_MIN}")


def _reflect(c: np.ndarray, direction: int) -> np.ndarray:
    """Coefficients of c(direction * s) in s."""
    if direction == 1:
        return np.asarray(c, dtype=float)
    return np.asarray(c, dtype=float) * (-1.0) ** np.arange(len(c))


# ----------------------------------------------------------- endpoint placement

@dataclass(frozen=True)
class ExtensionResult:
    a0: float
    a1: float
    b1: float
    b0: float
    F: MapSpec
    tau_ext: float
    theta: float
    endpoint_map: dict
    case_id: int
    left: ClaimResult
    right: ClaimResult
    residuals: dict = field(default_factory=dict)

    @property
    def a(self) -> float:
        return self.F.params[1]

    @property
    def b(self) -> float:
        return self.F.params[2]

    def metadata(self) -> dict:
        return {"a0": self.a0, "a1": self.a1, "b1": self.b1, "b0": self.b0,
                "theta": self.theta, "tau_ext": self.tau_ext,
                "endpoint_map": dict(self.endpoint_map), "case_id": self.case_id,
                "k_left": self.left.k, "k_right": self.right.k,
                "claims": self.left.claim + self.right.claim,
                "residuals": dict(self.residuals)}


def _solve_outward(fun, start: float, direction: int, span: float, what: str) -> float:
    """Root of fun beyond start, bracketing by doubling steps outward."""
    f0 = fun(start)
    if f0 == 0.0:
        return start
    step = max(span, 1e-12)
    for _ in range(80):
        x = start + direction * step
        fx = fun(x)
        if np.sign(fx) != np.sign(f0):
            lo, hi = sorted((start, x))
            return brentq(fun, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
        step *= 2.0
    raise CaseSearchFailed(f"no bracket for {what}", what, abs(f0))


def glue(f: MapSpec, a0: float, b0: float, left: BoundaryPolynomial,
         right: BoundaryPolynomial) -> MapSpec:
    params = (float(a0), float(f.lo), float(f.hi), float(b0), tuple(left.coeffs.tolist()),
              tuple(right.coeffs.tolist()), f)
    return MapSpec("polyext", params, float(a0), float(b0), f.smoothness_order, False)


def _case4(g: BoundaryPolynomial, h: BoundaryPolynomial, a1: float, b1: float,
           max_iter: int = 200):
    """Solve g(x) = y, h(y) = x with x < a1, y > b1 (both pieces decreasing)."""
    p = b1 - a1
    a2, b2 = a1 - p, b1 + p

    def H(x, y):
        return abs(float(g(x)) - y) + abs(float(h(y)) - x)

    y = b1 + 0.5 * p
    x = a1
    try:
        for _ in range(max_iter):
            x = _solve_outward(lambda t: float(g(t)) - y, a1, -1, p, "g(a0)=b0")
            y_new = _solve_outward(lambda t: float(h(t)) - x, b1, 1, p, "h(b0)=a0")
            if abs(y_new - y) <= 4e-16 * max(1.0, abs(y)):
                y = y_new
                break
            y = y_new
        res = H(x, y)
    except (CaseSearchFailed, ValueError):
        res = math.inf
    if res <= 1e-8:
        return x, y, res, "alternating"
    # grid-seeded minimization of H over the search box
    xs = np.linspace(a2, a1, 201)
    ys = np.linspace(b1, b2, 201)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    Hv = np.abs(g(X) - Y) + np.abs(h(Y) - X)
    i, j = np.unravel_index(int(np.argmin(Hv)), Hv.shape)
    opt = minimize(lambda z: H(z[0], z[1]), [xs[i], ys[j]], method="Nelder-Mead",
                   options={"xatol": 1e-14, "fatol": 1e-14, "maxiter": 20000})
    x, y = float(opt.x[0]), float(opt.x[1])
    res = H(x, y)
    if res > 1e-8:
        raise CaseSearchFailed("minimum of H is not zero", "H(x,y)", res)
    return x, y, res, "grid"


def find_hyperbolic_extension(f: MapSpec) -> ExtensionResult:
    """Extend f to [a0, b0] with expanding outer pieces and {a0, b0} invariant."""
    a, b = f.lo, f.hi
    fa, fb = f(a), f(b)
    if not (a < fa < b and a < fb < b):
        raise DomainError("need f(a), f(b) strictly inside (a, b)")
    tau = tau_margin(f)
    L = claim_parameters(f, LEFT)
    R = claim_parameters(f, RIGHT)
    g, h = L.poly, R.poly
    a1, b1 = L.cut, R.cut
    span = b - a
    sa = 1 if g.taylor[1] > 0 else -1
    sb = 1 if h.taylor[1] > 0 else -1
    if sa > 0 and sb > 0:
        case = 1
        a0 = _solve_outward(lambda x: float(g(x)) - x, a1, -1, span, "g(a0)=a0")
        b0 = _solve_outward(lambda x: float(h(x)) - x, b1, 1, span, "h(b0)=b0")
        emap = {"a0": "a0", "b0": "b0"}
    elif sa < 0 < sb:
        case = 2
        b0 = _solve_outward(lambda x: float(h(x)) - x, b1, 1, span, "h(b0)=b0")
        a0 = _solve_outward(lambda x: float(g(x)) - b0, a1, -1, span, "g(a0)=b0")
        emap = {"a0": "b0", "b0": "b0"}
    elif sa > 0 > sb:
        case = 3
        a0 = _solve_outward(lambda x: float(g(x)) - x, a1, -1, span, "g(a0)=a0")
        b0 = _solve_outward(lambda x: float(h(x)) - a0, b1, 1, span, "h(b0)=a0")
        emap = {"a0": "a0", "b0": "a0"}
    else:
        case = 4
        a0, b0, _, _ = _case4(g, h, a1, b1)
        emap = {"a0": "b0", "b0": "a0"}
    F = glue(f, a0, b0, g, h)
    ends = {"a0": a0, "b0": b0}
    residuals = {k: abs(float(F(ends[k])) - ends[v]) for k, v in emap.items()}
    return ExtensionResult(float(a0), float(a1), float(b1), float(b0), F, float(tau), THETA,
                           emap, case, L, R, residuals)


# ------------------------------------------------------- zero-boundary extension

@dataclass(frozen=True)
class ZeroBoundaryExtension:
    F: MapSpec
    norm_ratio: float
    k1: float
    k2: float
    k_minus: float
    k_plus: float
    D_r: float

    def __iter__(self):
        return iter((self.F, self.norm_ratio))


def k_bracket(norm: float, r: int, ell: float) -> float:
    """Bound on |k| needed to pull the outer piece to zero at distance ell."""
    return norm * math.factorial(r + 1) * (r + 1) * (1.0 + ell ** (-r - 1))


def side_constant(r: int, ell: float) -> float:
    """C with sup_{i<=r} |g^(i)| <= C ||f|| on an outer piece of length ell."""
    kr = k_bracket(1.0, r, ell)
    best = 1.0
    for i in range(r + 1):
        s = sum(ell ** j / math.factorial(j) for j in range(r - i + 1))
        s += kr * ell ** (r + 1 - i) / math.factorial(r + 1 - i)
        best = max(best, s)
    return best


def norm_constant(r: int, a0: float, a: float, b: float, b0: float) -> float:
    return 1.0 + side_constant(r, a - a0) + side_constant(r, b0 - b)


def zero_boundary_extension(f: MapSpec, a0: float, b0: float) -> ZeroBoundaryExtension:
    """C^r extension of f to [a0, b0] vanishing at both new endpoints."""
    a, b, r = f.lo, f.hi, f.smoothness_order
    if not a0 < a < b < b0:
        raise DomainError("need a0 < a < b < b0")
    fact = math.factorial(r + 1)
    l1, l2 = a - a0, b0 - b
    tl, tr = taylor_coeffs(f, a), taylor_coeffs(f, b)
    # g_k(a0) = T_a(-l1) + k l1^(r+1)/(r+1)!, affine in k
    k1 = -float(P.polyval(-l1, tl)) * fact / l1 ** (r + 1)
    k2 = -float(P.polyval(l2, tr)) * fact / l2 ** (r + 1)
    g = BoundaryPolynomial(LEFT, a, r, tl, k1)
    h = BoundaryPolynomial(RIGHT, b, r, tr, k2)
    F = glue(f, a0, b0, g, h)
    nf = cr_norm(f)
    nF = cr_norm(F)
    ratio = 0.0 if nf == 0.0 else nF / nf
    return ZeroBoundaryExtension(F, float(ratio), k1, k2, k_bracket(nf, r, l1),
                                 k_bracket(nf, r, l2), norm_constant(r, a0, a, b, b0))


# ----------------------------------------------------------------- verification

@dataclass(frozen=True)
class VerificationReport:
    kappa: float
    perturbation_ok: bool
    eta_W: float
    entry_times: np.ndarray
    entry_bounds: np.ndarray
    escape_bound: float
    escape_ok: bool
    min_outer_derivative: float
    endpoint_derivatives: tuple
    expansion_ok: bool
    hypothesis_ok: bool
    maximizer: tuple
    maximizer_inside: bool
    Q: float
    items: dict

    @property
    def passed(self) -> bool:
        return all(self.items.values())


def _outer_grid(res: ExtensionResult, n: int) -> np.ndarray:
    a, b = res.a, res.b
    s = np.linspace(0.0, 1.0, n + 2)[1:-1]
    return np.concatenate([res.a0 + (a - res.a0) * s, b + (res.b0 - b) * s])


def _perturbation_check(res: ExtensionResult, kap: float, n_grid: int) -> bool:
    """F + H stays inside [a0, b0] for sample H vanishing at a0, b0 with ||H|| < kappa."""
    a0, b0, r = res.a0, res.b0, res.F.smoothness_order
    xs = np.linspace(a0, b0, n_grid)
    Fx = res.F(xs)
    shapes = [np.array([-a0 * b0, a0 + b0, -1.0]),             # (x-a0)(b0-x)
              P.polymul([-a0 * b0, a0 + b0, -1.0], [-(a0 + b0) / 2, 1.0])]
    ok = True
    for c in shapes:
        m = dyn.MapSpec("polynomial", tuple(c), a0, b0, r, False)
        scale = 0.99 * kap / cr_norm(m)
        for sgn in (1.0, -1.0):
            y = Fx + sgn * scale * P.polyval(xs, c)
            ok &= bool(np.all(y >= a0 - 1e-12) and np.all(y <= b0 + 1e-12))
    return ok


def verify_extension(res: ExtensionResult, f: MapSpec, potential: Potential | None = None,
                     max_period: int = 8, n_grid: int = 400) -> VerificationReport:
    F, a, b = res.F, f.lo, f.hi
    a0, b0, theta = res.a0, res.b0, res.theta
    kap = kappa(theta, a, a0, b, b0)
    pert_ok = _perturbation_check(res, kap, 2001)
    eta_W = min(res.tau_ext, (theta - 1.0) / 2.0)

    # (ii) escape into M u {a0, b0}
    X = _outer_grid(res, n_grid)
    gap = np.minimum(X - a0, b0 - X)
    rate = math.log((1.0 + theta) / 2.0)
    bounds = 1.0 + np.log((b0 - a0) / gap) / rate
    cap = int(np.max(bounds)) + 2
    times = np.full(len(X), -1, dtype=np.int64)
    x = X.copy()
    for n in range(0, cap + 1):
        inside = (x >= a) & (x <= b) | (x == a0) | (x == b0)
        newly = inside & (times < 0)
        times[newly] = n
        if np.all(times >= 0):
            break
        x = F(x)
    escape_ok = bool(np.all(times >= 0) and np.all(times <= bounds))
    escape_bound = float(1.0 + math.log((b0 - a0) / float(np.min(gap))) / rate)

    # (iii) expansion on the outer zones and at the endpoints
    zl = np.linspace(a0, res.a1, n_grid, endpoint=False)
    zr = np.linspace(res.b1, b0, n_grid + 1)[1:]
    dz = np.abs(dyn.derivative(F, np.concatenate([zl, zr])))
    ends = (abs(float(dyn.derivative(F, a0))), abs(float(dyn.derivative(F, b0))))
    min_outer = float(np.min(dz))
    exp_ok = bool(min_outer > theta and min(ends) > theta)

    # (iv) maximizing orbits avoid the endpoints when they are not favoured
    if potential is None:
        potential = Cosine(0.5 * (a + b), 1.0, 1.0, a0, b0, False)
    orbits = enumerate_periodic(F, max_period)
    orb, Q = maximizing_orbit(F, potential, max_period, orbits)
    hyp = bool(potential(a0) < Q and potential(b0) < Q)
    pts = orb.as_array()
    inside = bool(np.all((pts >= a - 1e-12) & (pts <= b + 1e-12)))
    items = {"i": pert_ok and kap > 0, "ii": escape_ok, "iii": exp_ok,
             "iv": inside or not hyp}
    return VerificationReport(kap, pert_ok, eta_W, times, bounds, escape_bound, escape_ok,
                              min_outer, ends, exp_ok, hyp, tuple(pts.tolist()), inside,
                              float(Q), items)
