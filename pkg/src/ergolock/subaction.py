"""Sub-actions from a penalized max-plus (Lax-Oleinik type) operator.

On a node grid the operator is

    T[u](x) = max_{x'} { u(x') + phi(x') - Q - C d(f(x'), x)^alpha },

which is monotone and commutes with constants.  A fixed point u of T
(up to an additive shift absorbed into Q) satisfies phi + u - u o f <= Q at
every node whose image is a node, and up to C h^alpha otherwise, where h
is the grid spacing.  The sign convention is the max-plus one: it is the
mirror image of the min-plus form under phi -> -phi, u -> -u.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from .dynamics import MapSpec
from .errors import NotConverged, NotExpanding
from .orbits import PeriodicOrbit, maximizing_orbit
from .potentials import GridSampled, Potential, distance


@dataclass(frozen=True)
class SubAction:
    grid: np.ndarray
    u: np.ndarray
    alpha: float
    Q_used: float
    defect: float
    contact_set: np.ndarray
    seminorm_ratio: float
    C_pen: float
    Q_supplied: float
    Q_adjusted: bool
    iterations: int
    last_change: float
    interp_bound: float
    tol: float
    circle: bool = False
    lo: float = 0.0
    hi: float = 1.0

    def as_potential(self) -> GridSampled:
        return GridSampled.from_arrays(self.grid, self.u, self.alpha, self.lo, self.hi, self.circle)

    def node_defects(self, m: MapSpec, p: Potential) -> np.ndarray:
        return _node_defects(m, p, self.grid, self.u, self.Q_used, self.alpha, self.circle)


@dataclass(frozen=True)
class AttractingSubAction:
    values: np.ndarray
    step_defects: np.ndarray
    slack: float


def make_grid(m: MapSpec, n: int) -> np.ndarray:
    if m.circle:
        return m.lo + m.length * np.arange(n) / n
    return np.linspace(m.lo, m.hi, n)


def default_penalty(m: MapSpec, p: Potential) -> float:
    """C_pen = |phi|_alpha * lam^alpha / (lam^alpha - 1) * 4."""
    semi = p.seminorm().holder_seminorm
    if semi == 0.0:
        return 0.0
    if not math.isfinite(semi):
        return 1.0
    try:
        lam = dyn.estimate_hyperbolic(m).lam
    except NotExpanding:
        lam = 2.0
    la = lam ** p.alpha
    return semi * la / (la - 1.0) * 4.0


def _envelope_cone(a, y, x, C, circle, L):
    """max_j a_j - C |x_i - y_j| by prefix/suffix maxima over sorted y."""
    if circle:
        y = np.concatenate([y - L, y, y + L])
        a = np.concatenate([a, a, a])
    order = np.argsort(y, kind="stable")
    ys, As = y[order], a[order]
    left = np.maximum.accumulate(As + C * ys)
    right = np.maximum.accumulate((As - C * ys)[::-1])[::-1]
    k = np.searchsorted(ys, x, side="right")
    out = np.full(len(x), -np.inf)
    has_l = k > 0
    out[has_l] = left[k[has_l] - 1] - C * x[has_l]
    has_r = k < len(ys)
    out[has_r] = np.maximum(out[has_r], right[k[has_r]] + C * x[has_r])
    return out


def _envelope_dense(a, y, x, C, alpha, circle, L, chunk=256):
    out = np.empty(len(x))
    for s in range(0, len(x), chunk):
        d = distance(x[s:s + chunk, None], y[None, :], circle, L)
        out[s:s + chunk] = np.max(a[None, :] - C * d ** alpha, axis=1)
    return out


def lax_oleinik_step(u, m: MapSpec, p: Potential, Q: float, C_pen: float,
                     alpha: float | None = None, grid=None, method: str = "auto"):
    """One application of T at every grid node (grid defaults to make_grid)."""
    u = np.asarray(u, dtype=float)
    alpha = p.alpha if alpha is None else alpha
    x = make_grid(m, len(u)) if grid is None else np.asarray(grid, dtype=float)
    a = u + p(x) - Q
    y = dyn.evaluate(m, x)
    if method == "cone" or (method == "auto" and alpha == 1.0):
        return _envelope_cone(a, y, x, C_pen, m.circle, m.length)
    return _envelope_dense(a, y, x, C_pen, alpha, m.circle, m.length)


def _interp(grid, u, pts, circle, lo, hi):
    g = GridSampled.from_arrays(grid, u, 1.0, lo, hi, circle)
    return g(pts)


def _node_defects(m, p, grid, u, Q, alpha, circle):
    fx = dyn.evaluate(m, grid)
    return p(grid) + u - _interp(grid, u, fx, circle, m.lo, m.hi) - Q


def _holder_seminorm(grid, u, alpha, circle, lo, hi) -> float:
    return GridSampled.from_arrays(grid, u, alpha, lo, hi, circle).seminorm().holder_seminorm


def compute_subaction(m: MapSpec, p: Potential, n: int = 4096, tol: float = 1e-9,
                      max_iter: int = 2000, Q: float | None = None,
                      C_pen: float | None = None, alpha: float | None = None,
                      max_period: int = 12, grid=None) -> SubAction:
    """Iterate T from u = 0 with renormalization at node 0 until the change is below tol.

    The additive drift c of the iteration (T[u] = u + c at the fixed point)
    is folded into Q_used = Q + c.  If plain iteration has not settled after
    max_iter/4 sweeps the averaged update u <- (u + T[u])/2 is used, which
    damps the oscillation caused by cyclic optimal paths.
    """
    alpha = p.alpha if alpha is None else alpha
    if Q is None:
        Q = maximizing_orbit(m, p, max_period)[1]
    if C_pen is None:
        C_pen = default_penalty(m, p)
    x = make_grid(m, n) if grid is None else np.asarray(grid, dtype=float)
    u = np.zeros(len(x))
    change, shift, it = math.inf, 0.0, 0
    averaged = False
    for it in range(1, max_iter + 1):
        w = lax_oleinik_step(u, m, p, Q, C_pen, alpha, x)
        shift = float(w[0] - u[0])
        w = w - w[0]
        new = 0.5 * (u + w) if averaged else w
        change = float(np.max(np.abs(new - u)))
        u = new
        if change < tol:
            break
        if not averaged and it >= max_iter // 4:
            averaged = True
    else:
        raise NotConverged(f"sup-change {change:.3e} after {max_iter} sweeps", change)
    Q_used = Q + shift
    dfx = _node_defects(m, p, x, u, Q_used, alpha, m.circle)
    contact_tol = 10.0 * tol
    contact = np.nonzero(dfx >= -contact_tol)[0]
    if len(contact):
        u = u - u[contact[0]]
    semi_phi = p.seminorm().holder_seminorm
    semi_u = _holder_seminorm(x, u, alpha, m.circle, m.lo, m.hi)
    ratio = semi_u / semi_phi if semi_phi > 0 and math.isfinite(semi_phi) else (0.0 if semi_u == 0 else math.inf)
    h = float(np.max(np.diff(x))) if len(x) > 1 else 0.0
    return SubAction(x, u, alpha, float(Q_used), float(np.max(dfx)), contact, ratio,
                     float(C_pen), float(Q), abs(shift) > 10.0 * tol, it, change,
                     float(C_pen * h ** alpha), tol, m.circle, m.lo, m.hi)


def mane_defect(s: SubAction, m: MapSpec, p: Potential):
    """(max defect, nodes exceeding Q_used + tol) from a fresh evaluation."""
    d = _node_defects(m, p, s.grid, s.u, s.Q_used, s.alpha, s.circle)
    return float(np.max(d)), np.nonzero(d > s.tol)[0].tolist()


def subaction_from_values(m: MapSpec, p: Potential, grid, u, Q: float, tol: float = 1e-9) -> SubAction:
    """Wrap a user-supplied grid function (e.g. u = 0) as a SubAction record."""
    x = np.asarray(grid, dtype=float)
    u = np.asarray(u, dtype=float)
    d = _node_defects(m, p, x, u, Q, p.alpha, m.circle)
    semi_phi = p.seminorm().holder_seminorm
    semi_u = _holder_seminorm(x, u, p.alpha, m.circle, m.lo, m.hi)
    ratio = semi_u / semi_phi if semi_phi > 0 else 0.0
    return SubAction(x, u, p.alpha, float(Q), float(np.max(d)), np.nonzero(d >= -10 * tol)[0],
                     ratio, math.nan, float(Q), False, 0, 0.0, 0.0, tol, m.circle, m.lo, m.hi)


def attracting_subaction(orbit: PeriodicOrbit, p: Potential, Q: float) -> AttractingSubAction:
    """w(f^j x) = sum_{i<j} (phi(f^i x) - Q) along the orbit."""
    phibar = p(orbit.as_array()) - Q
    w = np.concatenate([[0.0], np.cumsum(phibar)[:-1]])
    steps = phibar + w - np.roll(w, -1)
    return AttractingSubAction(w, steps, float(np.sum(phibar)))
