"""Joint-perturbation constants, perturbation budgets and empirical locking.

``certificate`` evaluates the constant ledger (r, L1, L2, L3, C) from the
expansion data of the map, the sub-action constant L and the orbit gap.
``budget`` turns it into sizes of admissible potential perturbations at a
given orbit displacement d_g.  The empirical side perturbs the potential at
random inside a budget and checks whether the argmax orbit moves.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import dynamics as dyn
from .dynamics import MapSpec
from .errors import ErgolockError, InvalidInput
from .orbits import (PeriodicOrbit, enumerate_periodic, orbit_averages,
                     same_orbit, select_maximizing, tied_indices)
from .potentials import DistanceToOrbit, Potential, Trig, distance, distance_potential
from .subaction import SubAction

XI_DEGREE = 8


@dataclass(frozen=True)
class LockingCertificate:
    K: float
    delta: float
    lam: float
    L: float
    lip_f: float
    gap: float
    p0: int
    alpha: float
    r: float
    L1: float
    L2: float
    L3: float
    C: float

    @property
    def inputs(self) -> dict:
        return {"K": self.K, "delta": self.delta, "lambda": self.lam, "L": self.L,
                "lip_f": self.lip_f, "gap": self.gap, "p0": self.p0, "alpha": self.alpha}

    @property
    def derived(self) -> dict:
        return {"r": self.r, "L1": self.L1, "L2": self.L2, "L3": self.L3, "C": self.C}


@dataclass(frozen=True)
class PerturbationBudget:
    xi_seminorm_max: float
    xi_sup_max: float
    penalty_scale: float
    d_g_max: float
    d_g: float = 0.0

    @property
    def within_radius(self) -> bool:
        return self.d_g < self.d_g_max

    def as_dict(self) -> dict:
        return {"xi_seminorm_max": self.xi_seminorm_max, "xi_sup_max": self.xi_sup_max,
                "penalty_scale": self.penalty_scale, "d_g_max": self.d_g_max}


@dataclass(frozen=True)
class DefectCheckInput:
    tau_pert: float
    eta: float
    rho: float | None
    Psi_g: Callable
    d_g: float
    penalty: float


def _validate(K, delta, lam, L, lip_f, gap, p0, alpha):
    if not lam > 1:
        raise InvalidInput("lambda must exceed 1")
    if not (K > 0 and delta > 0 and L >= 0 and lip_f > 0 and gap > 0 and p0 >= 1):
        raise InvalidInput("K, delta, lip_f, gap must be positive, L >= 0, p0 >= 1")
    if not 0 < alpha <= 1:
        raise InvalidInput("alpha must lie in (0, 1]")


def certificate(K, delta, lam, L, lip_f, gap, p0, alpha) -> LockingCertificate:
    _validate(K, delta, lam, L, lip_f, gap, p0, alpha)
    r = min(gap / (8 * lip_f), delta)
    L1 = 5 + 2 * L
    la = lam ** alpha
    L2 = 2 * (2 * K) ** alpha * la / (la - 1)
    L3 = 1 + L + L * (2 * lip_f) ** alpha
    q = L1 * r ** (-alpha) * (2 * lip_f) ** alpha
    C = max(1, 10 * L2 * q, 2 * (p0 + L2 * L3) * q)
    return LockingCertificate(float(K), float(delta), float(lam), float(L), float(lip_f),
                              float(gap), int(p0), float(alpha), float(r), float(L1),
                              float(L2), float(L3), float(C))


def certificate_exact(K, delta, lam, L, lip_f, gap, p0) -> dict:
    """Rational evaluation of the ledger for alpha = 1."""
    K, delta, lam, L, lip_f, gap = (Fraction(v) for v in (K, delta, lam, L, lip_f, gap))
    _validate(K, delta, lam, L, lip_f, gap, p0, 1)
    r = min(gap / (8 * lip_f), delta)
    L1 = 5 + 2 * L
    L2 = 2 * (2 * K) * lam / (lam - 1)
    L3 = 1 + L + L * (2 * lip_f)
    q = L1 / r * (2 * lip_f)
    C = max(Fraction(1), 10 * L2 * q, 2 * (p0 + L2 * L3) * q)
    return {"r": r, "L1": L1, "L2": L2, "L3": L3, "C": C}


def budget(cert: LockingCertificate, phi_seminorm: float, d_g: float, diam: float = 1.0,
           theta_lock: float | None = None) -> PerturbationBudget:
    if d_g < 0:
        raise InvalidInput("d_g must be nonnegative")
    a, C, s = cert.alpha, cert.C, phi_seminorm
    root = d_g ** (a / 2.0)
    caps = [cert.gap / 4.0, 1.0]
    if theta_lock is not None and s > 0:
        caps.append((9.0 * C * (1.0 + diam) * s / theta_lock) ** -2.0)
    return PerturbationBudget(5.0 * C * s * root, s * d_g ** a, 2.0 * C * s * root,
                              min(caps), float(d_g))


def c1_bound(cert: LockingCertificate, d_g: float) -> float:
    """Bound 3 C d_g^(1/2) on the derivative of the C^1 correction term."""
    return 3.0 * cert.C * math.sqrt(d_g)


def summation_bound(K: float, rho: float, lam: float, alpha: float) -> float:
    """4 K^a rho^a lam^a / (lam^a - 1): geometric sum of distances along a shadowed segment."""
    la = lam ** alpha
    return 4.0 * K ** alpha * rho ** alpha * la / (la - 1.0)


# ---------------------------------------------------------------- defect check

def defect_check_input(cert: LockingCertificate, p: Potential, sub: SubAction, map_g: MapSpec,
                       orbit_g: PeriodicOrbit, d_g: float, xi: Potential | None = None,
                       Q: float | None = None) -> DefectCheckInput:
    """tau, eta, rho and the penalized defect potential Psi_g."""
    Q = sub.Q_used if Q is None else Q
    a = cert.alpha
    semi = p.seminorm().holder_seminorm
    tau = (3.0 + 2.0 * cert.L) * semi * d_g ** a
    pts = orbit_g.as_array()
    xi_on = xi(pts) if xi is not None else 0.0
    eta = float(np.mean(p(pts) - Q + xi_on))
    pen = cert.C * semi * d_g ** (a / 2.0)
    rho = None
    if d_g > 0 and tau > eta and pen > 0:
        rho = (pen / (tau - eta)) ** (-1.0 / a)
    u = sub.as_potential()

    def Psi_g(x):
        x = np.asarray(x, dtype=float)
        v = p(x) - Q + u(x) - u(dyn.evaluate(map_g, x))
        if xi is not None:
            v = v + xi(x)
        if pen > 0:
            d = distance(x[..., None], pts, orbit_g.circle, orbit_g.hi - orbit_g.lo).min(axis=-1)
            v = v - pen * d ** a
        return v

    return DefectCheckInput(tau, eta, rho, Psi_g, float(d_g), pen)


def forward_orbit(m: MapSpec, x0, n: int) -> np.ndarray:
    """n forward points from x0; exact integer arithmetic for doubling with rational x0."""
    if m.family == "doubling" and isinstance(x0, Fraction):
        q, k = x0.denominator, x0.numerator % x0.denominator
        if q < 3_000_000_000:
            return dyn.doubling_orbit_exact([k], n, q)[0]
        out, v = np.empty(n), k
        for j in range(n):
            out[j] = v / q
            v = (2 * v) % q
        return out
    out = np.empty(n)
    x = float(x0)
    for j in range(n):
        out[j] = x
        x = dyn.evaluate(m, x)
    return out


def defect_check(map_g: MapSpec, sub: SubAction, orbit_g: PeriodicOrbit, inp: DefectCheckInput,
                 x0, n_steps: int, tol_numeric: float = 1e-3):
    """((1/n) S_n Psi_g(x0), avg <= eta + tol_numeric)."""
    pts = forward_orbit(map_g, x0, n_steps)
    avg = float(np.mean(inp.Psi_g(pts)))
    return avg, bool(avg <= inp.eta + tol_numeric)


# ---------------------------------------------------------- empirical locking

def random_xi(rng: np.random.Generator, bud: PerturbationBudget, lo: float, hi: float,
              alpha: float, circle: bool, degree: int = XI_DEGREE) -> Trig:
    """Random trigonometric polynomial rescaled into the budget's Hölder and sup balls."""
    a = rng.uniform(-1.0, 1.0, degree)
    b = rng.uniform(-1.0, 1.0, degree)
    base = Trig(tuple(a), tuple(b), alpha, lo, hi, circle)
    rep = base.seminorm()
    s = min(bud.xi_seminorm_max / rep.holder_seminorm, bud.xi_sup_max / rep.sup_norm)
    return base.scaled(s)


@dataclass
class LockTestResult:
    lock_rate: float
    failures: list
    samples: int
    seed: int


def empirical_lock_test(map_g: MapSpec, p: Potential, expected: PeriodicOrbit, max_period: int,
                        samples: int, bud: PerturbationBudget, seed: int = 0,
                        orbits: Sequence[PeriodicOrbit] | None = None,
                        penalty_orbit: PeriodicOrbit | None = None) -> LockTestResult:
    """Fraction of random admissible perturbations keeping ``expected`` as the argmax orbit."""
    if samples < 1:
        raise InvalidInput("samples must be >= 1")
    failures = []
    try:
        if orbits is None:
            orbits = enumerate_periodic(map_g, max_period)
        orbits = [o for o in orbits if o.period <= max_period]
    except ErgolockError as exc:
        return LockTestResult(0.0, [(i, f"enumeration: {exc}") for i in range(samples)], samples, seed)
    pen_orbit = expected if penalty_orbit is None else penalty_orbit
    phi_pen = p
    if bud.penalty_scale > 0:
        phi_pen = p + distance_potential(pen_orbit, p.alpha, bud.penalty_scale)
    base = orbit_averages(orbits, phi_pen)
    zero = bud.xi_seminorm_max == 0.0 or bud.xi_sup_max == 0.0
    ok = 0
    for i in range(samples):
        avg = base
        if not zero:
            rng = np.random.default_rng([seed, i])
            xi = random_xi(rng, bud, map_g.lo, map_g.hi, p.alpha, map_g.circle)
            avg = base + orbit_averages(orbits, xi)
        j = select_maximizing(orbits, avg)
        if same_orbit(orbits[j], expected, 1e-8):
            ok += 1
        else:
            failures.append((i, orbits[j].itinerary, float(avg[j])))
    return LockTestResult(ok / samples, failures, samples, seed)


def competitor_margin(orbits: Sequence[PeriodicOrbit], p: Potential, expected: PeriodicOrbit):
    """(average of expected, best competing average, margin between them)."""
    avg = orbit_averages(orbits, p)
    mine = [i for i, o in enumerate(orbits) if same_orbit(o, expected, 1e-8)]
    if not mine:
        raise InvalidInput("expected orbit not among the enumerated orbits")
    others = np.delete(avg, mine)
    best_other = float(np.max(others)) if others.size else -math.inf
    return float(avg[mine[0]]), best_other, float(avg[mine[0]] - best_other)


# ------------------------------------------------------------------- scans

STATUS_OK, STATUS_TIE, STATUS_FAILED, STATUS_DEGENERATE = "ok", "tie", "failed", "degenerate"


@dataclass
class ScanTable:
    a_values: np.ndarray
    theta_values: np.ndarray
    period: np.ndarray
    itinerary: np.ndarray
    average: np.ndarray
    status: np.ndarray
    locked: np.ndarray
    base_point: np.ndarray
    theta_periodic: bool = True

    def rows(self):
        for i, a in enumerate(self.a_values):
            for j, t in enumerate(self.theta_values):
                yield (float(a), float(t), int(self.period[i, j]), str(self.itinerary[i, j]),
                       float(self.average[i, j]), bool(self.locked[i, j]), str(self.status[i, j]))

    def well_defined_fraction(self) -> float:
        return float(np.mean(self.status == STATUS_OK))

    def intervals(self) -> list:
        """Contiguous same-orbit runs along theta: (a, theta_start, theta_end, period, itinerary)."""
        out = []
        for i, a in enumerate(self.a_values):
            j = 0
            nt = len(self.theta_values)
            while j < nt:
                key = (self.period[i, j], self.itinerary[i, j])
                k = j
                while k + 1 < nt and (self.period[i, k + 1], self.itinerary[i, k + 1]) == key:
                    k += 1
                if self.status[i, j] in (STATUS_OK, STATUS_TIE):
                    out.append((float(a), float(self.theta_values[j]), float(self.theta_values[k]),
                                int(key[0]), str(key[1])))
                j = k + 1
        return out


def _scan_row(a, map_family, potential_family, thetas, max_period):
    nt = len(thetas)
    per = np.zeros(nt, dtype=int)
    itin = np.empty(nt, dtype=object)
    itin[:] = ""
    avg = np.full(nt, np.nan)
    base = np.full(nt, np.nan)
    status = np.empty(nt, dtype=object)
    try:
        m = map_family(a)
        orbits = enumerate_periodic(m, max_period)
        if not orbits:
            raise ErgolockError("no orbits")
    except (ErgolockError, ValueError):
        status[:] = STATUS_FAILED
        return per, itin, avg, base, status
    for j, t in enumerate(thetas):
        try:
            p = potential_family(t)
            if p.seminorm().holder_seminorm == 0.0:
                status[j] = STATUS_DEGENERATE
                continue
            av = orbit_averages(orbits, p)
            k = select_maximizing(orbits, av)
            per[j], itin[j], avg[j], base[j] = orbits[k].period, orbits[k].itinerary, av[k], orbits[k].base_point
            status[j] = STATUS_TIE if len(tied_indices(av)) > 1 else STATUS_OK
        except (ErgolockError, ValueError):
            status[j] = STATUS_FAILED
    return per, itin, avg, base, status


def locking_scan(map_family: Callable[[float], MapSpec], potential_family: Callable[[float], Potential],
                 a_values: Sequence[float], theta_values: Sequence[float], max_period: int = 12,
                 threads: int = 1, theta_periodic: bool = True) -> ScanTable:
    """Argmax orbit over an (a, theta) grid with a 4-neighbor agreement flag."""
    A = np.asarray(a_values, dtype=float)
    T = np.asarray(theta_values, dtype=float)
    if A.size == 0 or T.size == 0:
        raise InvalidInput("scan grids must be nonempty")
    work = lambda a: _scan_row(a, map_family, potential_family, T, max_period)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(work, A))
    else:
        rows = [work(a) for a in A]
    per = np.stack([r[0] for r in rows])
    itin = np.stack([r[1] for r in rows])
    avg = np.stack([r[2] for r in rows])
    base = np.stack([r[3] for r in rows])
    status = np.stack([r[4] for r in rows])
    good = (status == STATUS_OK) | (status == STATUS_TIE)
    na, nt = per.shape
    locked = good.copy()
    for i in range(na):
        for j in range(nt):
            if not good[i, j]:
                continue
            key = (per[i, j], itin[i, j])
            nbrs = [(i - 1, j), (i + 1, j)]
            if theta_periodic and nt > 1:
                nbrs += [(i, (j - 1) % nt), (i, (j + 1) % nt)]
            else:
                nbrs += [(i, j - 1), (i, j + 1)]
            for ii, jj in nbrs:
                if 0 <= ii < na and 0 <= jj < nt and (ii, jj) != (i, j):
                    if not good[ii, jj] or (per[ii, jj], itin[ii, jj]) != key:
                        locked[i, j] = False
                        break
    return ScanTable(A, T, per, itin, avg, status, locked, base, theta_periodic)
