"""Certified versus exploratory locking radii.

Certified mode draws perturbations inside the budget derived from the
constant ledger and expects lock_rate 1.  Exploratory mode scales the
sup-norm budget as a multiple of the competitor margin and records where
random perturbations first dislodge the maximizing orbit, which shows how
conservative the certified budget is.
"""
from __future__ import annotations

import argparse
import math
from dataclasses import dataclass, field

import numpy as np

from ergolock import dynamics as dyn
from ergolock.locking import (PerturbationBudget, budget, certificate, competitor_margin,
                              empirical_lock_test)
from ergolock.orbits import enumerate_periodic, make_orbit
from ergolock.potentials import Cosine, distance_potential
from ergolock.subaction import compute_subaction


@dataclass
class LockConfig:
    samples: int = 200
    seed: int = 0
    max_period: int = 10
    d_g: float = 1e-12
    multiples: list = field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0])


def _exploratory(g, p, orb, orbits, margin, cfg, semi_cap=math.inf):
    print(f"{'xi_sup / margin':>16} {'lock_rate':>10}")
    first_fail = None
    for mult in cfg.multiples:
        bud = PerturbationBudget(semi_cap, mult * margin, 0.0, math.inf)
        res = empirical_lock_test(g, p, orb, cfg.max_period, cfg.samples, bud, cfg.seed, orbits)
        print(f"{mult:16.3g} {res.lock_rate:10.3f}")
        if first_fail is None and res.lock_rate < 1.0:
            first_fail = mult
    return first_fail


def run(cfg: LockConfig):
    print("== doubling map, phi = cos 2 pi x, maximizing orbit {0}")
    m, p = dyn.doubling(), Cosine(0.0, 1.0)
    sub = compute_subaction(m, p, n=4096)
    semi = p.seminorm().holder_seminorm
    cert = certificate(1.0, 0.5, 2.0, max(1.0, sub.seminorm_ratio), 2.0, 1.0, 1, 1.0)
    bud = budget(cert, semi, cfg.d_g)
    orb = make_orbit(m, 0.0, 1)
    orbits = enumerate_periodic(m, cfg.max_period)
    res = empirical_lock_test(m, p, orb, cfg.max_period, cfg.samples, bud, cfg.seed, orbits)
    print(f"certificate C = {cert.C:.6g} (L = {cert.L:.4g}), d_g = {cfg.d_g:g}")
    print(f"certified budget: xi_seminorm_max = {bud.xi_seminorm_max:.4g}, "
          f"xi_sup_max = {bud.xi_sup_max:.4g}, penalty_scale = {bud.penalty_scale:.4g}")
    print(f"certified lock_rate = {res.lock_rate:.3f} over {cfg.samples} samples")
    _, best, margin = competitor_margin(orbits, p, orb)
    print(f"competitor margin = {margin:.6g}")
    fail = _exploratory(m, p, orb, orbits, margin, cfg)
    if fail is not None:
        print(f"first failure at xi_sup = {fail:g} x margin, "
              f"{fail * margin / bud.xi_sup_max:.3g} times the certified sup budget")

    print("\n== logistic a = 3.2, phi = -d(., O2) for the attracting 2-cycle")
    g = dyn.logistic(3.2)
    orbits = enumerate_periodic(g, cfg.max_period)
    two = [o for o in orbits if o.period == 2][0]
    q = distance_potential(two, 1.0, 1.0)
    _, best, margin = competitor_margin(orbits, q, two)
    print(f"competitor margin = {margin:.6g} (best competitor average {best:.6g})")
    _exploratory(g, q, two, orbits, margin, cfg)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-period", type=int, default=10)
    ap.add_argument("--d-g", type=float, default=1e-12)
    a = ap.parse_args()
    run(LockConfig(a.samples, a.seed, a.max_period, a.d_g))


if __name__ == "__main__":
    main()
