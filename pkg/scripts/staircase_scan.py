"""Step table of maximizing orbits for the doubling map and phi = cos 2 pi (x - theta).

Sweeps theta over a uniform grid and prints the plateaus (contiguous theta
runs sharing one maximizing orbit), widest first.  Optionally writes the
full table as CSV.
"""
from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ergolock import dynamics as dyn
from ergolock.config import fmt
from ergolock.locking import locking_scan
from ergolock.potentials import Cosine


@dataclass
class StaircaseConfig:
    n_theta: int = 1001
    max_period: int = 12
    top: int = 15
    csv_path: Path | None = None


def run(cfg: StaircaseConfig):
    m = dyn.doubling()
    thetas = np.linspace(0.0, 1.0, cfg.n_theta, endpoint=False)
    tab = locking_scan(lambda a: m, lambda t: Cosine(t, 1.0), [0.0], thetas, cfg.max_period)
    runs = tab.intervals()
    width = 1.0 / cfg.n_theta
    runs.sort(key=lambda r: -(r[2] - r[1]))
    print(f"{len(runs)} plateaus over {cfg.n_theta} theta values (max_period {cfg.max_period})")
    print(f"{'theta_start':>12} {'theta_end':>12} {'width':>8} {'period':>6}  itinerary")
    for _, t0, t1, per, itin in runs[:cfg.top]:
        print(f"{t0:12.6f} {t1:12.6f} {t1 - t0 + width:8.4f} {per:6d}  {itin}")
    per = tab.period[0]
    print(f"fraction of theta with period-1 maximizer: {np.mean(per == 1):.3f}")
    print(f"fraction with period <= 4: {np.mean(per <= 4):.3f}")
    if cfg.csv_path is not None:
        with open(cfg.csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "period", "itinerary", "birkhoff_avg", "status"])
            for j, t in enumerate(thetas):
                w.writerow([fmt(t), int(per[j]), tab.itinerary[0, j], fmt(float(tab.average[0, j])),
                            tab.status[0, j]])
        print(f"wrote {cfg.csv_path}")
    return tab


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-theta", type=int, default=1001)
    ap.add_argument("--max-period", type=int, default=12)
    ap.add_argument("--top", type=int, default=15)
    ap.add_argument("--csv", type=Path, default=None)
    a = ap.parse_args()
    run(StaircaseConfig(a.n_theta, a.max_period, a.top, a.csv))


if __name__ == "__main__":
    main()
