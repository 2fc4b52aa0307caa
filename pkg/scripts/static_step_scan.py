"""Scan a 100 nm step with the analytic engine and print true vs reconstructed heights.

    python scripts/static_step_scan.py [--step 100e-9] [--points 8] [--jobs 4]
"""
import argparse

import numpy as np

from rtm.config import config_from_dict
from rtm.scan import SurfaceProfile, run_static_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--step", type=float, default=100e-9, help="step height [m]")
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--spacing", type=float, default=1e-6, help="[m]")
    ap.add_argument("--jobs", type=int, default=4)
    args = ap.parse_args()

    x = np.arange(args.points) * args.spacing
    edge = x[args.points // 2]
    profile = SurfaceProfile(x, np.where(x >= edge, args.step, 0.0))
    report = run_static_scan(profile, config_from_dict({}), jobs=args.jobs)
    print(f"{'x [um]':>8} {'h true [nm]':>12} {'h rec [nm]':>12} {'T2 [s]':>10}")
    for i, xi in enumerate(x):
        print(f"{xi * 1e6:8.2f} {profile.h[i] * 1e9:12.3f} {report.reconstructed.h[i] * 1e9:12.3f} "
              f"{report.per_point[i].T2:10.5f}")


if __name__ == "__main__":
    main()
