"""Grid engine vs eigenbasis engine for the Cs packet as the mirror steepens.

Prints max | |C_grid|^2 - |C_analytic|^2 | over three classical periods for
each decay constant (scaled units).  The deviation should fall towards the
hard-wall (triangular-well) limit.

    python scripts/kappa_sweep.py [--size 8192] [--kappas 10 30 100]
"""
import argparse
import math
import time

from rtm.physics import PhysicalParams, to_scaled
from rtm.propagator import PotentialModel, cross_validate, default_grid
from rtm.spectrum import Spectrum
from rtm.wavepacket import make_gaussian


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=8192)
    parser.add_argument("--kappas", type=float, nargs="+", default=[10.0, 30.0, 100.0])
    parser.add_argument("--periods", type=float, default=3.0)
    args = parser.parse_args()

    cs = PhysicalParams.preset("cs")
    z0 = float(to_scaled(20.1e-6, "length", cs))
    width = float(to_scaled(0.28e-6, "length", cs))
    spectrum = Spectrum.triangular(400)
    t_final = args.periods * 2 * math.sqrt(2 * z0)
    print(f"z0={z0:.4f} width={width:.4f} t_final={t_final:.3f} (scaled), grid size {args.size}")
    for kappa in args.kappas:
        potential = PotentialModel(V0=100 * z0, kappa=kappa)
        packet = make_gaussian(z0, width, default_grid(z0, kappa, args.size))
        start = time.time()
        deviation = cross_validate(packet, potential, spectrum, t_final, sample_stride=20)
        print(f"kappa={kappa:g}: max deviation {deviation:.4g}  ({time.time() - start:.0f} s)", flush=True)


if __name__ == "__main__":
    main()
