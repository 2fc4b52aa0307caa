"""Analytic Cs autocorrelation: classical period and quantum revival vs the closed forms.

    python scripts/cs_revival.py [--drop 20.1e-6] [--width 0.28e-6]
"""
import argparse

import numpy as np

from rtm.physics import PhysicalParams, from_scaled, to_scaled
from rtm.revival import analyze, envelope
from rtm.spectrum import Spectrum, classical_period, revival_time_closed_form
from rtm.wavepacket import analytic_autocorrelation, make_gaussian, project


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--drop", type=float, default=20.1e-6, help="[m]")
    ap.add_argument("--width", type=float, default=0.28e-6, help="[m]")
    args = ap.parse_args()

    cs = PhysicalParams.preset("cs")
    spectrum = Spectrum.triangular(400)
    z0 = float(to_scaled(args.drop, "length", cs))
    coeffs = project(make_gaussian(z0, float(to_scaled(args.width, "length", cs))), spectrum)
    T1 = classical_period(coeffs.n0_mean, spectrum)
    T2 = float(revival_time_closed_form(spectrum.energy_at(coeffs.n0_mean)))
    times = np.arange(0.0, 1.35 * T2, T1 / 50)
    signal = analytic_autocorrelation(coeffs, spectrum, times)
    report = analyze(signal, T2, classical_period=T1)

    def seconds(t):
        return float(from_scaled(t, "time", cs))

    print(f"n0 = {coeffs.n0_mean:.3f}, width dn = {coeffs.width:.3f}")
    print(f"T1: closed form {seconds(T1) * 1e3:.4f} ms")
    print(f"T2: closed form {seconds(T2):.5f} s, detected {seconds(report.revival_time.value):.5f} "
          f"+- {seconds(report.revival_time.uncertainty):.5f} s")
    env = envelope(signal, T1)
    print("envelope of |C|^2 (every T2/20):")
    for t in np.arange(0.0, 1.3 * T2, T2 / 20):
        level = env[np.searchsorted(times, t)]
        print(f"  {seconds(t):7.3f} s  {level:.3f}  {'#' * int(60 * level)}")


if __name__ == "__main__":
    main()
