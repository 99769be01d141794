#!/usr/bin/env python3
"""Find the pi/2 duration that hits a target benchmarked fidelity.

Bisects the deterministic noiseless fidelity-vs-duration curve, prints the
sweep it explored, then cross-checks that error per Clifford is linear in
gate duration (it should double when the gate does, since decoherence per
gate scales with exposure time).
"""

import argparse
import sys

from qnl.cliffords import PulseSettings
from qnl.dynamics import CoherenceParams
from qnl.errors import QnlError
from qnl.rb import RBConfig, calibrate_duration, run_rb


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target-pct", type=float, default=99.849,
                    help="target fidelity in percent (default 99.849)")
    ap.add_argument("--t1-us", type=float, default=8.66)
    ap.add_argument("--t2-us", type=float, default=9.08)
    ap.add_argument("--bracket-ns", type=float, nargs=2, default=(10.0, 40.0),
                    metavar=("LOW", "HIGH"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    coherence = CoherenceParams(t1=args.t1_us * 1e-6, t2=args.t2_us * 1e-6)
    config = RBConfig(coherence=coherence, seed=args.seed)

    try:
        cal = calibrate_duration(args.target_pct / 100.0, config,
                                 bracket=(args.bracket_ns[0] * 1e-9,
                                          args.bracket_ns[1] * 1e-9),
                                 n_jobs=args.jobs)
    except QnlError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return 1

    print("duration sweep:")
    for duration, fidelity in cal.sweep:
        print(f"  {duration * 1e9:8.3f} ns   F = {100 * fidelity:.4f}%")
    print(f"\ncalibrated pi/2 duration: {cal.duration * 1e9:.3f} ns")
    print(f"fidelity there: {100 * cal.fidelity:.4f}% "
          f"(target {args.target_pct:.4f}%)")

    print("\nlinearity check (error per Clifford should double with duration):")
    prev = None
    for duration in (10e-9, 20e-9, 40e-9):
        cfg = RBConfig(lengths=(2, 4, 8, 16, 32, 64, 128, 256), n_sequences=12,
                       shots=2000, coherence=coherence, seed=0,
                       pulses=PulseSettings(duration=duration))
        eps = run_rb(cfg, n_jobs=args.jobs).error_per_clifford
        ratio = "" if prev is None else f"   ratio vs previous: {eps / prev:.3f}"
        print(f"  {duration * 1e9:5.1f} ns   eps = {100 * eps:.4f}%{ratio}")
        prev = eps
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
