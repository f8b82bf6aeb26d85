"""Locate the numerical blow-up onset for Omega = 0 blocks.

With Omega = 0 and pair strength b the flow diverges at T_max = pi/(16 b).
The integrator flags blow-up a little before that once ||B_t|| passes the
guard factor; this sweep reports the detected onset against T_max and the
a-priori blow-up-free horizon 1/(128 ||B_0||_2).

Usage: python3 scripts/blowup_onset.py [--b 0.5 1 2 4]
"""

import argparse

import numpy as np

from bwflow import analytic, flow
from bwflow.errors import BlowupDetected


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--b", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args()

    print(f"{'b':>6} {'detected t*':>13} {'T_max':>13} {'t*/T_max':>9} "
          f"{'horizon T_0':>12}")
    for b in args.b:
        spec = analytic.block_spec([(0.0, 0.0, b)])
        tmax = analytic.blowup_time(b)
        try:
            flow.integrate(spec, 2.0 * tmax, flow.Controls(tol=args.tol))
        except BlowupDetected as exc:
            ev = exc.event
            print(f"{b:>6g} {ev.t:>13.9f} {tmax:>13.9f} "
                  f"{ev.t / tmax:>9.5f} {ev.t0_lower_bound:>12.3e}")
        else:
            print(f"{b:>6g} {'not detected':>13} {tmax:>13.9f}")


if __name__ == "__main__":
    main()
