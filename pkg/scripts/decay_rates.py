"""Fit exponential decay rates of ||B_t||_2 across block families.

For a convergent block (om_-, om_+, b) the distance-to-limit decays like
exp(-2 (omInf_- + omInf_+) t), so the fitted rate should match twice the
sum of the limit frequencies. Prints measured vs predicted for a sweep.

Usage: python3 scripts/decay_rates.py [--t-end 8] [--tol 1e-10]
"""

import argparse

import numpy as np

from bwflow import analytic, flow

FAMILIES = [
    (1.0, 2.0, 0.5),
    (1.0, 2.0, 0.25),
    (2.0, 2.0, 0.5),
    (2.0, 3.0, 1.0),
    (0.5, 4.0, 0.5),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=8.0)
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args()

    print(f"{'block':<22} {'fitted rate':>12} {'2(w-+w+) at limit':>18} "
          f"{'rel err':>9}")
    for om_minus, om_plus, b in FAMILIES:
        spec = analytic.block_spec([(om_minus, om_plus, b)])
        traj = flow.integrate(spec, args.t_end, flow.Controls(tol=args.tol))
        fit = flow.decay_fit(traj)
        limit = analytic.exact_limit_block([(om_minus, om_plus, b)])
        predicted = 2.0 * float(np.trace(limit.mat).real)
        rel = abs(fit.rate - predicted) / predicted
        print(f"({om_minus:g}, {om_plus:g}, {b:g})"
              f"{'':<{22 - len(f'({om_minus:g}, {om_plus:g}, {b:g})')}}"
              f" {fit.rate:>12.6f} {predicted:>18.6f} {rel:>9.2e}")


if __name__ == "__main__":
    main()
