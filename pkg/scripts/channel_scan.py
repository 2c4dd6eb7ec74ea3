"""Purity and amplitude of a transmitted pair along the line.

Runs the beam-splitter chain on the Fock density matrix, refits it to the
two-parameter family and compares with the closed-form solution.
"""
import argparse

import numpy as np

from catlink.channel import (
    ChannelSpec,
    ParamState,
    fit_param_state,
    propagate_analytic,
    propagate_discrete,
    to_density_matrix,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=2.0)
    ap.add_argument("--T", type=float, default=0.9, help="transmittance per characteristic length")
    ap.add_argument("--n-steps", type=int, default=4)
    ap.add_argument("--max-length", type=float, default=0.2)
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()

    ps = ParamState.pure(args.alpha)
    rho = to_density_matrix(ps)
    print(f"{'l/L':>6} {'|a_j|':>8} {'r exact':>11} {'r chain':>11} {'residual':>9}")
    for x in np.linspace(0, args.max_length, args.points):
        spec = ChannelSpec(args.T, args.T, 1.0, float(x), args.n_steps)
        exact = propagate_analytic(ps, spec)
        fit = fit_param_state(propagate_discrete(rho, spec), args.alpha)
        print(f"{x:6.3f} {abs(exact.alpha0):8.5f} {exact.r:11.8f} {fit.state.r:11.8f} {fit.residual:9.1e}")


if __name__ == "__main__":
    main()
