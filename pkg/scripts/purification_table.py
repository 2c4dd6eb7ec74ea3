"""Mean number of purification rounds until 1 - |R| < epsilon.

Prints the Monte Carlo estimate next to the exact Markov-chain mean and the
rounded reference values, for the nine fresh-pulse purities 0.9 ... 0.1.
"""
import argparse
import time

from catlink.qubit import expected_steps_exact, mean_steps

REFERENCE = {0.9: 5, 0.8: 7, 0.7: 10, 0.6: 14, 0.5: 23, 0.4: 37, 0.3: 66, 0.2: 154, 0.1: 609}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=1e-5)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    print(f"{'r':>4} {'MC mean':>9} {'SE':>6} {'exact':>9} {'ref':>5} {'|MC-ref|/SE':>11}")
    t0 = time.perf_counter()
    for r, ref in REFERENCE.items():
        nbar, se = mean_steps(r, args.epsilon, args.trials, seed=args.seed)
        exact = expected_steps_exact(r, args.epsilon)
        print(f"{r:4.1f} {nbar:9.3f} {se:6.3f} {exact:9.4f} {ref:5d} {abs(nbar - ref) / se:11.2f}")
    print(f"elapsed {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
