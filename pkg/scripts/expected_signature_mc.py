"""Compare Monte Carlo signature moments of the primary process with the closed form."""
import argparse
import time

import numpy as np

from levysig.levy import expected_signature, primary_process_triplet
from levysig.market import BatchSimulator, SimulationGrid, mc_moments
from levysig.tensor import words_up_to


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--level", type=int, default=4)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    atoms = [(1.0, 0.5), (-0.5, 1.0)]
    tr = primary_process_triplet(atoms, 2)
    sim = BatchSimulator(atoms, 2, SimulationGrid(1.0, args.steps), brownian=True, x_level=args.level)
    start = time.perf_counter()
    mean, se, n = mc_moments(lambda P, r: sim.run(P, r).x_flat, args.paths, args.seed, threads=args.threads)
    elapsed = time.perf_counter() - start
    exact = expected_signature(tr, 1.0, args.level).flat()

    live = se > 1e-12 * np.maximum(1.0, np.abs(exact))
    z = np.zeros_like(mean)
    z[live] = (mean[live] - exact[live]) / se[live]
    print(f"{n} paths in {elapsed:.1f}s; {np.mean(np.abs(z[live]) <= 3):.4f} of {live.sum()} words within 3 SE")
    worst = np.argsort(-np.abs(z))[:10]
    words = list(words_up_to(tr.letters, args.level))
    print(f"{'word':<16}{'exact':>14}{'mc':>14}{'z':>8}")
    for i in worst:
        print(f"{'.'.join(map(str, words[i])) or '@':<16}{exact[i]:>14.6f}{mean[i]:>14.6f}{z[i]:>8.2f}")


if __name__ == "__main__":
    main()
