"""Gap between direct Euler simulation and the signature representation as the grid is refined."""
import argparse
import math

import numpy as np

from levysig.calculus import SigModelParams
from levysig.levy import primary_process_triplet
from levysig.market import SimulationGrid, coarsen, evaluate_model_from_signature, simulate_model_direct, simulate_primary
from levysig.signature import marcus_signature


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=100)
    ap.add_argument("--fine-steps", type=int, default=800)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    tr = primary_process_triplet([(1.0, 0.5), (-0.5, 1.0)], 3)
    p = SigModelParams(1.0, {(0,): 0.3, (): 0.2}, {(): 0.1, (1,): 0.5}, K=3)
    factors = [f for f in (16, 8, 4, 2, 1) if args.fine_steps % f == 0]
    sq = {f: [] for f in factors}
    for i in range(args.paths):
        fine = simulate_primary(tr, SimulationGrid(1.0, args.fine_steps, args.seed + i))
        for f in factors:
            path = coarsen(fine, args.fine_steps, f)
            sig = marcus_signature(path, p.model_level)
            gap = simulate_model_direct(p, path, sig).component(1) - evaluate_model_from_signature(p, sig)
            sq[f].append(np.mean(gap**2))
    print(f"{'steps':>8}{'rms gap':>14}")
    for f in factors:
        print(f"{args.fine_steps // f:>8}{math.sqrt(np.mean(sq[f])):>14.4e}")


if __name__ == "__main__":
    main()
