"""Linear signature regression of the running maximum at increasing truncation levels."""
import argparse

import numpy as np

from levysig.calculus import SigModelParams
from levysig.levy import primary_process_triplet
from levysig.market import SimulationGrid, simulate_model_direct, simulate_primary
from levysig.signature import marcus_signature
from levysig.valuation import fit_path_functional


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=1000)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--max-level", type=int, default=4)
    ap.add_argument("--seed", type=int, default=10)
    args = ap.parse_args()

    tr = primary_process_triplet([(0.5, 1.0), (-0.3, 2.0)], 2)
    p = SigModelParams(1.0, {(): 0.3}, {(): 0.4}, K=2)
    rng = np.random.default_rng(args.seed)
    grid = SimulationGrid(1.0, args.steps)
    paths = []
    for _ in range(args.paths):
        primary = simulate_primary(tr, grid, rng=rng)
        paths.append(simulate_model_direct(p, primary, marcus_signature(primary, 1)))
    y = [float(np.max(x.component(1))) for x in paths]
    print(f"target variance {np.var(y):.4e}")
    for level in range(1, args.max_level + 1):
        _, residual = fit_path_functional(paths, y, level)
        print(f"level {level}: rms residual {residual:.4e}")


if __name__ == "__main__":
    main()
