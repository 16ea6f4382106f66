"""Hedged versus unhedged terminal variance for a few signature payoffs."""
import argparse

from levysig.calculus import SigModelParams
from levysig.levy import primary_process_triplet
from levysig.valuation import hedge_pnl_mc, price_sig_payoff

PAYOFFS = [(1,), (1, 1), (-1, 1), (1, -1, 1)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    tr = primary_process_triplet([(-0.5, 2.0)], 3)
    p = SigModelParams(1.0, {(): 0.2}, {(): 0.1}, K=3)
    print(f"{'payoff':<10}{'price':>12}{'unhedged':>14}{'hedged':>14}{'ratio':>10}")
    for w in PAYOFFS:
        price = price_sig_payoff(w, p, tr, 1.0)
        u, h = hedge_pnl_mc(w, p, tr, 1.0, args.paths, args.steps, args.seed)
        ratio = h / u if u > 0 else float("nan")
        print(f"{'.'.join(map(str, w)):<10}{price:>12.6f}{u:>14.4e}{h:>14.4e}{ratio:>10.4f}")


if __name__ == "__main__":
    main()
