"""Wall-clock time of each pipeline stage for a few seeds.

    python scripts/timings.py --k 2 --n 4 --seeds 1 2 3 [--trials 10000]
"""

import argparse
import time

from tropicap import convexity, ratlin
from tropicap.construction import build_base, perturb_and_rebalance, witness_pair
from tropicap.tropical import product_with_lineality


def clock(fn, *args, **kwargs):
    t = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--trials", type=int, default=0, help="cap-search trials per fan (0 skips the search)")
    args = p.parse_args(argv)
    print("seed   base  perturb  matrix  witness    caps  attempts  n_plus")
    for seed in args.seeds:
        state, t_base = clock(build_base, args.n - args.k + 2, seed)
        log: dict = {}
        f2, t_pert = clock(perturb_and_rebalance, state.cover, seed, psi=state.psi, log=log)
        m, t_mat = clock(convexity.intersection_matrix, f2)
        _, t_wit = clock(convexity.hodge_witness, f2, *witness_pair(state))
        t_caps = 0.0
        if args.trials:
            fk = product_with_lineality(f2, args.k - 2)
            _, t_caps = clock(convexity.find_supporting_cap, fk, fk.ambient_dim - fk.dim, args.trials, seed)
        plus = ratlin.inertia(m).n_plus
        print(
            f"{seed:4d} {t_base:6.2f} {t_pert:8.2f} {t_mat:7.2f} {t_wit:8.2f} {t_caps:7.2f}"
            f" {log.get('attempts', 0):9d} {plus:7d}"
        )


if __name__ == "__main__":
    main()
