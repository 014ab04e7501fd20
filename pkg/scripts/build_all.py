"""Build and certify a batch of instances, one directory each.

    python scripts/build_all.py --out runs --seeds 1 2 3 --shapes 2,4 2,5 3,5

Writes runs/k{k}_n{n}_s{seed}/{fan,pipeline,certificate}.json and prints
one summary line per instance.
"""

import argparse
import contextlib
import io
import json
import sys
from pathlib import Path

from tropicap import cli


def shape(text: str) -> tuple[int, int]:
    k, n = text.split(",")
    return int(k), int(n)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs"))
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    p.add_argument("--shapes", type=shape, nargs="+", default=[(2, 4), (2, 5), (3, 5)])
    args = p.parse_args(argv)
    worst = 0
    for k, n in args.shapes:
        for seed in args.seeds:
            where = args.out / f"k{k}_n{n}_s{seed}"
            quiet = io.StringIO()
            with contextlib.redirect_stdout(quiet):
                code = cli.main(["build", "--k", str(k), "--n", str(n), "--seed", str(seed), "--out", str(where)])
                if code == 0:
                    code = cli.main(["certify", str(where / "pipeline.json"), "--out", str(where / "certificate.json")])
            status = "failed"
            if (where / "certificate.json").exists() and code in (0, 1):
                cert = json.loads((where / "certificate.json").read_text())
                sq = cert["degrees"]["omega_sq"]
                sign = "n/a" if sq is None else ("> 0" if not sq.startswith(("-", "0")) else "<= 0")
                status = f"{cert['status']} n_plus={cert['inertia']['n_plus']} deg(w^2) {sign}"
            print(f"k={k} n={n} seed={seed} exit={code} {status}")
            worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
