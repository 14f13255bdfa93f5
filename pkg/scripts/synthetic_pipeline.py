"""End-to-end run on synthetic data through the CLI.

Generates linked Facebook/YouTube logs, then computes polarization,
bimodality, activity tails with an exponent comparison, correlation
matrices with a Mantel test, and the classifier protocols. Everything
lands in subdirectories of ``--out``.

    python scripts/synthetic_pipeline.py --out runs/demo --quick
"""

import argparse
import sys
from pathlib import Path

from echo_metrics.cli import run

COHORT = ["--mixture", "0.35,0.30,0.35", "--beta", "0.5,20", "--switching", "30",
          "--switching-fraction", "0.5", "--activity-theta", "2.5", "--activity-xmin", "100"]


def step(argv):
    print("echo-metrics", " ".join(argv), flush=True)
    code = run(argv)
    if code:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quick", action="store_true", help="smaller samples and chains")
    args = ap.parse_args()
    o, seed = args.out, str(args.seed)
    users = "1500" if args.quick else "3000"
    iters = ["--iters", "5000", "--burn", "500"] if args.quick else []
    cv_iters = "50" if args.quick else "1000"
    cohort = ["--per-class", "150", "--train", "360", "--test", "90"] if args.quick else []

    for plat, s in (("facebook", args.seed), ("youtube", args.seed + 1)):
        step(["synth", "--out", str(o / f"synth_{plat}"), "--seed", str(s), "--platform", plat,
              "--users", users, "--item-stats", *COHORT])
        step(["polarize", "--out", str(o / f"users_{plat}"),
              "--events", str(o / f"synth_{plat}/events.jsonl")])
        users_csv = str(o / f"users_{plat}/users.csv")
        step(["density", "--out", str(o / f"density_{plat}"), "--values", users_csv])
        step(["bc", "--out", str(o / f"bc_{plat}"), "--values", users_csv])
        step(["ccdf", "--out", str(o / f"ccdf_{plat}"), "--values", users_csv, "--column", "s+c"])

    step(["compare", "--out", str(o / "compare"), "--seed", seed,
          "--values-a", str(o / "users_facebook/users.csv"),
          "--values-b", str(o / "users_youtube/users.csv"),
          "--where-a", "label=science_polarized|conspiracy_polarized",
          "--where-b", "label=science_polarized|conspiracy_polarized", *iters])

    items = str(o / "synth_facebook/items.csv")
    for cat in ("science", "conspiracy"):
        step(["assoc", "matrix", "--out", str(o / f"matrix_{cat}"), "--items", items,
              "--category", cat])
    step(["assoc", "mantel", "--out", str(o / "mantel"), "--seed", seed,
          "--a", str(o / "matrix_science/matrix.csv"),
          "--b", str(o / "matrix_conspiracy/matrix.csv")])

    fb = str(o / "synth_facebook/events.jsonl")
    step(["predict", "sweep", "--out", str(o / "sweep"), "--events", fb, "--seed", seed,
          "--n", "1..100:3", *cohort[:2]])
    step(["predict", "cv", "--out", str(o / "cv"), "--events", fb, "--seed", seed,
          "--iters", cv_iters, *cohort])
    step(["predict", "transfer", "--out", str(o / "transfer"), "--seed", seed,
          "--events", str(o / "synth_youtube/events.jsonl"), "--test-events", fb, *cohort[:2]])
    print(f"done; outputs under {o}")


if __name__ == "__main__":
    main()
