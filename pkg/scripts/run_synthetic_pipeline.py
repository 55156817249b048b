"""Run synth -> index -> pca -> analyses through the command line entry point.

Usage: python scripts/run_synthetic_pipeline.py OUT_DIR [--seed N] [--small]
"""
import argparse
import sys
from pathlib import Path

from rsindex.cli import main


def steps(out: Path, seed: int, small: bool):
    size = ["--n-regions", "12", "--n-months", "36", "--regions-per-batch", "6"] if small else []
    inp = {k: out / f"{k}.csv" for k in ("sales", "adjacency", "regions", "covariates", "words", "cpi")}
    scores, panel = out / "scores.csv", out / "panel.csv"
    return [
        ["synth", *size, "--seed", seed],
        ["index", "--sales", inp["sales"], "--adjacency", inp["adjacency"], "--regions", inp["regions"]],
        ["pca", "--components", 3],
        ["analyze", "city-means", "--scores", scores, "--regions", inp["regions"], "--sales", inp["sales"]],
        ["analyze", "covariate-corr", "--scores", scores, "--covariates", inp["covariates"]],
        ["analyze", "word-corr", "--scores", scores, "--words", inp["words"]],
        ["analyze", "composite", "--panel", panel, "--scores", scores, "--top-n", 3 if small else 5],
        ["analyze", "deflate", "--panel", panel, "--region", "SA2_0000", "--cpi", inp["cpi"]],
        ["analyze", "overlay", "--panel", panel, "--region", "SA2_0000", "--start-a", "2000-01",
         "--start-b", "2001-01", "--horizon", 1],
    ]


def run(out: Path, seed: int = 0, small: bool = False) -> int:
    out.mkdir(parents=True, exist_ok=True)
    for step in steps(out, seed, small):
        k = 2 if step[0] == "analyze" else 1
        code = main([str(a) for a in [*step[:k], "--out", out, *step[k:]]])
        if code:
            return code
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--small", action="store_true", help="12 regions x 36 months instead of 50 x 120")
    a = ap.parse_args()
    sys.exit(run(a.out, a.seed, a.small))
