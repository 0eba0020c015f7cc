#!/usr/bin/env python3
"""End-to-end desk-scale experiment: generate a corpus, label it, train both
predictors, then replay all scenarios and the predictor ablation.

Everything runs against the deterministic mock backend; the whole pipeline
takes a couple of minutes and writes its artifacts under ./pipeline_out/.

Usage: python3 scripts/run_pipeline.py [--out DIR] [--sessions N] [--seed N]
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from diffusionx.cli import main as bench


def run(*args: str) -> None:
    print(f"\n$ bench {' '.join(args)}")
    code = bench(list(args))
    if code != 0:
        sys.exit(code)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="pipeline_out")
    parser.add_argument("--sessions", type=int, default=400)
    parser.add_argument("--train-sessions", type=int, default=1000)
    parser.add_argument("--epochs", type=int, default=60)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = out / "dataset.jsonl"
    train_ds = out / "train_sessions.jsonl"
    pairs = out / "pairs.jsonl"
    labels = out / "labels.jsonl"
    edge_w, cloud_w = out / "edge.weights", out / "cloud.weights"

    run("gen-dataset", "--out", str(train_ds), "--sessions", str(args.train_sessions),
        "--rounds", "3", "--seed", str(args.seed), "--emit-pairs", str(pairs))
    run("gen-dataset", "--out", str(dataset), "--sessions", str(args.sessions),
        "--rounds", "3", "--seed", str(args.seed + 1))
    run("label", "--pairs", str(pairs), "--out", str(labels), "--seed", str(args.seed))
    run("train", "--pairs", str(pairs), "--labels", str(labels), "--tier", "edge",
        "--out", str(edge_w), "--epochs", str(args.epochs))
    run("train", "--pairs", str(pairs), "--labels", str(labels), "--tier", "cloud",
        "--out", str(cloud_w), "--epochs", str(max(5, args.epochs // 4)))
    run("replay", "--dataset", str(dataset), "--scenario", "all", "--predictor", "on",
        "--seed", "0", "--edge-weights", str(edge_w), "--cloud-weights", str(cloud_w),
        "--report", str(out / "scenarios.json"), "--log", str(out / "scenarios.log.jsonl"))
    run("replay", "--dataset", str(dataset), "--scenario", "ablation",
        "--seed", "0", "--edge-weights", str(edge_w), "--cloud-weights", str(cloud_w),
        "--report", str(out / "ablation.json"), "--log", str(out / "ablation.log.jsonl"))
    print(f"\nartifacts in {out}/")


if __name__ == "__main__":
    main()
