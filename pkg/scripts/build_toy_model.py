#!/usr/bin/env python3
"""Build the desk-scale assets: synthetic corpus, trained model, config.

Writes corpus.txt, model.json, config.json, and prompts.jsonl into the
output directory; everything downstream (generate/detect/sweep/attack)
runs off these files.
"""

import argparse
import json
import pathlib

import numpy as np

from tokenmark.cli import main as cli
from tokenmark.sources import load_model


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="runs/toy")
    ap.add_argument("--tokens", type=int, default=200_000)
    ap.add_argument("--order", type=int, default=3)
    ap.add_argument("--smoothing", type=float, default=0.05)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--delta", type=float, default=2.0)
    ap.add_argument("--n-prompts", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = str(out / "corpus.txt")
    model = str(out / "model.json")
    assert cli(["make-corpus", "--tokens", str(args.tokens),
                "--seed", str(args.seed), "--out", corpus]) == 0
    assert cli(["train-lm", "--corpus", corpus, "--n", str(args.order),
                "--smoothing", str(args.smoothing), "--out", model]) == 0

    config = {
        "gamma": args.gamma,
        "delta": args.delta,
        "scheme": {"kind": "left_hash", "h": 1, "mode": "public", "salt": 0},
        "decode": {"strategy": "multinomial", "max_tokens": 200, "seed": 0},
    }
    (out / "config.json").write_text(json.dumps(config, indent=1))

    lm, tokenizer = load_model(model)
    ids = tokenizer.encode((out / "corpus.txt").read_text())
    rng = np.random.Generator(np.random.PCG64(args.seed + 1))
    with open(out / "prompts.jsonl", "w") as f:
        for _ in range(args.n_prompts):
            start = int(rng.integers(0, len(ids) - 4))
            f.write(json.dumps({"prompt": ids[start:start + 3]}) + "\n")
    print(f"assets ready under {out}/ (vocab {lm.vocab_size})")


if __name__ == "__main__":
    main()
