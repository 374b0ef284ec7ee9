#!/usr/bin/env python3
"""Generate the bridge parity fixtures from the installed core package.

Writes three files under fixtures/: the bridge config, a hard-rule
config, and parity.json holding 500 warp cases plus 500 detect cases
with the core's expected outputs.
"""

import json
import pathlib

import numpy as np

from tokenmark.detect import DetectorOptions, score
from tokenmark.generate import TokenSequence
from tokenmark.prf import (
    SeedingScheme,
    WatermarkConfig,
    compute_seed,
    partition_vocab,
    seeding_window,
)
from tokenmark.warp import soft_warp

VOCAB = 48
GAMMA = 0.25
DELTA = 2.0
H = 1


def main() -> None:
    out = pathlib.Path(__file__).resolve().parents[1] / "fixtures"
    out.mkdir(exist_ok=True)

    base_cfg = {
        "gamma": GAMMA, "delta": DELTA, "vocab_size": VOCAB,
        "scheme": {"kind": "left_hash", "h": H, "mode": "public", "salt": 0},
    }
    (out / "bridge_config.json").write_text(json.dumps(base_cfg, indent=1))
    (out / "bridge_config_delta0.json").write_text(
        json.dumps({**base_cfg, "delta": 0.0}, indent=1))
    (out / "bridge_config_hard.json").write_text(
        json.dumps({**base_cfg, "gamma": 0.5, "delta": "inf"}, indent=1))

    config = WatermarkConfig(
        gamma=GAMMA, delta=DELTA, vocab_size=VOCAB,
        scheme=SeedingScheme.public(h=H, salt=0))
    rng = np.random.Generator(np.random.PCG64(2024))

    warp_cases = []
    for _ in range(500):
        ctx_len = int(rng.integers(1, 6))
        context = [int(x) for x in rng.integers(0, VOCAB, size=ctx_len)]
        logits = rng.normal(scale=3.0, size=VOCAB)
        window = seeding_window(context, len(context), H)
        mask = partition_vocab(compute_seed(window, config.scheme), GAMMA, VOCAB)
        probs = soft_warp(logits, mask, DELTA)
        warp_cases.append({
            "context": context,
            "logits": [float(x) for x in logits],
            "probs": [float(x) for x in probs],
        })

    detect_cases = []
    for _ in range(500):
        p_len = int(rng.integers(1, 4))
        g_len = int(rng.integers(5, 61))
        prompt = [int(x) for x in rng.integers(0, VOCAB, size=p_len)]
        generated = [int(x) for x in rng.integers(0, VOCAB, size=g_len)]
        rep = score(TokenSequence.make(prompt, generated, VOCAB), config,
                    DetectorOptions())
        detect_cases.append({
            "prompt": prompt,
            "generated": generated,
            "expected": {"z": rep.z, "p": rep.p_one_sided,
                         "green_count": rep.green_count,
                         "t_counted": rep.t_counted},
        })

    payload = {
        "fingerprint": config.fingerprint(),
        "vocab_size": VOCAB,
        "gamma": GAMMA,
        "delta": DELTA,
        "warp_cases": warp_cases,
        "detect_cases": detect_cases,
    }
    (out / "parity.json").write_text(json.dumps(payload))
    print(f"wrote {out / 'parity.json'} "
          f"({len(warp_cases)} warp + {len(detect_cases)} detect cases)")


if __name__ == "__main__":
    main()
