#!/usr/bin/env python3
"""Regenerate the frozen PRF golden vectors.

Run once against a known-good build; the JSON output is committed under
src/tokenmark/fixtures/ and the test suite asserts bit-exact equality
forever after.  Do not regenerate casually: any change to the seed
layout is a breaking format change and must bump PRF_LAYOUT_VERSION.
"""

import json
import pathlib

from tokenmark.prf import (
    PRF_LAYOUT_VERSION,
    SeedKind,
    SeedingScheme,
    WatermarkKey,
    balanced_multikey_masks,
    compute_seed,
    partition_vocab,
    self_hash_seed,
)

PRIVATE_KEY_HEX = "000102030405060708090a0b0c0d0e0f"


def main() -> None:
    out = {"layout_version": PRF_LAYOUT_VERSION, "cases": []}

    pub1 = SeedingScheme.public(h=1, salt=0)
    pub2 = SeedingScheme.public(h=2, salt=0)
    pub_salted = SeedingScheme.public(h=1, salt=12345)
    priv = SeedingScheme.private(WatermarkKey(bytes.fromhex(PRIVATE_KEY_HEX)), h=3)

    for name, scheme, context in [
        ("public_salt0_h1_ctx7", pub1, [7]),
        ("public_salt0_h1_ctx0", pub1, [0]),
        ("public_salt0_h2", pub2, [1, 2]),
        ("public_salt12345_h1", pub_salted, [7]),
        ("private_h3", priv, [5, 6, 7]),
    ]:
        out["cases"].append({
            "kind": "left_hash_seed",
            "name": name,
            "h": scheme.h,
            "salt": scheme.salt,
            "key_hex": scheme.key.key_bytes.hex(),
            "context": context,
            "seed": str(compute_seed(context, scheme)),
        })

    sh = SeedingScheme.private(WatermarkKey(bytes.fromhex(PRIVATE_KEY_HEX)),
                               kind=SeedKind.SELF_HASH, h=4)
    seed, i_star = self_hash_seed(9, [3, 1, 4, 1], sh)
    out["cases"].append({
        "kind": "self_hash_seed",
        "name": "private_h4_cand9",
        "key_hex": sh.key.key_bytes.hex(),
        "candidate": 9,
        "context": [3, 1, 4, 1],
        "seed": str(seed),
        "i_star": i_star,
    })

    seed7 = compute_seed([7], pub1)
    mask = partition_vocab(seed7, 0.25, 16)
    out["cases"].append({
        "kind": "partition",
        "name": "partition_v16_g025_from_ctx7",
        "seed": str(seed7),
        "gamma": 0.25,
        "vocab_size": 16,
        "green_ids": [int(i) for i in mask.green_ids()],
    })

    keys = [WatermarkKey(bytes([i]) * 16, key_id=i) for i in range(4)]
    masks = balanced_multikey_masks(keys, seed=42, vocab_size=8)
    out["cases"].append({
        "kind": "multikey",
        "name": "balanced_k4_v8_seed42",
        "seed": 42,
        "vocab_size": 8,
        "key_hexes": [k.key_bytes.hex() for k in keys],
        "masks": [[int(b) for b in m.bits] for m in masks],
    })

    path = pathlib.Path(__file__).resolve().parents[1] / \
        "src" / "tokenmark" / "fixtures" / "prf_golden.json"
    path.write_text(json.dumps(out, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
