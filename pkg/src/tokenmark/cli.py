"""Command-line experiment driver.

Subcommands: make-corpus, train-lm, generate, detect, sweep, bounds,
attack, and a stdio bridge for foreign-runtime consumers.  Outputs are
JSONL/JSON/CSV only; plotting is left to external tools.

Exit codes: 0 ok, 2 configuration error, 3 data/source error,
4 nothing scorable.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from importlib import resources

import numpy as np

from . import attacks as atk
from . import bounds as bnd
from .detect import DetectorOptions, p_value, score
from .errors import (
    BudgetError,
    ConfigError,
    DataError,
    EmptyScoreError,
    EncodingError,
    RangeError,
    SizeError,
    SourceError,
    TokenmarkError,
)
from .generate import (
    DecodeSpec,
    TokenSequence,
    beam_generate,
    generate,
    generate_self_hash,
    read_jsonl,
    write_jsonl,
)
from .prf import (
    PRF_LAYOUT_VERSION,
    SeedKind,
    SeedingScheme,
    WatermarkConfig,
    WatermarkKey,
)
from .sources import load_model, make_grammar_corpus, save_model, train_ngram, WordTokenizer
from .textnorm import canonicalize, default_policy, load_policy

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_EMPTY = 4


def _config_schema() -> dict:
    text = resources.files("tokenmark").joinpath(
        "fixtures/config.schema.json").read_text("utf-8")
    return json.loads(text)


def load_config(path: str, vocab_size: int | None = None,
                overrides: dict | None = None) -> WatermarkConfig:
    """Build a WatermarkConfig from a JSON file plus flag overrides."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        import jsonschema

        jsonschema.validate(raw, _config_schema())
    except jsonschema.ValidationError as e:  # type: ignore[attr-defined]
        raise ConfigError(f"config does not match schema: {e.message}") from e
    overrides = overrides or {}
    gamma = overrides.get("gamma", raw["gamma"])
    delta = overrides.get("delta", raw["delta"])
    if delta == "inf":
        delta = math.inf
    sch = raw.get("scheme", {})
    kind = SeedKind(overrides.get("kind", sch.get("kind", "left_hash")))
    h = int(overrides.get("h", sch.get("h", 1)))
    mode = sch.get("mode", "public")
    if mode == "public":
        scheme = SeedingScheme.public(kind=kind, h=h, salt=int(sch.get("salt", 0)))
    else:
        key_hex = sch.get("key_hex")
        if not key_hex:
            raise ConfigError("private mode requires scheme.key_hex")
        key = WatermarkKey(bytes.fromhex(key_hex), key_id=int(sch.get("key_id", 0)))
        scheme = SeedingScheme.private(key, kind=kind, h=h)
    v = vocab_size if vocab_size is not None else raw.get("vocab_size")
    if v is None:
        raise ConfigError("vocab_size missing from config and no model provided")
    return WatermarkConfig(gamma=float(gamma), delta=float(delta),
                           scheme=scheme, vocab_size=int(v))


def _decode_spec(raw: dict, args) -> DecodeSpec:
    d = dict(raw.get("decode", {}))
    if getattr(args, "strategy", None):
        d["strategy"] = args.strategy
    if getattr(args, "max_tokens", None):
        d["max_tokens"] = args.max_tokens
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    if getattr(args, "temperature", None):
        d["temperature"] = args.temperature
    if getattr(args, "temp_after_delta", False):
        d["temp_after_delta"] = True
    return DecodeSpec(**d)


def _read_raw_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _load_prompts(path: str, tokenizer) -> list[list[int]]:
    prompts = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "prompt" in obj:
                prompts.append([int(t) for t in obj["prompt"]])
            elif "text" in obj:
                if tokenizer is None:
                    raise DataError("text prompts need a model with a tokenizer")
                prompts.append(tokenizer.encode(canonicalize(obj["text"])))
            else:
                raise DataError("prompt line needs a 'prompt' or 'text' field")
    if not prompts:
        raise DataError(f"no prompts found in {path}")
    return prompts


def cmd_make_corpus(args) -> int:
    text = make_grammar_corpus(args.tokens, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(text + "\n")
    print(f"wrote {len(text.split())} tokens to {args.out}")
    return EXIT_OK


def cmd_train_lm(args) -> int:
    try:
        with open(args.corpus, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise DataError(f"cannot read corpus: {e}") from e
    text = canonicalize(text)
    tokenizer = WordTokenizer.from_corpus(text)
    ids = tokenizer.encode(text)
    lm = train_ngram([ids], n=args.n, smoothing=args.smoothing,
                     vocab_size=tokenizer.vocab_size)
    save_model(lm, tokenizer, args.out)
    print(f"trained order-{args.n} model, vocab {lm.vocab_size}, -> {args.out}")
    return EXIT_OK


def cmd_generate(args) -> int:
    lm, tokenizer = load_model(args.model)
    raw = _read_raw_config(args.config)
    config = load_config(args.config, vocab_size=lm.vocab_size,
                         overrides=_cfg_overrides(args))
    spec = _decode_spec(raw, args)
    prompts = _load_prompts(args.prompts, tokenizer)
    sequences = []
    t0 = time.time()
    for i, prompt in enumerate(prompts):
        run_spec = spec if spec.seed is None else \
            DecodeSpec(**{**spec.__dict__, "seed": (spec.seed or 0) + i})
        if config.scheme.kind is SeedKind.SELF_HASH:
            seq = generate_self_hash(lm, prompt, config, run_spec)
        else:
            seq = generate(lm, prompt, config, run_spec)
        sequences.append(seq)
    write_jsonl(args.out, sequences, config.fingerprint())
    manifest = {
        "layout_version": PRF_LAYOUT_VERSION,
        "config_fingerprint": config.fingerprint(),
        "n_sequences": len(sequences),
        "decode": {k: (None if v is None else v) for k, v in spec.__dict__.items()},
        "base_seed": spec.seed,
        "runtime_s": round(time.time() - t0, 3),
    }
    with open(args.out + ".manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    print(f"wrote {len(sequences)} sequences to {args.out}")
    return EXIT_OK


def _cfg_overrides(args) -> dict:
    out = {}
    for name in ("gamma", "delta", "h", "kind"):
        v = getattr(args, name, None)
        if v is not None:
            out[name] = v
    return out


def _render_ansi(tokens: TokenSequence, colors: list[str], tokenizer) -> str:
    paint = {"green": "\x1b[42;30m", "red": "\x1b[41;30m",
             "skipped": "\x1b[47;30m", "unscorable": "\x1b[100;37m"}
    reset = "\x1b[0m"
    pieces = []
    for tok, color in zip(tokens.generated, colors):
        word = tokenizer.decode([tok]) if tokenizer else str(tok)
        pieces.append(f"{paint[color]}{word}{reset}")
    prompt_txt = tokenizer.decode(list(tokens.prompt)) if tokenizer else \
        " ".join(map(str, tokens.prompt))
    return prompt_txt + " | " + " ".join(pieces)


def _render_html(tokens: TokenSequence, colors: list[str], tokenizer) -> str:
    css = {"green": "#b6f0b6", "red": "#f0b6b6", "skipped": "#e0e0e0",
           "unscorable": "#c8c8d8"}
    parts = ["<p>"]
    for tok, color in zip(tokens.generated, colors):
        word = tokenizer.decode([tok]) if tokenizer else str(tok)
        parts.append(f'<span style="background:{css[color]}">{word}</span> ')
    parts.append("</p>")
    return "".join(parts)


def cmd_detect(args) -> int:
    tokenizer = None
    vocab_size = None
    if args.model:
        lm, tokenizer = load_model(args.model)
        vocab_size = lm.vocab_size
    config = load_config(args.config, vocab_size=vocab_size,
                         overrides=_cfg_overrides(args))
    opts = DetectorOptions(
        skip_repeated_ngrams=not args.no_skip,
        z_threshold=args.z_threshold,
        min_prefix=args.min_prefix,
    )
    if args.text:
        if tokenizer is None:
            raise DataError("raw-text detection needs --model for the tokenizer")
        with open(args.text, "rb") as f:
            raw = f.read()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise EncodingError(str(e)) from e
        policy = load_policy(args.policy) if args.policy else default_policy()
        ids = tokenizer.encode(canonicalize(text, policy))
        if len(ids) < 2:
            raise EmptyScoreError("text shorter than two tokens")
        sequences = [TokenSequence.make(ids[:1], ids[1:], config.vocab_size)]
    elif args.infile:
        sequences = read_jsonl(args.infile, config.vocab_size)
        if not sequences:
            raise DataError(f"no sequences in {args.infile}")
    else:
        raise DataError("detect needs --in or --text")
    reports = []
    rendered = []
    expected = config.fingerprint()
    for seq in sequences:
        rep = score(seq, config, opts)
        reports.append(rep.to_dict())
        if args.render:
            rendered.append(
                _render_html(seq, rep.colors, tokenizer) if args.render == "html"
                else _render_ansi(seq, rep.colors, tokenizer)
            )
    if args.infile:
        _warn_fingerprints(args.infile, expected)
    payload = reports if len(reports) > 1 else reports[0]
    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=1)
    else:
        json.dump(payload, sys.stdout, indent=1)
        print()
    if args.render:
        out = "\n".join(rendered)
        if args.render_out:
            with open(args.render_out, "w", encoding="utf-8") as f:
                f.write(out + "\n")
        else:
            print(out)
    return EXIT_OK


def _warn_fingerprints(path: str, expected: str) -> None:
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            fp = json.loads(line).get("config_fingerprint", "")
            if fp and fp != expected:
                print(f"warning: sequence fingerprint {fp[:12]}... does not match "
                      f"detector config {expected[:12]}...", file=sys.stderr)
            break


def cmd_bounds(args) -> int:
    report = bnd.build_bound_report(
        gamma=args.gamma,
        delta=math.inf if args.delta == "inf" else float(args.delta),
        t_tokens=args.t,
        s_star=args.s_star,
        z_threshold=args.z_threshold,
        empirical_mean=args.empirical_mean,
    )
    out = json.dumps(report.to_dict(), indent=1)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(out + "\n")
    else:
        print(out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    lm, tokenizer = load_model(args.model)
    with open(args.grid, "r", encoding="utf-8") as f:
        grid = json.load(f)
    raw_cfg = _read_raw_config(args.config)
    rng = np.random.Generator(np.random.PCG64(grid.get("seed", 0)))
    n_seq = int(grid.get("n_sequences", 50))
    t_checkpoints = [int(t) for t in grid.get("t_checkpoints", [50, 100, 200])]
    t_max = max(t_checkpoints)
    prompts = _sweep_prompts(lm, rng, n_seq, grid.get("prompt_len", 3))

    rows = []
    for gamma in grid["gammas"]:
        for delta in grid["deltas"]:
            for strategy in grid["strategies"]:
                config = load_config(args.config, vocab_size=lm.vocab_size,
                                     overrides={"gamma": gamma, "delta": delta})
                null_cfg = load_config(args.config, vocab_size=lm.vocab_size,
                                       overrides={"gamma": gamma, "delta": 0.0})
                seqs, nulls = [], []
                for i, prompt in enumerate(prompts):
                    spec = DecodeSpec(strategy=strategy if strategy != "beam" else "beam",
                                      max_tokens=t_max, seed=1000 + i,
                                      beam_width=int(grid.get("beam_width", 8)))
                    if strategy == "beam":
                        seqs.append(beam_generate(lm, prompt, config,
                                                  width=spec.beam_width,
                                                  length=t_max, spec=spec))
                        nulls.append(generate(lm, prompt, null_cfg,
                                              DecodeSpec(strategy="multinomial",
                                                         max_tokens=t_max,
                                                         seed=5000 + i)))
                    else:
                        seqs.append(generate(lm, prompt, config, spec))
                        nulls.append(generate(lm, prompt, null_cfg, spec))
                for t_check in t_checkpoints:
                    zs = _prefix_z(seqs, config, t_check)
                    zn = _prefix_z(nulls, config, t_check)
                    _, _, auc = atk.roc_curve(zs, zn)
                    tpr = atk.tpr_at_threshold(zs, 4.0)
                    rows.append({
                        "gamma": gamma, "delta": delta, "strategy": strategy,
                        "T": t_check,
                        "mean_z": float(np.mean(zs)), "std_z": float(np.std(zs)),
                        "tpr_at_z4": tpr, "fnr_at_z4": 1.0 - tpr,
                        "fpr_at_z4": atk.tpr_at_threshold(zn, 4.0),
                        "tnr_at_z4": 1.0 - atk.tpr_at_threshold(zn, 4.0),
                        "auc": auc,
                    })
    out_path = args.out
    with open(out_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} grid rows to {out_path}")
    return EXIT_OK


def _sweep_prompts(lm, rng, n_seq: int, prompt_len: int) -> list[list[int]]:
    spec = DecodeSpec(strategy="multinomial", max_tokens=prompt_len)
    prompts = []
    for i in range(n_seq):
        start = int(rng.integers(257, lm.vocab_size))
        prompts.append([start] + [int(x) for x in
                                  rng.integers(257, lm.vocab_size, size=prompt_len - 1)])
    return prompts


def _prefix_z(seqs: list[TokenSequence], config: WatermarkConfig,
              t_check: int) -> list[float]:
    zs = []
    for seq in seqs:
        trimmed = TokenSequence.make(seq.prompt, seq.generated[:t_check],
                                     seq.vocab_size)
        zs.append(score(trimmed, config).z)
    return zs


def cmd_attack(args) -> int:
    lm, _ = load_model(args.model)
    config = load_config(args.config, vocab_size=lm.vocab_size,
                         overrides=_cfg_overrides(args))
    sequences = read_jsonl(args.infile, config.vocab_size)
    oracle = atk.NGramReplacementOracle(lm, k=args.k, beam_width=args.beam_width)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    rows = []
    for eps in args.epsilon:
        budget = atk.AttackBudget(epsilon=eps, max_iters=args.max_iters)
        for i, seq in enumerate(sequences):
            t0 = time.time()
            z_before = score(seq, config).z
            attacked, log = atk.substitute_attack(seq, budget, oracle, rng)
            z_after = score(attacked, config).z
            rows.append({
                "seq_id": i, "epsilon": eps,
                "z_before": round(z_before, 4), "z_after": round(z_after, 4),
                "edits": len(log),
                "runtime_ms": round(1000 * (time.time() - t0), 1),
            })
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} attack rows to {args.out}")
    return EXIT_OK


def cmd_bridge(args) -> int:
    """JSONL request/response loop on stdio for foreign runtimes."""
    vocab_size = args.vocab_size
    if args.model:
        lm, _ = load_model(args.model)
        vocab_size = lm.vocab_size
    config = load_config(args.config, vocab_size=vocab_size)
    from .prf import compute_seed, partition_vocab, seeding_window
    from .warp import soft_warp

    def handle(req: dict) -> dict:
        op = req.get("op")
        if op == "hello":
            return {"ok": True, "fingerprint": config.fingerprint(),
                    "layout_version": PRF_LAYOUT_VERSION,
                    "vocab_size": config.vocab_size,
                    "gamma": config.gamma,
                    "delta": "inf" if math.isinf(config.delta) else config.delta,
                    "kind": config.scheme.kind.value, "h": config.scheme.h}
        if op == "warp":
            context = [int(t) for t in req["context"]]
            logits = np.asarray(req["logits"], dtype=np.float64)
            if logits.shape != (config.vocab_size,):
                raise ConfigError(
                    f"logit buffer of length {logits.shape[0]} != vocab "
                    f"{config.vocab_size}")
            window = seeding_window(context, len(context), config.scheme.h)
            mask = partition_vocab(compute_seed(window, config.scheme),
                                   config.gamma, config.vocab_size)
            probs = soft_warp(logits, mask, config.delta)
            return {"ok": True, "probs": probs.tolist()}
        if op == "detect":
            seq = TokenSequence.make(req["prompt"], req["generated"],
                                     config.vocab_size)
            raw_opts = req.get("options", {})
            opts = DetectorOptions(
                skip_repeated_ngrams=raw_opts.get("skip_repeated_ngrams", True),
                z_threshold=raw_opts.get("z_threshold", 4.0),
                min_prefix=raw_opts.get("min_prefix"),
            )
            return {"ok": True, "report": score(seq, config, opts).to_dict()}
        if op == "shutdown":
            return {"ok": True, "bye": True}
        raise ConfigError(f"unknown bridge op {op!r}")

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            resp = handle(req)
        except TokenmarkError as e:
            resp = {"ok": False, "kind": type(e).__name__, "error": str(e)}
        except (KeyError, ValueError, TypeError) as e:
            resp = {"ok": False, "kind": "BadRequest", "error": str(e)}
        sys.stdout.write(json.dumps(resp) + "\n")
        sys.stdout.flush()
        if resp.get("bye"):
            break
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tokenmark",
                                description="Red/green-list watermarking toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    mc = sub.add_parser("make-corpus", help="emit a deterministic synthetic corpus")
    mc.add_argument("--tokens", type=int, default=200_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--out", required=True)
    mc.set_defaults(func=cmd_make_corpus)

    tr = sub.add_parser("train-lm", help="train the toy n-gram model")
    tr.add_argument("--corpus", required=True)
    tr.add_argument("--n", type=int, default=3)
    tr.add_argument("--smoothing", type=float, default=0.1)
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train_lm)

    def add_config_flags(sp):
        sp.add_argument("--config", required=True)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--delta", type=float)
        sp.add_argument("--h", type=int)
        sp.add_argument("--kind", choices=["left_hash", "self_hash"])

    ge = sub.add_parser("generate", help="watermarked generation to JSONL")
    add_config_flags(ge)
    ge.add_argument("--model", required=True)
    ge.add_argument("--prompts", required=True)
    ge.add_argument("--out", required=True)
    ge.add_argument("--strategy", choices=["multinomial", "greedy", "beam"])
    ge.add_argument("--max-tokens", type=int, dest="max_tokens")
    ge.add_argument("--seed", type=int)
    ge.add_argument("--temperature", type=float)
    ge.add_argument("--temp-after-delta", action="store_true",
                    dest="temp_after_delta",
                    help="ablation: apply temperature after the green boost")
    ge.set_defaults(func=cmd_generate)

    de = sub.add_parser("detect", help="score sequences or raw text")
    add_config_flags(de)
    de.add_argument("--in", dest="infile")
    de.add_argument("--text", help="raw UTF-8 text file (needs --model)")
    de.add_argument("--model")
    de.add_argument("--policy", help="canonicalization policy JSON")
    de.add_argument("--report", help="write the JSON report here")
    de.add_argument("--render", choices=["ansi", "html"])
    de.add_argument("--render-out", dest="render_out")
    de.add_argument("--no-skip", action="store_true",
                    help="disable repeated n-gram skipping")
    de.add_argument("--z-threshold", type=float, default=4.0, dest="z_threshold")
    de.add_argument("--min-prefix", type=int, dest="min_prefix")
    de.set_defaults(func=cmd_detect)

    sw = sub.add_parser("sweep", help="grid experiment to CSV")
    sw.add_argument("--config", required=True)
    sw.add_argument("--grid", required=True)
    sw.add_argument("--model", required=True)
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=cmd_sweep)

    bo = sub.add_parser("bounds", help="sensitivity arithmetic chain")
    bo.add_argument("--gamma", type=float, required=True)
    bo.add_argument("--delta", required=True)
    bo.add_argument("--t", type=int, required=True)
    bo.add_argument("--s-star", type=float, required=True, dest="s_star")
    bo.add_argument("--z-threshold", type=float, default=4.0, dest="z_threshold")
    bo.add_argument("--empirical-mean", type=float, dest="empirical_mean")
    bo.add_argument("--out")
    bo.set_defaults(func=cmd_bounds)

    at = sub.add_parser("attack", help="budgeted span replacement, CSV results")
    add_config_flags(at)
    at.add_argument("--in", dest="infile", required=True)
    at.add_argument("--model", required=True)
    at.add_argument("--epsilon", type=float, nargs="+", required=True)
    at.add_argument("--k", type=int, default=20)
    at.add_argument("--beam-width", type=int, default=50, dest="beam_width")
    at.add_argument("--max-iters", type=int, default=10_000, dest="max_iters")
    at.add_argument("--seed", type=int, default=0)
    at.add_argument("--out", required=True)
    at.set_defaults(func=cmd_attack)

    br = sub.add_parser("bridge", help="stdio JSONL bridge for foreign runtimes")
    br.add_argument("--config", required=True)
    br.add_argument("--model")
    br.add_argument("--vocab-size", type=int, dest="vocab_size")
    br.set_defaults(func=cmd_bridge)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RangeError, SizeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SourceError, BudgetError, EncodingError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except EmptyScoreError as e:
        print(f"nothing scorable: {e}", file=sys.stderr)
        return EXIT_EMPTY


if __name__ == "__main__":
    sys.exit(main())
