"""Decoding loops that combine a next-token source with the watermark.

Supports multinomial sampling, greedy decoding, beam search scored on
watermarked log-probabilities, and the robust self-hash greedy rule.
All loops are deterministic given (source, prompt, config, spec).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, SourceError
from .prf import (
    SeedKind,
    WatermarkConfig,
    compute_seed,
    partition_vocab,
    seeding_window,
    self_hash_color,
)
from .sources import LmSource
from .warp import apply_temperature, soft_warp, softmax


@dataclass(frozen=True)
class TokenSequence:
    """A prompt plus the tokens generated after it."""

    prompt: tuple[int, ...]
    generated: tuple[int, ...]
    vocab_size: int

    def __post_init__(self):
        if len(self.prompt) < 1:
            raise ConfigError("prompt must be nonempty (it supplies seeding context)")
        for t in tuple(self.prompt) + tuple(self.generated):
            if not (0 <= t < self.vocab_size):
                raise ConfigError(f"token id {t} outside vocab of size {self.vocab_size}")

    @classmethod
    def make(cls, prompt: Sequence[int], generated: Sequence[int],
             vocab_size: int) -> "TokenSequence":
        return cls(tuple(int(t) for t in prompt),
                   tuple(int(t) for t in generated), vocab_size)

    def full(self) -> list[int]:
        return list(self.prompt) + list(self.generated)

    def to_json(self, config_fingerprint: str = "") -> str:
        return json.dumps({
            "prompt": list(self.prompt),
            "generated": list(self.generated),
            "config_fingerprint": config_fingerprint,
        })

    @classmethod
    def from_json(cls, line: str, vocab_size: int) -> "TokenSequence":
        obj = json.loads(line)
        return cls.make(obj["prompt"], obj["generated"], vocab_size)


@dataclass(frozen=True)
class DecodeSpec:
    """Decoding strategy and stopping controls."""

    strategy: str = "multinomial"  # multinomial | greedy | beam
    max_tokens: int = 100
    seed: int | None = 0
    beam_width: int = 8
    suppress_eos: bool = False
    eos_id: int | None = None
    temperature: float = 1.0
    temp_after_delta: bool = False  # ablation: boost first, temperature second

    def __post_init__(self):
        if self.strategy not in ("multinomial", "greedy", "beam"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")
        if self.strategy == "beam" and self.beam_width < 2:
            raise ConfigError("beam width must be >= 2")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")


def _next_logits(lm: LmSource, context: Sequence[int]) -> np.ndarray:
    logits = np.asarray(lm.next_logits(context), dtype=np.float64)
    if logits.shape != (lm.vocab_size,):
        raise SourceError(
            f"source emitted shape {logits.shape}, expected ({lm.vocab_size},)"
        )
    return logits


def _warped_probs(logits: np.ndarray, context: Sequence[int],
                  config: WatermarkConfig, spec: DecodeSpec) -> np.ndarray:
    window = seeding_window(context, len(context), config.scheme.h)
    mask = partition_vocab(compute_seed(window, config.scheme),
                           config.gamma, config.vocab_size)
    if spec.temp_after_delta and math.isfinite(config.delta):
        boosted = logits + config.delta * mask.bits
        return softmax(apply_temperature(boosted, spec.temperature))
    return soft_warp(apply_temperature(logits, spec.temperature), mask,
                     config.delta)


def _sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def generate(lm: LmSource, prompt: Sequence[int], config: WatermarkConfig,
             spec: DecodeSpec) -> TokenSequence:
    """Decode with the left-hash watermark (soft, or hard when delta=inf).

    Each step recomputes the mask from the h-token window and samples or
    argmaxes the warped distribution; multinomial runs are reproducible
    from spec.seed.
    """
    if config.scheme.kind is not SeedKind.LEFT_HASH:
        raise ConfigError("generate() requires a LEFT_HASH scheme; "
                          "use generate_self_hash for SELF_HASH")
    if config.vocab_size != lm.vocab_size:
        raise ConfigError("config vocab_size does not match the source")
    if spec.strategy == "beam":
        return beam_generate(lm, prompt, config, width=spec.beam_width,
                             length=spec.max_tokens,
                             suppress_eos=spec.suppress_eos, spec=spec)
    rng = np.random.Generator(np.random.PCG64(spec.seed or 0))
    context = list(prompt)
    generated: list[int] = []
    for _ in range(spec.max_tokens):
        logits = _next_logits(lm, context)
        if spec.suppress_eos and spec.eos_id is not None:
            logits = logits.copy()
            logits[spec.eos_id] = -np.inf
        probs = _warped_probs(logits, context, config, spec)
        if spec.strategy == "greedy":
            token = int(np.argmax(probs))
        else:
            token = _sample(probs, rng)
        generated.append(token)
        context.append(token)
        if (spec.eos_id is not None and not spec.suppress_eos
                and token == spec.eos_id):
            break
    return TokenSequence.make(prompt, generated, config.vocab_size)


def generate_self_hash(lm: LmSource, prompt: Sequence[int],
                       config: WatermarkConfig, spec: DecodeSpec) -> TokenSequence:
    """Greedy decoding under the robust self-hash rule.

    Candidates are tried in descending logit order (ties toward the
    smaller token id).  The first green candidate is emitted; when the
    next candidate's logit drops more than delta below the top logit,
    the search gives up and emits the most likely token even though it
    is red.
    """
    if config.scheme.kind is not SeedKind.SELF_HASH:
        raise ConfigError("generate_self_hash requires a SELF_HASH scheme")
    if config.vocab_size != lm.vocab_size:
        raise ConfigError("config vocab_size does not match the source")
    h = config.scheme.h
    context = list(prompt)
    generated: list[int] = []
    for _ in range(spec.max_tokens):
        logits = apply_temperature(_next_logits(lm, context), spec.temperature)
        if spec.suppress_eos and spec.eos_id is not None:
            logits = logits.copy()
            logits[spec.eos_id] = -np.inf
        order = np.argsort(-logits, kind="stable")
        window = seeding_window(context, len(context), h)
        top = logits[order[0]]
        chosen = int(order[0])
        for k in range(len(order)):
            cand = int(order[k])
            green, _ = self_hash_color(cand, window, config.scheme, config.gamma)
            if green:
                chosen = cand
                break
            next_logit = logits[order[k + 1]] if k + 1 < len(order) else -np.inf
            if next_logit < top - config.delta:
                chosen = int(order[0])
                break
        generated.append(chosen)
        context.append(chosen)
        if (spec.eos_id is not None and not spec.suppress_eos
                and chosen == spec.eos_id):
            break
    return TokenSequence.make(prompt, generated, config.vocab_size)


def beam_generate(lm: LmSource, prompt: Sequence[int], config: WatermarkConfig,
                  width: int = 8, length: int = 100, suppress_eos: bool = False,
                  spec: DecodeSpec | None = None,
                  raw_score: bool = False) -> TokenSequence:
    """Beam search scored by cumulative watermarked log-probability.

    Scoring on the warped distribution lets the search prefer hypotheses
    dense in green tokens; ``raw_score=True`` scores on the plain
    softmax instead (ablation).  The best beam is truncated to exactly
    ``length`` tokens.  width=1 degenerates to greedy decoding.
    """
    if width < 1:
        raise ConfigError("beam width must be >= 1")
    spec = spec or DecodeSpec(strategy="beam", beam_width=max(2, width),
                              max_tokens=length, suppress_eos=suppress_eos)
    beams: list[tuple[list[int], float]] = [(list(prompt), 0.0)]
    with np.errstate(divide="ignore"):
        for _ in range(length):
            candidates: list[tuple[float, int, int]] = []  # (-score, beam, token)
            warped_cache = []
            for b, (ctx, score) in enumerate(beams):
                logits = _next_logits(lm, ctx)
                if suppress_eos and spec.eos_id is not None:
                    logits = logits.copy()
                    logits[spec.eos_id] = -np.inf
                probs = _warped_probs(logits, ctx, config, spec)
                if raw_score:
                    probs_for_score = softmax(apply_temperature(logits, spec.temperature))
                else:
                    probs_for_score = probs
                logp = np.log(probs_for_score)
                warped_cache.append(logp)
                top = np.argsort(-logp, kind="stable")[:width]
                for tok in top:
                    candidates.append((-(score + float(logp[tok])), b, int(tok)))
            candidates.sort()
            next_beams = []
            for neg_score, b, tok in candidates[:width]:
                next_beams.append((beams[b][0] + [tok], -neg_score))
            beams = next_beams
    best_ctx, _ = max(beams, key=lambda bs: bs[1])
    generated = best_ctx[len(prompt):len(prompt) + length]
    return TokenSequence.make(prompt, generated, config.vocab_size)


def write_jsonl(path: str, sequences: Iterable[TokenSequence],
                config_fingerprint: str = "") -> None:
    with open(path, "w", encoding="utf-8") as f:
        for seq in sequences:
            f.write(seq.to_json(config_fingerprint) + "\n")


def read_jsonl(path: str, vocab_size: int) -> list[TokenSequence]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(TokenSequence.from_json(line, vocab_size))
    return out
