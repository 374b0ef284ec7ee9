"""Edit attacks against watermarked text and their evaluation metrics.

The span-replacement attack mirrors the budgeted masked-replacement
procedure: pick a random position, ask a replacement oracle for ranked
candidates, splice in the best one that differs from the original.  The
attacker never sees token colors.  Also here: insertion/deletion edits,
the worst-case flip arithmetic, empirical attack amplification, the
interleave-then-strip generative attack, and ROC/AUC computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import BudgetError, ConfigError
from .detect import z_score
from .generate import DecodeSpec, TokenSequence, _next_logits, _sample, _warped_probs
from .prf import (
    SeedKind,
    WatermarkConfig,
    compute_seed,
    mask_for_context,
    partition_vocab,
    seeding_window,
    self_hash_color,
)
from .sources import LmSource
from .warp import softmax


@dataclass(frozen=True)
class AttackBudget:
    """Replacement budget as a fraction of the generated length."""

    epsilon: float
    max_iters: int = 10_000

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ConfigError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")

    def target_edits(self, t_tokens: int) -> int:
        return int(math.floor(self.epsilon * t_tokens))


class ReplacementOracle(Protocol):
    """Proposes ranked replacements for a masked span."""

    def propose(self, left_context: Sequence[int],
                span: Sequence[int]) -> list[tuple[tuple[int, ...], float]]: ...


class NGramReplacementOracle:
    """Replacement proposals from the toy n-gram model.

    Single-token spans: the top ``beam_width`` next tokens by model
    probability given the left context, of which the first ``k`` are
    returned with their log-probabilities.
    """

    def __init__(self, lm: LmSource, k: int = 20, beam_width: int = 50):
        if k < 1 or beam_width < k:
            raise ConfigError("need beam_width >= k >= 1")
        self.lm = lm
        self.k = k
        self.beam_width = beam_width

    def propose(self, left_context: Sequence[int],
                span: Sequence[int]) -> list[tuple[tuple[int, ...], float]]:
        probs = softmax(_next_logits(self.lm, list(left_context)))
        top = np.argsort(-probs, kind="stable")[: self.beam_width]
        out = []
        for tok in top[: self.k]:
            p = float(probs[tok])
            out.append(((int(tok),), math.log(p) if p > 0 else -math.inf))
        return out


@dataclass
class EditLog:
    """Replayable record of the edits an attack performed."""

    kind: str
    edits: list[dict] = field(default_factory=list)

    def append(self, **entry) -> None:
        self.edits.append(entry)

    def __len__(self) -> int:
        return len(self.edits)


def replay_edits(tokens: TokenSequence, log: EditLog) -> TokenSequence:
    """Re-apply an edit log to the original sequence."""
    gen = list(tokens.generated)
    for e in log.edits:
        if e["op"] == "substitute":
            gen[e["pos"]] = e["new"]
        elif e["op"] == "insert":
            gen.insert(e["pos"], e["new"])
        elif e["op"] == "delete":
            del gen[e["pos"]]
        else:
            raise ConfigError(f"unknown edit op {e['op']!r}")
    return TokenSequence.make(tokens.prompt, gen, tokens.vocab_size)


def substitute_attack(tokens: TokenSequence, budget: AttackBudget,
                      oracle: ReplacementOracle,
                      rng: np.random.Generator) -> tuple[TokenSequence, EditLog]:
    """Budgeted blind span replacement.

    Loops until floor(epsilon * T) successful replacements or max_iters
    attempts: mask one random position, splice in the oracle's best
    candidate that differs from the original token.  Oracle failures
    count against max_iters and are skipped.
    """
    gen = list(tokens.generated)
    t = len(gen)
    target = budget.target_edits(t)
    log = EditLog(kind="substitute")
    successes = 0
    for it in range(budget.max_iters):
        if successes >= target:
            break
        pos = int(rng.integers(0, t))
        original = gen[pos]
        left = list(tokens.prompt) + gen[:pos]
        try:
            candidates = oracle.propose(left, [original])
        except Exception:
            continue
        chosen = None
        for cand_tokens, _score in candidates:
            if len(cand_tokens) == 1 and cand_tokens[0] != original:
                chosen = int(cand_tokens[0])
                break
        if chosen is None:
            continue
        log.append(op="substitute", iter=it, pos=pos, old=original, new=chosen)
        gen[pos] = chosen
        successes += 1
    return TokenSequence.make(tokens.prompt, gen, tokens.vocab_size), log


def insert_attack(tokens: TokenSequence, budget: AttackBudget,
                  rng: np.random.Generator,
                  pool: Sequence[int] | None = None) -> tuple[TokenSequence, EditLog]:
    """Insert floor(epsilon * T) tokens at random positions."""
    gen = list(tokens.generated)
    n_ins = budget.target_edits(len(gen))
    log = EditLog(kind="insert")
    for i in range(n_ins):
        pos = int(rng.integers(0, len(gen) + 1))
        if pool is None:
            tok = int(rng.integers(0, tokens.vocab_size))
        else:
            tok = int(pool[int(rng.integers(0, len(pool)))])
        log.append(op="insert", iter=i, pos=pos, new=tok)
        gen.insert(pos, tok)
    return TokenSequence.make(tokens.prompt, gen, tokens.vocab_size), log


def delete_attack(tokens: TokenSequence, budget: AttackBudget,
                  rng: np.random.Generator,
                  min_len: int = 2) -> tuple[TokenSequence, EditLog]:
    """Delete floor(epsilon * T) random tokens."""
    gen = list(tokens.generated)
    n_del = budget.target_edits(len(gen))
    if len(gen) - n_del < min_len:
        raise BudgetError(
            f"deleting {n_del} of {len(gen)} tokens leaves fewer than {min_len}"
        )
    log = EditLog(kind="delete")
    for i in range(n_del):
        pos = int(rng.integers(0, len(gen)))
        log.append(op="delete", iter=i, pos=pos, old=gen[pos])
        del gen[pos]
    return TokenSequence.make(tokens.prompt, gen, tokens.vocab_size), log


def worst_case_flip_z(t_tokens: int, flips: int, gamma: float,
                      h: int = 1) -> float:
    """z after a maximally adversarial attack with watermark knowledge.

    Each flip removes the flipped green token plus the h downstream
    tokens whose windows it reseeds; the green count clamps at zero.
    """
    if flips < 0 or t_tokens < 1:
        raise ConfigError("need flips >= 0 and t_tokens >= 1")
    greens = max(0, t_tokens - flips * (1 + h))
    return z_score(greens, t_tokens, gamma)


def make_worst_case_attack(tokens: TokenSequence, config: WatermarkConfig,
                           flips: int,
                           spacing: int | None = None) -> TokenSequence:
    """Construct the maximally adversarial flip pattern on real text.

    Requires LEFT_HASH with h=1 and a fully green input.  Each chosen
    position is replaced by a token that is red under its own window
    AND reseeds the following token into red, so every flip costs
    exactly two green tokens.
    """
    if config.scheme.kind is not SeedKind.LEFT_HASH or config.scheme.h != 1:
        raise ConfigError("worst-case construction implemented for LEFT_HASH h=1")
    gen = list(tokens.generated)
    t = len(gen)
    spacing = spacing if spacing is not None else max(2, t // flips)
    if spacing < 2 or (flips - 1) * spacing + 1 >= t:
        raise BudgetError("flips do not fit with spacing >= 2")
    full = list(tokens.prompt) + gen
    n_prompt = len(tokens.prompt)
    for j in range(flips):
        i = j * spacing
        pos = n_prompt + i
        if i + 1 >= t:
            raise BudgetError("flip position has no downstream token")
        own_mask = mask_for_context(seeding_window(full, pos, 1), config)
        next_tok = full[pos + 1]
        replacement = None
        for x in own_mask.red_ids():
            seed = compute_seed((int(x),), config.scheme)
            next_mask = partition_vocab(seed, config.gamma, config.vocab_size)
            if not next_mask.bits[next_tok]:
                replacement = int(x)
                break
        if replacement is None:
            raise BudgetError(f"no doubly-red replacement exists at position {i}")
        full[pos] = replacement
        gen[i] = replacement
    return TokenSequence.make(tokens.prompt, gen, tokens.vocab_size)


def _pick_green_token(context: Sequence[int], config: WatermarkConfig,
                      rng: np.random.Generator) -> int:
    """A uniformly random token that is green in the current position."""
    window = seeding_window(context, len(context), config.scheme.h)
    if config.scheme.kind is SeedKind.LEFT_HASH:
        mask = mask_for_context(window, config)
        greens = mask.green_ids()
        return int(greens[int(rng.integers(0, greens.size))])
    for _ in range(10_000):
        cand = int(rng.integers(0, config.vocab_size))
        green, _ = self_hash_color(cand, window, config.scheme, config.gamma)
        if green:
            return cand
    raise ConfigError("could not find a green token (gamma too small?)")


def _color_of(token: int, context: Sequence[int],
              config: WatermarkConfig) -> bool:
    window = seeding_window(context, len(context), config.scheme.h)
    if config.scheme.kind is SeedKind.LEFT_HASH:
        return bool(mask_for_context(window, config).bits[token])
    green, _ = self_hash_color(token, window, config.scheme, config.gamma)
    return green


def amplification_factor(config: WatermarkConfig, n_trials: int,
                         rng: np.random.Generator,
                         include_self: bool = False) -> float:
    """Measured extra red tokens per single random token flip.

    Each trial builds an all-green stretch (flip site plus the h
    following positions), flips the site to a random different token,
    recolors, and counts the newly red positions downstream of the flip
    (the amplification proper).  ``include_self`` adds the flipped
    position's own color change to the count.
    """
    h = config.scheme.h
    v = config.vocab_size
    total_extra = 0
    for _ in range(n_trials):
        context = [int(x) for x in rng.integers(0, v, size=h)]
        flip_site = _pick_green_token(context, config, rng)
        seq = context + [flip_site]
        downstream = []
        for _ in range(h):
            tok = _pick_green_token(seq, config, rng)
            downstream.append(tok)
            seq.append(tok)
        # Flip to a uniformly random different token.
        new_tok = flip_site
        while new_tok == flip_site:
            new_tok = int(rng.integers(0, v))
        attacked = context + [new_tok] + downstream
        flip_pos = h
        extra = 0
        if include_self and not _color_of(new_tok, attacked[:flip_pos], config):
            extra += 1
        for j in range(1, h + 1):
            pos = flip_pos + j
            if not _color_of(attacked[pos], attacked[:pos], config):
                extra += 1
        total_extra += extra
    return total_extra / n_trials


def interleave_strip_attack(lm: LmSource, prompt: Sequence[int],
                            config: WatermarkConfig, n_tokens: int,
                            filler_id: int, seed: int = 0) -> TokenSequence:
    """Generative attack: interleave a filler token, then strip it.

    Models prompt-level attacks (emoji-style) as a stream transform:
    during generation every content token is followed by the filler, so
    all masks were seeded off the filler; after stripping, the detector
    reseeds off the true predecessors and the colors re-randomize.
    """
    spec = DecodeSpec(strategy="multinomial", max_tokens=1, seed=seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    context = list(prompt)
    stripped: list[int] = []
    for _ in range(n_tokens):
        logits = _next_logits(lm, context)
        probs = _warped_probs(logits, context, config, spec)
        tok = _sample(probs, rng)
        stripped.append(tok)
        context.extend([tok, filler_id])
    return TokenSequence.make(prompt, stripped, config.vocab_size)


def roc_curve(z_watermarked: Sequence[float],
              z_null: Sequence[float]) -> tuple[np.ndarray, np.ndarray, float]:
    """Threshold sweep over pooled scores; returns (fpr, tpr, auc).

    AUC is the rank statistic (ties counted half), which equals the
    trapezoidal area under the swept curve.
    """
    pos = np.asarray(z_watermarked, dtype=np.float64)
    neg = np.asarray(z_null, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ConfigError("both score lists must be nonempty")
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    tpr = [0.0]
    fpr = [0.0]
    for th in thresholds:
        tpr.append(float((pos >= th).mean()))
        fpr.append(float((neg >= th).mean()))
    greater = (pos[:, None] > neg[None, :]).sum()
    equal = (pos[:, None] == neg[None, :]).sum()
    auc = (greater + 0.5 * equal) / (pos.size * neg.size)
    return np.array(fpr), np.array(tpr), float(auc)


def auc_standard_error(auc: float, n_pos: int, n_neg: int) -> float:
    """Hanley-McNeil standard error of an AUC estimate."""
    a = min(max(auc, 1e-12), 1.0 - 1e-12)
    pxxy = a / (2.0 - a)
    pxyy = 2.0 * a * a / (1.0 + a)
    var = (a * (1.0 - a) + (n_pos - 1) * (pxxy - a * a)
           + (n_neg - 1) * (pxyy - a * a)) / (n_pos * n_neg)
    return math.sqrt(max(var, 0.0))


def tpr_at_threshold(z_scores: Sequence[float], z_threshold: float = 4.0) -> float:
    z = np.asarray(z_scores, dtype=np.float64)
    return float((z > z_threshold).mean())
