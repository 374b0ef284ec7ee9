"""Model-free watermark detection.

Recomputes the green mask at every position of a token stream exactly
as the generator did, counts green hits, and turns the count into a
one-proportion z statistic with its one-sided p-value:

    z = (|s|_G - gamma * T) / sqrt(T * gamma * (1 - gamma))

Repeated (h+1)-grams can be skipped so that copy-paste repetition
neither inflates nor deflates the statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, EmptyScoreError
from .prf import (
    SeedKind,
    WatermarkConfig,
    compute_seed,
    partition_vocab,
    seeding_window,
    self_hash_color,
)

GREEN = "green"
RED = "red"
SKIPPED = "skipped"
UNSCORABLE = "unscorable"

_SQRT2 = math.sqrt(2.0)
_LN10 = math.log(10.0)


def z_score(green_count: int, t_counted: int, gamma: float) -> float:
    """One-proportion z statistic for the observed green fraction."""
    if t_counted < 1:
        raise EmptyScoreError("no counted tokens")
    if not (0.0 < gamma < 1.0):
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    return (green_count - gamma * t_counted) / math.sqrt(
        t_counted * gamma * (1.0 - gamma)
    )


def p_value(z: float) -> float:
    """One-sided upper-tail standard normal probability."""
    if not math.isfinite(z):
        raise ConfigError("z must be finite")
    return 0.5 * math.erfc(z / _SQRT2)


def log10_p_value(z: float) -> float:
    """log10 of the upper tail; stays finite where p_value underflows."""
    p = p_value(z)
    if p > 0.0:
        return math.log10(p)
    # Asymptotic expansion of ln Q(z) for large z (z > ~37 here).
    ln_q = -0.5 * z * z - math.log(z) - 0.5 * math.log(2.0 * math.pi)
    ln_q += math.log1p(-1.0 / (z * z) + 3.0 / (z ** 4))
    return ln_q / _LN10


@dataclass(frozen=True)
class DetectorOptions:
    """Scoring controls.

    ``min_prefix`` limits how many tokens before the first generated
    position the detector may use for seeding; ``None`` means the whole
    prompt is available.  With fewer than h available, the leading
    generated positions are reported as unscorable.
    """

    skip_repeated_ngrams: bool = True
    ngram_width: int | None = None
    z_threshold: float = 4.0
    min_prefix: int | None = None

    def __post_init__(self):
        if self.ngram_width is not None and self.ngram_width < 2:
            raise ConfigError("ngram_width must be >= 2")
        if self.min_prefix is not None and self.min_prefix < 0:
            raise ConfigError("min_prefix must be >= 0")


@dataclass
class DetectionReport:
    t_counted: int
    green_count: int
    z: float
    p_one_sided: float
    log10_p: float
    gamma: float
    colors: list[str] = field(repr=False)
    config_fingerprint: str = ""

    def rejected(self, z_threshold: float = 4.0) -> bool:
        return self.z > z_threshold

    def colors_rle(self) -> list[list]:
        runs: list[list] = []
        for c in self.colors:
            if runs and runs[-1][0] == c:
                runs[-1][1] += 1
            else:
                runs.append([c, 1])
        return runs

    def to_dict(self) -> dict:
        return {
            "z": self.z,
            "p": self.p_one_sided,
            "log10_p": self.log10_p,
            "t_counted": self.t_counted,
            "green_count": self.green_count,
            "gamma": self.gamma,
            "colors": self.colors_rle(),
            "config_fingerprint": self.config_fingerprint,
        }


def _color_at(token: int, window: tuple[int, ...], config: WatermarkConfig) -> bool:
    if config.scheme.kind is SeedKind.SELF_HASH:
        green, _ = self_hash_color(token, window, config.scheme, config.gamma)
        return green
    seed = compute_seed(window, config.scheme)
    return bool(partition_vocab(seed, config.gamma, config.vocab_size).bits[token])


def score(tokens, config: WatermarkConfig,
          opts: DetectorOptions | None = None) -> DetectionReport:
    """Score a TokenSequence against the watermark null hypothesis.

    Every generated position whose seeding window is available gets a
    color by recomputing the generator's mask.  With skipping enabled,
    an (h+1)-gram that already occurred is marked ``skipped`` and does
    not increment the token counter.
    """
    opts = opts or DetectorOptions()
    h = config.scheme.h
    width = opts.ngram_width if opts.ngram_width is not None else h + 1
    prompt = list(tokens.prompt)
    generated = list(tokens.generated)
    if any(t < 0 or t >= config.vocab_size for t in prompt + generated):
        raise ConfigError("token id outside the configured vocabulary")
    full = prompt + generated
    n_prompt = len(prompt)
    if opts.min_prefix is None:
        first_scorable = 0
    else:
        # Positions whose window would reach past the allowed prefix.
        first_scorable = max(0, h - opts.min_prefix)

    colors: list[str] = []
    seen: set[tuple[int, ...]] = set()
    green_count = 0
    t_counted = 0
    for t, token in enumerate(generated):
        if t < first_scorable:
            colors.append(UNSCORABLE)
            continue
        pos = n_prompt + t
        window = seeding_window(full, pos, h)
        if opts.skip_repeated_ngrams:
            key = seeding_window(full, pos, width - 1) + (token,)
            if key in seen:
                colors.append(SKIPPED)
                continue
            seen.add(key)
        green = _color_at(token, window, config)
        colors.append(GREEN if green else RED)
        t_counted += 1
        green_count += int(green)

    if t_counted == 0:
        raise EmptyScoreError("sequence has no scorable tokens")
    z = z_score(green_count, t_counted, config.gamma)
    return DetectionReport(
        t_counted=t_counted,
        green_count=green_count,
        z=z,
        p_one_sided=p_value(z),
        log10_p=log10_p_value(z),
        gamma=config.gamma,
        colors=colors,
        config_fingerprint=config.fingerprint(),
    )


@dataclass
class MultiKeyReport:
    reports: list[DetectionReport]
    rejected: bool
    corrected_alpha: float

    def to_dict(self) -> dict:
        return {
            "rejected": self.rejected,
            "corrected_alpha": self.corrected_alpha,
            "per_key": [r.to_dict() for r in self.reports],
        }


def multi_key_score(tokens, configs: Sequence[WatermarkConfig], alpha: float,
                    opts: DetectorOptions | None = None) -> MultiKeyReport:
    """Run one test per key and reject iff any p <= alpha / k (Bonferroni)."""
    if len(configs) < 1:
        raise ConfigError("multi_key_score needs at least one config")
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    corrected = alpha / len(configs)
    reports = [score(tokens, cfg, opts) for cfg in configs]
    rejected = any(r.p_one_sided <= corrected for r in reports)
    return MultiKeyReport(reports=reports, rejected=rejected,
                          corrected_alpha=corrected)


def null_false_positive_rate(t_tokens: int, gamma: float, mode: str = "ztest",
                             z_threshold: float = 4.0) -> float:
    """False-positive probability of the detector on unwatermarked text.

    ``hard-perfect`` is the chance a natural source emits t all-green
    tokens (gamma ** T); ``ztest`` is the tail mass above the z
    threshold.
    """
    if t_tokens < 1:
        raise ConfigError("t_tokens must be >= 1")
    if not (0.0 < gamma < 1.0):
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    if mode == "hard-perfect":
        return gamma ** t_tokens
    if mode == "ztest":
        return p_value(z_threshold)
    raise ConfigError(f"unknown mode {mode!r}")


def exact_binomial_tail(t_tokens: int, gamma: float, c: int) -> float:
    """P(Bin(T, gamma) >= c) by direct summation."""
    if t_tokens < 1:
        raise ConfigError("t_tokens must be >= 1")
    c = max(0, c)
    total = 0.0
    for i in range(c, t_tokens + 1):
        total += math.comb(t_tokens, i) * gamma ** i * (1 - gamma) ** (t_tokens - i)
    return min(1.0, total)


def left_hash_color_table(config: WatermarkConfig) -> np.ndarray:
    """(V, V) bool table: entry [prev, tok] is tok's color after prev.

    Only defined for LEFT_HASH schemes with h == 1; used to score large
    batches of short streams without re-deriving masks per position.
    """
    if config.scheme.kind is not SeedKind.LEFT_HASH or config.scheme.h != 1:
        raise ConfigError("color table fast path requires LEFT_HASH with h=1")
    v = config.vocab_size
    table = np.zeros((v, v), dtype=bool)
    for prev in range(v):
        seed = compute_seed((prev,), config.scheme)
        table[prev] = partition_vocab(seed, config.gamma, v).bits
    return table


def batch_null_z(streams: np.ndarray, config: WatermarkConfig,
                 skip_repeated_ngrams: bool = True) -> np.ndarray:
    """z score per row for a matrix of token streams (LEFT_HASH, h=1).

    Row layout: the first token only seeds, the remaining columns are
    scored.  Bit-for-bit equivalent to running :func:`score` on each
    row with a one-token prompt (parity-tested).
    """
    streams = np.asarray(streams)
    if streams.ndim != 2 or streams.shape[1] < 2:
        raise ConfigError("streams must be (n, T+1) with T >= 1")
    table = left_hash_color_table(config)
    prev = streams[:, :-1]
    tok = streams[:, 1:]
    colors = table[prev, tok]
    gamma = config.gamma
    if not skip_repeated_ngrams:
        t = colors.shape[1]
        greens = colors.sum(axis=1)
        return (greens - gamma * t) / np.sqrt(t * gamma * (1 - gamma))
    v = config.vocab_size
    codes = prev.astype(np.int64) * v + tok.astype(np.int64)
    out = np.empty(streams.shape[0], dtype=np.float64)
    for i in range(streams.shape[0]):
        _, idx = np.unique(codes[i], return_index=True)
        t = idx.size
        greens = int(colors[i][idx].sum())
        out[i] = (greens - gamma * t) / math.sqrt(t * gamma * (1 - gamma))
    return out
