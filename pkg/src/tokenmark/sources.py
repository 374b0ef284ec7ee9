"""Desk-scale next-token sources.

Two stand-ins for a real LM so every experiment runs offline: a
corpus-trained backoff n-gram model over a word tokenizer, and a
synthetic logit stream whose per-step spike entropy is calibrated to a
target.  Both satisfy the LmSource contract (fixed vocab, deterministic
logits given context).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .bounds import spike_entropy
from .errors import ConfigError, DataError, RangeError
from .prf import BOS_ID


class LmSource(Protocol):
    """Anything that maps a token-id context to a logit vector."""

    vocab_size: int

    def next_logits(self, context: Sequence[int]) -> np.ndarray: ...


# ---------------------------------------------------------------------------
# Tokenizer: whitespace words with byte fallback, vocabulary fixed at build.
# ---------------------------------------------------------------------------

_N_RESERVED = 257  # BOS plus the 256 byte ids


class WordTokenizer:
    """Whitespace tokenizer over a fixed word vocabulary.

    Id 0 is BOS, ids 1..256 are raw bytes 0..255 (fallback for words
    outside the vocabulary), words start at 257 ordered by descending
    corpus frequency.
    """

    def __init__(self, words: Sequence[str]):
        self.words = list(words)
        self.word_to_id = {w: _N_RESERVED + i for i, w in enumerate(self.words)}
        self.vocab_size = _N_RESERVED + len(self.words)

    @classmethod
    def from_corpus(cls, text: str) -> "WordTokenizer":
        freq: dict[str, int] = {}
        for w in text.split():
            freq[w] = freq.get(w, 0) + 1
        if not freq:
            raise DataError("empty corpus")
        ordered = sorted(freq, key=lambda w: (-freq[w], w))
        return cls(ordered)

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for w in text.split():
            known = self.word_to_id.get(w)
            if known is not None:
                ids.append(known)
            else:
                ids.extend(1 + b for b in w.encode("utf-8"))
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        pieces: list[str] = []
        byte_run: list[int] = []

        def flush():
            if byte_run:
                pieces.append(bytes(byte_run).decode("utf-8", errors="replace"))
                byte_run.clear()

        for t in ids:
            if t == BOS_ID:
                continue
            if 1 <= t <= 256:
                byte_run.append(t - 1)
            else:
                flush()
                pieces.append(self.words[t - _N_RESERVED])
        flush()
        return " ".join(pieces)

    def to_dict(self) -> dict:
        return {"words": self.words}


# ---------------------------------------------------------------------------
# Backoff n-gram model with add-k smoothing.
# ---------------------------------------------------------------------------


class NGramLM:
    """Count-based n-gram model with recursively interpolated smoothing.

    Each order blends its counts with the next-lower order's
    distribution, weighted by the smoothing constant; a context unseen
    at some order contributes nothing there, so prediction falls back
    order by order down to the (add-k smoothed) unigram table.
    """

    def __init__(self, order: int, vocab_size: int, smoothing: float = 0.1):
        if order < 1:
            raise ConfigError("order must be >= 1")
        if smoothing < 0:
            raise ConfigError("smoothing must be >= 0")
        self.order = order
        self.vocab_size = vocab_size
        self.smoothing = smoothing
        # counts[k] maps a length-k context tuple to {token: count}.
        self.counts: list[dict[tuple[int, ...], dict[int, int]]] = [
            {} for _ in range(order)
        ]
        self._unigram_cache: np.ndarray | None = None

    def observe(self, sequence: Sequence[int]) -> None:
        padded = [BOS_ID] * (self.order - 1) + list(sequence)
        start = self.order - 1
        for i in range(start, len(padded)):
            tok = padded[i]
            for k in range(self.order):
                ctx = tuple(padded[i - k:i])
                table = self.counts[k].setdefault(ctx, {})
                table[tok] = table.get(tok, 0) + 1
        self._unigram_cache = None

    def _unigram_probs(self) -> np.ndarray:
        if self._unigram_cache is None:
            counts = np.zeros(self.vocab_size, dtype=np.float64)
            for tok, c in self.counts[0].get((), {}).items():
                counts[tok] = c
            total = counts.sum()
            kv = self.smoothing * self.vocab_size
            if total + kv <= 0:
                raise DataError("model has no counts and zero smoothing")
            self._unigram_cache = (counts + self.smoothing) / (total + kv)
        return self._unigram_cache

    def next_probs(self, context: Sequence[int]) -> np.ndarray:
        ctx = tuple(context[-(self.order - 1):]) if self.order > 1 else ()
        if len(ctx) < self.order - 1:
            ctx = (BOS_ID,) * (self.order - 1 - len(ctx)) + ctx
        probs = self._unigram_probs()
        kv = self.smoothing * self.vocab_size
        for k in range(1, self.order):
            table = self.counts[k].get(ctx[len(ctx) - k:])
            if not table:
                continue
            counts = np.zeros(self.vocab_size, dtype=np.float64)
            for tok, c in table.items():
                counts[tok] = c
            total = counts.sum()
            if total + kv <= 0:
                continue
            probs = (counts + kv * probs) / (total + kv)
        return probs

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.next_probs(context))

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "order": self.order,
            "vocab_size": self.vocab_size,
            "smoothing": self.smoothing,
            "counts": [
                {" ".join(map(str, ctx)): table for ctx, table in level.items()}
                for level in self.counts
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NGramLM":
        if payload.get("version") != 1:
            raise DataError(f"unsupported model snapshot version {payload.get('version')}")
        lm = cls(payload["order"], payload["vocab_size"], payload["smoothing"])
        for k, level in enumerate(payload["counts"]):
            for ctx_str, table in level.items():
                ctx = tuple(int(x) for x in ctx_str.split()) if ctx_str else ()
                lm.counts[k][ctx] = {int(t): int(c) for t, c in table.items()}
        return lm


def train_ngram(corpus: Sequence[Sequence[int]] | Sequence[int], n: int,
                smoothing: float = 0.1, vocab_size: int | None = None) -> NGramLM:
    """Fit an NGramLM on token-id sequences (or one flat sequence)."""
    if len(corpus) == 0:
        raise DataError("empty corpus")
    sequences: list[Sequence[int]]
    if isinstance(corpus[0], (int, np.integer)):
        sequences = [corpus]  # type: ignore[list-item]
    else:
        sequences = [s for s in corpus if len(s) > 0]  # type: ignore[union-attr]
    if not sequences:
        raise DataError("empty corpus")
    if vocab_size is None:
        vocab_size = max(max(s) for s in sequences) + 1
    lm = NGramLM(order=n, vocab_size=vocab_size, smoothing=smoothing)
    for s in sequences:
        lm.observe(s)
    return lm


def perplexity(lm: LmSource, sequence: Sequence[int]) -> float:
    """exp of the mean token negative log-likelihood under ``lm``."""
    if len(sequence) == 0:
        raise DataError("cannot score an empty sequence")
    nll = 0.0
    seq = list(sequence)
    for i, tok in enumerate(seq):
        logits = lm.next_logits(seq[:i])
        logp = logits[tok] - _logsumexp(logits)
        nll -= logp
    return math.exp(nll / len(seq))


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    if m == -math.inf:
        return -math.inf
    return m + math.log(np.exp(x - m).sum())


def save_model(lm: NGramLM, tokenizer: WordTokenizer | None, path: str) -> None:
    payload = lm.to_dict()
    if tokenizer is not None:
        payload["tokenizer"] = tokenizer.to_dict()
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)


def load_model(path: str) -> tuple[NGramLM, WordTokenizer | None]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read model snapshot: {e}") from e
    lm = NGramLM.from_dict(payload)
    tok = None
    if "tokenizer" in payload:
        tok = WordTokenizer(payload["tokenizer"]["words"])
    return lm, tok


# ---------------------------------------------------------------------------
# Deterministic synthetic-grammar corpus (no external downloads).
# ---------------------------------------------------------------------------

_DETS = ["the", "a", "this", "that", "every", "some", "no", "each", "another", "our"]
_ADJS = """old young quiet loud bright dark heavy light narrow wide quick slow
warm cold early late plain strange steady restless hollow solid distant near
gentle rough patient careless clever dull eager weary golden silver iron wooden
broken whole hidden open crooked straight bitter sweet pale vivid humble proud
foolish wise timid bold barren fertile rugged smooth ancient modern""".split()
_NOUNS = """river mountain valley harbor forest meadow lantern bridge tower garden
window ladder candle mirror compass anchor saddle hammer needle basket barrel
wagon engine signal market village city island shore cliff cavern tunnel
orchard pasture granary mill forge library archive manuscript ledger treaty
merchant sailor farmer miller weaver mason shepherd hunter scholar courier
captain soldier stranger traveler neighbor child elder crowd council parade
storm drizzle fog frost thaw harvest famine festival rumor ballad riddle
lesson journey voyage errand bargain quarrel truce verdict wager remedy
door roof cellar attic hearth kettle loaf orchard lantern map chart quill""".split()
_VERBS = """carried watched opened closed crossed followed gathered scattered
mended broke lifted lowered painted measured counted weighed traded borrowed
returned promised refused accepted studied copied signed sealed guarded
abandoned reached avoided entered left circled climbed descended repaired
planted harvested stored spilled burned cooled warmed sharpened dulled
questioned answered praised blamed summoned dismissed rewarded punished
noticed ignored remembered forgot described sketched announced whispered
shouted repeated translated recited delivered collected inspected approved""".split()
_ADVS = """slowly quickly quietly loudly carefully carelessly openly secretly
gladly grimly barely nearly always never often seldom twice once finally
suddenly gradually steadily briefly patiently eagerly calmly nervously""".split()
_PREPS = ["near", "beyond", "under", "over", "beside", "behind", "across",
          "through", "around", "toward", "against", "within"]
_NAMES = """alder bren cedda dunstan edric fenn godric hale ivor jorun kell
lief marek noll osric pell quill rennet sorrel tamsin ulf vesper wrenn""".split()


def make_grammar_corpus(n_tokens: int, seed: int = 0) -> str:
    """Deterministic English-like text from a tiny phrase grammar.

    Serves as the shipped training corpus for the toy model; roughly
    n_tokens whitespace tokens.
    """
    if n_tokens < 1:
        raise ConfigError("n_tokens must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))

    def noun_phrase() -> list[str]:
        r = rng.random()
        if r < 0.15:
            return [str(rng.choice(_NAMES))]
        words = [str(rng.choice(_DETS))]
        if rng.random() < 0.55:
            words.append(str(rng.choice(_ADJS)))
        if rng.random() < 0.12:
            words.append(str(rng.choice(_ADJS)))
        words.append(str(rng.choice(_NOUNS)))
        return words

    def verb_phrase() -> list[str]:
        words = [str(rng.choice(_VERBS))]
        r = rng.random()
        if r < 0.55:
            words += noun_phrase()
        elif r < 0.75:
            words.append(str(rng.choice(_ADVS)))
        if rng.random() < 0.35:
            words.append(str(rng.choice(_PREPS)))
            words += noun_phrase()
        return words

    out: list[str] = []
    while len(out) < n_tokens:
        sentence = noun_phrase() + verb_phrase()
        if rng.random() < 0.25:
            sentence += [str(rng.choice(["and", "but", "while", "because"]))]
            sentence += noun_phrase() + verb_phrase()
        sentence[-1] = sentence[-1] + "."
        out.extend(sentence)
    return " ".join(out[:n_tokens])


# ---------------------------------------------------------------------------
# Synthetic logit stream with calibrated spike entropy.
# ---------------------------------------------------------------------------


def _power_distribution(log_base: np.ndarray, exponent: float) -> np.ndarray:
    w = exponent * log_base
    w -= w.max()
    q = np.exp(w)
    return q / q.sum()


@dataclass
class SyntheticSource:
    """LmSource emitting random distributions with a pinned spike entropy.

    Draws a library of Dirichlet-style base distributions and rescales
    each one (bisection over a sharpening exponent) until its spike
    entropy at ``modulus`` equals ``target``.  next_logits cycles
    through the library deterministically by context length.
    """

    vocab_size: int
    modulus: float
    target: float
    seed: int = 0
    library_size: int = 512
    dirichlet_alpha: float = 0.4
    library: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.modulus <= 0:
            raise ConfigError("modulus must be > 0")
        lo = 1.0 / (1.0 + self.modulus)
        hi = self.vocab_size / (self.vocab_size + self.modulus)
        if not (lo < self.target < hi):
            raise RangeError(
                f"target spike entropy {self.target} outside attainable "
                f"({lo:.6f}, {hi:.6f}) for modulus {self.modulus}, |V|={self.vocab_size}"
            )
        rng = np.random.Generator(np.random.PCG64(self.seed))
        base = rng.gamma(self.dirichlet_alpha, 1.0,
                         size=(self.library_size, self.vocab_size))
        base += 1e-300
        base /= base.sum(axis=1, keepdims=True)
        lib = np.empty_like(base)
        for i in range(self.library_size):
            lib[i] = self._calibrate(np.log(base[i]))
        self.library = lib

    def _calibrate(self, log_base: np.ndarray) -> np.ndarray:
        # Exponent s: s -> 0 flattens toward uniform (max entropy),
        # s -> inf sharpens toward a point mass (min entropy).
        lo, hi = -14.0, 14.0
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            q = _power_distribution(log_base, math.exp(mid))
            if spike_entropy(q, self.modulus) > self.target:
                lo = mid
            else:
                hi = mid
        q = _power_distribution(log_base, math.exp(0.5 * (lo + hi)))
        if abs(spike_entropy(q, self.modulus) - self.target) > 1e-6:
            raise RangeError(
                f"could not calibrate a draw to spike entropy {self.target}"
            )
        return q

    def probs_at(self, index: int) -> np.ndarray:
        return self.library[(index * 2654435761) % self.library_size]

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs_at(len(context)))

    def mean_spike_entropy(self, n_steps: int = 10_000) -> float:
        vals = [spike_entropy(self.probs_at(i), self.modulus)
                for i in range(n_steps)]
        return float(np.mean(vals))
