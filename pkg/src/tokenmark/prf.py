"""Keyed seeding and pseudorandom vocabulary partitioning.

This is the single source of truth shared by the generator and the
detector: both sides recompute identical green/red partitions from the
same (key, context) inputs.

Wire layout of every PRF call (bit-exact, little-endian token ids):

    SHA-256( tag_byte || key_bytes || token_ids_u32le... )

with tag 0x01 for left-hash window seeds, 0x02 for self-hash pair
hashes, 0x03 for multi-key mask derivation.  A 64-bit seed is the
least-significant 64 bits of the digest read as a big-endian integer,
i.e. ``digest[24:32]``.  Golden vectors for this layout are frozen in
``fixtures/prf_golden.json``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, WindowUnderflow

PRF_LAYOUT_VERSION = "1.0.0"

DOMAIN_LEFT_HASH = 0x01
DOMAIN_SELF_HASH = 0x02
DOMAIN_MULTI_KEY = 0x03

MIN_KEY_BYTES = 16

#: Token id used to left-pad contexts when the prompt is shorter than h.
BOS_ID = 0


@dataclass(frozen=True)
class WatermarkKey:
    """Opaque PRF key.  Two keys are equal iff their bytes are equal."""

    key_bytes: bytes
    key_id: int = 0

    def __post_init__(self):
        if not isinstance(self.key_bytes, bytes):
            raise ConfigError("key_bytes must be bytes")
        if len(self.key_bytes) < MIN_KEY_BYTES:
            raise ConfigError(
                f"key must be at least {MIN_KEY_BYTES} bytes, got {len(self.key_bytes)}"
            )

    @classmethod
    def from_salt(cls, salt: int) -> "WatermarkKey":
        """Public-mode key: the published salt encoded as 16 LE bytes."""
        if salt < 0:
            raise ConfigError("salt must be non-negative")
        return cls(key_bytes=int(salt).to_bytes(16, "little"), key_id=0)

    def fingerprint(self) -> str:
        """Hex digest of the key bytes (safe to publish for private keys)."""
        return hashlib.sha256(self.key_bytes).hexdigest()


class SeedKind(str, Enum):
    LEFT_HASH = "left_hash"
    SELF_HASH = "self_hash"


@dataclass(frozen=True)
class SeedingScheme:
    """How per-position seeds are derived from the token stream.

    ``kind`` selects plain window hashing (the mask for position t is a
    function of the previous h tokens) or the robust self-hash rule
    (the candidate token itself plus one pseudo-randomly selected prior
    token).  ``salt`` is set iff the scheme runs in public mode, in
    which case ``key`` was derived from it.
    """

    kind: SeedKind
    h: int
    key: WatermarkKey
    salt: int | None = None

    def __post_init__(self):
        if self.h < 1:
            raise ConfigError("window width h must be >= 1")

    @classmethod
    def public(cls, kind: SeedKind = SeedKind.LEFT_HASH, h: int = 1,
               salt: int = 0) -> "SeedingScheme":
        return cls(kind=kind, h=h, key=WatermarkKey.from_salt(salt), salt=salt)

    @classmethod
    def private(cls, key: WatermarkKey, kind: SeedKind = SeedKind.LEFT_HASH,
                h: int = 1) -> "SeedingScheme":
        return cls(kind=kind, h=h, key=key, salt=None)

    @property
    def is_public(self) -> bool:
        return self.salt is not None


@dataclass(frozen=True)
class GreenMask:
    """Boolean green/red partition of the vocabulary.  Immutable."""

    bits: np.ndarray
    green_count: int

    def __post_init__(self):
        self.bits.setflags(write=False)

    @property
    def vocab_size(self) -> int:
        return int(self.bits.shape[0])

    def green_ids(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def red_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.bits)


@dataclass(frozen=True)
class WatermarkConfig:
    """Parameters governing both generation and detection.

    ``delta`` may be ``math.inf`` to select the hard (red tokens
    forbidden) rule.
    """

    gamma: float
    delta: float
    scheme: SeedingScheme
    vocab_size: int

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.delta < 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be >= 2")
        if self.gamma * self.vocab_size < 1:
            raise ConfigError("green list would be empty: gamma * vocab_size < 1")
        if (1.0 - self.gamma) * self.vocab_size < 1:
            raise ConfigError(
                "red list would be empty under the hard rule: "
                "(1-gamma) * vocab_size < 1"
            )

    @property
    def green_count(self) -> int:
        return green_list_size(self.gamma, self.vocab_size)

    def fingerprint(self) -> str:
        """Stable hex fingerprint of everything the detector must share.

        Private key bytes are never serialized; only their digest enters
        the fingerprint.
        """
        payload = {
            "layout": PRF_LAYOUT_VERSION,
            "gamma": self.gamma,
            "delta": "inf" if math.isinf(self.delta) else self.delta,
            "vocab_size": self.vocab_size,
            "kind": self.scheme.kind.value,
            "h": self.scheme.h,
            "salt": self.scheme.salt,
            "key": self.scheme.key.fingerprint(),
            "key_id": self.scheme.key.key_id,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def green_list_size(gamma: float, vocab_size: int) -> int:
    """floor(gamma * |V|); floor keeps the z-test conservative."""
    return int(math.floor(gamma * vocab_size))


def _digest(tag: int, key_bytes: bytes, tokens: Iterable[int]) -> bytes:
    m = hashlib.sha256()
    m.update(bytes([tag]))
    m.update(key_bytes)
    for t in tokens:
        t = int(t)
        if t < 0 or t > 0xFFFFFFFF:
            raise ConfigError(f"token id {t} does not fit in u32")
        m.update(t.to_bytes(4, "little"))
    return m.digest()


def _seed64(digest: bytes) -> int:
    return int.from_bytes(digest[24:32], "big")


def seeding_window(tokens: Sequence[int], pos: int, h: int) -> tuple[int, ...]:
    """The h tokens preceding index ``pos``, left-padded with BOS_ID.

    Generator and detector both derive windows through this helper so
    short prompts stay replicable on the detection side.
    """
    if pos < 0 or pos > len(tokens):
        raise ConfigError(f"position {pos} outside sequence of length {len(tokens)}")
    window = tuple(tokens[max(0, pos - h):pos])
    if len(window) < h:
        window = (BOS_ID,) * (h - len(window)) + window
    return window


def compute_seed(context: Sequence[int], scheme: SeedingScheme) -> int:
    """64-bit seed for the mask at the position following ``context``.

    ``context`` must hold exactly the h most recent tokens, oldest
    first.  Callers with shorter history must left-pad with BOS_ID.
    """
    if len(context) < scheme.h:
        raise WindowUnderflow(
            f"context of length {len(context)} shorter than window h={scheme.h}; "
            f"left-pad with BOS_ID={BOS_ID}"
        )
    if len(context) != scheme.h:
        raise ConfigError(f"context length {len(context)} != h={scheme.h}")
    return _seed64(_digest(DOMAIN_LEFT_HASH, scheme.key.key_bytes, context))


@lru_cache(maxsize=8192)
def _partition_cached(seed: int, gamma: float, vocab_size: int) -> GreenMask:
    g = green_list_size(gamma, vocab_size)
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(vocab_size)
    bits = np.zeros(vocab_size, dtype=bool)
    bits[perm[:g]] = True
    return GreenMask(bits=bits, green_count=g)


def partition_vocab(seed: int, gamma: float, vocab_size: int) -> GreenMask:
    """Deterministic green/red split with exactly floor(gamma*|V|) greens.

    Seeded Fisher-Yates shuffle of [0, |V|); the first floor(gamma*|V|)
    positions of the shuffle are green.
    """
    if not (0.0 < gamma < 1.0):
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    g = green_list_size(gamma, vocab_size)
    if g < 1 or vocab_size - g < 1:
        raise ConfigError("partition would leave an empty green or red list")
    return _partition_cached(int(seed) & 0xFFFFFFFFFFFFFFFF, gamma, vocab_size)


def mask_for_context(context: Sequence[int], config: WatermarkConfig) -> GreenMask:
    """Left-hash mask for the position following ``context``."""
    seed = compute_seed(context, config.scheme)
    return partition_vocab(seed, config.gamma, config.vocab_size)


def self_hash_seed(candidate: int, context: Sequence[int],
                   scheme: SeedingScheme) -> tuple[int, int]:
    """(seed, i_star) for the self-hash rule.

    Hashes the candidate against each of the h prior tokens, takes the
    window offset i_star with the smallest hash (ties break toward the
    most recent token, i.e. smallest i), and returns that hash as the
    color seed.
    """
    if scheme.kind is not SeedKind.SELF_HASH:
        raise ConfigError("self_hash_seed requires a SELF_HASH scheme")
    if len(context) < scheme.h:
        raise WindowUnderflow(
            f"context of length {len(context)} shorter than window h={scheme.h}"
        )
    if len(context) != scheme.h:
        raise ConfigError(f"context length {len(context)} != h={scheme.h}")
    best_seed = None
    best_i = 0
    for i in range(1, scheme.h + 1):
        prior = context[-i]
        h_i = _seed64(_digest(DOMAIN_SELF_HASH, scheme.key.key_bytes,
                              (candidate, prior)))
        if best_seed is None or h_i < best_seed:
            best_seed = h_i
            best_i = i
    return best_seed, best_i


def self_hash_color(candidate: int, context: Sequence[int],
                    scheme: SeedingScheme, gamma: float) -> tuple[bool, int]:
    """Green/red decision for ``candidate`` under the self-hash rule.

    Returns (is_green, i_star).  The color is a uniform draw from a
    generator seeded with the winning pair hash, compared against gamma.
    """
    if not (0.0 < gamma < 1.0):
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    seed, i_star = self_hash_seed(candidate, context, scheme)
    u = np.random.Generator(np.random.PCG64(seed)).random()
    return bool(u < gamma), i_star


def _unrank_combination(rank: int, n: int, m: int) -> tuple[int, ...]:
    """rank-th m-subset of range(n) in lexicographic order."""
    out = []
    x = 0
    while m > 0:
        c = math.comb(n - x - 1, m - 1)
        if rank < c:
            out.append(x)
            m -= 1
        else:
            rank -= c
        x += 1
    return tuple(out)


def balanced_multikey_masks(keys: Sequence[WatermarkKey], seed: int,
                            vocab_size: int, gamma: float = 0.5) -> list[GreenMask]:
    """One mask per key such that every token is green for exactly k/2 keys.

    Averaged over the key set, every token's green frequency is exactly
    1/2, which removes the frequency-analysis signal a single fixed
    partition would leak.  Requires an even number of keys and
    gamma == 0.5; the balanced construction is undefined otherwise.
    """
    k = len(keys)
    if k < 2 or k % 2 != 0:
        raise ConfigError(f"balanced construction needs an even key count >= 2, got {k}")
    if gamma != 0.5:
        raise ConfigError("balanced construction requires gamma == 0.5")
    key_blob = b"".join(key.key_bytes for key in keys)
    key_blob += (int(seed) & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    n_subsets = math.comb(k, k // 2)
    bits = np.zeros((k, vocab_size), dtype=bool)
    for token in range(vocab_size):
        r = _seed64(_digest(DOMAIN_MULTI_KEY, key_blob, (token,))) % n_subsets
        for key_index in _unrank_combination(r, k, k // 2):
            bits[key_index, token] = True
    return [
        GreenMask(bits=bits[i].copy(), green_count=int(bits[i].sum()))
        for i in range(k)
    ]
