"""Per-step logit transformations: hard masking and the soft green boost.

All functions are pure and operate on 1-D float64 arrays of length
|V|.  -inf entries are legal sentinels and map to exact-zero
probability.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .prf import GreenMask


def _check_lengths(logits: np.ndarray, mask: GreenMask) -> None:
    if logits.shape != (mask.vocab_size,):
        raise ConfigError(
            f"logit vector of shape {logits.shape} does not match vocab {mask.vocab_size}"
        )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax; -inf entries become exact zeros."""
    logits = np.asarray(logits, dtype=np.float64)
    m = np.max(logits)
    if not np.isfinite(m):
        if m == -np.inf:
            raise ConfigError("softmax of an all -inf vector is undefined")
        raise ConfigError("logits contain +inf or NaN")
    ex = np.exp(logits - m)
    return ex / ex.sum()


def hard_warp(logits: np.ndarray, mask: GreenMask) -> np.ndarray:
    """Forbid red tokens: red logits to -inf, green logits untouched."""
    logits = np.asarray(logits, dtype=np.float64)
    _check_lengths(logits, mask)
    if mask.green_count < 1:
        raise ConfigError("all-red mask is unsampleable")
    out = logits.copy()
    out[~mask.bits] = -np.inf
    return out


def soft_warp(logits: np.ndarray, mask: GreenMask, delta: float) -> np.ndarray:
    """Probabilities after adding delta to every green logit.

    Green token k gets exp(l_k + delta) and red token k gets exp(l_k),
    both over the shared normalizer sum_R exp(l_i) + sum_G exp(l_i + delta).
    delta = inf reduces to the hard rule.
    """
    logits = np.asarray(logits, dtype=np.float64)
    _check_lengths(logits, mask)
    if delta < 0:
        raise ConfigError(f"delta must be >= 0, got {delta}")
    if math.isinf(delta):
        return softmax(hard_warp(logits, mask))
    boosted = logits + delta * mask.bits
    return softmax(boosted)


def apply_temperature(logits: np.ndarray, temp: float) -> np.ndarray:
    """Divide logits by temp.  Applied before the green boost."""
    if temp <= 0:
        raise ConfigError(f"temperature must be > 0, got {temp}")
    logits = np.asarray(logits, dtype=np.float64)
    return logits / temp
