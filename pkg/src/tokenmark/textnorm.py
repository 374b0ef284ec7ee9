"""Input canonicalization applied before tokenization and detection.

Maps confusable Cyrillic/Greek codepoints onto their Latin lookalikes,
strips zero-width characters, and folds whitespace runs, so that
homoglyph and invisible-character edits cannot reseed the detector's
windows.  canonicalize is idempotent by construction.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import ConfigError, EncodingError

ZERO_WIDTH = (
    "​"  # zero-width space
    "‌"  # zero-width non-joiner
    "‍"  # zero-width joiner
    "⁠"  # word joiner
    "﻿"  # BOM / zero-width no-break space
    "­"  # soft hyphen
    "᠎"  # Mongolian vowel separator
    "͏"  # combining grapheme joiner
)

_ZERO_WIDTH_RE = re.compile(f"[{ZERO_WIDTH}]+")
_WHITESPACE_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class CanonicalizationPolicy:
    homoglyph_map: dict[str, str] = field(default_factory=dict)
    strip_zero_width: bool = True
    collapse_whitespace: bool = True

    def __post_init__(self):
        for src, dst in self.homoglyph_map.items():
            if len(src) != 1 or len(dst) < 1:
                raise ConfigError(f"bad homoglyph entry {src!r} -> {dst!r}")
            final = self.homoglyph_map.get(dst, dst)
            if final != dst:
                raise ConfigError(
                    f"homoglyph target {dst!r} is itself remapped; map must be idempotent"
                )


def load_policy(path: str | None = None) -> CanonicalizationPolicy:
    """Policy from a JSON table; the packaged default when path is None."""
    if path is None:
        data = resources.files("tokenmark").joinpath(
            "fixtures/confusables.json").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as f:
            data = f.read()
    obj = json.loads(data)
    return CanonicalizationPolicy(
        homoglyph_map=dict(obj.get("homoglyph_map", {})),
        strip_zero_width=bool(obj.get("strip_zero_width", True)),
        collapse_whitespace=bool(obj.get("collapse_whitespace", True)),
    )


def default_policy() -> CanonicalizationPolicy:
    return load_policy(None)


def canonicalize(text: str, policy: CanonicalizationPolicy | None = None) -> str:
    """Normalize a string for hashing/detection.  Idempotent."""
    if not isinstance(text, str):
        raise EncodingError("canonicalize expects a unicode string")
    policy = policy or default_policy()
    if policy.strip_zero_width:
        text = _ZERO_WIDTH_RE.sub("", text)
    if policy.homoglyph_map:
        text = text.translate({ord(s): d for s, d in policy.homoglyph_map.items()})
    if policy.collapse_whitespace:
        text = _WHITESPACE_RE.sub(" ", text).strip()
    return text


def canonicalize_bytes(raw: bytes,
                       policy: CanonicalizationPolicy | None = None) -> str:
    """Decode UTF-8 and canonicalize; invalid bytes raise EncodingError."""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise EncodingError(f"input is not valid UTF-8: {e}") from e
    return canonicalize(text, policy)
