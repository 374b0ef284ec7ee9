import numpy as np
import pytest

from tokenmark.prf import SeedKind, SeedingScheme, WatermarkConfig, WatermarkKey
from tokenmark.sources import WordTokenizer, make_grammar_corpus, train_ngram


def make_config(gamma=0.5, delta=2.0, h=1, vocab_size=64,
                kind=SeedKind.LEFT_HASH, salt=0, key=None):
    if key is not None:
        scheme = SeedingScheme.private(key, kind=kind, h=h)
    else:
        scheme = SeedingScheme.public(kind=kind, h=h, salt=salt)
    return WatermarkConfig(gamma=gamma, delta=delta, scheme=scheme,
                           vocab_size=vocab_size)


def random_key(rng: np.random.Generator, key_id: int = 0) -> WatermarkKey:
    return WatermarkKey(bytes(int(b) for b in rng.integers(0, 256, size=16)),
                        key_id=key_id)


@pytest.fixture(scope="session")
def toy_lm():
    """Corpus-trained trigram model shared by the experiment tests."""
    text = make_grammar_corpus(120_000, seed=7)
    tokenizer = WordTokenizer.from_corpus(text)
    ids = tokenizer.encode(text)
    lm = train_ngram([ids], n=3, smoothing=0.05, vocab_size=tokenizer.vocab_size)
    return lm, tokenizer, ids


@pytest.fixture(scope="session")
def prompt_pool(toy_lm):
    _, _, ids = toy_lm
    rng = np.random.Generator(np.random.PCG64(11))
    starts = rng.integers(0, len(ids) - 4, size=2000)
    return [list(ids[s:s + 3]) for s in starts]
