"""Red/green-list watermarking for language-model token streams.

Watermark-aware generation over any next-token source, model-free
statistical detection, closed-form sensitivity bounds with brute-force
oracles, keyed/private operation, and an attack harness -- all runnable
at desk scale with a built-in toy model.
"""

from .bounds import (
    BoundReport,
    build_bound_report,
    expected_green_lower_bound,
    green_variance_upper_bound,
    green_probability_lower_bound,
    spike_entropy,
    bound_coefficient,
    bound_modulus,
)
from .detect import (
    DetectionReport,
    DetectorOptions,
    multi_key_score,
    p_value,
    score,
    z_score,
)
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
    WindowUnderflow,
)
from .generate import DecodeSpec, TokenSequence, beam_generate, generate, generate_self_hash
from .prf import (
    BOS_ID,
    PRF_LAYOUT_VERSION,
    GreenMask,
    SeedKind,
    SeedingScheme,
    WatermarkConfig,
    WatermarkKey,
    balanced_multikey_masks,
    compute_seed,
    partition_vocab,
    self_hash_color,
)
from .sources import LmSource, NGramLM, SyntheticSource, WordTokenizer, train_ngram
from .textnorm import CanonicalizationPolicy, canonicalize, default_policy
from .warp import apply_temperature, hard_warp, soft_warp, softmax

__version__ = "0.1.0"
