"""Steganographic entropy coding over language-model distributions."""

from .arithmetic import CoverText, IntervalState, compress_tokens, decode, encode
from .bits import BitMessage
from .errors import (
    CannotQuantizeError,
    ContextTooLongError,
    DesyncError,
    InvalidDistributionError,
    KeyMismatchError,
    MalformedStreamError,
    MessageTooLongError,
    ProtocolError,
    StegoError,
    TruncatedCoverError,
    UnsupportedTokenError,
)
from .baselines import (
    BlockKey,
    HuffmanTree,
    block_decode,
    block_encode,
    huffman_decode,
    huffman_encode,
)
from .keyconfig import KeyConfig
from .metrics import (
    StegoRecord,
    SweepPoint,
    bits_per_word,
    entropy_per_word,
    run_sweep,
    step_kl,
)
from .models import (
    LanguageModel,
    NGramModel,
    ToyModel,
    Vocabulary,
    iid_model,
    train_ngram,
)
from .modulation import (
    ModulationParams,
    TokenDistribution,
    modulate,
    next_distribution,
    quantize,
)
from .source import TextMessage, bits_to_text, hide, reveal, text_to_bits

__version__ = "0.1.0"
