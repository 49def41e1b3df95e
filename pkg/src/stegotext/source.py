"""Text <-> near-uniform bits, and the full hide/reveal pipeline.

Natural-language messages are first compressed into bits by running the
arithmetic coder against the shared model with an empty context (just
the start marker), which makes the channel carry close to one model-bit
of payload per cover-bit of capacity.  The same coder run in the other
direction regenerates the message text, terminating on the end marker
carried inside the compressed stream.

Source coding defaults to the unmodulated model (temperature 1, full
vocabulary): truncation would zero out tail tokens and make some
messages unencodable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .arithmetic import (
    CoverText,
    compress_tokens,
    decode,
    default_max_tokens,
    encode,
    encode_stream,
)
from .bits import BitMessage, padded_stream
from .errors import (
    DesyncError,
    MalformedStreamError,
    MessageTooLongError,
    UnsupportedTokenError,
)
from .models import LanguageModel
from .modulation import DEFAULT_PRECISION, ModulationParams

SOURCE_PARAMS = ModulationParams(temperature=1.0, top_k=None,
                                 precision=DEFAULT_PRECISION)


@dataclass(frozen=True)
class TextMessage:
    """A message as model tokens, terminated by exactly one end marker."""

    tokens: Tuple[int, ...]

    def validate(self, eos_id: int) -> None:
        if not self.tokens or self.tokens[-1] != eos_id:
            raise ValueError("message must end with the end-of-text marker")
        if eos_id in self.tokens[:-1]:
            raise ValueError("end-of-text marker may only appear at the end")

    @classmethod
    def from_words(cls, words: Sequence[str], model: LanguageModel) -> "TextMessage":
        vocab = model.vocabulary()
        ids = vocab.encode_words(words) + [vocab.eos_id]
        return cls(tokens=tuple(ids))

    def words(self, model: LanguageModel) -> List[str]:
        vocab = model.vocabulary()
        return vocab.decode_ids(self.tokens[:-1])


def empty_context(model: LanguageModel) -> Tuple[int, ...]:
    """The conventional empty context: just the start marker."""
    return (model.vocabulary().bos_id,)


def text_to_bits(message: TextMessage, model: LanguageModel,
                 params: ModulationParams = SOURCE_PARAMS) -> List[int]:
    """Compress message tokens into a self-delimiting bit stream.

    The end-of-message convention is one-way symmetric with
    :func:`bits_to_text`: the message consisting of only the end marker
    compresses to the empty stream.
    """
    eos = model.vocabulary().eos_id
    message.validate(eos)
    if message.tokens == (eos,):
        return []
    try:
        return compress_tokens(message.tokens, empty_context(model), model, params)
    except DesyncError as exc:
        raise UnsupportedTokenError(
            f"message token has zero probability under these parameters: {exc}"
        ) from None


def bits_to_text(bits: Sequence[int], model: LanguageModel,
                 params: ModulationParams = SOURCE_PARAMS,
                 max_tokens: Optional[int] = None) -> TextMessage:
    """Exact inverse of :func:`text_to_bits`; terminates on the end marker.

    The stream is verified by re-compressing the decoded message: any
    truncated or corrupted stream that still happens to decode is
    rejected rather than silently returning the wrong text.
    """
    eos = model.vocabulary().eos_id
    if not bits:
        return TextMessage(tokens=(eos,))
    if max_tokens is None:
        max_tokens = default_max_tokens(len(bits))
    try:
        tokens, _ = encode_stream(
            padded_stream(bits),
            lambda toks, _settled: bool(toks) and toks[-1] == eos,
            empty_context(model), model, params, max_tokens)
    except MessageTooLongError as exc:
        raise MalformedStreamError(
            f"no end marker within {max_tokens} tokens; "
            "stream is truncated or was made with a different key") from exc
    message = TextMessage(tokens=tuple(tokens))
    if text_to_bits(message, model, params) != list(bits):
        raise MalformedStreamError(
            "stream does not re-compress to itself; truncated or corrupted")
    return message


def hide(message: TextMessage, cover_context: Sequence[int], model: LanguageModel,
         source_params: ModulationParams = SOURCE_PARAMS,
         cover_params: ModulationParams = ModulationParams(),
         max_tokens: Optional[int] = None) -> CoverText:
    """Compress the message with an empty context, then embed the bits in
    cover text continuing ``cover_context``."""
    payload = text_to_bits(message, model, source_params)
    return encode(BitMessage.from_bits(payload), cover_context, model,
                  cover_params, max_tokens=max_tokens)


def reveal(cover: CoverText, model: LanguageModel,
           source_params: ModulationParams = SOURCE_PARAMS,
           cover_params: ModulationParams = ModulationParams()) -> TextMessage:
    """Recover the hidden bits from the cover, then regenerate the text."""
    payload = decode(cover, model, cover_params)
    return bits_to_text(list(payload.payload), model, source_params)
