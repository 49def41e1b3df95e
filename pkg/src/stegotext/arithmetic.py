"""Fixed-precision arithmetic coding over model distributions.

The message is read as the binary fraction 0.b1 b2 b3... in [0, 1).
Each step splits the current interval into bins proportional to the
quantized next-token weights; the bin containing the message point
names the emitted token.  Whenever both interval ends agree on a
leading bit that bit is settled and shifted out, and when the interval
straddles the midpoint too tightly the middle half is expanded and the
deferred bit is tracked until the straddle resolves.  Decoding replays
the identical narrowing from the tokens and emits each bit as soon as
the interval pins it down.

The integer registers carry two bits more than the quantization
precision.  That keeps the renormalized interval wider than the weight
total, so every weight-1 bin keeps a nonzero slice and stays decodable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

from .bits import HEADER_BITS, BitMessage, frame, padded_stream, unframe
from .errors import MessageTooLongError, TruncatedCoverError
from .models import LanguageModel
from .modulation import ModulationParams, next_distribution

# Register width margin over the quantization precision.  The interval
# never shrinks below a quarter of the register range between steps, so
# a margin of 2 guarantees range > total at every subdivision.
REGISTER_MARGIN = 2


@dataclass(frozen=True)
class IntervalState:
    """Snapshot of the live coding interval [low, high)."""

    low: int
    high: int
    consumed_bits: int


@dataclass(frozen=True)
class CoverText:
    """Generated tokens plus the conditioning context they extend.

    The context is shared key material, not part of the transmitted
    secret; every token was drawn from the support of its step's
    modulated, quantized distribution.
    """

    tokens: Tuple[int, ...]
    context: Tuple[int, ...]


def default_max_tokens(framed_len: int) -> int:
    return 4 * framed_len + 64


def encode_stream(bit_at: Callable[[int], int],
                  stop: Callable[[List[int], int], bool],
                  context: Sequence[int], model: LanguageModel,
                  params: ModulationParams, max_tokens: int,
                  trace: Optional[Callable] = None) -> Tuple[List[int], List[int]]:
    """Drive token selection from a bit stream until ``stop`` says done.

    ``stop(tokens, settled)`` is consulted between steps with the tokens
    emitted so far and the count of message bits settled so far.
    Returns (tokens, per-step settled bit counts).
    """
    model.validate_context(context)
    reg_bits = params.precision + REGISTER_MARGIN
    full = 1 << reg_bits
    half = full >> 1
    quarter = full >> 2
    three_quarters = half + quarter

    low, high = 0, full
    register = 0
    for pos in range(reg_bits):
        register = (register << 1) | bit_at(pos)
    pos = reg_bits
    consumed = 0
    pending = 0
    tokens: List[int] = []
    step_bits: List[int] = []
    ctx = list(context)

    while not stop(tokens, consumed):
        if len(tokens) >= max_tokens:
            raise MessageTooLongError(
                f"needed more than {max_tokens} tokens "
                f"(settled {consumed} bits so far)",
                tokens=tokens, state=IntervalState(low, high, consumed))
        dist = next_distribution(model, ctx, params)
        span = high - low
        total = dist.total
        # scale the register point back to [0, total) and locate its bin
        value = ((register - low + 1) * total - 1) // span
        k = dist.find_bin(value)
        cum = dist.cum
        new_low = low + span * cum[k] // total
        new_high = low + span * cum[k + 1] // total
        assert new_low <= register < new_high
        low, high = new_low, new_high
        token = dist.ids[k]
        tokens.append(token)
        ctx.append(token)

        settled = 0
        while True:
            if high <= half:
                agreed = True
            elif low >= half:
                low -= half
                high -= half
                register -= half
                agreed = True
            elif low >= quarter and high <= three_quarters:
                low -= quarter
                high -= quarter
                register -= quarter
                pending += 1
                agreed = False
            else:
                break
            if agreed:
                settled += 1 + pending
                pending = 0
            low <<= 1
            high <<= 1
            register = (register << 1) | bit_at(pos)
            pos += 1
        consumed += settled
        step_bits.append(settled)
        if trace is not None:
            trace(IntervalState(low, high, consumed))
    return tokens, step_bits


def decode_stream(tokens: Sequence[int], context: Sequence[int],
                  model: LanguageModel, params: ModulationParams,
                  stop_bits: Optional[Callable[[List[int]], Optional[int]]] = None,
                  trace: Optional[Callable] = None) -> List[int]:
    """Replay the interval narrowing and emit bits as they settle.

    ``stop_bits`` maps the bits recovered so far to the total number
    needed, or None while that is still unknown; decoding stops as soon
    as the target is met, even mid-token.
    """
    model.validate_context(context)
    reg_bits = params.precision + REGISTER_MARGIN
    full = 1 << reg_bits
    half = full >> 1
    quarter = full >> 2
    three_quarters = half + quarter

    low, high = 0, full
    pending = 0
    out: List[int] = []
    ctx = list(context)
    target = stop_bits(out) if stop_bits is not None else None

    for token in tokens:
        dist = next_distribution(model, ctx, params)
        k = dist.index_of(token)
        span = high - low
        total = dist.total
        cum = dist.cum
        new_low = low + span * cum[k] // total
        new_high = low + span * cum[k + 1] // total
        assert new_low < new_high
        low, high = new_low, new_high
        ctx.append(token)

        while True:
            if high <= half:
                bit = 0
            elif low >= half:
                bit = 1
                low -= half
                high -= half
            elif low >= quarter and high <= three_quarters:
                low -= quarter
                high -= quarter
                pending += 1
                low <<= 1
                high <<= 1
                continue
            else:
                break
            out.append(bit)
            out.extend([1 - bit] * pending)
            pending = 0
            low <<= 1
            high <<= 1
            if stop_bits is not None:
                target = stop_bits(out)
                if target is not None and len(out) >= target:
                    return out[:target]
        if trace is not None:
            trace(IntervalState(low, high, len(out)))
    if stop_bits is not None:
        raise TruncatedCoverError(
            f"cover exhausted after {len(out)} bits"
            + (f" of {target} needed" if target is not None else " with header incomplete"))
    return out


def compress_tokens(tokens: Sequence[int], context: Sequence[int],
                    model: LanguageModel, params: ModulationParams) -> List[int]:
    """Arithmetic-compress a token sequence into a self-contained bit stream.

    Narrowing and bit emission follow :func:`decode_stream` exactly; the
    trailing flush then emits the deferred straddle bits plus one
    disambiguating bit, enough that any continuation of the returned
    stream replays the full token sequence.
    """
    if not tokens:
        raise ValueError("nothing to compress")
    model.validate_context(context)
    reg_bits = params.precision + REGISTER_MARGIN
    full = 1 << reg_bits
    half = full >> 1
    quarter = full >> 2
    three_quarters = half + quarter

    low, high = 0, full
    pending = 0
    out: List[int] = []
    ctx = list(context)
    for token in tokens:
        dist = next_distribution(model, ctx, params)
        k = dist.index_of(token)
        span = high - low
        total = dist.total
        cum = dist.cum
        low, high = low + span * cum[k] // total, low + span * cum[k + 1] // total
        ctx.append(token)
        while True:
            if high <= half:
                bit = 0
            elif low >= half:
                bit = 1
                low -= half
                high -= half
            elif low >= quarter and high <= three_quarters:
                low -= quarter
                high -= quarter
                pending += 1
                low <<= 1
                high <<= 1
                continue
            else:
                break
            out.append(bit)
            out.extend([1 - bit] * pending)
            pending = 0
            low <<= 1
            high <<= 1
    # flush: pick the quarter whose cylinder sits inside [low, high)
    pending += 1
    if low < quarter:
        out.append(0)
        out.extend([1] * pending)
    else:
        out.append(1)
        out.extend([0] * pending)
    return out


def encode(message: BitMessage, context: Sequence[int], model: LanguageModel,
           params: ModulationParams, max_tokens: Optional[int] = None,
           trace: Optional[Callable] = None) -> CoverText:
    """Hide a framed message in a token sequence continuing ``context``."""
    framed = frame(message.payload)
    if max_tokens is None:
        max_tokens = default_max_tokens(len(framed))
    framed_len = len(framed)
    tokens, _ = encode_stream(padded_stream(framed),
                              lambda _toks, settled: settled >= framed_len,
                              context, model, params, max_tokens, trace=trace)
    return CoverText(tokens=tuple(tokens), context=tuple(context))


def decode(cover: CoverText, model: LanguageModel,
           params: ModulationParams) -> BitMessage:
    """Recover the payload hidden by :func:`encode` with the same key."""

    def stop_bits(bits: List[int]) -> Optional[int]:
        if len(bits) < HEADER_BITS:
            return None
        n = 0
        for b in bits[:HEADER_BITS]:
            n = (n << 1) | b
        return HEADER_BITS + n

    framed = decode_stream(cover.tokens, cover.context, model, params,
                           stop_bits=stop_bits)
    return BitMessage.from_bits(unframe(framed))


def encode_raw(bits: Sequence[int], context: Sequence[int], model: LanguageModel,
               params: ModulationParams, max_tokens: Optional[int] = None,
               trace: Optional[Callable] = None) -> Tuple[List[int], List[int]]:
    """Framing-disabled encode; the raw bits are the whole stream."""
    if not bits:
        raise ValueError("nothing to encode")
    if max_tokens is None:
        max_tokens = default_max_tokens(len(bits))
    n = len(bits)
    return encode_stream(padded_stream(bits),
                         lambda _toks, settled: settled >= n,
                         context, model, params, max_tokens, trace=trace)


def decode_raw(tokens: Sequence[int], context: Sequence[int], model: LanguageModel,
               params: ModulationParams, n_bits: int) -> List[int]:
    """Framing-disabled decode of the first ``n_bits`` settled bits."""
    return decode_stream(tokens, context, model, params,
                         stop_bits=lambda bits: n_bits)
