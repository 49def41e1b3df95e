"""Heuristic generative baselines: random-bin block coding and per-step
Huffman coding.

Both operate on the raw (unmodulated, unquantized) model distribution.
Block coding splits the vocabulary into 2**block_bits seeded random
bins and spends exactly ``block_bits`` message bits per token by taking
the most likely token of the addressed bin.  Huffman coding rebuilds a
prefix tree over the truncated, renormalized distribution at every step
and walks it with message bits, so tokens carry variable-length chunks.
"""

from __future__ import annotations

import heapq
import itertools
import struct
import threading
import weakref
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .arithmetic import CoverText, default_max_tokens
from .bits import BitMessage, frame, padded_stream, unframe
from .errors import DesyncError, InvalidDistributionError, KeyMismatchError, MessageTooLongError, TruncatedCoverError
from .models import LanguageModel

_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def splitmix64(seed: int):
    """The splitmix64 stream; integer-only, identical on every platform."""
    state = seed & _MASK64
    while True:
        state = (state + _SPLITMIX_GAMMA) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


@dataclass(frozen=True)
class BlockKey:
    """Seeded random split of the vocabulary into 2**block_bits bins.

    The assignment is a pure function of (seed, vocabulary size,
    block_bits): a splitmix64-driven Fisher-Yates shuffle of the token
    ids followed by round-robin bin assignment.  Serialized form is just
    (block_bits, seed); the assignment is always rederived.
    """

    block_bits: int
    seed: int
    vocab_size: int
    assignment: Tuple[int, ...] = field(init=False, compare=False, repr=False)
    bins: Tuple[Tuple[int, ...], ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.block_bits < 1:
            raise ValueError("block_bits must be >= 1")
        if not 0 <= self.seed < (1 << 64):
            raise ValueError("seed must fit in 64 bits")
        n_bins = 1 << self.block_bits
        ids = list(range(self.vocab_size))
        stream = splitmix64(self.seed)
        for i in range(self.vocab_size - 1, 0, -1):
            j = next(stream) % (i + 1)
            ids[i], ids[j] = ids[j], ids[i]
        assignment = [0] * self.vocab_size
        bins: List[List[int]] = [[] for _ in range(n_bins)]
        for position, token in enumerate(ids):
            b = position % n_bins
            assignment[token] = b
            bins[b].append(token)
        object.__setattr__(self, "assignment", tuple(assignment))
        # ascending ids inside each bin so argmax ties resolve to the lowest id
        object.__setattr__(self, "bins", tuple(tuple(sorted(b)) for b in bins))
        object.__setattr__(self, "_bins_np",
                           tuple(np.array(b, dtype=np.int64) for b in self.bins))

    @property
    def n_bins(self) -> int:
        return 1 << self.block_bits

    def to_bytes(self) -> bytes:
        return struct.pack(">HQ", self.block_bits, self.seed)

    @classmethod
    def from_bytes(cls, data: bytes, vocab_size: int) -> "BlockKey":
        block_bits, seed = struct.unpack(">HQ", data)
        return cls(block_bits=block_bits, seed=seed, vocab_size=vocab_size)


# Per-step structures are pure functions of (model, resolved context),
# so both baselines memoize them the same way the quantizer does.
_STEP_CACHE: "weakref.WeakKeyDictionary[LanguageModel, dict]" = weakref.WeakKeyDictionary()
_STEP_LOCK = threading.Lock()
_STEP_CAP = 1 << 18


def _step_cached(model: LanguageModel, key, build):
    with _STEP_LOCK:
        per_model = _STEP_CACHE.setdefault(model, {})
        hit = per_model.get(key)
    if hit is not None:
        return hit
    value = build()
    with _STEP_LOCK:
        if len(per_model) >= _STEP_CAP:
            per_model.clear()
        per_model[key] = value
    return value


def _bin_argmaxes(model: LanguageModel, context: Sequence[int],
                  key: BlockKey) -> Tuple[int, ...]:
    """Most likely token of every bin at this step; ties to the lowest id."""

    def build():
        probs = model.raw_distribution(context)
        out = []
        for members in key._bins_np:
            if members.size == 0:
                raise KeyMismatchError("a bin is empty for this vocabulary")
            out.append(int(members[probs[members].argmax()]))
        return tuple(out)

    return _step_cached(model, ("block", model.context_key(context),
                                key.block_bits, key.seed), build)


def block_encode(message: BitMessage, context: Sequence[int], model: LanguageModel,
                 key: BlockKey, max_tokens: Optional[int] = None,
                 frame_message: bool = True) -> CoverText:
    """Spend block_bits framed bits per token via bin argmax."""
    model.validate_context(context)
    framed = frame(message.payload) if frame_message else list(message.payload)
    bit_at = padded_stream(framed)
    width = key.block_bits
    n_chunks = -(-len(framed) // width)
    if max_tokens is None:
        max_tokens = default_max_tokens(len(framed))
    if n_chunks > max_tokens:
        raise MessageTooLongError(
            f"{n_chunks} chunks exceed the {max_tokens} token budget")
    ctx = list(context)
    tokens = []
    for chunk in range(n_chunks):
        index = 0
        for i in range(width):
            index = (index << 1) | bit_at(chunk * width + i)
        token = _bin_argmaxes(model, ctx, key)[index]
        tokens.append(token)
        ctx.append(token)
    return CoverText(tokens=tuple(tokens), context=tuple(context))


def block_decode(cover: CoverText, model: LanguageModel, key: BlockKey,
                 frame_message: bool = True):
    """Read each token's bin index back as a block_bits chunk."""
    ctx = list(cover.context)
    bits: List[int] = []
    for token in cover.tokens:
        if not 0 <= token < key.vocab_size:
            raise DesyncError(f"token id {token} outside the keyed vocabulary")
        b = key.assignment[token]
        if token != _bin_argmaxes(model, ctx, key)[b]:
            raise DesyncError(
                f"token {token} is not the argmax of its bin; wrong key or tampering")
        bits.extend((b >> (key.block_bits - 1 - i)) & 1 for i in range(key.block_bits))
        ctx.append(token)
    if not frame_message:
        return bits
    try:
        return BitMessage.from_bits(unframe(bits))
    except ValueError as exc:
        raise TruncatedCoverError(str(exc)) from None


class HuffmanTree:
    """Prefix code over the top-``truncation`` tokens of one step.

    Merge order and branch labeling are pinned so both channel ends
    build the identical tree: nodes merge lowest weight first (ties by
    smallest contained token id), and at every merge the
    higher-probability subtree takes bit 0 (ties to the smaller minimum
    token id).
    """

    def __init__(self, entries: Sequence[Tuple[int, float]]):
        if len(entries) < 1:
            raise InvalidDistributionError("no tokens to code")
        if len(entries) == 1:
            # degenerate tree: zero-length code cannot carry bits
            raise InvalidDistributionError("Huffman coding needs at least 2 tokens")
        counter = itertools.count()
        heap = []
        for token_id, p in entries:
            heapq.heappush(heap, (p, token_id, next(counter), ("leaf", token_id)))
        while len(heap) > 1:
            pa, ma, _, a = heapq.heappop(heap)
            pb, mb, _, b = heapq.heappop(heap)
            # bit 0 goes to the higher-probability child; on a probability
            # tie the heap already popped the smaller min-id subtree first
            if pb > pa:
                zero, one = b, a
            else:
                zero, one = a, b
            heapq.heappush(heap, (pa + pb, min(ma, mb), next(counter), ("node", zero, one)))
        self.root = heap[0][3]
        self.codes: Dict[int, Tuple[int, ...]] = {}
        self._fill(self.root, ())

    def _fill(self, node, prefix: Tuple[int, ...]) -> None:
        if node[0] == "leaf":
            self.codes[node[1]] = prefix
        else:
            self._fill(node[1], prefix + (0,))
            self._fill(node[2], prefix + (1,))

    def walk(self, bit_at: Callable[[int], int], pos: int) -> Tuple[int, int]:
        """Descend by stream bits from ``pos``; returns (token, new pos)."""
        node = self.root
        while node[0] == "node":
            node = node[1 + bit_at(pos)]
            pos += 1
        return node[1], pos


def step_huffman(model: LanguageModel, context: Sequence[int],
                 truncation: int) -> HuffmanTree:
    """Tree over the top-``truncation`` renormalized raw distribution."""
    if truncation < 2:
        raise ValueError("truncation must be >= 2")

    def build():
        probs = model.raw_distribution(context)
        support = np.flatnonzero(probs > 0.0)
        order = np.lexsort((support, -probs[support]))[:truncation]
        chosen = support[order]
        mass = probs[chosen]
        mass = mass / mass.sum()
        return HuffmanTree([(int(t), float(p)) for t, p in zip(chosen, mass)])

    return _step_cached(model, ("huffman", model.context_key(context), truncation),
                        build)


def huffman_encode(message: BitMessage, context: Sequence[int], model: LanguageModel,
                   truncation: int, max_tokens: Optional[int] = None,
                   frame_message: bool = True) -> CoverText:
    """Walk a fresh per-step tree until every framed bit is spent."""
    model.validate_context(context)
    framed = frame(message.payload) if frame_message else list(message.payload)
    bit_at = padded_stream(framed)
    if max_tokens is None:
        max_tokens = default_max_tokens(len(framed))
    ctx = list(context)
    tokens = []
    pos = 0
    while pos < len(framed):
        if len(tokens) >= max_tokens:
            raise MessageTooLongError(
                f"needed more than {max_tokens} tokens for {len(framed)} bits")
        tree = step_huffman(model, ctx, truncation)
        token, pos = tree.walk(bit_at, pos)
        tokens.append(token)
        ctx.append(token)
    return CoverText(tokens=tuple(tokens), context=tuple(context))


def huffman_decode(cover: CoverText, model: LanguageModel, truncation: int,
                   frame_message: bool = True):
    """Rebuild each step's tree and read the tokens' codes back."""
    ctx = list(cover.context)
    bits: List[int] = []
    for token in cover.tokens:
        tree = step_huffman(model, ctx, truncation)
        code = tree.codes.get(token)
        if code is None:
            raise DesyncError(
                f"token {token} outside the top-{truncation} set at this step")
        bits.extend(code)
        ctx.append(token)
    if not frame_message:
        return bits
    try:
        return BitMessage.from_bits(unframe(bits))
    except ValueError as exc:
        raise TruncatedCoverError(str(exc)) from None
