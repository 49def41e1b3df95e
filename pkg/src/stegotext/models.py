"""Conditional next-token models the coders consume.

Every model exposes the same two-method contract: a fixed vocabulary and
a deterministic ``raw_distribution(context)`` returning a probability
vector over that vocabulary.  Determinism is load-bearing: the decoder
replays the encoder's distributions step by step, so any nondeterminism
is a desync.

Two concrete models live here: a hand-specifiable table model for exact
tests and demos, and a trainable n-gram model with add-alpha smoothing
and stupid backoff (truncate the context to the longest seen suffix).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Hashable, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import UnsupportedTokenError

BOS_ID = 0
EOS_ID = 1
BOS_SURFACE = "<bos>"
EOS_SURFACE = "<eos>"


@dataclass(frozen=True)
class Token:
    """A vocabulary entry; ``surface`` is display-only."""

    id: int
    surface: str


@dataclass(frozen=True)
class Vocabulary:
    """Bijective id <-> surface table with reserved start/end markers."""

    surfaces: Tuple[str, ...]
    bos_id: int = BOS_ID
    eos_id: int = EOS_ID
    _index: Dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        index = {s: i for i, s in enumerate(self.surfaces)}
        if len(index) != len(self.surfaces):
            raise ValueError("vocabulary surfaces must be unique")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocabulary":
        """Build a vocabulary with <bos>/<eos> at the reserved ids 0 and 1."""
        distinct = sorted(set(words))
        for reserved in (BOS_SURFACE, EOS_SURFACE):
            if reserved in distinct:
                raise ValueError(f"corpus word collides with reserved marker {reserved!r}")
        return cls(surfaces=(BOS_SURFACE, EOS_SURFACE, *distinct))

    def __len__(self) -> int:
        return len(self.surfaces)

    def id_of(self, surface: str) -> int:
        try:
            return self._index[surface]
        except KeyError:
            raise UnsupportedTokenError(f"token {surface!r} not in vocabulary") from None

    def surface_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.surfaces):
            raise UnsupportedTokenError(f"token id {token_id} out of range")
        return self.surfaces[token_id]

    def encode_words(self, words: Sequence[str]) -> List[int]:
        return [self.id_of(w) for w in words]

    def decode_ids(self, ids: Sequence[int]) -> List[str]:
        return [self.surface_of(i) for i in ids]


class LanguageModel:
    """Behavior contract every coder relies on.

    ``raw_distribution`` must be a pure function of the context: the same
    context always yields the identical vector.  The vector covers the
    full vocabulary and sums to 1 within 1e-9 relative tolerance.
    """

    def vocabulary(self) -> Vocabulary:
        raise NotImplementedError

    def raw_distribution(self, context: Sequence[int]) -> np.ndarray:
        raise NotImplementedError

    def context_key(self, context: Sequence[int]) -> Hashable:
        """Minimal sufficient statistic of the context, used as a cache key."""
        return tuple(context)

    def validate_context(self, context: Sequence[int]) -> None:
        n = len(self.vocabulary())
        for t in context:
            if not 0 <= t < n:
                raise UnsupportedTokenError(f"context token id {t} out of range")


class ToyModel(LanguageModel):
    """Explicit table model: context tuple (of surfaces) -> {surface: prob}.

    Each listed distribution must sum to 1 exactly, checked with rational
    arithmetic at construction.  Lookup truncates the context to the
    longest suffix present in the table, so short tables can drive long
    generations.
    """

    def __init__(self, surfaces: Sequence[str], table: Dict[tuple, Dict[str, object]]):
        self._vocab = Vocabulary(surfaces=tuple(surfaces))
        self._table: Dict[Tuple[int, ...], np.ndarray] = {}
        for ctx, dist in table.items():
            total = sum(Fraction(p) for p in dist.values())
            if total != 1:
                raise ValueError(f"distribution for context {ctx!r} sums to {total}, not 1")
            vec = np.zeros(len(self._vocab), dtype=np.float64)
            for surface, p in dist.items():
                vec[self._vocab.id_of(surface)] = float(Fraction(p))
            key = tuple(self._vocab.id_of(s) for s in ctx)
            self._table[key] = vec
        if () not in self._table:
            raise ValueError("table must contain the empty context as a fallback")
        self._max_key_len = max(len(k) for k in self._table)

    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def _resolve(self, context: Sequence[int]) -> Tuple[int, ...]:
        ctx = tuple(context[max(0, len(context) - self._max_key_len):])
        while ctx and ctx not in self._table:
            ctx = ctx[1:]
        return ctx

    def context_key(self, context: Sequence[int]) -> Hashable:
        return self._resolve(context)

    def raw_distribution(self, context: Sequence[int]) -> np.ndarray:
        self.validate_context(context)
        return self._table[self._resolve(context)].copy()

    @classmethod
    def storybook(cls) -> "ToyModel":
        """Small hand-crafted demo model over storybook-opening words."""
        words = ["I", "Once", "a", "home", "lived", "there", "time", "upon", "went"]
        half = Fraction(1, 2)
        quarter = Fraction(1, 4)
        table = {
            (): {"Once": half, "I": quarter, "there": quarter},
            (BOS_SURFACE,): {"Once": half, "I": quarter, "there": quarter},
            ("Once",): {"upon": half, "I": half},
            ("upon",): {"a": 1},
            ("a",): {"time": 1},
            ("time",): {"there": half, EOS_SURFACE: half},
            ("I",): {"went": half, "lived": half},
            ("went",): {"home": 1},
            ("lived",): {"there": 1},
            ("home",): {EOS_SURFACE: 1},
            ("there",): {"lived": half, EOS_SURFACE: half},
        }
        return cls([BOS_SURFACE, EOS_SURFACE, *words], table)


def iid_model(probs: Dict[str, object]) -> ToyModel:
    """Context-free model emitting the same distribution at every step.

    The end marker may be given mass by using its surface as a key.
    """
    words = [w for w in probs if w not in (BOS_SURFACE, EOS_SURFACE)]
    surfaces = [BOS_SURFACE, EOS_SURFACE, *words]
    return ToyModel(surfaces, {(): dict(probs)})


class NGramModel(LanguageModel):
    """Count-based n-gram model with add-alpha smoothing.

    Contexts are the ``order - 1`` preceding tokens, truncated to the
    longest suffix seen in training.  Smoothing adds ``alpha`` fake
    counts to every ordinary token; the start marker is never a valid
    next token and the end marker carries only its observed counts, so
    probabilities stay a proper distribution over what can actually
    follow.
    """

    def __init__(self, order: int, alpha: float, vocab: Vocabulary,
                 counts: Dict[Tuple[int, ...], Dict[int, int]]):
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.order = order
        self.alpha = float(alpha)
        self._vocab = vocab
        self._counts = counts
        # ids that receive the add-alpha fake counts (everything but the markers)
        self._smoothed = np.arange(len(vocab)) >= 2

    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def _resolve(self, context: Sequence[int]) -> Tuple[int, ...]:
        ctx = tuple(context)[max(0, len(context) - (self.order - 1)):]
        while ctx and ctx not in self._counts:
            ctx = ctx[1:]
        return ctx

    def context_key(self, context: Sequence[int]) -> Hashable:
        return self._resolve(context)

    def raw_distribution(self, context: Sequence[int]) -> np.ndarray:
        self.validate_context(context)
        ctx = self._resolve(context)
        vec = np.where(self._smoothed, self.alpha, 0.0)
        for token, count in self._counts.get(ctx, {}).items():
            vec[token] += count
        vec[BOS_ID] = 0.0
        total = vec.sum()
        if total <= 0:
            raise UnsupportedTokenError("model has no mass for this context")
        return vec / total

    # -- serialization ----------------------------------------------------
    # Versioned binary layout: magic "NGLM", version u16, order u32,
    # alpha f64, vocab table, then one record per context.

    MAGIC = b"NGLM"
    VERSION = 1

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack(">HId", self.VERSION, self.order, self.alpha))
            fh.write(struct.pack(">I", len(self._vocab)))
            for surface in self._vocab.surfaces:
                raw = surface.encode("utf-8")
                fh.write(struct.pack(">H", len(raw)))
                fh.write(raw)
            fh.write(struct.pack(">I", len(self._counts)))
            for ctx in sorted(self._counts):
                table = self._counts[ctx]
                fh.write(struct.pack(">B", len(ctx)))
                fh.write(struct.pack(f">{len(ctx)}I", *ctx))
                fh.write(struct.pack(">I", len(table)))
                for token in sorted(table):
                    fh.write(struct.pack(">IQ", token, table[token]))

    @classmethod
    def load(cls, path: str) -> "NGramModel":
        with open(path, "rb") as fh:
            if fh.read(4) != cls.MAGIC:
                raise ValueError("not an n-gram model file")
            version, order, alpha = struct.unpack(">HId", fh.read(14))
            if version != cls.VERSION:
                raise ValueError(f"unsupported model file version {version}")
            (n_vocab,) = struct.unpack(">I", fh.read(4))
            surfaces = []
            for _ in range(n_vocab):
                (n,) = struct.unpack(">H", fh.read(2))
                surfaces.append(fh.read(n).decode("utf-8"))
            (n_ctx,) = struct.unpack(">I", fh.read(4))
            counts: Dict[Tuple[int, ...], Dict[int, int]] = {}
            for _ in range(n_ctx):
                (clen,) = struct.unpack(">B", fh.read(1))
                ctx = struct.unpack(f">{clen}I", fh.read(4 * clen)) if clen else ()
                (n_entries,) = struct.unpack(">I", fh.read(4))
                table = {}
                for _ in range(n_entries):
                    token, count = struct.unpack(">IQ", fh.read(12))
                    table[token] = count
                counts[ctx] = table
        return cls(order, alpha, Vocabulary(surfaces=tuple(surfaces)), counts)


def train_ngram(corpus: Iterable[Sequence[str]], order: int, alpha: float) -> NGramModel:
    """Count every length-``order`` window over the documents in ``corpus``.

    Each document is bracketed with the start and end markers.  The
    vocabulary is the set of distinct corpus tokens plus the markers.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    docs = [list(doc) for doc in corpus]
    docs = [doc for doc in docs if doc]
    if not docs:
        raise ValueError("corpus is empty")
    vocab = Vocabulary.from_words(w for doc in docs for w in doc)
    counts: Dict[Tuple[int, ...], Dict[int, int]] = {}
    for doc in docs:
        ids = [BOS_ID] + vocab.encode_words(doc) + [EOS_ID]
        for i in range(1, len(ids)):
            target = ids[i]
            for ctx_len in range(0, order):
                if ctx_len > i:
                    break
                ctx = tuple(ids[i - ctx_len:i])
                table = counts.setdefault(ctx, {})
                table[target] = table.get(target, 0) + 1
    return NGramModel(order, alpha, vocab, counts)


def read_corpus(path: str) -> List[List[str]]:
    """UTF-8 plain text, one document per line, whitespace tokenization."""
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            words = line.split()
            if words:
                docs.append(words)
    return docs
