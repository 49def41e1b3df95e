"""Compression-efficiency and statistical-security evaluation.

Two numbers summarize every steganography method: bits/word (message
bits embedded per generated token) and the per-word KL divergence, in
nats, between the method's induced next-token distribution and the raw
model distribution.  The induced distribution is analytic for all three
methods, so KL is computed exactly per step and averaged over
Monte-Carlo sampled trajectories.

The sweep harness reproduces the standard tuning grids: temperature for
arithmetic coding (at a fixed top-k), truncation length for per-step
Huffman coding, and block size for block coding.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .arithmetic import encode_stream
from .baselines import BlockKey, HuffmanTree, step_huffman
from .bits import frame, padded_stream, random_bits
from .errors import InvalidDistributionError
from .models import LanguageModel
from .modulation import ModulationParams, modulate, next_distribution, TokenDistribution

DEFAULT_GRIDS: Dict[str, List] = {
    "arithmetic": [0.4, 0.6, 0.8, 1.0, 1.2],
    "huffman": [2, 4, 8, 16, 32, 64, 128, 256],
    "block": [1, 2, 3, 4, 5],
}
DEFAULT_TOP_K = 300
DEFAULT_BLOCK_SEED = 0x5EED


@dataclass(frozen=True)
class StegoRecord:
    """One evaluated sample: a cover generation with per-step accounting."""

    context: Tuple[int, ...]
    method: str
    param: float
    message_bits: int
    cover_tokens: Tuple[int, ...]
    kl_nats: Tuple[float, ...]
    bits_consumed: Tuple[int, ...]

    def __post_init__(self):
        if not (len(self.kl_nats) == len(self.bits_consumed) == len(self.cover_tokens)):
            raise ValueError("per-step lists must match the cover length")


@dataclass(frozen=True)
class SweepPoint:
    """Aggregated metrics for one (method, tuning value) grid point."""

    method: str
    param: float
    bits_per_word: float
    bpw_stderr: float
    kl_nats_per_word: float
    kl_stderr: float
    n_samples: int


def bits_per_word(record: StegoRecord) -> float:
    """Message bits consumed per cover token."""
    if not record.cover_tokens:
        raise ValueError("record has an empty cover")
    return sum(record.bits_consumed) / len(record.cover_tokens)


def kl_per_word(record: StegoRecord) -> float:
    return sum(record.kl_nats) / len(record.cover_tokens)


def _kl_terms(q: np.ndarray, p: np.ndarray) -> float:
    if np.any(p <= 0.0):
        raise InvalidDistributionError(
            "induced distribution puts mass on a zero-probability token")
    return float(np.sum(q * np.log(q / p)))


def step_kl_arithmetic(raw_probs: np.ndarray, dist: TokenDistribution) -> float:
    """KL of the quantized/modulated table from the raw distribution, in nats."""
    q = np.asarray(dist.weights, dtype=np.float64) / dist.total
    p = np.asarray(raw_probs, dtype=np.float64)[list(dist.ids)]
    return _kl_terms(q, p)


def step_kl_huffman(raw_probs: np.ndarray, tree: HuffmanTree) -> float:
    """Each leaf is reached with probability 2**-len(code)."""
    ids = list(tree.codes.keys())
    q = np.array([math.ldexp(1.0, -len(tree.codes[t])) for t in ids])
    p = np.asarray(raw_probs, dtype=np.float64)[ids]
    return _kl_terms(q, p)


def step_kl_block(raw_probs: np.ndarray, key: BlockKey) -> float:
    """Uniform chunks put mass 2**-block_bits on each bin argmax."""
    p = np.asarray(raw_probs, dtype=np.float64)
    share = math.ldexp(1.0, -key.block_bits)
    total = 0.0
    for members in key.bins:
        if not members:
            raise InvalidDistributionError("block key has an empty bin")
        best = max(p[t] for t in members)
        if best <= 0.0:
            raise InvalidDistributionError(
                "bin argmax has zero probability; KL is unbounded")
        total += share * math.log(share / best)
    return total


def step_kl(method: str, raw_probs: np.ndarray, state) -> float:
    """Dispatch on the method id; ``state`` is its per-step structure."""
    if method == "arithmetic":
        return step_kl_arithmetic(raw_probs, state)
    if method == "huffman":
        return step_kl_huffman(raw_probs, state)
    if method == "block":
        return step_kl_block(raw_probs, state)
    raise ValueError(f"unknown method {method!r}")


class _StepCache:
    """Per-(context, method setup) KL and structure cache for one sweep."""

    def __init__(self, model: LanguageModel):
        self.model = model
        self.kl: Dict = {}
        self.huffman: Dict = {}

    def arithmetic_kl(self, ctx: Sequence[int], params: ModulationParams) -> float:
        key = ("a", self.model.context_key(ctx), params)
        if key not in self.kl:
            dist = next_distribution(self.model, ctx, params)
            self.kl[key] = step_kl_arithmetic(self.model.raw_distribution(ctx), dist)
        return self.kl[key]

    def huffman_tree(self, ctx: Sequence[int], truncation: int) -> HuffmanTree:
        key = (self.model.context_key(ctx), truncation)
        if key not in self.huffman:
            self.huffman[key] = step_huffman(self.model, ctx, truncation)
        return self.huffman[key]

    def huffman_kl(self, ctx: Sequence[int], truncation: int) -> float:
        key = ("h", self.model.context_key(ctx), truncation)
        if key not in self.kl:
            tree = self.huffman_tree(ctx, truncation)
            self.kl[key] = step_kl_huffman(self.model.raw_distribution(ctx), tree)
        return self.kl[key]

    def block_kl(self, ctx: Sequence[int], bkey: BlockKey) -> float:
        key = ("b", self.model.context_key(ctx), bkey.block_bits, bkey.seed)
        if key not in self.kl:
            self.kl[key] = step_kl_block(self.model.raw_distribution(ctx), bkey)
        return self.kl[key]

    def block_argmax(self, ctx: Sequence[int], bkey: BlockKey, bin_index: int) -> int:
        key = ("ba", self.model.context_key(ctx), bkey.block_bits, bkey.seed, bin_index)
        if key not in self.kl:
            p = self.model.raw_distribution(ctx)
            members = bkey.bins[bin_index]
            best = members[0]
            for t in members[1:]:
                if p[t] > p[best]:
                    best = t
            self.kl[key] = best
        return self.kl[key]


def generate_record(method: str, param, model: LanguageModel,
                    context: Sequence[int], payload: Sequence[int],
                    cache: Optional[_StepCache] = None,
                    top_k: int = DEFAULT_TOP_K, precision: int = 32,
                    block_seed: int = DEFAULT_BLOCK_SEED,
                    max_tokens: Optional[int] = None) -> StegoRecord:
    """Encode one framed payload and account per-step KL and bits."""
    cache = cache or _StepCache(model)
    framed = frame(payload)
    bit_at = padded_stream(framed)
    budget = max_tokens if max_tokens is not None else 4 * len(framed) + 64
    kl: List[float] = []
    consumed: List[int] = []
    ctx = list(context)

    if method == "arithmetic":
        params = ModulationParams(temperature=float(param), top_k=top_k,
                                  precision=precision)
        n = len(framed)
        tokens, step_bits = encode_stream(
            bit_at, lambda _t, settled: settled >= n, ctx, model, params, budget)
        walk = list(context)
        for token, b in zip(tokens, step_bits):
            kl.append(cache.arithmetic_kl(walk, params))
            consumed.append(b)
            walk.append(token)
    elif method == "huffman":
        truncation = int(param)
        tokens = []
        pos = 0
        while pos < len(framed):
            if len(tokens) >= budget:
                raise InvalidDistributionError("token budget exhausted in sweep")
            tree = cache.huffman_tree(ctx, truncation)
            token, new_pos = tree.walk(bit_at, pos)
            kl.append(cache.huffman_kl(ctx, truncation))
            consumed.append(new_pos - pos)
            pos = new_pos
            tokens.append(token)
            ctx.append(token)
    elif method == "block":
        width = int(param)
        bkey = BlockKey(block_bits=width, seed=block_seed,
                        vocab_size=len(model.vocabulary()))
        tokens = []
        n_chunks = -(-len(framed) // width)
        for chunk in range(n_chunks):
            index = 0
            for i in range(width):
                index = (index << 1) | bit_at(chunk * width + i)
            token = cache.block_argmax(ctx, bkey, index)
            kl.append(cache.block_kl(ctx, bkey))
            consumed.append(width)
            tokens.append(token)
            ctx.append(token)
    else:
        raise ValueError(f"unknown method {method!r}")

    return StegoRecord(context=tuple(context), method=method, param=float(param),
                       message_bits=len(framed), cover_tokens=tuple(tokens),
                       kl_nats=tuple(kl), bits_consumed=tuple(consumed))


def _unit_seed(seed: int, method: str, param, index: int) -> int:
    blob = f"{seed}:{method}:{param!r}:{index}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def _mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, float("nan")
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def run_sweep(model: LanguageModel, contexts: Sequence[Sequence[int]],
              grids: Optional[Dict[str, List]] = None, n_samples: int = 50,
              seed: int = 0, payload_bits: int = 128,
              top_k: int = DEFAULT_TOP_K, precision: int = 32,
              block_seed: int = DEFAULT_BLOCK_SEED) -> List[SweepPoint]:
    """Mean and standard error of bits/word and KL/word per grid point.

    Deterministic given ``seed``: every (method, value, sample) unit
    derives its own bit stream from a stable hash, so results do not
    depend on execution order.
    """
    if not contexts:
        raise ValueError("need at least one context")
    grids = grids if grids is not None else DEFAULT_GRIDS
    cache = _StepCache(model)
    points: List[SweepPoint] = []
    for method in sorted(grids):
        for param in grids[method]:
            bpws: List[float] = []
            kls: List[float] = []
            for i in range(n_samples):
                rng = np.random.default_rng(_unit_seed(seed, method, param, i))
                payload = random_bits(rng, payload_bits)
                context = tuple(contexts[i % len(contexts)])
                record = generate_record(method, param, model, context, payload,
                                         cache=cache, top_k=top_k,
                                         precision=precision, block_seed=block_seed)
                bpws.append(bits_per_word(record))
                kls.append(kl_per_word(record))
            bpw, bpw_err = _mean_stderr(bpws)
            kl, kl_err = _mean_stderr(kls)
            points.append(SweepPoint(method=method, param=float(param),
                                     bits_per_word=bpw, bpw_stderr=bpw_err,
                                     kl_nats_per_word=kl, kl_stderr=kl_err,
                                     n_samples=n_samples))
    return points


@dataclass(frozen=True)
class EntropyEstimate:
    mean_bits: float
    stderr: float
    n_samples: int


def entropy_per_word(model: LanguageModel, contexts: Sequence[Sequence[int]],
                     params: ModulationParams, n_samples: int = 1000,
                     steps: int = 50, seed: int = 0,
                     burn_in: int = 0) -> EntropyEstimate:
    """Monte-Carlo mean per-token entropy (bits) of the modulated model.

    Trajectories are ancestrally sampled from the modulated distribution
    itself; with the unmodulated model this is the channel capacity that
    arithmetic-coded covers should match in bits/word.  ``burn_in``
    steps are walked but not counted, which measures the stationary
    rate instead of weighting the starting contexts.
    """
    if not contexts:
        raise ValueError("need at least one context")
    if burn_in >= steps:
        raise ValueError("burn_in must be smaller than steps")
    ent_cache: Dict = {}

    def step(ctx: List[int], rng) -> Tuple[int, float]:
        key = model.context_key(ctx)
        cached = ent_cache.get(key)
        if cached is None:
            entries = modulate(model.raw_distribution(ctx), params)
            ids = np.array([t for t, _ in entries])
            probs = np.array([p for _, p in entries])
            cum = np.cumsum(probs)
            h = float(-np.sum(probs * np.log2(probs)))
            cached = (ids, cum, h)
            ent_cache[key] = cached
        ids, cum, h = cached
        token = int(ids[min(int(np.searchsorted(cum, rng.random())), len(ids) - 1)])
        return token, h

    means: List[float] = []
    for i in range(n_samples):
        rng = np.random.default_rng(_unit_seed(seed, "entropy", params.temperature, i))
        ctx = list(contexts[i % len(contexts)])
        acc = 0.0
        for t in range(steps):
            token, h = step(ctx, rng)
            if t >= burn_in:
                acc += h
            ctx.append(token)
        means.append(acc / (steps - burn_in))
    mean, err = _mean_stderr(means)
    return EntropyEstimate(mean_bits=mean, stderr=err, n_samples=n_samples)


# -- curve utilities ------------------------------------------------------

def method_curve(points: Iterable[SweepPoint], method: str) -> List[SweepPoint]:
    curve = sorted((p for p in points if p.method == method),
                   key=lambda p: p.bits_per_word)
    return curve


def interpolate_kl(curve: Sequence[SweepPoint], bpw: float) -> Tuple[float, float]:
    """Linear interpolation of (KL, stderr) at a bits/word position.

    Only valid inside the curve's bits/word range.
    """
    if not curve:
        raise ValueError("empty curve")
    xs = [p.bits_per_word for p in curve]
    if not xs[0] <= bpw <= xs[-1]:
        raise ValueError(f"bits/word {bpw} outside curve range [{xs[0]}, {xs[-1]}]")
    for left, right in zip(curve, curve[1:]):
        if left.bits_per_word <= bpw <= right.bits_per_word:
            span = right.bits_per_word - left.bits_per_word
            t = 0.0 if span == 0 else (bpw - left.bits_per_word) / span
            kl = (1 - t) * left.kl_nats_per_word + t * right.kl_nats_per_word
            err = (1 - t) * left.kl_stderr + t * right.kl_stderr
            return kl, err
    return curve[-1].kl_nats_per_word, curve[-1].kl_stderr


# -- serialization ---------------------------------------------------------

CSV_HEADER = "method,param,bits_per_word,bpw_stderr,kl_nats_per_word,kl_stderr,n_samples"


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def sweep_to_csv(points: Sequence[SweepPoint]) -> str:
    lines = [CSV_HEADER]
    for p in points:
        lines.append(",".join([
            p.method, _fmt(p.param), _fmt(p.bits_per_word), _fmt(p.bpw_stderr),
            _fmt(p.kl_nats_per_word), _fmt(p.kl_stderr), str(p.n_samples)]))
    return "\n".join(lines) + "\n"


def sweep_to_json(points: Sequence[SweepPoint]) -> str:
    payload = {
        "points": [
            {
                "method": p.method,
                "param": p.param,
                "bits_per_word": p.bits_per_word,
                "bpw_stderr": p.bpw_stderr,
                "kl_nats_per_word": p.kl_nats_per_word,
                "kl_stderr": p.kl_stderr,
                "n_samples": p.n_samples,
            }
            for p in points
        ]
    }
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def sweep_to_gnuplot(points: Sequence[SweepPoint]) -> str:
    """Plot-ready data: x = bits/word, y = KL nats/word, with error bars.

    One index block per method, suitable for
    ``plot 'sweep.dat' index N using 1:3:2:4 with xyerrorbars``.
    """
    out = []
    for method in sorted({p.method for p in points}):
        out.append(f"# method: {method}")
        out.append("# bits_per_word bpw_stderr kl_nats_per_word kl_stderr param")
        for p in method_curve(points, method):
            out.append(" ".join([_fmt(p.bits_per_word), _fmt(p.bpw_stderr),
                                 _fmt(p.kl_nats_per_word), _fmt(p.kl_stderr),
                                 _fmt(p.param)]))
        out.append("")
        out.append("")
    return "\n".join(out)


def contexts_from_corpus(docs: Sequence[Sequence[str]], model: LanguageModel,
                         n_sentences: int = 3,
                         sentence_end: str = ".") -> List[Tuple[int, ...]]:
    """Conditioning contexts: the first ``n_sentences`` of each document,
    prefixed by the start marker."""
    vocab = model.vocabulary()
    contexts = []
    for doc in docs:
        seen = 0
        cut = len(doc)
        for i, word in enumerate(doc):
            if word == sentence_end:
                seen += 1
                if seen == n_sentences:
                    cut = i + 1
                    break
        words = list(doc[:cut])
        contexts.append((vocab.bos_id, *vocab.encode_words(words)))
    return contexts
