"""Temperature/top-k modulation and integer quantization of model output.

The coders never touch floating-point probabilities directly.  Every
step they consume a ``TokenDistribution``: an ordered table of integer
weights summing to exactly ``2**precision``.  Exact integer totals are
what make encode and decode replay bit-identically; the weight floor of
1 keeps every supported token decodable.
"""

from __future__ import annotations

import math
import threading
import weakref
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Sequence, Tuple

import numpy as np

from .errors import CannotQuantizeError, DesyncError, InvalidDistributionError
from .models import LanguageModel

MIN_PRECISION = 16
MAX_PRECISION = 62
DEFAULT_PRECISION = 32


@dataclass(frozen=True)
class ModulationParams:
    """Quality/compression/security knobs applied to the model distribution.

    ``top_k=None`` means the full vocabulary.  ``precision`` is the
    number of bits of quantization resolution; 32 keeps the quantization
    KL negligible while staying comfortably inside 64-bit arithmetic.
    """

    temperature: float = 1.0
    top_k: int | None = None
    precision: int = DEFAULT_PRECISION

    def __post_init__(self):
        if not (self.temperature > 0 and math.isfinite(self.temperature)):
            raise ValueError("temperature must be a positive finite number")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not MIN_PRECISION <= self.precision <= MAX_PRECISION:
            raise ValueError(
                f"precision must be in [{MIN_PRECISION}, {MAX_PRECISION}]")


@dataclass(frozen=True, eq=True)
class TokenDistribution:
    """Quantized next-token table with cumulative bin boundaries.

    Entries are ordered by descending weight, ties by ascending token
    id; weights are >= 1 and sum to exactly ``total``.  ``cum[i]`` is
    the start of entry i's bin, so the bins partition [0, total).
    """

    ids: Tuple[int, ...]
    weights: Tuple[int, ...]
    total: int
    cum: Tuple[int, ...] = field(init=False, compare=False, repr=False)
    _index: Dict[int, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        acc = 0
        cum = [0]
        for w in self.weights:
            acc += w
            cum.append(acc)
        if acc != self.total:
            raise ValueError("weights do not sum to total")
        object.__setattr__(self, "cum", tuple(cum))
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.ids)})

    def __len__(self) -> int:
        return len(self.ids)

    def index_of(self, token_id: int) -> int:
        try:
            return self._index[token_id]
        except KeyError:
            raise DesyncError(
                f"token id {token_id} has no probability mass at this step") from None

    def weight_of(self, token_id: int) -> int:
        return self.weights[self.index_of(token_id)]

    def find_bin(self, value: int) -> int:
        """Index of the bin whose [cum[i], cum[i+1]) contains ``value``."""
        return bisect_right(self.cum, value) - 1

    def probs(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64) / self.total


def modulate(dist: np.ndarray, params: ModulationParams) -> List[Tuple[int, float]]:
    """Keep the top-k entries, sharpen by temperature, renormalize.

    Returns (token id, probability) pairs ordered by descending
    probability, ties by ascending id.  Zero-probability tokens never
    survive: they could not be decoded.
    """
    dist = np.asarray(dist, dtype=np.float64)
    total = float(dist.sum())
    if not math.isclose(total, 1.0, rel_tol=1e-6, abs_tol=1e-9):
        raise InvalidDistributionError(f"input distribution sums to {total!r}")
    support = np.flatnonzero(dist > 0.0)
    if support.size == 0:
        raise InvalidDistributionError("distribution has empty support")
    probs = dist[support]
    # primary key: probability descending; secondary: token id ascending
    order = np.lexsort((support, -probs))
    k = support.size if params.top_k is None else min(params.top_k, support.size)
    order = order[:k]
    sel_ids = support[order]
    sel = probs[order]
    if params.temperature != 1.0:
        logits = np.log(sel) / params.temperature
        logits -= logits.max()
        sel = np.exp(logits)
        keep = sel > 0.0
        sel_ids, sel = sel_ids[keep], sel[keep]
        if sel.size == 0:
            raise InvalidDistributionError("temperature underflowed all mass")
        resort = np.lexsort((sel_ids, -sel))
        sel_ids, sel = sel_ids[resort], sel[resort]
    sel = sel / sel.sum()
    return [(int(t), float(p)) for t, p in zip(sel_ids, sel)]


def _scaled_round_half_up(p: float, precision: int) -> int:
    """round(p * 2**precision) computed exactly from the float's bits."""
    if p <= 0.0:
        return 0
    m, e = math.frexp(p)
    m53 = int(m * (1 << 53))  # exact: the significand has <= 53 bits
    shift = e + precision - 53
    if shift >= 0:
        return m53 << shift
    return (m53 + (1 << (-shift - 1))) >> -shift


def quantize(entries: Sequence[Tuple[int, float]] | np.ndarray,
             precision: int) -> TokenDistribution:
    """Integer weights summing to exactly 2**precision, each >= 1.

    Accepts modulate() output or a dense probability vector.  Initial
    weights are max(1, round(p * 2**precision)); the remainder is then
    corrected one unit at a time across the entries ranked by descending
    weight (ties by ascending id), skipping weight-1 entries when
    removing, until the total is exact.
    """
    # the coder restricts itself to [MIN_PRECISION, MAX_PRECISION] via
    # ModulationParams; the bare operation accepts any workable width
    if not 1 <= precision <= MAX_PRECISION:
        raise ValueError(f"precision must be in [1, {MAX_PRECISION}]")
    if isinstance(entries, np.ndarray):
        support = np.flatnonzero(entries > 0.0)
        entries = [(int(t), float(entries[t])) for t in support]
    if not entries:
        raise InvalidDistributionError("nothing to quantize")
    total = 1 << precision
    if len(entries) > total:
        raise CannotQuantizeError(
            f"{len(entries)} tokens exceed {total} quantization units")
    scored = []
    for token_id, p in entries:
        if p <= 0.0:
            continue
        scored.append((max(1, _scaled_round_half_up(p, precision)), token_id))
    if not scored:
        raise InvalidDistributionError("nothing to quantize")
    # rank for the correction pass: weight descending, id ascending
    scored.sort(key=lambda e: (-e[0], e[1]))
    weights = [w for w, _ in scored]
    n = len(weights)
    delta = total - sum(weights)
    if delta > 0:
        q, r = divmod(delta, n)
        for i in range(n):
            weights[i] += q + (1 if i < r else 0)
    elif delta < 0:
        need = -delta
        while need:
            removed = 0
            for i in range(n):
                if need == 0:
                    break
                if weights[i] > 1:
                    weights[i] -= 1
                    need -= 1
                    removed += 1
            if removed == 0:  # all weights are 1; cannot happen when n <= total
                raise CannotQuantizeError("cannot shed excess without zero weights")
    ranked = sorted(zip(weights, (t for _, t in scored)), key=lambda e: (-e[0], e[1]))
    return TokenDistribution(
        ids=tuple(t for _, t in ranked),
        weights=tuple(w for w, _ in ranked),
        total=total,
    )


# Distributions are pure functions of (model, resolved context, params),
# so memoizing them is free speedup for both sides of the channel.
_CACHE: "weakref.WeakKeyDictionary[LanguageModel, dict]" = weakref.WeakKeyDictionary()
_CACHE_LOCK = threading.Lock()
_CACHE_CAP = 1 << 18


def next_distribution(model: LanguageModel, context: Sequence[int],
                      params: ModulationParams) -> TokenDistribution:
    """The coder's view of the model at one step: modulated then quantized."""
    key: Tuple[Hashable, ModulationParams] = (model.context_key(context), params)
    with _CACHE_LOCK:
        per_model = _CACHE.setdefault(model, {})
        hit = per_model.get(key)
    if hit is not None:
        return hit
    dist = quantize(modulate(model.raw_distribution(context), params), params.precision)
    with _CACHE_LOCK:
        if len(per_model) >= _CACHE_CAP:
            per_model.clear()
        per_model[key] = dist
    return dist


def clear_distribution_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()
