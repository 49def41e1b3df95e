"""HTTP/JSON client for next-token distributions served by a model host.

Both channel ends must see bit-identical probabilities, so the wire
format is pinned down hard: probabilities travel as decimal strings
with at least 12 significant digits, the vocabulary is fingerprinted,
and a session begins with determinism and tokenizer round-trip probes.
A server that fails a probe is unusable as shared key material, so the
probes raise instead of warning.

Endpoints:
    GET  /vocab                        -> tokens, bos/eos ids, max context,
                                          fingerprint
    POST /distribution {"context":[ids]} -> {"probs":[str,...]} or sparse
                                          {"top":[[id,str],...],"rest":str}
    POST /tokenize   {"text": str}     -> {"ids":[int,...]}
    POST /detokenize {"ids":[int,...]} -> {"text": str}
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import requests

from .errors import ContextTooLongError, KeyMismatchError, ProtocolError
from .models import LanguageModel, Vocabulary

SUM_TOLERANCE = 1e-6
PROBE_STRINGS = ("hello world", "")
PROBE_REPEATS = 2


def vocab_fingerprint(surfaces: Sequence[str], bos_id: int, eos_id: int) -> str:
    """Stable hash of the vocabulary table and marker ids."""
    blob = json.dumps({"tokens": list(surfaces), "bos": bos_id, "eos": eos_id},
                      ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class ModelEndpoint:
    """A connected server plus the session facts probed from it."""

    base_url: str
    timeout: float
    max_context: int
    fingerprint: str


@dataclass(frozen=True)
class VocabInfo:
    surfaces: Tuple[str, ...]
    bos_id: int
    eos_id: int
    max_context: int
    fingerprint: str


def _request(session: requests.Session, method: str, url: str, timeout: float,
             payload: Optional[dict] = None) -> dict:
    try:
        if method == "GET":
            resp = session.get(url, timeout=timeout)
        else:
            resp = session.post(url, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise ProtocolError(f"request to {url} failed: {exc}") from exc
    if resp.status_code != 200:
        detail = ""
        try:
            detail = resp.json().get("error", "")
        except Exception:
            detail = resp.text[:200]
        if resp.status_code == 400 and "context" in detail and "long" in detail:
            raise ContextTooLongError(detail)
        raise ProtocolError(f"{url} returned {resp.status_code}: {detail}")
    try:
        return resp.json()
    except ValueError as exc:
        raise ProtocolError(f"{url} returned invalid JSON") from exc


def fetch_vocab(base_url: str, timeout: float = 30.0,
                session: Optional[requests.Session] = None) -> VocabInfo:
    """Full id/surface table plus marker ids and the fingerprint."""
    session = session or requests.Session()
    data = _request(session, "GET", f"{base_url.rstrip('/')}/vocab", timeout)
    tokens = data.get("tokens")
    if not isinstance(tokens, list) or not tokens:
        raise ProtocolError("vocab response has no tokens")
    for key in ("bos_id", "eos_id", "max_context", "fingerprint"):
        if key not in data:
            raise ProtocolError(f"vocab response missing {key!r}")
    bos, eos = int(data["bos_id"]), int(data["eos_id"])
    if not (0 <= bos < len(tokens) and 0 <= eos < len(tokens)):
        raise ProtocolError("marker ids outside the vocabulary")
    local_print = vocab_fingerprint(tokens, bos, eos)
    if local_print != data["fingerprint"]:
        raise ProtocolError("served fingerprint does not match the served table")
    return VocabInfo(surfaces=tuple(tokens), bos_id=bos, eos_id=eos,
                     max_context=int(data["max_context"]),
                     fingerprint=local_print)


def _parse_prob(raw, where: str) -> float:
    if not isinstance(raw, str):
        raise ProtocolError(f"{where}: probabilities must be decimal strings")
    try:
        value = float(raw)
    except ValueError:
        raise ProtocolError(f"{where}: bad probability {raw!r}") from None
    if not math.isfinite(value) or value < 0.0:
        raise ProtocolError(f"{where}: bad probability {raw!r}")
    return value


def parse_distribution(data: dict, vocab_size: int) -> np.ndarray:
    """Dense float64 vector from a full or sparse (top + rest) response."""
    if "probs" in data:
        probs = data["probs"]
        if len(probs) != vocab_size:
            raise ProtocolError(
                f"distribution has {len(probs)} entries for vocab {vocab_size}")
        vec = np.array([_parse_prob(p, "probs") for p in probs], dtype=np.float64)
    elif "top" in data:
        vec = np.zeros(vocab_size, dtype=np.float64)
        listed = 0
        for entry in data["top"]:
            token, raw = entry
            token = int(token)
            if not 0 <= token < vocab_size:
                raise ProtocolError(f"sparse entry id {token} out of range")
            if vec[token]:
                raise ProtocolError(f"sparse entry id {token} repeated")
            vec[token] = _parse_prob(raw, "top")
            listed += 1
        rest = _parse_prob(data.get("rest", "0"), "rest")
        if listed < vocab_size and rest > 0.0:
            # spread the unlisted remainder uniformly so the vector is
            # a proper distribution whatever top-k the caller uses
            fill = rest / (vocab_size - listed)
            vec[vec == 0.0] += fill
    else:
        raise ProtocolError("distribution response has neither 'probs' nor 'top'")
    total = float(vec.sum())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise ProtocolError(f"distribution sums to {total!r}")
    return vec / total


class RemoteModel(LanguageModel):
    """LanguageModel backed by the wire protocol, probed at session start."""

    def __init__(self, base_url: str, timeout: float = 30.0,
                 expected_fingerprint: Optional[str] = None, probe: bool = True):
        self._session = requests.Session()
        self._timeout = timeout
        self._base = base_url.rstrip("/")
        info = fetch_vocab(self._base, timeout, self._session)
        if expected_fingerprint is not None and info.fingerprint != expected_fingerprint:
            raise KeyMismatchError(
                "server vocabulary fingerprint does not match the shared key "
                f"({info.fingerprint} != {expected_fingerprint})")
        self.endpoint = ModelEndpoint(base_url=self._base, timeout=timeout,
                                      max_context=info.max_context,
                                      fingerprint=info.fingerprint)
        self._vocab = Vocabulary(surfaces=info.surfaces, bos_id=info.bos_id,
                                 eos_id=info.eos_id)
        self._cache: Dict[Tuple[int, ...], np.ndarray] = {}
        self._lock = threading.Lock()
        if probe:
            run_session_probes(self)

    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def _fetch_distribution(self, context: Sequence[int]) -> np.ndarray:
        if len(context) > self.endpoint.max_context:
            raise ContextTooLongError(
                f"context of {len(context)} tokens exceeds the server "
                f"maximum of {self.endpoint.max_context}")
        data = _request(self._session, "POST", f"{self._base}/distribution",
                        self._timeout, {"context": [int(t) for t in context]})
        return parse_distribution(data, len(self._vocab))

    def raw_distribution(self, context: Sequence[int]) -> np.ndarray:
        self.validate_context(context)
        key = tuple(context)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        vec = self._fetch_distribution(context)
        with self._lock:
            if len(self._cache) > 1 << 16:
                self._cache.clear()
            self._cache[key] = vec
        return vec

    def tokenize(self, text: str) -> List[int]:
        data = _request(self._session, "POST", f"{self._base}/tokenize",
                        self._timeout, {"text": text})
        ids = data.get("ids")
        if not isinstance(ids, list):
            raise ProtocolError("tokenize response has no ids")
        ids = [int(t) for t in ids]
        n = len(self._vocab)
        if any(not 0 <= t < n for t in ids):
            raise ProtocolError("tokenize returned an out-of-range id")
        return ids

    def detokenize(self, ids: Sequence[int]) -> str:
        n = len(self._vocab)
        if any(not 0 <= int(t) < n for t in ids):
            raise ProtocolError("cannot detokenize an out-of-range id")
        data = _request(self._session, "POST", f"{self._base}/detokenize",
                        self._timeout, {"ids": [int(t) for t in ids]})
        text = data.get("text")
        if not isinstance(text, str):
            raise ProtocolError("detokenize response has no text")
        return text


def run_session_probes(model: RemoteModel, contexts: Optional[List[List[int]]] = None,
                       repeats: int = PROBE_REPEATS) -> None:
    """Abort the session unless the server is deterministic and consistent.

    A nondeterministic model breaks decoding outright, and a tokenizer
    that cannot round-trip text corrupts revealed messages, so these are
    preconditions, not warnings.
    """
    vocab = model.vocabulary()
    if contexts is None:
        contexts = [[vocab.bos_id]]
    for ctx in contexts:
        first = model._fetch_distribution(ctx)
        for _ in range(repeats - 1):
            again = model._fetch_distribution(ctx)
            if not np.array_equal(first, again):
                raise ProtocolError(
                    "server distribution is not deterministic; "
                    "decoding would desync")
    for text in PROBE_STRINGS:
        ids = model.tokenize(text)
        back = model.detokenize(ids)
        if back != text:
            raise ProtocolError(
                f"tokenizer round-trip failed for {text!r} -> {back!r}")


def run_conformance_probes(base_url: str, timeout: float = 30.0,
                           n_contexts: int = 5, repeats: int = 10) -> RemoteModel:
    """The full conformance pass a server must survive to be usable.

    Returns a connected model so callers can continue with the session.
    """
    model = RemoteModel(base_url, timeout=timeout, probe=False)
    vocab = model.vocabulary()
    again = fetch_vocab(base_url, timeout)
    if again.fingerprint != model.endpoint.fingerprint:
        raise ProtocolError("vocabulary changed between fetches")
    ordinary = [i for i in range(len(vocab))
                if i not in (vocab.bos_id, vocab.eos_id)]
    contexts = [[vocab.bos_id]]
    for t in ordinary[: max(0, n_contexts - 1)]:
        contexts.append([vocab.bos_id, t])
    run_session_probes(model, contexts=contexts, repeats=repeats)
    return model
