"""Shared key material as a single TOML file.

Alice and Bob exchange one file out of band; it pins everything that
must agree bit-for-bit for the channel to work: the model, the method
and its tuning, the integer precision, seeds, and the cover context.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .arithmetic import CoverText, decode, encode
from .baselines import BlockKey, block_decode, block_encode, huffman_decode, huffman_encode
from .bits import BitMessage
from .errors import StegoError
from .models import LanguageModel, NGramModel
from .modulation import DEFAULT_PRECISION, ModulationParams

METHODS = ("arithmetic", "huffman", "block")


@dataclass(frozen=True)
class KeyConfig:
    """Everything that determines the steganographic mapping."""

    model_kind: str                      # "ngram" | "remote"
    model_path: Optional[str]
    model_url: Optional[str]
    fingerprint: Optional[str]
    method: str
    cover_context: str
    cover_params: ModulationParams
    source_params: ModulationParams
    truncation: Optional[int] = None
    block_bits: Optional[int] = None
    block_seed: Optional[int] = None

    @classmethod
    def load(cls, path: str) -> "KeyConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        try:
            model = data["model"]
            cover = data["cover"]
        except KeyError as exc:
            raise StegoError(f"key file missing the {exc.args[0]!r} table") from None
        source = data.get("source", {})
        kind = model.get("kind", "ngram")
        if kind not in ("ngram", "remote"):
            raise StegoError(f"unknown model kind {kind!r}")
        method = cover.get("method", "arithmetic")
        if method not in METHODS:
            raise StegoError(f"unknown method {method!r}")

        def params_of(table: dict, default_top_k) -> ModulationParams:
            return ModulationParams(
                temperature=float(table.get("temperature", 1.0)),
                top_k=table.get("top_k", default_top_k),
                precision=int(table.get("precision", DEFAULT_PRECISION)))

        return cls(
            model_kind=kind,
            model_path=model.get("path"),
            model_url=model.get("url"),
            fingerprint=model.get("fingerprint"),
            method=method,
            cover_context=cover.get("context", ""),
            cover_params=params_of(cover, None),
            source_params=params_of(source, None),
            truncation=cover.get("truncation"),
            block_bits=cover.get("block_bits"),
            block_seed=cover.get("block_seed"),
        )

    def build_model(self) -> LanguageModel:
        if self.model_kind == "ngram":
            if not self.model_path:
                raise StegoError("ngram key needs model.path")
            return NGramModel.load(self.model_path)
        from .protocol import RemoteModel

        if not self.model_url:
            raise StegoError("remote key needs model.url")
        return RemoteModel(self.model_url, expected_fingerprint=self.fingerprint)

    def tokenize_text(self, model: LanguageModel, text: str) -> List[int]:
        from .protocol import RemoteModel

        if isinstance(model, RemoteModel):
            return model.tokenize(text)
        return model.vocabulary().encode_words(text.split())

    def detokenize_ids(self, model: LanguageModel, ids: Sequence[int]) -> str:
        from .protocol import RemoteModel

        if isinstance(model, RemoteModel):
            return model.detokenize(ids)
        return " ".join(model.vocabulary().decode_ids(ids))

    def context_ids(self, model: LanguageModel) -> Tuple[int, ...]:
        vocab = model.vocabulary()
        return (vocab.bos_id, *self.tokenize_text(model, self.cover_context))

    def _block_key(self, model: LanguageModel) -> BlockKey:
        if self.block_bits is None:
            raise StegoError("block method needs cover.block_bits")
        return BlockKey(block_bits=int(self.block_bits),
                        seed=int(self.block_seed or 0),
                        vocab_size=len(model.vocabulary()))

    def encode_message(self, model: LanguageModel, message: BitMessage) -> CoverText:
        context = self.context_ids(model)
        if self.method == "arithmetic":
            return encode(message, context, model, self.cover_params)
        if self.method == "huffman":
            if self.truncation is None:
                raise StegoError("huffman method needs cover.truncation")
            return huffman_encode(message, context, model, int(self.truncation))
        return block_encode(message, context, model, self._block_key(model))

    def decode_cover(self, model: LanguageModel, tokens: Sequence[int]) -> BitMessage:
        cover = CoverText(tokens=tuple(tokens), context=self.context_ids(model))
        if self.method == "arithmetic":
            return decode(cover, model, self.cover_params)
        if self.method == "huffman":
            if self.truncation is None:
                raise StegoError("huffman method needs cover.truncation")
            return huffman_decode(cover, model, int(self.truncation))
        return block_decode(cover, model, self._block_key(model))
