"""Model backends: a user-supplied causal LM checkpoint or the built-in demo.

Whatever the backend, inference must be fully deterministic: the same
context always produces byte-identical probability strings.  Logits are
computed once per request with gradients off and the softmax is taken
in double precision so serialization does not depend on accelerator
quirks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import torch

DEMO_WORDS = """
hello world the a an and or of in on at to from with for by over under
people person city country government president court law police time
year month week day morning evening water river road house home room
car train plane computer phone network system health doctor hospital
food game team player music film story news word voice letter light
small large big long short high low old new young good bad great poor
strong fast slow hard easy said told asked called made found took gave
went came saw knew thought became left felt kept held began showed
. , ? !
""".split()

BOS_SURFACE = "<bos>"
EOS_SURFACE = "<eos>"


@dataclass(frozen=True)
class ServerConfig:
    """Startup facts: which model, where it runs, and response shaping."""

    model: str = "demo"
    device: str = "cpu"
    sparse_top: int | None = None
    port: int = 8471
    host: str = "127.0.0.1"
    demo_seed: int = 0


class Backend:
    """Shared surface the HTTP layer talks to."""

    surfaces: List[str]
    bos_id: int
    eos_id: int
    max_context: int

    def distribution(self, context: Sequence[int]) -> np.ndarray:
        raise NotImplementedError

    def tokenize(self, text: str) -> List[int]:
        raise NotImplementedError

    def detokenize(self, ids: Sequence[int]) -> str:
        raise NotImplementedError


class DemoBackend(Backend):
    """Tiny fixed-seed transformer over a word vocabulary.

    Stands in for a real checkpoint when none is available; everything
    about it (weights, tokenizer, markers) is derived deterministically
    from the seed so any two instances agree.
    """

    def __init__(self, seed: int = 0, device: str = "cpu"):
        from transformers import GPT2Config, GPT2LMHeadModel

        words = list(dict.fromkeys(DEMO_WORDS))
        self.surfaces = [BOS_SURFACE, EOS_SURFACE, *words]
        self.bos_id = 0
        self.eos_id = 1
        self._index = {s: i for i, s in enumerate(self.surfaces)}
        config = GPT2Config(
            vocab_size=len(self.surfaces), n_positions=192,
            n_embd=48, n_layer=2, n_head=2,
            bos_token_id=self.bos_id, eos_token_id=self.eos_id)
        torch.manual_seed(seed)
        self._model = GPT2LMHeadModel(config).to(device).eval()
        self._device = device
        self.max_context = config.n_positions

    @torch.no_grad()
    def distribution(self, context: Sequence[int]) -> np.ndarray:
        ids = torch.tensor([list(context)], dtype=torch.long, device=self._device)
        logits = self._model(ids).logits[0, -1].double()
        logits[self.bos_id] = float("-inf")  # the start marker never follows
        probs = torch.softmax(logits, dim=-1)
        return probs.cpu().numpy()

    def tokenize(self, text: str) -> List[int]:
        ids = []
        for word in text.split():
            if word not in self._index:
                raise ValueError(f"word {word!r} not in the demo vocabulary")
            ids.append(self._index[word])
        return ids

    def detokenize(self, ids: Sequence[int]) -> str:
        return " ".join(self.surfaces[i] for i in ids)


class CheckpointBackend(Backend):
    """Any local causal-LM checkpoint loadable by transformers."""

    def __init__(self, path: str, device: str = "cpu"):
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self._tokenizer = AutoTokenizer.from_pretrained(path)
        self._model = AutoModelForCausalLM.from_pretrained(path).to(device).eval()
        self._device = device
        vocab_size = self._model.config.vocab_size
        self.surfaces = self._tokenizer.convert_ids_to_tokens(list(range(vocab_size)))
        eos = self._tokenizer.eos_token_id
        bos = self._tokenizer.bos_token_id
        self.eos_id = eos if eos is not None else vocab_size - 1
        self.bos_id = bos if bos is not None else self.eos_id
        self.max_context = int(getattr(self._model.config, "n_positions", 1024))

    @torch.no_grad()
    def distribution(self, context: Sequence[int]) -> np.ndarray:
        ids = torch.tensor([list(context)], dtype=torch.long, device=self._device)
        logits = self._model(ids).logits[0, -1].double()
        probs = torch.softmax(logits, dim=-1)
        return probs.cpu().numpy()

    def tokenize(self, text: str) -> List[int]:
        return list(self._tokenizer.encode(text, add_special_tokens=False))

    def detokenize(self, ids: Sequence[int]) -> str:
        return self._tokenizer.decode(list(ids))


def load_backend(config: ServerConfig) -> Backend:
    if config.model == "demo":
        return DemoBackend(seed=config.demo_seed, device=config.device)
    return CheckpointBackend(config.model, device=config.device)
