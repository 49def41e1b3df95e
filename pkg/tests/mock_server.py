"""In-process HTTP server exposing any LanguageModel over the wire protocol.

Used to test the protocol client without a real model host.  The
``faults`` dict lets tests inject protocol violations: a bad sum, a
nondeterministic distribution, an empty vocabulary, or a mid-session
vocabulary swap.
"""

from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from stegotext.models import LanguageModel
from stegotext.protocol import vocab_fingerprint

DEFAULT_MAX_CONTEXT = 512


class ModelHTTPServer:
    def __init__(self, model: LanguageModel, max_context: int = DEFAULT_MAX_CONTEXT,
                 sparse_top: Optional[int] = None):
        self.model = model
        self.max_context = max_context
        self.sparse_top = sparse_top
        self.faults: dict = {}
        self._httpd: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None

    # -- endpoint payloads -------------------------------------------------

    def vocab_payload(self) -> dict:
        vocab = self.model.vocabulary()
        surfaces = list(vocab.surfaces)
        if self.faults.get("empty_vocab"):
            surfaces = []
            return {"tokens": surfaces, "bos_id": 0, "eos_id": 0,
                    "max_context": self.max_context, "fingerprint": ""}
        if self.faults.get("swap_vocab"):
            surfaces = surfaces[:-1] + [surfaces[-1] + "_swapped"]
        return {
            "tokens": surfaces,
            "bos_id": vocab.bos_id,
            "eos_id": vocab.eos_id,
            "max_context": self.max_context,
            "fingerprint": vocab_fingerprint(surfaces, vocab.bos_id, vocab.eos_id),
        }

    def distribution_payload(self, context) -> dict:
        probs = self.model.raw_distribution(context).astype(float)
        if self.faults.get("nondeterministic"):
            jitter = random.random() * 1e-9
            probs = probs * (1.0 - jitter)
            probs[0] += 1.0 - probs.sum()
        if self.faults.get("bad_sum"):
            probs = probs * 0.98
        if self.sparse_top is not None and self.sparse_top < len(probs):
            order = probs.argsort()[::-1][: self.sparse_top]
            top = [[int(i), f"{probs[i]:.17g}"] for i in sorted(order)]
            rest = 1.0 - float(probs[sorted(order)].sum())
            if self.faults.get("bad_sum"):
                rest = max(0.0, rest - 0.02)
            return {"top": top, "rest": f"{max(rest, 0.0):.17g}"}
        return {"probs": [f"{p:.17g}" for p in probs]}

    # -- plumbing ----------------------------------------------------------

    def start(self) -> str:
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, code: int, payload: dict):
                body = json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/vocab":
                    self._send(200, outer.vocab_payload())
                else:
                    self._send(404, {"error": "no such endpoint"})

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                try:
                    data = json.loads(self.rfile.read(length) or b"{}")
                except ValueError:
                    self._send(400, {"error": "bad json"})
                    return
                vocab = outer.model.vocabulary()
                if self.path == "/distribution":
                    context = data.get("context")
                    if not isinstance(context, list) or not context:
                        self._send(400, {"error": "context must be a non-empty list"})
                        return
                    if len(context) > outer.max_context:
                        self._send(400, {"error": "context too long"})
                        return
                    try:
                        self._send(200, outer.distribution_payload(context))
                    except Exception as exc:  # noqa: BLE001
                        self._send(400, {"error": str(exc)})
                elif self.path == "/tokenize":
                    text = data.get("text", "")
                    try:
                        ids = vocab.encode_words(text.split())
                    except Exception as exc:  # noqa: BLE001
                        self._send(400, {"error": str(exc)})
                        return
                    self._send(200, {"ids": ids})
                elif self.path == "/detokenize":
                    ids = data.get("ids", [])
                    try:
                        words = vocab.decode_ids(ids)
                    except Exception as exc:  # noqa: BLE001
                        self._send(400, {"error": str(exc)})
                        return
                    self._send(200, {"text": " ".join(words)})
                else:
                    self._send(404, {"error": "no such endpoint"})

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        host, port = self._httpd.server_address
        return f"http://{host}:{port}"

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
