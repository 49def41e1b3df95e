"""Command-line front end.

Every subcommand is a thin shell over the library: train and serialize
an n-gram model, move raw bits in and out of cover text, run the full
text hide/reveal pipeline, and sweep the evaluation grids.

Exit codes distinguish the failure classes an operator must tell apart:
    0  success
    1  unexpected error
    2  usage error
    3  key mismatch (wrong shared key material)
    4  desync / truncated cover (tampering, wrong key, model drift)
    5  message too long for the token budget
    6  protocol error talking to a model server
    7  malformed input data (bad stream, unsupported token, bad key file)
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from . import __version__
from .bits import BitMessage, bits_to_hex
from .errors import (
    CannotQuantizeError,
    DesyncError,
    InvalidDistributionError,
    KeyMismatchError,
    MalformedStreamError,
    MessageTooLongError,
    ProtocolError,
    StegoError,
    TruncatedCoverError,
    UnsupportedTokenError,
)
from .keyconfig import KeyConfig
from .metrics import (
    DEFAULT_GRIDS,
    run_sweep,
    sweep_to_csv,
    sweep_to_gnuplot,
    sweep_to_json,
)
from .models import read_corpus, train_ngram
from .source import TextMessage, hide, reveal

EXIT_CODES = (
    (KeyMismatchError, 3),
    ((DesyncError, TruncatedCoverError), 4),
    (MessageTooLongError, 5),
    (ProtocolError, 6),
    ((MalformedStreamError, UnsupportedTokenError, InvalidDistributionError,
      CannotQuantizeError, StegoError, ValueError, OSError), 7),
)


def _exit_code(exc: Exception) -> int:
    for types, code in EXIT_CODES:
        if isinstance(exc, types):
            return code
    return 1


def _read_cover_ids(path: str) -> List[int]:
    with open(path, "r", encoding="utf-8") as fh:
        return [int(line) for line in fh.read().split()]


def _write_cover(tokens, path: Optional[str]) -> None:
    text = "\n".join(str(t) for t in tokens) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_train_ngram(args) -> None:
    docs = read_corpus(args.corpus)
    model = train_ngram(docs, order=args.order, alpha=args.alpha)
    model.save(args.out)
    vocab = model.vocabulary()
    print(f"trained order-{args.order} model: {len(vocab)} tokens, "
          f"alpha={args.alpha}, saved to {args.out}", file=sys.stderr)


def cmd_encode(args) -> None:
    key = KeyConfig.load(args.key)
    model = key.build_model()
    if args.message_bits.startswith("@"):
        with open(args.message_bits[1:], "rb") as fh:
            message = BitMessage.from_bytes(fh.read())
    else:
        message = BitMessage.from_hex(args.message_bits)
    cover = key.encode_message(model, message)
    if args.text:
        print(key.detokenize_ids(model, cover.tokens))
    else:
        _write_cover(cover.tokens, args.out)


def cmd_decode(args) -> None:
    key = KeyConfig.load(args.key)
    model = key.build_model()
    tokens = _read_cover_ids(args.cover)
    message = key.decode_cover(model, tokens)
    print(bits_to_hex(message.payload))


def cmd_hide(args) -> None:
    key = KeyConfig.load(args.key)
    model = key.build_model()
    words = key.tokenize_text(model, args.message)
    message = TextMessage(tokens=(*words, model.vocabulary().eos_id))
    cover = hide(message, key.context_ids(model), model,
                 source_params=key.source_params, cover_params=key.cover_params)
    if args.text:
        print(key.detokenize_ids(model, cover.tokens))
    else:
        _write_cover(cover.tokens, args.out)


def cmd_reveal(args) -> None:
    key = KeyConfig.load(args.key)
    model = key.build_model()
    tokens = _read_cover_ids(args.cover)
    from .arithmetic import CoverText

    cover = CoverText(tokens=tuple(tokens), context=key.context_ids(model))
    message = reveal(cover, model, source_params=key.source_params,
                     cover_params=key.cover_params)
    print(key.detokenize_ids(model, message.tokens[:-1]))


def _parse_grid(spec: str) -> dict:
    grids = {}
    for part in spec.split(";"):
        if not part.strip():
            continue
        name, _, values = part.partition("=")
        name = name.strip()
        if name not in DEFAULT_GRIDS:
            raise ValueError(f"unknown method {name!r} in grid spec")
        parsed = [float(v) if name == "arithmetic" else int(v)
                  for v in values.split(",") if v.strip()]
        grids[name] = parsed
    if not grids:
        raise ValueError("empty grid spec")
    return grids


def cmd_eval(args) -> None:
    key = KeyConfig.load(args.key)
    model = key.build_model()
    if args.contexts:
        docs = read_corpus(args.contexts)
        contexts = [(model.vocabulary().bos_id,
                     *key.tokenize_text(model, " ".join(doc))) for doc in docs]
    else:
        contexts = [key.context_ids(model)]
    grids = _parse_grid(args.grid) if args.grid else DEFAULT_GRIDS
    points = run_sweep(model, contexts, grids=grids, n_samples=args.samples,
                       seed=args.seed, payload_bits=args.payload_bits,
                       top_k=key.cover_params.top_k or 300,
                       precision=key.cover_params.precision,
                       block_seed=int(key.block_seed or 0))
    csv_text = sweep_to_csv(points)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(sweep_to_json(points))
    if args.gnuplot:
        with open(args.gnuplot, "w", encoding="utf-8") as fh:
            fh.write(sweep_to_gnuplot(points))
    print(f"wrote {len(points)} sweep points to {args.out}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stegotext",
        description="Hide uniformly random bits in model-generated text.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-ngram", help="train and serialize an n-gram model")
    p.add_argument("--corpus", required=True, help="UTF-8 text, one document per line")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.15)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_ngram)

    p = sub.add_parser("encode", help="embed message bits into cover tokens")
    p.add_argument("--key", required=True)
    p.add_argument("--message-bits", required=True,
                   help="hex string, or @FILE to read raw bytes")
    p.add_argument("--out", help="cover token-id file (default: stdout)")
    p.add_argument("--text", action="store_true",
                   help="print detokenized cover text instead of token ids")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="recover message bits from cover tokens")
    p.add_argument("--key", required=True)
    p.add_argument("--cover", required=True, help="token-id file from encode")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("hide", help="hide a text message inside cover text")
    p.add_argument("--key", required=True)
    p.add_argument("--message", required=True)
    p.add_argument("--out", help="cover token-id file (default: stdout)")
    p.add_argument("--text", action="store_true")
    p.set_defaults(func=cmd_hide)

    p = sub.add_parser("reveal", help="recover a hidden text message")
    p.add_argument("--key", required=True)
    p.add_argument("--cover", required=True)
    p.set_defaults(func=cmd_reveal)

    p = sub.add_parser("eval", help="run the bits/word vs KL sweep")
    p.add_argument("--key", required=True)
    p.add_argument("--contexts", help="text file, one conditioning context per line")
    p.add_argument("--grid", help="e.g. 'arithmetic=0.4,0.7,1.0;huffman=2,8;block=1,3'")
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--payload-bits", type=int, default=128)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--json", help="also write plot-ready JSON here")
    p.add_argument("--gnuplot", help="also write a gnuplot data file here")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - boundary: map to exit codes
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
