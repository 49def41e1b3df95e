"""Run the model server from the command line."""

from __future__ import annotations

import argparse

import uvicorn

from .app import build_app
from .model import ServerConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stegotext-server",
        description="Serve deterministic next-token distributions over HTTP.")
    parser.add_argument("--model", default="demo",
                        help="'demo' or a local causal-LM checkpoint path")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--sparse-top", type=int, default=None,
                        help="serve only the top-N probabilities plus a remainder")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8471)
    parser.add_argument("--demo-seed", type=int, default=0)
    args = parser.parse_args(argv)
    config = ServerConfig(model=args.model, device=args.device,
                          sparse_top=args.sparse_top, port=args.port,
                          host=args.host, demo_seed=args.demo_seed)
    app = build_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
