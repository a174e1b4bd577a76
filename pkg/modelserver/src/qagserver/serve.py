"""Entry point: load checkpoints and serve the wire protocol.

Checkpoint loading happens before the socket opens; a missing or broken
checkpoint prevents startup.
"""

from __future__ import annotations

import argparse
import logging

import uvicorn

from .app import create_app
from .config import DecodeDefaults, ServerConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qag-server",
                                     description="Serve QA generation model roles over HTTP")
    parser.add_argument("--config", help="JSON config with checkpoint paths per role")
    for role in ("qfs", "agm", "qgm", "qam", "ranker", "embed"):
        parser.add_argument(f"--{role}", help=f"{role} checkpoint directory")
    parser.add_argument("--device", default=None)
    parser.add_argument("--port", type=int, default=None)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--beam-size", type=int, default=None)
    parser.add_argument("--max-len", type=int, default=None)
    parser.add_argument("--temperature", type=float, default=None)
    return parser


def config_from_args(args) -> ServerConfig:
    doc = {}
    if args.config:
        cfg = ServerConfig.from_json(args.config)
        doc = {role: getattr(cfg, role) for role in ("qfs", "agm", "qgm", "qam", "ranker", "embed")}
        doc.update(device=cfg.device, port=cfg.port, max_source_len=cfg.max_source_len)
        decode = cfg.decode
    else:
        decode = DecodeDefaults()
    for key in ("qfs", "agm", "qgm", "qam", "ranker", "embed", "device", "port"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    decode_over = {k: v for k, v in (("beam_size", args.beam_size),
                                     ("max_len", args.max_len),
                                     ("temperature", args.temperature)) if v is not None}
    if decode_over:
        decode = DecodeDefaults(**{**decode.__dict__, **decode_over})
    return ServerConfig(decode=decode, **doc)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO)
    args = build_parser().parse_args(argv)
    cfg = config_from_args(args)
    app = create_app(cfg)  # loads all checkpoints; raises before binding on failure
    uvicorn.run(app, host=args.host, port=cfg.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
