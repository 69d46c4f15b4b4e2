"""Run the sidecar: ``embed-service --manifest manifest.json --port 8500``."""

from __future__ import annotations

import argparse
import logging

import uvicorn

from .app import create_app_from_manifest


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="embed-service")
    parser.add_argument("--manifest", required=True, help="model manifest JSON")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8500)
    parser.add_argument("--log-level", default="info")
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper())
    app = create_app_from_manifest(args.manifest)
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
