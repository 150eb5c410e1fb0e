"""CLI entry: run the sidecar with a binding config or the built-in models."""

from __future__ import annotations

import argparse

from .config import SidecarConfig, builtin_demo_config
from .server import serve


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="simoap-sidecar",
        description="Serve generation/scoring models behind the reranking protocol.",
    )
    parser.add_argument("--config", help="JSON binding config (default: built-in models)")
    parser.add_argument("--backend-id", default="sidecar-demo")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8788)
    args = parser.parse_args(argv)

    if args.config:
        config = SidecarConfig.from_file(args.config)
    else:
        config = builtin_demo_config(args.backend_id)
    serve(config, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
