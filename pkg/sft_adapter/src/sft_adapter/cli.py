"""Command line front end: train an adapter, serve one over HTTP.

Secrets come from the environment only: set SFT_ADAPTER_TOKEN to require
a bearer token on /predict.
"""

import argparse
import os
import sys

from sft_adapter import __version__
from sft_adapter.config import load_config
from sft_adapter.errors import AdapterError
from sft_adapter.serve import AUTH_ENV, make_server
from sft_adapter.train import finetune, load_adapter, save_adapter


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sft-adapter",
        description="masked-loss adapter fine-tuning and a /predict server")
    parser.add_argument("--version", action="version",
                        version=f"sft-adapter {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("train", help="fine-tune an adapter on an SFT export")
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--sft", required=True, help="SFT JSONL export")
    p.add_argument("--out", required=True, help="adapter bundle path")

    p = sub.add_parser("serve", help="serve an adapter over HTTP")
    p.add_argument("--adapter", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.subcommand == "train":
            config = load_config(args.config)
            adapter = finetune(config, args.sft,
                               log=lambda line: print(line, file=sys.stderr))
            save_adapter(adapter, args.out)
            print(f"trained {config.task} adapter on {args.sft} -> {args.out} "
                  f"(final loss {adapter.epoch_losses[-1]:.6f})")
            return 0
        if args.subcommand == "serve":
            adapter = load_adapter(args.adapter)
            try:
                server = make_server(adapter, args.port, host=args.host,
                                     auth_token=os.environ.get(AUTH_ENV))
            except OSError as exc:
                print(f"error [startup]: cannot bind {args.host}:{args.port}: {exc}",
                      file=sys.stderr)
                return 1
            print(f"serving {adapter.config.task} adapter on "
                  f"http://{args.host}:{args.port}/predict", file=sys.stderr)
            try:
                server.serve_forever()
            except KeyboardInterrupt:
                pass
            finally:
                server.server_close()
            return 0
        raise AssertionError(f"unhandled subcommand {args.subcommand!r}")
    except AdapterError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [io_error]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
