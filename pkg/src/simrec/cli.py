"""``simrec`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from . import pipeline, synth
from .config import RunConfig, load_config
from .errors import ConfigError, ParseError, SimrecError

log = logging.getLogger("simrec")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="key = value config file (flags override it)")
    parent.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    keys = parent.add_argument_group("config keys")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        kw = {"dest": f.name, "default": None, "help": f"{f.name}: {f.metadata['help']} (default: {f.default})"}
        if f.metadata.get("choices"):
            kw["choices"] = f.metadata["choices"]
        keys.add_argument(flag, **kw)
    return parent


COMMANDS = {
    "synth": "generate a planted-cluster synthetic corpus into workdir",
    "ingest": "parse the clickstream and write the temporal train/test split",
    "train-cf": "compute the blended item-to-item similarity table",
    "pool": "build per-item candidate pools",
    "train-item2vec": "train item2vec embeddings",
    "train-personalized": "train the personalized model (plain and add-cart enhanced)",
    "evaluate": "compute top-K click and add-cart hit ratios",
    "serve": "run the HTTP similar-items service",
    "pipeline": "run ingest through evaluate end to end",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simrec", description="Personalized similar-product recommendation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()
    for name, help in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help, description=help)
    return parser


def _config(args) -> RunConfig:
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig) if getattr(args, f.name) is not None}
    return load_config(args.config, overrides)


def cmd_synth(cfg: RunConfig) -> None:
    paths = synth.write_synth(synth.generate(cfg.synth_config()), cfg.workdir)
    for k, p in paths.items():
        print(f"{k}\t{p}")


def cmd_serve(cfg: RunConfig) -> None:
    from .serving import ServeConfig, load_artifacts, make_server

    serve_cfg = ServeConfig(k=cfg.k, fallback=cfg.fallback, latency_budget_ms=cfg.latency_budget_ms,
                            host=cfg.host, port=cfg.port, ttl_s=cfg.ttl_s, pool_size=cfg.pool_size)
    model = cfg.serve_model or pipeline.artifact(cfg, "addcart")
    table = pipeline.artifact(cfg, "cf_table")
    state = load_artifacts(model, pipeline.artifact(cfg, "pools"), table, serve_cfg)
    server = make_server(state, cfg.host, cfg.port)
    log.info("serving %d items (d=%d) on http://%s:%d", len(state.model.index), state.model.dim,
             *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def run(cfg: RunConfig, command: str) -> None:
    if command == "synth":
        return cmd_synth(cfg)
    if command == "serve":
        return cmd_serve(cfg)
    if command == "ingest":
        pipeline.run_ingest(cfg)
        return
    if command == "pipeline":
        report = pipeline.run_pipeline(cfg)
        print(report.to_text(), end="")
        return
    train, test = pipeline.load_split(cfg)
    if command == "train-cf":
        pipeline.run_cf(cfg, train)
    elif command == "pool":
        with pipeline.stage("candidate-pool"):
            from .cf import read_similarity_table
            table = read_similarity_table(pipeline.artifact(cfg, "cf_table"), cfg.alpha)
        pipeline.run_pool(cfg, train, table)
    elif command == "train-item2vec":
        pipeline.run_item2vec(cfg, train)
    elif command == "train-personalized":
        pipeline.run_personalized(cfg, train)
    elif command == "evaluate":
        from .pool import read_pools
        with pipeline.stage("candidate-pool"):
            pools = read_pools(pipeline.artifact(cfg, "pools"), cfg.pool_size)
        report = pipeline.run_evaluate(cfg, train, test, pools, pipeline.load_models(cfg))
        print(report.to_text(), end="")
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(command)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        run(cfg, args.command)
    except (ConfigError, UsageError) as exc:
        print(f"simrec: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except pipeline.StageError as exc:
        print(f"simrec: {exc}", file=sys.stderr)
        if exc.usage_error:
            return EXIT_USAGE
        return EXIT_DATA if exc.data_error else EXIT_INTERNAL
    except (ParseError, OSError, SimrecError) as exc:
        print(f"simrec: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"simrec: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
