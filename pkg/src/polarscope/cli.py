"""Command-line entry point: ``polarscope {analyze,synth,metrics,graph}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path

from . import __version__, pipeline, synth
from .graph import GraphError
from .metrics import MetricInputError, UnsupportedConfigurationError, compute_all
from .model import DataError, ingest
from .stats import DegenerateInputError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DEGENERATE = 4

logger = logging.getLogger("polarscope")


def _k_range(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}")
    lo, hi = int(m.group(1)), int(m.group(2))
    if lo < 2 or hi < lo:
        raise argparse.ArgumentTypeError("k range needs 2 <= A <= B")
    return lo, hi


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, type=Path, help="interaction file")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")


def _add_ld_mode(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ld-mode", choices=("share", "count"), default="share",
                   help="weight sources by interaction share (default) or raw count")


def _add_walks(p: argparse.ArgumentParser) -> None:
    p.add_argument("--walks", type=_positive_int, default=10_000, help="random walks per side")
    p.add_argument("--k-auth", type=_positive_int, default=None,
                   help="authoritative nodes per side (default 5%% of the side)")
    p.add_argument("--max-steps", type=_positive_int, default=100_000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarscope", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="metrics, KDE, clustering and graph statistics")
    _add_input(p)
    _add_ld_mode(p)
    p.add_argument("--positive-community", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--k-range", type=_k_range, default=(2, 10), metavar="A..B")
    p.add_argument("--restarts", type=_positive_int, default=50)
    p.add_argument("--no-graph", action="store_true", help="skip modularity and RWC")
    _add_walks(p)

    p = sub.add_parser("synth", help="write a synthetic dataset with ground truth")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--profile", choices=("paper",))
    src.add_argument("--config", type=Path, help="JSON generator config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("metrics", help="per-user metrics only")
    _add_input(p)
    _add_ld_mode(p)
    p.add_argument("--positive-community", default=None)
    p.add_argument("--out", required=True, type=Path, help="output directory")

    p = sub.add_parser("graph", help="modularity and random-walk controversy")
    _add_input(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None, help="write graph.json here instead of stdout")
    _add_walks(p)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("POLARSCOPE_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def cmd_analyze(args) -> int:
    ds = ingest(args.input, args.format)
    cfg = pipeline.AnalysisConfig(
        positive_community=args.positive_community,
        seed=args.seed,
        k_min=args.k_range[0],
        k_max=args.k_range[1],
        restarts=args.restarts,
        walks_per_side=args.walks,
        k_authoritative=args.k_auth,
        max_steps=args.max_steps,
        ld_mode=args.ld_mode,
        graph_stats=not args.no_graph,
    )
    echo = pipeline.input_echo(args.input, args.format)
    # echo the file name only so the report does not depend on the working directory
    echo["path"] = args.input.name
    result = pipeline.analyze(ds, cfg, echo)
    paths = pipeline.write_outputs(result, args.out)
    for w in result.report["warnings"]:
        logger.warning(w)
    logger.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.profile == "paper":
        cfg = synth.paper_profile(args.seed if args.seed is not None else 0)
    else:
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise synth.SynthConfigError(f"{args.config}: {exc}") from None
        cfg = synth.SynthConfig.from_dict(raw)
        if args.seed is not None:
            cfg = synth.SynthConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    ds, truth = synth.generate(cfg)
    synth.write_synthetic(ds, truth, args.out, args.format, cfg)
    return EXIT_OK


def cmd_metrics(args) -> int:
    ds = ingest(args.input, args.format)
    positive = args.positive_community
    if positive is not None and positive not in ds.communities:
        raise DataError(f"positive community {positive!r} not in dataset")
    mv = compute_all(ds, positive, ld_mode=args.ld_mode)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "metrics.csv").write_text(pipeline.metrics_csv(mv, ds.communities), encoding="utf-8")
    return EXIT_OK


def cmd_graph(args) -> int:
    ds = ingest(args.input, args.format)
    cfg = pipeline.AnalysisConfig(
        seed=args.seed, walks_per_side=args.walks, k_authoritative=args.k_auth, max_steps=args.max_steps,
    )
    warnings: list[str] = []
    stats = pipeline.graph_statistics(ds, cfg, warnings, strict=True)
    stats["warnings"] = warnings
    stats["config"] = {"seed": args.seed, "walks_per_side": args.walks,
                       "k_authoritative": args.k_auth, "max_steps": args.max_steps}
    text = pipeline.dump_report(stats)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "graph.json").write_text(text, encoding="utf-8")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "synth": cmd_synth, "metrics": cmd_metrics, "graph": cmd_graph}


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (DataError, synth.SynthConfigError, KeyError, OSError, MetricInputError) as exc:
        logger.error("%s", exc.args[0] if isinstance(exc, KeyError) and exc.args else exc)
        return EXIT_DATA
    except (pipeline.DegenerateAnalysisError, DegenerateInputError, GraphError,
            UnsupportedConfigurationError) as exc:
        logger.error("%s", exc)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
