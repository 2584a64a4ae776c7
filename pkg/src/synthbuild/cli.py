"""synthbuild command line: generate, preview, stats, bench."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config

log = logging.getLogger("synthbuild")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 already; keep the message on stderr
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="synthbuild", description="Procedural synthetic building dataset generator.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate a full dataset")
    g.add_argument("--config", required=True, help="JSON config file")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--seed", type=_nonneg_int, help="override master seed")
    g.add_argument("--samples", type=_pos_int, help="override sample count")
    g.add_argument("--jobs", type=_pos_int, help="worker processes (default: all cores)")

    pv = sub.add_parser("preview", help="generate a single sample")
    pv.add_argument("--config", required=True)
    pv.add_argument("--index", type=_nonneg_int, required=True, help="sample index")
    pv.add_argument("--out", required=True)
    pv.add_argument("--seed", type=_nonneg_int)

    s = sub.add_parser("stats", help="class statistics of a generated dataset")
    s.add_argument("--dataset", required=True, help="dataset directory")
    s.add_argument("--json", action="store_true", help="print JSON instead of a table")

    b = sub.add_parser("bench", help="time the float-depth x multiview matrix")
    b.add_argument("--config", required=True)
    b.add_argument("--samples", type=_pos_int, default=100)
    b.add_argument("--views", type=_pos_int, default=3, help="views in the multiview rows")
    b.add_argument("--out", default="bench_out", help="directory for bench.json")
    b.add_argument("--jobs", type=_pos_int, default=1)
    b.add_argument("--seed", type=_nonneg_int)
    b.add_argument("--backend", help="raster kernel: numpy or cython")
    return p


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING - 10 * min(verbosity, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _format_stats(stats) -> str:
    lines = [f"{'class':<12} {'count':>6} {'mean tris':>10}"]
    for name, n in stats.counts.items():
        lines.append(f"{name:<12} {n:>6} {stats.mean_triangles.get(name, 0.0):>10.1f}")
    lines.append(f"{'total':<12} {stats.total:>6}")
    lines.append(f"std-dev of class counts: {stats.std_dev:.6g}")
    return "\n".join(lines)


def _cmd_generate(args) -> int:
    from .pipeline import generate_dataset

    cfg = load_config(args.config, seed=args.seed, samples=args.samples)
    result = generate_dataset(cfg, args.out, jobs=args.jobs)
    failed = result.failed
    print(f"{len(result.records) - len(failed)}/{len(result.records)} samples written to {args.out}")
    for r in failed:
        print(f"sample {r.sample_id} failed: {r.error}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def _cmd_preview(args) -> int:
    from .pipeline import generate_sample

    cfg = load_config(args.config, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rec = generate_sample(cfg, args.index, out)
    print(f"{rec.sample_id} ({rec.typology.key}, {rec.n_triangles} triangles)")
    for f in rec.files:
        print(f"  {out / f}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    from .pipeline import compute_stats

    stats = compute_stats(args.dataset)
    print(json.dumps(stats.to_dict(), indent=2, sort_keys=True) if args.json else _format_stats(stats))
    return EXIT_OK


def _cmd_bench(args) -> int:
    from .pipeline import run_bench

    cfg = load_config(args.config, seed=args.seed)
    report = run_bench(cfg, args.out, samples=args.samples, views=args.views, jobs=args.jobs,
                       backend=args.backend)
    print(f"{'float depth':<12} {'multiview':<10} {'views':>5} {'wall s':>9} {'render ms/sample':>17}")
    for r in report.rows:
        print(f"{str(r.float_depth):<12} {str(r.multiview):<10} {r.views:>5} {r.wall_s:>9.2f} "
              f"{r.stage_means_ms['render']:>17.1f}")
    return EXIT_PARTIAL if any(r.failed for r in report.rows) else EXIT_OK


COMMANDS = {"generate": _cmd_generate, "preview": _cmd_preview, "stats": _cmd_stats, "bench": _cmd_bench}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"synthbuild: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, PermissionError, ValueError) as exc:
        print(f"synthbuild: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("synthbuild: interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
