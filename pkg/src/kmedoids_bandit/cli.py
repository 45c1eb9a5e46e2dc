"""Command-line entry point: single runs (JSON) and benchmark grids (CSV).

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional, Sequence

from .bandit import BanditConfig
from .core import DataError, Dataset, Metric, UsageError
from .data import generate_synthetic, load_csv, subsample_with_replacement
from .driver import Algorithm, fit

EXIT_USAGE = 1
EXIT_DATA = 2

BENCH_COLUMNS = [
    "algorithm", "n", "k", "seed", "loss", "swap_iterations",
    "normalized_distance_count", "normalized_wall_ms", "cache_hit_rate",
]

SYNTHETIC_DEFAULTS = {"clusters": 3, "per_cluster": 100, "dim": 2, "spread": 1.0, "seed": 0}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_synthetic(spec: str) -> dict:
    """``"clusters=3,per_cluster=100,dim=2,spread=1,seed=0"``; omitted keys take defaults."""
    params = dict(SYNTHETIC_DEFAULTS)
    for item in filter(None, (s.strip() for s in spec.split(","))):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in params:
            raise UsageError(f"bad --synthetic entry {item!r}; keys are {', '.join(params)}")
        try:
            params[key] = float(value) if key == "spread" else int(value)
        except ValueError:
            raise UsageError(f"bad value for {key}: {value!r}") from None
    return params


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _algorithm_list(text: str):
    try:
        return [Algorithm.parse(v.strip()) for v in text.split(",") if v.strip()]
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _add_common(p: argparse.ArgumentParser, with_k: bool) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="PATH", help="numeric CSV file, one point per row")
    src.add_argument("--synthetic", metavar="SPEC",
                     help="Gaussian mixture, e.g. clusters=3,per_cluster=100,dim=2,spread=1,seed=0")
    p.add_argument("--has-header", action="store_true", help="skip the first CSV row")
    p.add_argument("--metric", default="l2", choices=[m.value for m in Metric])
    if with_k:
        p.add_argument("--algorithm", default="bp++", choices=[a.value for a in Algorithm])
        p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta", type=float, default=None, help="error probability (default 1/(k n^3))")
    p.add_argument("--max-swaps", type=int, default=None, help="swap cap T (default k)")
    p.add_argument("--cache-width", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kmedoids", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="cluster one dataset and print a JSON result")
    _add_common(run, with_k=True)

    bench = sub.add_parser("bench", help="run an algorithm grid and print CSV rows")
    _add_common(bench, with_k=False)
    bench.add_argument("--grid-n", type=_int_list, required=True)
    bench.add_argument("--grid-k", type=_int_list, required=True)
    bench.add_argument("--algorithms", type=_algorithm_list, required=True)
    bench.add_argument("--repeats", type=int, default=1)
    bench.add_argument("--grid-delta", type=_float_list, default=None)
    bench.add_argument("--grid-max-swaps", type=_int_list, default=None)
    return parser


def _load(args) -> Dataset:
    if args.input is not None:
        return load_csv(args.input, has_header=args.has_header)
    return generate_synthetic(**parse_synthetic(args.synthetic))


def _check_seed(seed: int) -> None:
    if not 0 <= seed < 2**64:
        raise UsageError("seed must be a 64-bit unsigned integer")


def _config(args, seed, delta, max_swaps) -> BanditConfig:
    return BanditConfig(
        delta=delta, batch_size=args.batch_size, max_swaps=max_swaps,
        cache_width=args.cache_width, seed=seed,
    )


def cmd_run(args, out) -> None:
    _check_seed(args.seed)
    data = _load(args)
    result = fit(data, args.metric, args.k, args.algorithm,
                 _config(args, args.seed, args.delta, args.max_swaps))
    json.dump(result.to_json_dict(), out)
    out.write("\n")


def bench_rows(args, data: Dataset):
    """Yield CSV rows in grid order: algorithm, n, k, delta, max_swaps, repeat."""
    if args.repeats < 1:
        raise UsageError("--repeats must be at least 1")
    deltas = args.grid_delta if args.grid_delta is not None else [args.delta]
    swaps = args.grid_max_swaps if args.grid_max_swaps is not None else [args.max_swaps]
    extra = args.grid_delta is not None or args.grid_max_swaps is not None
    for algorithm in args.algorithms:
        for n in args.grid_n:
            for k in args.grid_k:
                for delta in deltas:
                    for max_swaps in swaps:
                        for rep in range(args.repeats):
                            seed = args.seed + rep
                            _check_seed(seed)
                            sample = subsample_with_replacement(data, n, seed)
                            r = fit(sample, args.metric, k, algorithm,
                                    _config(args, seed, delta, max_swaps))
                            row = [r.algorithm, r.n, r.k, r.seed, r.loss, r.swap_iterations,
                                   r.normalized_distance_count, r.normalized_wall_ms,
                                   r.cache_hit_rate]
                            if extra:
                                row += ["" if delta is None else delta,
                                        "" if max_swaps is None else max_swaps]
                            yield row


def cmd_bench(args, out) -> None:
    data = _load(args)
    header = list(BENCH_COLUMNS)
    if args.grid_delta is not None or args.grid_max_swaps is not None:
        header += ["delta", "max_swaps"]
    # Buffer so that a failing cell never leaves a partial table behind.
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in bench_rows(args, data):
        writer.writerow(row)
    out.write(buf.getvalue())


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cmd_run(args, sys.stdout)
        else:
            cmd_bench(args, sys.stdout)
    except DataError as exc:
        print(f"kmedoids: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except UsageError as exc:
        print(f"kmedoids: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
