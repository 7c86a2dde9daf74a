"""Command line entry point: ``distndv {generate,run,calibrate,check-assumption}``.

Exit status is 0 on success, 2 on usage/configuration errors and 1 on any
other failure. Output files default to ``$DISTNDV_OUTPUT_DIR`` (or the
current directory) when ``--out`` is not given; ``--out -`` writes to stdout.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from .datagen import PopulationSpec, check_assumption, save_fof_file
from .errors import ConfigError
from .estimators import ESTIMATORS
from .experiment import CALIBRATION_COLUMNS, DEFAULT_ESTIMATORS, ExperimentConfig, calibrate, fmt, run_experiment, write_rows

log = logging.getLogger("distndv")

OUTPUT_DIR_ENV = "DISTNDV_OUTPUT_DIR"


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(t)) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _big_int(text: str) -> int:
    # accept 1e7 style sizes
    try:
        return int(float(text)) if any(c in text for c in "eE.") else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None


def _add_population(p: argparse.ArgumentParser, with_file: bool = True) -> None:
    choices = ["poisson", "zipf", "file"] if with_file else ["poisson", "zipf"]
    p.add_argument("--dist", choices=choices, required=True)
    p.add_argument("--N", type=_big_int, default=10**7, help="population size")
    p.add_argument("--lam", type=float, help="Poisson mean class size")
    p.add_argument("--s", type=float, help="Zipf skew (> 1)")
    p.add_argument("--D", type=_big_int, help="Zipf class count (default N/10)")
    if with_file:
        p.add_argument("--fof", help="population FoF CSV for --dist file")
    p.add_argument("--pop-seed", type=int, default=0)


def _population(args) -> PopulationSpec:
    return PopulationSpec(
        distribution=args.dist, N=args.N, lam=args.lam, s=args.s, D=args.D,
        path=getattr(args, "fof", None), seed=args.pop_seed,
    )


def _default_out(name: str) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / name


@contextmanager
def _open_out(target: str | None, default_name: str):
    if target == "-":
        yield sys.stdout
        return
    path = Path(target) if target else _default_out(default_name)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        yield fh
    log.info("wrote %s", path)


def cmd_generate(args) -> int:
    F = _population(args).generate()
    target = args.out or str(_default_out(f"fof_{args.dist}.csv"))
    if target == "-":
        for i, c in F.sorted_items():
            print(f"{i},{c}")
    else:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        save_fof_file(F, target)
        log.info("wrote %s", target)
    print(f"D={F.d} N={F.n} sizes={len(F)}", file=sys.stderr)
    return 0


def cmd_run(args) -> int:
    cfg = ExperimentConfig(
        population=_population(args), q=args.q, q_resample=args.q_resample, k=args.k,
        b_list=tuple(args.b), cs_depth=args.cs_depth, cs_width=args.cs_width,
        estimators=tuple(args.estimators), seed=args.seed, trials=args.trials,
        l0=args.l0, timing=args.timing, jobs=args.jobs,
    )
    rows = run_experiment(cfg)
    with _open_out(args.out, "run.csv") as fh:
        write_rows(rows, fh, cfg.timing)
    return 0


def cmd_calibrate(args) -> int:
    if args.seeds < 1:
        raise ConfigError("--seeds must be at least 1")
    rows = calibrate(args.b, args.cardinalities, args.seeds, args.seed)
    with _open_out(args.out, "calibrate.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CALIBRATION_COLUMNS)
        for r in rows:
            w.writerow([fmt(r[c]) for c in CALIBRATION_COLUMNS])
    return 0


def cmd_check_assumption(args) -> int:
    F = _population(args).generate()
    ok, ratio = check_assumption(F, args.q, args.c, args.model)
    print(f"ratio={ratio:.6g} c={args.c} model={args.model} {'PASS' if ok else 'FAIL'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distndv", description="Distributed distinct-value estimation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic population FoF CSV")
    _add_population(g, with_file=False)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run sketch and exact pipelines, emit report CSV")
    _add_population(r)
    r.add_argument("--q", type=float, default=0.01, help="sample rate")
    r.add_argument("--q-resample", type=float, help="resample rate (default: --q)")
    r.add_argument("--k", type=int, default=16, help="number of machines")
    r.add_argument("--b", type=_int_list, default=[12], help="HyperLogLog precisions, e.g. 10,12,14")
    r.add_argument("--cs-depth", type=int, default=5)
    r.add_argument("--cs-width", type=int, default=20000)
    r.add_argument(
        "--estimators", type=lambda t: [e for e in t.split(",") if e], default=list(DEFAULT_ESTIMATORS),
        help=f"comma-separated subset of {','.join(ESTIMATORS)}",
    )
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--trials", type=int, default=1)
    r.add_argument(
        "--l0", choices=["hll", "exact"], default="hll",
        help="'exact' replaces every sketch with an exact oracle (l0 and l2)",
    )
    r.add_argument("--timing", action="store_true", help="add wall-time columns (output no longer reproducible)")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("calibrate", help="empirical HyperLogLog error table")
    c.add_argument("--b", type=_int_list, default=[10, 12, 14])
    c.add_argument("--cardinalities", type=_int_list, default=[10**6])
    c.add_argument("--seeds", type=int, default=100, help="number of hash seeds")
    c.add_argument("--seed", type=int, default=0, help="first hash seed")
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    a = sub.add_parser("check-assumption", help="expected f1/d of a sample against threshold c")
    _add_population(a)
    a.add_argument("--q", type=float, required=True)
    a.add_argument("--c", type=float, required=True)
    a.add_argument("--model", choices=["poisson", "binomial"], default="poisson")
    a.set_defaults(func=cmd_check_assumption)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        parser.error(str(exc))
    except Exception as exc:  # noqa: BLE001
        log.error("error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
