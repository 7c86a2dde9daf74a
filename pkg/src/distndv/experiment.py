"""Experiment harness: sample, partition, summarize, estimate, report.

Each trial samples the population once, computes the exact merged
frequency-of-frequency (the dictionary-shipping baseline), then for every
HyperLogLog precision runs the sketch protocol and evaluates every requested
estimator on both routes. Rows come out in (trial, b, estimator) order.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coordinator import SketchConfig, run_protocol
from .datagen import PopulationSpec, SamplePlan, sample_population
from .errors import ConfigError, EstimatorUndefined
from .estimators import ESTIMATORS, REQUIRED_ROLES, EstimatorInputs, evaluate, ratio_error
from .frequency import FoF, dict_from_stream, dict_merge, fof_from_dict
from .sketches import HyperLogLog

DEFAULT_ESTIMATORS = ("gee", "chao2", "cl1", "shlosser")

COLUMNS = [
    "trial", "seed", "dist", "N", "D_true", "lam", "s", "fof_path", "q", "q_resample", "k",
    "b", "l0", "cs_depth", "cs_width", "estimator",
    "n", "d_exact", "f1_exact", "l2sq_exact", "fof_exact",
    "d_hat", "f1_hat", "l2sq_hat", "d_resample", "f1_resample",
    "value_esti", "value_exact", "rel_error", "ratio_error_vs_D", "rel_error_vs_D",
    "notes", "bytes_sketch", "bytes_dict", "merges",
]


@dataclass
class ExperimentConfig:
    population: PopulationSpec
    q: float = 0.01
    q_resample: float | None = None
    k: int = 16
    b_list: tuple[int, ...] = (12,)
    cs_depth: int = 5
    cs_width: int = 20000
    estimators: tuple[str, ...] = DEFAULT_ESTIMATORS
    seed: int = 0
    trials: int = 1
    l0: str = "hll"
    timing: bool = False
    jobs: int = 1

    def validate(self) -> None:
        SamplePlan(self.q, self.k, 0)
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.b_list:
            raise ConfigError("need at least one HyperLogLog precision")
        for b in self.b_list:
            HyperLogLog(b)
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown:
            raise ConfigError(f"unknown estimators {unknown}; choose from {sorted(ESTIMATORS)}")
        if self.q_resample is not None and not 0 < self.q_resample <= 1:
            raise ConfigError(f"resample rate must be in (0, 1], got {self.q_resample}")

    @property
    def resample_rate(self) -> float:
        return self.q if self.q_resample is None else self.q_resample

    def roles(self) -> frozenset:
        roles: set[str] = {"ndv", "f1"}
        for e in self.estimators:
            roles |= REQUIRED_ROLES[e]
        return frozenset(roles)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


def _try(fn):
    try:
        return fn(), None
    except (EstimatorUndefined, ZeroDivisionError, ValueError) as exc:
        return None, f"ERR:{exc}"


def _trial_seeds(seed: int, trial: int) -> dict[str, int]:
    raw = np.random.SeedSequence([seed, trial]).generate_state(4, dtype=np.uint64)
    return dict(zip(("sample", "l0", "cs", "resample"), (int(v) for v in raw)))


def run_trial(cfg: ExperimentConfig, F: FoF, trial: int) -> list[dict]:
    seeds = _trial_seeds(cfg.seed, trial)
    streams = sample_population(F, SamplePlan(cfg.q, cfg.k, seeds["sample"]))
    fof = fof_from_dict(dict_merge(dict_from_stream(s) for s in streams))
    N, D = F.n, F.d
    exact_in = EstimatorInputs.from_fof(fof, N, cfg.q)
    exact_vals = {e: _try(lambda e=e: evaluate(e, exact_in, "exact").value) for e in cfg.estimators}

    pop = cfg.population
    base = {
        "trial": trial, "seed": cfg.seed, "dist": pop.distribution, "N": N, "D_true": D,
        "lam": pop.lam, "s": pop.s, "fof_path": pop.path, "q": cfg.q, "q_resample": cfg.resample_rate,
        "k": cfg.k, "l0": cfg.l0, "cs_depth": cfg.cs_depth, "cs_width": cfg.cs_width,
        "n": fof.n, "d_exact": fof.d, "f1_exact": fof.f(1), "l2sq_exact": fof.l2sq,
        "fof_exact": fof.encode(),
    }
    rows = []
    for b in cfg.b_list:
        scfg = SketchConfig(
            l0=cfg.l0, l2="exact" if cfg.l0 == "exact" else "countsketch",
            b=b, l0_seed=seeds["l0"], cs_depth=cfg.cs_depth, cs_width=cfg.cs_width,
            cs_seed=seeds["cs"], q_resample=cfg.resample_rate, resample_seed=seeds["resample"],
            roles=cfg.roles(),
        )
        t0 = time.perf_counter()
        res = run_protocol(streams, scfg)
        wall = time.perf_counter() - t0
        adj_in = EstimatorInputs(
            d=res.d, f1=res.f1, n=res.n, N=N, q=cfg.q, l2sq=res.l2sq,
            d_resample=res.d_resample, f1_resample=res.f1_resample,
        )
        for e in cfg.estimators:
            est, err = _try(lambda e=e: evaluate(e, adj_in, "adjusted"))
            exact, exact_err = exact_vals[e]
            value = est.value if est is not None else None
            rel = ratio = rel_d = None
            if value is not None and exact is not None and exact != 0:
                rel = abs(value - exact) / abs(exact)
            if value is not None and value > 0:
                ratio = ratio_error(value, D)
                rel_d = abs(value - D) / D
            row = dict(base)
            row.update({
                "b": b, "estimator": e,
                "d_hat": res.d, "f1_hat": res.f1, "l2sq_hat": res.l2sq,
                "d_resample": res.d_resample, "f1_resample": res.f1_resample,
                "value_esti": value if err is None else err,
                "value_exact": exact if exact_err is None else exact_err,
                "rel_error": rel, "ratio_error_vs_D": ratio, "rel_error_vs_D": rel_d,
                "notes": "|".join(est.notes) if est is not None else "",
                "bytes_sketch": res.ledger.sketch_bytes, "bytes_dict": res.ledger.baseline_bytes,
                "merges": res.ledger.merges,
            })
            if cfg.timing:
                row["wall_time_s"] = wall
                row["esti_f1_s"] = res.esti_f1_seconds
            rows.append(row)
    return rows


def _trial_job(args):
    cfg, F, trial = args
    return run_trial(cfg, F, trial)


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    cfg.validate()
    F = cfg.population.generate()
    jobs = [(cfg, F, t) for t in range(cfg.trials)]
    if cfg.jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            per_trial = list(pool.map(_trial_job, jobs))
    else:
        per_trial = [_trial_job(j) for j in jobs]
    return [row for rows in per_trial for row in rows]


def write_rows(rows: list[dict], fh, timing: bool = False) -> None:
    cols = COLUMNS + (["wall_time_s", "esti_f1_s"] if timing else [])
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in cols])


def rows_to_csv(rows: list[dict], timing: bool = False) -> str:
    buf = io.StringIO()
    write_rows(rows, buf, timing)
    return buf.getvalue()


CALIBRATION_COLUMNS = ["b", "cardinality", "seeds", "mean_rel_error", "std_rel_error", "theory_std", "std_ratio"]


def calibrate(b_list, cardinalities, seeds: int, base_seed: int = 0) -> list[dict]:
    """Empirical HyperLogLog relative error per (b, cardinality) over ``seeds`` hash seeds."""
    if seeds < 1:
        raise ConfigError("need at least one seed")
    rows = []
    for b in b_list:
        theory = 1.04 / np.sqrt(2.0**b)
        for card in cardinalities:
            ids = np.arange(1, card + 1, dtype=np.uint64)
            errs = []
            for s in range(seeds):
                sk = HyperLogLog(b, base_seed + s)
                sk.update(ids)
                errs.append(sk.estimate() / card - 1.0)
            errs = np.asarray(errs)
            std = float(errs.std(ddof=1)) if seeds > 1 else 0.0
            rows.append({
                "b": b, "cardinality": card, "seeds": seeds,
                "mean_rel_error": float(errs.mean()), "std_rel_error": std,
                "theory_std": float(theory), "std_ratio": std / theory,
            })
    return rows
