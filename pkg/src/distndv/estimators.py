"""Sampling-based NDV estimators.

Two routes per estimator:

* the original closed form, evaluated on an exact frequency-of-frequency;
* an adjusted form that only needs ``d``, ``f1``, ``n``, ``||X||_2^2`` and
  resample statistics, all of which the sketch pipeline can produce.

Inputs coming from sketches are projected onto ``0 <= f1 <= d <= n`` before
evaluation (see :func:`sanitize`); every projection is noted on the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

from .errors import EstimatorUndefined
from .frequency import FoF

# Below this relative gap the Sh2 size factor is replaced by q/(1+q).
SH2_APPROX_GAP = 0.01


def _xlog(x: float, y: float) -> float:
    """``x * ln(y)`` with the ``x -> 0`` limit taken as 0."""
    return 0.0 if x == 0 else x * math.log(y)


def gee(d: float, f1: float, N: float, n: float) -> float:
    if n < 1:
        raise EstimatorUndefined("GEE needs a non-empty sample")
    if N < n:
        raise EstimatorUndefined(f"population size {N} below sample size {n}")
    return d + (math.sqrt(N / n) - 1.0) * f1


def gee_from_fof(fof: FoF, N: float) -> float:
    """``sqrt(N/n) f1 + sum_{i>=2} f_i``, summed over the FoF directly."""
    n = fof.n
    if n < 1:
        raise EstimatorUndefined("GEE needs a non-empty sample")
    if N < n:
        raise EstimatorUndefined(f"population size {N} below sample size {n}")
    return math.sqrt(N / n) * fof.f(1) + sum(c for i, c in fof.items() if i >= 2)


def chao(d: float, f1: float, f2: float) -> float:
    if f2 <= 0:
        raise EstimatorUndefined("Chao's estimator blows up when f2 = 0")
    return d + f1 * f1 / (2.0 * f2)


def chao2(d: float, f1: float, f2: float) -> float:
    return d + f1 * (f1 - 1.0) / (2.0 * (f2 + 1.0))


def chao3(d: float, f1: float) -> float:
    """Chao with ``f2`` replaced by ``d - f1``."""
    if f1 == 0:
        return float(d)
    if d <= f1:
        raise EstimatorUndefined("every sampled value is a singleton (d == f1)")
    return d + 0.5 * f1 * f1 / (d - f1)


def gamma_sq_chao_lee(d_hat1: float, l2sq: float, n: float) -> float:
    if n < 2:
        raise EstimatorUndefined("Chao-Lee skew needs n >= 2")
    return max(d_hat1 * (l2sq - n) / (n * n - n - 1.0), 0.0)


def cl1(d: float, f1: float, n: float, l2sq: float) -> float:
    """First Chao-Lee estimator from ``(d, f1, n, ||X||_2^2)``.

    Written in the single-fraction form
    ``(d + f1 * max{d (l2sq - n) / ((1 - f1/n)(n^2 - n - 1)), 0}) / (1 - f1/n)``.
    """
    if n < 2:
        raise EstimatorUndefined("CL1 needs n >= 2")
    coverage = 1.0 - f1 / n
    if coverage <= 0:
        raise EstimatorUndefined("sample coverage is zero (f1 >= n)")
    skew = max(d * (l2sq - n) / (coverage * (n * n - n - 1.0)), 0.0)
    return (d + f1 * skew) / coverage


def cl1_coverage(fof: FoF) -> float:
    """CL1 built step by step: coverage, initial estimate, skew, final estimate."""
    n = fof.n
    d = fof.d
    f1 = fof.f(1)
    if n < 2:
        raise EstimatorUndefined("CL1 needs n >= 2")
    c_hat = 1.0 - f1 / n
    if c_hat <= 0:
        raise EstimatorUndefined("sample coverage is zero (f1 >= n)")
    d_hat1 = d / c_hat
    pair_sum = sum(i * (i - 1) * c for i, c in fof.items())
    gamma_sq = max(d_hat1 * pair_sum / (n * n - n - 1.0), 0.0)
    return d / c_hat + n * (1.0 - c_hat) / c_hat * gamma_sq


def unseen_ratio(fof: FoF, q: float) -> float:
    """``sum (1-q)^i f_i / sum i q (1-q)^(i-1) f_i``: expected f0 over expected f1."""
    num = sum((1.0 - q) ** i * c for i, c in fof.items())
    den = sum(i * q * (1.0 - q) ** (i - 1) * c for i, c in fof.items())
    if den <= 0:
        raise EstimatorUndefined("Shlosser denominator is zero")
    return num / den


def shlosser_original(fof: FoF, q: float) -> float:
    return fof.d + fof.f(1) * unseen_ratio(fof, q)


def shlosser_adjusted(d: float, f1: float, d_resample: float, f1_resample: float) -> float:
    if f1_resample <= 0:
        raise EstimatorUndefined("resample has no singletons; retry with another resample seed")
    return d + f1 * (d - d_resample) / f1_resample


def jackknife_uj1(d: float, f1: float, n: float, q: float) -> float:
    if n <= 0:
        raise EstimatorUndefined("jackknife needs n > 0")
    denom = 1.0 - (1.0 - q) * f1 / n
    if denom <= 0:
        raise EstimatorUndefined("(1-q) f1 >= n")
    return d / denom


def gamma_sq_haas(d_hat: float, l2sq: float, n: float, N: float) -> float:
    if n < 1 or N < 1:
        raise EstimatorUndefined("Haas skew needs n >= 1 and N >= 1")
    return max(0.0, d_hat / (n * n) * (l2sq - n) + d_hat / N - 1.0)


def jackknife_uj2(d: float, f1: float, n: float, q: float, l2sq: float, N: float) -> float:
    if not 0 < q <= 1:
        raise EstimatorUndefined(f"sample rate {q} outside (0, 1]")
    d_uj1 = jackknife_uj1(d, f1, n, q)
    g2 = gamma_sq_haas(d_uj1, l2sq, n, N)
    return (d - f1 * _xlog(1.0 - q, 1.0 - q) * g2 / q) / (1.0 - (1.0 - q) * f1 / n)


def jackknife_sj2(d: float, f1: float, n: float, q: float, l2sq: float, N: float) -> float:
    if not 0 < q <= 1:
        raise EstimatorUndefined(f"sample rate {q} outside (0, 1]")
    d_uj1 = jackknife_uj1(d, f1, n, q)
    if d_uj1 <= 0:
        raise EstimatorUndefined("first-order jackknife estimate is zero")
    g2 = gamma_sq_haas(d_uj1, l2sq, n, N)
    n_avg = N / d_uj1
    miss = (1.0 - q) ** n_avg
    if miss >= 1.0:
        raise EstimatorUndefined("(1-q)^N~ == 1")
    return (d - _xlog(miss, 1.0 - q) * N * g2) / (1.0 - miss)


def sh2_factor(q: float, n_avg: float) -> float:
    """``q (1+q)^(N~-1) / ((1+q)^N~ - 1)``, or ``q/(1+q)`` once they agree to 1%."""
    if n_avg <= 0 or q <= 0:
        raise EstimatorUndefined("Sh2 factor needs q > 0 and N~ > 0")
    tail = math.exp(-n_avg * math.log1p(q))  # (1+q)^-N~
    limit = q / (1.0 + q)
    if tail / (1.0 - tail) < SH2_APPROX_GAP:
        return limit
    return limit / -math.expm1(-n_avg * math.log1p(q))


def shlosser_sh2(d: float, f1: float, q: float, N: float, d_uj1: float, ratio: float) -> float:
    """Sh2 with the unseen ratio supplied (exact from a FoF, or from a resample)."""
    if d_uj1 <= 0:
        raise EstimatorUndefined("first-order jackknife estimate is zero")
    return d + f1 * sh2_factor(q, N / d_uj1) * ratio


def shlosser_sh2_from_fof(fof: FoF, q: float, N: float, d_uj1: float) -> float:
    if fof.f(1) == 0:
        return float(fof.d)
    return shlosser_sh2(fof.d, fof.f(1), q, N, d_uj1, unseen_ratio(fof, q))


def ratio_error(d_hat: float, D: float) -> float:
    if d_hat <= 0 or D <= 0:
        raise EstimatorUndefined("ratio error needs positive values")
    return max(d_hat / D, D / d_hat)


@dataclass
class EstimatorInputs:
    d: float
    f1: float
    n: int
    N: int
    q: float
    l2sq: float | None = None
    d_resample: float | None = None
    f1_resample: float | None = None
    fof: FoF | None = None
    notes: list[str] = field(default_factory=list)

    @classmethod
    def from_fof(cls, fof: FoF, N: int, q: float) -> EstimatorInputs:
        return cls(d=fof.d, f1=fof.f(1), n=fof.n, N=N, q=q, l2sq=fof.l2sq, fof=fof)


def sanitize(inputs: EstimatorInputs) -> EstimatorInputs:
    """Project sketch estimates onto ``0 <= f1 <= d <= n``, noting each clamp."""
    notes = list(inputs.notes)
    d, f1 = inputs.d, inputs.f1
    if d > inputs.n:
        notes.append(f"d clamped {d:.6g}->{inputs.n}")
        d = float(inputs.n)
    if d < 0:
        notes.append(f"d clamped {d:.6g}->0")
        d = 0.0
    if f1 > d:
        notes.append(f"f1 clamped {f1:.6g}->{d:.6g}")
        f1 = d
    if f1 < 0:
        notes.append(f"f1 clamped {f1:.6g}->0")
        f1 = 0.0
    d_res, f1_res = inputs.d_resample, inputs.f1_resample
    if d_res is not None and f1_res is not None:
        if d_res > d:
            notes.append(f"d_resample clamped {d_res:.6g}->{d:.6g}")
            d_res = d
        if f1_res > d_res:
            notes.append(f"f1_resample clamped {f1_res:.6g}->{d_res:.6g}")
            f1_res = d_res
    return replace(inputs, d=d, f1=f1, d_resample=d_res, f1_resample=f1_res, notes=notes)


@dataclass
class Estimate:
    name: str
    value: float
    path: str
    notes: list[str] = field(default_factory=list)
    below_d: bool = False


def _need(value, what: str):
    if value is None:
        raise EstimatorUndefined(f"missing input: {what}")
    return value


def _resample_ratio(x: EstimatorInputs) -> float:
    d_res = _need(x.d_resample, "resample d")
    f1_res = _need(x.f1_resample, "resample f1")
    if f1_res <= 0:
        raise EstimatorUndefined("resample has no singletons; retry with another resample seed")
    return (x.d - d_res) / f1_res


def _chao2_exact(x: EstimatorInputs) -> float:
    fof = _need(x.fof, "frequency of frequency")
    return chao2(fof.d, fof.f(1), fof.f(2))


def _sh2_adjusted(x: EstimatorInputs) -> float:
    if x.f1 == 0:
        return float(x.d)
    d_uj1 = jackknife_uj1(x.d, x.f1, x.n, x.q)
    return shlosser_sh2(x.d, x.f1, x.q, x.N, d_uj1, _resample_ratio(x))


def _sh2_exact(x: EstimatorInputs) -> float:
    fof = _need(x.fof, "frequency of frequency")
    return shlosser_sh2_from_fof(fof, x.q, x.N, jackknife_uj1(fof.d, fof.f(1), fof.n, x.q))


# name -> (exact route on a FoF, adjusted route on sketch outputs)
ESTIMATORS: dict[str, tuple[Callable[[EstimatorInputs], float], Callable[[EstimatorInputs], float]]] = {
    "gee": (
        lambda x: gee_from_fof(_need(x.fof, "frequency of frequency"), x.N),
        lambda x: gee(x.d, x.f1, x.N, x.n),
    ),
    "chao2": (
        _chao2_exact,
        lambda x: chao3(x.d, x.f1),
    ),
    "chao3": (
        lambda x: chao3(x.d, x.f1),
        lambda x: chao3(x.d, x.f1),
    ),
    "cl1": (
        lambda x: cl1_coverage(_need(x.fof, "frequency of frequency")),
        lambda x: cl1(x.d, x.f1, x.n, _need(x.l2sq, "l2 norm")),
    ),
    "shlosser": (
        lambda x: shlosser_original(_need(x.fof, "frequency of frequency"), x.q),
        lambda x: shlosser_adjusted(
            x.d, x.f1, _need(x.d_resample, "resample d"), _need(x.f1_resample, "resample f1")
        ),
    ),
    "uj1": (
        lambda x: jackknife_uj1(x.d, x.f1, x.n, x.q),
        lambda x: jackknife_uj1(x.d, x.f1, x.n, x.q),
    ),
    "uj2": (
        lambda x: jackknife_uj2(x.d, x.f1, x.n, x.q, _need(x.l2sq, "l2 norm"), x.N),
        lambda x: jackknife_uj2(x.d, x.f1, x.n, x.q, _need(x.l2sq, "l2 norm"), x.N),
    ),
    "sj2": (
        lambda x: jackknife_sj2(x.d, x.f1, x.n, x.q, _need(x.l2sq, "l2 norm"), x.N),
        lambda x: jackknife_sj2(x.d, x.f1, x.n, x.q, _need(x.l2sq, "l2 norm"), x.N),
    ),
    "sh2": (_sh2_exact, _sh2_adjusted),
}

# sketch roles each estimator needs on the adjusted route
REQUIRED_ROLES = {
    "gee": {"ndv", "f1"},
    "chao2": {"ndv", "f1"},
    "chao3": {"ndv", "f1"},
    "uj1": {"ndv", "f1"},
    "cl1": {"ndv", "f1", "cs"},
    "uj2": {"ndv", "f1", "cs"},
    "sj2": {"ndv", "f1", "cs"},
    "shlosser": {"ndv", "f1", "resample_ndv", "resample_f1"},
    "sh2": {"ndv", "f1", "resample_ndv", "resample_f1"},
}


def evaluate(name: str, inputs: EstimatorInputs, path: str = "adjusted") -> Estimate:
    """Evaluate estimator ``name`` on the ``"exact"`` or ``"adjusted"`` route.

    Raises :class:`EstimatorUndefined` when the estimator has no value.
    """
    if name not in ESTIMATORS:
        raise KeyError(f"unknown estimator {name!r}")
    exact_fn, adjusted_fn = ESTIMATORS[name]
    if path == "exact":
        x, fn = inputs, exact_fn
    elif path == "adjusted":
        x, fn = sanitize(inputs), adjusted_fn
    else:
        raise ValueError(f"unknown path {path!r}")
    value = float(fn(x))
    if not math.isfinite(value):
        raise EstimatorUndefined(f"{name} is not finite")
    below = value < x.d * (1 - 1e-12)
    notes = list(x.notes)
    if below:
        notes.append("below d")
    return Estimate(name, value, path, notes, below)
