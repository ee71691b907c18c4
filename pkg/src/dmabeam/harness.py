"""Experiment runner: scheme registry, parameter sweeps, CSV persistence.

The CSV schema is the interchange format consumed by the plotting frontend:
sweep rows carry `scheme,variable,value,surrogate_bits,mc_mean,mc_se,ee,
iterations,seed,flags`, convergence traces carry
`scheme,iteration,rate_bits,violation_h`. Floats are printed with 17
significant digits so parsing a CSV reconstructs every value exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import sample_channel, stat_matrices
from .dma import assemble_views, microstrip_propagation, random_lorentzian
from .downlink import pdd_run, relaxed_ao_run
from .rates import RateReport, energy_efficiency, mc_rate
from .scenario import (ConfigError, Scenario, load_scenario, place_users,
                       read_config, resolved_config, rng_stream,
                       scenario_from_dict)
from .uplink import wmmse_run

SCHEMES = ("wmmse-sic", "wmmse-nsic", "pdd", "relaxed-ao", "no-opt",
           "icsi-wmmse", "icsi-pdd")
SWEEP_VARIABLES = ("N", "L", "S", "K0", "Pmax", "K")
CSV_HEADER = ["scheme", "variable", "value", "surrogate_bits", "mc_mean",
              "mc_se", "ee", "iterations", "seed", "flags"]
TRACE_HEADER = ["scheme", "iteration", "rate_bits", "violation_h"]
ENV_PREFIX = "DMABEAM_"


@dataclass
class ExperimentResult:
    fingerprint: str
    scheme: str
    variable: str
    value: float
    report: RateReport
    ee: float
    trace: list            # (iteration, rate_bits, violation) tuples
    iterations: float
    wall_clock: float
    seed: int
    flags: tuple


def fingerprint(sc: Scenario) -> str:
    blob = json.dumps(resolved_config(sc), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def env_overrides(environ=None) -> dict:
    """Raw config overrides from DMABEAM_<KEY> environment variables."""
    from .scenario import KNOWN_KEYS, _parse_scalar
    environ = os.environ if environ is None else environ
    out = {}
    for key in KNOWN_KEYS:
        val = environ.get(ENV_PREFIX + key.upper())
        if val is not None:
            out[key] = _parse_scalar(val)
    return out


def _uniform_power_precoder(dma, sc: Scenario) -> np.ndarray:
    """Cycled basis columns, each carrying exactly P_max/K after HQ."""
    W = np.zeros((sc.L, sc.K), dtype=complex)
    HQ = dma.HQ
    for k in range(sc.K):
        col = np.zeros(sc.L, dtype=complex)
        col[k % sc.L] = 1.0
        gain = float(np.linalg.norm(HQ @ col))
        W[:, k] = col * math.sqrt(sc.P_max / sc.K) / gain
    return W


def _run_scheme(scheme: str, sc: Scenario):
    """Execute one scheme end to end; returns (report, ee, trace, iters, flags)."""
    users = place_users(sc)
    stats, _ = stat_matrices(users, sc)
    model = microstrip_propagation(sc)
    mats = [st.G_tilde for st in stats]
    flags: list = []

    if scheme in ("wmmse-sic", "wmmse-nsic"):
        mode = "sic" if scheme == "wmmse-sic" else "nsic"
        res = wmmse_run(mode, mats, sc, model)
        report = mc_rate(mode, res.dma, stats, sc, sc.trials, sc.seed)
        trace = [(i + 1, r, float("nan"))
                 for i, r in enumerate(res.rate_trace_bits)]
        return report, float("nan"), trace, float(res.iterations), res.flags

    if scheme == "pdd":
        res = pdd_run(mats, sc, model)
        report = mc_rate("downlink", res.dma, stats, sc, sc.trials, sc.seed,
                         W=res.W)
        ee = energy_efficiency(report.mc_mean_bits, "DMA", sc)
        trace = [(t + 1, r, h) for t, (r, h) in
                 enumerate(zip(res.rate_trace_bits, res.h_trace))]
        return report, ee, trace, float(res.outer_iters), res.flags

    if scheme == "relaxed-ao":
        res = relaxed_ao_run(mats, sc, model)
        report = mc_rate("downlink", res.dma, stats, sc, sc.trials, sc.seed,
                         W=res.W)
        ee = energy_efficiency(report.mc_mean_bits, "DMA", sc)
        trace = [(i + 1, r, float("nan"))
                 for i, r in enumerate(res.rate_trace_bits)]
        return report, ee, trace, float(res.iterations), res.flags

    if scheme == "no-opt":
        dma = assemble_views(np.ones(sc.N, dtype=complex), model, sc, tag="UC")
        if sc.P_max is not None:
            W = _uniform_power_precoder(dma, sc)
            report = mc_rate("downlink", dma, stats, sc, sc.trials, sc.seed, W=W)
            ee = energy_efficiency(report.mc_mean_bits, "DMA", sc)
        else:
            report = mc_rate("sic", dma, stats, sc, sc.trials, sc.seed)
            ee = float("nan")
        return report, ee, [], 0.0, []

    if scheme in ("icsi-wmmse", "icsi-pdd"):
        rates = []
        iters = []
        for t in range(sc.trials):
            rng = rng_stream(sc.seed, t)
            gs = [sample_channel(st, rng) for st in stats]
            mats_t = [g[:, None] for g in gs]
            q0 = None
            if sc.constraint in ("LP", "UC"):
                q0 = random_lorentzian(sc.N, rng_stream(sc.seed, t, kind="init"))
            if scheme == "icsi-wmmse":
                res = wmmse_run("sic", mats_t, sc, model, q0=q0)
                rates.append(res.rate_trace_bits[-1])
                iters.append(res.iterations)
            else:
                res = pdd_run(mats_t, sc, model, q0=q0)
                rates.append(res.rate_bits)
                iters.append(res.outer_iters)
            for f in res.flags:
                if f not in flags:
                    flags.append(f)
        arr = np.asarray(rates)
        mean = float(arr.mean())
        se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
        mode = "sic" if scheme == "icsi-wmmse" else "downlink"
        report = RateReport(mode=mode, surrogate_bits=float("nan"),
                            mc_mean_bits=mean, mc_se_bits=se, trials=sc.trials)
        ee = (energy_efficiency(mean, "DMA", sc) if scheme == "icsi-pdd"
              else float("nan"))
        return report, ee, [], float(np.mean(iters)), flags

    raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def run_experiment(config, scheme: str, overrides: dict | None = None,
                   variable: str = "", value: float = float("nan")
                   ) -> ExperimentResult:
    """Run one scheme on a config file path (or a resolved Scenario)."""
    if isinstance(config, Scenario):
        sc = config
    else:
        sc = load_scenario(config, overrides)
    start = time.perf_counter()
    report, ee, trace, iters, flags = _run_scheme(scheme, sc)
    elapsed = time.perf_counter() - start
    return ExperimentResult(
        fingerprint=fingerprint(sc), scheme=scheme, variable=variable,
        value=value, report=report, ee=ee, trace=trace, iterations=iters,
        wall_clock=elapsed, seed=sc.seed, flags=tuple(flags))


def _sweep_overrides(variable: str, value, raw: dict) -> dict:
    if variable == "N":
        s_val = raw.get("S")
        if s_val is None:
            raise ConfigError("sweeping N requires S in the config")
        n = int(value)
        if n % int(s_val) != 0:
            raise ConfigError(f"N={n} is not a multiple of S={s_val}")
        return {"L": n // int(s_val)}
    if variable == "K0":
        return {"K0_db": value}
    if variable == "Pmax":
        return {"Pmax_dbm": value}
    if variable in ("L", "S", "K"):
        return {variable: int(value)}
    raise ConfigError(f"unknown sweep variable {variable!r}; "
                      f"expected one of {SWEEP_VARIABLES}")


def sweep(config, scheme: str, variable: str, values,
          overrides: dict | None = None, workers: int = 1
          ) -> list[ExperimentResult]:
    """One experiment per sweep value, results ordered by sweep index.

    Partial failures are recorded as rows with an `error:` flag rather than
    aborting the remaining points.
    """
    raw = dict(read_config(config)) if not isinstance(config, dict) else dict(config)
    if overrides:
        raw.update(overrides)

    def one(idx_value):
        idx, value = idx_value
        try:
            point = dict(raw)
            point.update(_sweep_overrides(variable, value, raw))
            sc = scenario_from_dict(point)
            res = run_experiment(sc, scheme, variable=variable,
                                 value=float(value))
        except Exception as exc:  # noqa: BLE001 - recorded, not swallowed
            res = ExperimentResult(
                fingerprint="", scheme=scheme, variable=variable,
                value=float(value),
                report=RateReport(mode="", surrogate_bits=float("nan"),
                                  mc_mean_bits=float("nan"),
                                  mc_se_bits=float("nan"), trials=0),
                ee=float("nan"), trace=[], iterations=0.0, wall_clock=0.0,
                seed=int(raw.get("seed", 0)), flags=(f"error:{exc}",))
        return idx, res

    items = list(enumerate(values))
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(one, items))
    else:
        done = [one(it) for it in items]
    done.sort(key=lambda t: t[0])
    return [r for _, r in done]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def result_row(res: ExperimentResult) -> list[str]:
    return [res.scheme, res.variable, _fmt(res.value),
            _fmt(res.report.surrogate_bits), _fmt(res.report.mc_mean_bits),
            _fmt(res.report.mc_se_bits), _fmt(res.ee), _fmt(res.iterations),
            str(res.seed), "|".join(res.flags)]


def write_csv(results: list[ExperimentResult], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for res in results:
            writer.writerow(result_row(res))


def write_trace_csv(results: list[ExperimentResult], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for res in results:
            for iteration, rate_bits, violation in res.trace:
                writer.writerow([res.scheme, str(int(iteration)),
                                 _fmt(rate_bits), _fmt(violation)])


def read_csv(path: str) -> list[dict]:
    """Parse a harness CSV back into dicts with numeric fields as floats."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            parsed = dict(row)
            for key, val in row.items():
                if key in ("scheme", "variable", "flags"):
                    continue
                try:
                    parsed[key] = float(val)
                except (TypeError, ValueError):
                    pass
            rows.append(parsed)
        return rows
