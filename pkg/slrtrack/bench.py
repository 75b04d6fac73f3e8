#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains the Monte-Carlo benchmark harness: algorithm dispatch on generated scenarios,
subspace-error / relative-error / wall-time metrics, trial aggregation, CSV and JSON reporting and golden-file
comparison.

Remarks:

- Trial ``i`` of a suite uses the seed ``base_seed + i``; every algorithm of a trial sees the same generated data
- Solver failures never propagate out of :func:`run_once`; they are recorded in the :class:`RunRecord`
- Wall times are recorded, but excluded from golden-file comparison

"""

import csv
import json
import logging
import os
import time
from dataclasses import dataclass
from dataclasses import field
from multiprocessing.pool import ThreadPool
from typing import Any
from typing import Dict
from typing import List
from typing import Literal
from typing import Optional

import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field

from .batch import AltProjConfig
from .batch import altproj
from .batch import modified_pcp
from .batch import pcp_admm
from .completion import GrouseParams
from .completion import GrouseTracker
from .completion import MaskedMatrix
from .completion import mc_altmin
from .completion import spectral_init_clipped
from .exceptions import IterationLimit
from .exceptions import PreconditionError
from .linalg import subspace_error
from .linalg import topr_svd
from .scenarios import ScenarioConfig
from .scenarios import assemble_scenario
from .scenarios import gen_missing_mask
from .trackers import NorstParams
from .trackers import NorstTracker
from .utilities import load_config
from .utilities import rel_frob_err
from .utilities import rng_stream

logger = logging.getLogger(__name__)

ALGORITHMS = ("altproj", "pcp", "modpcp", "norst", "norst-offline", "mc-altmin", "grouse")
NOT_IMPLEMENTED = ("GRASTA", "ORPCA", "RPCA-GD")
CSV_COLUMNS = ("t", "SE", "rel_err", "wall_ms")


class AlgorithmSpec(BaseModel):
    """
    Algorithm id plus parameters. ``label`` names the algorithm in reports (defaults to ``name``).

    """
    model_config = ConfigDict(extra="forbid")

    name: Literal["altproj", "pcp", "modpcp", "norst", "norst-offline", "mc-altmin", "grouse"]
    params: Dict[str, Any] = {}
    label: Optional[str] = None

    @property
    def id(self):
        return self.label or self.name


class BenchSuite(BaseModel):
    """
    A Monte-Carlo experiment: every algorithm on every scenario, ``trials`` times.

    ``thresholds`` maps ``"<scenario>/<algorithm id>"`` to the largest acceptable mean relative error.

    """
    model_config = ConfigDict(extra="forbid")

    scenarios: List[ScenarioConfig]
    algorithms: List[AlgorithmSpec]
    trials: int = Field(10, ge=1)
    base_seed: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)
    out_dir: str = "bench_out"
    thresholds: Dict[str, float] = {}


def load_suite(path):
    return load_config(BenchSuite, path)


@dataclass
class RunRecord:
    """
    Result of one algorithm on one generated scenario.

    Attributes
    ----------
    rows : : list of ``(t, SE, rel_err, wall_ms)``
        Checkpoint metrics in time order: SE of the current subspace estimate against the true subspace,
        relative error of the estimated frame at ``t`` and elapsed wall time.
    rel_frob_err : : number
        :math:`\\|\\hat L - L\\|_F / \\|L\\|_F` over all frames.
    extras : : dictionary
        Algorithm-specific diagnostics, e.g. detected change times or support-recovery rates.
    error : : string or ``None``
        ``"<ErrorClass>: <message>"`` if the run failed.

    """
    scenario: str
    algo: str
    params: Dict[str, Any]
    seed: int
    rows: List[tuple] = field(default_factory=list)
    rel_frob_err: float = float("nan")
    final_se: float = float("nan")
    wall_ms: float = 0.0
    error: Optional[str] = None
    notes: List[str] = field(default_factory=list)
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self):
        return self.error is None


def _frame_err(Lhat, L, t):
    return rel_frob_err(Lhat[:, t], L[:, t])


def _estimate_basis(Lhat, r):
    return topr_svd(Lhat, min(r, *Lhat.shape)).U


def _run_altproj(truth, spec, record, clock):
    r = spec.params.get("r", truth.config.r)
    config = AltProjConfig(**{**spec.params, "r": r})
    Lhat = altproj(truth.M, config).Lhat
    t_last = truth.tmax - 1
    record.rows.append((t_last, subspace_error(_estimate_basis(Lhat, r), truth.basis_at(t_last)),
                        _frame_err(Lhat, truth.L, t_last), clock()))
    return Lhat


def _solve_or_last(fn, record, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except IterationLimit as exc:
        record.notes.append(str(exc))
        return exc.last_iterate


def _run_pcp(truth, spec, record, clock):
    kwargs = {k: spec.params[k] for k in ("lam", "tol", "max_iters") if k in spec.params}
    Lhat = _solve_or_last(pcp_admm, record, truth.M, **kwargs).Lhat
    t_last = truth.tmax - 1
    record.rows.append((t_last, subspace_error(_estimate_basis(Lhat, truth.config.r), truth.basis_at(t_last)),
                        _frame_err(Lhat, truth.L, t_last), clock()))
    return Lhat


def _run_modpcp(truth, spec, record, clock):
    """
    Segment-wise modified PCP: segment 0 by PCP, segment ``j`` with the prior basis estimated from segment ``j - 1``.
    Change times are taken as known.

    """
    kwargs = {k: spec.params[k] for k in ("lam", "tol", "max_iters", "eps_noise") if k in spec.params}
    r = truth.config.r
    Lhat = np.empty_like(truth.M)
    G = None
    for j, (start, stop) in enumerate(truth.config.segment_bounds()):
        block = truth.M[:, start:stop]
        if G is None:
            out = _solve_or_last(pcp_admm, record, block, **{k: v for k, v in kwargs.items() if k != "eps_noise"})
        else:
            out = _solve_or_last(modified_pcp, record, block, G, **kwargs)
        Lhat[:, start:stop] = out.Lhat
        G = _estimate_basis(out.Lhat, r)
        record.rows.append((stop - 1, subspace_error(G, truth.bases[j]), _frame_err(Lhat, truth.L, stop - 1), clock()))
    return Lhat


def _norst_params(truth, spec):
    defaults = {"r": truth.config.r, "t_train": truth.config.t_train}
    if truth.config.xmin > 0:
        defaults["xmin"] = truth.config.xmin
    return NorstParams(**{**defaults, **spec.params})


def _support_exact_fraction(supports, truth, start):
    hits = [np.array_equal(np.sort(supports[t]), truth.support.support(t)) for t in range(start, truth.tmax)]
    return float(np.mean(hits)) if hits else float("nan")


def _run_norst(truth, spec, record, clock):
    offline = spec.name == "norst-offline"
    tracker = NorstTracker(_norst_params(truth, spec), keep_history=offline)
    result = tracker.run(truth.M)
    params = result.params
    checkpoints = []
    for i, (t, basis) in enumerate(result.update_log):
        se = subspace_error(basis, truth.basis_at(t))
        checkpoints.append({"t": int(t), "k": i % params.K + 1, "phase": i // params.K, "SE": se})
    record.extras.update({
        "t_hat": [int(t) for t in result.t_hat],
        "change_times": list(truth.change_times),
        "alpha": params.alpha,
        "K": params.K,
        "omega_evals": params.omega_evals,
        "checkpoints": checkpoints,
        "support_exact_fraction": _support_exact_fraction(result.supports, truth, result.t_train),
        "fallback_frames": len(result.fallback_frames),
    })
    if not offline:
        for c in checkpoints:
            record.rows.append((c["t"], c["SE"], _frame_err(result.Lhat, truth.L, c["t"]), clock()))
        return result.Lhat

    Lhat, _ = tracker.offline()
    bases = tracker.final_bases()
    for c in checkpoints:
        j = int(np.searchsorted(result.t_hat, c["t"], side="right"))
        record.rows.append((c["t"], subspace_error(bases[j], truth.basis_at(c["t"])),
                            _frame_err(Lhat, truth.L, c["t"]), clock()))
    return Lhat


def _observed(truth, spec):
    p = spec.params.get("p", 1.0)
    return gen_missing_mask(truth.n, truth.tmax, p, rng_stream(truth.config.seed, "observed"))


def _run_mc_altmin(truth, spec, record, clock):
    omega = _observed(truth, spec)
    kwargs = {k: spec.params[k] for k in ("T", "mode", "eps", "mu", "refine") if k in spec.params}
    Lhat, info = mc_altmin(MaskedMatrix(truth.M, omega), spec.params.get("r", truth.config.r),
                           seed=truth.config.seed, return_info=True, **kwargs)
    record.extras["sweeps"] = info.sweeps
    record.extras["partitioned_sweeps"] = info.partitioned_sweeps
    t_last = truth.tmax - 1
    record.rows.append((t_last, subspace_error(_estimate_basis(Lhat, truth.config.r), truth.basis_at(t_last)),
                        _frame_err(Lhat, truth.L, t_last), clock()))
    return Lhat


def _fit(P, y, idx):
    if idx.size < P.r:
        return np.zeros(P.n)
    return P.data @ np.linalg.lstsq(P.data[idx], y[idx], rcond=None)[0]


def _run_grouse(truth, spec, record, clock):
    omega = _observed(truth, spec)
    r, t_train = truth.config.r, truth.config.t_train
    every = spec.params.get("every", 50)
    grouse_params = GrouseParams(**{k: v for k, v in spec.params.items() if k in GrouseParams.model_fields})
    Phat = spectral_init_clipped(MaskedMatrix(truth.M[:, :t_train], omega[:, :t_train]), r)
    tracker = GrouseTracker(Phat, grouse_params)
    Lhat = np.empty_like(truth.M)
    for t in range(t_train):
        Lhat[:, t] = _fit(Phat, truth.M[:, t], np.flatnonzero(omega[:, t]))
    skipped = 0
    for t in range(t_train, truth.tmax):
        idx = np.flatnonzero(omega[:, t])
        Lhat[:, t] = _fit(tracker.Phat, truth.M[:, t], idx)
        skipped += tracker.process_frame(truth.M[:, t], idx).skipped
        if (t - t_train + 1) % every == 0 or t == truth.tmax - 1:
            record.rows.append((t, subspace_error(tracker.Phat, truth.basis_at(t)), _frame_err(Lhat, truth.L, t), clock()))
    record.extras["skipped_steps"] = int(skipped)
    return Lhat


_DISPATCH = {
    "altproj": _run_altproj,
    "pcp": _run_pcp,
    "modpcp": _run_modpcp,
    "norst": _run_norst,
    "norst-offline": _run_norst,
    "mc-altmin": _run_mc_altmin,
    "grouse": _run_grouse,
}


def run_once(scenario, algo, seed=None, truth=None):
    """
    Run one algorithm on one scenario and capture its metrics.

    Parameters
    ----------
    scenario : : :class:`~slrtrack.scenarios.ScenarioConfig`
    algo : : :class:`AlgorithmSpec` or algorithm id
    seed : : integer
        Overrides the scenario seed.
    truth : : :class:`~slrtrack.scenarios.GroundTruth`
        Pre-generated data for ``scenario`` (and ``seed``); generated when missing.

    Returns
    -------
    :class:`RunRecord`

    """
    if isinstance(algo, str):
        algo = AlgorithmSpec(name=algo)
    if seed is not None and seed != scenario.seed:
        scenario = scenario.model_copy(update={"seed": seed})
    record = RunRecord(scenario=scenario.name, algo=algo.id, params=dict(algo.params), seed=scenario.seed)
    start = time.perf_counter()

    def clock():
        return (time.perf_counter() - start) * 1e3

    try:
        if truth is None:
            truth = assemble_scenario(scenario)
        start = time.perf_counter()
        Lhat = _DISPATCH[algo.name](truth, algo, record, clock)
        record.wall_ms = clock()
        record.rel_frob_err = rel_frob_err(Lhat, truth.L)
        if record.rows:
            record.final_se = float(record.rows[-1][1])
    except Exception as exc:
        record.error = f"{type(exc).__name__}: {exc}"
        record.wall_ms = clock()
        logger.warning("%s on %s (seed %d) failed: %s", algo.id, scenario.name, scenario.seed, record.error)
    return record


@dataclass
class MonteCarloReport:
    """
    Aggregated Monte-Carlo results.

    Attributes
    ----------
    records : : list of :class:`RunRecord`
        Sorted by scenario, algorithm and seed.
    summary : : dictionary
        ``summary[scenario][algo]`` with mean and standard deviation of ``rel_err``, ``final_se`` and ``wall_ms``,
        the number of trials and the number of failures.
    curves : : dictionary
        ``curves[(scenario, algo)]``: trial-averaged checkpoint rows ``(t, SE, rel_err, wall_ms)``.

    """
    records: List[RunRecord]
    summary: Dict[str, Dict[str, Any]]
    curves: Dict[tuple, List[tuple]]


def _stats(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {"mean": float("nan"), "std": float("nan")}
    return {"mean": float(np.mean(values)), "std": float(np.std(values))}


def aggregate(records):
    """
    Aggregate run records per (scenario, algorithm); the result does not depend on the order of ``records``.

    """
    if not records:
        raise PreconditionError("no run records to aggregate")
    records = sorted(records, key=lambda rec: (rec.scenario, rec.algo, rec.seed))
    groups = {}
    for rec in records:
        groups.setdefault((rec.scenario, rec.algo), []).append(rec)

    summary = {}
    curves = {}
    for (scenario, algo), group in groups.items():
        ok = [rec for rec in group if rec.ok]
        summary.setdefault(scenario, {})[algo] = {
            "rel_err": _stats([rec.rel_frob_err for rec in ok]),
            "final_se": _stats([rec.final_se for rec in ok]),
            "wall_ms": _stats([rec.wall_ms for rec in ok]),
            "trials": len(group),
            "failures": len(group) - len(ok),
            "errors": sorted({rec.error for rec in group if not rec.ok}),
        }
        by_t = {}
        for rec in ok:
            for t, se, rel, ms in rec.rows:
                by_t.setdefault(int(t), []).append((se, rel, ms))
        curves[(scenario, algo)] = [
            (t, *(float(np.mean(col)) for col in zip(*by_t[t]))) for t in sorted(by_t)
        ]
    return MonteCarloReport(records=records, summary=summary, curves=curves)


def _trial_runner(suite):
    def run_trial(item):
        scenario, trial = item
        seed = suite.base_seed + trial
        cfg = scenario.model_copy(update={"seed": seed})
        try:
            truth = assemble_scenario(cfg)
        except Exception as exc:
            error = f"{type(exc).__name__}: {exc}"
            return [RunRecord(scenario=cfg.name, algo=a.id, params=dict(a.params), seed=seed, error=error)
                    for a in suite.algorithms]
        records = []
        for algo in suite.algorithms:
            records.append(run_once(cfg, algo, truth=truth))
            logger.info("%s / %s / seed %d: rel_err %.3e", cfg.name, algo.id, seed, records[-1].rel_frob_err)
        return records

    return run_trial


def monte_carlo(suite):
    """
    Run every (scenario, trial) pair of a suite on a bounded thread pool and aggregate the records.

    Returns
    -------
    :class:`MonteCarloReport`

    """
    if isinstance(suite, dict):
        suite = BenchSuite(**suite)
    items = [(scenario, trial) for scenario in suite.scenarios for trial in range(suite.trials)]
    run_trial = _trial_runner(suite)
    if suite.workers > 1:
        with ThreadPool(suite.workers) as pool:
            batches = pool.map(run_trial, items)
    else:
        batches = [run_trial(item) for item in items]
    report = aggregate([rec for batch in batches for rec in batch])
    failures = sum(entry["failures"] for algos in report.summary.values() for entry in algos.values())
    if failures:
        logger.warning("%d of %d runs failed", failures, len(report.records))
    return report


def check_thresholds(summary, thresholds):
    """
    List the ``"<scenario>/<algo>"`` keys whose mean relative error exceeds its threshold (or is missing).

    """
    failed = []
    for key, limit in thresholds.items():
        scenario, _, algo = key.partition("/")
        mean = summary.get(scenario, {}).get(algo, {}).get("rel_err", {}).get("mean", float("nan"))
        if not mean <= limit:
            failed.append(key)
    return failed


def _csv_name(scenario, algo):
    return f"{scenario}__{algo}.csv"


def write_curve(path, rows, deterministic=False):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for t, se, rel, ms in rows:
            writer.writerow([int(t), repr(float(se)), repr(float(rel)), repr(0.0 if deterministic else float(ms))])


def read_csv(path):
    """
    Parse a curve CSV written by :func:`report` into a list of ``(t, SE, rel_err, wall_ms)`` tuples.

    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        return [(int(row[0]), float(row[1]), float(row[2]), float(row[3])) for row in reader]


def _plot_script(curves):
    lines = [
        "# gnuplot script: subspace error against time",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale y",
        "set xlabel 't'",
        "set ylabel 'SE'",
    ]
    plots = [f"'{_csv_name(s, a)}' using 1:2 with linespoints title '{s} {a}'" for (s, a) in sorted(curves)]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def report(result, out_dir, deterministic=False, suite=None):
    """
    Write one CSV per (scenario, algorithm), ``summary.json`` and a gnuplot script ``plot.gp``.

    Parameters
    ----------
    result : : :class:`MonteCarloReport` or list of :class:`RunRecord`
    deterministic : : boolean
        Write wall times as 0 so that repeated runs with one base seed give byte-identical files.
    suite : : :class:`BenchSuite`
        Stored as ``suite.json`` for later re-runs by :func:`verify`.

    Returns
    -------
    The summary dictionary written to ``summary.json``.

    """
    if not isinstance(result, MonteCarloReport):
        result = aggregate(list(result))
    os.makedirs(out_dir, exist_ok=True)
    for (scenario, algo), rows in result.curves.items():
        write_curve(os.path.join(out_dir, _csv_name(scenario, algo)), rows, deterministic=deterministic)

    results = {}
    for scenario, algos in result.summary.items():
        results[scenario] = {}
        for algo, entry in algos.items():
            entry = dict(entry)
            if deterministic:
                entry["wall_ms"] = {"mean": 0.0, "std": 0.0}
            entry["csv"] = _csv_name(scenario, algo)
            results[scenario][algo] = entry
    summary = {
        "metric": "||Lhat - L||_F / ||L||_F",
        "results": results,
        "not_implemented": {name: {"status": "not_implemented"} for name in NOT_IMPLEMENTED},
        "seeds": sorted({rec.seed for rec in result.records}),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "plot.gp"), "w") as f:
        f.write(_plot_script(result.curves))
    if suite is not None:
        with open(os.path.join(out_dir, "suite.json"), "w") as f:
            f.write(suite.model_dump_json(indent=2))
    return summary


def _close(a, b, rtol):
    if np.isnan(a) and np.isnan(b):
        return True
    return bool(np.isclose(a, b, rtol=rtol, atol=0.0))


def verify(golden_dir, candidate_dir, rtol=1e-6):
    """
    Compare a report directory against a golden one: summary means of ``rel_err`` and ``final_se`` and the
    ``t``, ``SE`` and ``rel_err`` columns of every CSV, with relative tolerance ``rtol``. Wall times are ignored.

    Returns
    -------
    A list of human-readable mismatches; empty when the directories agree.

    """
    with open(os.path.join(golden_dir, "summary.json")) as f:
        golden = json.load(f)["results"]
    with open(os.path.join(candidate_dir, "summary.json")) as f:
        candidate = json.load(f)["results"]

    mismatches = []
    for scenario, algos in golden.items():
        for algo, entry in algos.items():
            other = candidate.get(scenario, {}).get(algo)
            if other is None:
                mismatches.append(f"{scenario}/{algo}: missing from candidate")
                continue
            for metric in ("rel_err", "final_se"):
                a, b = entry[metric]["mean"], other[metric]["mean"]
                if not _close(a, b, rtol):
                    mismatches.append(f"{scenario}/{algo}: {metric} mean {b!r} differs from golden {a!r}")
            rows_a = read_csv(os.path.join(golden_dir, entry["csv"]))
            rows_b = read_csv(os.path.join(candidate_dir, other["csv"]))
            if len(rows_a) != len(rows_b):
                mismatches.append(f"{scenario}/{algo}: {len(rows_b)} curve rows, golden has {len(rows_a)}")
                continue
            for ra, rb in zip(rows_a, rows_b):
                if ra[0] != rb[0] or not (_close(ra[1], rb[1], rtol) and _close(ra[2], rb[2], rtol)):
                    mismatches.append(f"{scenario}/{algo}: row t={rb[0]} differs from golden t={ra[0]}")
                    break
    for scenario, algos in candidate.items():
        for algo in algos:
            if algo not in golden.get(scenario, {}):
                mismatches.append(f"{scenario}/{algo}: not in golden")
    return mismatches
