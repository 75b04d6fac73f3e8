#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Command-line interface ``slr``.

- ``slr gen --config c.json --out dir/``: generate a scenario and persist its ground truth
- ``slr run --algo ALGO --config c.json``: run one algorithm on a generated scenario, or stream frames through NORST
- ``slr bench --suite s.json --trials N --out dir/``: Monte-Carlo benchmark with CSV/JSON report
- ``slr verify --golden dir/``: regression comparison against a golden report

Remarks:

- The environment variable ``SLR_SEED`` overrides the scenario seed (``gen``, ``run``) and the base seed (``bench``)
- Exit codes: 0 on success, 2 on an acceptance-threshold failure or golden mismatch, 1 on any error

"""

import argparse
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import __version__
from . import bench
from . import matio
from . import presets
from .exceptions import SlrError
from .loggers import LoggerBench
from .loggers import LoggerNorst
from .scenarios import assemble_scenario
from .scenarios import load_scenario
from .scenarios import save_ground_truth
from .simulator import Simulator
from .trackers import NorstParams
from .trackers import NorstTracker
from .utilities import load_config
from .utilities import parse_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD = 2


def _env_seed():
    value = os.environ.get("SLR_SEED")
    if value is None or value == "":
        return None
    try:
        seed = int(value)
    except ValueError:
        raise SlrError(f"SLR_SEED must be a non-negative integer, got {value!r}")
    if seed < 0:
        raise SlrError(f"SLR_SEED must be a non-negative integer, got {value!r}")
    return seed


def _scenario(path):
    config = load_scenario(path)
    seed = _env_seed()
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    return config


def _parse_params(pairs):
    params = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise SlrError(f"parameter {pair!r} is not of the form key=value")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def cmd_gen(args):
    truth = assemble_scenario(_scenario(args.config))
    save_ground_truth(truth, args.out)
    print(f"scenario {truth.config.name} (seed {truth.config.seed}) written to {args.out}")
    return EXIT_OK


def _record_summary(record):
    return {
        "scenario": record.scenario,
        "algo": record.algo,
        "seed": record.seed,
        "params": record.params,
        "rel_frob_err": record.rel_frob_err,
        "final_se": record.final_se,
        "wall_ms": record.wall_ms,
        "error": record.error,
        "notes": record.notes,
        "extras": record.extras,
    }


def _stream_norst(args, params):
    """
    Stream frames (an SLRM file or framed binary input on stdin) through NORST, one CSV row per frame.

    """
    if "r" not in params or "xmin" not in params:
        if args.config is None:
            raise SlrError("streaming NORST needs r and xmin, from --param or a scenario --config")
        scenario = _scenario(args.config)
        params = {"r": scenario.r, "xmin": scenario.xmin, "t_train": scenario.t_train, **params}
    tracker = NorstTracker(NorstParams(**params))
    if args.data == "-":
        source = matio.iter_frames(sys.stdin.buffer)
    else:
        source = matio.read_matrix(args.data)
    sim = Simulator(tracker, source, t_train=tracker.params_init.t_train)

    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    datafile = os.path.join(out_dir, "frames.csv")
    frame_logger = LoggerNorst()
    with open(datafile, "w") as f:
        f.write(",".join(frame_logger.header) + "\n")

    def on_frame(t, observation, out):
        row = (t, out.That.size, float(np.linalg.norm(out.xhat)), out.residual, out.phase, out.k)
        frame_logger.log_data_row(datafile, *row)
        if args.print_steps:
            frame_logger.print_sim_step(*row)

    sim.run(on_frame)
    summary = {
        "frames": sim.t + 1,
        "t_hat": [int(t) for t in tracker.state.t_hat],
        "updates": len(tracker.state.update_log),
        "params": tracker.params.model_dump(),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2)
    print(json.dumps({"frames": summary["frames"], "t_hat": summary["t_hat"]}))
    return EXIT_OK


def cmd_run(args):
    params = _parse_params(args.param)
    if args.params is not None:
        with open(args.params) as f:
            params = {**json.load(f), **params}
    if args.data is not None:
        if args.algo != "norst":
            raise SlrError("frame streaming is available for --algo norst only")
        return _stream_norst(args, params)
    if args.config is None:
        raise SlrError("--config is required unless frames are streamed with --data")

    record = bench.run_once(_scenario(args.config), bench.AlgorithmSpec(name=args.algo, params=params))
    LoggerBench().print_sim_step(record.scenario, record.algo, record.seed, record.rel_frob_err,
                                 record.final_se, record.wall_ms, record.error)
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        bench.write_curve(os.path.join(args.out, "curve.csv"), record.rows)
        with open(os.path.join(args.out, "record.json"), "w") as f:
            json.dump(_record_summary(record), f, indent=2, default=float)
    return EXIT_OK if record.ok else EXIT_ERROR


def _load_suite(args):
    if args.preset == "desk":
        suite = presets.desk_suite()
    elif args.preset == "full":
        suite = presets.full_suite()
    elif args.suite is not None:
        suite = bench.load_suite(args.suite)
    else:
        raise SlrError("either --suite or --preset is required")
    update = {}
    if args.trials is not None:
        update["trials"] = args.trials
    if args.workers is not None:
        update["workers"] = args.workers
    seed = _env_seed()
    if seed is not None:
        update["base_seed"] = seed
    return parse_config(bench.BenchSuite, {**suite.model_dump(), **update})


def cmd_bench(args):
    suite = _load_suite(args)
    out_dir = args.out or suite.out_dir
    result = bench.monte_carlo(suite)
    bench.report(result, out_dir, deterministic=args.deterministic, suite=suite)
    LoggerBench().print_summary(result.summary, not_implemented=bench.NOT_IMPLEMENTED)
    failed = bench.check_thresholds(result.summary, suite.thresholds)
    if failed:
        print("acceptance thresholds not met: " + ", ".join(failed), file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_verify(args):
    candidate = args.candidate
    if candidate is None:
        suite = load_config(bench.BenchSuite, os.path.join(args.golden, "suite.json"))
        candidate = tempfile.mkdtemp(prefix="slr-verify-")
        bench.report(bench.monte_carlo(suite), candidate, deterministic=True, suite=suite)
    mismatches = bench.verify(args.golden, candidate, rtol=args.rtol)
    for line in mismatches:
        print(line, file=sys.stderr)
    if mismatches:
        return EXIT_THRESHOLD
    print(f"{candidate} matches {args.golden}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="slr", description="Robust PCA and robust subspace tracking toolkit.")
    parser.add_argument("--version", action="version", version=f"slrtrack {__version__}")
    parser.add_argument("--verbose", action="store_true", help="Log library progress messages to stderr.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a scenario and write its ground truth.")
    gen.add_argument("--config", required=True, help="Scenario JSON file.")
    gen.add_argument("--out", required=True, help="Output directory.")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="Run one algorithm.")
    run.add_argument("--algo", required=True, choices=bench.ALGORITHMS, help="Algorithm id.")
    run.add_argument("--config", help="Scenario JSON file.")
    run.add_argument("--params", help="JSON file with algorithm parameters.")
    run.add_argument("--param", action="append", metavar="KEY=VALUE",
                     help="Algorithm parameter; the value is parsed as JSON when possible. Repeatable.")
    run.add_argument("--data", help="SLRM data file, or '-' for framed frames on stdin (NORST streaming).")
    run.add_argument("--out", help="Output directory for per-frame CSV and JSON summary.")
    run.add_argument("--print_steps", action="store_true", help="Print every frame into the terminal.")
    run.set_defaults(func=cmd_run)

    bench_parser = sub.add_parser("bench", help="Monte-Carlo benchmark.")
    bench_parser.add_argument("--suite", help="Suite JSON file.")
    bench_parser.add_argument("--preset", choices=["desk", "full"], help="Built-in suite instead of --suite.")
    bench_parser.add_argument("--trials", type=int, help="Number of trials per scenario.")
    bench_parser.add_argument("--workers", type=int, help="Size of the worker pool.")
    bench_parser.add_argument("--out", help="Report directory.")
    bench_parser.add_argument("--deterministic", action="store_true",
                              help="Write wall times as 0 so that reports are byte-identical across runs.")
    bench_parser.set_defaults(func=cmd_bench)

    verify = sub.add_parser("verify", help="Compare a report against a golden report.")
    verify.add_argument("--golden", required=True, help="Golden report directory (with suite.json).")
    verify.add_argument("--candidate", help="Report to check; by default the golden suite is re-run.")
    verify.add_argument("--rtol", type=float, default=1e-6, help="Relative tolerance.")
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (SlrError, ValueError, OSError) as exc:
        print(f"slr: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
