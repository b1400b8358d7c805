"""Command-line surface: simulate | predict | compare | tune.

Every run is driven by a flat key = value config (file plus flag overrides)
and emits CSV or JSON tables carrying a metadata block (config hash, seed,
tool version), so any artifact can be reproduced from its own header.
Numbers are serialized with 17 significant digits for lossless double
round-trips.
"""

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import __version__
from .errors import (
    IllConditionedEtaError,
    NoFeasiblePointError,
    NonConvergenceError,
    NumericalInputError,
    PredictionError,
    SimulationError,
    SingularSystemError,
    ValidationError,
)
from .expect import get_engine
from .model import InitSpec
from .predict import predict_trajectory
from .simulate import ExperimentConfig, LambdaSchedule, run_trials
from .state import StateVec
from .tune import TuneGrid, build_report, recommend, sweep

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_NO_FEASIBLE = 4

MODES = ("simulate", "predict", "compare", "tune")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "predict"
    d: int = 200
    m: int = 32
    sigma: float = 0.0
    lambda0: float = 100.0
    schedule: str = "constant"
    t0: int = 0
    slope: float = 1.0
    convention: str = "offset"
    iters: int = 1000
    trials: int = 30
    seed: int = 0
    alpha0: float | None = 0.99
    init_dist: float | None = None
    init_norm: float = 1.0
    out: str = "run"
    format: str = "csv"
    nodes: int = 64
    v4_denominator: str = "symmetric"
    parallelism: int = 0
    target_err: float = 1e-8
    policy: str = "min-iterations-to-target"
    budget: int | None = None
    m_grid: tuple = ()
    lambda_grid: tuple = ()
    prefloor_margin: float = 1.5

    def to_text(self):
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"config line {lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _PARSERS:
                raise ValidationError(f"config line {lineno}: unknown key {key!r}")
            values[key] = _PARSERS[key](val)
        return cls(**values)

    def config_hash(self):
        # hash what is computed, not where it is written
        lines = [line for line in self.to_text().splitlines()
                 if not line.startswith(("out ", "format "))]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:12]

    def lambda_schedule(self):
        return LambdaSchedule(kind=self.schedule, lambda0=self.lambda0,
                              t0=self.t0, slope=self.slope,
                              convention=self.convention)

    def init_spec(self):
        if self.init_dist is not None:
            return InitSpec.distance(self.init_dist, norm=self.init_norm)
        if self.alpha0 is None:
            raise ValidationError("either alpha0 or init_dist must be set")
        return InitSpec.overlap(self.alpha0, norm=self.init_norm)

    def initial_state(self):
        a0, b0 = self.init_spec().state_targets()
        return StateVec(a0, b0, a0, b0)

    def engine(self):
        return get_engine(points_per_panel=max(8, self.nodes // 4))

    def experiment(self):
        return ExperimentConfig(d=self.d, m=self.m, sigma=self.sigma,
                                schedule=self.lambda_schedule(),
                                init=self.init_spec(), T=self.iters)

    def n_jobs(self):
        return self.parallelism if self.parallelism > 0 else (os.cpu_count() or 1)


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_opt(parse):
    return lambda s: None if s.lower() == "none" else parse(s)


def _parse_tuple(parse):
    return lambda s: tuple(parse(x) for x in s.split(",") if x.strip()) if s else ()


_PARSERS = {
    "mode": str, "schedule": str, "convention": str, "out": str,
    "format": str, "v4_denominator": str, "policy": str,
    "d": int, "m": int, "t0": int, "iters": int, "trials": int,
    "seed": int, "nodes": int, "parallelism": int,
    "sigma": float, "lambda0": float, "slope": float, "init_norm": float,
    "target_err": float, "prefloor_margin": float,
    "alpha0": _parse_opt(float), "init_dist": _parse_opt(float),
    "budget": _parse_opt(int),
    "m_grid": _parse_tuple(int), "lambda_grid": _parse_tuple(float),
}


def _validate_config(config):
    if config.mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}; got {config.mode!r}")
    if config.format not in ("csv", "json"):
        raise ValidationError(f"format must be csv or json; got {config.format!r}")
    if config.iters < 0:
        raise ValidationError("iters must be nonnegative")
    if config.trials < 1:
        raise ValidationError("trials must be >= 1")
    if config.nodes < 8:
        raise ValidationError("nodes must be >= 8")
    if config.prefloor_margin < 1.0:
        raise ValidationError("prefloor_margin must be >= 1")
    return config


# ---------------------------------------------------------------------------
# table emission

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _json_value(v):
    if v is None:
        return None
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def write_table(path, columns, rows, metadata, fmt):
    """Emit one table with its metadata block as CSV or JSON."""
    if fmt == "csv":
        with open(path, "w") as fh:
            for key in sorted(metadata):
                fh.write(f"# {key} = {metadata[key]}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")
    else:
        doc = {
            "metadata": {k: str(v) for k, v in sorted(metadata.items())},
            "columns": list(columns),
            "rows": [[_json_value(v) for v in row] for row in rows],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")


def read_table(path):
    """Parse a table written by write_table; cells come back as floats
    (ints preserved where exact) with empty cells as None."""
    if path.endswith(".json"):
        with open(path) as fh:
            doc = json.load(fh)
        return doc["metadata"], doc["columns"], doc["rows"]
    metadata = {}
    columns = None
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                metadata[key.strip()] = val.strip()
                continue
            if columns is None:
                columns = line.split(",")
                continue
            if not line:
                continue
            rows.append([None if cell == "" else float(cell)
                         for cell in line.split(",")])
    return metadata, columns or [], rows


def _base_metadata(config):
    return {
        "version": __version__,
        "mode": config.mode,
        "config_hash": config.config_hash(),
        "seed": config.seed,
    }


def _out_path(config, suffix):
    return f"{config.out}.{suffix}.{config.format}"


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(config):
    """Multi-trial empirical run: per-trial records plus the aggregate."""
    result = run_trials(config.experiment(), config.trials, config.seed,
                        n_jobs=config.n_jobs())
    meta = _base_metadata(config)
    meta["trials"] = config.trials

    trial_rows = []
    for k, tr in enumerate(result.trajectories):
        for t, s in enumerate(tr.states):
            trial_rows.append([t, k, s.alpha, s.beta, s.talpha, s.tbeta,
                               tr.err[t], tr.frob[t]])
    trials_path = _out_path(config, "trials")
    write_table(trials_path,
                ["t", "trial", "alpha", "beta", "talpha", "tbeta", "err", "frob_err"],
                trial_rows, meta, config.format)

    agg_rows = [[int(t), result.median[t], result.q25[t], result.q75[t]]
                for t in range(config.iters + 1)]
    agg_path = _out_path(config, "aggregate")
    write_table(agg_path, ["t", "median_err", "q25_err", "q75_err"],
                agg_rows, meta, config.format)
    return [trials_path, agg_path], result


def cmd_predict(config):
    """Deterministic trajectory; no randomness consumed."""
    traj = predict_trajectory(config.initial_state(), config.iters, config.d,
                              config.m, config.sigma, config.lambda_schedule(),
                              engine=config.engine(),
                              v4_denominator=config.v4_denominator)
    rows = [[t, s.alpha, s.beta, s.talpha, s.tbeta, traj.err_seq[t],
             bool(traj.theory_region[t])]
            for t, s in enumerate(traj.states)]
    path = _out_path(config, "predict")
    write_table(path,
                ["t", "alpha", "beta", "talpha", "tbeta", "err_seq", "theory_region"],
                rows, _base_metadata(config), config.format)
    return [path], traj


def compare_series(median, err_seq):
    """Gap statistics between the empirical median and the prediction.

    rel_gap_t = |median_t - err_seq_t| / max(err_seq_t, floor) with floor the
    minimum predicted error over the horizon; the floor in the denominator
    keeps the metric meaningful once both series sit at the stagnation
    level."""
    median = np.asarray(median, dtype=float)
    err_seq = np.asarray(err_seq, dtype=float)
    abs_gap = np.abs(median - err_seq)
    floor = float(err_seq.min())
    denom = np.maximum(err_seq, floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_gap = np.where(denom > 0.0, abs_gap / np.where(denom > 0, denom, 1.0),
                           np.where(abs_gap == 0.0, 0.0, np.inf))
    return abs_gap, rel_gap, floor


def cmd_compare(config):
    """Run both engines on one config and report per-iteration deviations."""
    emp_paths, trials = cmd_simulate(replace(config, out=config.out + ".emp"))
    det_paths, traj = cmd_predict(replace(config, out=config.out + ".det"))
    abs_gap, rel_gap, floor = compare_series(trials.median, traj.err_seq)
    prefloor = traj.err_seq > config.prefloor_margin * floor
    max_rel_prefloor = float(rel_gap[prefloor].max()) if prefloor.any() else 0.0

    meta = _base_metadata(config)
    meta["predicted_floor"] = _cell(floor)
    meta["max_abs_gap"] = _cell(float(abs_gap.max()))
    meta["max_rel_gap_prefloor"] = _cell(max_rel_prefloor)
    meta["prefloor_margin"] = _cell(config.prefloor_margin)
    rows = [[t, trials.median[t], traj.err_seq[t], abs_gap[t], rel_gap[t]]
            for t in range(config.iters + 1)]
    path = _out_path(config, "compare")
    write_table(path, ["t", "median_emp", "err_seq", "abs_gap", "rel_gap"],
                rows, meta, config.format)
    print(f"max relative gap before the floor (margin {config.prefloor_margin:g}x): "
          f"{max_rel_prefloor:.4g}")
    return [*emp_paths, *det_paths, path], (trials, traj, max_rel_prefloor)


def cmd_tune(config):
    """Sweep the grid with deterministic trajectories and recommend."""
    grid = TuneGrid(
        m_values=config.m_grid if config.m_grid else (config.m,),
        d=config.d,
        sigma=config.sigma,
        s0=config.initial_state(),
        horizon=config.iters,
        lambda_values=config.lambda_grid if config.lambda_grid else None,
    )
    results, failures = sweep(grid, engine=config.engine(),
                              v4_denominator=config.v4_denominator)
    for point, exc in sorted(failures.items()):
        print(f"warning: grid point (m={point[0]}, lambda={point[1]:g}) "
              f"failed: {exc}", file=sys.stderr)
    if not results:
        raise NonConvergenceError("every grid point failed to predict")

    report = build_report(results, config.target_err)
    meta = _base_metadata(config)
    meta["target_err"] = _cell(config.target_err)
    meta["policy"] = config.policy
    if config.budget is not None:
        meta["budget"] = config.budget
    rows = [[row.m, row.lam, row.tau, row.floor, row.samples, row.theory_region]
            for row in report.rows]
    path = _out_path(config, "tune")
    write_table(path, ["m", "lambda", "tau", "floor", "samples", "theory_region"],
                rows, meta, config.format)

    rec = recommend(report, config.policy, budget=config.budget)
    print(f"recommendation: m={rec.m} lambda={rec.lam:g} ({rec.rationale})")
    return [path], rec


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file; flags override it")
    common.add_argument("--d", type=int, dest="d")
    common.add_argument("--m", type=int, dest="m")
    common.add_argument("--sigma", type=float)
    common.add_argument("--lambda", type=float, dest="lambda0",
                        help="inverse step-size lambda0")
    common.add_argument("--schedule", choices=["constant", "delayed-linear"])
    common.add_argument("--t0", type=int)
    common.add_argument("--slope", type=float)
    common.add_argument("--convention", choices=["offset", "absolute"],
                        help="delayed-linear growth convention")
    common.add_argument("--iters", type=int, help="iteration horizon T")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--alpha0", type=float, help="target initial overlap")
    common.add_argument("--init-dist", type=float, dest="init_dist",
                        help="target squared initial distance (distance mode)")
    common.add_argument("--init-norm", type=float, dest="init_norm")
    common.add_argument("--out", help="output base path")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--nodes", type=int, help="quadrature resolution knob")
    common.add_argument("--v4-denominator", choices=["symmetric", "as-printed"],
                        dest="v4_denominator")
    common.add_argument("--policy", choices=["min-samples-to-target",
                                             "min-iterations-to-target",
                                             "min-floor-subject-to-iteration-budget"])
    common.add_argument("--target-err", type=float, dest="target_err")
    common.add_argument("--budget", type=int, help="iteration budget for the floor policy")
    common.add_argument("--m-grid", dest="m_grid",
                        help="comma-separated batch sizes for tune")
    common.add_argument("--lambda-grid", dest="lambda_grid",
                        help="comma-separated lambdas for tune (omit for the coupled rule)")
    common.add_argument("--parallelism", type=int,
                        help="trial worker count (default 0 = all cores)")
    common.add_argument("--prefloor-margin", type=float, dest="prefloor_margin",
                        help="floor multiple bounding the pre-floor phase in compare")

    parser = argparse.ArgumentParser(
        prog="proxtune",
        description="Simulate, predict and tune the mini-batched stochastic "
                    "prox-linear method for rank-one matrix sensing.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    sub.add_parser("simulate", parents=[common],
                   help="run empirical trials and emit trajectories + aggregate")
    sub.add_parser("predict", parents=[common],
                   help="emit the deterministic trajectory prediction")
    sub.add_parser("compare", parents=[common],
                   help="run both engines and emit per-iteration deviations")
    sub.add_parser("tune", parents=[common],
                   help="sweep an (m, lambda) grid offline and recommend")
    return parser


def config_from_args(args):
    if args.config:
        with open(args.config) as fh:
            config = RunConfig.from_text(fh.read())
    else:
        config = RunConfig()
    overrides = {"mode": args.mode}
    for f in fields(RunConfig):
        if f.name == "mode":
            continue
        val = getattr(args, f.name, None)
        if val is None:
            continue
        if f.name in ("m_grid", "lambda_grid") and isinstance(val, str):
            val = _PARSERS[f.name](val)
        overrides[f.name] = val
    return _validate_config(replace(config, **overrides))


_DISPATCH = {
    "simulate": cmd_simulate,
    "predict": cmd_predict,
    "compare": cmd_compare,
    "tune": cmd_tune,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        paths, _ = _DISPATCH[config.mode](config)
        for path in paths:
            print(f"wrote {path}")
        return EXIT_OK
    except NoFeasiblePointError as exc:
        print(f"no feasible point: {exc}", file=sys.stderr)
        return EXIT_NO_FEASIBLE
    except (NonConvergenceError, IllConditionedEtaError, SingularSystemError,
            NumericalInputError, PredictionError, SimulationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
