"""Reproducible experiments: config handling, trial generation and batch runs.

A config JSON fully determines every output. Randomness flows from one
root seed: trial ``i`` gets the i-th child of ``SeedSequence(seed)``, which
in turn is split into streams for initial states, inputs, noise and the
validation trajectory.
"""

from __future__ import annotations

import copy
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .harmonic import check_truncation, sliding_phasors
from .identify import NotInformativeError, assemble, error_bound_constant, solve, sweep_p
from .periodic import PeriodicMatrix, example_b_specs, random_spec
from .simulate import (SamplingGrid, SimulationError, add_state_noise, piecewise_periodic_input, simulate_many,
                       zero_input)
from .validation import phasor_error, stack_phasors, validate_on_fresh_trajectory


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "system":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


EXAMPLE_A = {
    "system": {"random": {"n": 3, "m": 2, "degree": 10, "scale": 30.0, "seed": 1}},
    "p": 10,
    # recorded at T/320, regression frames every 8th sample (T/40)
    "grid": {"N": 320, "horizon_periods": 2, "substeps": 2, "quadrature": "boole", "stride": 8},
    "trajectories": {"count": 105, "length": None, "x0": {"low": -1.0, "high": 1.0},
                     "input": {"degree": 10, "segments": 1, "scale": 30.0}, "selection": "pivoted"},
    "columns": 105,
    "noise": {"ratio": 0.0, "seed": 0},
    "trials": 20,
    "seed": 2024,
    "thresholds": {"noiseless": 1e-3, "noisy": 15.0},
    "validation": {"horizon_periods": 2},
    "err_order": None,
    "out": "runs/example_a",
}

# Literal reading: the record itself is sampled at T/40 and integrated with
# the trapezoid rule. Quadrature error caps the accuracy near 10 %.
EXAMPLE_A_COARSE = _merge(EXAMPLE_A, {"grid": {"N": 40, "substeps": 16, "quadrature": "trapezoid", "stride": 1},
                                      "out": "runs/example_a_coarse"})

EXAMPLE_B = {
    "system": {"example_b": {"K_sim": 200}},
    "p": 25,
    "grid": {"N": 256, "horizon_periods": 2, "substeps": 4},
    # quarter-period input pieces so 16 trajectories excite all 2p+1 input harmonics
    "trajectories": {"count": 16, "length": 512, "x0": {"low": -1.0, "high": 1.0},
                     "input": {"degree": 25, "segments": 8, "segment_periods": 0.25, "scale": 1.0}},
    "columns": None,
    "noise": {"ratio": 0.0, "seed": 0},
    "trials": 1,
    "seed": 2024,
    "thresholds": {"noiseless": 5.0, "noisy": 15.0},
    "validation": {"horizon_periods": 2},
    "err_order": 10,
    "out": "runs/example_b",
}

PRESETS = {"example_a": EXAMPLE_A, "example_a_coarse": EXAMPLE_A_COARSE, "example_b": EXAMPLE_B}


@dataclass
class ExperimentConfig:
    system: dict
    p: int
    grid: dict
    trajectories: dict
    columns: int | None = None
    noise: dict = field(default_factory=lambda: {"ratio": 0.0, "seed": 0})
    trials: int = 1
    seed: int = 0
    thresholds: dict = field(default_factory=lambda: {"noiseless": 1e-3, "noisy": 15.0})
    validation: dict = field(default_factory=lambda: {"horizon_periods": 2})
    err_order: int | None = None
    out: str = "runs/out"
    base_dir: str = field(default=".", repr=False)

    def __post_init__(self):
        self.validate()

    @property
    def N(self):
        return int(self.grid["N"])

    @property
    def samples(self):
        length = self.trajectories.get("length")
        if length is not None:
            return int(length)
        return int(round(self.grid.get("horizon_periods", 2) * self.N)) + 1

    @property
    def noise_ratio(self):
        return float(self.noise.get("ratio", 0.0))

    @property
    def threshold(self):
        key = "noisy" if self.noise_ratio > 0 else "noiseless"
        return float(self.thresholds[key])

    def validate(self):
        if len(self.system) != 1 or next(iter(self.system)) not in ("random", "example_b", "file"):
            raise ValueError("system must have exactly one of 'random', 'example_b', 'file'")
        check_truncation(self.N, int(self.p))
        if self.samples < 2 * self.N:
            raise ValueError(f"trajectories of {self.samples} samples span less than two periods "
                             f"(need >= {2 * self.N})")
        if self.validation.get("horizon_periods", 2) < 2:
            raise ValueError("validation horizon must span at least two periods")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if int(self.trajectories.get("count", 1)) < 1:
            raise ValueError("trajectories.count must be >= 1")
        if self.noise_ratio < 0:
            raise ValueError("noise ratio must be non-negative")

    def to_dict(self):
        return {"system": self.system, "p": self.p, "grid": self.grid, "trajectories": self.trajectories,
                "columns": self.columns, "noise": self.noise, "trials": self.trials, "seed": self.seed,
                "thresholds": self.thresholds, "validation": self.validation, "err_order": self.err_order,
                "out": self.out}

    @classmethod
    def from_dict(cls, d, base_dir="."):
        d = dict(d)
        preset = d.pop("preset", None)
        if preset is not None:
            if preset not in PRESETS:
                raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            d = _merge(PRESETS[preset], d)
        return cls(base_dir=base_dir, **d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh), os.path.dirname(os.path.abspath(path)))

    @classmethod
    def preset(cls, name, **overrides):
        return cls.from_dict({"preset": name, **overrides})

    def replace(self, **changes):
        d = _merge(self.to_dict(), changes)
        return ExperimentConfig.from_dict(d, self.base_dir)


def build_system(config):
    """True ``(A, B)`` of the configured system (``B`` may be ``None``)."""
    kind, params = next(iter(config.system.items()))
    period = float(config.grid.get("period", 1.0))
    if kind == "random":
        ss = np.random.SeedSequence(params["seed"]).generate_state(2)
        A = random_spec(params["n"], params["n"], params["degree"], int(ss[0]), params.get("scale", 3.0), period)
        m = params.get("m", 0)
        B = random_spec(params["n"], m, params["degree"], int(ss[1]), params.get("scale", 3.0), period) if m else None
        return A, B
    if kind == "example_b":
        if period != 1.0:
            raise ValueError("the infinite-order example is defined for T = 1")
        return example_b_specs(params.get("K_sim", 200))
    path = params if isinstance(params, str) else params["path"]
    if not os.path.isabs(path):
        path = os.path.join(config.base_dir, path)
    with open(path) as fh:
        d = json.load(fh)
    return PeriodicMatrix.from_dict(d["A"]), (PeriodicMatrix.from_dict(d["B"]) if d.get("B") else None)


def trial_seeds(config, index):
    """Independent seed sequences (x0, input, noise, validation) for trial ``index``."""
    entropy = [int(config.seed), int(config.noise.get("seed", 0))]
    child = np.random.SeedSequence(entropy).spawn(index + 1)[index]
    return child.spawn(4)


def _grid(config, count):
    return SamplingGrid(float(config.grid.get("period", 1.0)), config.N, count,
                        substeps=int(config.grid.get("substeps", 8)))


def _random_input(config, B, horizon, seed):
    spec = config.trajectories.get("input")
    if B is None or not spec:
        return zero_input(B.cols if B is not None else 0)
    return piecewise_periodic_input(B.cols, spec.get("degree", 5), float(config.grid.get("period", 1.0)),
                                    spec.get("segments", 1), horizon, seed, spec.get("scale", 1.0),
                                    segment_periods=spec.get("segment_periods"))


def _x0(config, n, rng):
    dist = config.trajectories.get("x0", {})
    return rng.uniform(dist.get("low", -1.0), dist.get("high", 1.0), n)


def generate_trajectories(config, A, B, index=0):
    """Noisy identification trajectories of trial ``index`` plus their clean versions."""
    s_x0, s_u, s_noise, _ = trial_seeds(config, index)
    rng = np.random.default_rng(s_x0)
    grid = _grid(config, config.samples)
    horizon = (grid.count - 1) * grid.dt
    count = int(config.trajectories.get("count", 1))
    useeds = s_u.generate_state(count)
    nseeds = s_noise.generate_state(count)
    inputs = [_random_input(config, B, horizon, int(useeds[j])) for j in range(count)]
    x0s = [_x0(config, A.rows, rng) for _ in range(count)]
    clean = simulate_many(A, B, inputs, x0s, grid)
    noisy = [add_state_noise(tr, config.noise_ratio, int(nseeds[j])) for j, tr in enumerate(clean)]
    return noisy, clean


def identify(config, trajectories, columns=None):
    """Phasor frames, regression and solve; ``columns`` overrides the config."""
    quad, stride = config.grid.get("quadrature", "trapezoid"), int(config.grid.get("stride", 1))
    frames = [sliding_phasors(tr, config.p, quad, stride) for tr in trajectories]
    cols = config.columns if columns is None else columns
    data = assemble(frames, 1, cols, config.trajectories.get("selection", "even"))
    return solve(data), data


def run_trial(config, index, columns=None, validate=False, out_dir=None):
    """One seeded identification; returns a JSON-ready dict (failures recorded, not raised)."""
    A, B = build_system(config)
    rec = {"trial": index, "columns": columns if columns is not None else config.columns}
    try:
        trajs, _ = generate_trajectories(config, A, B, index)
        model, data = identify(config, trajs, columns)
    except (NotInformativeError, SimulationError, ValueError) as exc:
        rec.update(error=None, failure=f"{type(exc).__name__}: {exc}")
        return rec
    err = phasor_error(model, A, B, config.err_order)
    rec.update(error=err, failure=None, n_columns=data.n_columns, rank=model.numerical_rank,
               residual=model.residual, accepted=bool(err <= config.threshold))
    if validate:
        report, _, _ = validate_trial(config, model, A, B, index)
        rec["validation"] = report.to_dict()
    if out_dir is not None:
        d = os.path.join(out_dir, f"trial_{index:03d}")
        os.makedirs(d, exist_ok=True)
        model.to_json(os.path.join(d, "model.json"))
        with open(os.path.join(d, "trial.json"), "w") as fh:
            json.dump(rec, fh, indent=2)
    return rec


def validation_setup(config, A, B, index=0):
    """Fresh ``(x0, input, grid)`` for the validation run of trial ``index``."""
    s_val = trial_seeds(config, index)[3]
    s_x0, s_u = s_val.spawn(2)
    periods = config.validation.get("horizon_periods", 2)
    grid = _grid(config, int(round(periods * config.N)) + 1)
    u = _random_input(config, B, (grid.count - 1) * grid.dt, int(s_u.generate_state(1)[0]))
    return _x0(config, A.rows, np.random.default_rng(s_x0)), u, grid


def validate_trial(config, model, A, B, index=0, criterion="trajectory", threshold=None):
    x0, u, grid = validation_setup(config, A, B, index)
    return validate_on_fresh_trajectory(model, (A, B), x0, grid, u,
                                        config.threshold if threshold is None else threshold,
                                        {"trial": index, "seed": config.seed}, criterion)


def summarize(values):
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return {"count": 0, "min": None, "median": None, "max": None}
    return {"count": int(v.size), "min": float(v.min()), "median": float(np.median(v)), "max": float(v.max())}


def _trial_job(args):
    cfg, index, columns, validate, out_dir = args
    return run_trial(ExperimentConfig.from_dict(cfg), index, columns, validate, out_dir)


def _map(jobs, workers):
    if workers is None or workers <= 1:
        return [_trial_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_trial_job, jobs))


def run_batch(config, workers=1, validate=False, out_dir=None):
    """All trials; the aggregate holds per-trial records and min/median/max error."""
    cfg = config.to_dict()
    jobs = [(cfg, i, None, validate, out_dir) for i in range(int(config.trials))]
    records = _map(jobs, workers)
    agg = {"config": cfg, "threshold": config.threshold, "trials": records,
           "error": summarize(r["error"] for r in records),
           "failures": sum(r["failure"] is not None for r in records),
           "accepted": sum(bool(r.get("accepted")) for r in records)}
    if validate:
        agg["validation_nrmse"] = summarize(r["validation"]["trajectory_nrmse_total_pct"] for r in records
                                            if "validation" in r)
    return agg


def error_vs_L(config, multipliers=(1, 2, 3, 4), trials=None, workers=1):
    """Median error for ``L = mult * (n+m)(2p+1)`` columns over the config's trials."""
    A, B = build_system(config)
    base = (A.rows + (B.cols if B is not None else 0)) * (2 * config.p + 1)
    trials = int(config.trials if trials is None else trials)
    cfg = config.to_dict()
    rows = []
    for mult in multipliers:
        L = int(round(mult * base))
        recs = _map([(cfg, i, L, False, None) for i in range(trials)], workers)
        rows.append({"multiplier": mult, "L": L, **summarize(r["error"] for r in recs),
                     "failures": sum(r["failure"] is not None for r in recs)})
    return rows


def count_inversions(values):
    """Number of adjacent increases in a sequence that should be non-increasing."""
    return int(sum(b > a for a, b in zip(values, values[1:])))


def run_sweep(config, p_values, threshold=1e-3, index=0):
    A, B = build_system(config)
    trajs, _ = generate_trajectories(config, A, B, index)
    steps = sweep_p(trajs, p_values, threshold, config.grid.get("quadrature", "trapezoid"),
                    columns=None, stop_at_first=False)
    return [{"p": s.p, "top_ratio": s.top_ratio, "decayed": s.decayed, "failure": s.error,
             "error": None if s.model is None else phasor_error(s.model, A, B, config.err_order)}
            for s in steps]


def bound_audit(config, index=0, columns=None):
    """Error-bound audit on one run.

    ``eps`` is the largest normalized column residual of the fitted model.
    Returns it with the per-column deviation ``||(Theta_est - Theta) z_j||``,
    the global ``||Theta_est - Theta||_2`` and the constant ``M``.
    """
    A, B = build_system(config)
    trajs, _ = generate_trajectories(config, A, B, index)
    model, data = identify(config, trajs, columns)
    theta_true = stack_phasors(A.truncate(config.p), B.truncate(config.p) if B is not None else None, config.p)
    Z = data.regressor
    diff = model.theta - theta_true
    return {"eps": model.max_column_residual,
            "eps_true": float(np.linalg.norm(data.X1 - theta_true @ Z, axis=0).max()),
            "M": error_bound_constant(data),
            "column_errors": np.linalg.norm(diff @ Z, axis=0),
            "global_error": float(np.linalg.norm(diff, 2))}
