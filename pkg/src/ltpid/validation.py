"""Model validation: phasor-space error and fresh-trajectory comparison."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .simulate import SampledTrajectory, SimulationError, simulate


def stack_phasors(A, B=None, p=None):
    """Block row ``[A_p, ..., A_-p, B_p, ..., B_-p]``, zero-padded up to order ``p``."""
    if p is None:
        p = max(A.degree, B.degree if B is not None else 0)
    ks = range(p, -p - 1, -1)
    blocks = [A[k] for k in ks]
    if B is not None:
        blocks += [B[k] for k in ks]
    return np.hstack(blocks)


def relative_phasor_error(P_th, P_est):
    """``100 * ||P_th - P_est||_2 / ||P_th||_2`` with spectral norms.

    Both arguments may also be ``(A, B)`` pairs of periodic matrices; they
    are stacked at the larger of the two degrees.
    """
    if isinstance(P_th, tuple):
        A_th, B_th = P_th
        A_est, B_est = P_est
        p = max(f.degree for f in (A_th, B_th, A_est, B_est) if f is not None)
        P_th, P_est = stack_phasors(A_th, B_th, p), stack_phasors(A_est, B_est, p)
    P_th = np.asarray(P_th)
    P_est = np.asarray(P_est)
    if P_th.shape != P_est.shape:
        raise ValueError(f"shape mismatch {P_th.shape} vs {P_est.shape}; pass (A, B) pairs to zero-pad")
    denom = np.linalg.norm(P_th, 2)
    if denom == 0:
        raise ValueError("reference phasors are all zero")
    return float(100 * np.linalg.norm(P_th - P_est, 2) / denom)


def phasor_error(model, A_true, B_true=None, p=None):
    """Relative phasor error of ``model`` against the true families, both cut at order ``p``."""
    if p is None:
        p = max(model.A.degree, A_true.degree, B_true.degree if B_true is not None else 0)
    P_th = stack_phasors(A_true.truncate(p), None if B_true is None else B_true.truncate(p), p)
    P_est = stack_phasors(model.A.truncate(p), None if model.B is None else model.B.truncate(p), p)
    return relative_phasor_error(P_th, P_est)


def nrmse(x_true, x_est):
    """Percent ``100 ||x_true - x_est|| / ||x_true||`` per state row and overall."""
    x_true = np.asarray(x_true)
    x_est = np.asarray(x_est)
    num = np.linalg.norm(x_true - x_est, axis=1)
    den = np.linalg.norm(x_true, axis=1)
    # a component that stays at zero scores 0 if matched, inf otherwise
    per = 100 * np.divide(num, den, out=np.where(num > 0, np.inf, 0.0), where=den > 0)
    agg = 100 * np.linalg.norm(x_true - x_est) / np.linalg.norm(x_true)
    return per, float(agg)


@dataclass
class ValidationReport:
    threshold: float
    accepted: bool
    criterion: str
    phasor_error_pct: float | None = None
    trajectory_nrmse_pct: list | None = None
    trajectory_nrmse_total_pct: float | None = None
    failure: str | None = None
    scenario: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def accept(value, threshold):
    return value is not None and np.isfinite(value) and value <= threshold


def validate_on_fresh_trajectory(model, truth, x0, grid, u=None, threshold=15.0, scenario=None,
                                 criterion="trajectory"):
    """Compare ``model`` with the truth on a trajectory not used for identification.

    ``truth`` is either an ``(A, B)`` pair, which is simulated from ``x0``
    with input ``u``, or a recorded :class:`SampledTrajectory`. With
    ``criterion="phasor"`` (pair truth only) acceptance uses the phasor
    error instead of the trajectory NRMSE. Returns the report and the two
    state arrays (true, estimated) for plotting; the estimate is ``None``
    when its simulation failed.
    """
    scenario = dict(scenario or {})
    scenario.setdefault("x0", [float(v) for v in np.ravel(x0)])
    if isinstance(truth, SampledTrajectory):
        x_true = truth.states
        if criterion == "phasor":
            criterion = "trajectory"
            scenario["notice"] = "no true phasors available; fell back to trajectory comparison"
    else:
        A, B = truth
        try:
            x_true = simulate(A, B, u, x0, grid).states
        except SimulationError as exc:
            return ValidationReport(threshold, False, criterion, failure=f"true model: {exc}",
                                    scenario=scenario), None, None
    phasor_pct = None
    if not isinstance(truth, SampledTrajectory):
        phasor_pct = phasor_error(model, truth[0], truth[1])
    try:
        x_est = simulate(model.A, model.B, u, x0, grid).states
    except SimulationError as exc:
        return ValidationReport(threshold, False, criterion, phasor_pct, failure=f"identified model: {exc}",
                                scenario=scenario), x_true, None
    per, agg = nrmse(x_true, x_est)
    value = phasor_pct if criterion == "phasor" else agg
    report = ValidationReport(threshold, accept(value, threshold), criterion, phasor_pct,
                              [float(v) for v in per], agg, None, scenario)
    return report, x_true, x_est


def write_overlay_csv(path, times, x_true, x_est):
    n = x_true.shape[0]
    cols = [times] + list(x_true) + (list(x_est) if x_est is not None else [])
    header = ["t"] + [f"x{i + 1}_true" for i in range(n)]
    if x_est is not None:
        header += [f"x{i + 1}_est" for i in range(n)]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(header), comments="", fmt="%.17g")
