"""Least-squares identification of the phasors of A(t) and B(t) from phasor frames.

Each normalized frame gives one column of the regression

    X1 = [A_p, ..., A_-p, B_p, ..., B_-p] @ [X0; U0]

where a column of ``X0`` stacks ``X_-p, ..., X_p`` (one n-block per
harmonic), so ``A_k`` multiplies ``X_-k`` and likewise for the input.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._checks import check_frames, check_trajectories
from .harmonic import sliding_phasors
from .periodic import PeriodicMatrix, from_raw_phasors
from .simulate import simulate

ILL_CONDITIONED = 1e12


class NotInformativeError(ValueError):
    def __init__(self, rank, required, n_columns):
        self.rank, self.required, self.n_columns = rank, required, n_columns
        super().__init__(
            f"data are not informative: rank {rank} < {required} (deficit {required - rank}); "
            f"at least L = {required} well-excited columns are needed, got {n_columns}")


@dataclass(frozen=True, eq=False)
class RegressionData:
    X1: np.ndarray
    X0: np.ndarray
    U0: np.ndarray
    p: int
    period: float
    source: list = field(default_factory=list)

    @property
    def n(self):
        return self.X1.shape[0]

    @property
    def m(self):
        return self.U0.shape[0] // (2 * self.p + 1)

    @property
    def n_columns(self):
        return self.X1.shape[1]

    @property
    def required_rank(self):
        return (self.n + self.m) * (2 * self.p + 1)

    @property
    def regressor(self):
        """Stacked ``[X0; U0]``."""
        return np.vstack([self.X0, self.U0])

    def subset(self, columns):
        columns = np.asarray(columns)
        return RegressionData(self.X1[:, columns], self.X0[:, columns], self.U0[:, columns], self.p,
                              self.period, [self.source[c] for c in columns])


def select_columns(total, count):
    """``count`` indices spread evenly over ``range(total)``."""
    if count > total:
        raise ValueError(f"requested {count} columns but only {total} frames are available")
    return np.unique(np.round(np.linspace(0, total - 1, count)).astype(int))


def pivoted_order(Z, count):
    """``count`` columns chosen by column-pivoted QR, in original order.

    Beyond ``Z.shape[0]`` columns the QR is repeated on the columns not yet
    taken, so each round adds another well-spread set.
    """
    if count > Z.shape[1]:
        raise ValueError(f"requested {count} columns but only {Z.shape[1]} frames are available")
    remaining = np.arange(Z.shape[1])
    chosen = []
    while len(chosen) < count:
        _, piv = scipy.linalg.qr(Z[:, remaining], mode="r", pivoting=True)
        take = piv[:min(count - len(chosen), Z.shape[0])]
        chosen.extend(remaining[take])
        remaining = np.delete(remaining, take)
    return np.sort(np.asarray(chosen))


def assemble(frames, stride=1, columns=None, selection="even"):
    """Stack normalized frames into the regression matrices.

    ``frames`` is one :class:`PhasorFrames` or a list of them (one per
    trajectory). ``stride`` keeps every stride-th frame of each trajectory;
    ``columns`` then keeps that many columns, either spread evenly over the
    lot (``selection="even"``) or picked by repeated pivoted-QR rounds on
    the regressor (``"pivoted"``).
    """
    frames = check_frames(frames)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    p = frames[0].p
    X1, X0, U0, source = [], [], [], []
    for tid, fr in enumerate(frames):
        sel = slice(None, None, stride)
        M = fr.window_norm[sel]
        F = len(M)
        X1.append(fr.xdot0[sel].T / M)
        X0.append(fr.x_phasors[sel].reshape(F, -1).T / M)
        U0.append(fr.u_phasors[sel].reshape(F, -1).T / M)
        source += [(tid, int(i)) for i in fr.index[sel]]
    data = RegressionData(np.hstack(X1), np.hstack(X0), np.hstack(U0), p, frames[0].period, source)
    if columns is not None:
        if selection == "even":
            data = data.subset(select_columns(data.n_columns, columns))
        elif selection == "pivoted":
            data = data.subset(pivoted_order(data.regressor, columns))
        else:
            raise ValueError(f"unknown selection {selection!r}; expected 'even' or 'pivoted'")
    return data


@dataclass(frozen=True)
class Informativity:
    rank: int
    required: int
    informative: bool
    condition_number: float
    singular_values: np.ndarray


def _rank(s, shape):
    if s.size == 0 or s[0] == 0:
        return 0
    tol = max(shape) * np.finfo(float).eps * s[0]
    return int(np.sum(s > tol))


def informativity(data):
    """Numerical rank test ``rank [X0; U0] == (n+m)(2p+1)``."""
    Z = data.regressor
    s = scipy.linalg.svdvals(Z) if Z.size else np.zeros(0)
    r = _rank(s, Z.shape)
    required = data.required_rank
    cond = s[0] / s[required - 1] if r >= required and required > 0 else np.inf
    return Informativity(r, required, r == required, float(cond), s)


@dataclass(frozen=True, eq=False)
class IdentifiedModel:
    A: PeriodicMatrix
    B: PeriodicMatrix | None
    residual: float
    numerical_rank: int
    singular_values: np.ndarray
    hermitian_defect: float
    max_column_residual: float = float("nan")
    ill_conditioned: bool = False
    error_bound_M: float | None = None
    theta: np.ndarray | None = field(default=None, repr=False)
    p: int | None = None

    def diagnostics(self):
        return {
            "residual": self.residual,
            "rank": self.numerical_rank,
            "singular_values": [float(v) for v in self.singular_values],
            "hermitian_defect": self.hermitian_defect,
            "max_column_residual": self.max_column_residual,
            "ill_conditioned": self.ill_conditioned,
            "error_bound_M": self.error_bound_M,
            "p": self.p,
        }

    def to_dict(self):
        return {"A": self.A.to_dict(), "B": None if self.B is None else self.B.to_dict(),
                "diagnostics": self.diagnostics()}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_dict(cls, d):
        diag = d.get("diagnostics", {})
        return cls(PeriodicMatrix.from_dict(d["A"]),
                   None if d.get("B") is None else PeriodicMatrix.from_dict(d["B"]),
                   diag.get("residual", float("nan")), diag.get("rank", -1),
                   np.asarray(diag.get("singular_values", [])), diag.get("hermitian_defect", 0.0),
                   diag.get("max_column_residual", float("nan")), diag.get("ill_conditioned", False),
                   diag.get("error_bound_M"), None, diag.get("p"))

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def with_error_bound(self, M):
        return IdentifiedModel(self.A, self.B, self.residual, self.numerical_rank, self.singular_values,
                               self.hermitian_defect, self.max_column_residual, self.ill_conditioned,
                               float(M), self.theta, self.p)


def theta_blocks(theta, n, m, p):
    """Split ``[A_p..A_-p, B_p..B_-p]`` into two ``{k: block}`` dicts."""
    K = 2 * p + 1
    ks = range(p, -p - 1, -1)
    A = {k: theta[:, i * n:(i + 1) * n] for i, k in enumerate(ks)}
    off = K * n
    B = {k: theta[:, off + i * m:off + (i + 1) * m] for i, k in enumerate(ks)}
    return A, B


def pinv_solve(X1, Z):
    """``X1 @ pinv(Z)`` through a thin SVD with the default rank cut."""
    U, s, Vh = scipy.linalg.svd(Z, full_matrices=False)
    r = _rank(s, Z.shape)
    inv = (Vh[:r].conj().T / s[:r]) @ U[:, :r].conj().T
    return X1 @ inv, s, r


def solve(data):
    """Pseudo-inverse solution of the central-strip least-squares problem."""
    Z = data.regressor
    required = data.required_rank
    theta, s, r = pinv_solve(data.X1, Z)
    if r < required:
        raise NotInformativeError(r, required, data.n_columns)
    R = data.X1 - theta @ Z
    ill = bool(s[0] / s[required - 1] > ILL_CONDITIONED)
    if ill:
        warnings.warn(f"regressor condition number {s[0] / s[required - 1]:.3g} exceeds {ILL_CONDITIONED:g}",
                      RuntimeWarning, stacklevel=2)
    rawA, rawB = theta_blocks(theta, data.n, data.m, data.p)
    A = from_raw_phasors(rawA, data.period)
    B = from_raw_phasors(rawB, data.period) if data.m else None
    defect = max(A.hermitian_defect, B.hermitian_defect if B is not None else 0.0)
    return IdentifiedModel(A, B, float(np.sum(np.abs(R) ** 2)), r, s, defect,
                           float(np.linalg.norm(R, axis=0).max()), ill, None, theta, data.p)


def pivoted_columns(data):
    """Greedy choice of ``(n+m)(2p+1)`` columns by column-pivoted QR."""
    r = data.required_rank
    _, piv = scipy.linalg.qr(data.regressor, mode="r", pivoting=True)
    return np.sort(piv[:r])


def error_bound_constant(data, columns=None):
    """``M = (n+m)(2p+1) * ||V^-1||_2`` for a square invertible column subset ``V``."""
    r = data.required_rank
    if columns is None:
        columns = pivoted_columns(data)
    columns = np.asarray(columns)
    if columns.size != r:
        raise ValueError(f"need exactly {r} columns, got {columns.size}")
    V = data.regressor[:, columns]
    s = scipy.linalg.svdvals(V)
    if s[-1] <= r * np.finfo(float).eps * s[0]:
        raise ValueError("selected columns form a singular matrix; choose another subset "
                         "(e.g. columns=None for pivoted selection)")
    return float(r / s[-1])


@dataclass(frozen=True)
class SweepStep:
    p: int
    model: IdentifiedModel | None
    top_ratio: float
    decayed: bool
    error: str | None = None


def top_order_ratio(model, p):
    """Largest norm among order-``p`` phasors relative to the largest phasor norm."""
    fams = [model.A] + ([model.B] if model.B is not None else [])
    allnorm = max(np.linalg.norm(v, 2) for f in fams for v in f.phasors.values())
    top = max(np.linalg.norm(f[p], 2) for f in fams)
    return float(top / allnorm) if allnorm > 0 else 0.0


def sweep_p(trajectories, p_values, threshold=1e-3, quadrature="trapezoid", stride=1, columns=None,
            stop_at_first=True):
    """Identify at increasing ``p`` until the top-order phasors have decayed.

    A step is ``decayed`` when the order-p phasor norms fall below
    ``threshold`` times the largest identified phasor norm.
    """
    trajs = check_trajectories(trajectories)
    steps = []
    for p in sorted(p_values):
        frames = [sliding_phasors(tr, p, quadrature) for tr in trajs]
        try:
            model = solve(assemble(frames, stride, columns))
        except NotInformativeError as exc:
            steps.append(SweepStep(p, None, float("nan"), False, str(exc)))
            continue
        ratio = top_order_ratio(model, p)
        steps.append(SweepStep(p, model, ratio, ratio <= threshold))
        if stop_at_first and ratio <= threshold:
            break
    return steps


class HarmonicLTPIdentifier(BaseEstimator):
    """Estimate the phasors of ``A(t)`` and ``B(t)`` from sampled trajectories.

    Parameters
    ----------
    p : int
        Truncation order; phasors ``|k| <= p`` are identified.
    quadrature : {"trapezoid", "right", "simpson", "boole"}
        Window rule for the sliding phasors.
    stride : int
        Keep every stride-th frame of each trajectory.
    columns : int or None
        Number of regression columns; all frames when None.
    selection : {"even", "pivoted"}
        How ``columns`` are picked: evenly spaced, or by pivoted QR.
    """

    def __init__(self, p=10, quadrature="trapezoid", stride=1, columns=None, selection="even"):
        self.p = p
        self.quadrature = quadrature
        self.stride = stride
        self.columns = columns
        self.selection = selection

    def _data(self, X):
        trajs = check_trajectories(X)
        frames = [sliding_phasors(tr, self.p, self.quadrature, self.stride) for tr in trajs]
        return assemble(frames, 1, self.columns, self.selection)

    def fit(self, X, y=None):
        data = self._data(X)
        self.informativity_ = informativity(data)
        self.model_ = solve(data)
        self.A_ = self.model_.A
        self.B_ = self.model_.B
        self.n_columns_ = data.n_columns
        return self

    def predict(self, x0, grid, u=None):
        """Simulate the identified model from ``x0`` on ``grid``."""
        check_is_fitted(self, "model_")
        return simulate(self.A_, self.B_, u, x0, grid)

    def score(self, X, y=None):
        """Coefficient of determination of the normalized X0' regression on ``X``."""
        check_is_fitted(self, "model_")
        data = self._data(X)
        R = data.X1 - self.model_.theta @ data.regressor
        return 1.0 - float(np.sum(np.abs(R) ** 2) / np.sum(data.X1 ** 2))
