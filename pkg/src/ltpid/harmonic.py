"""Sliding Fourier phasors of sampled trajectories.

For a window of one period ending at ``t`` the k-th phasor is

    X_k(t) = (1/T) * integral_{t-T}^{t} x(tau) exp(-j w k tau) dtau,

approximated by an (N+1)-point rule on the grid samples. The derivative of
the zeroth phasor needs no differentiation: ``X0'(t) = (x(t) - x(t-T)) / T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin

from ._checks import check_trajectories

DEGENERATE_NORM = 1e-300
QUADRATURES = ("trapezoid", "right", "simpson", "boole")
_PANELS = {"simpson": (2, [1, 4, 1], 6), "boole": (4, [7, 32, 12, 32, 7], 90)}


def quadrature_weights(N, rule="trapezoid"):
    """Weights over the N+1 samples ``t-T, ..., t`` of one window (they sum to 1).

    ``simpson`` and ``boole`` are composite Newton-Cotes rules and need N
    divisible by 2 and 4. They only pay off when the record resolves the
    integrand well (several samples per cycle of the highest harmonic);
    on a coarse grid the plain trapezoid aliases less.
    """
    if rule == "trapezoid":
        w = np.full(N + 1, 1.0 / N)
        w[0] = w[-1] = 0.5 / N
    elif rule == "right":
        w = np.full(N + 1, 1.0 / N)
        w[0] = 0.0
    elif rule in _PANELS:
        size, coef, denom = _PANELS[rule]
        if N % size:
            raise ValueError(f"{rule} rule needs N divisible by {size}, got {N}")
        w = np.zeros(N + 1)
        for s in range(0, N, size):
            w[s:s + size + 1] += coef
        w *= size / (denom * N)
    else:
        raise ValueError(f"unknown quadrature {rule!r}; expected one of {QUADRATURES}")
    return w


def _phase_table(N, t0, period, count, kmax):
    # exp(-j w k t_i) with k*i reduced mod N so that shifting by N samples is exact
    i = np.arange(count)[:, None]
    k = np.arange(kmax + 1)[None, :]
    base = np.exp(-2j * np.pi * np.mod(i * k, N) / N)
    return base * np.exp(-2j * np.pi * k * t0 / period)


def check_truncation(N, p):
    if p < 0:
        raise ValueError("p must be non-negative")
    need = max(4 * p, 2)
    if N < need:
        raise ValueError(f"{N} samples per period cannot resolve phasors of order {p}; "
                         f"need N >= {need} (dt <= T/{need})")


@dataclass(frozen=True)
class PhasorFrame:
    """Harmonic data at one sample time.

    ``x_phasors`` and ``u_phasors`` have shape ``(2p+1, n)`` / ``(2p+1, m)``
    with rows ordered ``k = -p..p``; all values are unnormalized.
    """

    t: float
    index: int
    x_phasors: np.ndarray
    u_phasors: np.ndarray
    xdot0: np.ndarray
    window_norm: float
    p: int

    def stack(self, normalized=True):
        """Column ``[X_-p; ...; X_p; U_-p; ...; U_p]`` (each block one harmonic)."""
        col = np.concatenate([self.x_phasors.ravel(), self.u_phasors.ravel()])
        return col / self.window_norm if normalized else col


@dataclass(frozen=True, eq=False)
class PhasorFrames:
    """All frames of one trajectory, stored as arrays indexed by frame."""

    period: float
    p: int
    t: np.ndarray
    index: np.ndarray
    x_phasors: np.ndarray  # (F, 2p+1, n)
    u_phasors: np.ndarray  # (F, 2p+1, m)
    xdot0: np.ndarray  # (F, n)
    window_norm: np.ndarray  # (F,)
    dropped: int = 0

    @property
    def n(self):
        return self.x_phasors.shape[2]

    @property
    def m(self):
        return self.u_phasors.shape[2]

    @property
    def omega(self):
        return 2 * np.pi / self.period

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i):
        return PhasorFrame(float(self.t[i]), int(self.index[i]), self.x_phasors[i], self.u_phasors[i],
                           self.xdot0[i], float(self.window_norm[i]), self.p)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def harmonic(self, k, which="x"):
        """Phasor ``k`` of every frame, shape ``(F, n)`` (or ``(F, m)``)."""
        if abs(k) > self.p:
            raise IndexError(f"harmonic {k} beyond truncation order {self.p}")
        arr = self.x_phasors if which == "x" else self.u_phasors
        return arr[:, k + self.p]

    def to_csv(self, path):
        """Debug dump: t, M, then Re/Im of every state and input phasor."""
        ks = range(-self.p, self.p + 1)
        cols = ["t", "M"]
        data = [self.t, self.window_norm]
        for name, arr in (("X", self.x_phasors), ("U", self.u_phasors)):
            for ki, k in enumerate(ks):
                for c in range(arr.shape[2]):
                    cols += [f"Re_{name}{c + 1}_{k}", f"Im_{name}{c + 1}_{k}"]
                    data += [arr[:, ki, c].real, arr[:, ki, c].imag]
        np.savetxt(path, np.column_stack(data), delimiter=",", header=",".join(cols), comments="",
                   fmt="%.17g")


def _window_phasors(signal, phases, weights, N, stride=1):
    # signal (count, c), phases (count, p+1) -> (F, p+1, c) for windows ending at N, N+stride, ...
    prod = signal[:, None, :] * phases[:, :, None]
    win = sliding_window_view(prod, N + 1, axis=0)[::stride]
    return win @ weights


def _mirror(pos):
    # k = 0..p  ->  k = -p..p using X_-k = conj(X_k)
    return np.concatenate([pos[:, :0:-1].conj(), pos], axis=1)


def sliding_phasors(traj, p, quadrature="trapezoid", stride=1):
    """Phasor frames at every ``stride``-th grid time from ``t0 + T`` on.

    Frames whose window has zero energy are dropped (counted in ``dropped``).
    """
    grid = traj.grid
    N = grid.samples_per_period
    check_truncation(N, p)
    if grid.count < N + 1:
        raise ValueError("trajectory must span at least one full period plus one sample")
    w = quadrature_weights(N, quadrature)
    phases = _phase_table(N, grid.t0, grid.period, grid.count, p)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    X = _mirror(_window_phasors(traj.states.T, phases, w, N, stride))
    U = _mirror(_window_phasors(traj.inputs.T, phases, w, N, stride))
    energy = np.sum(traj.states ** 2, axis=0) + np.sum(traj.inputs ** 2, axis=0)
    M = np.sqrt(sliding_window_view(energy, N + 1)[::stride] @ w)
    idx = np.arange(N, grid.count, stride)
    xdot0 = (traj.states[:, idx] - traj.states[:, idx - N]).T / grid.period
    keep = M > DEGENERATE_NORM
    return PhasorFrames(grid.period, p, grid.times[idx][keep], idx[keep], X[keep], U[keep],
                        xdot0[keep], M[keep], dropped=int((~keep).sum()))


def _grid_index(traj, t):
    grid = traj.grid
    i = (t - grid.t0) / grid.dt
    j = int(round(i))
    if abs(i - j) > 1e-6 or not 0 <= j < grid.count:
        raise ValueError(f"t={t} is not a grid time")
    N = grid.samples_per_period
    if j < N:
        raise ValueError(f"t - T = {t - grid.period} is before the start of the grid")
    return j, N


def dot_x0(traj, t):
    """Derivative of the zeroth phasor at grid time ``t``: ``(x(t) - x(t-T)) / T``."""
    j, N = _grid_index(traj, t)
    return (traj.states[:, j] - traj.states[:, j - N]) / traj.grid.period


def window_norm(traj, t, quadrature="trapezoid"):
    """L2 norm of ``(x, u)`` over ``[t-T, t]``, normalized by ``T``."""
    j, N = _grid_index(traj, t)
    w = quadrature_weights(N, quadrature)
    sl = slice(j - N, j + 1)
    energy = np.sum(traj.states[:, sl] ** 2, axis=0) + np.sum(traj.inputs[:, sl] ** 2, axis=0)
    val = float(np.sqrt(energy @ w))
    if val < DEGENERATE_NORM:
        raise ValueError(f"window ending at t={t} has zero energy")
    return val


def reconstruct(frames, p=None):
    """Signal values at the frame times from ``sum_k X_k e^{jwkt} + (T/2) X0'``.

    ``p`` may lower the truncation used in the sum. Returns shape ``(F, n)``.
    """
    p = frames.p if p is None else p
    if p > frames.p:
        raise ValueError(f"frames only hold phasors up to order {frames.p}")
    ks = np.arange(-p, p + 1)
    ph = np.exp(1j * frames.omega * np.outer(frames.t, ks))
    Xs = frames.x_phasors[:, frames.p - p:frames.p + p + 1]
    val = np.einsum("fk,fkn->fn", ph, Xs)
    scale = max(np.abs(val).max(), 1e-300)
    if np.abs(val.imag).max() > 1e-10 * scale:
        raise ValueError("reconstruction is not real; phasors lack conjugate symmetry")
    return val.real + 0.5 * frames.period * frames.xdot0


class SlidingPhasorTransformer(TransformerMixin, BaseEstimator):
    """Turn sampled trajectories into sliding-Fourier phasor frames.

    Stateless; ``fit`` only validates its input.
    """

    def __init__(self, p=10, quadrature="trapezoid"):
        self.p = p
        self.quadrature = quadrature

    def fit(self, X, y=None):
        check_trajectories(X)
        quadrature_weights(2, self.quadrature)
        return self

    def transform(self, X):
        trajs, single = check_trajectories(X, return_single=True)
        out = [sliding_phasors(tr, self.p, self.quadrature) for tr in trajs]
        return out[0] if single else out
