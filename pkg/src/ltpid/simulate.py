"""Ground-truth simulation of x' = A(t) x + B(t) u on a uniform sampling grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .periodic import PeriodicMatrix, evaluate, random_spec

BLOWUP_LIMIT = 1e12


class SimulationError(RuntimeError):
    """Raised when a trajectory leaves the finite range."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"state became non-finite or exceeded {BLOWUP_LIMIT:g} at sample {index}")


@dataclass(frozen=True)
class SamplingGrid:
    """Uniform grid ``t_i = t0 + i * T / N`` for ``i = 0..count-1``.

    ``substeps`` is the number of internal RK4 steps per sample.
    """

    period: float
    samples_per_period: int
    count: int
    t0: float = 0.0
    substeps: int = 8

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")
        if self.samples_per_period < 2:
            raise ValueError("need at least 2 samples per period")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.count < 2 * self.samples_per_period:
            raise ValueError(
                f"grid of {self.count} samples spans less than two periods "
                f"({2 * self.samples_per_period} samples needed)")

    @property
    def dt(self):
        return self.period / self.samples_per_period

    @property
    def times(self):
        return self.t0 + np.arange(self.count) * self.dt

    def to_dict(self):
        return {"period": self.period, "samples_per_period": self.samples_per_period,
                "count": self.count, "t0": self.t0, "substeps": self.substeps}


@dataclass(frozen=True, eq=False)
class InputSignal:
    """Piecewise T-periodic input.

    Segment ``s`` covers ``[t0 + s*L, t0 + (s+1)*L)``; each piece is the
    restriction of a T-periodic signal, and ``L`` need not be a whole number
    of periods. The last segment extends indefinitely and times before
    ``t0`` use the first one. ``segments`` holds one ``m x 1``
    :class:`PeriodicMatrix` per segment; an empty tuple is the zero input
    of dimension ``m``.
    """

    m: int
    segments: tuple = ()
    segment_length: float = np.inf
    t0: float = 0.0
    seed: int | None = None

    @property
    def kind(self):
        return "piecewise-periodic" if self.segments else "zero"

    def segment_index(self, t):
        if not self.segments:
            return np.zeros(np.shape(t), dtype=int)
        s = np.floor((np.asarray(t, dtype=float) - self.t0) / self.segment_length + 1e-9)
        return np.clip(s, 0, len(self.segments) - 1).astype(int)

    def boundaries(self):
        return self.t0 + self.segment_length * np.arange(1, len(self.segments))

    def evaluate(self, t, segment=None):
        """Values at times ``t`` as an ``(len(t), m)`` array.

        ``segment`` forces the segment used for every time; by default each
        time is evaluated in its own (right-continuous) segment.
        """
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((ts.size, self.m))
        if not self.segments:
            return out
        seg = np.full(ts.size, segment) if segment is not None else self.segment_index(ts)
        for s in np.unique(seg):
            mask = seg == s
            out[mask] = evaluate(self.segments[s], ts[mask])[:, :, 0]
        return out

    def sample(self, times):
        """Recorded input samples; at a segment switch the two one-sided limits are averaged."""
        times = np.asarray(times, dtype=float)
        out = self.evaluate(times)
        if len(self.segments) > 1:
            for b in self.boundaries():
                hit = np.isclose(times, b, rtol=0, atol=1e-9 * self.segment_length)
                if hit.any():
                    s = int(self.segment_index(b))
                    left = self.evaluate(times[hit], segment=s - 1)
                    out[hit] = 0.5 * (out[hit] + left)
        return out

    def to_dict(self):
        return {"m": self.m, "segment_length": None if np.isinf(self.segment_length) else self.segment_length,
                "t0": self.t0, "seed": self.seed, "segments": [s.to_dict() for s in self.segments]}

    @classmethod
    def from_dict(cls, d):
        segs = tuple(PeriodicMatrix.from_dict(s) for s in d.get("segments", []))
        length = d.get("segment_length")
        return cls(int(d["m"]), segs, np.inf if length is None else float(length),
                   float(d.get("t0", 0.0)), d.get("seed"))


def zero_input(m=0):
    return InputSignal(m)


def piecewise_periodic_input(m, degree, period, segment_count, horizon, seed, scale=1.0, t0=0.0,
                             segment_periods=None):
    """Random piecewise-periodic input with ``segment_count`` independent segments.

    Each segment is a random Hermitian phasor family of the given degree
    (see :func:`random_spec`); segment length is ``horizon / segment_count``
    rounded down to a whole number of periods unless ``segment_periods``
    (which may be fractional) is given. Short segments make the window
    phasors of the input vary from frame to frame, which a single
    trajectory needs to excite many harmonics.
    """
    if segment_count < 1:
        raise ValueError("segment_count must be >= 1")
    if segment_periods is None:
        segment_periods = int(np.floor(horizon / (segment_count * period) + 1e-9))
        if segment_periods < 1:
            raise ValueError(f"horizon {horizon} is shorter than {segment_count} segments of one period")
    if not segment_periods > 0:
        raise ValueError("segment_periods must be positive")
    seeds = np.random.SeedSequence(seed).generate_state(segment_count)
    segs = tuple(random_spec(m, 1, degree, int(s), scale=scale, period=period) for s in seeds)
    return InputSignal(m, segs, segment_periods * period, t0, seed)


@dataclass(frozen=True, eq=False)
class SampledTrajectory:
    grid: SamplingGrid
    states: np.ndarray
    inputs: np.ndarray = field(default=None)

    def __post_init__(self):
        states = np.array(self.states, dtype=float, ndmin=2)
        inputs = self.inputs
        if inputs is None:
            inputs = np.zeros((0, states.shape[1]))
        inputs = np.array(inputs, dtype=float, ndmin=2).reshape(-1, states.shape[1])
        if states.shape[1] != self.grid.count or inputs.shape[1] != self.grid.count:
            raise ValueError("column count must equal grid.count")
        if not (np.isfinite(states).all() and np.isfinite(inputs).all()):
            raise ValueError("trajectory contains non-finite values")
        states.setflags(write=False)
        inputs.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    @property
    def n(self):
        return self.states.shape[0]

    @property
    def m(self):
        return self.inputs.shape[0]

    @property
    def times(self):
        return self.grid.times

    def to_csv(self, path):
        header = ["t"] + [f"x{i + 1}" for i in range(self.n)] + [f"u{i + 1}" for i in range(self.m)]
        data = np.vstack([self.times[None, :], self.states, self.inputs]).T
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in data:
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path, period, substeps=8):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        nx = sum(h.strip().startswith("x") for h in header)
        t = body[:, 0]
        dt = t[1] - t[0]
        N = int(round(period / dt))
        if not np.allclose(np.diff(t), period / N, rtol=1e-9, atol=0):
            raise ValueError("CSV times are not a uniform grid with an integer number of samples per period")
        grid = SamplingGrid(period, N, len(t), float(t[0]), substeps)
        return cls(grid, body[:, 1:1 + nx].T, body[:, 1 + nx:].T)


def _check_system(A, B, m, grid):
    n = A.rows
    if A.cols != n:
        raise ValueError("A must be square")
    if B is not None:
        if B.rows != n or B.cols != m:
            raise ValueError(f"B is {B.shape}, expected ({n}, {m})")
        if not np.isclose(B.period, A.period):
            raise ValueError("A and B must share the period")
    if not np.isclose(A.period, grid.period):
        raise ValueError("grid period differs from the system period")


def simulate(A, B, u, x0, grid):
    """Integrate ``x' = A(t) x + B(t) u(t)`` with fixed-step RK4.

    The step is ``grid.dt / grid.substeps``; states are recorded at grid
    times. ``B`` may be ``None`` for autonomous systems, in which case the
    recorded input has zero rows.
    """
    return simulate_many(A, B, [u], [x0], grid)[0]


def simulate_many(A, B, inputs, x0s, grid):
    """:func:`simulate` for several (input, x0) pairs at once, sharing A, B and the grid."""
    n = A.rows
    K = len(x0s)
    if len(inputs) != K:
        raise ValueError("need one input per initial state")
    m = B.cols if B is not None else 0
    inputs = [zero_input(m) if u is None else u for u in inputs]
    for u in inputs:
        _check_system(A, B, u.m, grid)
    X = np.array([np.asarray(x0, dtype=float).reshape(n) for x0 in x0s]).T  # (n, K)

    S, L = grid.substeps, grid.count
    h = grid.dt / S
    nsteps = (L - 1) * S
    # stage times: start, midpoint and end of every internal step
    tg = grid.t0 + np.arange(2 * nsteps + 1) * (h / 2)
    Ag = evaluate(A, tg)
    forced = B is not None and any(u.segments for u in inputs)
    if forced:
        Bg = evaluate(B, tg)
        Bu = np.zeros((nsteps, 3, n, K))
        mid = grid.t0 + (np.arange(nsteps) + 0.5) * h
        for c, u in enumerate(inputs):
            if not u.segments:
                continue
            step_seg = u.segment_index(mid)
            useg = np.stack([evaluate(s, tg)[:, :, 0] for s in u.segments])
            for g in range(3):
                idx = 2 * np.arange(nsteps) + g
                Bu[:, g, :, c] = np.einsum("tij,tj->ti", Bg[idx], useg[step_seg, idx])

    states = np.empty((L, n, K))
    states[0] = X
    zero = np.zeros((n, K))
    for i in range(1, L):
        for s in range(S):
            step = (i - 1) * S + s
            g = 2 * step
            if forced:
                b0, b1, b2 = Bu[step]
            else:
                b0 = b1 = b2 = zero
            k1 = Ag[g] @ X + b0
            k2 = Ag[g + 1] @ (X + (h / 2) * k1) + b1
            k3 = Ag[g + 1] @ (X + (h / 2) * k2) + b1
            k4 = Ag[g + 2] @ (X + h * k3) + b2
            X = X + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(X).all() or np.abs(X).max() > BLOWUP_LIMIT:
            raise SimulationError(i)
        states[i] = X
    out = []
    for c, u in enumerate(inputs):
        rec = u.sample(grid.times).T if u.m else np.zeros((0, L))
        out.append(SampledTrajectory(grid, states[:, :, c].T, rec))
    return out


def add_state_noise(traj, ratio, seed):
    """Add zero-mean Gaussian noise with ``3 sigma = ratio * |x_i(t)|`` to the states."""
    if ratio < 0:
        raise ValueError("ratio must be non-negative")
    if ratio == 0:
        return traj
    rng = np.random.default_rng(seed)
    sigma = ratio * np.abs(traj.states) / 3
    noisy = traj.states + sigma * rng.standard_normal(traj.states.shape)
    return SampledTrajectory(traj.grid, noisy, traj.inputs)
