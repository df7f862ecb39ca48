"""Periodic matrix functions stored as families of Fourier coefficients (phasors)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

REALNESS_TOL = 1e-12


def _as_phasor_dict(phasors):
    out = {}
    for k, v in phasors.items():
        arr = np.array(v, dtype=complex, ndmin=2)
        out[int(k)] = arr
    return out


@dataclass(frozen=True, eq=False)
class PeriodicMatrix:
    """A real T-periodic matrix function ``M(t) = sum_k M_k exp(j w k t)``.

    Only non-zero phasors are kept; both ``k`` and ``-k`` are stored and
    must be complex conjugates of each other.

    Parameters
    ----------
    period : float
        Period ``T`` in seconds. ``omega = 2 pi / T`` is derived.
    phasors : dict[int, array_like]
        Map from harmonic index to a complex ``rows x cols`` matrix.
    truncation : int, optional
        Set when the family is a finite truncation of an infinite series
        (``K_sim``); purely informational.
    hermitian_defect : float
        Symmetrization defect recorded by :func:`from_raw_phasors`.
    """

    period: float
    phasors: dict
    rows: int = None
    cols: int = None
    truncation: int | None = None
    hermitian_defect: float = 0.0
    _degree: int = field(init=False, repr=False, default=0)

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        ph = _as_phasor_dict(self.phasors)
        shapes = {v.shape for v in ph.values()}
        if len(shapes) > 1:
            raise ValueError(f"phasors have mismatched shapes {sorted(shapes)}")
        if shapes:
            (shape,) = shapes
        elif self.rows is not None and self.cols is not None:
            shape = (self.rows, self.cols)
        else:
            raise ValueError("empty phasor family needs explicit rows and cols")
        if self.rows is not None and (self.rows, self.cols) != shape:
            raise ValueError(f"declared shape {(self.rows, self.cols)} != phasor shape {shape}")
        ph = {k: v for k, v in ph.items() if np.any(v != 0)}
        for v in ph.values():
            v.setflags(write=False)
        object.__setattr__(self, "phasors", ph)
        object.__setattr__(self, "rows", shape[0])
        object.__setattr__(self, "cols", shape[1])
        _check_hermitian(ph)
        object.__setattr__(self, "_degree", max((abs(k) for k in ph), default=0))

    @property
    def omega(self):
        return 2 * np.pi / self.period

    @property
    def degree(self):
        """Largest ``|k|`` with a non-vanishing phasor."""
        return self._degree

    @property
    def shape(self):
        return (self.rows, self.cols)

    def __getitem__(self, k):
        """Phasor ``M_k`` (zeros when not stored)."""
        v = self.phasors.get(int(k))
        if v is None:
            return np.zeros(self.shape, dtype=complex)
        return v

    def __call__(self, t):
        return evaluate(self, t)

    def truncate(self, p):
        """Keep only the phasors with ``|k| <= p``."""
        return PeriodicMatrix(
            self.period,
            {k: v for k, v in self.phasors.items() if abs(k) <= p},
            rows=self.rows,
            cols=self.cols,
        )

    def total_norm(self):
        return sum(np.linalg.norm(v, 2) for v in self.phasors.values())

    def to_dict(self):
        d = {
            "period": self.period,
            "rows": self.rows,
            "cols": self.cols,
            "phasors": [
                {"k": k, "re": self.phasors[k].real.tolist(), "im": self.phasors[k].imag.tolist()}
                for k in sorted(self.phasors)
                if k >= 0
            ],
        }
        if self.truncation is not None:
            d["truncation"] = self.truncation
        return d

    @classmethod
    def from_dict(cls, d):
        raw = {}
        for entry in d["phasors"]:
            k = int(entry["k"])
            if k < 0:
                raise ValueError("serialized phasors must have k >= 0")
            v = np.asarray(entry["re"], dtype=float) + 1j * np.asarray(entry["im"], dtype=float)
            raw[k] = v
            if k > 0:
                raw[-k] = v.conj()
        return cls(float(d["period"]), raw, rows=int(d["rows"]), cols=int(d["cols"]),
                   truncation=d.get("truncation"))

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _check_hermitian(ph):
    scale = max((np.abs(v).max() for v in ph.values()), default=0.0)
    tol = REALNESS_TOL * max(scale, 1.0)
    for k, v in ph.items():
        other = ph.get(-k)
        if other is None:
            raise ValueError(f"phasor k={k} has no conjugate partner k={-k}")
        if np.abs(v - other.conj()).max() > tol:
            raise ValueError(f"phasors k={k} and k={-k} are not complex conjugates")
    if 0 in ph and np.abs(ph[0].imag).max() > tol:
        raise ValueError("phasor k=0 must be real")


def evaluate(spec, t):
    """Evaluate ``spec`` at time(s) ``t``.

    Returns a ``rows x cols`` real matrix for scalar ``t`` and an array of
    shape ``(len(t), rows, cols)`` otherwise.
    """
    t_arr = np.asarray(t, dtype=float)
    ts = np.atleast_1d(t_arr)
    if not spec.phasors:
        out = np.zeros((ts.size, spec.rows, spec.cols))
    else:
        ks = np.fromiter(spec.phasors, dtype=int)
        stack = np.stack([spec.phasors[k] for k in ks])
        # reduce the phase modulo the period before exponentiating
        frac = np.mod(np.outer(ts, ks) / spec.period, 1.0)
        val = np.einsum("tk,kij->tij", np.exp(2j * np.pi * frac), stack)
        bound = REALNESS_TOL * np.linalg.norm(stack, 2, axis=(1, 2)).sum()
        if np.abs(val.imag).max() > bound:
            raise ValueError("evaluation produced a non-real value; phasors are not Hermitian")
        out = val.real
    return out[0] if t_arr.ndim == 0 else out


def from_raw_phasors(raw, period, truncation=None):
    """Hermitian-symmetrize an arbitrary complex phasor family.

    ``M_k = (raw_k + conj(raw_-k)) / 2`` and ``M_0 = Re(raw_0)``. The largest
    spectral norm of ``raw_k - conj(raw_-k)`` is stored as ``hermitian_defect``.
    """
    raw = _as_phasor_dict(raw)
    if not raw:
        raise ValueError("raw phasor family is empty")
    shapes = {v.shape for v in raw.values()}
    if len(shapes) > 1:
        raise ValueError(f"raw phasors have mismatched shapes {sorted(shapes)}")
    (shape,) = shapes
    zero = np.zeros(shape, dtype=complex)
    ks = set(raw) | {-k for k in raw}
    out = {}
    defect = 0.0
    for k in ks:
        a = raw.get(k, zero)
        b = raw.get(-k, zero)
        if k == 0:
            out[0] = a.real + 0j
        else:
            out[k] = (a + b.conj()) / 2
        defect = max(defect, float(np.linalg.norm(a - b.conj(), 2)))
    return PeriodicMatrix(period, out, rows=shape[0], cols=shape[1], truncation=truncation,
                          hermitian_defect=defect)


def random_spec(n, m, degree, seed, scale=3.0, period=1.0):
    """Random real periodic ``n x m`` matrix of the given degree.

    Real and imaginary parts are standard normal; the family is rescaled
    so that the spectral norms of all stored phasors sum to ``scale``.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if not scale > 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    ph = {0: rng.standard_normal((n, m)) + 0j}
    for k in range(1, degree + 1):
        v = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
        ph[k] = v
        ph[-k] = v.conj()
    total = sum(np.linalg.norm(v, 2) for v in ph.values())
    return PeriodicMatrix(period, {k: v * (scale / total) for k, v in ph.items()}, rows=n, cols=m)


def example_b_specs(K_sim=200):
    """Phasor families of the two-state infinite-degree benchmark (T = 1).

    a11 is a square wave, a12 a triangle wave, a21 a phase-shifted sawtooth;
    a22 and b11 are finite trigonometric sums. Series are cut at ``K_sim``.
    """
    if K_sim < 5:
        raise ValueError("K_sim must be >= 5 to keep every term of a22 and b11")
    A = {0: np.array([[1.0, 2.0], [-1.0, 1.0]], dtype=complex)}
    B = {0: np.array([[1.0], [0.0]], dtype=complex)}

    def add(store, k, i, j, c, shape):
        for kk, cc in ((k, c), (-k, np.conj(c))):
            store.setdefault(kk, np.zeros(shape, dtype=complex))[i, j] += cc

    for q in range(1, K_sim + 1, 2):
        # (4/pi) sin(q w t) / q  and  (16/pi^2) cos(q w t) / q^2
        add(A, q, 0, 0, -2j / (np.pi * q), (2, 2))
        add(A, q, 0, 1, 8 / (np.pi ** 2 * q ** 2), (2, 2))
    for k in range(1, K_sim + 1):
        # (2/pi) (-1)^k / k * sin(w k t + pi/4)
        c = (2 / np.pi) * (-1) ** k / k
        add(A, k, 1, 0, c * np.exp(1j * np.pi / 4) / 2j, (2, 2))
    # 1 - 2 sin(wt) - 2 sin(3wt) + 2 cos(3wt) + 2 cos(5wt)
    add(A, 1, 1, 1, 1j, (2, 2))
    add(A, 3, 1, 1, 1 + 1j, (2, 2))
    add(A, 5, 1, 1, 1.0, (2, 2))
    # 1 + 2 cos(2wt) + 4 sin(3wt)
    add(B, 2, 0, 0, 1.0, (2, 1))
    add(B, 3, 0, 0, -2j, (2, 1))
    return (PeriodicMatrix(1.0, A, rows=2, cols=2, truncation=K_sim),
            PeriodicMatrix(1.0, B, rows=2, cols=1, truncation=K_sim))


def truncation_tail_estimate(spec, p, points_per_period=1024):
    """Empirical sup-norm of ``spec - spec.truncate(p)`` over one period.

    The spectral norm of the discarded tail is maximized over a uniform grid
    of ``points_per_period`` times; this is a proxy for the L-infinity error.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    points_per_period = max(int(points_per_period), 1024)
    tail = {k: v for k, v in spec.phasors.items() if abs(k) > p}
    if not tail:
        return 0.0
    tail_spec = PeriodicMatrix(spec.period, tail, rows=spec.rows, cols=spec.cols)
    ts = np.arange(points_per_period) * (spec.period / points_per_period)
    vals = evaluate(tail_spec, ts)
    return float(np.linalg.norm(vals, 2, axis=(1, 2)).max())
