"""Input validation shared by the estimators."""

import numpy as np

from .simulate import SampledTrajectory


def check_trajectories(X, return_single=False):
    """Normalize ``X`` to a non-empty list of compatible trajectories."""
    single = isinstance(X, SampledTrajectory)
    trajs = [X] if single else list(X)
    if not trajs:
        raise ValueError("no trajectories given")
    for tr in trajs:
        if not isinstance(tr, SampledTrajectory):
            raise TypeError(f"expected SampledTrajectory, got {type(tr).__name__}")
    ref = trajs[0]
    for tr in trajs[1:]:
        if tr.n != ref.n or tr.m != ref.m:
            raise ValueError("trajectories have different state/input dimensions")
        if not np.isclose(tr.grid.period, ref.grid.period):
            raise ValueError("trajectories have different periods")
        if tr.grid.samples_per_period != ref.grid.samples_per_period:
            raise ValueError("trajectories have different sampling steps")
    return (trajs, single) if return_single else trajs


def check_frames(frames):
    frames = [frames] if hasattr(frames, "x_phasors") else list(frames)
    if not frames:
        raise ValueError("no phasor frames given")
    ref = frames[0]
    for fr in frames[1:]:
        if fr.p != ref.p:
            raise ValueError(f"frames mix truncation orders {ref.p} and {fr.p}")
        if not np.isclose(fr.period, ref.period):
            raise ValueError("frames mix different periods")
        if fr.n != ref.n or fr.m != ref.m:
            raise ValueError("frames mix different state/input dimensions")
    return frames
