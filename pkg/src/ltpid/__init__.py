"""Harmonic identification of linear time-periodic systems from sampled trajectories."""

from .harmonic import (PhasorFrame, PhasorFrames, SlidingPhasorTransformer, dot_x0, reconstruct,
                       sliding_phasors, window_norm)
from .identify import (HarmonicLTPIdentifier, IdentifiedModel, Informativity, NotInformativeError,
                       RegressionData, assemble, error_bound_constant, informativity, solve, sweep_p)
from .periodic import (PeriodicMatrix, evaluate, example_b_specs, from_raw_phasors, random_spec,
                       truncation_tail_estimate)
from .simulate import (InputSignal, SampledTrajectory, SamplingGrid, SimulationError, add_state_noise,
                       piecewise_periodic_input, simulate, simulate_many, zero_input)
from .validation import (ValidationReport, phasor_error, relative_phasor_error, stack_phasors,
                         validate_on_fresh_trajectory)

__version__ = "0.1.0"
