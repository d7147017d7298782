"""Adaptive physical-layer authentication with a kernel LMS score.

Modules: ``attributes`` (differencing and normalization), ``kernel``, ``klms`` (the
learner), ``authenticator`` (decisions and error rates), ``simulation`` (Alice/Eve
session generator), ``analysis`` (analytic rates by CDF convolution) and
``experiments`` (preset suite, also behind the ``phyauth`` command).
"""
from .attributes import AttributeSpec, EstimateVector, NormalizedSample, Phase, diff, normalize
from .authenticator import ConfusionCounts, Decision, Hypothesis, Verdict, decide, sweep_threshold, tally
from .errors import PhyAuthError
from .kernel import KernelParams, gaussian_kernel, median_heuristic_width
from .klms import ModelState, StepOutcome, mse_curve, predict, step, step_size_upper_bound, train
from .simulation import DriftKind, DriftModel, ScenarioConfig, default_scenario, generate_stream, run_phase_pair

__version__ = "0.1.0"
