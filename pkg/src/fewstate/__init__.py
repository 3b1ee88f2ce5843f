"""Streaming sketches that rarely change their internal state.

Heavy hitters, F_p moments and entropy with a metered count of the update
steps at which memory changes, plus exact oracles, adversarial stream
generators and classical baselines for comparison.
"""

from .model import SeededPrf, SketchParams, StateMeter, Update, derive_params
from .morris import ApproxAccumulator, MorrisCounter
from .oracle import FrequencyOracle
from .sample_hold import SampleAndHold
from .full_sample_hold import FullSampleAndHold
from .fp_estimator import FpEstimator
from .stable import StableSketch
from .entropy import EntropyEstimator
from .baselines import CountMin, MisraGries, SpaceSaving

__version__ = "0.1.0"

__all__ = [
    "ApproxAccumulator", "CountMin", "EntropyEstimator", "FpEstimator", "FrequencyOracle",
    "FullSampleAndHold", "MisraGries", "MorrisCounter", "SampleAndHold", "SeededPrf",
    "SketchParams", "SpaceSaving", "StableSketch", "StateMeter", "Update", "derive_params",
]
