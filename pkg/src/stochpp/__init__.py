"""Stochastic Beddington-DeAngelis predator-prey analysis toolkit.

Classifies extinction/permanence regimes via the threshold lambda, simulates
the SDE dynamics (independent or shared noise), and checks the ergodicity and
support claims numerically.
"""

from .boundary import DegeneratesToZero, GammaLaw, from_logistic
from .model import ModelParams, NoiseMode, Regime, validate
from .simulate import SimConfig, Trajectory
from .threshold import ThresholdReport, threshold_report

__version__ = "0.1.0"

__all__ = [
    "DegeneratesToZero",
    "GammaLaw",
    "ModelParams",
    "NoiseMode",
    "Regime",
    "SimConfig",
    "ThresholdReport",
    "Trajectory",
    "from_logistic",
    "threshold_report",
    "validate",
    "__version__",
]
