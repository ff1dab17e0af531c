"""Simulation of a two-cavity quantum eraser with cross-correlated mode decay,
plus estimation of the cross decay rate from finite measurement records."""
from .errors import EraserSimError
from .lindblad import SystemParams
from .protocol import JointProbabilities, ProtocolConfig, Scheme, joint_probabilities

__version__ = "0.1.0"

__all__ = ["EraserSimError", "JointProbabilities", "ProtocolConfig", "Scheme", "SystemParams",
           "joint_probabilities"]
