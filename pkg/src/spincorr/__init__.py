"""Measurement protocols for two-time spin correlation functions.

Exact dense simulation of noninvasive (ancilla-based), projective and
rotation-based measurement protocols on small spin registers, with
finite-sample Monte Carlo estimators and systematic/statistical error
bounds.
"""
from .core import Convention, Operator, SpinRegister, StateVector
from .oracle import CorrelationQuery

__version__ = "0.1.0"

__all__ = ["Convention", "Operator", "SpinRegister", "StateVector",
           "CorrelationQuery", "__version__"]
