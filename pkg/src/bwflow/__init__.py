"""Diagonalization of quadratic boson Hamiltonians by a double-bracket flow.

The package integrates the matrix flow

    dOmega/dt = -16 B B~,   dB/dt = -2 (Omega B + B Omega^t),

tracks the scalar coefficient C alongside, recovers the diagonalizing
Bogoliubov (u, v) pair from the same B-path, and verifies the results
against closed-form block solutions and a dense truncated-Fock oracle.
"""

from . import analytic, bogoliubov, conditions, flow, fock, opcore
from .errors import (BlowupDetected, BwflowError, InsufficientData,
                     KernelOverlap, LogBranch, MapInvalid, NotConverged,
                     NotInRegime, NotOnManifold, NotPSD, NotReal,
                     OutOfRange, ParseError, PastBlowup, PathGap,
                     RoleViolation, SizeLimit, StepSizeUnderflow)
from .flow import SCALAR_SIGN, Controls, FlowState, Trajectory, integrate
from .opcore import OneParticleOperator, QuadraticSpec

__version__ = "0.1.0"

__all__ = [
    "analytic", "bogoliubov", "conditions", "flow", "fock", "opcore",
    "BwflowError", "BlowupDetected", "InsufficientData", "KernelOverlap",
    "LogBranch", "MapInvalid", "NotConverged", "NotInRegime", "NotOnManifold",
    "NotPSD", "NotReal", "OutOfRange", "ParseError", "PastBlowup", "PathGap",
    "RoleViolation", "SizeLimit", "StepSizeUnderflow",
    "SCALAR_SIGN", "Controls", "FlowState", "Trajectory", "integrate",
    "OneParticleOperator", "QuadraticSpec",
    "__version__",
]
