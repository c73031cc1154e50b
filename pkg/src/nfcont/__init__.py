"""Stationary states of neural field equations with finite-rank kernels."""

__version__ = "0.1.0"

from .bifurcation import BifurcationReport, Candidate, candidates, chi, hopf_l1, pitchfork_persistence, reduced_roots
from .continuation import (
    Branch,
    ContinuationConfig,
    ContinuationError,
    SpecialPoint,
    SweepResult,
    SweepSchedule,
    multiparameter_sweep,
    switch_branch,
    trace,
    trace_family,
)
from .dynamics import Trajectory, integrate
from .model import Bounds, FieldModel
from .model_zoo import RingParams, TwoPopParams, build_ring, build_twopop, ring_K
from .pg_kernel import PGKernel, SpectrumReport
from .quadrature import QuadratureGrid
from .sigmoid import Heaviside, Logistic
from .stationary import SolutionSet, classify, enumerate_solutions, newton, parity_audit

__all__ = [
    "BifurcationReport",
    "Bounds",
    "Branch",
    "Candidate",
    "ContinuationConfig",
    "ContinuationError",
    "FieldModel",
    "Heaviside",
    "Logistic",
    "PGKernel",
    "QuadratureGrid",
    "RingParams",
    "SolutionSet",
    "SpecialPoint",
    "SpectrumReport",
    "SweepResult",
    "SweepSchedule",
    "Trajectory",
    "TwoPopParams",
    "build_ring",
    "build_twopop",
    "candidates",
    "chi",
    "classify",
    "enumerate_solutions",
    "hopf_l1",
    "integrate",
    "multiparameter_sweep",
    "newton",
    "parity_audit",
    "pitchfork_persistence",
    "reduced_roots",
    "ring_K",
    "switch_branch",
    "trace",
    "trace_family",
]
