"""Truthful mechanisms for two tasks on two machines, weak-monotonicity checks and the linear lower bound."""

from . import config
from .curves import MonotoneCurve
from .errors import *  # noqa: F401,F403
from .geometry import (BoundaryFit, CriticalProfile, FigureClass, boundary_scan, classify_figure,
                       critical_profile, extension_identity_residual, fit_truncated_affine,
                       slope_invariance_check)
from .lowerbound import (AdversaryConfig, AdversaryReport, adversary, approximation_ratio, eq101_instance,
                         find_s_inefficient, high_approx_witness, optimal_makespan, reduce_nontrivial)
from .mechanisms import (AffineMin, AffineParams, Allocation, AntiMonotone, Bundling, Constant, CoupledAffine,
                         PerPair, PerTaskLinear, RelaxedAffineMin, TaskIndependent, VirtualPayments,
                         allocate_affine, allocate_constant, allocate_one_dimensional, allocate_per_task_linear,
                         allocate_relaxed, allocate_task_independent, payments_affine)
from .truthfulness import (ViolationWitness, cut_restriction, lemma_tool_check, verify_payment_truthfulness,
                           virtual_payments, wmon_check)
from .valuations import (Bundle, DomainSpec, Instance, PairwiseValuation, RestrictedInstance, Task,
                         TwoTaskValuation, domain_check, eval_cost, validate_instance)

__version__ = "0.1.0"
