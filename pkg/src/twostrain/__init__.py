"""Two-strain SIR models with waning, vaccination and partial immune escape.

Four model variants share one state layout: immunity from vaccination is
either integrated with infection-acquired immunity or kept separate, and
waning is either a single step or an Erlang-distributed chain of ``k``
stages of which Strain 2 evades the first ``r``.
"""
from .analysis import (
    AxisSpec,
    AxisVariable,
    BoundaryCurve,
    RegionGrid,
    SweepRow,
    SweepTable,
    Transition,
    TransitionList,
    bifurcation_grid,
    boundary_curve,
    solve_boundary,
    steady_sweep,
    threshold_scan,
)
from .chain_delay import (
    DelayCheckReport,
    ErlangKernel,
    erlang_chain_residual,
    erlang_pdf,
    lct_substitution_check,
)
from .equilibria import EquilibriumSet, disease_free, equilibria, strain1_only, strain2_only
from .errors import (
    ConfigError,
    DomainError,
    IntegrationError,
    SingularParameterError,
    StructuralError,
    TwoStrainError,
)
from .integrator import IntegrationOptions, Method, Trajectory, integrate, protocol_initial_state, settle
from .model_core import (
    EpiParams,
    ModelKind,
    ModelSpec,
    StateVec,
    epsilon_to_lambda,
    eval_rhs,
    lambda_to_epsilon,
    make_model,
)
from .reproduction import RegionLabel, ReproductionSet, classify, region_label, repro_closed, repro_numeric

__version__ = "0.1.0"
