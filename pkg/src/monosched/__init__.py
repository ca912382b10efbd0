"""Optimal deadline-constrained bit and energy scheduling over fading channels
with monomial energy cost b**n / g."""

__version__ = "0.1.0"

from .channel import (
    Deterministic,
    Discrete,
    FadingModel,
    QuadratureConfig,
    SeededStream,
    TabulatedPdf,
    TruncatedExponential,
    expect,
    model_from_dict,
    sample,
    validate,
)
from .montecarlo import ExperimentConfig, McSummary, compare_report, run_episode, run_experiment
from .oracle import GridSpec, dp_solve_dual, dp_solve_primal, one_step_argmin
from .policies import (
    EnergyState,
    PolicyKind,
    PolicySpec,
    QueueState,
    causal_dual_energy,
    causal_primal_bits,
    deadline_flush,
    equal_bit,
    noncausal_dual,
    noncausal_primal,
    slot_bits,
    slot_energy,
)
from .thresholds import (
    MonomialCost,
    ThresholdTable,
    expected_dual_bits,
    expected_primal_cost,
    limit_gap,
    xi_table,
    zeta_table,
)
