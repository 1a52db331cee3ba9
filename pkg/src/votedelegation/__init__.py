"""Win probabilities of two-alternative elections with vote delegation."""

from .distributions import (
    Explicit,
    PointMass,
    Poisson,
    TruncationBudget,
    parse_distribution,
    pmf,
    poisson_type_marginal,
    truncation_index,
)
from .engine import (
    DelegationPolicy,
    WinProbability,
    capped_delegation,
    capped_process,
    conventional,
    evaluate,
    free_delegation,
)
from .kernels import (
    TallyInstance,
    capped_delegation_kernel,
    capped_process_kernel_exact,
    free_delegation_kernel,
    free_delegation_kernel_exact,
    majority_indicator,
)
from .simulator import SimulationConfig, SimulationReport, simulate, simulate_instance
from .weighted import WeightedProfile, unweighted_majority_prob, weighted_majority_prob

__version__ = "0.1.0"
