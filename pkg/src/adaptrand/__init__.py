"""Response-adaptive randomization: designs, asymptotics, simulation, service.

The package is organized in layers:

* ``trial`` / ``rng``: trial state values and replayable random streams.
* ``estimators`` / ``targets``: parameter estimates and the catalog of
  target allocation proportions with analytic gradients.
* ``designs``: the randomization rules (discrete efficient coin, Efron's
  coin, the continuous doubly adaptive coin, urn schemes).
* ``asymptotics``: allocation-variance formulas, efficiency bounds, and
  Wald-test power.
* ``simulate``: the deterministic Monte Carlo engine.
* ``reports`` / ``cli``: table and reanalysis reports with CSV/JSON output.
* ``service``: a journaled HTTP allocation service for live trials.
"""

from .asymptotics import crlb, dbcd_variance, sigma_closed, sigma_general, v_matrix, wald_power
from .designs import (
    CompleteRandomization,
    Dbcd,
    DesignConfig,
    DropTheLoser,
    EfronCoin,
    Erade,
    ModifiedPlayTheWinner,
    PlayTheWinner,
    UrnState,
    dbcd_probability,
    efron_probability,
    erade_probability,
    format_design,
    next_probability,
    parse_design,
)
from .estimators import BinaryEstimates, GaussianEstimates, binary_estimates, gaussian_estimates, shrunk_mean
from .rng import RandomStream
from .simulate import SimulationSummary, TrialResult, boxplot_data, monte_carlo, run_trial
from .targets import (
    BinaryParams,
    GaussianParams,
    TargetAllocation,
    evaluate,
    gradient,
    parse_target,
)
from .trial import (
    Bernoulli,
    BinaryOutcome,
    ContinuousOutcome,
    Gaussian,
    TrialState,
    apply_assignment,
    apply_outcome,
    new_trial,
    sample_response,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # rng / trial
    "RandomStream",
    "Bernoulli",
    "Gaussian",
    "BinaryOutcome",
    "ContinuousOutcome",
    "TrialState",
    "new_trial",
    "apply_assignment",
    "apply_outcome",
    "sample_response",
    # estimators
    "BinaryEstimates",
    "GaussianEstimates",
    "shrunk_mean",
    "binary_estimates",
    "gaussian_estimates",
    # targets
    "TargetAllocation",
    "BinaryParams",
    "GaussianParams",
    "evaluate",
    "gradient",
    "parse_target",
    # designs
    "DesignConfig",
    "Erade",
    "EfronCoin",
    "Dbcd",
    "DropTheLoser",
    "PlayTheWinner",
    "ModifiedPlayTheWinner",
    "CompleteRandomization",
    "UrnState",
    "erade_probability",
    "efron_probability",
    "dbcd_probability",
    "next_probability",
    "parse_design",
    "format_design",
    # asymptotics
    "v_matrix",
    "sigma_general",
    "sigma_closed",
    "crlb",
    "dbcd_variance",
    "wald_power",
    # simulation
    "run_trial",
    "monte_carlo",
    "boxplot_data",
    "TrialResult",
    "SimulationSummary",
]
