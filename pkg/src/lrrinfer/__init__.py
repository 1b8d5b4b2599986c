"""Bootstrap confidence regions for moment-inequality models, refined by a
locally robust criterion that favours parameter values whose counterfactual
predictions are least sensitive to the equilibrium selection rule."""

from .bootstrap import BootstrapPlan, CriticalValues, critical_values
from .grid import Axis, GridMask, GridMismatchError, ParameterGrid, ParameterPoint
from .lrr import (
    ConfidenceReport,
    DiscretizedSelectionRule,
    InfeasiblePerturbationError,
    SensitivityReport,
    confidence_set,
    confidence_sets,
    gamma_lrr_upper,
    q_lrr_generic,
    sensitivity_oracle,
)
from .models import EntryGame, EntryParameters, IntervalData, IntervalModel
from .moments import EmptyDatasetError, MomentModel, gamma_hat_kappa, q_hat, sample_moments, summarize
from .statespace import CounterfactualContext, eta_grid

__version__ = "0.1.0"
