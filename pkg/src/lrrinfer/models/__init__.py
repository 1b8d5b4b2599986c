from .entry import (
    EntryGame,
    EntryLrr,
    EntryParameters,
    SignConfigurationError,
    entry_rho,
    multiplicity_probability,
    q_lrr_entry,
    regions,
)
from .interval import (
    IntervalData,
    IntervalLrr,
    IntervalModel,
    interval_moments,
    interval_rho,
    q_lrr_interval,
)
