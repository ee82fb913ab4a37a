"""Derivative identities of the conditional mean in Gaussian noise."""

from .channel import (
    DiscretePrior,
    GaussianPrior,
    PosteriorOracle,
    Region,
    ScalarChannel,
    SpherePrior,
    load_prior_spec,
    two_point,
)
from .errors import CapabilityError, CmeError, DomainError, NumericError, RangeError, ScheduleError

__version__ = "0.1.0"
