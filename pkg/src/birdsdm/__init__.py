"""Species distribution modelling from citizen-science checklists and
remote-sensing patches: dataset construction, spatial splits, features,
a numpy CNN, baselines, range masking and evaluation."""

from .errors import DataError, MissingInputError, NumericError, SdmError, UsageError

__version__ = "0.1.0"
