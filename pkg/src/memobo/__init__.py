"""memobo: memory-backed Bayesian optimization for noisy black-box tuning.

The toolkit optimizes bounded continuous parameters of expensive, noisy
objectives with a Gaussian-process surrogate and an expected-quantile-
improvement infill criterion, records every evaluation in a long-term
memory, and reuses reduced parameter bounds derived from the best past
iterations of similar tasks to warm-start new optimizations.
"""

__version__ = "0.1.0"

from .param_space import ParameterBound, ParameterSpace, default_space
from .memory import IterationRecord, LongTermMemory

__all__ = [
    "ParameterBound",
    "ParameterSpace",
    "default_space",
    "IterationRecord",
    "LongTermMemory",
    "__version__",
]
