"""Mean-field demand-side management.

Option, state and count indices are 0-based on this side, matching the
C++ library; the CLI and CSV outputs use 1-based option and state labels.
"""

from ._core import (
    Kernel,
    MfdsmError,
    Scenario,
    __version__,
    binomial_pmf,
    convolve,
    enumerate_kernel_row,
    estimate_cost,
    evaluate_policy,
    per_step_cost,
    replicate_example1,
    simulate,
    solve,
    transition_row,
    verify,
)

__all__ = [
    "Kernel",
    "MfdsmError",
    "Scenario",
    "__version__",
    "binomial_pmf",
    "convolve",
    "enumerate_kernel_row",
    "estimate_cost",
    "evaluate_policy",
    "per_step_cost",
    "replicate_example1",
    "simulate",
    "solve",
    "transition_row",
    "verify",
]
