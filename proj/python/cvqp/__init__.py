"""CVaR-constrained quadratic programs: projection, ADMM solver and instance generators."""

from ._core import (
    CvarSpec,
    CvqpError,
    Problem,
    Result,
    Settings,
    Status,
    cvar,
    gen_portfolio,
    gen_projection,
    gen_quantile,
    project_cvar,
    project_sum_k_largest,
    solve,
    sum_k_largest,
    tail_count,
)

__all__ = [
    "CvarSpec",
    "CvqpError",
    "Problem",
    "Result",
    "Settings",
    "Status",
    "cvar",
    "gen_portfolio",
    "gen_projection",
    "gen_quantile",
    "project_cvar",
    "project_sum_k_largest",
    "solve",
    "sum_k_largest",
    "tail_count",
]
