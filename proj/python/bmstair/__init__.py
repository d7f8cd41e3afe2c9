"""Certified low-rank semidefinite solving for rotation synchronization."""

from ._bmstair import (
    Problem,
    certify,
    constraint_residuals,
    generate_rotation_sync,
    licq_check,
    load_problem,
    objective,
    random_point,
    read_g2o,
    round_solution,
    save_problem,
    solve,
)

__all__ = [
    "Problem",
    "certify",
    "constraint_residuals",
    "generate_rotation_sync",
    "licq_check",
    "load_problem",
    "objective",
    "random_point",
    "read_g2o",
    "round_solution",
    "save_problem",
    "solve",
]
