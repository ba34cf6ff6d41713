"""Orthonormalization multigrid for the variable-coefficient Poisson problem.

Thin layer over the compiled ``_orthomg`` module. Sparse matrices come back
as ``(indptr, indices, data, shape)`` tuples; wrap them with
``scipy.sparse.csr_matrix`` if you need scipy.
"""

from ._orthomg import (
    ProblemSpec,
    SearchSpace,
    Solver,
    __version__,
    assemble_poisson,
    assign_groups,
    build_hierarchy,
    config_digest,
    normalize_config,
    partition_cells,
    run_command,
)

VARIANTS = ("additive_sync", "multiplicative_sync", "additive_task_parallel", "hybrid")


def solve(variant="multiplicative_sync", workers=1, config="", rhs=None, **kw):
    """One-shot solve. ``config`` holds config-file text; keyword arguments
    override dotted keys with ``.`` spelled ``__`` (``problem__cells_per_axis=32``).
    """
    lines = [config] + [f"{k.replace('__', '.')} = {v}" for k, v in kw.items()]
    return Solver("\n".join(lines)).solve(variant=variant, workers=workers, rhs=rhs)


__all__ = [
    "ProblemSpec",
    "SearchSpace",
    "Solver",
    "VARIANTS",
    "assemble_poisson",
    "assign_groups",
    "build_hierarchy",
    "config_digest",
    "normalize_config",
    "partition_cells",
    "run_command",
    "solve",
]
