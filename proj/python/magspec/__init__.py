"""Python access to the magspec solvers and experiment drivers."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ._magspec import (
    BoundaryCondition,
    DiscretizationScheme,
    Grid2D,
    MagspecError,
    ModelKind,
    ModelParams,
    PotentialSpec,
    assemble_csr,
    band_scan,
    classify,
    critical_lambda,
    discrete_threshold,
    exact_inf_L,
    exit_code_for_message,
    lowest_eigenvalues,
    resolved_config,
    run_command,
    square_well_critical_oracle,
)

__all__ = [
    "BoundaryCondition",
    "DiscretizationScheme",
    "Grid2D",
    "MagspecError",
    "ModelKind",
    "ModelParams",
    "PotentialSpec",
    "assemble_csr",
    "band_scan",
    "classify",
    "critical_lambda",
    "discrete_threshold",
    "exact_inf_L",
    "exit_code_for_message",
    "lowest_eigenvalues",
    "resolved_config",
    "run",
    "run_command",
    "square_well_critical_oracle",
    "dense_matrix",
]


def dense_matrix(params: ModelParams, grid: Grid2D, scheme=DiscretizationScheme.Peierls) -> np.ndarray:
    """Dense copy of the assembled operator (small grids only)."""
    data, indices, indptr, n = assemble_csr(params, grid, scheme)
    out = np.zeros((n, n), dtype=complex)
    for row in range(n):
        sl = slice(indptr[row], indptr[row + 1])
        out[row, indices[sl]] = data[sl]
    return out


def run(command: str, config: dict | str, out: str | Path) -> dict:
    """Runs a CLI command in-process and returns the parsed run.json."""
    if isinstance(config, dict):
        config = "".join(f"{k} = {v}\n" for k, v in config.items())
    out = Path(out)
    run_command(command, config, out)
    return json.loads((out / "run.json").read_text())
