"""Conic programs, a reference interior-point solver and solution verification."""

from __future__ import annotations

import os

from .program import ConicProgram, ProgramBuilder, PSDBlock, SolveReport, Tolerances, dense_rows
from .verify import VerificationRecord, verify

BACKEND_ENV = "ICO_SOLVER_BACKEND"


def solve(program: ConicProgram, tol: Tolerances | None = None, backend: str | None = None, verbose: bool = False) -> SolveReport:
    """Solve with the selected backend (``ipm`` by default, or ``cvxpy``)."""
    name = (backend or os.environ.get(BACKEND_ENV) or "ipm").lower()
    if name == "ipm":
        from .ipm import solve_ipm

        return solve_ipm(program, tol, verbose=verbose)
    if name.startswith("cvxpy"):
        from .cvxpy_backend import solve_cvxpy

        solver = name.split(":", 1)[1].upper() if ":" in name else None
        return solve_cvxpy(program, tol, solver=solver, verbose=verbose)
    raise ValueError(f"unknown solver backend {name!r} (expected 'ipm' or 'cvxpy[:SOLVER]')")


__all__ = [
    "ConicProgram",
    "ProgramBuilder",
    "PSDBlock",
    "SolveReport",
    "Tolerances",
    "VerificationRecord",
    "dense_rows",
    "solve",
    "verify",
]
