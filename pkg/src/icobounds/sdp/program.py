"""Solver-agnostic description of linear matrix inequality programs.

A program has real variables ``y`` and asks to optimize ``c.y + const``
subject to ``F_k(y) = F_k0 + sum_j y_j F_kj  >= 0`` for every block k and
``E y = f``.  Block data are stored as a constant matrix plus a sparse matrix
whose row j is the row-major ``vec`` of ``F_kj``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class PSDBlock:
    constant: np.ndarray
    coefficients: sp.csr_matrix  # (n_vars, size*size)
    name: str = ""

    @property
    def size(self) -> int:
        return int(self.constant.shape[0])

    @property
    def is_real(self) -> bool:
        return not (np.iscomplexobj(self.constant) and np.any(self.constant.imag)) and not (
            np.iscomplexobj(self.coefficients.data) and np.any(self.coefficients.data.imag)
        )

    def value(self, y: np.ndarray) -> np.ndarray:
        n = self.size
        vec = self.coefficients.T @ np.asarray(y, dtype=float)
        return self.constant + np.asarray(vec).reshape(n, n)


@dataclass(frozen=True)
class ConicProgram:
    n_vars: int
    blocks: tuple[PSDBlock, ...]
    eq_matrix: sp.csr_matrix
    eq_rhs: np.ndarray
    objective: np.ndarray
    sense: str = "max"
    objective_constant: float = 0.0
    var_names: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")
        if self.objective.shape != (self.n_vars,):
            raise ValueError("objective length differs from the variable count")
        if self.eq_matrix.shape[1] != self.n_vars or self.eq_matrix.shape[0] != self.eq_rhs.shape[0]:
            raise ValueError("equality system has inconsistent dimensions")
        for b in self.blocks:
            n = b.size
            if b.constant.shape != (n, n) or b.coefficients.shape != (self.n_vars, n * n):
                raise ValueError(f"block {b.name!r} is dimensionally inconsistent")

    def objective_value(self, y: np.ndarray) -> float:
        return float(self.objective @ y + self.objective_constant)


class ProgramBuilder:
    """Incremental assembly of a :class:`ConicProgram`."""

    def __init__(self):
        self.n_vars = 0
        self._names: list[str] = []
        self._blocks: list[tuple[np.ndarray, list[tuple[np.ndarray, sp.spmatrix]], str]] = []
        self._eq: list[tuple[np.ndarray, sp.spmatrix]] = []
        self._eq_rhs: list[np.ndarray] = []
        self._obj: dict[int, float] = {}
        self._const = 0.0
        self.sense = "max"

    def add_variables(self, count: int, name: str = "y") -> np.ndarray:
        idx = np.arange(self.n_vars, self.n_vars + count)
        self.n_vars += count
        self._names += [f"{name}[{k}]" for k in range(count)]
        return idx

    def add_block(self, constant: np.ndarray, terms: Sequence[tuple[np.ndarray, sp.spmatrix]] = (), name: str = "") -> int:
        """``terms`` are ``(var_idx, rows)``: rows[k] is vec of the coefficient of var_idx[k]."""
        self._blocks.append((np.asarray(constant), list(terms), name))
        return len(self._blocks) - 1

    def add_block_terms(self, block: int, var_idx: np.ndarray, rows: sp.spmatrix) -> None:
        self._blocks[block][1].append((var_idx, rows))

    def add_equalities(self, var_idx: np.ndarray, matrix, rhs) -> None:
        mat = sp.csr_matrix(matrix)
        self._eq.append((np.asarray(var_idx), mat))
        self._eq_rhs.append(np.atleast_1d(np.asarray(rhs, dtype=float)))

    def set_objective(self, var_idx, coeffs, sense: str = "max", constant: float = 0.0) -> None:
        for j, v in zip(np.atleast_1d(var_idx), np.atleast_1d(coeffs)):
            self._obj[int(j)] = self._obj.get(int(j), 0.0) + float(v)
        self.sense = sense
        self._const = float(constant)

    def build(self) -> ConicProgram:
        n = self.n_vars
        blocks = []
        for const, terms, name in self._blocks:
            size = const.shape[0]
            complex_data = np.iscomplexobj(const) or any(np.iscomplexobj(r.data) for _, r in terms)
            dtype = complex if complex_data else float
            coo_rows, coo_cols, coo_vals = [], [], []
            for var_idx, rows in terms:
                r = sp.coo_matrix(rows)
                coo_rows.append(np.asarray(var_idx)[r.row])
                coo_cols.append(r.col)
                coo_vals.append(r.data.astype(dtype))
            if coo_rows:
                coef = sp.csr_matrix(
                    (np.concatenate(coo_vals), (np.concatenate(coo_rows), np.concatenate(coo_cols))),
                    shape=(n, size * size),
                )
            else:
                coef = sp.csr_matrix((n, size * size), dtype=dtype)
            coef.sum_duplicates()
            coef.sort_indices()
            blocks.append(PSDBlock(np.array(const, dtype=dtype), coef, name))
        rows, cols, vals, rhs = [], [], [], []
        offset = 0
        for (var_idx, mat), b in zip(self._eq, self._eq_rhs):
            coo = mat.tocoo()
            rows.append(coo.row + offset)
            cols.append(var_idx[coo.col])
            vals.append(coo.data)
            rhs.append(b)
            offset += mat.shape[0]
        if rows:
            eq = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(offset, n))
            eq.sum_duplicates()
            eq_rhs = np.concatenate(rhs)
        else:
            eq = sp.csr_matrix((0, n))
            eq_rhs = np.zeros(0)
        obj = np.zeros(n)
        for j, v in self._obj.items():
            obj[j] = v
        return ConicProgram(n, tuple(blocks), eq, eq_rhs, obj, self.sense, self._const, tuple(self._names))


def dense_rows(mats: Sequence[np.ndarray]) -> sp.csr_matrix:
    """Stack matrices as sparse vec rows."""
    return sp.csr_matrix(np.array([np.asarray(m).reshape(-1) for m in mats]))


@dataclass
class Tolerances:
    gap: float = 1e-7  # relative duality gap
    psd: float = 1e-8  # allowed negative eigenvalue of a block
    equality: float = 1e-8
    infeasibility: float = 1e-7  # residual of a normalized improving ray
    max_iter: int = 100


@dataclass
class SolveReport:
    status: str  # optimal | infeasible | unbounded | undecided
    primal_value: float
    dual_value: float
    gap: float
    y: np.ndarray
    block_min_eigs: list[float]
    eq_residual: float
    iterations: int
    wall_time: float
    dual_blocks: list[np.ndarray] = field(default_factory=list)
    eq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_residual: float = float("nan")
    message: str = ""
    certificate: dict = field(default_factory=dict)
    backend: str = "ipm"

    def summary(self) -> dict:
        return {
            "status": self.status,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "block_min_eigs": list(self.block_min_eigs),
            "eq_residual": self.eq_residual,
            "dual_residual": self.dual_residual,
            "iterations": self.iterations,
            "wall_time_s": self.wall_time,
            "message": self.message,
            "backend": self.backend,
        }
