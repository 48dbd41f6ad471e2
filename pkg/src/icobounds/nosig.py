"""No-signalling channels, their affine hull and span, and process matrices.

A multipartite channel C (Choi form, inputs first inside each party) is
no-signalling when ``Tr_out C = I_in`` and, for every nonempty proper subset K
of parties, ``Tr_{out_K} C = I_{in_K}/d_{in_K} (x) Tr_{in_K out_K} C``.  In
trace-replace notation the homogeneous parts are ``[out] D = 0`` and
``([out_K] - [in_K out_K]) D = 0``, so all spaces here are unions of pattern
classes (see :mod:`icobounds.opbasis`).

Process matrices are the operators S with ``Tr[S^T C] = 1`` for every C in the
affine hull.  The constant part is ``I / prod(d_in)`` and the remaining
freedom is the orthogonal complement of the span of the affine hull.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInstrumentError, ShapeError
from .linalg import (
    LabeledOperator,
    SpaceShape,
    TraceReplacePoly,
    hermitian_drift,
    min_eigenvalue,
    ptrace_array,
    trace_replace_array,
)
from .opbasis import PatternSpace, all_patterns, patterns_from_polys
from .scenario import ConditionalDistribution, Scenario

MAX_TOTAL_DIM = 256
NOSIG_TOL = 1e-9


@dataclass(frozen=True)
class PartyFactors:
    inputs: tuple[tuple[str, int], ...]
    outputs: tuple[tuple[str, int], ...]

    @property
    def in_labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.inputs)

    @property
    def out_labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.outputs)

    @property
    def d_in(self) -> int:
        return math.prod(d for _, d in self.inputs)

    @property
    def d_out(self) -> int:
        return math.prod(d for _, d in self.outputs)

    @property
    def shape(self) -> SpaceShape:
        return SpaceShape(self.inputs + self.outputs)


class PartitionedShape:
    """Per-party input and output factors; the ambient space lists them party by party."""

    def __init__(self, parties: Iterable[PartyFactors | tuple]):
        ps = []
        for p in parties:
            if not isinstance(p, PartyFactors):
                ins, outs = p
                p = PartyFactors(tuple((str(l), int(d)) for l, d in ins), tuple((str(l), int(d)) for l, d in outs))
            ps.append(p)
        if not ps:
            raise ShapeError("need at least one party")
        self.parties = tuple(ps)
        self.space = SpaceShape(f for p in ps for f in p.inputs + p.outputs)  # raises on clashes
        if self.space.dim > MAX_TOTAL_DIM:
            raise ShapeError(f"total dimension {self.space.dim} exceeds the dense limit {MAX_TOTAL_DIM}")

    def __eq__(self, other) -> bool:
        return isinstance(other, PartitionedShape) and self.parties == other.parties

    def __hash__(self) -> int:
        return hash(self.parties)

    def __repr__(self) -> str:
        return f"PartitionedShape({[(p.inputs, p.outputs) for p in self.parties]})"

    @property
    def n_parties(self) -> int:
        return len(self.parties)

    def in_labels(self, subset: Iterable[int] | None = None) -> list[str]:
        idx = range(self.n_parties) if subset is None else subset
        return [l for i in idx for l in self.parties[i].in_labels]

    def out_labels(self, subset: Iterable[int] | None = None) -> list[str]:
        idx = range(self.n_parties) if subset is None else subset
        return [l for i in idx for l in self.parties[i].out_labels]

    @property
    def d_in(self) -> int:
        return math.prod(p.d_in for p in self.parties)

    @property
    def d_out(self) -> int:
        return math.prod(p.d_out for p in self.parties)

    def proper_subsets(self) -> list[tuple[int, ...]]:
        n = self.n_parties
        return [k for r in range(1, n) for k in itertools.combinations(range(n), r)]


# ---------------------------------------------------------------------------
# defining conditions


def nosig_linear_polys(shape: PartitionedShape) -> list[TraceReplacePoly]:
    """Homogeneous no-signalling conditions as trace-replace polynomials."""
    out_all = shape.out_labels()
    polys = [TraceReplacePoly.of(*out_all)]
    for k in shape.proper_subsets():
        outs, ins = shape.out_labels(k), shape.in_labels(k)
        polys.append(TraceReplacePoly.of(*outs) - TraceReplacePoly.of(*(ins + outs)))
    return polys


def nosig_subset_residual(mat: np.ndarray, shape: PartitionedShape, scale_tp: float | None = 1.0) -> float:
    """Largest violation of the defining partial-trace conditions.

    ``scale_tp`` is the required multiple of the identity in ``Tr_out C``;
    ``None`` means any multiple (span membership).
    """
    space = shape.space
    dims = space.dims
    mat = np.asarray(mat, dtype=complex)
    worst = 0.0
    tr_out = ptrace_array(mat, dims, space.indices(shape.out_labels()))
    d_in = shape.d_in
    t = np.trace(tr_out).real / d_in if scale_tp is None else scale_tp
    worst = max(worst, float(np.max(np.abs(tr_out - t * np.eye(d_in)))))
    for k in shape.proper_subsets():
        outs, ins = shape.out_labels(k), shape.in_labels(k)
        lhs = trace_replace_array(mat, dims, space.indices(outs))
        rhs = trace_replace_array(mat, dims, space.indices(ins + outs))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def _linear_patterns(shape: PartitionedShape) -> list[frozenset]:
    return patterns_from_polys(shape.space, nosig_linear_polys(shape))


def linear_patterns_closed_form(shape: PartitionedShape) -> list[frozenset]:
    """Same pattern set from the combinatorial rule, for cross-checking.

    A pattern T is a direction of the affine hull iff it touches some output
    and no party has a traceless input component without an output one.
    """
    outs = set(shape.out_labels())
    keep = []
    for pat in all_patterns(shape.space):
        if not pat or not (pat & outs):
            continue
        if shape.n_parties > 1 and any(pat & set(p.in_labels) and not pat & set(p.out_labels) for p in shape.parties):
            continue
        keep.append(pat)
    return keep


class AffineSpace:
    """``base + span(directions)`` with a pattern-structured direction space."""

    def __init__(self, shape: PartitionedShape, base: np.ndarray, directions: PatternSpace, name: str):
        self.shape = shape
        self.base = base
        self.directions = directions
        self.name = name

    @property
    def dimension(self) -> int:
        return self.directions.dimension()

    @property
    def base_operator(self) -> LabeledOperator:
        return LabeledOperator(self.shape.space, self.base, check=False)

    def distance(self, mat: np.ndarray) -> float:
        """Frobenius distance from ``mat`` to the affine space."""
        diff = np.asarray(mat, dtype=complex) - self.base
        return float(np.linalg.norm(diff - self.directions.project(diff)))

    def contains(self, mat, tol: float = NOSIG_TOL) -> bool:
        m = mat.matrix if isinstance(mat, LabeledOperator) else mat
        return self.distance(m) <= tol * max(1.0, float(np.linalg.norm(m)))

    def point(self, coords: np.ndarray, real_only: bool = False) -> np.ndarray:
        n = self.shape.space.dim
        return self.base + (np.asarray(coords) @ self.directions.basis(real_only)).reshape(n, n)


def nosig_affine(shape: PartitionedShape) -> AffineSpace:
    """Affine hull of no-signalling Choi operators.

    The base point is the Choi operator of the channel that discards every
    input and prepares the maximally mixed output.
    """
    base = np.eye(shape.space.dim, dtype=complex) / shape.d_out
    return AffineSpace(shape, base, PatternSpace(shape.space, _linear_patterns(shape)), "Aff(NoSig)")


def nosig_span(shape: PartitionedShape) -> PatternSpace:
    """Linear span of no-signalling Choi operators (affine directions plus identity)."""
    return PatternSpace(shape.space, [frozenset()] + _linear_patterns(shape))


def nosig_span_residual(mat: np.ndarray, shape: PartitionedShape) -> float:
    return nosig_subset_residual(mat, shape, scale_tp=None)


def is_nosig_channel(c: LabeledOperator | np.ndarray, shape: PartitionedShape, tol: float = 1e-8) -> bool:
    mat = c.matrix if isinstance(c, LabeledOperator) else np.asarray(c)
    if min_eigenvalue(mat) < -tol:
        return False
    return nosig_subset_residual(mat, shape) <= tol


# ---------------------------------------------------------------------------
# process matrices


class ProcessConstraints:
    """Linear conditions for S to be a process matrix: ``S = S0 + D``, D in ``free``.

    ``free`` is the orthogonal complement (within traceless operators) of the
    span of the affine hull.  Transposition maps each pattern class to itself,
    so the same description holds for ``S^T``.
    """

    def __init__(self, shape: PartitionedShape):
        self.shape = shape
        n = shape.space.dim
        self.base = np.eye(n, dtype=complex) / shape.d_in
        span = set(nosig_span(shape).patterns)
        self.free = PatternSpace(shape.space, [p for p in all_patterns(shape.space) if p and p not in span])
        self.span = nosig_span(shape)

    def residual(self, s: np.ndarray) -> float:
        """Max over the orthonormal span basis of ``|Tr[S^T B] - Tr[S0^T B]|``, plus normalization."""
        st = np.asarray(s, dtype=complex).T
        diff = st - self.base
        coords = self.span.coordinates(diff)
        return float(np.max(np.abs(coords))) if coords.size else 0.0

    def normalization(self, s: np.ndarray) -> float:
        """``Tr[S^T C0]`` with the base point of the affine hull (should be 1)."""
        return float(np.trace(np.asarray(s)).real / self.shape.d_out)

    def point(self, coords: np.ndarray, real_only: bool = False) -> np.ndarray:
        n = self.shape.space.dim
        return self.base + (np.asarray(coords) @ self.free.basis(real_only)).reshape(n, n)

    def to_triplets(self) -> dict:
        """Sparse constraint matrix ``Tr[S^T B_k] = r_k`` over the span basis.

        Row ``k`` pairs with the k-th orthonormal span element; the entries
        act on ``vec(S)`` (row-major) through ``Tr[S^T B] = sum_ij S_ij B_ij``.
        """
        basis = self.span.basis().tocoo()
        rhs = self.span.coordinates(self.base.T)
        return {
            "n_cols": int(basis.shape[1]),
            "rows": [[int(r), int(c), float(v.real), float(v.imag)] for r, c, v in zip(basis.row, basis.col, basis.data)],
            "rhs": [float(v) for v in rhs],
        }


def process_validity_constraints(shape: PartitionedShape) -> ProcessConstraints:
    return ProcessConstraints(shape)


class ProcessMatrix:
    """A verified process matrix over a partitioned shape."""

    def __init__(self, shape: PartitionedShape, operator: LabeledOperator | np.ndarray, tol: float = 1e-8):
        mat = operator.matrix if isinstance(operator, LabeledOperator) else np.asarray(operator, dtype=complex)
        self.shape = shape
        self.operator = LabeledOperator(shape.space, mat)
        report = process_report(shape, self.operator.matrix)
        if report["min_eigenvalue"] < -tol or report["dual_affine_residual"] > tol:
            raise ValueError(f"not a valid process matrix: {report}")
        self.report = report

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix


def process_report(shape: PartitionedShape, s: np.ndarray) -> dict:
    cons = ProcessConstraints(shape)
    return {
        "min_eigenvalue": min_eigenvalue(s),
        "dual_affine_residual": cons.residual(s),
        "normalization": cons.normalization(s),
    }


def is_valid_process(shape: PartitionedShape, s: np.ndarray, tol: float = 1e-8) -> bool:
    rep = process_report(shape, np.asarray(s))
    return rep["min_eigenvalue"] >= -tol and rep["dual_affine_residual"] <= tol


def identity_process(shape: PartitionedShape) -> ProcessMatrix:
    return ProcessMatrix(shape, np.eye(shape.space.dim) / shape.d_in)


# ---------------------------------------------------------------------------
# instruments and probabilities


def check_instrument(choi: Sequence[Sequence[np.ndarray]], party: PartyFactors, tol: float = 1e-8) -> None:
    """``choi[x][a]`` must be PSD and sum over ``a`` to a channel Choi operator."""
    d = party.shape.dim
    in_idx = list(range(len(party.inputs)))
    out_idx = list(range(len(party.inputs), len(party.inputs) + len(party.outputs)))
    dims = party.shape.dims
    for x, ops in enumerate(choi):
        total = np.zeros((d, d), dtype=complex)
        for a, m in enumerate(ops):
            m = np.asarray(m)
            if m.shape != (d, d):
                raise InvalidInstrumentError(f"setting {x} outcome {a}: shape {m.shape}, expected {(d, d)}")
            if hermitian_drift(m) > tol or min_eigenvalue(m) < -tol:
                raise InvalidInstrumentError(f"setting {x} outcome {a}: not positive semidefinite")
            total += m
        red = ptrace_array(total, dims, out_idx) if out_idx else total
        if in_idx and np.max(np.abs(red - np.eye(party.d_in))) > tol:
            raise InvalidInstrumentError(f"setting {x}: outcomes do not sum to a trace-preserving map")


def instrument_arrays(instruments) -> list[list[list[np.ndarray]]]:
    out = []
    for party in instruments:
        out.append([[op.matrix if isinstance(op, LabeledOperator) else np.asarray(op, dtype=complex) for op in setting] for setting in party])
    return out


def probability_from_process(
    s: ProcessMatrix | np.ndarray,
    instruments,
    shape: PartitionedShape | None = None,
    check: bool = True,
    tol: float = 1e-8,
) -> ConditionalDistribution:
    """``p(a|x) = Tr[S^T (x)_i M^(i)_{a_i|x_i}]``; ``instruments[i][x][a]`` are Choi operators."""
    if isinstance(s, ProcessMatrix):
        shape = s.shape
        smat = s.matrix
    else:
        if shape is None:
            raise ShapeError("shape required when passing a raw matrix")
        smat = np.asarray(s, dtype=complex)
    inst = instrument_arrays(instruments)
    if len(inst) != shape.n_parties:
        raise InvalidInstrumentError("one instrument per party required")
    if check:
        for ins, party in zip(inst, shape.parties):
            check_instrument(ins, party, tol)
    settings = tuple(len(ins) for ins in inst)
    outcomes = tuple(len(ins[0]) for ins in inst)
    if any(len(setting) != m for ins, m in zip(inst, outcomes) for setting in ins):
        raise InvalidInstrumentError("each setting must have the same number of outcomes")
    scenario = Scenario(settings, outcomes)
    table = np.zeros(scenario.table_shape)
    # Tr[S^T K] = sum_ij S_ij K_ij; contract one party at a time
    n = shape.n_parties
    dims_party = [p.shape.dim for p in shape.parties]
    t = smat.reshape(tuple(dims_party) * 2)
    for x in scenario.setting_tuples():
        for a in scenario.outcome_tuples():
            acc = t
            for i in range(n):
                m = inst[i][x[i]][a[i]]
                # contract row axis 0 and column axis (n - i) of the remaining tensor
                acc = np.tensordot(acc, m, axes=([0, n - i], [0, 1]))
            table[a + x] = float(np.real(acc))
    return ConditionalDistribution(scenario, np.clip(table, 0.0, None) if np.min(table) > -tol else table)


def operator_json(shape: PartitionedShape) -> str:
    return json.dumps([[list(p.inputs), list(p.outputs)] for p in shape.parties])
