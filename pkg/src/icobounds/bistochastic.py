"""Supermaps on bistochastic channels, in quantum and classical form.

Operators are ordered ``(A_in, A_out, B_in, B_out[, C_in, C_out])``.  A
classical supermap is a nonnegative table ``S[i, j, k, l]`` with ``i, j``
Alice's input and output and ``k, l`` Bob's; its quantum form is the
diagonal operator with those entries.

Classical instruments are arrays ``q[x, a, s_out, s_in]``.  Contracting a
supermap with a pair of instruments gives

    p(a1, a2 | x1, x2) = sum_{ijkl} S[i, j, k, l] qA[x1, a1, j, i] qB[x2, a2, l, k].
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInstrumentError, ShapeError
from .linalg import LabeledOperator, TraceReplacePoly, min_eigenvalue, trace_replace_poly
from .scenario import ConditionalDistribution, Scenario

SUPERMAP_TOL = 1e-9


# ---------------------------------------------------------------------------
# quantum admissibility


@dataclass(frozen=True)
class BistochasticSupermapOperator:
    """Hermitian operator on the two parties' (and optionally a global) systems."""

    matrix: np.ndarray
    d_a: int
    d_b: int
    d_c_in: int = 1
    d_c_out: int = 1

    @property
    def factors(self) -> list[tuple[str, int]]:
        out = [("A_in", self.d_a), ("A_out", self.d_a), ("B_in", self.d_b), ("B_out", self.d_b)]
        if self.d_c_in * self.d_c_out > 1:
            out += [("C_in", self.d_c_in), ("C_out", self.d_c_out)]
        return out

    @property
    def operator(self) -> LabeledOperator:
        return LabeledOperator(self.factors, self.matrix)


def _one_minus(*labels: str) -> TraceReplacePoly:
    poly = TraceReplacePoly.one()
    for lab in labels:
        poly = poly * (TraceReplacePoly.one() - TraceReplacePoly.of(lab))
    return poly


def supermap_constraint_polys(with_global: bool) -> dict[str, TraceReplacePoly]:
    """Trace-replace polynomials that must annihilate an admissible supermap."""
    t = TraceReplacePoly.of
    if not with_global:
        return {
            "A_free_B_traced": _one_minus("A_in", "A_out") * t("B_in", "B_out"),
            "B_free_A_traced": _one_minus("B_in", "B_out") * t("A_in", "A_out"),
            "both_free": _one_minus("A_in", "A_out", "B_in", "B_out"),
        }
    return {
        "global_input": t("A_in", "A_out", "B_in", "B_out", "C_out") * _one_minus("C_in"),
        "A_free_B_traced": _one_minus("A_in", "A_out") * t("B_in", "B_out", "C_out"),
        "B_free_A_traced": _one_minus("B_in", "B_out") * t("A_in", "A_out", "C_out"),
        "both_free": _one_minus("A_in", "A_out", "B_in", "B_out") * t("C_out"),
    }


@dataclass
class AdmissibilityReport:
    admissible: bool
    min_eigenvalue: float
    trace: float
    expected_trace: float
    residuals: dict[str, float]
    failed: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "admissible": self.admissible,
            "min_eigenvalue": self.min_eigenvalue,
            "trace": self.trace,
            "expected_trace": self.expected_trace,
            "residuals": self.residuals,
            "failed": self.failed,
        }


def check_bistochastic_supermap(s, dims: Sequence[int], tol: float = SUPERMAP_TOL) -> AdmissibilityReport:
    """Check positivity and the trace-replace conditions, reporting one residual per condition.

    ``dims`` is ``(d_A, d_B)`` or ``(d_A, d_B, d_C_in, d_C_out)``.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) not in (2, 4):
        raise ShapeError("dims must be (d_A, d_B) or (d_A, d_B, d_C_in, d_C_out)")
    if isinstance(s, BistochasticSupermapOperator):
        s = s.matrix
    mat = np.asarray(s)
    op = BistochasticSupermapOperator(mat, *dims)
    expected_dim = math.prod(d for _, d in op.factors)
    if mat.shape != (expected_dim, expected_dim):
        raise ShapeError(f"operator of shape {mat.shape} does not match dims {dims} (expected {expected_dim})")
    labeled = op.operator
    with_global = len(op.factors) == 6
    residuals = {}
    for name, poly in supermap_constraint_polys(with_global).items():
        residuals[name] = float(np.max(np.abs(trace_replace_poly(labeled, poly).matrix)))
    d_a, d_b = dims[0], dims[1]
    d_c_in = dims[2] if len(dims) == 4 else 1
    expected_trace = float(d_a * d_b * d_c_in)
    tr = float(np.trace(mat).real)
    min_eig = min_eigenvalue(mat)
    failed = [name for name, r in residuals.items() if r > tol]
    if min_eig < -tol:
        failed.insert(0, "positivity")
    if abs(tr - expected_trace) > tol * max(1.0, expected_trace):
        failed.insert(0, "trace")
    return AdmissibilityReport(not failed, min_eig, tr, expected_trace, residuals, failed)


# ---------------------------------------------------------------------------
# classical supermaps and instruments


@dataclass(frozen=True)
class ClassicalSupermap:
    table: np.ndarray  # S[i, j, k, l]
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 4:
            raise ShapeError("classical supermap tables have four indices")
        object.__setattr__(self, "table", t)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return tuple(self.table.shape)

    @property
    def support(self) -> list[tuple[int, int, int, int]]:
        return [tuple(int(v) for v in idx) for idx in zip(*np.nonzero(self.table))]

    def as_operator(self) -> BistochasticSupermapOperator:
        d = self.dims
        if d[0] != d[1] or d[2] != d[3]:
            raise ShapeError("bistochastic supermaps need matching input and output dimensions")
        return BistochasticSupermapOperator(np.diag(self.table.reshape(-1)), d[0], d[2])

    def key(self) -> tuple:
        return tuple(sorted(self.support)) if np.all(np.isin(self.table, (0.0, 1.0))) else tuple(self.table.reshape(-1))

    def to_json(self) -> dict:
        return {"dims": list(self.dims), "support": [list(s) for s in self.support], "label": self.label}


def _avg(t: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    return t.mean(axis=tuple(axes), keepdims=True) if axes else t


def classical_constraint_residuals(table: np.ndarray) -> dict[str, float]:
    """Diagonal form of the trace-replace conditions, written with index averages."""
    t = np.asarray(table, dtype=float)

    def free(x: np.ndarray, axes: tuple[int, int]) -> np.ndarray:
        # (1 - [u])(1 - [v]) x = x - [u]x - [v]x + [uv]x
        u, v = axes
        return x - _avg(x, [u]) - _avg(x, [v]) + _avg(x, [u, v])

    out = {
        "A_free_B_traced": free(_avg(t, [2, 3]), (0, 1)),
        "B_free_A_traced": free(_avg(t, [0, 1]), (2, 3)),
        "both_free": free(free(t, (0, 1)), (2, 3)),
    }
    return {k: float(np.max(np.abs(v))) for k, v in out.items()}


def parity_class_sums(table: np.ndarray) -> np.ndarray:
    """``sums[p, q]`` over entries with ``i xor j = p`` and ``k xor l = q`` (bit case)."""
    t = np.asarray(table, dtype=float)
    if t.shape != (2, 2, 2, 2):
        raise ShapeError("parity classes are defined for bits")
    sums = np.zeros((2, 2))
    for i, j, k, l in itertools.product(range(2), repeat=4):
        sums[i ^ j, k ^ l] += t[i, j, k, l]
    return sums


@dataclass
class ClassicalReport:
    admissible: bool
    min_entry: float
    total: float
    expected_total: float
    residuals: dict[str, float]
    parity_sums: np.ndarray | None
    failed: list[str]


def check_classical_supermap(s: ClassicalSupermap | np.ndarray, tol: float = SUPERMAP_TOL) -> ClassicalReport:
    t = s.table if isinstance(s, ClassicalSupermap) else np.asarray(s, dtype=float)
    d_a_in, d_a_out, d_b_in, d_b_out = t.shape
    if d_a_in != d_a_out or d_b_in != d_b_out:
        raise ShapeError("bistochastic supermaps need matching input and output dimensions")
    residuals = classical_constraint_residuals(t)
    expected = float(d_a_in * d_b_in)
    failed = [k for k, v in residuals.items() if v > tol]
    if t.min() < -tol:
        failed.insert(0, "nonnegativity")
    if abs(t.sum() - expected) > tol * expected:
        failed.insert(0, "total")
    parity = None
    if t.shape == (2, 2, 2, 2):
        parity = parity_class_sums(t)
        if np.max(np.abs(parity - 1.0)) > tol:
            failed.append("parity_classes")
    return ClassicalReport(not failed, float(t.min()), float(t.sum()), expected, residuals, parity, failed)


@dataclass(frozen=True)
class ClassicalBistochasticInstrument:
    q: np.ndarray  # q[x, a, s_out, s_in]

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 4 or q.shape[2] != q.shape[3]:
            raise InvalidInstrumentError("instrument arrays are q[x, a, s_out, s_in] with square channel part")
        if q.min() < -1e-12:
            raise InvalidInstrumentError("instrument entries must be nonnegative")
        chan = q.sum(axis=1)
        if np.max(np.abs(chan.sum(axis=1) - 1)) > 1e-10 or np.max(np.abs(chan.sum(axis=2) - 1)) > 1e-10:
            raise InvalidInstrumentError("summing over outcomes must give a doubly stochastic channel for every setting")
        object.__setattr__(self, "q", q)

    @property
    def settings(self) -> int:
        return self.q.shape[0]

    @property
    def outcomes(self) -> int:
        return self.q.shape[1]

    @property
    def dim(self) -> int:
        return self.q.shape[2]


def deterministic_instrument(update: Callable[[int, int], int], outcome: Callable[[int, int, int], int], settings: int, outcomes: int, dim: int) -> ClassicalBistochasticInstrument:
    """``s_out = update(s_in, x)`` and ``a = outcome(s_in, s_out, x)``; update must permute."""
    q = np.zeros((settings, outcomes, dim, dim))
    for x, s in itertools.product(range(settings), range(dim)):
        s_out = update(s, x)
        q[x, outcome(s, s_out, x), s_out, s] = 1.0
    return ClassicalBistochasticInstrument(q)


def simulate(s: ClassicalSupermap, q_a: ClassicalBistochasticInstrument, q_b: ClassicalBistochasticInstrument, check: bool = True) -> ConditionalDistribution:
    d = s.dims
    if (q_a.dim, q_a.dim, q_b.dim, q_b.dim) != d:
        raise ShapeError(f"instrument dimensions ({q_a.dim}, {q_b.dim}) do not match supermap dims {d}")
    if check:
        rep = check_classical_supermap(s)
        if not rep.admissible:
            raise ValueError(f"supermap is not admissible: {rep.failed}")
    p = np.einsum("ijkl,xaji,yblk->abxy", s.table, q_a.q, q_b.q)
    return ConditionalDistribution(Scenario((q_a.settings, q_b.settings), (q_a.outcomes, q_b.outcomes)), p)


# ---------------------------------------------------------------------------
# named supermaps and strategies


def gyni_supermap() -> ClassicalSupermap:
    """``s1 = s1' xor s2'`` and ``s2 = s1' xor s2'``."""
    t = np.zeros((2, 2, 2, 2))
    for j, l in itertools.product(range(2), repeat=2):
        t[j ^ l, j, j ^ l, l] = 1.0
    return ClassicalSupermap(t, "gyni")


def flip_instrument() -> ClassicalBistochasticInstrument:
    """Flip the bit when the setting is 1; the outcome is the outgoing bit."""
    return deterministic_instrument(lambda s, x: s ^ x, lambda s, so, x: so, 2, 2, 2)


def ternary_supermap(n: int) -> ClassicalSupermap:
    """``s1 = (s1' + s2') mod n`` and ``s2 = (s1' - s2') mod n``."""
    t = np.zeros((n, n, n, n))
    for j, l in itertools.product(range(n), repeat=2):
        t[(j + l) % n, j, (j - l) % n, l] = 1.0
    return ClassicalSupermap(t, f"ternary({n})")


def ternary_instruments(n: int) -> tuple[ClassicalBistochasticInstrument, ClassicalBistochasticInstrument]:
    alice = deterministic_instrument(lambda s, x: (s - x) % n, lambda s, so, x: so, n, n, n)
    bob = deterministic_instrument(lambda s, x: (x - s) % n, lambda s, so, x: so, n, n, n)
    return alice, bob


def _basis_proj(k: int, d: int) -> np.ndarray:
    out = np.zeros((d, d))
    out[k, k] = 1.0
    return out


def sxy_supermap(x: int, y: int, d: int) -> BistochasticSupermapOperator:
    """The shared-randomness supermap ``S_{x,y}`` in (A_in, A_out, B_in, B_out) order."""
    if d % 2:
        raise ValueError(f"d must be even, got {d}")
    if not (0 <= x < d and 0 <= y < d) or x == y:
        raise ValueError(f"need distinct x, y in [0, {d}), got {x}, {y}")
    px, py, eye = _basis_proj(x, d), _basis_proj(y, d), np.eye(d)
    rest = eye - px - py
    # built on (A_out, B_out, A_in, B_in)
    outs_same = np.kron(px, px) + np.kron(py, py)
    outs_cross = np.kron(px, py) + np.kron(py, px)
    mat = np.kron(np.kron(outs_same, eye - py), px)
    mat += np.kron(np.kron(outs_cross, py), eye - px)
    mat += np.kron(np.kron(np.kron(rest, rest), py), px)
    t = mat.reshape((d,) * 8).transpose(2, 0, 3, 1, 6, 4, 7, 5).reshape(d**4, d**4)
    return BistochasticSupermapOperator(t, d, d)


def diagonal_supermap(op: BistochasticSupermapOperator, tol: float = 1e-12) -> ClassicalSupermap:
    if np.max(np.abs(op.matrix - np.diag(np.diag(op.matrix)))) > tol:
        raise ValueError("operator is not diagonal")
    return ClassicalSupermap(np.real(np.diag(op.matrix)).reshape(op.d_a, op.d_a, op.d_b, op.d_b))


def strategy_22_instrument(functions: Sequence[Callable[[int, int], int]], outcomes: int = 2) -> ClassicalBistochasticInstrument:
    """Local instrument of the two-setting strategy for ``d = 2 * len(functions)``.

    On input ``s`` with setting ``x``: ``t = s // 2``, ``z = (x + s) % 2``,
    output ``2t + z`` and outcome ``functions[t](x, z)``.
    """
    d = 2 * len(functions)

    def update(s: int, x: int) -> int:
        return 2 * (s // 2) + (x + s) % 2

    def outcome(s: int, s_out: int, x: int) -> int:
        return int(functions[s // 2](x, (x + s) % 2))

    return deterministic_instrument(update, outcome, 2, outcomes, d)


def run_22_strategy(
    f1: Sequence[Callable[[int, int], int]],
    f2: Sequence[Callable[[int, int], int]],
    weights: Sequence[float] | None = None,
    outcomes: int = 2,
) -> ConditionalDistribution:
    """Mixture over ``t`` of the deterministic strategies built on ``S_{2t, 2t+1}``.

    ``f1[t](x1, x2)`` and ``f2[t](x2, x1)`` give the outcomes of round ``t``.
    """
    if len(f1) != len(f2) or not f1:
        raise ValueError("need the same positive number of functions for both parties")
    n = len(f1)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or w.min() < 0 or abs(w.sum() - 1) > 1e-12:
        raise ValueError("weights must be a probability vector with one entry per round")
    d = 2 * n
    qa = strategy_22_instrument(f1, outcomes)
    qb = strategy_22_instrument(f2, outcomes)
    table = np.zeros((outcomes, outcomes, 2, 2))
    for t in range(n):
        if w[t] == 0:
            continue
        s = diagonal_supermap(sxy_supermap(2 * t, 2 * t + 1, d))
        table += w[t] * simulate(s, qa, qb).table
    return ConditionalDistribution(Scenario((2, 2), (outcomes, outcomes)), table)


# ---------------------------------------------------------------------------
# the bit-case extreme points


class SupermapClass(enum.Enum):
    NO_SIGNALLING = "NoSignalling"
    UNIDIRECTIONAL_FIXED_TIME = "UnidirectionalFixedTime"
    UNIDIRECTIONAL_DYNAMICAL_TIME = "UnidirectionalDynamicalTime"
    ICOTD_FUNCTIONAL = "ICOTD-functional"
    ICOTD_NONSTOCHASTIC = "ICOTD-nonstochastic"


EXPECTED_CLASS_COUNTS = {
    SupermapClass.NO_SIGNALLING: 16,
    SupermapClass.UNIDIRECTIONAL_FIXED_TIME: 32,
    SupermapClass.UNIDIRECTIONAL_DYNAMICAL_TIME: 64,
    SupermapClass.ICOTD_FUNCTIONAL: 16,
    SupermapClass.ICOTD_NONSTOCHASTIC: 128,
}

_PARITY_ORDER = ((0, 0), (0, 1), (1, 0), (1, 1))


def _from_support(points: Sequence[tuple[int, int, int, int]], label: str = "") -> ClassicalSupermap:
    t = np.zeros((2, 2, 2, 2))
    for p in points:
        t[p] += 1.0
    return ClassicalSupermap(t, label)


def enumerate_extreme_points() -> list[ClassicalSupermap]:
    """One entry per parity class ``(i xor j, k xor l)``: 4^4 = 256 points."""
    out = []
    for choice in itertools.product(range(4), repeat=4):
        pts = []
        for (p, q), c in zip(_PARITY_ORDER, choice):
            j, l = c >> 1, c & 1
            pts.append((j ^ p, j, l ^ q, l))
        out.append(_from_support(pts, "".join(map(str, choice))))
    return out


def brute_force_extreme_points() -> list[tuple]:
    """All 0/1 tables with the four parity sums equal to one (independent check)."""
    found = []
    for bits in range(1 << 16):
        t = np.array([(bits >> b) & 1 for b in range(16)], dtype=float).reshape(2, 2, 2, 2)
        if np.array_equal(parity_class_sums(t), np.ones((2, 2))):
            found.append(tuple(sorted(tuple(int(v) for v in idx) for idx in zip(*np.nonzero(t)))))
    return found


def _bit_instruments_receiver():
    """Deterministic single-setting bit instruments: channel in {id, flip}, outcome g(s_in)."""
    for flip, g in itertools.product(range(2), range(4)):
        q = np.zeros((2, 2, 2))
        for s in range(2):
            q[(g >> s) & 1, s ^ flip, s] = 1.0
        yield q


def signals(s: ClassicalSupermap, sender: str) -> bool:
    """Can ``sender`` change the receiver's outcome statistics?

    For the sender only the channel part matters (outcomes are summed), so the
    two settings range over {id, flip}; the receiver ranges over every
    deterministic instrument for one setting.
    """
    t = s.table
    if sender == "B":
        t = t.transpose(2, 3, 0, 1)
    chans = [np.eye(2), np.eye(2)[::-1]]
    for q in _bit_instruments_receiver():
        marg = [np.einsum("ijkl,ji,akl->a", t, c, q) for c in chans]
        if np.max(np.abs(marg[0] - marg[1])) > 1e-12:
            return True
    return False


def is_functional(s: ClassicalSupermap) -> bool:
    """Support defines a function from outputs (j, l) to inputs (i, k)."""
    return len({(p[1], p[3]) for p in s.support}) == len(s.support)


def _swap_a(p):
    return (p[1], p[0], p[2], p[3])


def _swap_b(p):
    return (p[0], p[1], p[3], p[2])


def _swap_parties(p):
    return (p[2], p[3], p[0], p[1])


def _closure(supports: set, moves) -> set:
    out = set(supports)
    frontier = list(supports)
    while frontier:
        cur = frontier.pop()
        for mv in moves:
            nxt = tuple(sorted(mv(p) for p in cur))
            if nxt not in out:
                out.add(nxt)
                frontier.append(nxt)
    return out


def no_signalling_templates() -> set:
    """Constant preparations into each party's input, outputs discarded."""
    base = set()
    for c1, c2 in itertools.product(range(2), repeat=2):
        base.add(tuple(sorted((c1, j, c2, l) for j, l in itertools.product(range(2), repeat=2))))
    return _closure(base, [_swap_a, _swap_b])


def fixed_time_templates() -> set:
    """Constant into A's input, A's output (optionally flipped) into B's input, B's output discarded."""
    base = set()
    for c, f in itertools.product(range(2), repeat=2):
        base.add(tuple(sorted((c, j, j ^ f, l) for j, l in itertools.product(range(2), repeat=2))))
    return _closure(base, [_swap_a, _swap_b, _swap_parties])


def dynamical_time_templates() -> set:
    """A's output decides whether B runs forward (input fixed) or backward (output fixed)."""
    base = set()
    for c, j_fwd, c_fwd, c_bwd in itertools.product(range(2), repeat=4):
        pts = [(c, j_fwd, c_fwd, l) for l in range(2)] + [(c, 1 - j_fwd, k, c_bwd) for k in range(2)]
        base.add(tuple(sorted(pts)))
    return _closure(base, [_swap_a, _swap_b, _swap_parties])


def functional_icotd_templates() -> set:
    """``i = j xor l xor alpha`` and ``k = j xor l xor beta``, up to input/output interchange."""
    base = set()
    for a, b in itertools.product(range(2), repeat=2):
        base.add(tuple(sorted((j ^ l ^ a, j, j ^ l ^ b, l) for j, l in itertools.product(range(2), repeat=2))))
    return _closure(base, [_swap_a, _swap_b])


def classify_extreme_point(s: ClassicalSupermap) -> SupermapClass:
    key = tuple(sorted(s.support))
    a_to_b, b_to_a = signals(s, "A"), signals(s, "B")
    if not (a_to_b or b_to_a):
        return SupermapClass.NO_SIGNALLING
    if key in fixed_time_templates():
        return SupermapClass.UNIDIRECTIONAL_FIXED_TIME
    if key in dynamical_time_templates():
        return SupermapClass.UNIDIRECTIONAL_DYNAMICAL_TIME
    if key in functional_icotd_templates():
        return SupermapClass.ICOTD_FUNCTIONAL
    return SupermapClass.ICOTD_NONSTOCHASTIC


@dataclass
class ExtremePointRecord:
    supermap: ClassicalSupermap
    cls: SupermapClass
    signals_a_to_b: bool
    signals_b_to_a: bool
    functional: bool

    def to_json(self) -> dict:
        out = self.supermap.to_json()
        out.update(
            {
                "class": self.cls.value,
                "signals_a_to_b": self.signals_a_to_b,
                "signals_b_to_a": self.signals_b_to_a,
                "functional": self.functional,
            }
        )
        return out


def extreme_point_catalog() -> list[ExtremePointRecord]:
    return [
        ExtremePointRecord(p, classify_extreme_point(p), signals(p, "A"), signals(p, "B"), is_functional(p))
        for p in enumerate_extreme_points()
    ]


def class_histogram(records: Sequence[ExtremePointRecord] | None = None) -> dict[SupermapClass, int]:
    records = extreme_point_catalog() if records is None else records
    hist = {c: 0 for c in SupermapClass}
    for r in records:
        hist[r.cls] += 1
    return hist


def template_consistency() -> dict:
    """Cross-checks between the template families and the operational tests."""
    pts = {tuple(sorted(p.support)): p for p in enumerate_extreme_points()}
    ns = no_signalling_templates()
    fixed = fixed_time_templates()
    dyn = dynamical_time_templates()
    func = functional_icotd_templates()
    sig = {k: (signals(p, "A"), signals(p, "B")) for k, p in pts.items()}
    return {
        "template_sizes": {"no_signalling": len(ns), "fixed_time": len(fixed), "dynamical_time": len(dyn), "functional_icotd": len(func)},
        "templates_are_extreme_points": all(k in pts for k in ns | fixed | dyn | func),
        "families_disjoint": not (ns & fixed or ns & dyn or ns & func or fixed & dyn or fixed & func or dyn & func),
        "no_signalling_matches_test": ns == {k for k, v in sig.items() if not any(v)},
        "unidirectional_are_one_way": all(sig[k][0] != sig[k][1] for k in fixed | dyn),
        "functional_icotd_two_way": all(all(sig[k]) for k in func),
    }
