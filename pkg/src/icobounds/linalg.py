"""Dense Hermitian operators on labeled tensor-product spaces.

Every operator carries a :class:`SpaceShape`, an ordered list of
``(label, dim)`` factors.  Matrix indices follow the Kronecker convention:
the first factor is the most significant digit.

Choi operators use ``Choi(K) = sum_ij |i><j| (x) K(|i><j|)`` with the input
factor first, so that ``|M>> = sum_j |j> (x) M|j>`` and the Choi operator of a
Kraus map is ``sum_i |K_i>><<K_i|``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import NotHermitianError, ShapeError

HERMITIAN_TOL = 1e-10

__all__ = [
    "SpaceShape",
    "LabeledOperator",
    "TraceReplacePoly",
    "tensor_product",
    "partial_trace",
    "trace_replace",
    "trace_replace_poly",
    "double_ket",
    "choi_from_kraus",
    "min_eigenvalue",
    "identity",
    "ket",
    "projector",
    "max_entangled",
    "operator_to_json",
    "operator_from_json",
]


@dataclass(frozen=True)
class SpaceShape:
    """Ordered tensor factors ``((label, dim), ...)``."""

    factors: tuple[tuple[str, int], ...]

    def __init__(self, factors: Iterable[tuple[str, int]]):
        facs = tuple((str(lab), int(d)) for lab, d in factors)
        labels = [lab for lab, _ in facs]
        if len(set(labels)) != len(labels):
            raise ShapeError(f"duplicate factor labels in {labels}")
        for lab, d in facs:
            if d < 1:
                raise ShapeError(f"factor {lab!r} has dimension {d} < 1")
        object.__setattr__(self, "factors", facs)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def __len__(self) -> int:
        return len(self.factors)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ShapeError(f"unknown factor label {label!r}; have {self.labels}") from None

    def indices(self, labels: Iterable[str]) -> list[int]:
        return [self.index(lab) for lab in labels]

    def dim_of(self, labels: Iterable[str]) -> int:
        return math.prod(self.dims[i] for i in self.indices(labels))

    def concat(self, other: "SpaceShape") -> "SpaceShape":
        return SpaceShape(self.factors + other.factors)

    def drop(self, labels: Iterable[str]) -> "SpaceShape":
        gone = set(self.indices(labels))
        return SpaceShape(f for i, f in enumerate(self.factors) if i not in gone)

    def to_json(self) -> list:
        return [[lab, d] for lab, d in self.factors]


# ---------------------------------------------------------------------------
# array-level kernels (no label bookkeeping)


def _permute(mat: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: new factor ``k`` is old factor ``perm[k]``."""
    k = len(dims)
    n = mat.shape[0]
    t = mat.reshape(tuple(dims) * 2)
    axes = list(perm) + [k + p for p in perm]
    return t.transpose(axes).reshape(n, n)


def ptrace_array(mat: np.ndarray, dims: Sequence[int], traced: Iterable[int]) -> np.ndarray:
    """Partial trace of a dense matrix over the factor positions ``traced``."""
    traced = sorted(set(traced))
    k = len(dims)
    if not traced:
        return mat
    keep = [i for i in range(k) if i not in traced]
    t = mat.reshape(tuple(dims) * 2)
    row = list(range(k))
    col = [k + i for i in range(k)]
    for i in traced:
        col[i] = row[i]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    d_keep = math.prod(dims[i] for i in keep)
    return np.einsum(t, row + col, out).reshape(d_keep, d_keep)


def trace_replace_array(mat: np.ndarray, dims: Sequence[int], traced: Iterable[int]) -> np.ndarray:
    """``Tr_X[mat] (x) I_X / d_X`` with the identity put back in place."""
    traced = sorted(set(traced))
    if not traced:
        return mat
    k = len(dims)
    keep = [i for i in range(k) if i not in traced]
    reduced = ptrace_array(mat, dims, traced)
    d_x = math.prod(dims[i] for i in traced)
    full = np.kron(reduced, np.eye(d_x) / d_x)
    order = keep + traced
    inverse = [order.index(i) for i in range(k)]
    new_dims = [dims[i] for i in order]
    return _permute(full, new_dims, inverse)


def hermitian_drift(mat: np.ndarray) -> float:
    return float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0


# ---------------------------------------------------------------------------


class LabeledOperator:
    """Immutable dense Hermitian matrix over a :class:`SpaceShape`.

    Construction symmetrizes ``(M + M^dagger)/2`` after checking that the
    drift is at most ``HERMITIAN_TOL`` relative to ``max(1, |M|_max)``.  Pass
    ``check=False`` to skip the check for arithmetic that is Hermitian by
    construction.
    """

    __slots__ = ("shape", "matrix")

    def __init__(self, shape: SpaceShape | Iterable[tuple[str, int]], matrix, *, check: bool = True):
        if not isinstance(shape, SpaceShape):
            shape = SpaceShape(shape)
        m = np.array(matrix, dtype=complex)
        if m.ndim == 0 and shape.dim == 1:
            m = m.reshape(1, 1)
        if m.shape != (shape.dim, shape.dim):
            raise ShapeError(f"matrix shape {m.shape} does not match space dimension {shape.dim}")
        if check:
            scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
            drift = hermitian_drift(m)
            if drift > HERMITIAN_TOL * scale:
                raise NotHermitianError(f"Hermiticity drift {drift:.3e} exceeds tolerance")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("LabeledOperator is immutable")

    # arithmetic -----------------------------------------------------------
    def _same_shape(self, other: "LabeledOperator") -> None:
        if other.shape != self.shape:
            raise ShapeError(f"shape mismatch: {self.shape.factors} vs {other.shape.factors}")

    def __add__(self, other: "LabeledOperator") -> "LabeledOperator":
        self._same_shape(other)
        return LabeledOperator(self.shape, self.matrix + other.matrix, check=False)

    def __sub__(self, other: "LabeledOperator") -> "LabeledOperator":
        self._same_shape(other)
        return LabeledOperator(self.shape, self.matrix - other.matrix, check=False)

    def __neg__(self) -> "LabeledOperator":
        return LabeledOperator(self.shape, -self.matrix, check=False)

    def __mul__(self, scalar: float) -> "LabeledOperator":
        s = float(np.real_if_close(scalar))
        return LabeledOperator(self.shape, s * self.matrix, check=False)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "LabeledOperator":
        return self * (1.0 / float(scalar))

    def __matmul__(self, other):
        return tensor_product(self, other)

    def __repr__(self) -> str:
        return f"LabeledOperator({list(self.shape.factors)})"

    # queries ----------------------------------------------------------------
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def inner(self, other: "LabeledOperator") -> float:
        """Hilbert-Schmidt inner product ``Tr(A B)`` for Hermitian A, B."""
        self._same_shape(other)
        return float(np.vdot(self.matrix, other.matrix).real)

    def transpose(self) -> "LabeledOperator":
        return LabeledOperator(self.shape, self.matrix.T, check=False)

    def permuted(self, labels: Sequence[str]) -> "LabeledOperator":
        """Same operator with its factors reordered to ``labels``."""
        perm = self.shape.indices(labels)
        if sorted(perm) != list(range(len(self.shape))):
            raise ShapeError("permutation must mention every factor once")
        new_shape = SpaceShape(self.shape.factors[p] for p in perm)
        return LabeledOperator(new_shape, _permute(self.matrix, self.shape.dims, perm), check=False)

    def allclose(self, other: "LabeledOperator", atol: float = 1e-9) -> bool:
        return self.shape == other.shape and bool(np.allclose(self.matrix, other.matrix, atol=atol, rtol=0))


def identity(shape: SpaceShape | Iterable[tuple[str, int]]) -> LabeledOperator:
    shape = shape if isinstance(shape, SpaceShape) else SpaceShape(shape)
    return LabeledOperator(shape, np.eye(shape.dim), check=False)


def ket(index: int, dim: int) -> np.ndarray:
    if not 0 <= index < dim:
        raise ShapeError(f"basis index {index} out of range for dimension {dim}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec, shape: SpaceShape | Iterable[tuple[str, int]]) -> LabeledOperator:
    """``|v><v|`` on ``shape``."""
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return LabeledOperator(shape, np.outer(v, v.conj()), check=False)


def max_entangled(dim: int) -> np.ndarray:
    """``sum_j |j>|j> / sqrt(dim)``."""
    return double_ket(np.eye(dim)) / math.sqrt(dim)


def tensor_product(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    shape = a.shape.concat(b.shape)  # raises on duplicate labels
    return LabeledOperator(shape, np.kron(a.matrix, b.matrix), check=False)


def tensor_all(ops: Sequence[LabeledOperator]) -> LabeledOperator:
    out = ops[0]
    for op in ops[1:]:
        out = tensor_product(out, op)
    return out


def partial_trace(op: LabeledOperator, subset: Iterable[str]) -> LabeledOperator:
    """Trace out the factors named in ``subset``.

    Tracing every factor gives a 1x1 operator on the empty shape.
    """
    subset = list(subset)
    idx = op.shape.indices(subset)
    mat = ptrace_array(op.matrix, op.shape.dims, idx)
    return LabeledOperator(op.shape.drop(subset), mat, check=False)


def trace_replace(op: LabeledOperator, subset: Iterable[str]) -> LabeledOperator:
    """``Tr_X[op] (x) I_X/d_X`` reinserted at the original factor positions."""
    idx = op.shape.indices(list(subset))
    mat = trace_replace_array(op.matrix, op.shape.dims, idx)
    return LabeledOperator(op.shape, mat, check=False)


class TraceReplacePoly:
    """Real linear combination of trace-replace maps, keyed by label subsets.

    Polynomials multiply by subset union, because ``[X][Y] = [X u Y]``.
    ``TraceReplacePoly.one()`` is the identity map and
    ``TraceReplacePoly.of("A_in")`` is ``[A_in]``, so ``(1 - X)(1 - Y)`` is
    written ``(one - of("X")) * (one - of("Y"))``.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[frozenset, float] | Iterable[tuple[float, Iterable[str]]] = ()):
        acc: dict[frozenset, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else ((frozenset(s), c) for c, s in terms)
        for subset, coef in items:
            key = frozenset(subset)
            acc[key] = acc.get(key, 0.0) + float(coef)
        self.terms = {k: v for k, v in acc.items() if v != 0.0}

    @classmethod
    def one(cls) -> "TraceReplacePoly":
        return cls({frozenset(): 1.0})

    @classmethod
    def of(cls, *labels: str) -> "TraceReplacePoly":
        return cls({frozenset(labels): 1.0})

    @classmethod
    def zero(cls) -> "TraceReplacePoly":
        return cls({})

    def labels(self) -> set[str]:
        out: set[str] = set()
        for s in self.terms:
            out |= s
        return out

    def __add__(self, other: "TraceReplacePoly") -> "TraceReplacePoly":
        merged = dict(self.terms)
        for k, v in other.terms.items():
            merged[k] = merged.get(k, 0.0) + v
        return TraceReplacePoly(merged)

    def __neg__(self) -> "TraceReplacePoly":
        return TraceReplacePoly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "TraceReplacePoly") -> "TraceReplacePoly":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, TraceReplacePoly):
            acc: dict[frozenset, float] = {}
            for (s1, c1), (s2, c2) in itertools.product(self.terms.items(), other.terms.items()):
                key = s1 | s2
                acc[key] = acc.get(key, 0.0) + c1 * c2
            return TraceReplacePoly(acc)
        return TraceReplacePoly({k: v * float(other) for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, TraceReplacePoly) and self.terms == other.terms

    def __repr__(self) -> str:
        parts = [f"{v:+g}[{','.join(sorted(k)) or '1'}]" for k, v in sorted(self.terms.items(), key=lambda kv: sorted(kv[0]))]
        return "TraceReplacePoly(" + " ".join(parts) + ")"

    def pattern_value(self, pattern: Iterable[str]) -> float:
        """Eigenvalue on operators whose traceless content sits exactly on ``pattern``.

        ``[X]`` keeps a product basis element iff its traceless factors avoid X.
        """
        pat = set(pattern)
        return sum(c for s, c in self.terms.items() if not (s & pat))

    def apply_array(self, mat: np.ndarray, shape: SpaceShape) -> np.ndarray:
        out = np.zeros_like(mat, dtype=complex)
        for subset, coef in self.terms.items():
            out += coef * trace_replace_array(mat, shape.dims, shape.indices(subset))
        return out


def trace_replace_poly(op: LabeledOperator, poly: TraceReplacePoly) -> LabeledOperator:
    unknown = poly.labels() - set(op.shape.labels)
    if unknown:
        raise ShapeError(f"polynomial references unknown labels {sorted(unknown)}")
    return LabeledOperator(op.shape, poly.apply_array(op.matrix, op.shape), check=False)


def double_ket(m) -> np.ndarray:
    """``|M>> = sum_j |j> (x) M|j>``; entry ``i*d + k`` equals ``M[k, i]``.

    Rectangular ``M`` (d_out x d_in) is allowed; the input index comes first.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ShapeError("double_ket expects a matrix")
    return m.T.reshape(-1).copy()


def choi_from_kraus(kraus: Sequence, in_shape, out_shape) -> LabeledOperator:
    in_shape = in_shape if isinstance(in_shape, SpaceShape) else SpaceShape(in_shape)
    out_shape = out_shape if isinstance(out_shape, SpaceShape) else SpaceShape(out_shape)
    shape = in_shape.concat(out_shape)
    total = np.zeros((shape.dim, shape.dim), dtype=complex)
    for k in kraus:
        k = np.asarray(k, dtype=complex)
        if k.shape != (out_shape.dim, in_shape.dim):
            raise ShapeError(f"Kraus operator of shape {k.shape}, expected {(out_shape.dim, in_shape.dim)}")
        v = double_ket(k)
        total += np.outer(v, v.conj())
    return LabeledOperator(shape, total, check=False)


def min_eigenvalue(op: LabeledOperator | np.ndarray) -> float:
    mat = op.matrix if isinstance(op, LabeledOperator) else np.asarray(op)
    scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
    if hermitian_drift(mat) > HERMITIAN_TOL * scale:
        raise NotHermitianError("min_eigenvalue needs a Hermitian operator")
    herm = 0.5 * (mat + mat.conj().T)
    if np.all(np.isreal(herm)):
        herm = herm.real
    return float(scipy.linalg.eigvalsh(herm, subset_by_index=[0, 0])[0])


# ---------------------------------------------------------------------------
# JSON


def operator_to_json(op: LabeledOperator) -> dict:
    flat = op.matrix.reshape(-1)
    return {
        "factors": op.shape.to_json(),
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }


def operator_from_json(data: Mapping | str) -> LabeledOperator:
    if isinstance(data, str):
        data = json.loads(data)
    shape = SpaceShape((lab, d) for lab, d in data["factors"])
    entries = np.array(data["entries"], dtype=float)
    if entries.shape != (shape.dim * shape.dim, 2):
        raise ShapeError("entry count does not match the factor dimensions")
    mat = (entries[:, 0] + 1j * entries[:, 1]).reshape(shape.dim, shape.dim)
    return LabeledOperator(shape, mat)
