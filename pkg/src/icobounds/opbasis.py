"""Product Hermitian bases and the subspaces cut out by trace-replace maps.

Each factor of dimension d gets the orthonormal Hermitian basis
``{I/sqrt(d)} u {traceless generalized Gell-Mann matrices}``.  A product basis
element is labelled by its *pattern*: the set of factors carrying a traceless
component.  Every trace-replace map ``[X]`` is diagonal in this basis (it keeps
an element iff the pattern avoids X), so any linear condition written as a
:class:`~icobounds.linalg.TraceReplacePoly` acts on a pattern class as
multiplication by a scalar.  Subspaces defined by such conditions are therefore
unions of pattern classes, and the basis never has to be found by a dense
nullspace computation.  :func:`nullspace_dimension_dense` still does it the
slow way for cross-checks on small shapes.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .linalg import SpaceShape, TraceReplacePoly, trace_replace_array

PATTERN_TOL = 1e-9


@lru_cache(maxsize=None)
def factor_basis(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal Hermitian basis of d x d matrices.

    Returns ``(mats, imaginary)`` where ``mats[0] = I/sqrt(d)`` and
    ``imaginary[k]`` flags the purely imaginary (antisymmetric) elements.
    """
    mats = [np.eye(d, dtype=complex) / math.sqrt(d)]
    imag = [False]
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1 / math.sqrt(2)
            a = np.zeros((d, d), dtype=complex)
            a[j, k] = -1j / math.sqrt(2)
            a[k, j] = 1j / math.sqrt(2)
            mats += [s, a]
            imag += [False, True]
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag / math.sqrt(l * (l + 1))).astype(complex))
        imag.append(False)
    out = np.array(mats)
    out.setflags(write=False)
    flags = np.array(imag)
    flags.setflags(write=False)
    return out, flags


def all_patterns(shape: SpaceShape) -> list[frozenset]:
    labels = shape.labels
    return [frozenset(c) for r in range(len(labels) + 1) for c in itertools.combinations(labels, r)]


def pattern_class_dim(shape: SpaceShape, pattern: Iterable[str]) -> int:
    return math.prod(shape.dims[shape.index(lab)] ** 2 - 1 for lab in pattern)


def patterns_from_polys(shape: SpaceShape, polys: Sequence[TraceReplacePoly], tol: float = PATTERN_TOL) -> list[frozenset]:
    """Patterns annihilated by every polynomial (the common nullspace)."""
    keep = []
    for pat in all_patterns(shape):
        if pattern_class_dim(shape, pat) == 0:
            continue
        values = [p.pattern_value(pat) for p in polys]
        scale = max([1.0] + [abs(c) for p in polys for c in p.terms.values()])
        if all(abs(v) <= tol * scale for v in values):
            keep.append(pat)
    return keep


@lru_cache(maxsize=64)
def _vec_permutation(dims: tuple[int, ...]) -> np.ndarray:
    """Map from Kronecker-of-vec index to row-major vec index of the product."""
    k = len(dims)
    total = math.prod(dims)
    # kron index digits: (r_0, c_0, r_1, c_1, ...) each pair base d_f
    grid = np.indices(tuple(d for d in dims for _ in range(2))).reshape(2 * k, -1)
    rows = np.zeros(grid.shape[1], dtype=np.int64)
    cols = np.zeros(grid.shape[1], dtype=np.int64)
    for f, d in enumerate(dims):
        rows = rows * d + grid[2 * f]
        cols = cols * d + grid[2 * f + 1]
    return rows * total + cols


@lru_cache(maxsize=None)
def _factor_vec_matrix(d: int) -> tuple[sp.csr_matrix, np.ndarray]:
    mats, imag = factor_basis(d)
    return sp.csr_matrix(mats.reshape(len(mats), d * d)), np.asarray(imag, dtype=np.int64)


class PatternSpace:
    """Real span of all product basis elements whose pattern is accepted.

    ``real_only=True`` restricts to real symmetric elements (even number of
    antisymmetric factors); optimizing a real objective over a real-closed
    feasible set loses nothing by this restriction.
    """

    def __init__(self, shape: SpaceShape, patterns: Iterable[Iterable[str]]):
        self.shape = shape
        pats = {frozenset(p) for p in patterns}
        for p in pats:
            shape.indices(p)  # label check
        order = {lab: i for i, lab in enumerate(shape.labels)}
        self.patterns = tuple(sorted(pats, key=lambda p: (len(p), sorted(order[l] for l in p))))

    def __contains__(self, pattern) -> bool:
        return frozenset(pattern) in set(self.patterns)

    def dimension(self, real_only: bool = False) -> int:
        if not real_only:
            return sum(pattern_class_dim(self.shape, p) for p in self.patterns)
        return int(self.basis(real_only=True).shape[0])

    def projector_poly(self) -> TraceReplacePoly:
        """Orthogonal projector onto the space, as a trace-replace polynomial."""
        total = TraceReplacePoly.zero()
        one = TraceReplacePoly.one()
        for pat in self.patterns:
            term = one
            for lab in self.shape.labels:
                term = term * ((one - TraceReplacePoly.of(lab)) if lab in pat else TraceReplacePoly.of(lab))
            total = total + term
        return total

    def project(self, mat: np.ndarray) -> np.ndarray:
        return self.projector_poly().apply_array(np.asarray(mat, dtype=complex), self.shape)

    def basis(self, real_only: bool = False) -> sp.csr_matrix:
        """Sparse matrix whose rows are row-major ``vec`` of orthonormal elements."""
        return _pattern_basis(self.shape.dims, self.shape.labels, self.patterns, real_only)

    def elements(self, real_only: bool = False) -> Iterable[np.ndarray]:
        b = self.basis(real_only)
        n = self.shape.dim
        for k in range(b.shape[0]):
            yield b.getrow(k).toarray().reshape(n, n)

    def coordinates(self, mat: np.ndarray, real_only: bool = False) -> np.ndarray:
        """``<B_k, mat>`` for each basis element (real part)."""
        b = self.basis(real_only)
        return np.real(b.conj() @ np.asarray(mat, dtype=complex).reshape(-1))


@lru_cache(maxsize=32)
def _pattern_basis(dims: tuple[int, ...], labels: tuple[str, ...], patterns: tuple[frozenset, ...], real_only: bool) -> sp.csr_matrix:
    blocks = []
    for pat in patterns:
        mat = None
        odd = None
        for lab, d in zip(labels, dims):
            vecs, imag = _factor_vec_matrix(d)
            if lab in pat:
                part, flags = vecs[1:], imag[1:]
            else:
                part, flags = vecs[:1], imag[:1]
            mat = part if mat is None else sp.kron(mat, part, format="csr")
            odd = flags if odd is None else np.add.outer(odd, flags).reshape(-1)
        if mat is None:
            continue
        if real_only:
            rows = np.flatnonzero(odd % 2 == 0)
            mat = mat[rows]
        blocks.append(mat)
    total = math.prod(dims)
    if not blocks:
        return sp.csr_matrix((0, total * total), dtype=float if real_only else complex)
    stacked = sp.vstack(blocks, format="coo")
    perm = _vec_permutation(dims)
    out = sp.csr_matrix((stacked.data, (stacked.row, perm[stacked.col])), shape=stacked.shape)
    if real_only:
        out = sp.csr_matrix(out.real)
    out.sort_indices()
    return out


def hermitian_basis_dense(dim: int) -> np.ndarray:
    """Unstructured orthonormal Hermitian basis of dim x dim matrices."""
    mats, _ = factor_basis(dim)
    return np.array(mats)


def nullspace_dimension_dense(shape: SpaceShape, polys: Sequence[TraceReplacePoly], rel_tol: float = 1e-9) -> int:
    """Nullity of the stacked linear maps, by SVD over a full Hermitian basis.

    Independent of the pattern argument; only sensible for small shapes.
    """
    basis = hermitian_basis_dense(shape.dim)
    cols = []
    for b in basis:
        images = [p.apply_array(b, shape) for p in polys]
        v = np.concatenate([im.reshape(-1) for im in images]) if images else np.zeros(0)
        cols.append(np.concatenate([v.real, v.imag]))
    mat = np.array(cols).T
    if mat.size == 0:
        return len(basis)
    s = np.linalg.svd(mat, compute_uv=False)
    rank = int(np.sum(s > rel_tol * max(s[0], 1e-300))) if s.size else 0
    return len(basis) - rank


def trace_replace_residual(mat: np.ndarray, shape: SpaceShape, subset: Iterable[str]) -> np.ndarray:
    return trace_replace_array(mat, shape.dims, shape.indices(list(subset)))
