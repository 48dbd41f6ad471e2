"""JSON interchange for :class:`ConicProgram` with bit-exact round trips.

All sparse data are stored as coordinate triplets.  Floats go through
``json`` (shortest repr), which reproduces every finite double exactly.
Complex entries are split into ``re`` and ``im`` lists.
"""

from __future__ import annotations

import json
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .program import ConicProgram, PSDBlock

FORMAT = "icobounds-lmi"
VERSION = 1


def _triplets(mat: sp.spmatrix, complex_data: bool) -> dict:
    coo = sp.coo_matrix(mat)
    coo.sum_duplicates()  # also sorts, which makes the text canonical
    k = np.lexsort((coo.col, coo.row))
    data = coo.data[k].astype(complex if complex_data else float)
    out = {"rows": coo.row[k].tolist(), "cols": coo.col[k].tolist(), "re": np.real(data).tolist()}
    if complex_data:
        out["im"] = np.imag(data).tolist()
    return out


def _from_triplets(data: Mapping, shape: tuple[int, int], complex_data: bool) -> sp.csr_matrix:
    vals = np.asarray(data["re"], dtype=float)
    if complex_data:
        vals = vals + 1j * np.asarray(data["im"], dtype=float)
    rows = np.asarray(data["rows"], dtype=np.int64)
    cols = np.asarray(data["cols"], dtype=np.int64)
    # build from explicit csr arrays so stored entries (including explicit zeros) keep their order
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(shape[0] + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return sp.csr_matrix((vals, cols, np.cumsum(indptr)), shape=shape)


def program_to_dict(program: ConicProgram) -> dict:
    blocks = []
    for b in program.blocks:
        cplx = bool(np.iscomplexobj(b.constant) or np.iscomplexobj(b.coefficients.data))
        blocks.append(
            {
                "name": b.name,
                "size": b.size,
                "complex": cplx,
                "constant": _triplets(sp.coo_matrix(b.constant), cplx),
                "coefficients": _triplets(b.coefficients, cplx),
            }
        )
    return {
        "format": FORMAT,
        "version": VERSION,
        "n_vars": program.n_vars,
        "sense": program.sense,
        "objective_constant": program.objective_constant,
        "objective": program.objective.tolist(),
        "equalities": {"n_rows": int(program.eq_matrix.shape[0]), **_triplets(program.eq_matrix, False), "rhs": program.eq_rhs.tolist()},
        "blocks": blocks,
        "var_names": list(program.var_names),
    }


def program_from_dict(data: Mapping) -> ConicProgram:
    if data.get("format") != FORMAT:
        raise ValueError(f"not an {FORMAT} document")
    if int(data.get("version", 0)) != VERSION:
        raise ValueError(f"unsupported version {data.get('version')}")
    n = int(data["n_vars"])
    blocks = []
    for b in data["blocks"]:
        size = int(b["size"])
        cplx = bool(b["complex"])
        const = _from_triplets(b["constant"], (size, size), cplx).toarray()
        coef = _from_triplets(b["coefficients"], (n, size * size), cplx)
        blocks.append(PSDBlock(const, coef, b.get("name", "")))
    eq = data["equalities"]
    eq_mat = _from_triplets(eq, (int(eq["n_rows"]), n), False)
    return ConicProgram(
        n_vars=n,
        blocks=tuple(blocks),
        eq_matrix=eq_mat,
        eq_rhs=np.asarray(eq["rhs"], dtype=float).reshape(-1),
        objective=np.asarray(data["objective"], dtype=float).reshape(n),
        sense=data["sense"],
        objective_constant=float(data["objective_constant"]),
        var_names=tuple(data.get("var_names", ())),
    )


def dumps(program: ConicProgram) -> str:
    return json.dumps(program_to_dict(program), separators=(",", ":"))


def loads(text: str) -> ConicProgram:
    return program_from_dict(json.loads(text))


def _same_sparse(a: sp.spmatrix, b: sp.spmatrix) -> bool:
    if a.shape != b.shape:
        return False
    ca, cb = sp.coo_matrix(a), sp.coo_matrix(b)
    ka = np.lexsort((ca.col, ca.row))
    kb = np.lexsort((cb.col, cb.row))
    return (
        np.array_equal(ca.row[ka], cb.row[kb])
        and np.array_equal(ca.col[ka], cb.col[kb])
        and np.array_equal(ca.data[ka], cb.data[kb])
    )


def programs_identical(a: ConicProgram, b: ConicProgram) -> bool:
    """Exact equality of every stored number, including the sparsity pattern."""
    if (a.n_vars, a.sense, len(a.blocks)) != (b.n_vars, b.sense, len(b.blocks)):
        return False
    if a.objective_constant != b.objective_constant or not np.array_equal(a.objective, b.objective):
        return False
    if not np.array_equal(a.eq_rhs, b.eq_rhs) or not _same_sparse(a.eq_matrix, b.eq_matrix):
        return False
    for x, y in zip(a.blocks, b.blocks):
        if x.name != y.name or not np.array_equal(x.constant, y.constant) or not _same_sparse(x.coefficients, y.coefficients):
            return False
    return True
