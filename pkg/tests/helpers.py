"""Random instruments and process matrices for property tests."""

import numpy as np

from icobounds.linalg import double_ket, min_eigenvalue
from icobounds.nosig import PartitionedShape, ProcessConstraints


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def random_isometry(rng, d_in, d_out):
    z = rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_instrument(rng, d_in, d_out, settings, outcomes, kraus_rank=2):
    """``choi[x][a]`` on in (x) out, from a random Stinespring isometry per setting."""
    out = []
    for _ in range(settings):
        v = random_isometry(rng, d_in, d_out * outcomes * kraus_rank).reshape(d_out, outcomes, kraus_rank, d_in)
        per = []
        for a in range(outcomes):
            c = sum(np.outer(double_ket(v[:, a, k, :]), double_ket(v[:, a, k, :]).conj()) for k in range(kraus_rank))
            per.append(c)
        out.append(per)
    return out


def random_process(rng, shape: PartitionedShape, real=False):
    """Random point of the process set: S0 + t*D with D in the free directions."""
    cons = ProcessConstraints(shape)
    basis = cons.free.basis(real_only=real)
    coords = rng.normal(size=basis.shape[0])
    n = shape.space.dim
    d = (coords @ basis).reshape(n, n)
    d = (d + d.conj().T) / 2
    lo = min_eigenvalue(d)
    t = rng.uniform(0.2, 1.0) * (1 / shape.d_in) / max(-lo, 1e-12)
    return cons.base + t * d


QUBIT_PAIR = PartitionedShape([([("A_in", 2)], [("A_out", 2)]), ([("B_in", 2)], [("B_out", 2)])])
