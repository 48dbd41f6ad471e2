import numpy as np
import pytest
from helpers import random_hermitian

from icobounds.errors import NotHermitianError, ShapeError
from icobounds.linalg import (
    LabeledOperator,
    SpaceShape,
    TraceReplacePoly,
    choi_from_kraus,
    double_ket,
    identity,
    max_entangled,
    min_eigenvalue,
    operator_from_json,
    operator_to_json,
    partial_trace,
    projector,
    tensor_product,
    trace_replace,
    trace_replace_poly,
)

Z = np.diag([1.0, -1.0])
ONE, OF = TraceReplacePoly.one(), TraceReplacePoly.of


def op(labels, mat):
    return LabeledOperator([(lab, 2) for lab in labels], mat)


def bell():
    return np.outer(max_entangled(2), max_entangled(2))


def test_tensor_product_examples():
    assert np.allclose(tensor_product(op("a", np.eye(2)), op("b", np.eye(2))).matrix, np.eye(4))
    prod = tensor_product(op("a", np.diag([1.0, 0])), op("b", np.diag([0, 1.0])))
    assert np.allclose(prod.matrix, np.diag([0, 1.0, 0, 0]))
    big = tensor_product(op("a", np.diag([1.0, 0])), op("bc", bell()))
    assert big.shape.dim == 8
    assert big.trace() == pytest.approx(1.0)
    assert np.linalg.matrix_rank(big.matrix) == 1
    assert np.allclose(big.matrix @ big.matrix, big.matrix)


def test_tensor_product_rejects_duplicate_labels():
    with pytest.raises(ShapeError):
        tensor_product(op("a", np.eye(2)), op("a", np.eye(2)))


def test_partial_trace_examples(rng):
    assert np.allclose(partial_trace(op("ab", bell()), ["b"]).matrix, np.eye(2) / 2)
    a, b = random_hermitian(rng, 2), random_hermitian(rng, 2)
    ab = tensor_product(op("a", a), op("b", b))
    assert np.allclose(partial_trace(ab, ["b"]).matrix, np.trace(b) * a)
    full = partial_trace(op("ab", np.eye(4)), ["a", "b"])
    assert full.matrix.shape == (1, 1) and full.trace() == pytest.approx(4.0)
    with pytest.raises(ShapeError):
        partial_trace(ab, ["c"])


def test_trace_replace_examples(rng):
    eye = op("abc", np.eye(8))
    for subset in (["a"], ["b", "c"], ["a", "b", "c"]):
        assert trace_replace(eye, subset).allclose(eye)
    s = op("abc", random_hermitian(rng, 8))
    once = trace_replace(s, ["a", "c"])
    assert trace_replace(once, ["a", "c"]).allclose(once)
    assert np.allclose(trace_replace(op("ab", np.kron(Z, Z)), ["a"]).matrix, 0)


def test_trace_replace_poly_examples(rng):
    assert np.allclose(trace_replace_poly(op("x", np.eye(2)), ONE - OF("x")).matrix, 0)
    s = op("xy", random_hermitian(rng, 4))
    lhs = trace_replace_poly(s, (ONE - OF("x")) * (ONE - OF("y"))).matrix
    rhs = s.matrix - trace_replace(s, ["x"]).matrix - trace_replace(s, ["y"]).matrix + trace_replace(s, ["x", "y"]).matrix
    assert np.allclose(lhs, rhs)
    with pytest.raises(ShapeError):
        trace_replace_poly(s, OF("z"))


def test_double_ket_examples(rng):
    assert np.allclose(double_ket(np.eye(2)), [1, 0, 0, 1])
    assert np.allclose(double_ket(np.array([[0, 1.0], [0, 0]])), [0, 0, 1, 0])
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    v = double_ket(m)
    assert np.vdot(v, v) == pytest.approx(np.trace(m.conj().T @ m))
    with pytest.raises(ShapeError):
        double_ket(np.ones(3))


def test_double_ket_bilinearity(rng):
    for _ in range(20):
        a, m, b = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
        assert np.allclose(double_ket(a @ m @ b), np.kron(b.T, a) @ double_ket(m))


def test_choi_from_kraus_examples():
    q_in, q_out = [("in", 2)], [("out", 2)]
    ident = choi_from_kraus([np.eye(2)], q_in, q_out).matrix
    expect = np.zeros((4, 4))
    for i in (0, 3):
        for j in (0, 3):
            expect[i, j] = 1
    assert np.allclose(ident, expect)
    dep = [np.outer(np.eye(2)[i], np.eye(2)[j]) / np.sqrt(2) for i in range(2) for j in range(2)]
    assert np.allclose(choi_from_kraus(dep, q_in, q_out).matrix, np.eye(4) / 2)
    # rho -> rho / m (m = 2) gives the normalized maximally entangled projector
    scaled = choi_from_kraus([np.eye(2) / np.sqrt(2)], q_in, q_out).matrix
    assert np.allclose(scaled, bell())
    with pytest.raises(ShapeError):
        choi_from_kraus([np.eye(3)], q_in, q_out)


def test_choi_of_channel_is_trace_preserving(rng):
    for _ in range(10):
        v, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
        iso = v[:, :2]  # 2 -> 2 (x) 3
        kraus = [iso.reshape(2, 3, 2)[:, k, :] for k in range(3)]
        c = choi_from_kraus(kraus, [("i", 2)], [("o", 2)])
        assert np.allclose(partial_trace(c, ["o"]).matrix, np.eye(2))
        assert min_eigenvalue(c) > -1e-12
        assert c.trace() == pytest.approx(sum(np.trace(k.conj().T @ k).real for k in kraus))


def test_min_eigenvalue_examples():
    assert min_eigenvalue(np.eye(4)) == pytest.approx(1.0)
    assert min_eigenvalue(np.diag([3.0, -2.0])) == pytest.approx(-2.0)
    assert min_eigenvalue(bell() - np.eye(4) / 4) == pytest.approx(-0.25)
    with pytest.raises(NotHermitianError):
        min_eigenvalue(np.array([[0, 1.0], [0, 0]]))


def test_trace_replace_is_selfadjoint_trace_preserving_projection(rng):
    labels = "abc"
    for _ in range(50):
        s = op(labels, random_hermitian(rng, 8))
        t = op(labels, random_hermitian(rng, 8))
        k = rng.integers(1, 4)
        subset = list(rng.choice(list(labels), size=k, replace=False))
        ps, pt = trace_replace(s, subset), trace_replace(t, subset)
        assert ps.trace() == pytest.approx(s.trace())
        assert ps.inner(t) == pytest.approx(s.inner(pt))
        assert trace_replace(ps, subset).allclose(ps, 1e-12)


def test_trace_replace_commutes_on_disjoint_subsets(rng):
    for _ in range(20):
        s = op("abcd", random_hermitian(rng, 16))
        xy = trace_replace(trace_replace(s, ["a"]), ["c", "d"])
        yx = trace_replace(trace_replace(s, ["c", "d"]), ["a"])
        assert xy.allclose(yx, 1e-12)
        assert xy.allclose(trace_replace(s, ["a", "c", "d"]), 1e-12)


def test_operator_json_round_trip(rng):
    s = op("ab", random_hermitian(rng, 4))
    back = operator_from_json(operator_to_json(s))
    assert back.shape == s.shape and np.array_equal(back.matrix, s.matrix)


def test_shape_and_hermiticity_guards():
    with pytest.raises(ShapeError):
        SpaceShape([("a", 2), ("a", 3)])
    with pytest.raises(ShapeError):
        SpaceShape([("a", 0)])
    with pytest.raises(NotHermitianError):
        LabeledOperator([("a", 2)], [[0, 1], [0, 0]])
    assert identity([("a", 3)]).trace() == 3
    assert projector(np.array([1.0, 0]), [("a", 2)]).trace() == pytest.approx(1)
