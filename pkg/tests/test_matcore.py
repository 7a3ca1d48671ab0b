import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lamtensor import matcore as mc
from lamtensor.errors import DimensionError


def test_matrix_unit_in_and_out_of_range():
    assert np.array_equal(mc.matrix_unit(1, 1, 2, 2), [[1, 0], [0, 0]])
    assert not mc.matrix_unit(3, 1, 2, 2).any()
    e = mc.matrix_unit(2, 1, 2, 3)
    assert e.shape == (2, 3) and e[1, 0] == 1 and np.abs(e).sum() == 1


def test_matrix_unit_products_exhaustive():
    k = 4
    for i, j, a, b in np.ndindex(k, k, k, k):
        lhs = mc.matrix_unit(i + 1, j + 1, k) @ mc.matrix_unit(a + 1, b + 1, k)
        rhs = mc.matrix_unit(i + 1, b + 1, k) * (j == a)
        assert np.array_equal(lhs, rhs)


def test_kron_examples():
    assert np.array_equal(mc.kron(mc.identity(2), mc.identity(3)), np.eye(6))
    e = mc.kron(mc.matrix_unit(1, 2, 2), mc.matrix_unit(2, 1, 2))
    # (i-1)*2 + k indexing: row (1-1)*2+2 = 2, column (2-1)*2+1 = 3
    assert e[1, 2] == 1 and np.abs(e).sum() == 1
    assert np.array_equal(mc.kron(np.diag([1, 2]), np.diag([3, 4])), np.diag([3, 4, 6, 8]))


def test_kron_batched_matches_loop(rng):
    a = mc.random_complex(rng, (5, 2, 3))
    b = mc.random_complex(rng, (5, 3, 2))
    out = mc.kron(a, b)
    for i in range(5):
        assert np.allclose(out[i], np.kron(a[i], b[i]), atol=0)


def test_schur_examples_and_errors():
    a = np.array([[1, 2], [3, 4]])
    assert np.array_equal(mc.schur(np.ones((2, 2)), a), a)
    e12, e21 = mc.matrix_unit(1, 2, 2), mc.matrix_unit(2, 1, 2)
    assert np.array_equal(mc.schur(e12, e12), e12)
    assert not mc.schur(e12, e21).any()
    with pytest.raises(DimensionError):
        mc.schur(np.ones((2, 2)), np.ones((3, 3)))


cplx = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), cplx)
def test_kron_schur_bilinear(seed, c):
    rng = np.random.default_rng(seed)
    a, b, x = (mc.random_complex(rng, (2, 2)) for _ in range(3))
    for op in (mc.kron, mc.schur):
        assert np.allclose(op(c * a + b, x), c * op(a, x) + op(b, x), atol=1e-12 * (1 + abs(c)) * 100)
        assert np.allclose(op(x, c * a + b), c * op(x, a) + op(x, b), atol=1e-12 * (1 + abs(c)) * 100)


def test_products_preserve_psd(rng):
    for _ in range(20):
        a, b = mc.random_psd(rng, 3), mc.random_psd(rng, 3)
        assert mc.is_psd(mc.kron(a, b)).ok
        assert mc.is_psd(mc.schur(a, b)).ok


def test_op_norm_properties(rng):
    assert mc.op_norm(mc.identity(4)) == pytest.approx(1.0)
    assert mc.op_norm(mc.matrix_unit(1, 2, 2)) == pytest.approx(1.0)
    a, b = mc.random_complex(rng, (3, 3)), mc.random_complex(rng, (2, 2))
    assert mc.op_norm(mc.kron(a, b)) == pytest.approx(mc.op_norm(a) * mc.op_norm(b), rel=1e-12)
    assert abs(mc.op_norm(mc.adjoint(a)) - mc.op_norm(a)) <= 1e-12 * mc.op_norm(a)


def test_is_psd():
    v = mc.is_psd(mc.identity(3))
    assert v.ok and v.min_eig == pytest.approx(1.0)
    v = mc.is_psd(np.diag([1.0, -1.0]))
    assert not v.ok and v.min_eig == pytest.approx(-1.0)
    assert not mc.is_psd(np.array([[1.0, 1.0], [0.0, 1.0]])).ok
    with pytest.raises(DimensionError):
        mc.is_psd(np.ones((2, 3)))


def test_polar_block_is_psd(rng):
    # independent oracle: |v| via eigendecomposition of v*v
    for _ in range(10):
        v = mc.random_complex(rng, (3, 3))
        w, u = np.linalg.eigh(v.conj().T @ v)
        absv = (u * np.sqrt(np.clip(w, 0, None))) @ u.conj().T
        w2, u2 = np.linalg.eigh(v @ v.conj().T)
        absvs = (u2 * np.sqrt(np.clip(w2, 0, None))) @ u2.conj().T
        assert mc.is_psd(np.block([[absvs, v], [v.conj().T, absv]])).ok


def test_psd_both_signs_means_small(rng):
    a = 1e-12 * mc.hermitian_part(mc.random_complex(rng, (3, 3)))
    assert mc.is_psd(a).ok and mc.is_psd(-a).ok
    b = mc.random_psd(rng, 3)
    assert not (mc.is_psd(b).ok and mc.is_psd(-b).ok)


def test_block_assemble():
    assert np.array_equal(mc.block_assemble("diag", [np.eye(1), np.eye(2)]), np.eye(3))
    assert np.array_equal(mc.block_assemble("adiag", [np.ones((1, 1)), np.zeros((1, 1))]), [[0, 1], [0, 0]])
    x = np.array([[1, 2j], [3, 4]])
    s = mc.block_assemble("adiag", [x, x.conj().T])
    assert np.array_equal(s, s.conj().T)
    with pytest.raises(DimensionError):
        mc.block_assemble("adiag", [np.eye(2)])
