import numpy as np
import pytest

from lamtensor import algebra as al
from lamtensor import lambdaseq as ls
from lamtensor import matcore as mc
from lamtensor import tensorspace as ts
from lamtensor.errors import DimensionError, InvolutionUnsupportedError

KRON2, SCHUR2, MAT2 = ls.kronecker(2), ls.schur(2), ls.matprod(2)
MIXED3 = ls.mixed([([1, 2], "schur"), ([3], "kronecker")])
ALL = [KRON2, SCHUR2, MAT2, MIXED3]


@pytest.mark.parametrize("lam", ALL, ids=lambda l: l.name)
def test_multiply_matches_flattening_product(lam, rng):
    dims = (2,) * lam.arity
    for r, s in ((1, 1), (1, 2), (2, 2)):
        x, y = al.random_element(lam, dims, r, rng), al.random_element(lam, dims, s, rng)
        p = al.multiply(lam, x, y)
        ref = x.flat @ y.flat
        assert np.abs(p.flat - ref).max() <= 1e-12 * (1 + np.abs(ref).max())
        assert p.value() <= x.value() * y.value() * (1 + 1e-12) + 1e-9
        assert p.dec.level == r * s


def test_unit_and_elementary_products(rng):
    dims = (2, 3)
    y = al.random_element(KRON2, dims, 2, rng)
    assert np.allclose(al.multiply(KRON2, al.unit(KRON2, dims), y).flat, y.flat, atol=1e-12)
    a = [mc.random_complex(rng, (d, d)) for d in dims]
    b = [mc.random_complex(rng, (d, d)) for d in dims]
    x1, y1 = al.element(KRON2, ts.elementary(a)), al.element(KRON2, ts.elementary(b))
    ref = np.kron(a[0] @ b[0], a[1] @ b[1])
    assert np.allclose(al.multiply(KRON2, x1, y1).flat, ref, atol=1e-12)


def test_associativity_and_distributivity(rng):
    lam = SCHUR2
    dims = (2, 2)
    x, y, z = (al.random_element(lam, dims, 1, rng) for _ in range(3))
    left = al.multiply(lam, al.multiply(lam, x, y), z)
    right = al.multiply(lam, x, al.multiply(lam, y, z))
    assert np.abs(left.flat - right.flat).max() <= 1e-12 * (1 + np.abs(left.flat).max())
    s = al.element(lam, ts.direct_sum(lam, y.dec, z.dec))
    lhs = al.multiply(lam, x, s).flat
    rhs = al.multiply(lam, x, y).flat + al.multiply(lam, x, z).flat
    assert np.abs(lhs - rhs).max() <= 1e-12 * (1 + np.abs(rhs).max())


@pytest.mark.parametrize("lam", [KRON2, SCHUR2, MIXED3], ids=lambda l: l.name)
def test_involution(lam, rng):
    dims = (2,) * lam.arity
    x, y = al.random_element(lam, dims, 2, rng), al.random_element(lam, dims, 1, rng)
    xs = al.involution(lam, x)
    assert np.abs(xs.flat - mc.adjoint(x.flat)).max() <= 1e-12 * (1 + np.abs(x.flat).max())
    assert xs.value() == pytest.approx(x.value(), rel=1e-12)
    xy_star = al.involution(lam, al.multiply(lam, x, y)).flat
    ys_xs = al.multiply(lam, al.involution(lam, y), xs).flat
    assert np.abs(xy_star - ys_xs).max() <= 1e-12 * (1 + np.abs(ys_xs).max())


def test_involution_refused_without_o1(rng):
    x = al.random_element(MAT2, (2, 2), 2, rng)
    with pytest.raises(InvolutionUnsupportedError):
        al.involution(MAT2, x)


def test_self_adjoint_fixed(rng):
    a = mc.random_complex(rng, (1, 4))
    h = tuple(mc.hermitian_part(mc.random_complex(rng, (4, 4))) for _ in range(2))
    x = al.element(KRON2, ts.Decomposition(2, a, h, mc.adjoint(a)))
    assert np.allclose(al.involution(KRON2, x).flat, x.flat, atol=1e-12)


def test_submult_report(rng):
    dims = (2, 2)
    u = al.unit(MAT2, dims)
    rep = al.submult_report(MAT2, [(u, u)])
    assert rep["ok"] and rep["pairs"][0]["product_value"] == pytest.approx(1.0)
    pairs = [(al.random_element(MAT2, dims, 1 + i % 2, rng), al.random_element(MAT2, dims, 1, rng)) for i in range(20)]
    assert al.submult_report(MAT2, pairs)["ok"]
    x, y = pairs[0]
    x2 = al.element(MAT2, ts.scaled(x.dec, 2))
    y3 = al.element(MAT2, ts.scaled(y.dec, 3))
    r1 = al.submult_report(MAT2, [(x, y)])["pairs"][0]
    r2 = al.submult_report(MAT2, [(x2, y3)])["pairs"][0]
    assert r2["bound"] == pytest.approx(6 * r1["bound"], rel=1e-12)


def test_errors(rng):
    x = al.random_element(KRON2, (2, 2), 1, rng)
    y = al.random_element(KRON2, (2, 3), 1, rng)
    with pytest.raises(DimensionError):
        al.multiply(KRON2, x, y)
    with pytest.raises(DimensionError):
        al.element(KRON2, ts.random_decomposition(KRON2, ts.SpaceSpec(2, (2, 2)), 1, rng))
