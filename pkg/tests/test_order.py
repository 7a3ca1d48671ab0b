import numpy as np
import pytest

from lamtensor import lambdaseq as ls
from lamtensor import matcore as mc
from lamtensor import order as od
from lamtensor import tensorspace as ts
from lamtensor.errors import (
    DimensionError,
    NotCompletelyPositiveError,
    NotPositiveError,
    NotSelfAdjointError,
    RefusedError,
)

import oracles

KRON2, SCHUR2, MAT2 = ls.kronecker(2), ls.schur(2), ls.matprod(2)
MIXED3 = ls.mixed([([1, 2], "schur"), ([3], "kronecker")])
POSITIVE = [KRON2, SCHUR2, MIXED3]


def _cert(lam, rng, n=2, level=2, d=2):
    alpha = oracles.random_unit_ball(rng, (n, lam.tau(level)))
    return od.certify(level, alpha, [oracles.random_psd(rng, level * d) for _ in range(lam.arity)])


def _flat(lam, c):
    return od.cert_flat(lam, c)


def test_verify_certificate_examples(rng):
    one = np.ones((1, 1))
    unit = od.certify(1, one, [one, one])
    assert od.verify_certificate(KRON2, unit, one).ok
    bad = od.ConeCertificate(1, one, (np.diag([1.0, -0.1]), np.eye(2)), (-0.1, 1.0))
    v = od.verify_certificate(KRON2, bad)
    assert not v.ok and v.psd_residual == pytest.approx(0.1)
    c = _cert(KRON2, rng)
    assert od.verify_certificate(KRON2, c, _flat(KRON2, c)).ok
    assert mc.is_psd(_flat(KRON2, c)).ok


def test_certify_rejects_negative_factor():
    with pytest.raises(NotPositiveError):
        od.certify(1, np.ones((1, 1)), [np.diag([1.0, -0.5]), np.eye(2)])


def test_certify_clips_float_drift():
    drift = np.diag([1.0, -1e-13])
    c = od.certify(1, np.ones((1, 1)), [drift, np.eye(2)])
    assert c.clipped == pytest.approx(1e-13)
    assert min(c.psd_slack) >= 0.0


@pytest.mark.parametrize("lam", POSITIVE + [MAT2], ids=lambda l: l.name)
def test_cone_add(lam, rng):
    c1, c2 = _cert(lam, rng, level=1), _cert(lam, rng, level=2)
    s = od.cone_add(lam, c1, c2)
    ref = _flat(lam, c1) + _flat(lam, c2)
    assert od.verify_certificate(lam, s, ref).ok
    assert np.abs(_flat(lam, s) - ref).max() <= 1e-12
    zero = od.zero_certificate(lam, 2, (2,) * lam.arity)
    assert np.abs(_flat(lam, od.cone_add(lam, c1, zero)) - _flat(lam, c1)).max() <= 1e-12


def test_cone_add_scalars():
    one = np.ones((1, 1))
    c = od.cone_add(KRON2, od.certify(1, 2 * one, [one, one]), od.certify(1, 3 * one, [one, one]))
    assert _flat(KRON2, c)[0, 0] == pytest.approx(13.0)


def test_compress(rng):
    c = _cert(KRON2, rng)
    assert np.array_equal(_flat(KRON2, od.compress(c, np.eye(2))), _flat(KRON2, c))
    assert not _flat(KRON2, od.compress(c, np.zeros((2, 3)))).any()
    g = mc.random_complex(rng, (2, 3))
    inner = 4
    G = np.kron(g, np.eye(inner))
    ref = G.conj().T @ _flat(KRON2, c) @ G
    assert np.abs(_flat(KRON2, od.compress(c, g)) - ref).max() <= 1e-12 * (1 + np.abs(ref).max())
    with pytest.raises(DimensionError):
        od.compress(c, np.eye(3))


def test_compress_corner_of_block(rng):
    c = _cert(KRON2, rng, n=4)
    top = od.compress(c, np.vstack([np.eye(2), np.zeros((2, 2))]))
    assert np.allclose(_flat(KRON2, top), _flat(KRON2, c)[:8, :8], atol=1e-13)


def test_psd_falsifier(rng):
    c = _cert(KRON2, rng)
    el = ts.TensorElement(ts.SpaceSpec(2, (2, 2)), _flat(KRON2, c))
    assert od.psd_falsifier(KRON2, el)[0] == od.INCONCLUSIVE
    assert od.psd_falsifier(KRON2, -el)[0] == od.NOT_IN_CONE
    bad = ts.TensorElement(ts.SpaceSpec(1, (2, 1)), np.diag([1.0, -1.0]).astype(complex))
    assert od.psd_falsifier(ls.kronecker(2), bad)[0] == od.NOT_IN_CONE
    with pytest.raises(RefusedError):
        od.psd_falsifier(MAT2, el)


def test_polar_split(rng):
    p = oracles.random_psd(rng, 3)
    v1, v2 = od.polar_split(p)
    assert np.allclose(v1, p, atol=1e-12) and np.allclose(v2, p, atol=1e-12)
    v1, v2 = od.polar_split(mc.matrix_unit(1, 2, 2))
    assert np.allclose(v1, mc.matrix_unit(1, 1, 2)) and np.allclose(v2, mc.matrix_unit(2, 2, 2))
    v1, v2 = od.polar_split(np.zeros((2, 2)))
    assert not v1.any() and not v2.any()
    for _ in range(10):
        v = mc.random_complex(rng, (3, 3))
        v1, v2 = od.polar_split(v)
        assert mc.is_psd(np.block([[v1, v], [v.conj().T, v2]])).ok
        assert mc.op_norm(v1) == pytest.approx(mc.op_norm(v)) and mc.op_norm(v2) == pytest.approx(mc.op_norm(v))


@pytest.mark.parametrize("lam", POSITIVE, ids=lambda l: l.name)
def test_lambda_capital_ub(lam, rng):
    dec = ts.random_decomposition(lam, ts.SpaceSpec(2, (2,) * lam.arity), 2, rng)
    b = od.lambda_capital_ub(lam, dec)
    assert od.verify_certificate(lam, b.cert, b.block()).ok
    assert mc.is_psd(b.block()).ok
    n = 2
    top = od.compress(b.cert, np.vstack([np.eye(n), np.zeros((n, n))]))
    assert np.allclose(_flat(lam, top), b.u.flat, atol=1e-10 * (1 + np.abs(b.u.flat).max()))
    assert b.value <= dec.value() * (1 + 1e-12)
    bs = od.lambda_capital_ub(lam, ts.star(lam, dec))
    assert b.value == pytest.approx(bs.value, rel=1e-12)


def test_lambda_capital_ub_zero_and_certified(rng):
    zero = ts.Decomposition(1, np.zeros((1, 1)), (np.eye(2), np.eye(2)), np.zeros((1, 1)))
    assert od.lambda_capital_ub(KRON2, zero).value == 0.0
    c = _cert(KRON2, rng)
    assert od.lambda_capital_ub(KRON2, c.dec).value <= c.value() + 1e-9


def test_scalar_certificate(rng):
    c = od.scalar_certificate(KRON2, np.eye(1), (2, 3))
    assert np.allclose(_flat(KRON2, c), np.eye(6))
    c = od.scalar_certificate(KRON2, np.diag([2.0, 0.0]), (2, 2))
    assert c.level == 1
    g = oracles.random_psd(rng, 3)
    c = od.scalar_certificate(KRON2, g, (2, 2))
    assert od.verify_certificate(KRON2, c, np.kron(g, np.eye(4))).ok
    with pytest.raises(NotPositiveError):
        od.scalar_certificate(KRON2, np.diag([1.0, -1.0]), (2, 2))
    z = od.scalar_certificate(KRON2, np.zeros((2, 2)), (2, 2))
    assert not _flat(KRON2, z).any()


@pytest.mark.parametrize("lam", [KRON2, SCHUR2], ids=lambda l: l.name)
def test_order_unit_bound(lam, rng):
    for _ in range(5):
        dec = ts.random_self_adjoint(lam, ts.SpaceSpec(2, (2, 2)), 1, rng)
        res = od.order_unit_bound(lam, dec)
        u = ts.realize_flat(lam, dec)
        one = np.eye(u.shape[0])
        assert od.verify_certificate(lam, res.plus, res.K_prime * one + u).ok
        assert od.verify_certificate(lam, res.minus, res.K_prime * one - u).ok
        assert mc.is_psd(res.K_prime * one + u).ok and mc.is_psd(res.K_prime * one - u).ok


def test_order_unit_bound_examples():
    zero = ts.Decomposition(1, np.zeros((1, 1)), (np.eye(2), np.eye(2)), np.zeros((1, 1)))
    assert od.order_unit_bound(KRON2, zero).K == 0.0
    unit = ts.unit_decomposition((2, 2))
    res = od.order_unit_bound(KRON2, unit)
    assert res.K == pytest.approx(1.0)
    one = np.eye(4)
    assert od.verify_certificate(KRON2, res.minus, res.K_prime * one - one).ok
    with pytest.raises(NotSelfAdjointError):
        od.order_unit_bound(KRON2, ts.elementary([mc.matrix_unit(1, 2, 2), np.eye(2)]))


def test_archimedean_certificate(rng):
    c = _cert(KRON2, rng)
    a = od.archimedean_certificate(KRON2, c, 0.25)
    assert od.verify_certificate(KRON2, a, _flat(KRON2, c) + 0.25 * np.eye(8)).ok


def _compression_choi(rng, p, q):
    w = mc.random_complex(rng, (p, q)) / 2
    return od.choi_matrix(lambda x: w.conj().T @ x @ w, p)


def test_choi_and_ucp(rng):
    ident = od.choi_matrix(lambda x: x, 2)
    c = _cert(KRON2, rng)
    same = od.ucp_apply(KRON2, c, [ident, ident])
    assert all(np.allclose(a, b) for a, b in zip(same.factors, c.factors))
    chois = [_compression_choi(rng, 2, 3), _compression_choi(rng, 2, 1)]
    out = od.ucp_apply(KRON2, c, chois)
    ref = oracles.apply_maps_to_flat(_flat(KRON2, c), 2, (2, 2), chois)
    assert od.verify_certificate(KRON2, out, ref).ok
    assert np.allclose(od.apply_maps_to_flat(_flat(KRON2, c), 2, (2, 2), chois), ref, atol=1e-12)
    transpose = od.choi_matrix(lambda x: x.T, 2)
    with pytest.raises(NotCompletelyPositiveError):
        od.ucp_apply(KRON2, c, [transpose, ident])


def test_t2_embed_paths(rng):
    one = np.ones((1, 1))
    r = od.t2_embed(KRON2, one, one, 1, 1)
    assert np.allclose(_flat(KRON2, r.cert), one)
    a, b = mc.random_complex(rng, (2,)), mc.random_complex(rng, (3,))
    r = od.t2_embed(KRON2, np.outer(a, a.conj()), np.outer(b, b.conj()), 2, 3)
    assert r.path == "rank-one-sum" and r.cert.level == 1
    P, Q = oracles.random_psd(rng, 2), oracles.random_psd(rng, 2)
    r = od.t2_embed(KRON2, P, Q, 2, 2)
    assert od.verify_certificate(KRON2, r.cert, oracles.pq_flat(P, Q, 2, 2)).ok
    assert r.attempts[0]["path"] == "literal" and not r.attempts[0]["ok"]
    for lam, path in ((KRON2, "selector"), (SCHUR2, "index-product")):
        P, Q = oracles.random_psd(rng, 4), oracles.random_psd(rng, 6)
        r = od.t2_embed(lam, P, Q, 2, 3)
        assert r.path == path
        assert od.verify_certificate(lam, r.cert, oracles.pq_flat(P, Q, 2, 3)).ok


def test_certificate_json_roundtrip(rng):
    c = _cert(KRON2, rng)
    back = od.ConeCertificate.from_json(c.to_json())
    assert np.array_equal(_flat(KRON2, back), _flat(KRON2, c))
