"""Cone certificates for C_n, the Lambda-norm block construction and order units.

A certificate is a decomposition alpha (x)_{lambda_j}(v_1, ..., v_m) alpha^*
with every v_t positive semidefinite. Membership in C_n is only ever
witnessed, never decided.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import axioms
from . import lambdaseq as ls
from . import matcore as mc
from . import tensorspace as ts
from .errors import (
    DimensionError,
    NotCompletelyPositiveError,
    NotPositiveError,
    NotSelfAdjointError,
    UnsupportedSequenceError,
)
from .serialize import decode_matrix, encode_matrix

PSD_TOL = 1e-9
REALIZE_TOL = 1e-9

NOT_IN_CONE = "NOT-IN-CONE"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True, eq=False)
class ConeCertificate:
    level: int
    alpha: np.ndarray
    factors: tuple[np.ndarray, ...]
    psd_slack: tuple[float, ...]
    clipped: float = 0.0
    note: str = ""

    @property
    def beta(self) -> np.ndarray:
        return mc.adjoint(self.alpha)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] // self.level for f in self.factors)

    @property
    def dec(self) -> ts.Decomposition:
        return ts.Decomposition(self.level, self.alpha, self.factors, self.beta)

    def value(self) -> float:
        return ts.decomposition_value(self.dec)

    def to_json(self) -> dict:
        out = {
            "level": self.level,
            "alpha": encode_matrix(self.alpha),
            "factors": [encode_matrix(f) for f in self.factors],
            "psd_slack": [float(s) for s in self.psd_slack],
            "clipped": float(self.clipped),
        }
        if self.note:
            out["note"] = self.note
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ConeCertificate":
        factors = tuple(decode_matrix(f, name=f"factors[{i}]") for i, f in enumerate(obj["factors"]))
        return cls(
            int(obj["level"]),
            decode_matrix(obj["alpha"], name="alpha"),
            factors,
            tuple(_min_eig(f) for f in factors),
        )


class CertVerdict(NamedTuple):
    ok: bool
    psd_residual: float
    realization_residual: float
    adjoint_residual: float


@dataclass(frozen=True, eq=False)
class BlockCertificate:
    z: ts.TensorElement
    u: ts.TensorElement
    u_prime: ts.TensorElement
    cert: ConeCertificate
    value: float
    u_dec: ts.Decomposition = field(repr=False)
    u_prime_dec: ts.Decomposition = field(repr=False)

    def block(self) -> np.ndarray:
        """The 2n-level element [[u, z], [z^*, u']] as a flattening."""
        n, inner = self.z.spec.n, self.z.spec.inner
        z4 = self.z.flat.reshape(n, inner, n, inner)
        out = np.zeros((2, n, inner, 2, n, inner), dtype=mc.DTYPE)
        out[0, :, :, 0] = self.u.flat.reshape(n, inner, n, inner)
        out[0, :, :, 1] = z4
        out[1, :, :, 0] = np.conj(z4.transpose(2, 3, 0, 1))
        out[1, :, :, 1] = self.u_prime.flat.reshape(n, inner, n, inner)
        return out.reshape(2 * n * inner, 2 * n * inner)

    def to_json(self) -> dict:
        return {"value": float(self.value), "cert": self.cert.to_json(),
                "z": self.z.to_json()}


class OrderUnitResult(NamedTuple):
    K: float
    K_prime: float
    plus: ConeCertificate
    minus: ConeCertificate


class T2Result(NamedTuple):
    cert: ConeCertificate
    path: str
    attempts: list


def _min_eig(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(mc.hermitian_part(a))[0]) if a.size else 0.0


def certify(level: int, alpha: np.ndarray, factors: Sequence[np.ndarray],
            tol: float = PSD_TOL, note: str = "") -> ConeCertificate:
    """Emit a certificate, clipping float-level negative eigenvalues of the factors.

    Eigenvalues below -tol * (1 + ||v||) are a genuine failure.
    """
    fixed, slack, clip = [], [], 0.0
    for t, v in enumerate(factors):
        v = mc.as_cmatrix(v, name=f"factor {t + 1}")
        lo = _min_eig(v)
        if lo < -tol * (1.0 + mc.op_norm(v)):
            raise NotPositiveError(f"factor {t + 1} has eigenvalue {lo:.3e}")
        if lo < 0.0 or mc.op_norm(v - mc.adjoint(v)) > 0.0:
            v, c = mc.clip_psd(v)
            clip = max(clip, c)
            lo = max(_min_eig(v), 0.0)
        fixed.append(v)
        slack.append(lo)
    return ConeCertificate(level, mc.as_cmatrix(alpha, name="alpha"), tuple(fixed), tuple(slack), clip, note)


def zero_certificate(lam: ls.LambdaSequence, n: int, dims: Sequence[int]) -> ConeCertificate:
    tau = lam.tau(1)
    return certify(1, np.zeros((n, tau), dtype=mc.DTYPE), [mc.identity(d) for d in dims])


def cert_flat(lam: ls.LambdaSequence, cert: ConeCertificate) -> np.ndarray:
    return ts.realize_flat(lam, cert.dec)


def verify_certificate(lam: ls.LambdaSequence, cert: ConeCertificate,
                       element: ts.TensorElement | np.ndarray | None = None,
                       tol: float = PSD_TOL) -> CertVerdict:
    """beta = alpha^* (structural), PSD factors, and optionally the realization."""
    try:
        ts.check_shapes(lam, cert.dec)
    except DimensionError:
        return CertVerdict(False, float("inf"), float("inf"), float("inf"))
    ok = True
    psd_res = 0.0
    for v in cert.factors:
        verdict = mc.is_psd(v, tol)
        psd_res = max(psd_res, max(0.0, -verdict.min_eig), verdict.asymmetry)
        ok = ok and verdict.ok
    adj_res = mc.max_abs(cert.dec.beta - mc.adjoint(cert.alpha))
    real_res = 0.0
    if element is not None:
        flat = element.flat if isinstance(element, ts.TensorElement) else np.asarray(element)
        got = cert_flat(lam, cert)
        if got.shape != flat.shape:
            return CertVerdict(False, psd_res, float("inf"), adj_res)
        real_res = mc.max_abs(got - flat)
        ok = ok and real_res <= REALIZE_TOL * (1.0 + mc.max_abs(flat))
    return CertVerdict(bool(ok and adj_res == 0.0), psd_res, real_res, adj_res)


def cone_add(lam: ls.LambdaSequence, c1: ConeCertificate, c2: ConeCertificate) -> ConeCertificate:
    """Certificate for the sum, through the (E2) direct-sum construction."""
    d = ts.direct_sum(lam, c1.dec, c2.dec)
    return certify(d.level, d.alpha, d.factors)


def cone_sum(lam: ls.LambdaSequence, certs: Sequence[ConeCertificate]) -> ConeCertificate:
    if not certs:
        raise ValueError("cone_sum of nothing")
    out = certs[0]
    for c in certs[1:]:
        out = cone_add(lam, out, c)
    return out


def compress(cert: ConeCertificate, gamma: np.ndarray) -> ConeCertificate:
    """gamma^* u gamma for gamma of shape n x k; the new row is gamma^* alpha."""
    gamma = mc.as_cmatrix(gamma, name="gamma")
    if gamma.shape[0] != cert.n:
        raise DimensionError(f"gamma must have {cert.n} rows, got {gamma.shape}")
    return ConeCertificate(cert.level, mc.adjoint(gamma) @ cert.alpha, cert.factors,
                           cert.psd_slack, cert.clipped)


def psd_falsifier(lam: ls.LambdaSequence, element: ts.TensorElement, tol: float = PSD_TOL) -> tuple[str, float]:
    """NOT-IN-CONE if the flattening is not PSD; a PSD flattening proves nothing."""
    axioms.require(lam, "O3", 2)
    verdict = mc.is_psd(element.flat, tol)
    return (INCONCLUSIVE if verdict.ok else NOT_IN_CONE), verdict.min_eig


def polar_split(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(|v^*|, |v|), so that [[|v^*|, v], [v^*, |v|]] is positive."""
    v = mc.as_cmatrix(v)
    u, s, vh = np.linalg.svd(v)
    left = (u * s) @ mc.adjoint(u)
    right = (mc.adjoint(vh) * s) @ vh
    return mc.hermitian_part(left), mc.hermitian_part(right)


def lambda_capital_ub(lam: ls.LambdaSequence, dec: ts.Decomposition) -> BlockCertificate:
    """Block certificate for [[u, z], [z^*, u']] in C_2n from a decomposition of z."""
    j = dec.level
    axioms.require(lam, "O1", j)
    axioms.require(lam, "O2", j)
    a, b = mc.op_norm(dec.alpha), mc.op_norm(dec.beta)
    s = np.sqrt(b / a) if a > 0 and b > 0 else 1.0
    alpha, beta = dec.alpha * s, dec.beta / s
    splits = [polar_split(v) for v in dec.factors]
    blocks = [np.block([[v1, v], [mc.adjoint(v), v2]]) for (v1, v2), v in zip(splits, dec.factors)]
    P = ls.e2_witness(lam, j, j)
    big_alpha = mc.block_assemble("diag", [alpha, mc.adjoint(beta)]) @ P
    cert = certify(2 * j, big_alpha, blocks)

    z = ts.realize(lam, None, dec)
    u_dec = ts.Decomposition(j, alpha, tuple(v1 for v1, _ in splits), mc.adjoint(alpha))
    up_dec = ts.Decomposition(j, mc.adjoint(beta), tuple(v2 for _, v2 in splits), beta)
    u = ts.realize(lam, None, u_dec)
    up = ts.realize(lam, None, up_dec)
    value = max(u_dec.value(), up_dec.value())
    return BlockCertificate(z, u, up, cert, value, u_dec, up_dec)


def scalar_certificate(lam: ls.LambdaSequence, gamma: np.ndarray, dims: Sequence[int],
                       tol: float = PSD_TOL) -> ConeCertificate:
    """Certificate for gamma (x) 1 (x) ... (x) 1 from rank-one columns of gamma."""
    gamma = mc.as_cmatrix(gamma, name="gamma")
    if not mc.is_psd(gamma, tol).ok:
        raise NotPositiveError("scalar_certificate needs a PSD matrix")
    if lam.tau(1) != 1:
        raise UnsupportedSequenceError(f"{lam.name} has tau(1) != 1")
    ones = [mc.identity(d) for d in dims]
    cols = mc.rank_one_factors(gamma)
    if not cols:
        return zero_certificate(lam, gamma.shape[0], dims)
    return cone_sum(lam, [certify(1, c[:, None], ones) for c in cols])


def unit_flat(n: int, dims: Sequence[int]) -> np.ndarray:
    return mc.identity(n * int(np.prod(dims)))


def archimedean_certificate(lam: ls.LambdaSequence, cert: ConeCertificate, eps: float) -> ConeCertificate:
    """eps * 1 + P at a fixed eps >= 0, never the statement for every eps."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return cone_add(lam, cert, scalar_certificate(lam, eps * mc.identity(cert.n), cert.dims))


def order_unit_bound(lam: ls.LambdaSequence, dec: ts.Decomposition) -> OrderUnitResult:
    """K and certificates for K' 1 +- u, for self-adjoint u with m = 2.

    After symmetrizing u = alpha (x)(s, t) alpha^*, with K = max(||s||, ||t||):
        (K+s, K+t) + (K-s, K-t) = 2 (K^2 (1, 1) + (s, t))
        (K+s, K-t) + (K-s, K+t) = 2 (K^2 (1, 1) - (s, t))
    The K^2 alpha lambda(1,1) alpha^* part is topped up to K' 1 by a scalar certificate.
    """
    if lam.arity != 2:
        raise UnsupportedSequenceError("order_unit_bound covers m = 2")
    if not ts.is_self_adjoint(ts.realize_flat(lam, dec)):
        raise NotSelfAdjointError("order_unit_bound needs a self-adjoint element")
    axioms.require(lam, "O3", 2)
    n, dims = dec.n, dec.dims
    sym = ts.symmetrize(lam, dec)
    alpha, (s, t) = sym.alpha, sym.factors
    K = max(mc.op_norm(s), mc.op_norm(t))
    if K == 0.0 or mc.op_norm(alpha) == 0.0:
        zero = zero_certificate(lam, n, dims)
        return OrderUnitResult(0.0, 0.0, zero, zero)

    J = sym.level
    half = alpha / np.sqrt(2.0)
    Is, It = K * mc.identity(s.shape[0]), K * mc.identity(t.shape[0])
    lam_id = lam.eval(J, [mc.identity(J)] * 2)
    gamma0 = alpha @ lam_id @ mc.adjoint(alpha)
    K_prime = K * K * max(mc.op_norm(alpha @ mc.adjoint(alpha)), float(np.linalg.eigvalsh(mc.hermitian_part(gamma0))[-1]))
    top = K_prime * mc.identity(n) - K * K * mc.hermitian_part(gamma0)
    top_cert = scalar_certificate(lam, mc.clip_psd(top)[0], dims)

    plus = cone_sum(lam, [certify(J, half, [Is + s, It + t]), certify(J, half, [Is - s, It - t]), top_cert])
    minus = cone_sum(lam, [certify(J, half, [Is + s, It - t]), certify(J, half, [Is - s, It + t]), top_cert])
    return OrderUnitResult(float(K), float(K_prime), plus, minus)


# -- completely positive maps ------------------------------------------------

def choi_matrix(phi, p: int) -> np.ndarray:
    """C = sum_ij E_ij (x) phi(E_ij) for a linear map on M_p."""
    blocks = [[mc.as_cmatrix(phi(mc.matrix_unit(i + 1, j + 1, p))) for j in range(p)] for i in range(p)]
    return np.block(blocks)


def apply_choi(choi: np.ndarray, x: np.ndarray, p: int) -> np.ndarray:
    """Apply the map with Choi matrix ``choi`` (on M_p) blockwise to x in M_j(M_p)."""
    q = choi.shape[0] // p
    if choi.shape != (p * q, p * q) or x.shape[0] % p:
        raise DimensionError(f"Choi matrix {choi.shape} does not act on blocks of size {p}")
    j = x.shape[0] // p
    c4 = choi.reshape(p, q, p, q)
    out = np.einsum("xiyj,iajb->xayb", x.reshape(j, p, j, p), c4)
    return out.reshape(j * q, j * q)


def ucp_apply(lam: ls.LambdaSequence, cert: ConeCertificate, chois: Sequence[np.ndarray]) -> ConeCertificate:
    """Image of a certificate under phi_1 (x) ... (x) phi_m, with each phi_t cp."""
    if len(chois) != lam.arity:
        raise DimensionError(f"need {lam.arity} maps, got {len(chois)}")
    factors = []
    for t, (c, v, d) in enumerate(zip(chois, cert.factors, cert.dims)):
        c = mc.as_cmatrix(c, name=f"choi {t + 1}")
        if c.shape[0] % d or c.shape[0] != c.shape[1]:
            raise DimensionError(f"Choi matrix {t + 1} has shape {c.shape}, input size {d}")
        if not mc.is_psd(c).ok:
            raise NotCompletelyPositiveError(f"map {t + 1} is not completely positive")
        factors.append(apply_choi(c, v, d))
    return certify(cert.level, cert.alpha, factors)


def apply_maps_to_flat(flat: np.ndarray, n: int, dims: Sequence[int], chois: Sequence[np.ndarray]) -> np.ndarray:
    """Slotwise action of phi_1 (x) ... (x) phi_m on a flattening (reference path)."""
    m = len(dims)
    out_dims = [c.shape[0] // d for c, d in zip(chois, dims)]
    x = flat.reshape((n, *dims, n, *dims))
    for t, (c, d, q) in enumerate(zip(chois, dims, out_dims)):
        c4 = c.reshape(d, q, d, q)
        x = np.moveaxis(x, (1 + t, 2 + m + t), (0, 1))
        x = np.einsum("ij...,iajb->ab...", x, c4)
        x = np.moveaxis(x, (0, 1), (1 + t, 2 + m + t))
    size = n * int(np.prod(out_dims))
    return x.reshape(size, size)


# -- (T2) -------------------------------------------------------------------

def pq_flat(P: np.ndarray, Q: np.ndarray, k: int, l: int) -> np.ndarray:
    """P (x) Q in M_{kl}(M_{d1} (x) M_{d2}), index order (a, b, x, y)."""
    d1, d2 = P.shape[0] // k, Q.shape[0] // l
    t = np.einsum("axcz,bydw->abxycdzw", P.reshape(k, d1, k, d1), Q.reshape(l, d2, l, d2))
    size = k * l * d1 * d2
    return t.reshape(size, size)


def _t2_literal(lam, P, Q, k, l):
    L = k + l
    tau = lam.tau(L)
    if k * l != L:
        raise DimensionError(f"(I_{L}, 0, ...) has {L} rows but M_{{kl,tau(k+l)}} needs {k * l}")
    alpha = np.zeros((k * l, tau), dtype=mc.DTYPE)
    alpha[:, :L] = mc.identity(L)
    return certify(L, alpha, [np.kron(mc.identity(L), P), np.kron(mc.identity(L), Q)])


def _t2_selector(lam, P, Q, k, l):
    L = k + l
    if lam.tau(L) != L * L:
        raise DimensionError(f"tau({L}) = {lam.tau(L)} is not {L}^2")
    d1, d2 = P.shape[0] // k, Q.shape[0] // l
    v1 = mc.block_assemble("diag", [P, np.zeros((l * d1, l * d1))])
    v2 = mc.block_assemble("diag", [np.zeros((k * d2, k * d2)), Q])
    alpha = np.zeros((k * l, L * L), dtype=mc.DTYPE)
    for a in range(k):
        for b in range(l):
            alpha[a * l + b, a * L + k + b] = 1.0
    return certify(L, alpha, [v1, v2])


def _t2_index_product(lam, P, Q, k, l):
    L = k * l
    if lam.tau(L) != L:
        raise DimensionError(f"tau({L}) = {lam.tau(L)} is not {L}")
    d1, d2 = P.shape[0] // k, Q.shape[0] // l
    # block ((a,b),(a',b')) of v1 is P_{aa'}, of v2 is Q_{bb'}
    v1 = np.einsum("axcz,bd->abxcdz", P.reshape(k, d1, k, d1), np.ones((l, l))).reshape(L * d1, L * d1)
    v2 = np.einsum("ac,bydw->abycdw", np.ones((k, k)), Q.reshape(l, d2, l, d2)).reshape(L * d2, L * d2)
    return certify(L, mc.identity(L), [v1, v2])


def _product_split(vec: np.ndarray, k: int, d: int, tol: float = 1e-10):
    """vec = x (x) y with x in C^k, y in C^d, or None when the Schmidt rank exceeds 1."""
    u, s, vh = np.linalg.svd(vec.reshape(k, d))
    if s.size > 1 and s[1] > tol * max(1.0, s[0]):
        return None
    return u[:, 0] * s[0], vh[0]


def _t2_rank_one(lam, P, Q, k, l):
    if lam.tau(1) != 1:
        raise DimensionError("tau(1) != 1")
    d1, d2 = P.shape[0] // k, Q.shape[0] // l
    pieces = []
    for p in mc.rank_one_factors(P):
        for q in mc.rank_one_factors(Q):
            sp, sq = _product_split(p, k, d1), _product_split(q, l, d2)
            if sp is None or sq is None:
                raise UnsupportedSequenceError("a rank-one summand is entangled across the matrix level")
            (x, y), (x2, y2) = sp, sq
            pieces.append(certify(1, np.kron(x, x2)[:, None], [np.outer(y, y.conj()), np.outer(y2, y2.conj())]))
    if not pieces:
        return zero_certificate(lam, k * l, (d1, d2))
    return cone_sum(lam, pieces)


_T2_PATHS = [
    ("literal", _t2_literal),
    ("rank-one-sum", _t2_rank_one),
    ("selector", _t2_selector),
    ("index-product", _t2_index_product),
]


def t2_embed(lam: ls.LambdaSequence, P: np.ndarray, Q: np.ndarray, k: int, l: int) -> T2Result:
    """Certificate for P (x) Q with P in M_k(M_d1)^+, Q in M_l(M_d2)^+.

    Candidate constructions are tried in turn; each must reproduce the
    flattening of P (x) Q before it is accepted. The attempts are recorded.
    """
    if lam.arity != 2:
        raise UnsupportedSequenceError("t2_embed covers m = 2")
    P, Q = mc.as_cmatrix(P, name="P"), mc.as_cmatrix(Q, name="Q")
    if P.shape[0] % k or Q.shape[0] % l:
        raise DimensionError("P, Q sizes must be multiples of k, l")
    for name, M in (("P", P), ("Q", Q)):
        if not mc.is_psd(M).ok:
            raise NotPositiveError(f"{name} is not positive")
    target = pq_flat(P, Q, k, l)
    attempts = []
    for name, build in _T2_PATHS:
        try:
            cert = build(lam, P, Q, k, l)
            ok = verify_certificate(lam, cert, target)
        except (DimensionError, UnsupportedSequenceError, NotPositiveError) as exc:
            attempts.append({"path": name, "ok": False, "reason": str(exc)})
            continue
        attempts.append({"path": name, "ok": ok.ok, "residual": ok.realization_residual})
        if ok.ok:
            return T2Result(cert, name, attempts)
    raise UnsupportedSequenceError(f"no (T2) construction verified for {lam.name}: {attempts}")
