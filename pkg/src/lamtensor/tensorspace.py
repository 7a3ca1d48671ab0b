"""Elements of M_n(M_{d_1} x ... x M_{d_m}) and their lambda-decompositions.

An element is stored through its canonical flattening, a single square
matrix of size n * d_1 * ... * d_m with the n index outermost and d_m
innermost. A decomposition u = alpha (x)_{lambda_j}(v_1, ..., v_m) beta
keeps alpha (n x tau(j)), beta (tau(j) x n) and the factors v_t in
M_j(M_{d_t}) as (j*d_t)-square block matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import axioms
from . import lambdaseq as ls
from . import matcore as mc
from .errors import DimensionError, InvolutionUnsupportedError, NotSelfAdjointError
from .serialize import decode_matrix, encode_matrix

REALIZE_TOL = 1e-9
SELF_ADJOINT_TOL = 1e-9


@dataclass(frozen=True)
class SpaceSpec:
    n: int
    dims: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1 or not self.dims or any(d < 1 for d in self.dims):
            raise DimensionError(f"invalid space n={self.n}, dims={self.dims}")

    @property
    def m(self) -> int:
        return len(self.dims)

    @property
    def inner(self) -> int:
        return int(np.prod(self.dims))

    @property
    def size(self) -> int:
        return self.n * self.inner

    def to_json(self) -> dict:
        return {"n": self.n, "dims": list(self.dims)}

    @classmethod
    def from_json(cls, obj: dict) -> "SpaceSpec":
        return cls(int(obj["n"]), tuple(int(d) for d in obj["dims"]))


@dataclass(frozen=True, eq=False)
class Decomposition:
    level: int
    alpha: np.ndarray
    factors: tuple[np.ndarray, ...]
    beta: np.ndarray

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] // self.level for f in self.factors)

    def spec(self) -> SpaceSpec:
        return SpaceSpec(self.n, self.dims)

    def value(self) -> float:
        return decomposition_value(self)

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "alpha": encode_matrix(self.alpha),
            "factors": [encode_matrix(f) for f in self.factors],
            "beta": encode_matrix(self.beta),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Decomposition":
        return cls(
            int(obj["level"]),
            decode_matrix(obj["alpha"], name="alpha"),
            tuple(decode_matrix(f, name=f"factors[{i}]") for i, f in enumerate(obj["factors"])),
            decode_matrix(obj["beta"], name="beta"),
        )


@dataclass(frozen=True, eq=False)
class TensorElement:
    spec: SpaceSpec
    flat: np.ndarray

    def __post_init__(self):
        if self.flat.shape != (self.spec.size, self.spec.size):
            raise DimensionError(f"flat has shape {self.flat.shape}, expected size {self.spec.size}")

    def adjoint(self) -> "TensorElement":
        return TensorElement(self.spec, mc.adjoint(self.flat))

    def __neg__(self) -> "TensorElement":
        return TensorElement(self.spec, -self.flat)

    def to_json(self) -> dict:
        return {"spec": self.spec.to_json(), "flat": encode_matrix(self.flat)}

    @classmethod
    def from_json(cls, obj: dict) -> "TensorElement":
        return cls(SpaceSpec.from_json(obj["spec"]), decode_matrix(obj["flat"], name="flat"))


class NormBound(NamedTuple):
    value: float
    best: Decomposition | None
    index: int


def check_shapes(lam: ls.LambdaSequence, dec: Decomposition, spec: SpaceSpec | None = None) -> None:
    j = dec.level
    tau = lam.tau(j)
    if len(dec.factors) != lam.arity:
        raise DimensionError(f"{lam.name} needs {lam.arity} factors, got {len(dec.factors)}")
    if dec.alpha.ndim != 2 or dec.alpha.shape[1] != tau:
        raise DimensionError(f"alpha must be n x {tau}, got {dec.alpha.shape}")
    if dec.beta.shape != (tau, dec.alpha.shape[0]):
        raise DimensionError(f"beta must be {tau} x {dec.alpha.shape[0]}, got {dec.beta.shape}")
    for t, f in enumerate(dec.factors):
        if f.ndim != 2 or f.shape[0] != f.shape[1] or f.shape[0] % j:
            raise DimensionError(f"factor {t + 1} must be a square (level*d) matrix, got {f.shape}")
    if spec is not None and (spec.n != dec.n or spec.dims != dec.dims):
        raise DimensionError(f"decomposition lives in n={dec.n}, dims={dec.dims}, not {spec}")


def tensorized(lam: ls.LambdaSequence, dec: Decomposition) -> np.ndarray:
    """(x)_{lambda_j}(v_1, ..., v_m) as a tau(j) * D square matrix."""
    return lam.tensorize(dec.level, dec.factors, dec.dims)


def realize_flat(lam: ls.LambdaSequence, dec: Decomposition) -> np.ndarray:
    check_shapes(lam, dec)
    tau, inner = lam.tau(dec.level), int(np.prod(dec.dims))
    mid = tensorized(lam, dec).reshape(tau, inner, tau, inner)
    out = np.einsum("na,axby,bm->nxmy", dec.alpha, mid, dec.beta)
    n = dec.n
    return out.reshape(n * inner, n * inner)


def realize(lam: ls.LambdaSequence, spec: SpaceSpec | None, dec: Decomposition) -> TensorElement:
    check_shapes(lam, dec, spec)
    return TensorElement(spec or dec.spec(), realize_flat(lam, dec))


def decomposition_value(dec: Decomposition) -> float:
    val = mc.op_norm(dec.alpha) * mc.op_norm(dec.beta)
    for f in dec.factors:
        val *= mc.op_norm(f)
    return float(val)


def star(lam: ls.LambdaSequence, dec: Decomposition) -> Decomposition:
    """(beta^*, v_1^*, ..., v_m^*, alpha^*); needs (O1) at the decomposition level."""
    axioms.require(lam, "O1", dec.level, InvolutionUnsupportedError)
    return Decomposition(
        dec.level, mc.adjoint(dec.beta), tuple(mc.adjoint(f) for f in dec.factors), mc.adjoint(dec.alpha)
    )


def scaled(dec: Decomposition, c: complex) -> Decomposition:
    return Decomposition(dec.level, dec.alpha * c, dec.factors, dec.beta)


def direct_sum(lam: ls.LambdaSequence, d1: Decomposition, d2: Decomposition) -> Decomposition:
    """A single decomposition of realize(d1) + realize(d2) at level j1 + j2.

    Uses the (E2) splitting P with factors diag(v_t, w_t), left row
    (alpha_1 alpha_2) P and right column P^* (beta_1; beta_2).
    """
    if d1.n != d2.n or d1.dims != d2.dims:
        raise DimensionError("summands live in different spaces")
    P = ls.e2_witness(lam, d1.level, d2.level)
    alpha = np.hstack([d1.alpha, d2.alpha]) @ P
    beta = mc.adjoint(P) @ np.vstack([d1.beta, d2.beta])
    factors = tuple(mc.block_assemble("diag", [v, w]) for v, w in zip(d1.factors, d2.factors))
    return Decomposition(d1.level + d2.level, alpha, factors, beta)


def is_self_adjoint(flat: np.ndarray, tol: float = SELF_ADJOINT_TOL) -> bool:
    return mc.op_norm(flat - mc.adjoint(flat)) <= tol * (1.0 + mc.op_norm(flat))


def symmetrize(lam: ls.LambdaSequence, dec: Decomposition, delta: float = 0.0) -> Decomposition:
    """Rewrite a decomposition of a self-adjoint element as a (x)_{lambda_2j}(x'_t) a^*.

    The new factors are [[0, x_t^*], [x_t, 0]] and the new row is
    (mu^-1 beta^* / sqrt2, mu alpha / sqrt2) P with P the (E2) splitting at
    (j, j). mu balances the two halves of the row so the value does not
    exceed ||alpha|| ||beta|| prod ||x_t||.
    """
    u = realize_flat(lam, dec)
    if not is_self_adjoint(u):
        raise NotSelfAdjointError("symmetrize needs a self-adjoint element")
    j = dec.level
    axioms.require(lam, "O1", j, InvolutionUnsupportedError)
    axioms.require(lam, "O2", j)
    a, b = mc.op_norm(dec.alpha), mc.op_norm(dec.beta)
    mu = np.sqrt(b / a) if a > 0 and b > 0 else 1.0
    row = np.hstack([mc.adjoint(dec.beta) / mu, mu * dec.alpha]) / np.sqrt(2.0)
    P = ls.e2_witness(lam, j, j)
    alpha = row @ P
    factors = tuple(mc.block_assemble("adiag", [mc.adjoint(x), x]) for x in dec.factors)
    out = Decomposition(2 * j, alpha, factors, mc.adjoint(alpha))
    if out.value() > dec.value() * (1 + 1e-12) + delta + 1e-12:
        raise ArithmeticError("symmetrized value exceeds the original; balancing failed")
    return out


def normalized(dec: Decomposition) -> Decomposition:
    """Unit-norm factors with the scalar absorbed into alpha, then alpha/beta balanced."""
    norms = [mc.op_norm(f) for f in dec.factors]
    a, b = mc.op_norm(dec.alpha), mc.op_norm(dec.beta)
    if min(norms + [a, b]) == 0.0:
        return dec
    factors = tuple(f / c for f, c in zip(dec.factors, norms))
    alpha = dec.alpha * float(np.prod(norms))
    a = a * float(np.prod(norms))
    s = np.sqrt(b / a)
    return Decomposition(dec.level, alpha * s, factors, dec.beta / s)


def realizes(lam: ls.LambdaSequence, element: TensorElement, dec: Decomposition, tol: float = REALIZE_TOL) -> bool:
    if dec.n != element.spec.n or dec.dims != element.spec.dims:
        return False
    diff = realize_flat(lam, dec) - element.flat
    return mc.max_abs(diff) <= tol * (1.0 + mc.max_abs(element.flat))


def lambda_norm_ub(lam: ls.LambdaSequence, element: TensorElement,
                   candidates: Sequence[Decomposition]) -> NormBound:
    """Certified upper bound on the lambda-norm: the best candidate value."""
    if not candidates:
        raise ValueError("lambda_norm_ub needs at least one candidate decomposition")
    best = None
    for i, dec in enumerate(candidates):
        if not realizes(lam, element, dec):
            raise ValueError(f"candidate {i} does not realize the element")
        nd = normalized(dec)
        val = decomposition_value(nd)
        if best is None or val < best.value:
            best = NormBound(val, nd, i)
    return best


def min_norm(element: TensorElement) -> float:
    """Injective (minimal) norm: for matrix algebras, the norm of the flattening."""
    return mc.op_norm(element.flat)


# -- constructors -------------------------------------------------------------

def elementary(xs: Sequence[np.ndarray]) -> Decomposition:
    """x_1 (x) ... (x) x_m at n = 1 through the level-1 decomposition."""
    one = np.ones((1, 1), dtype=mc.DTYPE)
    return Decomposition(1, one, tuple(mc.as_cmatrix(x) for x in xs), one.copy())


def unit_decomposition(dims: Sequence[int], n: int = 1) -> Decomposition:
    """1_n (x) 1 (x) ... (x) 1 at level 1 when n = 1; for n > 1 use order.scalar_certificate."""
    if n != 1:
        raise DimensionError("unit_decomposition is the n = 1 unit")
    return elementary([mc.identity(d) for d in dims])


def random_decomposition(lam: ls.LambdaSequence, spec: SpaceSpec, level: int,
                         rng: np.random.Generator) -> Decomposition:
    tau = lam.tau(level)
    alpha = mc.random_complex(rng, (spec.n, tau))
    beta = mc.random_complex(rng, (tau, spec.n))
    factors = tuple(mc.random_complex(rng, (level * d, level * d)) for d in spec.dims)
    return Decomposition(level, alpha, factors, beta)


def random_self_adjoint(lam: ls.LambdaSequence, spec: SpaceSpec, level: int,
                        rng: np.random.Generator) -> Decomposition:
    """Decomposition of (d + d^*) / 2 for a random d, as one direct sum."""
    d = random_decomposition(lam, spec, level, rng)
    half = 1.0 / np.sqrt(2.0)
    return direct_sum(lam, scaled(d, half), scaled(star(lam, d), half))
