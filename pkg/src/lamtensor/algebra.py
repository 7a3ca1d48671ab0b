"""Product and involution on lambda-tensor products of matrix algebras.

Products go through the (W2) witness: for x = alpha (x)_r(u) beta and
y = gamma (x)_s(v) delta the product is
((alpha (x) gamma) S) (x)_{rs}(z_1, ..., z_m) (T (beta (x) delta)),
with z_t[(i,k),(j,l)] = u_t[i,j] v_t[k,l]. Every product is checked
against plain multiplication of the flattenings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import lambdaseq as ls
from . import matcore as mc
from . import tensorspace as ts
from .errors import DimensionError

ORACLE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    dec: ts.Decomposition
    flat: np.ndarray

    @property
    def dims(self) -> tuple[int, ...]:
        return self.dec.dims

    def value(self) -> float:
        return self.dec.value()


def element(lam: ls.LambdaSequence, dec: ts.Decomposition) -> AlgebraElement:
    if dec.n != 1:
        raise DimensionError("algebra elements live at matrix level n = 1")
    return AlgebraElement(dec, ts.realize_flat(lam, dec))


def unit(lam: ls.LambdaSequence, dims: Sequence[int]) -> AlgebraElement:
    return element(lam, ts.unit_decomposition(dims))


def random_element(lam: ls.LambdaSequence, dims: Sequence[int], level: int,
                   rng: np.random.Generator) -> AlgebraElement:
    return element(lam, ts.random_decomposition(lam, ts.SpaceSpec(1, tuple(dims)), level, rng))


def _block_product(u: np.ndarray, v: np.ndarray, r: int, s: int) -> np.ndarray:
    d = u.shape[0] // r
    z = np.einsum("iajc,kclb->ikajlb", u.reshape(r, d, r, d), v.reshape(s, d, s, d))
    return z.reshape(r * s * d, r * s * d)


def multiply(lam: ls.LambdaSequence, x: AlgebraElement, y: AlgebraElement,
             check: bool = True) -> AlgebraElement:
    if x.dims != y.dims:
        raise DimensionError(f"factors live over {x.dims} and {y.dims}")
    r, s = x.dec.level, y.dec.level
    w = ls.w2_witness(lam, r, s)
    alpha = mc.kron(x.dec.alpha, y.dec.alpha) @ w.left
    beta = w.right @ mc.kron(x.dec.beta, y.dec.beta)
    factors = tuple(_block_product(u, v, r, s) for u, v in zip(x.dec.factors, y.dec.factors))
    prod = element(lam, ts.Decomposition(r * s, alpha, factors, beta))
    if check:
        ref = x.flat @ y.flat
        if mc.max_abs(prod.flat - ref) > ORACLE_TOL * (1.0 + mc.max_abs(ref)):
            raise ArithmeticError("product decomposition disagrees with the flattening product")
    return prod


def involution(lam: ls.LambdaSequence, x: AlgebraElement) -> AlgebraElement:
    """x^*; refused unless lambda passes (O1) at the decomposition level."""
    return element(lam, ts.star(lam, x.dec))


def submult_report(lam: ls.LambdaSequence, pairs: Sequence[tuple[AlgebraElement, AlgebraElement]],
                   tol: float = ORACLE_TOL) -> dict:
    rows = []
    ok = True
    for x, y in pairs:
        p = multiply(lam, x, y, check=False)
        ref = x.flat @ y.flat
        residual = mc.max_abs(p.flat - ref)
        bound = x.value() * y.value()
        holds = p.value() <= bound * (1 + tol) + tol and residual <= tol * (1.0 + mc.max_abs(ref))
        ok = ok and holds
        rows.append({"product_value": p.value(), "bound": bound,
                     "oracle_residual": residual, "holds": bool(holds)})
    return {"ok": bool(ok), "pairs": rows}
