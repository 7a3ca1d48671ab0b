"""Lambda-sequences: families of m-linear matrix maps M_k^m -> M_tau(k).

Every builtin is described by an ordered partition of the m slots into
contiguous groups. Each group combines its slots with one base product
(``kronecker``, ``schur`` or ``matprod``) and the group results are joined
by the Kronecker product. ``kronecker`` is m singleton groups, ``schur`` and
``matprod`` are one group each, and ``mixed`` is anything in between.

Custom sequences carry a plain ``eval(k, args)`` callable and an optional
witness provider.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import matcore as mc
from .errors import ArityError, DimensionError, UnsupportedSequenceError

PRODUCTS = ("kronecker", "schur", "matprod")
BUILTIN_KINDS = ("kronecker", "schur", "matprod", "mixed")

WITNESS_TOL = 1e-10


@dataclass(frozen=True)
class Group:
    slots: tuple[int, ...]  # 0-based, contiguous
    product: str

    def tau(self, k: int) -> int:
        if self.product == "kronecker":
            return k ** len(self.slots)
        return k


@dataclass(frozen=True)
class LambdaSequence:
    arity: int
    kind: str
    groups: tuple[Group, ...] = ()
    custom_eval: Callable[[int, list], np.ndarray] | None = field(default=None, repr=False)
    custom_tau: Callable[[int], int] | None = field(default=None, repr=False)
    witness_provider: Any = field(default=None, repr=False)
    label: str = ""

    @property
    def is_builtin(self) -> bool:
        return self.kind in BUILTIN_KINDS

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "mixed":
            inner = ",".join(
                f"[{'/'.join(str(s + 1) for s in g.slots)}]{g.product}" for g in self.groups
            )
            return f"mixed({inner})"
        return f"{self.kind}{self.arity}"

    def tau(self, k: int) -> int:
        if k < 1:
            raise DimensionError("level must be >= 1")
        if self.custom_tau is not None:
            return int(self.custom_tau(k))
        return int(np.prod([g.tau(k) for g in self.groups]))

    def _check_args(self, k: int, args: Sequence[np.ndarray]) -> list[np.ndarray]:
        if len(args) != self.arity:
            raise ArityError(f"{self.name} takes {self.arity} arguments, got {len(args)}")
        out = []
        for a in args:
            a = np.asarray(a, dtype=mc.DTYPE)
            if a.ndim < 2 or a.shape[-2:] != (k, k):
                raise DimensionError(f"arguments must be {k}x{k}, got {a.shape}")
            out.append(a)
        return out

    def eval(self, k: int, args: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate lambda_k; leading axes of the arguments broadcast as a batch."""
        args = self._check_args(k, args)
        if self.custom_eval is not None:
            return _batched_custom(self, k, args)
        out = None
        for g in self.groups:
            part = _group_eval(g, [args[s] for s in g.slots])
            out = part if out is None else mc.kron(out, part)
        return out

    def tensorize(self, k: int, factors: Sequence[np.ndarray], dims: Sequence[int]) -> np.ndarray:
        """The map (v_1, ..., v_m) -> lambda_k tensorized with the V-parts.

        ``factors[t]`` is an element of M_k(M_{d_t}) stored as a (k*d_t)-square
        block matrix. The result lives in M_tau(k)(M_{d_1} x ... x M_{d_m}) with
        the tau index outermost and d_1, ..., d_m following in slot order.
        Leading batch axes are allowed.
        """
        if len(factors) != self.arity or len(dims) != self.arity:
            raise ArityError(f"{self.name} takes {self.arity} factors")
        blocks = []
        for f, d in zip(factors, dims):
            f = np.asarray(f, dtype=mc.DTYPE)
            if f.shape[-2:] != (k * d, k * d):
                raise DimensionError(f"factor must be {k * d}x{k * d}, got {f.shape}")
            blocks.append(f.reshape(f.shape[:-2] + (k, d, k, d)))
        if self.custom_eval is not None:
            return _tensorize_by_units(self, k, blocks, dims)
        acc = None
        for g in self.groups:
            part = _group_tensorize(g, [blocks[s] for s in g.slots])
            acc = part if acc is None else _kron4(acc, part)
        tau, dtot = acc.shape[-4], acc.shape[-3]
        return acc.reshape(acc.shape[:-4] + (tau * dtot, tau * dtot))

    def to_json(self) -> dict:
        if self.kind == "mixed":
            return {
                "kind": "mixed",
                "groups": [
                    {"slots": [s + 1 for s in g.slots], "product": g.product} for g in self.groups
                ],
            }
        if self.kind in PRODUCTS:
            return {"kind": self.kind, "arity": self.arity}
        return {"kind": "custom", "arity": self.arity, "name": self.name}


def kronecker(m: int) -> LambdaSequence:
    _check_arity(m)
    return LambdaSequence(m, "kronecker", tuple(Group((t,), "kronecker") for t in range(m)))


def schur(m: int) -> LambdaSequence:
    _check_arity(m)
    return LambdaSequence(m, "schur", (Group(tuple(range(m)), "schur"),))


def matprod(m: int) -> LambdaSequence:
    _check_arity(m)
    return LambdaSequence(m, "matprod", (Group(tuple(range(m)), "matprod"),))


def mixed(groups: Sequence[tuple[Sequence[int], str]]) -> LambdaSequence:
    """Mixed sequence from ``[(slots, product), ...]`` with 1-based slots."""
    built = []
    expected = 1
    for slots, product in groups:
        slots = list(slots)
        if product not in PRODUCTS:
            raise ValueError(f"unknown product {product!r}")
        if not slots or slots != list(range(expected, expected + len(slots))):
            raise ValueError("mixed groups must cover 1..m contiguously and in order")
        expected += len(slots)
        built.append(Group(tuple(s - 1 for s in slots), product))
    if not built:
        raise ValueError("mixed sequence needs at least one group")
    return LambdaSequence(expected - 1, "mixed", tuple(built))


def custom(
    arity: int,
    tau: Callable[[int], int],
    eval_fn: Callable[[int, list], np.ndarray],
    *,
    name: str = "custom",
    witness_provider: Any = None,
) -> LambdaSequence:
    """Wrap an arbitrary m-linear map. ``eval_fn(k, [a_1..a_m])`` returns tau(k)-square."""
    _check_arity(arity)
    return LambdaSequence(
        arity, "custom", (), custom_eval=eval_fn, custom_tau=tau,
        witness_provider=witness_provider, label=name,
    )


def from_json(obj: dict) -> LambdaSequence:
    kind = obj.get("kind")
    if kind == "mixed":
        groups = obj.get("groups")
        if not isinstance(groups, list):
            raise ValueError("mixed lambda needs a 'groups' list")
        return mixed([(g["slots"], g["product"]) for g in groups])
    if kind in PRODUCTS:
        arity = obj.get("arity")
        if not isinstance(arity, int):
            raise ValueError("lambda spec needs an integer 'arity'")
        return {"kronecker": kronecker, "schur": schur, "matprod": matprod}[kind](arity)
    raise ValueError(f"unknown lambda kind {kind!r}")


def _check_arity(m: int) -> None:
    if not isinstance(m, int) or m < 1:
        raise ArityError("arity must be a positive integer")


# -- evaluation ---------------------------------------------------------------

def _group_eval(g: Group, args: list[np.ndarray]) -> np.ndarray:
    out = args[0]
    for a in args[1:]:
        if g.product == "kronecker":
            out = mc.kron(out, a)
        elif g.product == "schur":
            out = out * a
        else:
            out = out @ a
    return out


def _batched_custom(lam: LambdaSequence, k: int, args: list[np.ndarray]) -> np.ndarray:
    batch = np.broadcast_shapes(*(a.shape[:-2] for a in args))
    if not batch:
        res = np.asarray(lam.custom_eval(k, list(args)), dtype=mc.DTYPE)
        _check_custom_out(lam, k, res)
        return res
    args = [np.broadcast_to(a, batch + (k, k)) for a in args]
    tau = lam.tau(k)
    out = np.empty(batch + (tau, tau), dtype=mc.DTYPE)
    for idx in np.ndindex(*batch):
        res = np.asarray(lam.custom_eval(k, [a[idx] for a in args]), dtype=mc.DTYPE)
        _check_custom_out(lam, k, res)
        out[idx] = res
    return out


def _check_custom_out(lam: LambdaSequence, k: int, res: np.ndarray) -> None:
    tau = lam.tau(k)
    if res.shape != (tau, tau):
        raise DimensionError(f"{lam.name}: eval at level {k} gave {res.shape}, expected {tau}x{tau}")


def _kron4(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker join of two (tau, D, tau, D) arrays, tau and D indices kept apart."""
    out = a[..., :, None, :, None, :, None, :, None] * b[..., None, :, None, :, None, :, None, :]
    s = out.shape
    lead = s[:-8]
    return out.reshape(lead + (s[-8] * s[-7], s[-6] * s[-5], s[-4] * s[-3], s[-2] * s[-1]))


def _group_tensorize(g: Group, blocks: list[np.ndarray]) -> np.ndarray:
    acc = blocks[0]
    for b in blocks[1:]:
        if g.product == "kronecker":
            acc = _kron4(acc, b)
        elif g.product == "schur":
            out = acc[..., :, :, None, :, :, None] * b[..., :, None, :, :, None, :]
            s = out.shape
            acc = out.reshape(s[:-6] + (s[-6], s[-5] * s[-4], s[-3], s[-2] * s[-1]))
        else:
            out = np.einsum("...ibje,...jxky->...ibxkey", acc, b)
            s = out.shape
            acc = out.reshape(s[:-6] + (s[-6], s[-5] * s[-4], s[-3], s[-2] * s[-1]))
    return acc


def _tensorize_by_units(lam: LambdaSequence, k: int, blocks: list[np.ndarray], dims) -> np.ndarray:
    tau = lam.tau(k)
    dtot = int(np.prod(dims))
    batch = np.broadcast_shapes(*(b.shape[:-4] for b in blocks))
    out = np.zeros(batch + (tau, dtot, tau, dtot), dtype=mc.DTYPE)
    pairs = list(itertools.product(range(k), repeat=2))
    for combo in itertools.product(pairs, repeat=lam.arity):
        units = [mc.matrix_unit(i + 1, j + 1, k) for i, j in combo]
        lval = lam.eval(k, units)
        if not np.any(lval):
            continue
        part = None
        for (i, j), b in zip(combo, blocks):
            piece = b[..., i, :, j, :]
            part = piece if part is None else mc.kron(part, piece)
        out += lval[:, None, :, None] * part[..., None, :, None, :]
    return out.reshape(batch + (tau * dtot, tau * dtot))


# -- permutations -------------------------------------------------------------

def shuffle_permutation(a_dims: Sequence[int], b_dims: Sequence[int]) -> np.ndarray:
    """Permutation Pi with (A_1 x..x A_G) x (B_1 x..x B_G) = Pi [(A_1 x B_1) x..] Pi^T."""
    g = len(a_dims)
    inter = [d for pair in zip(a_dims, b_dims) for d in pair]
    n = int(np.prod(inter)) if inter else 1
    idx = np.arange(n).reshape(inter) if inter else np.arange(1)
    axes = list(range(0, 2 * g, 2)) + list(range(1, 2 * g, 2))
    perm = np.transpose(idx, axes).reshape(-1) if inter else idx
    out = np.zeros((n, n), dtype=mc.DTYPE)
    out[np.arange(n), perm] = 1.0
    return out


def _diag_selector(k: int, copies: int) -> np.ndarray:
    """k x k^copies matrix picking the multi-indices (j, ..., j)."""
    out = np.zeros((k, k ** copies), dtype=mc.DTYPE)
    for j in range(k):
        out[j, sum(j * k ** e for e in range(copies))] = 1.0
    return out


# -- witnesses ----------------------------------------------------------------

@dataclass(frozen=True)
class E1Witness:
    p: int
    S: np.ndarray
    T: np.ndarray
    a: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class PairWitness:
    left: np.ndarray
    right: np.ndarray


# Builtin witnesses are re-verified once per (sequence, condition, levels), and only
# while the exhaustive sweep stays below VERIFY_CAP evaluated output entries.
VERIFY_CAP = 2 * 10 ** 7
_VERIFIED: set = set()


def _should_verify(lam: LambdaSequence, key: tuple, cost: int) -> bool:
    if (lam, key) in _VERIFIED:
        return False
    return not lam.is_builtin or cost <= VERIFY_CAP


def _mark_verified(lam: LambdaSequence, key: tuple) -> None:
    _VERIFIED.add((lam, key))


def _provided(lam: LambdaSequence, what: str, *args):
    fn = getattr(lam.witness_provider, what, None) if lam.witness_provider is not None else None
    if fn is None:
        raise UnsupportedSequenceError(f"no {what.upper()} witness available for {lam.name}")
    return fn(*args)


def e1_witness(lam: LambdaSequence, k: int, *, verify: bool = True) -> E1Witness:
    if not lam.is_builtin:
        w = _provided(lam, "e1", k)
        w = w if isinstance(w, E1Witness) else E1Witness(int(w[0]), *map(np.asarray, w[1:3]), tuple(w[3]))
    else:
        s_parts, t_parts = [], []
        for g in lam.groups:
            if g.product == "kronecker":
                sel = _diag_selector(k, len(g.slots))
            else:
                sel = mc.identity(k)
            s_parts.append(sel)
            t_parts.append(mc.adjoint(sel))
        outer = _diag_selector(k, len(lam.groups))
        S = outer @ mc.kron_all(s_parts)
        T = mc.kron_all(t_parts) @ mc.adjoint(outer)
        w = E1Witness(k, S, T, tuple(mc.matrix_unit(j, j, k) for j in range(1, k + 1)))
    if verify and _should_verify(lam, ("E1", k), k ** lam.arity * lam.tau(k) ** 2):
        from .axioms import e1_residual

        res, _ = e1_residual(lam, k, w)
        if res > WITNESS_TOL:
            raise UnsupportedSequenceError(f"E1 witness for {lam.name} fails (residual {res:.3g})")
        _mark_verified(lam, ("E1", k))
    return w


def e2_witness(lam: LambdaSequence, r: int, s: int, *, verify: bool = True) -> np.ndarray:
    """P in M_{tau(r)+tau(s), tau(r+s)} splitting lambda_{r+s} into diag blocks."""
    if not lam.is_builtin:
        P = np.asarray(_provided(lam, "e2", r, s), dtype=mc.DTYPE)
    else:
        top = np.hstack([mc.identity(r), np.zeros((r, s), dtype=mc.DTYPE)])
        bot = np.hstack([np.zeros((s, r), dtype=mc.DTYPE), mc.identity(s)])
        p1, p2 = [], []
        for g in lam.groups:
            copies = len(g.slots) if g.product == "kronecker" else 1
            p1.append(mc.kron_all([top] * copies))
            p2.append(mc.kron_all([bot] * copies))
        P = np.vstack([mc.kron_all(p1), mc.kron_all(p2)])
    if verify and _should_verify(lam, ("E2", r, s), (r * r + s * s) ** lam.arity * lam.tau(r + s) ** 2):
        from .axioms import e2_residual

        res, _ = e2_residual(lam, r, s, P)
        if res > WITNESS_TOL:
            raise UnsupportedSequenceError(f"E2 witness for {lam.name} fails (residual {res:.3g})")
        _mark_verified(lam, ("E2", r, s))
    return P


def w1_witness(lam: LambdaSequence, p: int, slot: int, *, verify: bool = True) -> PairWitness:
    """(P, Q) with gamma = P lambda_p(I, .., gamma, .., I) Q; ``slot`` is 1-based."""
    if not 1 <= slot <= lam.arity:
        raise ArityError(f"slot must lie in 1..{lam.arity}")
    if not lam.is_builtin:
        w = _provided(lam, "w1", p, slot)
        w = w if isinstance(w, PairWitness) else PairWitness(*map(np.asarray, w))
    else:
        left, right = [], []
        for g in lam.groups:
            tau = g.tau(p)
            if slot - 1 not in g.slots:
                e = np.zeros((1, tau), dtype=mc.DTYPE)
                e[0, 0] = 1.0
                left.append(e)
                right.append(mc.adjoint(e))
                continue
            if g.product == "kronecker" and len(g.slots) > 1:
                pos = g.slots.index(slot - 1)
                sel = np.zeros((p, tau), dtype=mc.DTYPE)
                for i in range(p):
                    sel[i, i * p ** (len(g.slots) - 1 - pos)] = 1.0
                left.append(sel)
                right.append(mc.adjoint(sel))
            elif g.product == "schur" and len(g.slots) > 1 and p > 1:
                # gamma (.) I keeps only the diagonal of gamma
                raise UnsupportedSequenceError(
                    f"{lam.name}: slot {slot} sits in a Schur group; lambda_p(I,..,gamma,..,I) "
                    "is diag(gamma), no contractive pair recovers off-diagonal gamma"
                )
            else:
                left.append(mc.identity(p))
                right.append(mc.identity(p))
        w = PairWitness(mc.kron_all(left), mc.kron_all(right))
    if verify and _should_verify(lam, ("W1", p, slot), p * p * lam.tau(p) ** 2):
        from .axioms import w1_residual

        res, _ = w1_residual(lam, p, slot, w)
        if res > WITNESS_TOL:
            raise UnsupportedSequenceError(f"W1 witness for {lam.name} fails (residual {res:.3g})")
        _mark_verified(lam, ("W1", p, slot))
    return w


def w2_witness(lam: LambdaSequence, p: int, q: int, *, verify: bool = True) -> PairWitness:
    """(S, T) with lambda_p(a) x lambda_q(b) = S lambda_pq(a_1 x b_1, ..) T."""
    if not lam.is_builtin:
        w = _provided(lam, "w2", p, q)
        w = w if isinstance(w, PairWitness) else PairWitness(*map(np.asarray, w))
    else:
        s_parts, t_parts = [], []
        for g in lam.groups:
            if g.product == "kronecker" and len(g.slots) > 1:
                sh = shuffle_permutation([p] * len(g.slots), [q] * len(g.slots))
            else:
                sh = mc.identity(g.tau(p) * g.tau(q))
            s_parts.append(sh)
            t_parts.append(sh.T.copy())
        outer = shuffle_permutation([g.tau(p) for g in lam.groups], [g.tau(q) for g in lam.groups])
        w = PairWitness(outer @ mc.kron_all(s_parts), mc.kron_all(t_parts) @ outer.T)
    if verify and _should_verify(lam, ("W2", p, q), (p * p * q * q) ** lam.arity * lam.tau(p * q) ** 2):
        from .axioms import w2_residual

        res, _ = w2_residual(lam, p, q, w)
        if res > WITNESS_TOL:
            raise UnsupportedSequenceError(f"W2 witness for {lam.name} fails (residual {res:.3g})")
        _mark_verified(lam, ("W2", p, q))
    return w
