"""Bounded machine verification of the (E), (N), (W) and (O) conditions.

Exact identities are checked on every matrix-unit tuple at the requested
levels; the sweeps are vectorized over chunks of tuples. A failing check
records the tuple with the largest residual, preferring one where neither
side of the identity vanishes.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Callable, Sequence

import numpy as np

from . import lambdaseq as ls
from . import matcore as mc
from .errors import RefusedError, UnsupportedSequenceError

TOL_EXACT = 1e-10
TOL_PSD = 1e-9
ENUM_CAP = 10 ** 6
CHUNK_ENTRIES = 1 << 21
GATE_CAP = 2 * 10 ** 5

PASS, FAIL, UNKNOWN = "pass", "fail", "unknown"


@dataclass
class CheckResult:
    condition: str
    params: dict
    verdict: str
    residual: float | None = None
    tuples: int = 0
    witness: dict | None = None
    counterexample: dict | None = None
    note: str = ""

    def to_json(self) -> dict:
        out = {
            "condition": self.condition,
            "params": self.params,
            "verdict": self.verdict,
            "residual": self.residual,
            "tuples": self.tuples,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class Budget:
    max_level: int = 3
    cap: int = ENUM_CAP
    trials: int = 200
    seed: int = 0
    tol: float = TOL_EXACT
    psd_tol: float = TOL_PSD
    o3_dims: tuple[int, ...] | None = None


@dataclass
class AxiomReport:
    sequence: dict
    name: str
    budget: Budget
    results: list[CheckResult] = field(default_factory=list)

    def verdict(self, condition: str) -> str:
        vs = [r.verdict for r in self.results if r.condition == condition]
        if not vs:
            return UNKNOWN
        if FAIL in vs:
            return FAIL
        if all(v == PASS for v in vs):
            return PASS
        return UNKNOWN

    def max_residual(self, condition: str) -> float:
        vals = [r.residual for r in self.results if r.condition == condition and r.residual is not None]
        return max(vals) if vals else 0.0

    def conditions(self) -> list[str]:
        seen = []
        for r in self.results:
            if r.condition not in seen:
                seen.append(r.condition)
        return seen

    def to_json(self) -> dict:
        b = self.budget
        return {
            "sequence": self.sequence,
            "name": self.name,
            "budget": {
                "max_level": b.max_level, "cap": b.cap, "trials": b.trials, "seed": b.seed,
                "tol": b.tol, "psd_tol": b.psd_tol,
                "o3_dims": list(b.o3_dims) if b.o3_dims else None,
            },
            "summary": {
                c: {"verdict": self.verdict(c), "max_residual": self.max_residual(c)}
                for c in self.conditions()
            },
            "results": [r.to_json() for r in self.results],
        }


# -- payload helpers ----------------------------------------------------------

def matrix_payload(a: np.ndarray, limit: int = 400) -> dict | list:
    """Full [re, im] encoding for small matrices, a digest for large ones."""
    from .serialize import encode_matrix

    a = np.asarray(a, dtype=mc.DTYPE)
    if a.size <= limit:
        return encode_matrix(a)
    rounded = np.round(a, 12) + 0.0
    digest = hashlib.sha256(np.ascontiguousarray(rounded).tobytes()).hexdigest()
    return {"shape": list(a.shape), "norm": mc.op_norm(a), "nnz": int(np.count_nonzero(rounded)),
            "sha256": digest}


# -- generic sweep ------------------------------------------------------------

@dataclass
class SweepResult:
    residual: float
    count: int
    worst: tuple[int, ...] | None = None
    lhs: np.ndarray | None = None
    rhs: np.ndarray | None = None


def _sweep(n_opt: int, m: int, evaluate: Callable, out_entries: int, tol: float) -> SweepResult:
    """Evaluate all n_opt**m option combos; ``evaluate(combos)`` returns (lhs, rhs)."""
    total = n_opt ** m
    chunk = max(1, CHUNK_ENTRIES // max(1, out_entries))
    best = SweepResult(0.0, total)
    best_nz = False
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        combos = np.stack(np.unravel_index(flat, (n_opt,) * m), axis=1) if m else flat[:, None]
        lhs, rhs = evaluate(combos)
        diff = np.abs(lhs - rhs).reshape(len(flat), -1)
        res = diff.max(axis=1) if diff.shape[1] else np.zeros(len(flat))
        cmax = float(res.max())
        if cmax > tol:
            cand = np.nonzero(res >= cmax - tol)[0]
            lhs_nz = np.abs(lhs[cand]).reshape(len(cand), -1).max(axis=1) > 0.5
            rhs_nz = np.abs(rhs[cand]).reshape(len(cand), -1).max(axis=1) > 0.5
            nz = lhs_nz & rhs_nz
            pick = int(cand[np.argmax(nz)]) if nz.any() else int(cand[0])
            pick_nz = bool(nz.any())
            if (best.worst is None or cmax > best.residual + tol
                    or (abs(cmax - best.residual) <= tol and pick_nz and not best_nz)):
                best.worst = tuple(int(c) for c in combos[pick])
                best.lhs, best.rhs = lhs[pick], rhs[pick]
                best_nz = pick_nz
        best.residual = max(best.residual, cmax)
    return best


def _unit_stack(pairs: Sequence[tuple[int, int]], k: int) -> np.ndarray:
    return np.stack([mc.matrix_unit(i, j, k) for i, j in pairs])


def _units_desc(pairs, combo) -> list[list[int]]:
    return [list(pairs[c]) for c in combo]


# -- residual functions (also used to self-verify witnesses) --------------------

def e1_residual(lam: ls.LambdaSequence, k: int, w: ls.E1Witness) -> tuple[float, SweepResult]:
    m = lam.arity
    a = np.stack([np.asarray(x, dtype=mc.DTYPE) for x in w.a])
    targets = np.stack([mc.matrix_unit(j, j, k) for j in range(1, k + 1)])
    zero = np.zeros((k, k), dtype=mc.DTYPE)
    S, T = np.asarray(w.S, dtype=mc.DTYPE), np.asarray(w.T, dtype=mc.DTYPE)

    def evaluate(combos):
        vals = lam.eval(w.p, [a[combos[:, t]] for t in range(m)])
        lhs = S @ vals @ T
        same = np.all(combos == combos[:, :1], axis=1)
        rhs = np.where(same[:, None, None], targets[combos[:, 0]], zero)
        return lhs, rhs

    sw = _sweep(k, m, evaluate, lam.tau(w.p) ** 2, TOL_EXACT)
    return sw.residual, sw


def _e2_options(r: int, s: int):
    block1 = [(i, j) for i in range(1, r + 1) for j in range(1, r + 1)]
    block2 = [(i, j) for i in range(r + 1, r + s + 1) for j in range(r + 1, r + s + 1)]
    return block1 + block2


def e2_residual(lam: ls.LambdaSequence, r: int, s: int, P: np.ndarray) -> tuple[float, SweepResult]:
    m = lam.arity
    pairs = _e2_options(r, s)
    big = _unit_stack(pairs, r + s)
    small_r = _unit_stack(pairs, r)
    small_s = _unit_stack([(i - r, j - r) for i, j in pairs], s)
    P = np.asarray(P, dtype=mc.DTYPE)
    tr, ts = lam.tau(r), lam.tau(s)
    if P.shape != (tr + ts, lam.tau(r + s)):
        return float("inf"), SweepResult(float("inf"), 0)

    def evaluate(combos):
        lhs = P @ lam.eval(r + s, [big[combos[:, t]] for t in range(m)]) @ mc.adjoint(P)
        rhs = np.zeros_like(lhs)
        rhs[:, :tr, :tr] = lam.eval(r, [small_r[combos[:, t]] for t in range(m)])
        rhs[:, tr:, tr:] = lam.eval(s, [small_s[combos[:, t]] for t in range(m)])
        return lhs, rhs

    sw = _sweep(len(pairs), m, evaluate, lam.tau(r + s) ** 2, TOL_EXACT)
    excess = max(0.0, mc.op_norm(P) - 1.0)
    return max(sw.residual, excess), sw


def w1_residual(lam: ls.LambdaSequence, p: int, slot: int, w: ls.PairWitness) -> tuple[float, SweepResult]:
    m = lam.arity
    P, Q = np.asarray(w.left, dtype=mc.DTYPE), np.asarray(w.right, dtype=mc.DTYPE)
    tau = lam.tau(p)
    if P.shape != (p, tau) or Q.shape != (tau, p):
        return float("inf"), SweepResult(float("inf"), 0)
    pairs = [(i, j) for i in range(1, p + 1) for j in range(1, p + 1)]
    gammas = _unit_stack(pairs, p)
    eye = mc.identity(p)

    def evaluate(combos):
        g = gammas[combos[:, 0]]
        args = [g if t == slot - 1 else eye for t in range(m)]
        return g, P @ lam.eval(p, args) @ Q

    sw = _sweep(len(pairs), 1, evaluate, tau ** 2, TOL_EXACT)
    excess = max(0.0, mc.op_norm(P) - 1.0, mc.op_norm(Q) - 1.0)
    return max(sw.residual, excess), sw


def _w2_options(p: int, q: int):
    return [(i, j, k, l) for i in range(1, p + 1) for j in range(1, p + 1)
            for k in range(1, q + 1) for l in range(1, q + 1)]


def w2_residual(lam: ls.LambdaSequence, p: int, q: int, w: ls.PairWitness) -> tuple[float, SweepResult]:
    m = lam.arity
    S, T = np.asarray(w.left, dtype=mc.DTYPE), np.asarray(w.right, dtype=mc.DTYPE)
    tp, tq, tpq = lam.tau(p), lam.tau(q), lam.tau(p * q)
    if S.shape != (tp * tq, tpq) or T.shape != (tpq, tp * tq):
        return float("inf"), SweepResult(float("inf"), 0)
    opts = _w2_options(p, q)
    alpha = _unit_stack([(i, j) for i, j, _, _ in opts], p)
    beta = _unit_stack([(k, l) for _, _, k, l in opts], q)
    ab = mc.kron(alpha, beta)

    def evaluate(combos):
        lp = lam.eval(p, [alpha[combos[:, t]] for t in range(m)])
        lq = lam.eval(q, [beta[combos[:, t]] for t in range(m)])
        lhs = mc.kron(lp, lq)
        rhs = S @ lam.eval(p * q, [ab[combos[:, t]] for t in range(m)]) @ T
        return lhs, rhs

    sw = _sweep(len(opts), m, evaluate, max(tpq, tp * tq) ** 2 * 2, TOL_EXACT)
    excess = max(0.0, mc.op_norm(S) - 1.0, mc.op_norm(T) - 1.0)
    return max(sw.residual, excess), sw


# -- individual checks --------------------------------------------------------

def _cap_unknown(cond: str, params: dict, count: int, cap: int) -> CheckResult:
    return CheckResult(cond, params, UNKNOWN, tuples=0,
                       note=f"{count} tuples exceed the enumeration cap {cap}; raise --budget or lower the level")


def _finish(cond, params, residual, sw, tol, witness, describe) -> CheckResult:
    if residual <= tol:
        return CheckResult(cond, params, PASS, residual, sw.count, witness=witness)
    ce = None
    if sw.worst is not None:
        ce = {"tuple": describe(sw.worst), "residual": sw.residual,
              "lhs": matrix_payload(sw.lhs), "rhs": matrix_payload(sw.rhs)}
    else:
        ce = {"contractivity_excess": residual}
    return CheckResult(cond, params, FAIL, residual, sw.count, witness=witness, counterexample=ce)


def check_E1(lam: ls.LambdaSequence, k: int, tol: float = TOL_EXACT, cap: int = ENUM_CAP) -> CheckResult:
    params = {"k": k, "m": lam.arity}
    if k ** lam.arity > cap:
        return _cap_unknown("E1", params, k ** lam.arity, cap)
    try:
        w = ls.e1_witness(lam, k, verify=False)
    except UnsupportedSequenceError as exc:
        return CheckResult("E1", params, UNKNOWN, note=str(exc))
    res, sw = e1_residual(lam, k, w)
    witness = {"p": w.p, "S": matrix_payload(w.S), "T": matrix_payload(w.T)}
    return _finish("E1", params, res, sw, tol, witness, lambda c: [x + 1 for x in c])


def check_E2(lam: ls.LambdaSequence, r: int, s: int, tol: float = TOL_EXACT, cap: int = ENUM_CAP) -> CheckResult:
    params = {"r": r, "s": s, "m": lam.arity}
    count = (r * r + s * s) ** lam.arity
    if count > cap:
        return _cap_unknown("E2", params, count, cap)
    try:
        P = ls.e2_witness(lam, r, s, verify=False)
    except UnsupportedSequenceError as exc:
        return CheckResult("E2", params, UNKNOWN, note=str(exc))
    res, sw = e2_residual(lam, r, s, P)
    pairs = _e2_options(r, s)
    witness = {"P": matrix_payload(P), "norm": mc.op_norm(P)}
    return _finish("E2", params, res, sw, tol, witness, lambda c: _units_desc(pairs, c))


def check_E3_N(lam: ls.LambdaSequence, k_max: int = 3, samples: int = 200, seed: int = 0,
               tol: float = TOL_EXACT) -> list[CheckResult]:
    """(E3), (N1), (N2): exact unit value, tau(1), and sampled lower bounds on ||lambda_k||."""
    m = lam.arity
    one = np.ones((1, 1), dtype=mc.DTYPE)
    val = lam.eval(1, [one] * m)
    e3_res = float(np.abs(val - 1.0).max()) if val.shape == (1, 1) else float("inf")
    rng = np.random.default_rng(seed)
    bounds = {}
    for k in range(1, k_max + 1):
        best = mc.op_norm(lam.eval(k, [mc.identity(k)] * m))
        g = mc.random_complex(rng, (samples, m, k, k))
        g = g / np.linalg.norm(g, 2, axis=(-2, -1))[..., None, None]
        vals = lam.eval(k, [g[:, t] for t in range(m)])
        best = max(best, float(np.linalg.norm(vals, 2, axis=(-2, -1)).max()))
        bounds[str(k)] = best
    sup = max(bounds.values())
    out = []
    e3_ok = e3_res <= tol
    if not e3_ok:
        out.append(CheckResult("E3", {"k_max": k_max}, FAIL, e3_res, 1,
                               counterexample={"lambda_1(1..1)": matrix_payload(val)}))
    else:
        verdict = PASS if lam.is_builtin else UNKNOWN
        note = "" if lam.is_builtin else "boundedness of sup_k ||lambda_k|| is only sampled"
        out.append(CheckResult("E3", {"k_max": k_max}, verdict, e3_res, 1,
                               witness={"lambda_1(1..1)": matrix_payload(val), "sampled_norms": bounds},
                               note=note))
    tau1 = lam.tau(1)
    out.append(CheckResult("N1", {}, PASS if tau1 == 1 else FAIL, float(abs(tau1 - 1)), 1,
                           witness={"tau(1)": tau1}))
    if sup > 1.0 + tol:
        worst = max(bounds, key=lambda key: bounds[key])
        out.append(CheckResult("N2", {"k_max": k_max, "samples": samples, "seed": seed}, FAIL,
                               sup - 1.0, samples * k_max,
                               counterexample={"level": int(worst), "sampled_norm": bounds[worst]}))
    else:
        verdict = PASS if lam.is_builtin else UNKNOWN
        note = ("norm one for the builtin products; sampling found no tuple above 1"
                if lam.is_builtin else "sampled lower bound only")
        out.append(CheckResult("N2", {"k_max": k_max, "samples": samples, "seed": seed}, verdict,
                               max(0.0, sup - 1.0), samples * k_max,
                               witness={"sampled_norms": bounds}, note=note))
    return out


def _w1_search(lam: ls.LambdaSequence, p: int, slot: int, tol: float, reason: str) -> CheckResult:
    """Search structured (P, Q) pairs; otherwise look for a rank obstruction."""
    params = {"p": p, "slot": slot, "m": lam.arity}
    tau = lam.tau(p)
    m = lam.arity
    eye = mc.identity(p)
    candidates = []
    if tau >= p:
        emb = np.zeros((p, tau), dtype=mc.DTYPE)
        emb[:, :p] = eye
        candidates.append(("leading-block", ls.PairWitness(emb, mc.adjoint(emb))))
    for label, w in candidates:
        res, _ = w1_residual(lam, p, slot, w)
        if res <= tol:
            return CheckResult("W1", params, PASS, res, p * p,
                               witness={"search": label, "P": matrix_payload(w.left),
                                        "Q": matrix_payload(w.right)})
    # rank(P X Q) <= rank(X): a unit gamma whose image vanishes cannot be recovered
    for i in range(1, p + 1):
        for j in range(1, p + 1):
            gamma = mc.matrix_unit(i, j, p)
            args = [gamma if t == slot - 1 else eye for t in range(m)]
            image = lam.eval(p, args)
            if np.linalg.matrix_rank(image, tol=1e-12) < 1:
                return CheckResult(
                    "W1", params, FAIL, 1.0, p * p,
                    counterexample={
                        "gamma": [i, j], "residual": 1.0,
                        "image": matrix_payload(image),
                        "reason": "lambda_p(I,..,gamma,..,I) = 0, so P(.)Q = 0 != gamma for every P, Q",
                    },
                    note=reason,
                )
    return CheckResult("W1", params, UNKNOWN, note=f"{reason}; structured search found no witness")


def check_W1(lam: ls.LambdaSequence, p: int, slot: int, tol: float = TOL_EXACT) -> CheckResult:
    params = {"p": p, "slot": slot, "m": lam.arity}
    try:
        w = ls.w1_witness(lam, p, slot, verify=False)
    except UnsupportedSequenceError as exc:
        return _w1_search(lam, p, slot, tol, str(exc))
    res, sw = w1_residual(lam, p, slot, w)
    if res > tol:
        return _w1_search(lam, p, slot, tol, f"analytic witness failed with residual {res:.3g}")
    return CheckResult("W1", params, PASS, res, sw.count,
                       witness={"P": matrix_payload(w.left), "Q": matrix_payload(w.right)})


def check_W2(lam: ls.LambdaSequence, p: int, q: int, tol: float = TOL_EXACT, cap: int = ENUM_CAP) -> CheckResult:
    params = {"p": p, "q": q, "m": lam.arity}
    count = (p * p * q * q) ** lam.arity
    if count > cap:
        return _cap_unknown("W2", params, count, cap)
    try:
        w = ls.w2_witness(lam, p, q, verify=False)
    except UnsupportedSequenceError as exc:
        return CheckResult("W2", params, UNKNOWN, note=str(exc))
    res, sw = w2_residual(lam, p, q, w)
    opts = _w2_options(p, q)
    witness = {"S": matrix_payload(w.left), "T": matrix_payload(w.right)}

    def describe(c):
        return [{"alpha": list(opts[x][:2]), "beta": list(opts[x][2:])} for x in c]

    return _finish("W2", params, res, sw, tol, witness, describe)


def check_O1(lam: ls.LambdaSequence, r: int, tol: float = TOL_EXACT, cap: int = ENUM_CAP) -> CheckResult:
    m = lam.arity
    params = {"r": r, "m": m}
    count = r ** (2 * m)
    if count > cap:
        return _cap_unknown("O1", params, count, cap)
    pairs = [(i, j) for i in range(1, r + 1) for j in range(1, r + 1)]
    units = _unit_stack(pairs, r)
    trans = _unit_stack([(j, i) for i, j in pairs], r)

    def evaluate(combos):
        lhs = lam.eval(r, [units[combos[:, t]] for t in range(m)])
        rhs = mc.adjoint(lam.eval(r, [trans[combos[:, t]] for t in range(m)]))
        return lhs, rhs

    sw = _sweep(len(pairs), m, evaluate, lam.tau(r) ** 2, tol)
    return _finish("O1", params, sw.residual, sw, tol, None, lambda c: _units_desc(pairs, c))


def check_O2(lam: ls.LambdaSequence, r: int, tol: float = TOL_EXACT, cap: int = ENUM_CAP) -> CheckResult:
    m = lam.arity
    params = {"r": r, "m": m}
    count = (2 * r * r) ** m
    if count > cap:
        return _cap_unknown("O2", params, count, cap)
    try:
        P = ls.e2_witness(lam, r, r, verify=False)
    except UnsupportedSequenceError as exc:
        return CheckResult("O2", params, UNKNOWN, note=str(exc))
    upper = [(i, j) for i in range(1, r + 1) for j in range(r + 1, 2 * r + 1)]
    lower = [(i, j) for i in range(r + 1, 2 * r + 1) for j in range(1, r + 1)]
    pairs = upper + lower
    big = _unit_stack(pairs, 2 * r)
    shift_col = _unit_stack([(i, j - r) for i, j in pairs], r)
    shift_row = _unit_stack([(i - r, j) for i, j in pairs], r)
    tr = lam.tau(r)
    if P.shape != (2 * tr, lam.tau(2 * r)):
        return CheckResult("O2", params, FAIL, float("inf"), 0,
                           counterexample={"witness_shape": list(P.shape)})

    def evaluate(combos):
        lhs = P @ lam.eval(2 * r, [big[combos[:, t]] for t in range(m)]) @ mc.adjoint(P)
        rhs = np.zeros_like(lhs)
        rhs[:, :tr, tr:] = lam.eval(r, [shift_col[combos[:, t]] for t in range(m)])
        rhs[:, tr:, :tr] = lam.eval(r, [shift_row[combos[:, t]] for t in range(m)])
        return lhs, rhs

    sw = _sweep(len(pairs), m, evaluate, lam.tau(2 * r) ** 2, tol)
    return _finish("O2", params, sw.residual, sw, tol, {"P": matrix_payload(P)},
                   lambda c: _units_desc(pairs, c))


def _rank_one_family(n: int) -> np.ndarray:
    """Vectors e_a, e_a + e_b, e_a + i e_b; their projections span the Hermitian matrices."""
    vecs = [np.eye(n, dtype=mc.DTYPE)[a] for a in range(n)]
    for a, b in itertools.combinations(range(n), 2):
        for phase in (1.0, 1j):
            v = np.zeros(n, dtype=mc.DTYPE)
            v[a], v[b] = 1.0, phase
            vecs.append(v)
    return np.stack(vecs)


def _batched_psd(mats: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Conservative batched PSD test; returns (ok mask, min eigenvalues)."""
    herm = 0.5 * (mats + mc.adjoint(mats))
    eig = np.linalg.eigvalsh(herm)
    scale = 1.0 + np.abs(eig).max(axis=-1)
    asym = np.linalg.norm((mats - mc.adjoint(mats)).reshape(len(mats), -1), axis=1)
    ok = (asym <= tol * scale) & (eig[:, 0] >= -tol * scale)
    return ok, eig[:, 0]


def default_o3_dims(m: int) -> tuple[int, ...]:
    return (2,) * m if m <= 2 else (1,) * m


def check_O3(lam: ls.LambdaSequence, r: int, dims: Sequence[int] | None = None, trials: int = 200,
             seed: int = 0, tol: float = TOL_PSD, cap: int = ENUM_CAP) -> CheckResult:
    m = lam.arity
    dims = tuple(dims) if dims is not None else default_o3_dims(m)
    params = {"r": r, "dims": list(dims), "m": m, "trials": trials, "seed": seed}
    out_size = lam.tau(r) * int(np.prod(dims))
    chunk = max(1, CHUNK_ENTRIES // (out_size * out_size))
    families = [_rank_one_family(r * d) for d in dims]
    projections = [np.einsum("ni,nj->nij", f, f.conj()) for f in families]
    count = int(np.prod([len(f) for f in families]))
    checked = 0
    worst_eig = np.inf
    notes = []

    def fail(kind, xs, image):
        v = mc.is_psd(image, tol)
        return CheckResult(
            "O3", params, FAIL, max(0.0, -v.min_eig), checked,
            counterexample={"tier": kind, "inputs": [matrix_payload(x) for x in xs],
                            "min_eig": v.min_eig, "asymmetry": v.asymmetry},
        )

    if count <= cap:
        shape = tuple(len(f) for f in families)
        for start in range(0, count, chunk):
            flat = np.arange(start, min(count, start + chunk))
            combos = np.stack(np.unravel_index(flat, shape), axis=1)
            xs = [projections[t][combos[:, t]] for t in range(m)]
            images = lam.tensorize(r, xs, dims)
            ok, mins = _batched_psd(images, tol)
            checked += len(flat)
            worst_eig = min(worst_eig, float(mins.min()))
            for idx in np.nonzero(~ok)[0]:
                if not mc.is_psd(images[idx], tol).ok:
                    return fail("exact", [x[idx] for x in xs], images[idx])
    else:
        notes.append(f"exact tier skipped: {count} generator tuples exceed cap {cap}")
    rng = np.random.default_rng(seed)
    for start in range(0, trials, chunk):
        n = min(chunk, trials - start)
        xs = [mc.random_complex(rng, (n, r * d, r * d)) for d in dims]
        xs = [g @ mc.adjoint(g) for g in xs]
        images = lam.tensorize(r, xs, dims)
        ok, mins = _batched_psd(images, tol)
        checked += n
        worst_eig = min(worst_eig, float(mins.min()))
        for idx in np.nonzero(~ok)[0]:
            if not mc.is_psd(images[idx], tol).ok:
                return fail("random", [x[idx] for x in xs], images[idx])
    return CheckResult("O3", params, PASS, max(0.0, -worst_eig), checked,
                       witness={"min_eig": worst_eig}, note="; ".join(notes))


# -- aggregation --------------------------------------------------------------

def thread_count() -> int:
    """Worker cap from LT_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("LT_THREADS", "1")))
    except ValueError:
        return 1


def check_all(lam: ls.LambdaSequence, budget: Budget | None = None) -> AxiomReport:
    """Every condition at every level up to ``budget.max_level``; deterministic for a fixed seed.

    Checks may run on up to LT_THREADS workers; results are kept in submission order.
    """
    b = budget or Budget()
    levels = range(1, b.max_level + 1)
    tasks: list[Callable[[], CheckResult | list[CheckResult]]] = []
    tasks += [partial(check_E1, lam, k, b.tol, b.cap) for k in levels]
    tasks += [partial(check_E2, lam, r, s, b.tol, b.cap) for r in levels for s in levels]
    tasks.append(partial(check_E3_N, lam, b.max_level, b.trials, b.seed, b.tol))
    tasks += [partial(check_W1, lam, p, slot, b.tol) for p in levels for slot in range(1, lam.arity + 1)]
    tasks += [partial(check_W2, lam, p, q, b.tol, b.cap) for p in levels for q in levels]
    tasks += [partial(check_O1, lam, r, b.tol, b.cap) for r in levels]
    tasks += [partial(check_O2, lam, r, b.tol, b.cap) for r in levels]
    tasks += [partial(check_O3, lam, r, b.o3_dims, b.trials, b.seed, b.psd_tol, b.cap) for r in levels]
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(lambda f: f(), tasks))
    else:
        outs = [f() for f in tasks]
    results: list[CheckResult] = []
    for o in outs:
        results += o if isinstance(o, list) else [o]
    return AxiomReport(lam.to_json(), lam.name, b, results)


def replay_counterexample(lam: ls.LambdaSequence, result: CheckResult) -> float:
    """Re-evaluate a recorded O1/O2/E2 counterexample tuple and return its residual."""
    ce = result.counterexample or {}
    tup = ce.get("tuple")
    if tup is None:
        raise ValueError("result carries no tuple counterexample")
    if result.condition == "O1":
        r = result.params["r"]
        lhs = lam.eval(r, [mc.matrix_unit(i, j, r) for i, j in tup])
        rhs = mc.adjoint(lam.eval(r, [mc.matrix_unit(j, i, r) for i, j in tup]))
        return mc.max_abs(lhs - rhs)
    if result.condition == "O2":
        r = result.params["r"]
        P = ls.e2_witness(lam, r, r, verify=False)
        lhs = P @ lam.eval(2 * r, [mc.matrix_unit(i, j, 2 * r) for i, j in tup]) @ mc.adjoint(P)
        rhs = mc.block_assemble("adiag", [
            lam.eval(r, [mc.matrix_unit(i, j - r, r) for i, j in tup]),
            lam.eval(r, [mc.matrix_unit(i - r, j, r) for i, j in tup]),
        ])
        return mc.max_abs(lhs - rhs)
    if result.condition == "E2":
        r, s = result.params["r"], result.params["s"]
        P = ls.e2_witness(lam, r, s, verify=False)
        lhs = P @ lam.eval(r + s, [mc.matrix_unit(i, j, r + s) for i, j in tup]) @ mc.adjoint(P)
        rhs = mc.block_assemble("diag", [
            lam.eval(r, [mc.matrix_unit(i, j, r) for i, j in tup]),
            lam.eval(s, [mc.matrix_unit(i - r, j - r, s) for i, j in tup]),
        ])
        return mc.max_abs(lhs - rhs)
    raise ValueError(f"no replay for condition {result.condition}")


# -- gates used by the other modules ------------------------------------------

def _gate_level(lam: ls.LambdaSequence, cond: str, level: int) -> int | None:
    m = lam.arity

    def cost(r):
        return r ** (2 * m) if cond == "O1" else (2 * r * r) ** m

    if cond == "O3":
        return min(level, 2)
    if cost(level) <= GATE_CAP:
        return level
    if not lam.is_builtin:
        return None
    r = level
    while r > 1 and cost(r) > GATE_CAP:
        r -= 1
    return r


@lru_cache(maxsize=256)
def _passes_cached(lam: ls.LambdaSequence, cond: str, level: int) -> bool:
    if cond == "O1":
        return all(check_O1(lam, r).verdict == PASS for r in range(1, level + 1))
    if cond == "O2":
        return all(check_O2(lam, r).verdict == PASS for r in range(1, level + 1))
    if cond == "O3":
        return all(check_O3(lam, r, trials=50).verdict == PASS for r in range(1, level + 1))
    raise ValueError(cond)


def passes(lam: ls.LambdaSequence, cond: str, level: int) -> bool:
    """Whether ``lam`` passes ``cond`` at levels up to ``level``.

    Builtins whose exhaustive check at ``level`` would be too costly are gated
    on the largest affordable level; custom sequences are then refused.
    """
    gate = _gate_level(lam, cond, level)
    if gate is None:
        return False
    return _passes_cached(lam, cond, gate)


def require(lam: ls.LambdaSequence, cond: str, level: int, exc: type[Exception] = RefusedError) -> None:
    if not passes(lam, cond, level):
        raise exc(f"{lam.name} is not verified to satisfy ({cond}) at level {level}")


def report_json(report: AxiomReport) -> str:
    return json.dumps(report.to_json(), sort_keys=True, indent=2)
