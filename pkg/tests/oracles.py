"""Reference implementations written without the package's code paths.

Everything here uses explicit index loops on plain numpy arrays so the
production vectorized paths can be compared against it.
"""

import itertools

import numpy as np


def unit(i, j, k):
    e = np.zeros((k, k), dtype=complex)
    e[i, j] = 1.0
    return e


def _product(kind, mats):
    out = mats[0]
    for a in mats[1:]:
        if kind == "kronecker":
            out = np.kron(out, a)
        elif kind == "schur":
            out = out * a
        elif kind == "matprod":
            out = out @ a
        else:
            raise ValueError(kind)
    return out


def lam_eval(spec, mats):
    """lambda_k from its JSON description; groups joined by Kronecker."""
    if spec["kind"] == "mixed":
        out = np.ones((1, 1), dtype=complex)
        for g in spec["groups"]:
            out = np.kron(out, _product(g["product"], [mats[s - 1] for s in g["slots"]]))
        return out
    return _product(spec["kind"], list(mats))


def realize(spec, level, alpha, factors, beta):
    """sum over unit multi-indices of [alpha lambda(units) beta] (x) v_1[i1,j1] (x) ... (x) v_m[im,jm]."""
    dims = [f.shape[0] // level for f in factors]
    n = alpha.shape[0]
    size = n * int(np.prod(dims))
    out = np.zeros((size, size), dtype=complex)
    pairs = list(itertools.product(range(level), repeat=2))
    for combo in itertools.product(pairs, repeat=len(factors)):
        lam = lam_eval(spec, [unit(i, j, level) for i, j in combo])
        term = alpha @ lam @ beta
        for (i, j), f, d in zip(combo, factors, dims):
            term = np.kron(term, f[i * d:(i + 1) * d, j * d:(j + 1) * d])
        out += term
    return out


def pq_flat(P, Q, k, l):
    d1, d2 = P.shape[0] // k, Q.shape[0] // l
    size = k * l * d1 * d2
    out = np.zeros((size, size), dtype=complex)
    for a, b, x, y, c, d, z, w in itertools.product(range(k), range(l), range(d1), range(d2),
                                                    range(k), range(l), range(d1), range(d2)):
        row = ((a * l + b) * d1 + x) * d2 + y
        col = ((c * l + d) * d1 + z) * d2 + w
        out[row, col] = P[a * d1 + x, c * d1 + z] * Q[b * d2 + y, d * d2 + w]
    return out


def apply_map(choi, x, p):
    """phi(x) for the map with Choi matrix sum_ij E_ij (x) phi(E_ij)."""
    q = choi.shape[0] // p
    out = np.zeros((q, q), dtype=complex)
    for i in range(p):
        for j in range(p):
            out += x[i, j] * choi[i * q:(i + 1) * q, j * q:(j + 1) * q]
    return out


def apply_maps_to_flat(flat, n, dims, chois):
    """(id_n (x) phi_1 (x) ... (x) phi_m) on a flattening, one matrix unit at a time."""
    outs = [c.shape[0] // d for c, d in zip(chois, dims)]
    size_out = n * int(np.prod(outs))
    result = np.zeros((size_out, size_out), dtype=complex)
    idx_in = list(itertools.product(range(n), *[range(d) for d in dims]))
    for r, row in enumerate(idx_in):
        for c, col in enumerate(idx_in):
            coef = flat[r, c]
            if coef == 0:
                continue
            term = unit(row[0], col[0], n)
            for t, (d, ch) in enumerate(zip(dims, chois)):
                term = np.kron(term, apply_map(ch, unit(row[t + 1], col[t + 1], d), d))
            result += coef * term
    return result


def random_unit_ball(rng, shape):
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return g / max(np.linalg.norm(g, 2), 1e-300)


def random_psd(rng, n):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    p = g @ g.conj().T
    return p / np.linalg.norm(p, 2)
