"""Dense complex matrix kernel.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Indices in the
public helpers are 1-based, matching the usual matrix-unit notation.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionError

DTYPE = np.complex128


class PSDVerdict(NamedTuple):
    ok: bool
    min_eig: float
    asymmetry: float


def as_cmatrix(a, *, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D complex array."""
    arr = np.asarray(a, dtype=DTYPE)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def matrix_unit(i: int, j: int, k: int, l: int | None = None) -> np.ndarray:
    """The k x l matrix with a 1 at (i, j), 1-based.

    Out-of-range indices give the zero matrix rather than an error; the
    axiom checks rely on this when shifted indices leave the block.
    """
    if l is None:
        l = k
    if k < 1 or l < 1:
        raise DimensionError("matrix_unit needs k, l >= 1")
    out = np.zeros((k, l), dtype=DTYPE)
    if 1 <= i <= k and 1 <= j <= l:
        out[i - 1, j - 1] = 1.0
    return out


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=DTYPE)


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; broadcasts over leading batch axes."""
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.ndim == 2 and b.ndim == 2:
        return np.kron(a, b)
    ra, ca = a.shape[-2:]
    rb, cb = b.shape[-2:]
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    return out.reshape(out.shape[:-4] + (ra * rb, ca * cb))


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=DTYPE)
    for m in mats:
        out = kron(out, m)
    return out


def schur(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Entrywise (Schur/Hadamard) product of equally shaped matrices."""
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError(f"schur needs equal shapes, got {a.shape} and {b.shape}")
    return a * b


def op_norm(a: np.ndarray) -> float:
    """Largest singular value (0 for empty matrices)."""
    a = np.asarray(a, dtype=DTYPE)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + adjoint(a))


def is_psd(a: np.ndarray, tol: float = 1e-9) -> PSDVerdict:
    """PSD test with tolerance relative to ``1 + ||a||``.

    The asymmetry ``||a - a*||`` is measured separately and the eigenvalue
    test runs on the Hermitian part.
    """
    a = np.asarray(a, dtype=DTYPE)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"is_psd needs a square matrix, got shape {a.shape}")
    if a.size == 0:
        return PSDVerdict(True, 0.0, 0.0)
    scale = 1.0 + op_norm(a)
    asym = op_norm(a - adjoint(a))
    min_eig = float(np.linalg.eigvalsh(hermitian_part(a))[0])
    ok = asym <= tol * scale and min_eig >= -tol * scale
    return PSDVerdict(bool(ok), min_eig, asym)


def block_assemble(kind: str, blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Block-diagonal (``diag``) or 2x2 anti-diagonal (``adiag``) assembly.

    ``adiag(X, Y)`` is ``[[0, X], [Y, 0]]``.
    """
    blocks = [as_cmatrix(b) for b in blocks]
    if kind == "diag":
        rows = sum(b.shape[0] for b in blocks)
        cols = sum(b.shape[1] for b in blocks)
        out = np.zeros((rows, cols), dtype=DTYPE)
        r = c = 0
        for b in blocks:
            out[r:r + b.shape[0], c:c + b.shape[1]] = b
            r += b.shape[0]
            c += b.shape[1]
        return out
    if kind == "adiag":
        if len(blocks) != 2:
            raise DimensionError("adiag takes exactly two blocks")
        x, y = blocks
        if x.shape[0] != x.shape[1] or x.shape != y.shape:
            raise DimensionError("adiag blocks must be square and of equal size")
        k = x.shape[0]
        out = np.zeros((2 * k, 2 * k), dtype=DTYPE)
        out[:k, k:] = x
        out[k:, :k] = y
        return out
    raise ValueError(f"unknown block kind {kind!r}")


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Square root of the PSD part of a Hermitian matrix."""
    w, v = np.linalg.eigh(hermitian_part(a))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ adjoint(v)


def clip_psd(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Project onto the PSD cone; returns the projection and clipped magnitude."""
    w, v = np.linalg.eigh(hermitian_part(a))
    clipped = float(max(0.0, -w[0])) if w.size else 0.0
    w = np.clip(w, 0.0, None)
    return (v * w) @ adjoint(v), clipped


def rank_one_factors(a: np.ndarray, tol: float = 1e-12) -> list[np.ndarray]:
    """Columns c_i with a = sum c_i c_i^* for a PSD matrix ``a``."""
    w, v = np.linalg.eigh(hermitian_part(a))
    cutoff = tol * max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    return [v[:, i] * np.sqrt(w[i]) for i in range(w.size) if w[i] > cutoff]


def max_abs(a: np.ndarray) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def random_complex(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    """Wishart-style G G^* sample."""
    g = random_complex(rng, (n, rank or n))
    return g @ adjoint(g)
