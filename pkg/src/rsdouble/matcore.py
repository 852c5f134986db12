"""Dense complex linear-algebra kernel for small matrices (n <= 16).

The factorizations everything else is built on: the upper-triangular b b^dag
factorization with positive diagonal, both Iwasawa decompositions of an
invertible complex matrix, eigendecomposition of unitary matrices, and
Hermitian matrix exponentials.  All functions are pure, operate on plain
complex ndarrays, and take their thresholds from an explicit `Tolerances`
record (no hidden globals).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NoConvergence, NotHermitian, NotPositiveDefinite, Singular

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used throughout the package.

    tol_zero     structural-zero threshold (triangularity, Hermiticity, ...)
    tol_unitary  allowed deviation of U^dag U from the identity
    tol_eig      eigensolver convergence / reconstruction floor
    alcove_gap   minimum angle separation that still counts as regular
    """

    tol_zero: float = 1e-10
    tol_unitary: float = 1e-9
    tol_eig: float = 1e-12
    alcove_gap: float = 1e-8

    def __post_init__(self):
        for name in ("tol_zero", "tol_unitary", "tol_eig", "alcove_gap"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be a strictly positive finite number")


DEFAULT_TOLS = Tolerances()


def as_matrix(a) -> np.ndarray:
    """Coerce to a square complex ndarray with finite entries."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise ValueError("matrix must be at least 1x1")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def frob(a) -> float:
    return float(np.linalg.norm(a))


def check_invertible(k: np.ndarray, tols: Tolerances = DEFAULT_TOLS) -> None:
    """Raise Singular unless the smallest singular value clears tol_zero * ||K||_F."""
    s = np.linalg.svd(k, compute_uv=False)
    if s[-1] <= tols.tol_zero * frob(k):
        raise Singular(
            f"matrix is numerically singular (smin={s[-1]:.3e}, |K|={frob(k):.3e})"
        )


def is_borel(b: np.ndarray, tols: Tolerances = DEFAULT_TOLS) -> bool:
    """Upper-triangular with real, strictly positive diagonal?"""
    b = np.asarray(b)
    below = np.tril(b, -1)
    if np.max(np.abs(below), initial=0.0) >= tols.tol_zero:
        return False
    d = np.diag(b)
    return bool(np.all(np.abs(d.imag) < tols.tol_zero) and np.all(d.real > 0.0))


def assert_borel(b, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    b = as_matrix(b)
    if not is_borel(b, tols):
        raise ValueError("matrix is not upper-triangular with positive real diagonal")
    return b


def is_unitary(u: np.ndarray, tols: Tolerances = DEFAULT_TOLS) -> bool:
    u = np.asarray(u)
    return frob(u.conj().T @ u - np.eye(u.shape[0])) < tols.tol_unitary


def assert_unitary(u, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    u = as_matrix(u)
    if not is_unitary(u, tols):
        raise ValueError("matrix is not unitary within tol_unitary")
    return u


def uu_dagger_factor(h, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Factor a Hermitian positive-definite H as b b^dag, b upper-triangular.

    This is Cholesky run right-to-left over the columns, which produces the
    *upper*-triangular factor with real positive diagonal.  That normalization
    makes b unique, so the map b -> b b^dag is inverted exactly.

    Raises NotHermitian if H fails the symmetry check and NotPositiveDefinite
    as soon as a pivot is non-positive.
    """
    h = as_matrix(h)
    scale = max(1.0, frob(h))
    if frob(h - h.conj().T) > tols.tol_zero * scale:
        raise NotHermitian("matrix is not Hermitian within tol_zero")
    h = 0.5 * (h + h.conj().T)
    n = h.shape[0]
    b = np.zeros((n, n), dtype=complex)
    for k in range(n - 1, -1, -1):
        pivot = h[k, k].real - float(np.sum(np.abs(b[k, k + 1 :]) ** 2))
        if pivot <= 0.0:
            raise NotPositiveDefinite(f"pivot {pivot:.6e} at index {k}")
        b[k, k] = np.sqrt(pivot)
        if k:
            b[:k, k] = (h[:k, k] - b[:k, k + 1 :] @ b[k, k + 1 :].conj()) / b[k, k].real
    return b


def iwasawa_left(k, tols: Tolerances = DEFAULT_TOLS) -> tuple[np.ndarray, np.ndarray]:
    """Split K = b g^{-1} with b upper-triangular positive-diagonal, g unitary.

    b is the unique b b^dag factor of K K^dag; g = K^{-1} b is then unitary by
    construction and re-checked against tol_unitary.
    """
    k = as_matrix(k)
    check_invertible(k, tols)
    b = uu_dagger_factor(k @ k.conj().T, tols)
    g = np.linalg.solve(k, b)
    if not is_unitary(g, tols):
        raise Singular("unitary factor failed its invariant; input too ill-conditioned")
    return b, g


def iwasawa_right(k, tols: Tolerances = DEFAULT_TOLS) -> tuple[np.ndarray, np.ndarray]:
    """Split K = g b^{-1} with g unitary, b upper-triangular positive-diagonal.

    b satisfies b b^dag = (K^dag K)^{-1}, the identity that links this
    decomposition to the free Lax matrix.
    """
    k = as_matrix(k)
    check_invertible(k, tols)
    b = uu_dagger_factor(np.linalg.inv(k.conj().T @ k), tols)
    g = k @ b
    if not is_unitary(g, tols):
        raise Singular("unitary factor failed its invariant; input too ill-conditioned")
    return g, b


class UnitaryEig(NamedTuple):
    angles: np.ndarray  # in [0, 2pi), sorted decreasing
    vectors: np.ndarray  # unitary, columns are eigenvectors
    degenerate: bool  # some circular gap below alcove_gap


def unitary_eig(u, tols: Tolerances = DEFAULT_TOLS) -> UnitaryEig:
    """Eigendecomposition U = V diag(e^{i theta_k}) V^dag of a unitary matrix.

    Angles are returned in [0, 2pi) sorted in decreasing order; V is unitary
    (complex Schur vectors, orthonormal even for clustered eigenvalues).
    Column phases are normalized so the largest-magnitude component of each
    eigenvector is real positive, which makes the output deterministic.

    ``degenerate`` is set (not raised) when two eigenvalues sit closer than
    alcove_gap on the unit circle, wrap-around included.  The reconstruction
    residual is checked against 1e-9; a miss raises NoConvergence.
    """
    u = assert_unitary(u, tols)
    n = u.shape[0]
    try:
        t, q = scipy.linalg.schur(u, output="complex")
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NoConvergence(f"Schur iteration failed: {exc}") from exc
    angles = np.mod(np.angle(np.diag(t)), TWO_PI)
    order = np.argsort(-angles, kind="stable")
    angles = angles[order]
    vectors = q[:, order]
    lead = np.argmax(np.abs(vectors), axis=0)
    phases = vectors[lead, np.arange(n)]
    vectors = vectors * (np.abs(phases) / phases)[None, :]
    recon = (vectors * np.exp(1j * angles)[None, :]) @ vectors.conj().T
    if frob(recon - u) > 1e-9 * max(1.0, frob(u)):
        raise NoConvergence("eigendecomposition did not reach the residual target")
    if n == 1:
        degenerate = False
    else:
        gaps = np.append(-np.diff(angles), TWO_PI - (angles[0] - angles[-1]))
        degenerate = bool(np.min(gaps) < tols.alcove_gap)
    return UnitaryEig(angles, vectors, degenerate)


def herm_exp(h, s: float, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Unitary e^{i s H} for Hermitian H, via eigendecomposition."""
    h = as_matrix(h)
    if frob(h - h.conj().T) > tols.tol_zero * max(1.0, frob(h)):
        raise NotHermitian("matrix is not Hermitian within tol_zero")
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    u = (v * np.exp(1j * s * w)[None, :]) @ v.conj().T
    if frob(u.conj().T @ u - np.eye(h.shape[0])) > 1e-10:
        raise NoConvergence("exponential lost unitarity beyond 1e-10")
    return u


# ---------------------------------------------------------------------------
# seeded samplers shared by the property suite and the tests

def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-ish unitary from the QR of a complex Gaussian matrix."""
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))[None, :]


def random_invertible(rng: np.random.Generator, n: int) -> np.ndarray:
    """Complex Gaussian matrix, re-drawn until comfortably well-conditioned."""
    while True:
        z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        s = np.linalg.svd(z, compute_uv=False)
        if s[-1] > 1e-3 * s[0]:
            return z


def random_borel(rng: np.random.Generator, n: int, diag_range=(0.1, 10.0)) -> np.ndarray:
    """Upper-triangular matrix with uniform positive diagonal."""
    b = np.triu(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)), 1).astype(complex)
    b[np.arange(n), np.arange(n)] = rng.uniform(*diag_range, size=n)
    return b


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (z + z.conj().T)
