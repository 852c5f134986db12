"""Free motion on the double: GL(n,C) as the phase space of a U(n) system.

A point is any invertible complex matrix K.  Its two Iwasawa decompositions
define the four maps Lambda_L/R (triangular factors) and Xi_L/R (unitary
factors); from these come the free Lax matrix L(K) = (K^dag K)^{-1}, the
commuting trace Hamiltonians H_mu, the twisted unitary action that replaces
conjugation here, its triangular-valued conserved map, and the free flow in
closed form.  Hamiltonians are labelled by a finite-support weight map
mu: j -> mu_j over nonzero integers.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import matcore
from .matcore import DEFAULT_TOLS, Tolerances, as_matrix


def check_weights(mu) -> dict[int, float]:
    """Validate a finite-support weight map {j: mu_j}, j a nonzero integer."""
    out = {}
    for j, w in dict(mu).items():
        jj = int(j)
        if jj != j or jj == 0:
            raise ValueError("weight keys must be nonzero integers")
        ww = float(w)
        if not np.isfinite(ww):
            raise ValueError("weights must be finite")
        out[jj] = ww
    return out


def weighted_power_sum(lam: np.ndarray, mu: dict[int, float]) -> float:
    """(1/2) sum_j mu_j / j * sum_k lam_k^j for positive eigenvalues lam."""
    total = 0.0
    for j, w in mu.items():
        total += 0.5 * w / j * float(np.sum(lam ** float(j)))
    return total


class IwasawaMaps(NamedTuple):
    lam_l: np.ndarray
    lam_r: np.ndarray
    xi_l: np.ndarray
    xi_r: np.ndarray


def iwasawa_maps(k, tols: Tolerances = DEFAULT_TOLS) -> IwasawaMaps:
    """All four Iwasawa maps of K: K = lam_l xi_r^{-1} = xi_l lam_r^{-1}."""
    b_l, g_r = matcore.iwasawa_left(k, tols)
    g_l, b_r = matcore.iwasawa_right(k, tols)
    return IwasawaMaps(b_l, b_r, g_l, g_r)


def lax_free(k, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Free Lax matrix L(K) = (K^dag K)^{-1}, Hermitian positive definite."""
    k = as_matrix(k)
    matcore.check_invertible(k, tols)
    l = np.linalg.inv(k.conj().T @ k)
    return 0.5 * (l + l.conj().T)


def hamiltonian_free(k, mu, tols: Tolerances = DEFAULT_TOLS) -> float:
    """H_mu(K) = (1/2) sum_j (mu_j/j) tr L(K)^j, evaluated spectrally."""
    mu = check_weights(mu)
    if not mu:
        return 0.0
    lam = np.linalg.eigvalsh(lax_free(k, tols))
    return weighted_power_sum(lam, mu)


def quasi_adjoint(g, k, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Twisted action of a unitary g on K: g K Xi_R(g Lambda_L(K)).

    Reduces to conjugation for central g; the composition property
    (g h) acting = g acting after h holds and is covered by tests.
    """
    g = matcore.assert_unitary(g, tols)
    k = as_matrix(k)
    b_l, _ = matcore.iwasawa_left(k, tols)
    _, xi = matcore.iwasawa_left(g @ b_l, tols)
    return g @ k @ xi


def moment_map(k, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Triangular conserved map Lambda(K) = Lambda_L(K) Lambda_R(K).

    The result lies in the positive-diagonal triangular group; its level set
    at the coupling matrix nu(x) defines the reduction.
    """
    maps = iwasawa_maps(k, tols)
    return maps.lam_l @ maps.lam_r


def free_flow(k0, mu, t: float, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Flow of H_mu through K0, in closed form.

    With K0 = b g^{-1} (left Iwasawa), the momentum b is conserved and
    K(t) = b exp(-i t sum_j mu_j (b^dag b)^{-j}) g^{-1}.  The exponent is
    evaluated by functional calculus on the single eigendecomposition of
    b^dag b.
    """
    mu = check_weights(mu)
    b, g = matcore.iwasawa_left(k0, tols)
    if not mu or t == 0.0:
        return b @ g.conj().T
    w, v = np.linalg.eigh(b.conj().T @ b)
    phase = np.zeros_like(w)
    for j, c in mu.items():
        phase += c * w ** float(-j)
    prop = (v * np.exp(-1j * t * phase)[None, :]) @ v.conj().T
    return b @ prop @ g.conj().T
