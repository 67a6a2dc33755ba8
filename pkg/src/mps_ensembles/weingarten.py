"""Exact Haar averages of replicated transfer matrices for random MPSs.

A random sequential MPS carries one Haar unitary U of size ``D = d*chi``
per site, sliced into a right-isometric site tensor. Averaging the
k-replica transfer operator over U with Weingarten calculus leaves an
operator of rank at most k! whose range and corange are spanned by bond
permutation vectors ``|T_nu>``,

    E[T_alpha^(k)] = sum_{mu, nu in S_k} Wg(mu^-1 nu, D)
                     * d^{#cycles(mu^-1 alpha)} |T_nu><T_mu| ,

where ``[T_nu]_{(b'_1 b_1 ... b'_k b_k)} = prod_i delta(b_i, b'_{nu(i)})``
and Wg is the inverse of the Gram matrix ``G_D(mu, nu) = D^{#cycles(mu^-1
nu)}``. Because ``<T_mu|T_nu> = chi^{#cycles(mu^-1 nu)}``, products of
averaged operators close on the k!-dimensional permutation space, where a
single site acts as the shifted transfer matrix

    M_alpha = W * diag_mu(d^{#cycles(mu^-1 alpha)}) * G_chi ,

with W = G_D^{-1}. Both M_e (identity permutation) and M_{C_k} (k-cycle)
have leading eigenvalue exactly 1; the mutual information between two
distant blocks follows from sandwiching powers of M_{C_k} between the
leading eigenvectors of M_e.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError

# -- small permutation toolkit (tuples are 0-based image lists) ----------


def all_permutations(k: int) -> list[tuple[int, ...]]:
    return [tuple(p) for p in itertools.permutations(range(k))]


def identity_perm(k: int) -> tuple[int, ...]:
    return tuple(range(k))


def cycle_perm(k: int) -> tuple[int, ...]:
    """The k-cycle mapping i -> i + 1 (mod k)."""
    return tuple((i + 1) % k for i in range(k))


def compose(p: tuple[int, ...], q: tuple[int, ...]) -> tuple[int, ...]:
    """(p o q)(i) = p(q(i))."""
    return tuple(p[q[i]] for i in range(len(p)))


def inverse(p: tuple[int, ...]) -> tuple[int, ...]:
    out = [0] * len(p)
    for i, pi in enumerate(p):
        out[pi] = i
    return tuple(out)


def n_cycles(p: tuple[int, ...]) -> int:
    seen = [False] * len(p)
    count = 0
    for start in range(len(p)):
        if seen[start]:
            continue
        count += 1
        j = start
        while not seen[j]:
            seen[j] = True
            j = p[j]
    return count


def cycle_type(p: tuple[int, ...]) -> tuple[int, ...]:
    seen = [False] * len(p)
    lengths = []
    for start in range(len(p)):
        if seen[start]:
            continue
        length, j = 0, start
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        lengths.append(length)
    return tuple(sorted(lengths, reverse=True))


# -- Weingarten and shifted transfer matrices ----------------------------


@dataclass
class WeingartenMatrix:
    """Inverse Gram matrix over S_k at unitary dimension D.

    ``matrix[i, j] = Wg(perms[i]^-1 perms[j], D)``.
    """

    k: int
    D: int
    perms: list[tuple[int, ...]]
    matrix: np.ndarray

    def value(self, p: tuple[int, ...]) -> float:
        """Wg at a single permutation (class function of its cycle type)."""
        j = self.perms.index(p)
        return float(self.matrix[0, j])


def gram_matrix(k: int, D: float,
                perms: list[tuple[int, ...]] | None = None) -> np.ndarray:
    """Gram matrix ``G[i, j] = D^{#cycles(p_i^-1 p_j)}``."""
    perms = perms or all_permutations(k)
    n = len(perms)
    g = np.empty((n, n))
    for i, p in enumerate(perms):
        p_inv = inverse(p)
        for j, q in enumerate(perms):
            g[i, j] = float(D) ** n_cycles(compose(p_inv, q))
    return g


def weingarten_matrix(k: int, D: int) -> WeingartenMatrix:
    """Weingarten matrix by direct Gram inversion; requires D >= k.

    Raises:
        ConfigError: when D < k (the Gram matrix is singular there).
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if D < k:
        raise ConfigError(f"Weingarten matrix needs D >= k, got D={D}, k={k}")
    perms = all_permutations(k)
    g = gram_matrix(k, D, perms)
    w = scipy.linalg.inv(g)
    return WeingartenMatrix(k=k, D=D, perms=perms, matrix=w)


@dataclass
class ShiftedReplicaTM:
    """k!-dimensional single-site transfer matrix of the averaged ensemble."""

    k: int
    d: int
    chi: int
    alpha: tuple[int, ...]
    perms: list[tuple[int, ...]]
    matrix: np.ndarray

    def leading_eigenvalue(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.matrix))))


@dataclass
class AveragedReplicaPair:
    """Shifted transfer matrices for the identity and k-cycle sectors."""

    identity: ShiftedReplicaTM
    cycle: ShiftedReplicaTM


def _physical_weights(k: int, d: int, alpha: tuple[int, ...],
                      perms: list[tuple[int, ...]]) -> np.ndarray:
    return np.array([float(d) ** n_cycles(compose(inverse(mu), alpha))
                     for mu in perms])


def shifted_replica_tm(k: int, d: int, chi: int,
                       alpha: tuple[int, ...]) -> ShiftedReplicaTM:
    """Build ``M_alpha = W diag(d-weights) G_chi`` for one permutation."""
    if d * chi < k:
        raise ConfigError(f"averaged ensemble needs d*chi >= k, got {d*chi} < {k}")
    wg = weingarten_matrix(k, d * chi)
    g_chi = gram_matrix(k, chi, wg.perms)
    weights = _physical_weights(k, d, alpha, wg.perms)
    m = wg.matrix @ (weights[:, None] * g_chi)
    return ShiftedReplicaTM(k=k, d=d, chi=chi, alpha=alpha, perms=wg.perms, matrix=m)


def averaged_replica_tm(k: int, d: int, chi: int) -> AveragedReplicaPair:
    """Shifted transfer matrices for alpha = identity and alpha = k-cycle."""
    return AveragedReplicaPair(
        identity=shifted_replica_tm(k, d, chi, identity_perm(k)),
        cycle=shifted_replica_tm(k, d, chi, cycle_perm(k)),
    )


def permutation_sandwich(k: int, d: int, chi: int,
                         alpha: tuple[int, ...]) -> np.ndarray:
    """Expected values of ``<T_mu| E[T_alpha^(k)] |T_nu>``.

    Equals ``G_chi W diag(d-weights) G_chi``; this is the quantity a Monte
    Carlo average of exact replica operators estimates directly, so it is
    the natural target for ensemble validation.
    """
    wg = weingarten_matrix(k, d * chi)
    g_chi = gram_matrix(k, chi, wg.perms)
    weights = _physical_weights(k, d, alpha, wg.perms)
    return g_chi @ wg.matrix @ (weights[:, None] * g_chi)


def _leading_pair(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Left and right eigenvectors at the eigenvalue closest to 1."""
    w, vl, vr = scipy.linalg.eig(m, left=True, right=True)
    idx = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[idx] - 1.0) > 1e-8:
        raise NumericalError(f"no unit eigenvalue found (closest: {w[idx]})")
    return vl[:, idx].conj(), vr[:, idx]


def rmps_averaged_Ik(k: int, d: int, chi: int, r: int) -> float:
    """Ensemble-averaged Renyi-k mutual information at block separation r.

    Semi-infinite blocks with an r-site gap: the gap carries the k-cycle
    sector, the blocks the identity sector. The trace ratio reduces to
    ``(u_e M_c^r v_e) / (u_e P_1 v_e)`` with (u_e, v_e) the unit-eigenvalue
    pair of M_e and P_1 the unit-eigenvalue projector of M_c.
    """
    if k < 2:
        raise ConfigError("mutual information needs k >= 2")
    if r < 0:
        raise ConfigError("separation r must be >= 0")
    pair = averaged_replica_tm(k, d, chi)
    u_e, v_e = _leading_pair(pair.identity.matrix)
    m_c = pair.cycle.matrix
    u_c, v_c = _leading_pair(m_c)
    num = u_e @ np.linalg.matrix_power(m_c, r) @ v_e
    den = (u_e @ v_c) * (u_c @ v_e) / (u_c @ v_c)
    ratio = num / den
    if abs(ratio.imag) > 1e-9 * max(1.0, abs(ratio.real)):
        raise NumericalError(f"trace ratio came out complex: {ratio}")
    value = float(np.log(max(ratio.real, 1e-300)) / (k - 1))
    return max(value, 0.0) if value > -1e-9 else value


def ik_slope_scan(k: int, d: int, chi_grid, r: int = 1) -> np.ndarray:
    """Centered finite-difference slope of I_k with respect to log chi.

    Args:
        chi_grid: geometric grid of bond dimensions (>= 3 points).

    Returns:
        Array of length ``len(chi_grid) - 2``, one slope per interior
        grid point.
    """
    chis = [int(c) for c in chi_grid]
    if len(chis) < 3:
        raise ConfigError("slope scan needs at least 3 grid points")
    ratios = [chis[i + 1] / chis[i] for i in range(len(chis) - 1)]
    if any(abs(q - ratios[0]) > 1e-9 * ratios[0] for q in ratios):
        raise ConfigError("slope scan requires a geometric chi grid")
    values = np.array([rmps_averaged_Ik(k, d, c, r) for c in chis])
    logs = np.log(np.array(chis, dtype=float))
    return (values[2:] - values[:-2]) / (logs[2:] - logs[:-2])
