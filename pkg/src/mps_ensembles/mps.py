"""Finite and uniform matrix product states with truncated gate dynamics.

Tensors have index order ``(left bond, physical, right bond)``. A state in
mixed-canonical form has all tensors left of the orthogonality center
left-isometric and all tensors right of it right-isometric. Gauge moves and
truncations are SVD-based; singular values below ``rank_tol`` (relative to
the largest one) are stored as explicit zeros and the matching isometry
columns are zeroed too, so rank-deficient bonds keep their dimension but
carry explicit null directions instead of solver garbage. Those null
directions are what downstream spectral statistics count.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, DimensionMismatchError, NumericalError
from .linalg import svd

STATEVECTOR_MAX = 1 << 22


def _zero_null_directions(u: np.ndarray, s: np.ndarray, vh: np.ndarray, rank_tol: float):
    """Zero singular values below tolerance along with their factors.

    Keeps the factorization exact while replacing the arbitrary
    orthonormal completion LAPACK returns for null directions by
    explicit zeros.
    """
    if s.size == 0 or s[0] == 0.0:
        return u, s, vh
    mask = s < rank_tol * s[0]
    if np.any(mask):
        s = s.copy()
        u = u.copy()
        vh = vh.copy()
        s[mask] = 0.0
        u[:, mask] = 0.0
        vh[mask, :] = 0.0
    return u, s, vh


class MpsState:
    """Matrix product state over ``N`` qudits of local dimension ``d``.

    Attributes:
        tensors: list of rank-3 arrays with shapes ``(chi_l, d, chi_r)``;
            boundary bonds have dimension 1 for finite states.
        d: local (physical) dimension.
        ortho_center: index of the orthogonality center, or None when the
            gauge has not been established.
        uniform: True for translation-invariant states, in which case
            ``tensors`` holds the unit cell (typically one or two sites).
        rank_tol: relative threshold below which singular values are
            treated as exact zeros.
    """

    def __init__(self, tensors, d: int, ortho_center: int | None = None,
                 uniform: bool = False, rank_tol: float = 1e-12):
        self.tensors = [np.ascontiguousarray(t, dtype=np.complex128) for t in tensors]
        self.d = int(d)
        self.ortho_center = ortho_center
        self.uniform = uniform
        self.rank_tol = rank_tol
        for i, t in enumerate(self.tensors):
            if t.ndim != 3:
                raise DimensionMismatchError(f"site {i}: tensor must be rank 3")
            if t.shape[1] != self.d:
                raise DimensionMismatchError(
                    f"site {i}: physical dimension {t.shape[1]} != d = {self.d}"
                )

    # -- basic queries -------------------------------------------------

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def N(self) -> int:
        return len(self.tensors)

    def bond_dims(self) -> list[int]:
        """Bond dimensions including the two trivial boundary bonds."""
        dims = [t.shape[0] for t in self.tensors]
        dims.append(self.tensors[-1].shape[2])
        return dims

    def copy(self) -> "MpsState":
        return MpsState([t.copy() for t in self.tensors], self.d,
                        self.ortho_center, self.uniform, self.rank_tol)

    def norm(self) -> float:
        if self.ortho_center is not None:
            return float(np.linalg.norm(self.tensors[self.ortho_center]))
        env = np.ones((1, 1), dtype=np.complex128)
        for t in self.tensors:
            env = np.einsum("ab,aic,bid->cd", env, np.conj(t), t, optimize=True)
        return float(np.sqrt(abs(env[0, 0].real)))

    def overlap(self, other: "MpsState") -> complex:
        """Inner product <self|other> by zipper contraction."""
        if len(self) != len(other) or self.d != other.d:
            raise DimensionMismatchError("overlap: incompatible states")
        env = np.ones((1, 1), dtype=np.complex128)
        for a, b in zip(self.tensors, other.tensors):
            env = np.einsum("ab,aic,bid->cd", env, np.conj(a), b, optimize=True)
        return complex(env[0, 0])

    def to_statevector(self) -> np.ndarray:
        """Dense amplitude vector; only for small chains."""
        if self.d ** self.N > STATEVECTOR_MAX:
            raise BudgetExceededError(f"statevector of d^{self.N} entries is too large")
        psi = np.ones((1, 1), dtype=np.complex128)  # (phys-so-far, right bond)
        for t in self.tensors:
            psi = np.tensordot(psi, t, axes=(1, 0))
            psi = psi.reshape(psi.shape[0] * psi.shape[1], psi.shape[2])
        return psi[:, 0]

    def reversed(self) -> "MpsState":
        """Mirror image of the chain (site order and bonds reversed)."""
        rev = [np.transpose(t, (2, 1, 0)) for t in reversed(self.tensors)]
        center = None if self.ortho_center is None else self.N - 1 - self.ortho_center
        return MpsState(rev, self.d, center, self.uniform, self.rank_tol)

    # -- gauge moves ---------------------------------------------------

    def _move_center_right(self):
        i = self.ortho_center
        t = self.tensors[i]
        chi_l, d, chi_r = t.shape
        res = svd(t.reshape(chi_l * d, chi_r))
        u, s, vh = _zero_null_directions(res.U, res.s, res.Vh, self.rank_tol)
        self.tensors[i] = u.reshape(chi_l, d, u.shape[1])
        carry = (s[:, None] * vh)
        self.tensors[i + 1] = np.tensordot(carry, self.tensors[i + 1], axes=(1, 0))
        self.ortho_center = i + 1

    def _move_center_left(self):
        i = self.ortho_center
        t = self.tensors[i]
        chi_l, d, chi_r = t.shape
        res = svd(t.reshape(chi_l, d * chi_r))
        u, s, vh = _zero_null_directions(res.U, res.s, res.Vh, self.rank_tol)
        self.tensors[i] = vh.reshape(vh.shape[0], d, chi_r)
        carry = u * s
        self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], carry, axes=(2, 0))
        self.ortho_center = i - 1

    def canonicalize(self, center: int, normalize: bool = True) -> "MpsState":
        """Bring the state into mixed-canonical form around ``center``.

        The physical state is unchanged up to the rank tolerance. Mutates
        and returns ``self``.
        """
        if not 0 <= center < self.N:
            raise DimensionMismatchError(f"center {center} out of range for N={self.N}")
        if self.ortho_center is None:
            # Right-isometrize everything down to site 0 first.
            self.ortho_center = self.N - 1
            while self.ortho_center > 0:
                self._move_center_left()
        while self.ortho_center < center:
            self._move_center_right()
        while self.ortho_center > center:
            self._move_center_left()
        if normalize:
            c = self.tensors[center]
            nrm = np.linalg.norm(c)
            if nrm == 0.0:
                raise NumericalError("canonicalize: state has zero norm")
            self.tensors[center] = c / nrm
        return self

    # -- Schmidt data ----------------------------------------------------

    def schmidt_values(self, cut: int) -> np.ndarray:
        """Schmidt values across the bond with ``cut`` sites to its left.

        Requires the orthogonality center on either side of the cut
        (site ``cut - 1`` or ``cut``).
        """
        if not 1 <= cut <= self.N - 1:
            raise DimensionMismatchError(f"cut {cut} out of range for N={self.N}")
        if self.ortho_center == cut - 1:
            t = self.tensors[cut - 1]
            mat = t.reshape(t.shape[0] * t.shape[1], t.shape[2])
        elif self.ortho_center == cut:
            t = self.tensors[cut]
            mat = t.reshape(t.shape[0], t.shape[1] * t.shape[2])
        else:
            raise DimensionMismatchError(
                f"orthogonality center {self.ortho_center} is not adjacent to cut {cut}"
            )
        return svd(mat).s

    def renyi_entropy(self, cut: int, k: float) -> float:
        """Renyi entropy of order ``k`` across ``cut``, in nats.

        ``k = 1`` is handled as the explicit limit ``-sum s^2 log s^2``
        with ``0 log 0 := 0``.
        """
        if k < 1:
            raise ValueError(f"Renyi order must be >= 1, got {k}")
        s = self.schmidt_values(cut)
        p = s * s
        p = p[p > 0.0]
        total = p.sum()
        if abs(total - 1.0) > 1e-8:
            raise NumericalError(f"Schmidt weights sum to {total}, state corrupted")
        p = p / total
        if k == 1:
            return float(-(p * np.log(p)).sum())
        return float(np.log((p ** k).sum()) / (1.0 - k))

    # -- dynamics --------------------------------------------------------

    def apply_two_site_gate(self, gate: np.ndarray, site: int,
                            chi_max: int | None = None) -> "MpsState":
        """Apply a two-site gate on ``(site, site+1)`` and re-truncate.

        The gate is a ``d^2 x d^2`` unitary whose row index is the
        row-major pair (out_left, out_right). The orthogonality center
        must sit on one of the two sites and lands on ``site + 1``; the
        kept Schmidt values are renormalized to unit weight.

        Args:
            gate: two-site unitary.
            site: left site of the pair.
            chi_max: bond cap; None keeps every singular value (natural
                growth to ``min(d*chi_l, d*chi_r)``).
        """
        if not 0 <= site < self.N - 1:
            raise DimensionMismatchError(f"site {site} out of range for a two-site gate")
        if self.ortho_center not in (site, site + 1):
            raise DimensionMismatchError(
                f"orthogonality center {self.ortho_center} not on gate sites "
                f"({site}, {site + 1})"
            )
        d = self.d
        g = np.asarray(gate, dtype=np.complex128)
        if g.shape != (d * d, d * d):
            raise DimensionMismatchError(f"gate must be {d*d} x {d*d}, got {g.shape}")
        if np.linalg.norm(g.conj().T @ g - np.eye(d * d)) > 1e-10 * d:
            raise ValueError("apply_two_site_gate: gate is not unitary")

        a, b = self.tensors[site], self.tensors[site + 1]
        chi_l, chi_r = a.shape[0], b.shape[2]
        theta = np.tensordot(a, b, axes=(2, 0))           # (chi_l, d, d, chi_r)
        theta = theta.transpose(1, 2, 0, 3).reshape(d * d, chi_l * chi_r)
        theta = (g @ theta).reshape(d, d, chi_l, chi_r)
        theta = theta.transpose(2, 0, 1, 3).reshape(chi_l * d, d * chi_r)

        res = svd(theta)
        keep = min(chi_max, res.s.size) if chi_max is not None else res.s.size
        u, s, vh = res.U[:, :keep], res.s[:keep], res.Vh[:keep, :]
        u, s, vh = _zero_null_directions(u, s, vh, self.rank_tol)
        weight = np.linalg.norm(s)
        if weight == 0.0:
            raise NumericalError("gate application annihilated the state")
        s = s / weight

        self.tensors[site] = u.reshape(chi_l, d, keep)
        self.tensors[site + 1] = (s[:, None] * vh).reshape(keep, d, chi_r)
        self.ortho_center = site + 1
        return self

    def truncate_bond(self, site: int, chi_max: int) -> "MpsState":
        """Truncate the bond right of ``site`` to ``chi_max`` Schmidt values.

        Requires the center at ``site``; leaves it at ``site + 1``.
        """
        if self.ortho_center != site:
            raise DimensionMismatchError("truncate_bond: center must sit on the bond's left site")
        t = self.tensors[site]
        chi_l, d, chi_r = t.shape
        res = svd(t.reshape(chi_l * d, chi_r))
        keep = min(chi_max, res.s.size)
        u, s, vh = res.U[:, :keep], res.s[:keep], res.Vh[:keep, :]
        u, s, vh = _zero_null_directions(u, s, vh, self.rank_tol)
        weight = np.linalg.norm(s)
        if weight == 0.0:
            raise NumericalError("truncation annihilated the state")
        s = s / weight
        self.tensors[site] = u.reshape(chi_l, d, keep)
        carry = s[:, None] * vh
        self.tensors[site + 1] = np.tensordot(carry, self.tensors[site + 1], axes=(1, 0))
        self.ortho_center = site + 1
        return self

    def truncate_sweep(self, chi_max: int) -> "MpsState":
        """One left-to-right pass truncating every bond to ``chi_max``."""
        self.canonicalize(0, normalize=False)
        for i in range(self.N - 1):
            self.truncate_bond(i, chi_max)
        nrm = np.linalg.norm(self.tensors[self.ortho_center])
        self.tensors[self.ortho_center] /= nrm
        return self

    def site_probabilities(self, site: int) -> np.ndarray:
        """Born probabilities of computational outcomes at ``site``.

        Requires the orthogonality center at ``site``.
        """
        if self.ortho_center != site:
            raise DimensionMismatchError(
                f"center {self.ortho_center} must be at measured site {site}"
            )
        t = self.tensors[site]
        probs = np.einsum("aib,aib->i", np.conj(t), t, optimize=True).real
        total = probs.sum()
        if abs(total - 1.0) > 1e-8:
            raise NumericalError(f"outcome probabilities sum to {total}; state corrupted")
        return probs / total

    def measure_site(self, site: int, rng: np.random.Generator) -> int:
        """Projective measurement at ``site`` in the computational basis.

        Draws the outcome with Born probabilities, projects, renormalizes
        and returns the outcome label. The center stays at ``site``.
        """
        probs = self.site_probabilities(site)
        u = rng.random()
        outcome = int(np.searchsorted(np.cumsum(probs), u, side="right"))
        outcome = min(outcome, self.d - 1)
        t = np.zeros_like(self.tensors[site])
        t[:, outcome, :] = self.tensors[site][:, outcome, :]
        self.tensors[site] = t / np.sqrt(probs[outcome])
        return outcome


def product_state(N: int, d: int, local_vectors: Sequence[np.ndarray] | None = None,
                  rank_tol: float = 1e-12) -> MpsState:
    """Bond-dimension-1 product state from per-site amplitude vectors.

    Args:
        N: number of sites.
        d: local dimension.
        local_vectors: one normalized length-``d`` vector per site;
            defaults to all ``|0>``.

    Raises:
        ValueError: if any local vector is not normalized.
    """
    if local_vectors is None:
        v0 = np.zeros(d, dtype=np.complex128)
        v0[0] = 1.0
        local_vectors = [v0] * N
    if len(local_vectors) != N:
        raise DimensionMismatchError(f"expected {N} local vectors, got {len(local_vectors)}")
    tensors = []
    for i, v in enumerate(local_vectors):
        v = np.asarray(v, dtype=np.complex128).reshape(-1)
        if v.size != d:
            raise DimensionMismatchError(f"site {i}: local vector has length {v.size}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ValueError(f"site {i}: local vector is not normalized")
        tensors.append(v.reshape(1, d, 1))
    return MpsState(tensors, d, ortho_center=0, rank_tol=rank_tol)


def fidelity(a: MpsState, b: MpsState) -> float:
    """|<a|b>|^2 for normalized states."""
    return float(abs(a.overlap(b)) ** 2)


def check_isometries(state: MpsState, atol: float = 1e-10) -> bool:
    """Verify the mixed-canonical invariants around the current center.

    Tensors strictly left of the center must be left-isometric on their
    support (A^dag A idempotent Hermitian), and symmetrically on the
    right. Explicit null directions are allowed.
    """
    c = state.ortho_center
    if c is None:
        return False
    for i, t in enumerate(state.tensors):
        if i < c:
            p = np.einsum("aib,aic->bc", np.conj(t), t, optimize=True)
        elif i > c:
            p = np.einsum("aib,cib->ac", t, np.conj(t), optimize=True)
        else:
            continue
        if np.linalg.norm(p - p.conj().T) > atol:
            return False
        if np.linalg.norm(p @ p - p) > atol:
            return False
    return True
