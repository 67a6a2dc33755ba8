"""Renyi-k mutual information via replicated transfer operators.

The k-replica transfer operator of a site tensor ``A`` with physical
permutation ``alpha`` is

    T_alpha^(k) = sum_{s'_1..s'_k} (x)_{i=1..k}
                  conj(A^{s'_i}) (x) A^{s'_{alpha(i)}} ,

acting on k interleaved (bra, ket) copies of the bond space, dimension
``chi^{2k}``. For ``alpha = e`` this is the k-fold power of the plain
transfer matrix; for the k-cycle it is similar to the same power by a slot
permutation, so its eigenvalues are products of k single-site eigenvalues.
Mutual information between two blocks needs the identity sector on the
blocks and the k-cycle sector on the sites in between.

Operators are applied by pairwise tensor contraction with cost polynomial
in chi; dense matrices are materialized only below a configurable cap.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (BudgetExceededError, CapExceededError, ConfigError,
                     ConvergenceError, DimensionMismatchError, NumericalError)
from .mps import MpsState
from .weingarten import cycle_perm, identity_perm

DENSE_REPLICA_CAP = 4096
REPLICA_BUDGET = 1 << 24
POWER_TOL = 1e-10
POWER_MAX_ITER = 10000

_LETTERS = string.ascii_letters


def perm_vector(nu: tuple[int, ...], chi: int) -> np.ndarray:
    """Bond permutation vector ``prod_i delta(b_i, b'_{nu(i)})``.

    Lives in the interleaved ordering (b'_1, b_1, ..., b'_k, b_k) and is
    returned flattened to length ``chi^{2k}``. For the identity it is the
    k-fold replicated flattened identity matrix.
    """
    k = len(nu)
    out = np.zeros((chi,) * (2 * k))
    for b in itertools.product(range(chi), repeat=k):
        idx = [0] * (2 * k)
        for i in range(k):
            idx[2 * nu[i]] = b[i]      # bra slot nu(i)
            idx[2 * i + 1] = b[i]      # ket slot i
        out[tuple(idx)] = 1.0
    return out.reshape(-1)


def _apply_subscripts(k: int, alpha: tuple[int, ...], row_action: bool) -> str:
    """Einsum spec for one replica-operator application."""
    bra_out = [_LETTERS[i] for i in range(k)]
    ket_out = [_LETTERS[k + i] for i in range(k)]
    bra_in = [_LETTERS[2 * k + i] for i in range(k)]
    ket_in = [_LETTERS[3 * k + i] for i in range(k)]
    phys = [_LETTERS[4 * k + i] for i in range(k)]
    factors = []
    for i in range(k):
        factors.append(bra_out[i] + phys[i] + bra_in[i])          # conj(A)
        factors.append(ket_out[i] + phys[alpha[i]] + ket_in[i])   # A
    out_legs = [x for pair in zip(bra_out, ket_out) for x in pair]
    in_legs = [x for pair in zip(bra_in, ket_in) for x in pair]
    if row_action:
        return ",".join(factors + ["".join(out_legs)]) + "->" + "".join(in_legs)
    return ",".join(factors + ["".join(in_legs)]) + "->" + "".join(out_legs)


@dataclass
class ReplicaOperator:
    """k-replicated transfer operator of one site tensor.

    Attributes:
        tensor: site tensor (chi_l, d, chi_r).
        k: replica count.
        alpha: physical permutation as a 0-based image tuple.
        mode: "contraction" (default) never materializes the operator;
            "dense" builds the chi^{2k}-dimensional matrix, subject to
            the cap.
    """

    tensor: np.ndarray
    k: int
    alpha: tuple[int, ...]
    mode: str = "contraction"
    dense_cap: int = DENSE_REPLICA_CAP

    def __post_init__(self):
        self.tensor = np.asarray(self.tensor, dtype=np.complex128)
        if self.tensor.ndim != 3:
            raise DimensionMismatchError("replica operator needs a rank-3 tensor")
        if sorted(self.alpha) != list(range(self.k)):
            raise ConfigError(f"alpha {self.alpha} is not a permutation of {self.k} items")
        if self.mode not in ("contraction", "dense"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        self._dense = None

    @property
    def dims(self) -> tuple[int, int]:
        chi_l, _, chi_r = self.tensor.shape
        return chi_l ** (2 * self.k), chi_r ** (2 * self.k)

    def dense_matrix(self) -> np.ndarray:
        """Materialized operator; raises CapExceededError above the cap."""
        rows, cols = self.dims
        if max(rows, cols) > self.dense_cap:
            raise CapExceededError(
                f"dense replica operator of dim {max(rows, cols)} exceeds cap "
                f"{self.dense_cap}"
            )
        if self._dense is None:
            a = self.tensor
            d = a.shape[1]
            out = np.zeros((rows, cols), dtype=np.complex128)
            for s in itertools.product(range(d), repeat=self.k):
                factors = []
                for i in range(self.k):
                    factors.append(np.conj(a[:, s[i], :]))
                    factors.append(a[:, s[self.alpha[i]], :])
                term = factors[0]
                for f in factors[1:]:
                    term = np.kron(term, f)
                out += term
            self._dense = out
        return self._dense

    def _contract(self, v: np.ndarray, row_action: bool) -> np.ndarray:
        chi_l, _, chi_r = self.tensor.shape
        chi_v = chi_l if row_action else chi_r
        v = np.asarray(v, dtype=np.complex128).reshape((chi_v,) * (2 * self.k))
        operands = []
        for i in range(self.k):
            operands.append(np.conj(self.tensor))
            operands.append(self.tensor)
        sub = _apply_subscripts(self.k, self.alpha, row_action)
        return np.einsum(sub, *operands, v, optimize=True).reshape(-1)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Column action ``T v`` (input over right bonds)."""
        rows, cols = self.dims
        if np.asarray(v).size != cols:
            raise DimensionMismatchError(
                f"vector of size {np.asarray(v).size} does not match operator "
                f"column dimension {cols}"
            )
        if self.mode == "dense":
            return self.dense_matrix() @ np.asarray(v, dtype=np.complex128).reshape(-1)
        return self._contract(v, row_action=False)

    def apply_left(self, env: np.ndarray) -> np.ndarray:
        """Row action ``env T`` (input over left bonds)."""
        rows, cols = self.dims
        if np.asarray(env).size != rows:
            raise DimensionMismatchError(
                f"environment of size {np.asarray(env).size} does not match "
                f"operator row dimension {rows}"
            )
        if self.mode == "dense":
            return np.asarray(env, dtype=np.complex128).reshape(-1) @ self.dense_matrix()
        return self._contract(env, row_action=True)


def replica_apply(op: ReplicaOperator, v: np.ndarray) -> np.ndarray:
    return op.apply(v)


def replica_eigvals(tensor: np.ndarray, k: int, alpha: tuple[int, ...],
                    cap: int = DENSE_REPLICA_CAP) -> np.ndarray:
    """Eigenvalue multiset of the dense k-replica operator."""
    op = ReplicaOperator(tensor, k, alpha, mode="dense", dense_cap=cap)
    return scipy.linalg.eigvals(op.dense_matrix())


# -- block layouts and finite-chain traces -------------------------------


@dataclass(frozen=True)
class BlockLayout:
    """Two disjoint ordered site blocks separated by a gap of r sites.

    Ranges are half-open 0-based (start, stop).
    """

    N: int
    a: tuple[int, int]
    b: tuple[int, int]

    def __post_init__(self):
        a0, a1 = self.a
        b0, b1 = self.b
        if not (0 <= a0 < a1 <= b0 < b1 <= self.N):
            raise ConfigError(f"blocks {self.a}, {self.b} invalid for N={self.N}")

    @property
    def r(self) -> int:
        return self.b[0] - self.a[1]

    def mirrored(self) -> "BlockLayout":
        return BlockLayout(self.N,
                           (self.N - self.b[1], self.N - self.b[0]),
                           (self.N - self.a[1], self.N - self.a[0]))


def default_layout(N: int, r: int) -> BlockLayout:
    """Largest symmetric blocks around a centered gap of r sites."""
    if r < 0 or r > N - 2:
        raise ConfigError(f"gap r={r} impossible for N={N}")
    a_stop = (N - r) // 2
    return BlockLayout(N, (0, a_stop), (a_stop + r, N))


def _check_budget(state: MpsState, k: int, budget: int):
    worst = max(max(t.shape[0], t.shape[2]) for t in state.tensors)
    if worst ** (2 * k) > budget:
        raise BudgetExceededError(
            f"replica contraction needs vectors of {worst ** (2 * k)} entries "
            f"(budget {budget})"
        )


def _chain_trace(state: MpsState, in_block: list[bool], k: int) -> float:
    """Tr rho_X^k with the identity sector on X and the k-cycle elsewhere."""
    e, c = identity_perm(k), cycle_perm(k)
    env = np.ones(1, dtype=np.complex128)
    for site, tensor in enumerate(state.tensors):
        alpha = e if in_block[site] else c
        env = ReplicaOperator(tensor, k, alpha).apply_left(env)
    value = complex(env.reshape(-1)[0])
    if abs(value.imag) > 1e-9 * max(1.0, abs(value.real)):
        raise NumericalError(f"replica trace came out complex: {value}")
    return value.real


def replica_traces(state: MpsState, layout: BlockLayout, k: int,
                   budget: int = REPLICA_BUDGET) -> tuple[float, float, float]:
    """The three replica traces (joint, block A, block B) of a pure state."""
    if k not in (2, 3, 4):
        raise ConfigError(f"replica traces support integer k in 2..4, got {k}")
    if layout.N != state.N:
        raise ConfigError("layout does not match state size")
    _check_budget(state, k, budget)
    in_a = [layout.a[0] <= i < layout.a[1] for i in range(state.N)]
    in_b = [layout.b[0] <= i < layout.b[1] for i in range(state.N)]
    in_ab = [x or y for x, y in zip(in_a, in_b)]
    return (_chain_trace(state, in_ab, k),
            _chain_trace(state, in_a, k),
            _chain_trace(state, in_b, k))


def renyi_mutual_info_finite(state: MpsState, layout: BlockLayout, k: int,
                             budget: int = REPLICA_BUDGET) -> float:
    """Renyi-k mutual information between the two blocks, in nats."""
    tr_ab, tr_a, tr_b = replica_traces(state, layout, k, budget)
    if min(tr_ab, tr_a, tr_b) <= 0.0:
        raise NumericalError("non-positive replica trace")
    value = float(np.log(tr_ab / (tr_a * tr_b)) / (k - 1))
    return max(value, 0.0) if value > -1e-9 else value


# -- translation-invariant evaluation ------------------------------------


def _power_leading(apply_fn, start: np.ndarray,
                   tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER):
    """Leading eigenpair by power iteration from a deterministic start."""
    v = start / np.linalg.norm(start)
    lam = 1.0 + 0.0j
    for _ in range(max_iter):
        w = apply_fn(v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            raise ConvergenceError("power iteration hit the zero vector")
        lam = v.conj() @ w
        w = w / nrm
        if np.linalg.norm(w - v) < tol or np.linalg.norm(w + v) < tol:
            return lam, w
        v = w
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def renyi_mutual_info_TI(tensor: np.ndarray, k: int, r: int,
                         dense_cap: int = DENSE_REPLICA_CAP,
                         budget: int = REPLICA_BUDGET) -> float:
    """Renyi-k mutual information of semi-infinite blocks, gap ``r`` cells.

    Uses the eigendecomposition formula whenever the replica space fits
    under ``dense_cap`` and cross-checks it against the trace-ratio path
    (agreement to 1e-8); above the cap only the trace-ratio path runs.

    Args:
        tensor: uniform site (or blocked cell) tensor in canonical gauge.
        k: integer Renyi order, 2..4.
        r: number of cells between the blocks.
    """
    if k not in (2, 3, 4):
        raise ConfigError(f"TI mutual information supports k in 2..4, got {k}")
    if r < 0:
        raise ConfigError("separation r must be >= 0")
    a = np.asarray(tensor, dtype=np.complex128)
    chi = a.shape[0]
    if a.shape[2] != chi:
        raise DimensionMismatchError("uniform tensor needs square bonds")
    dim = chi ** (2 * k)
    if dim > budget:
        raise BudgetExceededError(f"replica space of {dim} entries exceeds budget")

    op_e = ReplicaOperator(a, k, identity_perm(k))
    op_c = ReplicaOperator(a, k, cycle_perm(k))
    start = perm_vector(identity_perm(k), chi).astype(np.complex128)

    lam_r, vec_r = _power_leading(op_e.apply, start)
    _, vec_l = _power_leading(op_e.apply_left, start)
    if abs(abs(lam_r) - 1.0) > 1e-6:
        raise NumericalError(
            f"leading replica eigenvalue {lam_r} is not 1; canonicalize first"
        )

    # Trace-ratio path: numerator at separation r, denominator from the
    # converged large-separation limit. vec_l is already the row vector.
    w = vec_r.copy()
    for _ in range(r):
        w = op_c.apply(w)
    num = vec_l @ w
    prev = num
    den = None
    for _ in range(POWER_MAX_ITER):
        w = op_c.apply(w)
        cur = vec_l @ w
        if abs(cur - prev) <= 1e-12 * max(abs(cur), 1e-300):
            den = cur
            break
        prev = cur
    if den is None:
        raise ConvergenceError("trace-ratio denominator did not converge")
    ratio = num / den
    if abs(ratio.imag) > 1e-8 * max(1.0, abs(ratio.real)):
        raise NumericalError(f"trace ratio came out complex: {ratio}")
    value = float(np.log(max(ratio.real, 1e-300)) / (k - 1))
    value = max(value, 0.0) if value > -1e-9 else value

    if dim <= dense_cap:
        dense = _ti_minfo_dense(a, k, r)
        if dense is not None and abs(dense - value) > 1e-8 * max(1.0, abs(value)):
            raise NumericalError(
                f"TI mutual information paths disagree: {dense} vs {value}"
            )
    return value


def _ti_minfo_dense(tensor: np.ndarray, k: int, r: int) -> float | None:
    """Literal eigenexpansion over the k-cycle sector spectrum.

    The k-cycle operator is similar to the k-th tensor power of the plain
    transfer matrix by a slot regrouping (bra_j pairs with ket_{j-1}), so
    its eigenvalues are k-fold products of single-site eigenvalues and
    its left/right eigenvectors are regrouped tensor products. Building
    the expansion from the chi^2-dimensional decomposition keeps it
    well-conditioned despite the massive product degeneracies.

    Returns None when the single-site eigensystem is too ill-conditioned
    to biorthonormalize (the caller then skips the cross-check).
    """
    from .spectra import transfer_matrix

    a = np.asarray(tensor, dtype=np.complex128)
    chi = a.shape[0]
    tm = transfer_matrix(a)
    w, vl, vr = scipy.linalg.eig(tm, left=True, right=True)
    for m in range(w.size):
        c = vl[:, m].conj() @ vr[:, m]
        if abs(c) < 1e-10:
            return None
        vr[:, m] = vr[:, m] / c
    lead = int(np.argmax(np.abs(w)))
    l1 = vl[:, lead].conj()
    r1 = vr[:, lead]

    big_l = l1.copy()
    big_r = r1.copy()
    for _ in range(k - 1):
        big_l = np.kron(big_l, l1)
        big_r = np.kron(big_r, r1)

    # Interleaved axes (bra_0, ket_0, ...) regrouped to (bra_j, ket_{j-1}).
    axes = []
    for j in range(k):
        axes.extend([2 * j, 2 * ((j - 1) % k) + 1])
    l_rg = big_l.reshape((chi,) * (2 * k)).transpose(axes).reshape((chi * chi,) * k)
    r_rg = big_r.reshape((chi,) * (2 * k)).transpose(axes).reshape((chi * chi,) * k)

    d_l = l_rg
    d_r = r_rg
    for _ in range(k):
        d_l = np.tensordot(d_l, vr, axes=(0, 0))
        d_r = np.tensordot(d_r, vl.conj(), axes=(0, 0))
    weights = d_l * d_r

    lam_r = w ** r
    total = weights
    for _ in range(k):
        total = np.tensordot(total, lam_r, axes=(0, 0))
    den = weights[(lead,) * k]
    if abs(den) == 0.0:
        raise NumericalError("unit-eigenvalue overlap vanished in dense path")
    ratio = complex(total) / den
    return float(np.log(max(ratio.real, 1e-300)) / (k - 1))
