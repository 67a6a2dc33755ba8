"""Seeded generators for the MPS ensembles.

Three families are provided:

* random sequential MPS (``rmps``): one Haar unitary of size
  ``d*chi x d*chi`` per site, sliced into a right-isometric site tensor,
  so the state is normalized by construction and the flattened identity
  is a right eigenvector of every site transfer matrix;
* brickwork Haar circuits (``brickwork`` / ``brickwork_ti``): alternating
  even/odd layers of two-site gates applied to a product state with
  truncation back to bond dimension ``chi`` (per gate or per layer);
* monitored circuits (``monitored``): brickwork layers followed by
  per-site Bernoulli(p) projective measurements in the computational
  basis.

All randomness flows through the named substreams of :mod:`.rng`; a
monitored run at p = 0 is bit-identical to the unitary run with the same
seed because coins and outcomes live on their own streams.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatchError
from .linalg import qr_unitary, random_ginibre, svd
from .mps import MpsState, _zero_null_directions, product_state
from .rng import GATES, MEASUREMENT_COINS, MEASUREMENT_OUTCOMES, substream
from .spectra import canonicalize_uniform

FAMILIES = ("rmps", "brickwork_ti", "brickwork", "monitored")
TRUNCATION_MODES = ("per_gate", "per_layer")
TI_GATE_MODES = ("fresh_per_layer", "reuse_single", "two_gate_cell")


@dataclass(frozen=True)
class CircuitSpec:
    """Full description of one ensemble realization family.

    Attributes:
        family: one of ``rmps``, ``brickwork_ti``, ``brickwork``,
            ``monitored``.
        N: number of sites (the unit-cell size in uniform mode).
        d: local dimension.
        chi: bond-dimension cap.
        p: per-site, per-layer measurement probability (monitored only).
        depth: number of brick layers (one parity sublayer each).
        seed: 64-bit master seed.
        truncation_mode: ``per_gate`` or ``per_layer``.
        uniform: use the translation-invariant unit-cell protocol.
        ti_gate_mode: how the TI family shares gates: a fresh Haar gate
            per layer shared across positions (default), a single gate
            reused every layer, or a fixed even/odd gate pair.
        rank_tol: relative threshold below which Schmidt values become
            explicit zeros.
    """

    family: str
    N: int
    chi: int
    d: int = 2
    p: float = 0.0
    depth: int = 1
    seed: int = 0
    truncation_mode: str = "per_layer"
    uniform: bool = False
    ti_gate_mode: str = "fresh_per_layer"
    rank_tol: float = 1e-12

    def validate(self) -> "CircuitSpec":
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.truncation_mode not in TRUNCATION_MODES:
            raise ConfigError(f"unknown truncation mode {self.truncation_mode!r}")
        if self.ti_gate_mode not in TI_GATE_MODES:
            raise ConfigError(f"unknown TI gate mode {self.ti_gate_mode!r}")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if self.d < 2:
            raise ConfigError("d must be >= 2")
        if self.chi < 1:
            raise ConfigError("chi must be >= 1")
        if self.depth < 0:
            raise ConfigError("depth must be >= 0")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError("p must lie in [0, 1]")
        if not 0.0 < self.rank_tol < 1e-3:
            raise ConfigError("rank_tol must lie in (0, 1e-3)")
        if self.p != 0.0 and self.family != "monitored":
            raise ConfigError("p > 0 requires family 'monitored'")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitSpec":
        try:
            return cls(**data).validate()
        except TypeError as exc:
            raise ConfigError(f"bad CircuitSpec fields: {exc}") from exc


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via phase-fixed QR of a Ginibre sample."""
    if dim < 1:
        raise ConfigError("haar_unitary: dim must be >= 1")
    if dim == 1:
        phase = rng.random() * 2.0 * np.pi
        return np.array([[np.exp(1j * phase)]], dtype=np.complex128)
    return qr_unitary(random_ginibre(dim, rng))


def rmps_bond_dims(N: int, d: int, chi: int) -> list[int]:
    """Bond profile min(d^i, d^(N-i), chi), including boundary bonds."""
    return [min(d ** min(i, N - i), chi) for i in range(N + 1)]


def rmps_site_tensor(chi_l: int, d: int, chi_r: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Right-isometric site tensor sliced from a ``d*chi_r`` Haar unitary.

    ``A[a, s, b] = U[(s, b), a]`` for the first chi_l columns of U, so
    ``sum_s A^s (A^s)+ = I`` holds exactly.
    """
    if chi_l > d * chi_r:
        raise DimensionMismatchError("isometry requires chi_l <= d * chi_r")
    u = haar_unitary(d * chi_r, rng)
    v = u[:, :chi_l]
    return np.ascontiguousarray(v.reshape(d, chi_r, chi_l).transpose(2, 0, 1))


def build_rmps(N: int, chi: int, d: int, rng: np.random.Generator,
               uniform: bool = False, rank_tol: float = 1e-12) -> MpsState:
    """Random sequential MPS with one fresh Haar unitary per site.

    In uniform mode a single bulk tensor (the same at every site) is
    returned as a one-site unit cell.
    """
    if uniform:
        a = rmps_site_tensor(chi, d, chi, rng)
        return MpsState([a], d, ortho_center=None, uniform=True, rank_tol=rank_tol)
    dims = rmps_bond_dims(N, d, chi)
    tensors = [rmps_site_tensor(dims[i], d, dims[i + 1], rng) for i in range(N)]
    return MpsState(tensors, d, ortho_center=0, rank_tol=rank_tol)


def _layer_positions(N: int, parity: int) -> range:
    return range(parity, N - 1, 2)


def apply_brickwork_layer(state: MpsState, gates, parity: int,
                          chi_max: int, mode: str = "per_layer") -> MpsState:
    """Apply one sublayer of two-site gates on bonds of the given parity.

    Args:
        state: mutated in place; any gauge is accepted.
        gates: a single gate shared by all positions, or a sequence with
            one gate per position (ascending site order).
        parity: 0 for even bonds, 1 for odd bonds.
        chi_max: bond cap enforced now (``per_gate``) or by a closing
            truncation sweep (``per_layer``).
    """
    positions = list(_layer_positions(state.N, parity))
    if isinstance(gates, np.ndarray) and gates.ndim == 2:
        gates = [gates] * len(positions)
    if len(gates) != len(positions):
        raise ConfigError(f"expected {len(positions)} gates, got {len(gates)}")
    cap = chi_max if mode == "per_gate" else None
    for pos, gate in zip(positions, gates):
        if state.ortho_center is None or not pos <= state.ortho_center <= pos + 1:
            state.canonicalize(pos, normalize=False)
        state.apply_two_site_gate(gate, pos, chi_max=cap)
    if mode == "per_layer":
        state.truncate_sweep(chi_max)
    return state


class _GateSource:
    """Layer-by-layer gate supplier honoring the TI sharing mode."""

    def __init__(self, spec: CircuitSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self._fixed: list[np.ndarray] = []

    def layer_gates(self, layer: int):
        spec = self.spec
        dim = spec.d * spec.d
        parity = layer % 2
        n_pos = len(_layer_positions(spec.N, parity))
        if spec.family in ("brickwork", "monitored"):
            return [haar_unitary(dim, self.rng) for _ in range(n_pos)]
        # Translation-invariant family: one gate shared across positions.
        if spec.ti_gate_mode == "fresh_per_layer":
            return haar_unitary(dim, self.rng)
        n_fixed = 1 if spec.ti_gate_mode == "reuse_single" else 2
        while len(self._fixed) < n_fixed:
            self._fixed.append(haar_unitary(dim, self.rng))
        return self._fixed[layer % n_fixed]


def run_brickwork(spec: CircuitSpec, rng: np.random.Generator | None = None,
                  realization: int = 0, gate_log: list | None = None) -> MpsState:
    """Evolve |0...0> through ``depth`` brickwork layers with truncation.

    Args:
        gate_log: optional list collecting ``(layer, position, gate)``
            records for audit.
    """
    spec.validate()
    if spec.family not in ("brickwork", "brickwork_ti", "monitored"):
        raise ConfigError(f"run_brickwork cannot handle family {spec.family!r}")
    if rng is None:
        rng = substream(spec.seed, realization, GATES)
    source = _GateSource(spec, rng)
    state = product_state(spec.N, spec.d, rank_tol=spec.rank_tol)
    for layer in range(spec.depth):
        gates = source.layer_gates(layer)
        _log_gates(gate_log, layer, spec.N, layer % 2, gates)
        apply_brickwork_layer(state, gates, layer % 2, spec.chi,
                              spec.truncation_mode)
    return state


def run_monitored(spec: CircuitSpec, realization: int = 0,
                  rngs: tuple | None = None,
                  gate_log: list | None = None) -> tuple[MpsState, list]:
    """Monitored brickwork trajectory.

    Each layer applies the gate sublayer, then measures every site
    independently with probability ``p`` (ascending site order). Outcome
    uniforms are drawn lazily, only for sites that are measured.

    Returns:
        The trajectory endpoint and the record of measurement events as
        ``(layer, site, outcome)`` triples.
    """
    spec.validate()
    if spec.family != "monitored":
        raise ConfigError("run_monitored requires family 'monitored'")
    if rngs is None:
        rngs = (substream(spec.seed, realization, GATES),
                substream(spec.seed, realization, MEASUREMENT_COINS),
                substream(spec.seed, realization, MEASUREMENT_OUTCOMES))
    rng_gates, rng_coins, rng_outcomes = rngs
    source = _GateSource(spec, rng_gates)
    state = product_state(spec.N, spec.d, rank_tol=spec.rank_tol)
    trajectory: list[tuple[int, int, int]] = []
    for layer in range(spec.depth):
        gates = source.layer_gates(layer)
        _log_gates(gate_log, layer, spec.N, layer % 2, gates)
        apply_brickwork_layer(state, gates, layer % 2, spec.chi,
                              spec.truncation_mode)
        coins = rng_coins.random(spec.N)
        for site in np.flatnonzero(coins < spec.p):
            site = int(site)
            state.canonicalize(site, normalize=False)
            outcome = state.measure_site(site, rng_outcomes)
            trajectory.append((layer, site, outcome))
    return state, trajectory


def _log_gates(gate_log, layer, N, parity, gates):
    if gate_log is None:
        return
    positions = list(_layer_positions(N, parity))
    if isinstance(gates, np.ndarray):
        gates = [gates] * len(positions)
    for pos, gate in zip(positions, gates):
        gate_log.append((layer, pos, gate.copy()))


# -- translation-invariant unit-cell protocol ---------------------------


def _pinv_weights(lam: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    scale = lam.max(initial=0.0)
    out = np.zeros_like(lam)
    alive = lam > rank_tol * scale
    out[alive] = 1.0 / lam[alive]
    return out


def _update_cell_bond(g_a, g_b, lam_mid, lam_out, gate, d, chi, rank_tol=1e-12):
    """One gate on the (g_a, g_b) bond of the two-site unit cell."""
    chi_o = g_a.shape[0]
    theta = np.einsum("a,asc,c,ctb,b->astb", lam_out, g_a, lam_mid, g_b, lam_out,
                      optimize=True)
    theta = theta.transpose(1, 2, 0, 3).reshape(d * d, chi_o * chi_o)
    theta = (gate @ theta).reshape(d, d, chi_o, chi_o)
    theta = theta.transpose(2, 0, 1, 3).reshape(chi_o * d, d * chi_o)
    res = svd(theta)
    keep = min(chi, res.s.size)
    u, s, vh = _zero_null_directions(res.U[:, :keep], res.s[:keep],
                                     res.Vh[:keep, :], rank_tol)
    s = s / np.linalg.norm(s)
    inv_out = _pinv_weights(lam_out, rank_tol)
    g_a_new = np.einsum("a,asc->asc", inv_out,
                        u.reshape(chi_o, d, keep), optimize=True)
    g_b_new = np.einsum("ctb,b->ctb", vh.reshape(keep, d, chi_o), inv_out,
                        optimize=True)
    return g_a_new, g_b_new, s


def run_uniform_ti(spec: CircuitSpec, rng: np.random.Generator | None = None,
                   realization: int = 0) -> MpsState:
    """Translation-invariant evolution of a two-site unit cell.

    For the ``rmps`` family this returns the one-site uniform random MPS
    directly. For ``brickwork_ti`` it runs ``depth`` alternating-bond
    layers on the unit cell with gates supplied per ``ti_gate_mode`` and
    returns the canonicalized cell as a uniform two-site state.
    """
    spec.validate()
    if rng is None:
        rng = substream(spec.seed, realization, GATES)
    if spec.family == "rmps":
        return build_rmps(spec.N, spec.chi, spec.d, rng, uniform=True,
                          rank_tol=spec.rank_tol)
    if spec.family != "brickwork_ti":
        raise ConfigError("run_uniform_ti requires family 'rmps' or 'brickwork_ti'")
    d = spec.d
    source = _GateSource(spec, rng)
    v0 = np.zeros((1, d, 1), dtype=np.complex128)
    v0[0, 0, 0] = 1.0
    gammas = [v0.copy(), v0.copy()]
    lams = [np.ones(1), np.ones(1)]
    for layer in range(spec.depth):
        gate = source.layer_gates(layer)
        a = layer % 2
        b = 1 - a
        g_a, g_b, s = _update_cell_bond(gammas[a], gammas[b], lams[a], lams[b],
                                        gate, d, spec.chi, spec.rank_tol)
        gammas[a], gammas[b], lams[a] = g_a, g_b, s
    # Blocked unit cell in B-form: (Gamma_0 lam_0)(Gamma_1 lam_1).
    b0 = np.einsum("asc,c->asc", gammas[0], lams[0], optimize=True)
    b1 = np.einsum("asc,c->asc", gammas[1], lams[1], optimize=True)
    chi_now = b0.shape[0]
    if b1.shape[2] != chi_now:
        raise ConfigError("unit cell failed to reach a uniform bond dimension")
    cell = np.einsum("asc,ctb->astb", b0, b1, optimize=True)
    cell = cell.reshape(chi_now, d * d, chi_now)
    cell = canonicalize_uniform(cell, gauge="left")
    # Split the canonical cell back into two site tensors.
    mat = cell.reshape(chi_now * d, d * chi_now)
    res = svd(mat)
    keep = min(spec.chi, res.s.size)
    left = res.U[:, :keep].reshape(chi_now, d, keep)
    right = (res.s[:keep, None] * res.Vh[:keep, :]).reshape(keep, d, chi_now)
    return MpsState([left, right], d, ortho_center=None, uniform=True,
                    rank_tol=spec.rank_tol)


def block_cell(state: MpsState) -> np.ndarray:
    """Blocked unit-cell tensor of a uniform state (physical dim d^cell)."""
    if not state.uniform:
        raise ConfigError("block_cell expects a uniform state")
    out = state.tensors[0]
    for t in state.tensors[1:]:
        out = np.einsum("asc,ctb->astb", out, t, optimize=True)
        out = out.reshape(out.shape[0], -1, out.shape[-1])
    return out
