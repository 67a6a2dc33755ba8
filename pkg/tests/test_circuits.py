import numpy as np
import pytest

from mps_ensembles.circuits import (CircuitSpec, block_cell, build_rmps,
                                    haar_unitary, rmps_bond_dims,
                                    run_brickwork, run_monitored,
                                    run_uniform_ti)
from mps_ensembles.errors import ConfigError
from mps_ensembles.rng import GATES, substream
from mps_ensembles.spectra import transfer_matrix

from oracles import haar_moment_mc, run_brickwork_statevector, run_monitored_statevector


class TestCircuitSpec:
    def test_round_trip(self):
        spec = CircuitSpec(family="monitored", N=8, chi=4, p=0.2, depth=5, seed=3)
        again = CircuitSpec.from_dict(__import__("json").loads(spec.to_json()))
        assert again == spec

    @pytest.mark.parametrize("bad", [
        dict(family="nope", N=4, chi=2),
        dict(family="brickwork", N=4, chi=0),
        dict(family="brickwork", N=0, chi=2),
        dict(family="brickwork", N=4, chi=2, p=0.5),
        dict(family="monitored", N=4, chi=2, p=1.5),
        dict(family="monitored", N=4, chi=2, truncation_mode="sometimes"),
    ])
    def test_validation(self, bad):
        with pytest.raises(ConfigError):
            CircuitSpec(**bad).validate()


class TestHaarUnitary:
    def test_dim_one_is_phase(self, rng):
        u = haar_unitary(1, rng)
        assert abs(abs(u[0, 0]) - 1.0) < 1e-12

    def test_unitarity(self, rng):
        u = haar_unitary(6, rng)
        assert np.linalg.norm(u.conj().T @ u - np.eye(6)) < 1e-12

    def test_second_moment(self):
        # E|U_00|^2 = 1/dim at dim 4.
        mean, se = haar_moment_mc(4, [(0, 0, False), (0, 0, True)],
                                  n_samples=10_000, seed=1)
        assert abs(mean.real - 0.25) < 5 * se.real

    def test_fourth_moment(self):
        # E|U_00|^4 = 2 / (D (D + 1)) = 1/3 at dim 2.
        mean, se = haar_moment_mc(2, [(0, 0, False)] * 2 + [(0, 0, True)] * 2,
                                  n_samples=10_000, seed=2)
        assert abs(mean.real - 1.0 / 3.0) < 5 * se.real

    def test_first_moment_vanishes(self):
        rng = substream(4, 0, GATES)
        total = np.zeros((4, 4), dtype=complex)
        n = 10_000
        for _ in range(n):
            total += haar_unitary(4, rng)
        assert np.abs(total / n).max() < 5.0 / np.sqrt(n)


class TestRmps:
    def test_chi_one_is_product(self):
        rng = substream(0, 0, GATES)
        st = build_rmps(4, 1, 2, rng)
        assert st.bond_dims() == [1] * 5
        st.canonicalize(1)
        assert st.renyi_entropy(1, 2) == pytest.approx(0.0, abs=1e-12)

    def test_normalized_without_renormalization(self):
        rng = substream(1, 0, GATES)
        st = build_rmps(7, 5, 3, rng)
        assert abs(st.norm() - 1.0) < 1e-10

    def test_bond_profile(self):
        assert rmps_bond_dims(6, 2, 4) == [1, 2, 4, 4, 4, 2, 1]

    def test_identity_is_right_fixed_point(self):
        rng = substream(2, 0, GATES)
        st = build_rmps(6, 4, 2, rng)
        for site, t in enumerate(st.tensors):
            # Rectangular form of the fixed-point identity at every site.
            gram = np.einsum("aib,cib->ac", t, np.conj(t))
            assert np.linalg.norm(gram - np.eye(t.shape[0])) < 1e-10
            if t.shape[0] == t.shape[2]:
                tm = transfer_matrix(t)
                vec_id = np.eye(t.shape[0]).reshape(-1)
                assert np.linalg.norm(tm @ vec_id - vec_id) < 1e-10

    def test_entropy_grows_with_log_chi(self):
        # Ensemble-mean half-chain entropy advances by about log 2 per
        # doubling of chi.
        means = {}
        for chi in (8, 16):
            vals = []
            for real in range(12):
                rng = substream(900 + real, 0, GATES)
                st = build_rmps(16, chi, 2, rng)
                st.canonicalize(8)
                vals.append(st.renyi_entropy(8, 2))
            means[chi] = np.mean(vals)
        delta = means[16] - means[8]
        assert abs(delta - np.log(2.0)) < 0.35

    def test_uniform_cell(self):
        rng = substream(3, 0, GATES)
        st = build_rmps(1, 3, 2, rng, uniform=True)
        assert st.uniform
        assert st.tensors[0].shape == (3, 2, 3)


class TestBrickwork:
    def test_depth_zero_is_initial_state(self):
        spec = CircuitSpec(family="brickwork", N=5, chi=4, depth=0, seed=0)
        st = run_brickwork(spec)
        vec = st.to_statevector()
        assert abs(vec[0]) == pytest.approx(1.0)

    @pytest.mark.parametrize("family", ["brickwork", "brickwork_ti"])
    @pytest.mark.parametrize("mode", ["per_gate", "per_layer"])
    def test_matches_statevector_uncapped(self, family, mode):
        spec = CircuitSpec(family=family, N=6, chi=8, depth=3, seed=5,
                           truncation_mode=mode)
        st = run_brickwork(spec)
        sv = run_brickwork_statevector(spec)
        assert np.abs(st.to_statevector() - sv.psi).max() < 1e-10

    def test_determinism(self):
        spec = CircuitSpec(family="brickwork", N=8, chi=4, depth=6, seed=9)
        a = run_brickwork(spec)
        b = run_brickwork(spec)
        assert all((x == y).all() for x, y in zip(a.tensors, b.tensors))

    def test_norm_one(self):
        spec = CircuitSpec(family="brickwork_ti", N=10, chi=6, depth=8, seed=1)
        st = run_brickwork(spec)
        assert abs(st.norm() - 1.0) < 1e-8

    @pytest.mark.slow
    def test_entanglement_saturates(self):
        # Half-chain entropy reaches a plateau near log(chi) by depth 4 chi.
        chi = 16
        spec = CircuitSpec(family="brickwork", N=24, chi=chi, depth=4 * chi + 8,
                           seed=33)
        from mps_ensembles.circuits import _GateSource, apply_brickwork_layer
        from mps_ensembles.mps import product_state

        source = _GateSource(spec, substream(spec.seed, 0, GATES))
        st = product_state(spec.N, spec.d)
        entropies = []
        for layer in range(spec.depth):
            gates = source.layer_gates(layer)
            apply_brickwork_layer(st, gates, layer % 2, spec.chi,
                                  spec.truncation_mode)
            if layer >= 4 * chi - 8:
                work = st.copy()
                work.canonicalize(spec.N // 2)
                entropies.append(work.renyi_entropy(spec.N // 2, 2))
        tail = np.array(entropies)
        slope = np.polyfit(np.arange(tail.size), tail, 1)[0]
        assert abs(slope) < 0.01
        assert tail.mean() > 0.6 * np.log(chi)


class TestMonitored:
    def test_p_zero_matches_brickwork_bit_exactly(self):
        mon = CircuitSpec(family="monitored", N=8, chi=6, p=0.0, depth=6, seed=12)
        bw = CircuitSpec(family="brickwork", N=8, chi=6, depth=6, seed=12)
        a, traj = run_monitored(mon)
        b = run_brickwork(bw)
        assert traj == []
        assert all((x == y).all() for x, y in zip(a.tensors, b.tensors))

    def test_p_one_gives_product_state(self):
        spec = CircuitSpec(family="monitored", N=6, chi=8, p=1.0, depth=3, seed=4)
        st, traj = run_monitored(spec)
        assert len(traj) == 3 * 6
        for cut in range(1, 6):
            st.canonicalize(cut - 1, normalize=False)
            s = st.schmidt_values(cut)
            assert np.all(s[1:] < 1e-10)

    def test_trajectory_matches_statevector(self):
        spec = CircuitSpec(family="monitored", N=8, chi=16, p=0.5, depth=5,
                           seed=42, truncation_mode="per_gate")
        st, traj = run_monitored(spec)
        sv, traj_oracle = run_monitored_statevector(spec)
        assert traj == traj_oracle
        assert np.abs(st.to_statevector() - sv.psi).max() < 1e-10

    def test_requires_monitored_family(self):
        spec = CircuitSpec(family="brickwork", N=4, chi=2, depth=1)
        with pytest.raises(ConfigError):
            run_monitored(spec)


class TestUniformTI:
    def test_depth_zero_product_cell(self):
        spec = CircuitSpec(family="brickwork_ti", N=2, chi=4, depth=0, seed=0)
        st = run_uniform_ti(spec)
        cell = block_cell(st)
        tm = transfer_matrix(cell)
        w = np.sort(np.abs(np.linalg.eigvals(tm)))[::-1]
        assert w[0] == pytest.approx(1.0, abs=1e-10)
        assert np.all(w[1:] < 1e-10)

    def test_identity_gates_leave_cell_invariant(self):
        # Replaying identity gates through the update keeps the trivial cell.
        from mps_ensembles.circuits import _update_cell_bond

        d, chi = 2, 4
        g = np.zeros((1, d, 1), dtype=complex)
        g[0, 0, 0] = 1.0
        lam = np.ones(1)
        g0, g1, s = _update_cell_bond(g, g, lam, lam, np.eye(d * d), d, chi)
        theta = np.einsum("asc,c,ctb->astb", g0, s, g1)
        ref = np.einsum("asc,c,ctb->astb", g, lam, g)
        assert np.abs(theta - ref).max() < 1e-12

    def test_gauge_fixed_leading_eigenvalue(self):
        spec = CircuitSpec(family="brickwork_ti", N=2, chi=8, depth=50, seed=7)
        st = run_uniform_ti(spec)
        cell = block_cell(st)
        tm = transfer_matrix(cell)
        lead = np.max(np.abs(np.linalg.eigvals(tm)))
        assert lead == pytest.approx(1.0, abs=1e-8)

    def test_rmps_family_returns_uniform(self):
        spec = CircuitSpec(family="rmps", N=1, chi=4, depth=1, seed=1)
        st = run_uniform_ti(spec)
        assert st.uniform and st.tensors[0].shape == (4, 2, 4)


class TestTiGateModes:
    def test_reuse_single_repeats_layers(self):
        spec = CircuitSpec(family="brickwork_ti", N=6, chi=8, depth=4, seed=2,
                           ti_gate_mode="reuse_single")
        log = []
        run_brickwork(spec, gate_log=log)
        gates = {layer: [g for (l, _, g) in log if l == layer] for layer in range(4)}
        assert np.allclose(gates[0][0], gates[1][0])
        assert np.allclose(gates[0][0], gates[3][0])

    def test_two_gate_cell_alternates(self):
        spec = CircuitSpec(family="brickwork_ti", N=6, chi=8, depth=4, seed=3,
                           ti_gate_mode="two_gate_cell")
        log = []
        run_brickwork(spec, gate_log=log)
        by_layer = {layer: [g for (l, _, g) in log if l == layer]
                    for layer in range(4)}
        assert np.allclose(by_layer[0][0], by_layer[2][0])
        assert np.allclose(by_layer[1][0], by_layer[3][0])
        assert not np.allclose(by_layer[0][0], by_layer[1][0])

    def test_fresh_per_layer_differs(self):
        spec = CircuitSpec(family="brickwork_ti", N=6, chi=8, depth=2, seed=4)
        log = []
        run_brickwork(spec, gate_log=log)
        g0 = [g for (l, _, g) in log if l == 0][0]
        g1 = [g for (l, _, g) in log if l == 1][0]
        assert not np.allclose(g0, g1)

    def test_gate_log_shared_within_ti_layer(self):
        spec = CircuitSpec(family="brickwork_ti", N=8, chi=4, depth=1, seed=5)
        log = []
        run_brickwork(spec, gate_log=log)
        layer0 = [g for (l, _, g) in log if l == 0]
        assert len(layer0) == 4  # gates on bonds 0, 2, 4, 6
        for g in layer0[1:]:
            assert np.allclose(g, layer0[0])
