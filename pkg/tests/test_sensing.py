import numpy as np
import pytest

from hamsense.exceptions import ValidationError
from hamsense.experiment import ExperimentConfig, LocalObservable, NoiseSpec, ProductState, sample_configs
from hamsense.models import planted_sparse
from hamsense.pauli import PauliString, pauli_basis, to_dense
from hamsense.sensing import (
    assemble,
    build_matrix,
    build_row,
    load_system,
    model_mismatch,
    rank_precheck,
    save_system,
)


def dense_row(c):
    n = c.n_qubits
    M = to_dense(c.observable.pauli(n))
    psi = c.state.to_vector()
    vals = []
    for p in pauli_basis(n):
        G = to_dense(p)
        vals.append(1j * np.vdot(psi, (G @ M - M @ G) @ psi))
    vals = np.array(vals)
    return c.time * vals.real, np.max(np.abs(vals.imag))


class TestBuildRow:
    def test_identity_column(self, rng):
        for c in sample_configs(3, 20, 0.5, rng):
            assert build_row(c)[0] == 0

    def test_plus_state_example(self):
        t = 0.3
        c = ExperimentConfig(ProductState.from_labels("+"), LocalObservable(0, "Z"), t)
        row = build_row(c)
        assert row[PauliString("X").index] == pytest.approx(0.0, abs=1e-15)
        assert row[PauliString("Y").index] == pytest.approx(-2 * t)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_matches_dense(self, n, rng):
        for c in sample_configs(n, 100 if n < 3 else 40, 0.7, rng):
            ref, imag = dense_row(c)
            assert imag < 1e-12
            assert np.max(np.abs(build_row(c) - ref)) < 1e-12

    def test_wrong_size(self, rng):
        c = sample_configs(2, 1, 0.1, rng)[0]
        with pytest.raises(ValidationError):
            build_row(c, 3)


class TestAssemble:
    def test_linearized_consistency(self, rng):
        h = planted_sparse(3, 5, 1)
        s = assemble(h, sample_configs(3, 30, 0.05, rng), linearized=True)
        assert np.max(np.abs(s.pbar - s.phi @ h)) < 1e-12

    def test_exact_residual_scales_with_t_squared(self):
        h = planted_sparse(3, 5, 1)
        base = sample_configs(3, 40, 1.0, np.random.default_rng(2))
        res = []
        for t in (0.02, 0.002):
            cs = [ExperimentConfig(c.state, c.observable, t) for c in base]
            s = assemble(h, cs)
            res.append(np.linalg.norm(s.pbar - s.phi @ h))
        assert res[0] / res[1] == pytest.approx(100, rel=0.05)

    def test_empty(self):
        with pytest.raises(ValidationError):
            assemble(np.zeros(4), [])

    def test_mixed_times(self, rng):
        cs = sample_configs(1, 2, 0.1, rng)
        cs[1] = ExperimentConfig(cs[1].state, cs[1].observable, 0.2)
        with pytest.raises(ValidationError):
            assemble(np.zeros(4), cs)

    def test_entry_bound(self, rng):
        t, m = 0.3, 25
        s = assemble(np.zeros(64), sample_configs(3, m, t, rng))
        assert np.max(np.abs(s.phi)) <= 2 * t / np.sqrt(m) + 1e-15

    def test_noise_targets(self, rng):
        h = planted_sparse(2, 3, 1)
        cs = sample_configs(2, 10, 0.05, rng)
        clean = assemble(h, cs)
        sig = assemble(h, cs, NoiseSpec("relative_uniform", 0.1, seed=1))
        out = assemble(h, cs, NoiseSpec("relative_uniform", 0.1, seed=1, target="outcome"))
        assert np.all(np.abs(sig.pbar - clean.pbar) <= 0.1 * np.abs(clean.pbar) + 1e-15)
        assert np.linalg.norm(out.pbar - clean.pbar) > np.linalg.norm(sig.pbar - clean.pbar)

    def test_mismatch_is_data_residual_at_truth(self, rng):
        h = planted_sparse(2, 3, 1)
        s = assemble(h, sample_configs(2, 10, 1e-2, rng))
        assert np.allclose(model_mismatch(s, h), s.pbar - s.phi @ h, atol=1e-15)

    def test_subsystem_rescales(self, rng):
        h = planted_sparse(2, 3, 1)
        cs = sample_configs(2, 12, 0.05, rng)
        full = assemble(h, cs)
        part = assemble(h, cs[:5])
        sub = full.subsystem(5)
        assert np.allclose(sub.phi, part.phi) and np.allclose(sub.pbar, part.pbar)


class TestRank:
    def test_duplicates(self, rng):
        cs = sample_configs(2, 5, 0.1, rng)
        rep = rank_precheck(build_matrix(cs + cs[:2]))
        assert rep.rank == 5
        assert rep.redundant_rows == (5, 6)

    def test_random_full_rank(self, rng):
        phi = build_matrix(sample_configs(2, 10, 0.1, rng))
        rep = rank_precheck(phi)
        assert rep.rank == np.linalg.matrix_rank(phi) == 10
        assert rep.redundant_rows == ()

    def test_degenerate(self):
        assert rank_precheck(np.zeros((0, 4))).rank == 0
        assert rank_precheck(np.zeros((3, 4))).rank == 0


class TestSerialization:
    def test_round_trip(self, tmp_path, rng):
        h = planted_sparse(2, 3, 1)
        s = assemble(h, sample_configs(2, 7, 0.05, rng), NoiseSpec("additive_gaussian", 1e-3, seed=4))
        save_system(s, tmp_path, h_true=h)
        back = load_system(tmp_path)
        assert np.array_equal(back.phi, s.phi) and np.array_equal(back.pbar, s.pbar)
        assert back.time == s.time and back.noise == s.noise
        assert [c.observable for c in back.configs] == [c.observable for c in s.configs]
        assert np.allclose(build_matrix(back.configs) / np.sqrt(7), s.phi, atol=1e-15)
        assert np.array_equal(np.loadtxt(tmp_path / "h_true.csv"), h)
        assert not back.linearized

    def test_linearized_flag_round_trip(self, tmp_path, rng):
        s = assemble(planted_sparse(2, 3, 1), sample_configs(2, 7, 0.05, rng), linearized=True)
        assert s.subsystem(5).linearized
        save_system(s, tmp_path)
        assert load_system(tmp_path).linearized

    def test_without_meta(self, tmp_path):
        np.savetxt(tmp_path / "phi.csv", np.eye(2), delimiter=",")
        np.savetxt(tmp_path / "pbar.csv", np.ones(2))
        s = load_system(tmp_path)
        assert s.m == 2 and s.configs == []

    def test_shape_mismatch(self, tmp_path):
        np.savetxt(tmp_path / "phi.csv", np.eye(4), delimiter=",")
        np.savetxt(tmp_path / "pbar.csv", np.ones(3))
        with pytest.raises(ValidationError):
            load_system(tmp_path)
