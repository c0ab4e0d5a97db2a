import itertools
import warnings

import numpy as np
import pytest

from hamsense.exceptions import ParameterError, ValidationError
from hamsense.models import (
    ExchangeParams,
    LatticeParams,
    exchange_hamiltonian,
    lattice_coefficients,
    optical_lattice_hamiltonian,
    planted_sparse,
    sparsity_report,
    truncate,
)
from hamsense.pauli import PAULI_MATRICES, PauliString, decompose, reconstruct

# Amplitudes at j_up = 1, j_down = 0.5, u = 10, evaluated by hand and frozen.
FROZEN_J1 = {"zz": 0.0007125, "xx_yy": -0.06575, "zzz": 0.001225, "xzx_yzy": -0.0015}


def idx(s):
    return PauliString(s).index


class TestLattice:
    def test_frozen_amplitudes(self):
        c = lattice_coefficients(LatticeParams(1.0, 0.5, 10.0))
        for k, v in FROZEN_J1.items():
            assert c[k] == pytest.approx(v, rel=1e-12)

    def test_placement(self):
        h = optical_lattice_hamiltonian(LatticeParams.from_ratio(1.0))
        assert h[idx("ZZII")] == pytest.approx(FROZEN_J1["zz"])
        assert h[idx("IIXX")] == pytest.approx(FROZEN_J1["xx_yy"])
        assert h[idx("IYZY")] == pytest.approx(FROZEN_J1["xzx_yzy"])
        assert h[idx("ZZZI")] == pytest.approx(FROZEN_J1["zzz"])
        assert np.count_nonzero(h) == 15

    def test_symmetric_species_is_two_body(self):
        h = optical_lattice_hamiltonian(LatticeParams(1.0, 1.0, 10.0))
        assert all(PauliString.from_index(i, 4).weight == 2 for i in np.flatnonzero(h))

    def test_no_tunneling(self):
        assert not np.any(optical_lattice_hamiltonian(LatticeParams(0.0, 0.0, 10.0)))

    def test_invalid(self):
        with pytest.raises(ParameterError):
            LatticeParams(1.0, 0.5, 0.0)
        with pytest.raises(ParameterError):
            LatticeParams(11.0, 0.5, 10.0)

    @pytest.mark.parametrize("j", [0.5, 1.0, 5.0, 9.0])
    def test_support_and_hermitian(self, j):
        h = optical_lattice_hamiltonian(LatticeParams.from_ratio(j))
        allowed = set()
        for k in range(3):
            allowed |= {idx("I" * k + p + "I" * (2 - k)) for p in ("ZZ", "XX", "YY")}
        for k in range(2):
            allowed |= {idx("I" * k + p + "I" * (1 - k)) for p in ("ZZZ", "XZX", "YZY")}
        assert set(np.flatnonzero(h)) <= allowed
        assert h[0] == 0
        H = reconstruct(h)
        assert np.allclose(H, H.conj().T)

    def test_sparsity_scan_oracle(self):
        # independent scan of the four amplitudes times their multiplicities
        c = lattice_coefficients(LatticeParams.from_ratio(5.0))
        mult = {"zz": 3, "xx_yy": 6, "zzz": 2, "xzx_yzy": 4}
        h_max = max(abs(v) for v in c.values())
        expected = sum(mult[k] for k, v in c.items() if abs(v) > 0.05 * h_max)
        h = optical_lattice_hamiltonian(LatticeParams.from_ratio(5.0))
        assert sparsity_report(h, 0.05).s_at_threshold == expected

    def test_three_body_weakens_with_smaller_tunneling(self):
        js = np.linspace(0.05, 9.9, 200)
        amps = [lattice_coefficients(LatticeParams.from_ratio(j)) for j in js]
        for key in ("zzz", "xzx_yzy"):
            mags = np.abs([a[key] for a in amps])
            assert np.all(np.diff(mags) > 0)

    def test_threshold_count_is_not_monotone_near_zz_crossing(self):
        # the zz amplitude changes sign near j/u = 0.12, so a smaller j can
        # expose it above a fine threshold again
        lo = sparsity_report(optical_lattice_hamiltonian(LatticeParams.from_ratio(1.013)), 0.01)
        hi = sparsity_report(optical_lattice_hamiltonian(LatticeParams.from_ratio(1.037)), 0.01)
        assert lo.s_at_threshold > hi.s_at_threshold

    @pytest.mark.parametrize("eta", [0.1, 0.2])
    def test_threshold_count_monotone_at_coarse_threshold(self, eta):
        s = [
            sparsity_report(optical_lattice_hamiltonian(LatticeParams.from_ratio(j)), eta).s_at_threshold
            for j in np.linspace(0.05, 9.9, 200)
        ]
        assert np.all(np.diff(s) >= 0)


def dense_dot(n, i, j):
    out = 0
    for a in (1, 2, 3):
        ops = [np.eye(2)] * n
        ops[i] = ops[j] = PAULI_MATRICES[a]
        m = np.ones((1, 1))
        for o in ops:
            m = np.kron(m, o)
        out = out + m
    return out


class TestExchange:
    def test_heisenberg_only(self):
        h = exchange_hamiltonian(ExchangeParams(1.0, 0.0))
        assert np.count_nonzero(h) == 18
        assert np.all(h[np.flatnonzero(h)] == 1.0)

    def test_four_body_oracle(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            # j must be nonzero; subtract the two-body part instead
            h = exchange_hamiltonian(ExchangeParams(1.0, 1.0)) - exchange_hamiltonian(ExchangeParams(1.0, 0.0))
        d = {p: dense_dot(4, *p) for p in itertools.combinations(range(4), 2)}
        four = d[0, 1] @ d[2, 3] + d[0, 2] @ d[1, 3] + d[0, 3] @ d[1, 2]
        assert np.allclose(h, decompose(four), atol=1e-12)

    def test_support_union(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            four = exchange_hamiltonian(ExchangeParams(1.0, 1.0)) - exchange_hamiltonian(ExchangeParams(1.0, 0.0))
        two = exchange_hamiltonian(ExchangeParams(1.0, 0.0))
        mixed = exchange_hamiltonian(ExchangeParams(1.0, 0.05))
        union = set(np.flatnonzero(np.abs(two) > 1e-12)) | set(np.flatnonzero(np.abs(four) > 1e-12))
        assert set(np.flatnonzero(np.abs(mixed) > 1e-12)) == union

    def test_warns_outside_physical_range(self):
        with pytest.warns(UserWarning):
            ExchangeParams(1.0, 0.5)

    def test_zero_j(self):
        with pytest.raises(ParameterError):
            ExchangeParams(0.0, 0.1)

    def test_permutation_invariance(self):
        h = exchange_hamiltonian(ExchangeParams(1.0, 0.1))
        for perm in itertools.permutations(range(4)):
            g = np.zeros_like(h)
            for i in np.flatnonzero(h):
                s = str(PauliString.from_index(i, 4))
                g[idx("".join(s[perm[k]] for k in range(4)))] = h[i]
            assert np.allclose(g, h)

    def test_traceless_hermitian(self):
        h = exchange_hamiltonian(ExchangeParams(1.0, 0.1))
        assert h[0] == pytest.approx(0, abs=1e-12)
        H = reconstruct(h)
        assert np.allclose(H, H.conj().T)


class TestPlanted:
    def test_zero_support(self):
        with pytest.raises(ParameterError):
            planted_sparse(2, 0, 1)

    def test_too_large(self):
        with pytest.raises(ParameterError):
            planted_sparse(1, 4, 1)

    def test_deterministic(self):
        assert planted_sparse(2, 3, 11).tobytes() == planted_sparse(2, 3, 11).tobytes()

    def test_report_consistency(self):
        h = planted_sparse(2, 3, 5)
        nz = np.abs(h[h != 0])
        assert h[0] == 0
        eta = 0.99 * nz.min() / nz.max()
        assert sparsity_report(h, eta).s_at_threshold == 3


class TestSparsityReport:
    def test_exact_sparse(self):
        r = sparsity_report(np.array([1.0, 0, 0, 0]), 0.5)
        assert (r.s_at_threshold, r.truncation_l1) == (1, 0.0)

    def test_sub_threshold_entry(self):
        r = sparsity_report(np.array([1.0, 0.1, 0, 0]), 0.5)
        assert r.s_at_threshold == 1
        assert r.truncation_l1 == pytest.approx(0.1)

    def test_all_zero(self):
        with pytest.raises(ValidationError):
            sparsity_report(np.zeros(4), 0.5)

    def test_truncate(self):
        h = np.array([1.0, -0.1, 0.6, 0])
        assert np.array_equal(truncate(h, 0.5), [1.0, 0, 0.6, 0])
        r = sparsity_report(h, 0.5)
        assert r.truncation_l1 == pytest.approx(np.abs(h - truncate(h, 0.5)).sum())
