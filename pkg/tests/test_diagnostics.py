import json

import numpy as np
import pytest

from hamsense.diagnostics import (
    EnsembleSpec,
    analytic_gram_diagonal,
    concentration_scan,
    hoeffding_bound,
    rip_exhaustive,
    rip_probe,
    rip_scan,
)
from hamsense.exceptions import ValidationError


def test_isotropic_full_rank_is_exact_isometry():
    ens = EnsembleSpec("isotropic", n_qubits=2)
    rep = concentration_scan(ens, m=15, trials=100)
    assert rep.f == pytest.approx(1.0) and rep.g == pytest.approx(1.0)
    assert all(p == 0.0 for p in rep.deviation_prob)
    assert all(rep.ratio_bound_ok)


def test_isotropic_gram_is_identity_in_mean():
    ens = EnsembleSpec("isotropic", n_qubits=2)
    rng = np.random.default_rng(0)
    mats = [ens.draw(5, rng) for _ in range(4000)]
    gram = np.mean([p.T @ p for p in mats], axis=0)
    assert np.allclose(gram, np.eye(15), atol=0.1)


def test_deviation_probability_non_increasing_in_delta():
    rep = concentration_scan(EnsembleSpec("local", n_qubits=2, time=0.5), m=10, trials=100)
    assert np.all(np.diff(rep.deviation_prob) <= 0)


def test_deviation_decreases_with_m():
    ens = EnsembleSpec("isotropic", n_qubits=3)
    probs = [concentration_scan(ens, m, trials=200, delta_grid=(0.3,), seed=1).deviation_prob[0] for m in (8, 16, 32)]
    assert probs[0] > probs[1] > probs[2]


def test_normalization_centres_eigenvalues():
    rep = concentration_scan(EnsembleSpec("local", n_qubits=2, time=0.5), m=10, trials=100)
    assert rep.normalization == pytest.approx(2 / (rep.f + rep.g))
    unnorm = concentration_scan(EnsembleSpec("local", n_qubits=2, time=0.5), m=10, trials=100, normalize=False)
    assert unnorm.normalization == 1.0


def test_concentration_validation():
    ens = EnsembleSpec("isotropic", n_qubits=1)
    with pytest.raises(ValidationError):
        concentration_scan(ens, m=2, trials=99)
    with pytest.raises(ValidationError):
        concentration_scan(ens, m=0)
    with pytest.raises(ValidationError):
        concentration_scan(ens, m=2, delta_grid=(0.5, 0.1))
    with pytest.raises(ValidationError):
        EnsembleSpec("gaussian")
    with pytest.raises(ValidationError):
        EnsembleSpec("local", n_qubits=1, columns=(0, 0))
    with pytest.raises(ValidationError):
        ens.draw(4, np.random.default_rng(0))


def test_report_serialization(tmp_path):
    rep = concentration_scan(EnsembleSpec("isotropic", n_qubits=1), m=2, trials=100, delta_grid=(0.1, 0.2))
    rep.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "delta,deviation_prob" and len(lines) == 3
    data = json.loads(rep.to_text())
    assert data["ratio"] == pytest.approx(rep.g / rep.f)


def test_analytic_gram_diagonal_matches_monte_carlo():
    n, t = 2, 0.3
    ens = EnsembleSpec("local", n_qubits=n, time=t, columns=tuple(range(16)))
    phi = ens.draw(20000, np.random.default_rng(3))
    emp = phi.T @ phi
    exact = analytic_gram_diagonal(n, t)
    assert np.allclose(np.diag(emp), exact, atol=0.03 * exact.max())
    off = emp - np.diag(np.diag(emp))
    assert np.abs(off).max() < 0.03 * exact.max()
    assert exact[0] == 0


def test_hoeffding_bound_values():
    assert hoeffding_bound(10, 0.1, 0, 0) == 0.0
    assert hoeffding_bound(1, 0.01, 0, 1) == 1.0
    assert hoeffding_bound(100, 0.5, 0, 1) == pytest.approx(2 * np.exp(-50))
    assert hoeffding_bound(200, 0.2, 0, 2) < hoeffding_bound(100, 0.2, 0, 2)


def test_hoeffding_holds_for_bounded_rows():
    # given h the rows are i.i.d. with mean inside [c f, c g], at most c (g - f) / 2 from one
    ens = EnsembleSpec("local", n_qubits=2, time=0.5)
    rep = concentration_scan(ens, m=40, trials=200, seed=5)
    lo, hi = rep.row_range
    bias = rep.normalization * (rep.g - rep.f) / 2
    for d, p in zip(rep.delta_grid, rep.deviation_prob):
        if d > bias:
            assert p <= hoeffding_bound(40, d - bias, lo, hi) + 0.05


@pytest.mark.parametrize("m", [10, 20, 40])
def test_hoeffding_bound_isotropic_control(m):
    rep = concentration_scan(EnsembleSpec("isotropic", n_qubits=3), m, trials=200, delta_grid=(0.5,), seed=m)
    lo, hi = rep.row_range
    assert rep.deviation_prob[0] <= hoeffding_bound(m, 0.5, lo, hi)


def test_rip_identity_is_zero():
    est = rip_probe(np.eye(10), 3, samples=200)
    assert est.delta_s_estimate == pytest.approx(0.0, abs=1e-12)
    assert rip_exhaustive(np.eye(8), 2, np.array([1.0, 2.0])).delta_s_estimate == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("scale", ["best", "none"])
def test_probe_bounded_by_exhaustive(scale):
    rng = np.random.default_rng(0)
    phi = rng.standard_normal((6, 8)) / np.sqrt(6)
    mags = np.array([0.5, 1.0])
    exact = rip_exhaustive(phi, 2, mags, scale=scale)
    assert exact.samples == 28 * 4
    few = rip_probe(phi, 2, samples=20, magnitudes=mags, scale=scale)
    many = rip_probe(phi, 2, samples=5000, magnitudes=mags, scale=scale)
    assert few.delta_s_estimate <= exact.delta_s_estimate + 1e-12
    assert many.delta_s_estimate == pytest.approx(exact.delta_s_estimate, abs=1e-12)


def test_best_scale_never_exceeds_unscaled():
    rng = np.random.default_rng(1)
    phi = 1.7 * rng.standard_normal((10, 20)) / np.sqrt(10)
    best = rip_probe(phi, 3, samples=300, seed=2, scale="best")
    raw = rip_probe(phi, 3, samples=300, seed=2, scale="none")
    assert best.delta_s_estimate <= raw.delta_s_estimate


def test_doubling_m_lowers_median_delta():
    ens = EnsembleSpec("local", n_qubits=3, time=1.0)
    med = [np.median([r.delta_s_estimate for r in rip_scan(ens, 5, m, repeats=5, samples=500)]) for m in (30, 60)]
    assert med[1] < med[0]


def test_rip_validation():
    with pytest.raises(ValidationError):
        rip_probe(np.eye(4), 3)
    with pytest.raises(ValidationError):
        rip_probe(np.eye(4), 1, scale="other")
    with pytest.raises(ValidationError):
        rip_exhaustive(np.eye(17), 2, np.ones(2))
    with pytest.raises(ValidationError):
        rip_probe(np.eye(4), 2, magnitudes=np.ones(3))
