import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from hamsense import BasisPursuitDenoising, PauliSensing, ReweightedBasisPursuit
from hamsense.exceptions import ValidationError
from hamsense.experiment import sample_configs
from hamsense.models import planted_sparse
from hamsense.sensing import build_matrix


def planted(seed=1, m=12):
    rng = np.random.default_rng(seed)
    h = planted_sparse(2, 3, seed)
    configs = sample_configs(2, m, 0.05, rng)
    X = build_matrix(configs)
    return configs, X, X @ h, h


def test_params_roundtrip():
    est = ReweightedBasisPursuit(epsilon=0.1, n_reweights=3, sigma=0.5)
    params = est.get_params()
    assert params["n_reweights"] == 3 and params["sigma"] == 0.5
    copy = clone(est)
    assert copy.get_params() == params
    est.set_params(epsilon=0.2)
    assert est.epsilon == 0.2


def test_fit_predict_recovers_planted():
    _, X, y, h = planted()
    est = BasisPursuitDenoising().fit(X, y)
    assert np.allclose(est.coef_, h, atol=1e-5)
    assert est.converged_
    assert est.n_features_in_ == 16
    assert np.allclose(est.predict(X), y, atol=1e-6)
    assert est.score(X, y) == pytest.approx(1.0)


def test_reweighted_fit():
    _, X, y, h = planted()
    est = ReweightedBasisPursuit(n_reweights=4).fit(X, y)
    assert np.allclose(est.coef_, h, atol=1e-5)
    assert 1 <= est.n_reweights_ <= 4


def test_not_fitted():
    with pytest.raises(NotFittedError):
        BasisPursuitDenoising().predict(np.ones((2, 3)))
    with pytest.raises(NotFittedError):
        PauliSensing().transform([])


def test_predict_shape_mismatch():
    _, X, y, _ = planted()
    est = BasisPursuitDenoising().fit(X, y)
    with pytest.raises(ValidationError):
        est.predict(np.ones((2, 3)))


def test_pauli_sensing_transform():
    configs, X, _, _ = planted()
    assert np.array_equal(PauliSensing().fit_transform(configs), X)
    scaled = PauliSensing(scale=True).fit_transform(configs)
    assert np.allclose(scaled, X / np.sqrt(len(configs)))


def test_pauli_sensing_h0_zero_matches_plain():
    configs, X, _, _ = planted()
    rows = PauliSensing(h0=np.zeros(16)).fit_transform(configs)
    assert np.allclose(rows, X, atol=1e-12)


def test_pauli_sensing_rejects_empty():
    with pytest.raises(ValidationError):
        PauliSensing().fit([])


def test_pipeline_composition():
    configs, X, y, h = planted()
    pipe = make_pipeline(PauliSensing(), BasisPursuitDenoising())
    pipe.fit(configs, y)
    assert np.allclose(pipe[-1].coef_, h, atol=1e-5)
