"""scikit-learn style wrappers around the sensing map and the decoders."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ValidationError
from .extensions import fine_rows
from .sensing import build_matrix
from .solver import SolverOptions, solve_l1, solve_reweighted


class BasisPursuitDenoising(RegressorMixin, BaseEstimator):
    """Minimum-l1 coefficients subject to ``||y - X coef||_2 <= epsilon``.

    Parameters
    ----------
    epsilon : float
        Residual bound, in the units of ``y``.
    max_iter : int
    tol : float
        Relative stopping tolerance of the splitting iteration.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    n_iter_ : int
    residual_norm_ : float
    converged_ : bool
    """

    def __init__(self, epsilon=0.0, max_iter=5000, tol=1e-7):
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.tol = tol

    def _options(self):
        return SolverOptions(epsilon=self.epsilon, max_iters=self.max_iter, rel_tol=self.tol)

    def _solve(self, X, y, opts):
        return solve_l1(X, y, opts)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        res = self._solve(X, y, self._options())
        self.coef_ = res.h_star
        self.n_iter_ = res.iterations
        self.residual_norm_ = res.residual_l2
        self.converged_ = res.converged
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_


class ReweightedBasisPursuit(BasisPursuitDenoising):
    """Iteratively reweighted variant; ``sigma=None`` uses ``sigma_factor * max|coef|``
    of the unweighted solution."""

    def __init__(self, epsilon=0.0, n_reweights=50, sigma=None, sigma_factor=0.1, max_iter=5000, tol=1e-7):
        super().__init__(epsilon=epsilon, max_iter=max_iter, tol=tol)
        self.n_reweights = n_reweights
        self.sigma = sigma
        self.sigma_factor = sigma_factor

    def _options(self):
        return SolverOptions(
            epsilon=self.epsilon,
            max_iters=self.max_iter,
            rel_tol=self.tol,
            reweight_iters=self.n_reweights,
            reweight_sigma=self.sigma,
            sigma_factor=self.sigma_factor,
        )

    def _solve(self, X, y, opts):
        res = solve_reweighted(X, y, opts)
        self.n_reweights_ = res.reweight_steps
        return res


class PauliSensing(TransformerMixin, BaseEstimator):
    """Map a list of experiment configurations to sensing rows.

    ``transform`` returns the unscaled rows ``t * i<psi|[P_a, M]|psi>``; with
    ``scale=True`` they are divided by ``sqrt(len(configs))``. When ``h0`` is
    given the rows linearize around that known Hamiltonian instead of zero.
    """

    def __init__(self, scale=False, h0=None):
        self.scale = scale
        self.h0 = h0

    def fit(self, configs, y=None):
        configs = list(configs)
        if not configs:
            raise ValidationError("at least one configuration is required")
        self.n_qubits_ = configs[0].n_qubits
        self.n_features_out_ = 4**self.n_qubits_
        return self

    def transform(self, configs):
        check_is_fitted(self, "n_qubits_")
        configs = list(configs)
        if not configs:
            raise ValidationError("at least one configuration is required")
        if self.h0 is None:
            phi = build_matrix(configs, self.n_qubits_)
        else:
            phi = fine_rows(np.asarray(self.h0, dtype=float), configs)
        if self.scale:
            phi = phi / np.sqrt(len(configs))
        return phi
