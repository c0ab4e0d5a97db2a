"""Sparse recovery by l1 minimization under an l2 residual bound.

Solves::

    minimize    || W h ||_1
    subject to  || pbar - phi h ||_2 <= epsilon

with a two-block alternating-direction scheme: an exact Euclidean projection
onto the residual ball (via a cached SVD of ``phi`` and a scalar secular
equation) alternates with weighted soft-thresholding. The returned estimate is
the projected iterate, so it is always feasible when the problem is.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InsufficientDataError, ValidationError

DEFAULT_SIGMA_FACTOR = 0.1


@dataclass(frozen=True)
class SolverOptions:
    """Decoder settings.

    ``reweight_iters`` counts weighted solves in :func:`solve_reweighted`; the
    first of them uses unit weights. ``reweight_sigma`` defaults to
    ``sigma_factor * max|h|`` of that first solution.
    """

    epsilon: float = 0.0
    max_iters: int = 5000
    abs_tol: float = 1e-10
    rel_tol: float = 1e-7
    penalty: float = 1.0
    reweight_iters: int = 0
    reweight_sigma: float | None = None
    sigma_factor: float = DEFAULT_SIGMA_FACTOR
    reweight_tol: float = 1e-6

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValidationError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be at least 1")
        for name in ("abs_tol", "rel_tol", "penalty", "sigma_factor", "reweight_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.reweight_iters < 0:
            raise ValidationError("reweight_iters must be non-negative")
        if self.reweight_sigma is not None and not self.reweight_sigma > 0:
            raise ValidationError("reweight_sigma must be positive")


@dataclass
class RecoveryResult:
    h_star: np.ndarray
    residual_l2: float
    iterations: int
    converged: bool
    epsilon: float = 0.0
    performance: float | None = None
    reweight_steps: int = 0
    history: list = field(default_factory=list, repr=False)


class _BallProjector:
    """Euclidean projection onto ``{x : ||phi x - b|| <= eps}``."""

    def __init__(self, phi, b, eps):
        U, S, Vt = np.linalg.svd(phi, full_matrices=False)
        keep = S > 1e-12 * S[0] if S.size and S[0] > 0 else np.zeros(S.shape, bool)
        self.S, self.Vt = S[keep], Vt[keep]
        U = U[:, keep]
        self.bu = U.T @ b
        self.b_perp = float(np.linalg.norm(b - U @ self.bu))
        # the part of b outside range(phi) below roundoff counts as zero
        self.feasible = self.b_perp <= eps * (1 + 1e-12) + 1e-12 * float(np.linalg.norm(b))
        # radius available inside the range of phi
        self.radius = float(np.sqrt(max(eps**2 - self.b_perp**2, 0.0)))

    def __call__(self, z):
        if self.S.size == 0:
            return z.copy()
        c = self.Vt @ z
        r = self.S * c - self.bu
        rn = np.linalg.norm(r)
        e = self.radius
        if rn <= e:
            return z.copy()
        if e == 0.0:
            c_new = self.bu / self.S
        else:
            mu = self._multiplier(r, e)
            c_new = (c + mu * self.S * self.bu) / (1.0 + mu * self.S**2)
        return z + self.Vt.T @ (c_new - c)

    def _multiplier(self, r, e):
        # Newton on 1/||r(mu)|| - 1/e, monotone from mu = 0 (Moré-Sorensen style)
        q = self.S**2
        r2 = r**2
        mu = 0.0
        for _ in range(100):
            den = 1.0 + mu * q
            nrm = np.sqrt(np.sum(r2 / den**2))
            if abs(nrm - e) <= 1e-13 * e:
                break
            dphi = np.sum(q * r2 / den**3) / nrm**3
            mu_new = mu - (1.0 / nrm - 1.0 / e) / dphi
            if not np.isfinite(mu_new) or mu_new < 0:
                break
            if mu_new - mu <= 1e-15 * max(mu, 1e-300):
                mu = mu_new
                break
            mu = mu_new
        return mu


def _soft(x, thresh):
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def _check_system(phi, pbar):
    phi = np.asarray(phi, dtype=float)
    pbar = np.asarray(pbar, dtype=float)
    if phi.ndim != 2:
        raise ValidationError(f"phi must be 2-d, got shape {phi.shape}")
    if pbar.ndim != 1 or pbar.shape[0] != phi.shape[0]:
        raise ValidationError(f"pbar of shape {pbar.shape} does not match phi of shape {phi.shape}")
    if phi.shape[0] == 0:
        raise ValidationError("empty system")
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(pbar))):
        raise ValidationError("phi and pbar must be finite")
    return phi, pbar


def _admm(phi, pbar, eps, weights, opts, x0=None):
    """Core iteration. Returns ``(x, iterations, converged, effective_eps)``."""
    D = phi.shape[1]
    proj = _BallProjector(phi, pbar, eps)
    converged_possible = proj.feasible
    if not proj.feasible:
        proj = _BallProjector(phi, pbar, proj.b_perp)
    eff_eps = max(eps, proj.b_perp)
    x_min = proj(np.zeros(D))
    if not np.any(x_min):
        return x_min, 0, converged_possible, eff_eps
    rho = opts.penalty / np.max(np.abs(x_min))
    v = np.zeros(D) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = np.zeros(D)
    sqrt_d = np.sqrt(D)
    x = x_min
    for k in range(1, opts.max_iters + 1):
        x = proj(v - y)
        v_old = v
        v = _soft(x + y, weights / rho)
        y += x - v
        r_norm = np.linalg.norm(x - v)
        s_norm = np.linalg.norm(v - v_old)
        size = max(np.linalg.norm(x), np.linalg.norm(v))
        y_norm = np.linalg.norm(y)
        if (
            r_norm <= opts.abs_tol * sqrt_d + opts.rel_tol * size
            and s_norm <= opts.abs_tol * sqrt_d + opts.rel_tol * max(size, y_norm)
        ):
            return x, k, converged_possible, eff_eps
        if k % 10 == 0:
            r_rel = r_norm / max(size, 1e-300)
            s_rel = s_norm / max(y_norm, 1e-300)
            if r_rel > 10 * s_rel:
                rho *= 2.0
                y /= 2.0
            elif s_rel > 10 * r_rel:
                rho /= 2.0
                y *= 2.0
    return x, opts.max_iters, False, eff_eps


def solve_weighted(phi, pbar, weights, opts=None, x0=None):
    """Weighted l1 decoder; ``weights`` must be positive."""
    opts = SolverOptions() if opts is None else opts
    phi, pbar = _check_system(phi, pbar)
    w = np.asarray(weights, dtype=float)
    if w.shape != (phi.shape[1],) or np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValidationError("weights must be a positive finite vector of length D")
    w = w / w.max()
    if np.linalg.norm(pbar) <= opts.epsilon:
        h = np.zeros(phi.shape[1])
        return RecoveryResult(h, float(np.linalg.norm(pbar)), 0, True, opts.epsilon)
    x, its, ok, eff_eps = _admm(phi, pbar, opts.epsilon, w, opts, x0=x0)
    resid = float(np.linalg.norm(pbar - phi @ x))
    return RecoveryResult(x, resid, its, ok, eff_eps)


def solve_l1(phi, pbar, opts=None):
    """Basis pursuit denoising: minimum l1 norm subject to the residual bound.

    Returns a :class:`RecoveryResult`. If ``epsilon`` is smaller than the
    distance from ``pbar`` to the range of ``phi`` the problem is infeasible;
    the least-squares-feasible minimizer is returned with ``converged=False``.
    """
    phi, pbar = _check_system(phi, pbar)
    return solve_weighted(phi, pbar, np.ones(phi.shape[1]), opts)


def solve_reweighted(phi, pbar, opts):
    """Iteratively reweighted l1: weights ``1 / (|h| + sigma)`` refreshed after each solve."""
    if opts.reweight_iters < 1:
        raise ValidationError("solve_reweighted needs reweight_iters >= 1")
    phi, pbar = _check_system(phi, pbar)
    res = solve_l1(phi, pbar, opts)
    h = res.h_star
    total = res.iterations
    history = [h]
    sigma = opts.reweight_sigma
    if sigma is None:
        sigma = opts.sigma_factor * float(np.max(np.abs(h), initial=0.0))
    steps = 1
    if sigma > 0:
        for _ in range(opts.reweight_iters - 1):
            w = 1.0 / (np.abs(h) + sigma)
            nxt = solve_weighted(phi, pbar, w, opts, x0=h)
            total += nxt.iterations
            steps += 1
            change = np.linalg.norm(nxt.h_star - h)
            h, res = nxt.h_star, nxt
            history.append(h)
            if change <= opts.reweight_tol * max(np.linalg.norm(h), 1e-300):
                break
    return RecoveryResult(h, res.residual_l2, total, res.converged, res.epsilon, reweight_steps=steps, history=history)


def solve(phi, pbar, opts):
    """Dispatch to plain or reweighted decoding depending on ``opts.reweight_iters``."""
    if opts.reweight_iters >= 1:
        return solve_reweighted(phi, pbar, opts)
    return solve_l1(phi, pbar, opts)


def performance(h_star, h_true):
    """``1 - ||H* - H||_F / ||H||_F``, evaluated on Pauli coefficients.

    By orthogonality of the basis the Frobenius norm of an operator is
    ``sqrt(d)`` times the l2 norm of its coefficients, so the ratio is the same.
    """
    h_star = np.asarray(h_star, dtype=float)
    h_true = np.asarray(h_true, dtype=float)
    ref = np.linalg.norm(h_true)
    if ref == 0:
        raise ValidationError("performance is undefined for a zero reference Hamiltonian")
    return float(1.0 - np.linalg.norm(h_star - h_true) / ref)


def plugin_epsilon(phi, pbar, mismatch, noise_norm=0.0, factor=1.1, rounds=2, pilot_fraction=0.05, opts=None):
    """Self-consistent residual bound.

    A pilot estimate is decoded with ``epsilon`` set from the known noise norm
    plus ``pilot_fraction * ||pbar||``; its predicted linearization error
    ``mismatch(h)`` then replaces the pilot term, ``rounds`` times::

        epsilon = factor * sqrt(||mismatch(h)||**2 + noise_norm**2)

    ``mismatch`` maps a coefficient vector to the exact-minus-linear residual in
    the units of ``pbar`` (see :func:`hamsense.sensing.model_mismatch`).
    """
    opts = SolverOptions() if opts is None else opts
    phi, pbar = _check_system(phi, pbar)
    eps = factor * float(np.hypot(noise_norm, pilot_fraction * np.linalg.norm(pbar)))
    for _ in range(rounds):
        h = solve_l1(phi, pbar, replace(opts, epsilon=eps, reweight_iters=0)).h_star
        lin = float(np.linalg.norm(mismatch(h)))
        eps = factor * float(np.hypot(lin, noise_norm))
    return eps


def bound_epsilon(h_spec_norm, time, noise_norm=0.0, factor=1.1):
    """Worst-case residual bound from ``K = 2 ||H||_spec``: ``factor * (noise + (K t)**2 / 2)``.

    Valid for systems scaled by ``1/sqrt(m)``. Usually far looser than
    :func:`plugin_epsilon`.
    """
    kt = 2.0 * h_spec_norm * time
    return factor * (noise_norm + 0.5 * kt**2)


@dataclass(frozen=True)
class CertificationReport:
    increments: np.ndarray
    window: int
    window_mean: float
    threshold: float
    certified: bool


def certify_sparsity(estimates, window=5, threshold=None, rel_threshold=1e-3):
    """Declare the sparsity assumption certified once successive estimates settle.

    Parameters
    ----------
    estimates : sequence of RecoveryResult or array_like
        Estimates for increasing, nested configuration sets.
    window : int
        Number of trailing increments averaged.
    threshold : float, optional
        Absolute threshold; defaults to ``rel_threshold * ||h_last||``.
    """
    hs = [np.asarray(e.h_star if isinstance(e, RecoveryResult) else e, dtype=float) for e in estimates]
    if len(hs) < window + 1:
        raise InsufficientDataError(f"need at least {window + 1} estimates, got {len(hs)}")
    inc = np.array([np.linalg.norm(b - a) for a, b in zip(hs[:-1], hs[1:])])
    if threshold is None:
        threshold = rel_threshold * float(np.linalg.norm(hs[-1]))
    mean = float(np.mean(inc[-window:]))
    certified = mean < threshold or (threshold == 0 and mean == 0)
    return CertificationReport(inc, window, mean, float(threshold), bool(certified))
