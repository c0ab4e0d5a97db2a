"""Monte Carlo checks of the compressed-sensing prerequisites.

Covers concentration of ``||Phi h||**2`` around ``||h||**2``, the extreme
eigenvalues ``f`` and ``g`` of ``E(Phi^T Phi)``, and lower bounds on the
restricted isometry constant ``delta_s``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from itertools import combinations, product
from pathlib import Path

import numpy as np
from scipy.stats import ortho_group

from .exceptions import ValidationError
from .experiment import sample_configs
from .pauli import basis_size, pauli_weights
from .sensing import build_matrix

ENSEMBLES = ("local", "isotropic")
DEFAULT_DELTAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class EnsembleSpec:
    """Distribution of sensing matrices restricted to a set of columns.

    ``local`` draws product-state/local-Pauli rows at ``time`` (scaled by
    ``1/sqrt(m)``); ``isotropic`` draws the first ``m`` rows of a Haar
    orthogonal matrix scaled by ``sqrt(D/m)``, so ``E(Phi^T Phi) = I``.
    ``columns=None`` keeps every non-identity Pauli string.
    """

    kind: str = "local"
    n_qubits: int = 4
    time: float = 1.0
    columns: tuple | None = None

    def __post_init__(self):
        if self.kind not in ENSEMBLES:
            raise ValidationError(f"unknown ensemble {self.kind!r}; expected one of {ENSEMBLES}")
        if self.n_qubits < 1 or not self.time > 0:
            raise ValidationError("ensemble needs n_qubits >= 1 and a positive time")
        if self.columns is not None:
            cols = tuple(int(c) for c in self.columns)
            if not cols or min(cols) < 0 or max(cols) >= basis_size(self.n_qubits) or len(set(cols)) != len(cols):
                raise ValidationError("columns must be distinct valid basis indices")
            object.__setattr__(self, "columns", cols)

    @property
    def column_index(self):
        if self.columns is None:
            return np.arange(1, basis_size(self.n_qubits))
        return np.array(self.columns)

    @property
    def n_columns(self):
        return len(self.column_index)

    def draw(self, m, rng):
        """One ``m x n_columns`` matrix."""
        if m < 1:
            raise ValidationError("m must be at least 1")
        if self.kind == "local":
            configs = sample_configs(self.n_qubits, m, self.time, rng)
            return build_matrix(configs)[:, self.column_index] / np.sqrt(m)
        D = self.n_columns
        if m > D:
            raise ValidationError(f"isotropic ensemble needs m <= {D}")
        Q = ortho_group.rvs(D, random_state=rng) if D > 1 else np.ones((1, 1))
        return Q[:m] * np.sqrt(D / m)


def analytic_gram_diagonal(n_qubits, time):
    """Exact ``E(Phi^T Phi)`` diagonal for the local ensemble, all ``4**n`` strings.

    A string of weight ``w`` contributes ``(w / n) (2/3) 4 t**2 / 3**w``; the
    matrix is diagonal and the identity entry is zero.
    """
    w = pauli_weights(n_qubits).astype(float)
    return (w / n_qubits) * (2.0 / 3.0) * 4.0 * time**2 / 3.0**w


def hoeffding_bound(m, delta, w_low, w_high):
    """``min(1, 2 exp(-2 m delta**2 / (w_high - w_low)**2))``."""
    span = float(w_high - w_low)
    if span <= 0:
        return 0.0
    return float(min(1.0, 2.0 * np.exp(-2.0 * m * delta**2 / span**2)))


@dataclass(frozen=True)
class ConcentrationReport:
    delta_grid: tuple
    deviation_prob: tuple
    m: int
    trials: int
    f: float
    g: float
    normalization: float
    ratio_bound_ok: tuple
    row_range: tuple

    @property
    def ratio(self):
        return self.g / self.f if self.f > 0 else float("inf")

    def to_csv(self, path):
        lines = ["delta,deviation_prob"] + [f"{d!r},{p!r}" for d, p in zip(self.delta_grid, self.deviation_prob)]
        Path(path).write_text("\n".join(lines) + "\n")

    def to_text(self):
        out = asdict(self)
        out["ratio"] = self.ratio
        return json.dumps(out, indent=2, sort_keys=True) + "\n"


def _gaussian(rng, size):
    return rng.standard_normal(size)


def concentration_scan(ensemble, m, trials=100, delta_grid=DEFAULT_DELTAS, seed=0, h_sampler=None, normalize=True):
    """Empirical ``P(| c ||Phi h||**2 / ||h||**2 - 1 | >= delta)`` per ``delta``.

    Each trial draws a fresh matrix and a fresh test vector from its own
    random stream. ``E(Phi^T Phi)`` is averaged over the trials; its extreme
    eigenvalues are ``f`` and ``g``. With ``normalize`` the matrices are rescaled
    by ``c = 2 / (f + g)``, the factor that centres the eigenvalue range on one.
    """
    if m < 1:
        raise ValidationError("m must be at least 1")
    if trials < 100:
        raise ValidationError("at least 100 trials are required")
    deltas = tuple(float(d) for d in delta_grid)
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise ValidationError("delta_grid must be strictly increasing")
    sampler = _gaussian if h_sampler is None else h_sampler
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]
    D = ensemble.n_columns
    gram = np.zeros((D, D))
    sq = np.empty((trials, m))
    for k, rng in enumerate(streams):
        phi = ensemble.draw(m, rng)
        h = np.asarray(sampler(rng, D), dtype=float)
        gram += phi.T @ phi
        sq[k] = (phi @ h) ** 2 / (h @ h)
    gram /= trials
    ev = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    f, g = float(max(ev[0], 0.0)), float(ev[-1])
    c = 2.0 / (f + g) if normalize else 1.0
    ratios = c * sq.sum(axis=1)
    dev = np.abs(ratios - 1.0)
    probs = tuple(float(np.mean(dev >= d)) for d in deltas)
    rows = c * m * sq
    ok = tuple(bool(f > 0 and g / f < (1 + d) / (1 - d)) if d < 1 else True for d in deltas)
    return ConcentrationReport(deltas, probs, m, trials, f, g, c, ok, (float(rows.min()), float(rows.max())))


@dataclass(frozen=True)
class RipEstimate:
    s: int
    delta_s_estimate: float
    samples: int
    ratio_min: float
    ratio_max: float
    scale: str


def _delta_from_ratios(rmin, rmax, scale):
    if scale == "best":
        return (rmax - rmin) / (rmax + rmin) if rmax + rmin > 0 else 0.0
    return max(abs(rmin - 1.0), abs(rmax - 1.0))


def _check_scale(scale):
    if scale not in ("best", "none"):
        raise ValidationError(f"scale must be 'best' or 'none', got {scale!r}")


def rip_probe(phi, s, samples=2000, seed=0, magnitudes=None, scale="best"):
    """Monte Carlo lower bound on ``delta_s`` of a fixed matrix.

    Random ``s``-sparse vectors (uniform support, random signs, Gaussian or
    fixed ``magnitudes`` placed in increasing index order) probe
    ``R = ||Phi x||**2 / ||x||**2``. With ``scale="none"`` the estimate is
    ``max |R - 1|``; with ``scale="best"`` it is ``(R_max - R_min) / (R_max + R_min)``,
    the smallest constant any rescaling ``c Phi`` could have.
    """
    _check_scale(scale)
    phi = np.asarray(phi, dtype=float)
    D = phi.shape[1]
    if not 1 <= s <= D // 2:
        raise ValidationError(f"s must be in [1, {D // 2}], got {s}")
    if magnitudes is not None:
        magnitudes = np.asarray(magnitudes, dtype=float)
        if magnitudes.shape != (s,):
            raise ValidationError(f"magnitudes must have length {s}")
    rng = np.random.default_rng(seed)
    rmin, rmax = np.inf, -np.inf
    for _ in range(samples):
        support = np.sort(rng.choice(D, size=s, replace=False))
        signs = rng.choice([-1.0, 1.0], size=s)
        vals = rng.standard_normal(s) if magnitudes is None else magnitudes * signs
        y = phi[:, support] @ vals
        r = (y @ y) / (vals @ vals)
        rmin, rmax = min(rmin, r), max(rmax, r)
    return RipEstimate(s, float(_delta_from_ratios(rmin, rmax, scale)), samples, float(rmin), float(rmax), scale)


def rip_exhaustive(phi, s, magnitudes, scale="best"):
    """Exact maximum of the probe statistic over every support and sign pattern.

    Only for ``D <= 16``; ``magnitudes`` are placed in increasing index order,
    matching :func:`rip_probe` with the same ``magnitudes``.
    """
    _check_scale(scale)
    phi = np.asarray(phi, dtype=float)
    D = phi.shape[1]
    if D > 16:
        raise ValidationError("exhaustive mode is limited to D <= 16")
    magnitudes = np.asarray(magnitudes, dtype=float)
    if magnitudes.shape != (s,):
        raise ValidationError(f"magnitudes must have length {s}")
    rmin, rmax = np.inf, -np.inf
    count = 0
    for support in combinations(range(D), s):
        sub = phi[:, list(support)]
        for signs in product((-1.0, 1.0), repeat=s):
            vals = magnitudes * np.array(signs)
            y = sub @ vals
            r = (y @ y) / (vals @ vals)
            rmin, rmax = min(rmin, r), max(rmax, r)
            count += 1
    return RipEstimate(s, float(_delta_from_ratios(rmin, rmax, scale)), count, float(rmin), float(rmax), scale)


def rip_scan(ensemble, s, m, repeats=20, samples=2000, seed=0, scale="best"):
    """Probe ``repeats`` independent draws of the ensemble; returns the list of estimates."""
    out = []
    for ss in np.random.SeedSequence(seed).spawn(repeats):
        r1, r2 = ss.spawn(2)
        phi = ensemble.draw(m, np.random.default_rng(r1))
        out.append(rip_probe(phi, s, samples, seed=r2, scale=scale))
    return out
