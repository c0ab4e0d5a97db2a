"""Measurement matrix and outcome vector for linearized Hamiltonian sensing.

Row ``k`` of the matrix holds ``t * i <psi_k|[P_a, M_k]|psi_k>`` for every Pauli
string ``P_a``; for a product state and a single-site observable this is a
Kronecker product of per-site 4-vectors, so a row costs ``O(4**n)`` instead of
``O(4**n * d**2)``. Both the matrix and the outcome vector carry ``1/sqrt(m)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import ValidationError
from .experiment import (
    ExperimentConfig,
    LocalObservable,
    NoiseSpec,
    ProductState,
    apply_noise,
    exact_outcomes,
    initial_expectation,
)
from .pauli import basis_size, n_qubits_of_coefficients

SCHEMA_VERSION = 1

_LEVI = np.zeros((4, 4, 4))
for _a, _b, _c in ((1, 2, 3), (2, 3, 1), (3, 1, 2)):
    _LEVI[_a, _b, _c] = 1.0
    _LEVI[_b, _a, _c] = -1.0


def site_factors(config):
    """``(n, 4)`` per-site factors whose Kronecker product is the unscaled row / t."""
    f = config.state.bloch()
    site, b = config.observable.site, config.observable.axis_code
    # i <[P_a, P_b]> = i * 2i eps_abc <P_c> = -2 eps_abc <P_c>
    f[site] = -2.0 * _LEVI[:, b, :] @ f[site]
    return f


def build_row(config, n_qubits=None):
    """Unscaled sensing row: ``t * i<psi|[P_a, M]|psi>`` over all ``4**n`` strings."""
    if n_qubits is not None and n_qubits != config.n_qubits:
        raise ValidationError(f"configuration has {config.n_qubits} qubits, expected {n_qubits}")
    row = np.ones(1)
    for f in site_factors(config):
        row = np.multiply.outer(row, f).reshape(-1)
    return config.time * row


def build_matrix(configs, n_qubits=None):
    """Stack of unscaled rows, shape ``(len(configs), 4**n)``."""
    if not configs:
        raise ValidationError("at least one configuration is required")
    n = configs[0].n_qubits if n_qubits is None else n_qubits
    return np.array([build_row(c, n) for c in configs])


@dataclass
class SensingSystem:
    """Scaled linear system ``pbar ~= phi @ h`` plus provenance."""

    phi: np.ndarray
    pbar: np.ndarray
    time: float
    configs: list
    scaled: bool = True
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seeds: dict = field(default_factory=dict)
    linearized: bool = False

    @property
    def m(self):
        return self.phi.shape[0]

    @property
    def n_qubits(self):
        return n_qubits_of_coefficients(self.phi.shape[1])

    @property
    def scale(self):
        return 1.0 / np.sqrt(self.m) if self.scaled else 1.0

    def subsystem(self, m):
        """The system built from the first ``m`` configurations (rescaled)."""
        if not 1 <= m <= self.m:
            raise ValidationError(f"cannot take {m} rows of a {self.m}-row system")
        factor = np.sqrt(self.m / m) if self.scaled else 1.0
        return replace(
            self, phi=self.phi[:m] * factor, pbar=self.pbar[:m] * factor, configs=self.configs[:m], seeds=dict(self.seeds)
        )


def common_time(configs):
    times = {c.time for c in configs}
    if len(times) != 1:
        raise ValidationError(f"configurations use {len(times)} distinct evolution times; expected one")
    return times.pop()


def assemble(h_true, configs, noise=None, linearized=False, rng=None):
    """Simulate the experiments for ``h_true`` and build the scaled system.

    Parameters
    ----------
    h_true : array_like
        Coefficients of the Hamiltonian generating the data.
    configs : sequence of ExperimentConfig
        Must share one evolution time.
    noise : NoiseSpec, optional
        Applied to the signal ``p - <psi|M|psi>`` or to ``p`` itself, per
        ``noise.target``; the known initial expectation is always subtracted
        exactly.
    linearized : bool
        Generate outcomes from the first-order model instead of exact evolution.
    rng : numpy.random.Generator, optional
        Noise stream; defaults to ``default_rng(noise.seed)``.
    """
    noise = NoiseSpec() if noise is None else noise
    configs = list(configs)
    if not configs:
        raise ValidationError("at least one configuration is required")
    t = common_time(configs)
    h_true = np.asarray(h_true, dtype=float)
    n = configs[0].n_qubits
    if h_true.size != basis_size(n):
        raise ValidationError(f"h has {h_true.size} entries, expected {basis_size(n)}")
    phi = build_matrix(configs, n)
    p0 = np.array([initial_expectation(c) for c in configs])
    if linearized:
        p = p0 + phi @ h_true
    else:
        p = exact_outcomes(h_true, configs)
    if noise.active:
        rng = np.random.default_rng(noise.seed) if rng is None else rng
        if noise.target == "outcome":
            pbar = apply_noise(p, noise, rng) - p0
        else:
            pbar = apply_noise(p - p0, noise, rng)
    else:
        pbar = p - p0
    m = len(configs)
    scale = 1.0 / np.sqrt(m)
    return SensingSystem(phi * scale, np.asarray(pbar) * scale, t, configs, True, noise, linearized=linearized)


@dataclass(frozen=True)
class RankReport:
    rank: int
    redundant_rows: tuple
    singular_values: np.ndarray


def rank_precheck(phi, rtol=1e-10):
    """Numerical row rank and the rows that add nothing to the span of earlier ones."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if phi.size == 0:
        return RankReport(0, (), np.zeros(0))
    sv = np.linalg.svd(phi, compute_uv=False)
    if sv[0] == 0:
        return RankReport(0, tuple(range(phi.shape[0])), sv)
    tol = rtol * sv[0]
    rank = int(np.sum(sv > tol))
    basis = np.zeros((0, phi.shape[1]))
    redundant = []
    for i, r in enumerate(phi):
        resid = r - basis.T @ (basis @ r)
        resid = resid - basis.T @ (basis @ resid)
        nr = np.linalg.norm(resid)
        if nr > tol:
            basis = np.vstack([basis, resid / nr])
        else:
            redundant.append(i)
    return RankReport(rank, tuple(redundant), sv)


def _config_to_json(c):
    f = c.state.factors
    return {
        "site": c.observable.site,
        "axis": c.observable.axis,
        "state": [[float(v.real), float(v.imag), float(w.real), float(w.imag)] for v, w in f],
    }


def _config_from_json(obj, time):
    state = ProductState(np.array([[a + 1j * b, c + 1j * d] for a, b, c, d in obj["state"]]))
    return ExperimentConfig(state, LocalObservable(int(obj["site"]), obj["axis"]), time)


def save_system(system, out_dir, h_true=None):
    """Write ``phi.csv``, ``pbar.csv`` and ``meta.json`` (and ``h_true.csv`` if given)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "phi.csv", system.phi, fmt="%.17e", delimiter=",")
    np.savetxt(out / "pbar.csv", system.pbar, fmt="%.17e")
    meta = {
        "schema_version": SCHEMA_VERSION,
        "n_qubits": system.n_qubits,
        "m": system.m,
        "time": system.time,
        "scaled": system.scaled,
        "linearized": system.linearized,
        "noise": {"kind": system.noise.kind, "level": system.noise.level, "seed": system.noise.seed, "target": system.noise.target},
        "seeds": system.seeds,
        "configs": [_config_to_json(c) for c in system.configs],
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if h_true is not None:
        np.savetxt(out / "h_true.csv", np.asarray(h_true, dtype=float), fmt="%.17e")
    return out


def load_system(in_dir):
    """Inverse of :func:`save_system`. ``meta.json`` is optional."""
    src = Path(in_dir)
    phi = np.atleast_2d(np.loadtxt(src / "phi.csv", delimiter=","))
    pbar = np.atleast_1d(np.loadtxt(src / "pbar.csv"))
    if phi.shape[0] != pbar.shape[0]:
        raise ValidationError(f"phi has {phi.shape[0]} rows but pbar has {pbar.shape[0]} entries")
    meta_path = src / "meta.json"
    if not meta_path.exists():
        return SensingSystem(phi, pbar, float("nan"), [], True)
    meta = json.loads(meta_path.read_text())
    t = float(meta["time"])
    configs = [_config_from_json(c, t) for c in meta.get("configs", [])]
    noise = NoiseSpec(**meta["noise"]) if "noise" in meta else NoiseSpec()
    return SensingSystem(
        phi, pbar, t, configs, bool(meta.get("scaled", True)), noise, meta.get("seeds", {}), bool(meta.get("linearized", False))
    )


def model_mismatch(system, h):
    """Exact-minus-linear prediction ``pbar_exact(h) - phi @ h`` in the system's units.

    This is the linearization error the data would carry if ``h`` were the true
    Hamiltonian; it drives the self-consistent choice of the residual bound.
    """
    h = np.asarray(h, dtype=float)
    p = exact_outcomes(h, system.configs)
    p0 = np.array([initial_expectation(c) for c in system.configs])
    return (p - p0) * system.scale - system.phi @ h
