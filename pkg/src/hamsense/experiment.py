"""Random local experiments and their exact (or noisy) outcomes.

An experimental configuration prepares a random product state, evolves it for a
time ``t`` under the unknown Hamiltonian and measures one single-qubit Pauli
observable. Expectation values are exact (infinite-shot).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, ValidationError
from .pauli import PAULI_MATRICES, PauliString, n_qubits_of_coefficients, reconstruct, spec_norm

AXES = "XYZ"
DEFAULT_THETA = 0.1
NOISE_KINDS = ("none", "relative_uniform", "additive_gaussian")
NOISE_TARGETS = ("signal", "outcome")

_KET = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "r": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "l": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


@dataclass(frozen=True, eq=False)
class ProductState:
    """Tensor product of ``n`` single-qubit pure states, stored as an ``(n, 2)`` array."""

    factors: np.ndarray

    def __post_init__(self):
        f = np.array(self.factors, dtype=complex)
        if f.ndim != 2 or f.shape[1] != 2 or f.shape[0] < 1:
            raise ValidationError(f"factors must have shape (n, 2), got {f.shape}")
        norms = np.linalg.norm(f, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValidationError("every single-qubit factor must be unit-norm")
        f.setflags(write=False)
        object.__setattr__(self, "factors", f)

    @classmethod
    def from_labels(cls, labels):
        """Build from a string over ``0 1 + - r l``, e.g. ``"0+"``."""
        try:
            return cls(np.array([_KET[c] for c in labels]))
        except KeyError as exc:
            raise ValidationError(f"unknown single-qubit state label {exc}") from None

    @property
    def n_qubits(self):
        return self.factors.shape[0]

    def to_vector(self):
        vec = np.ones(1, dtype=complex)
        for f in self.factors:
            vec = np.kron(vec, f)
        return vec

    def bloch(self):
        """``(n, 4)`` array of ``<P_a>`` per site for ``a`` in ``I, X, Y, Z``."""
        f = self.factors
        return np.einsum("ni,aij,nj->na", f.conj(), PAULI_MATRICES, f).real

    def __eq__(self, other):
        return isinstance(other, ProductState) and np.array_equal(self.factors, other.factors)

    def __hash__(self):
        return hash(self.factors.tobytes())


@dataclass(frozen=True)
class LocalObservable:
    """Single-qubit Pauli ``axis`` on ``site`` (0-based), identity elsewhere."""

    site: int
    axis: str

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValidationError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.site < 0:
            raise ValidationError(f"site must be non-negative, got {self.site}")

    @property
    def axis_code(self):
        return AXES.index(self.axis) + 1

    def pauli(self, n_qubits):
        if self.site >= n_qubits:
            raise ValidationError(f"site {self.site} out of range for {n_qubits} qubits")
        return PauliString.single(n_qubits, self.site, self.axis)


@dataclass(frozen=True)
class ExperimentConfig:
    state: ProductState
    observable: LocalObservable
    time: float

    def __post_init__(self):
        if not self.time > 0:
            raise ValidationError(f"evolution time must be positive, got {self.time}")
        if self.observable.site >= self.state.n_qubits:
            raise ValidationError("observable site outside the prepared register")

    @property
    def n_qubits(self):
        return self.state.n_qubits


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement noise model.

    ``relative_uniform`` multiplies by ``1 + level * u`` with ``u ~ U[-1, 1]``;
    ``additive_gaussian`` adds ``level * g`` with ``g ~ N(0, 1)``. ``target``
    selects whether the raw outcome ``p`` or the deviation from the known
    initial expectation (the signal) is corrupted.
    """

    kind: str = "none"
    level: float = 0.0
    seed: int | None = None
    target: str = "signal"

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.target not in NOISE_TARGETS:
            raise ConfigError(f"unknown noise target {self.target!r}; expected one of {NOISE_TARGETS}")
        if not self.level >= 0:
            raise ConfigError(f"noise level must be non-negative, got {self.level}")

    @property
    def active(self):
        return self.kind != "none" and self.level > 0


def sample_product_state(n_qubits, rng):
    """Haar-random product state: each factor is a normalized complex Gaussian pair."""
    if n_qubits < 1:
        raise ValidationError("need at least one qubit")
    z = rng.standard_normal((n_qubits, 2)) + 1j * rng.standard_normal((n_qubits, 2))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    # renormalize once more so the factor norms sit within 1e-12 of one
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return ProductState(z)


def sample_observable(n_qubits, rng):
    """Uniform draw over the ``3 n`` single-qubit Pauli observables."""
    if n_qubits < 1:
        raise ValidationError("need at least one qubit")
    k = int(rng.integers(3 * n_qubits))
    return LocalObservable(site=k // 3, axis=AXES[k % 3])


def sample_configs(n_qubits, m, time, rng):
    """``m`` independent configurations sharing the evolution time."""
    configs = []
    for _ in range(m):
        state = sample_product_state(n_qubits, rng)
        configs.append(ExperimentConfig(state, sample_observable(n_qubits, rng), time))
    return configs


def apply_local(vec, n_qubits, site, matrix):
    """Apply a 2x2 ``matrix`` on ``site`` of an ``n``-qubit state vector."""
    t = vec.reshape((2,) * n_qubits)
    t = np.moveaxis(np.tensordot(matrix, t, axes=([1], [site])), 0, site)
    return t.reshape(-1)


def initial_expectation(config):
    """``<psi|M|psi>`` of the unevolved state: product of one Bloch component."""
    b = config.state.bloch()
    return float(b[config.observable.site, config.observable.axis_code])


class Evolution:
    """Cached eigendecomposition of a Hamiltonian for repeated propagation."""

    def __init__(self, h):
        h = np.asarray(h, dtype=float)
        self.n_qubits = n_qubits_of_coefficients(h.size)
        H = reconstruct(h)
        self.energies, self.eigvecs = np.linalg.eigh(H)

    def unitary(self, t):
        """``exp(-i t H)``."""
        V = self.eigvecs
        return (V * np.exp(-1j * t * self.energies)) @ V.conj().T

    def outcomes(self, configs):
        out = np.empty(len(configs))
        cache = {}
        for k, c in enumerate(configs):
            if c.n_qubits != self.n_qubits:
                raise ValidationError("configuration and Hamiltonian sizes differ")
            U = cache.get(c.time)
            if U is None:
                U = cache[c.time] = self.unitary(c.time)
            psi_t = U @ c.state.to_vector()
            mpsi = apply_local(psi_t, self.n_qubits, c.observable.site, PAULI_MATRICES[c.observable.axis_code])
            out[k] = np.vdot(psi_t, mpsi).real
        return out


def exact_outcomes(h, configs):
    """Exact ``<psi| e^{itH} M e^{-itH} |psi>`` for every configuration."""
    return Evolution(h).outcomes(configs)


def exact_outcome(h, config):
    return float(exact_outcomes(h, [config])[0])


def short_time_bound(h):
    """``1 / (2 ||H||_spec)``, the time scale below which outcomes are affine in ``h``."""
    h = np.asarray(h, dtype=float)
    norm = spec_norm(reconstruct(h))
    if norm == 0:
        raise ValidationError("the short-time bound is undefined for a zero Hamiltonian")
    return 1.0 / (2.0 * norm)


def evolution_time(h, theta=DEFAULT_THETA):
    """Default probe time: ``theta`` times the short-time bound."""
    if not theta > 0:
        raise ValidationError(f"time factor must be positive, got {theta}")
    return theta * short_time_bound(h)


def apply_noise(p, spec, rng):
    """Corrupt a scalar or array of outcomes according to ``spec``."""
    if spec.kind not in NOISE_KINDS:
        raise ConfigError(f"unknown noise kind {spec.kind!r}")
    p = np.asarray(p, dtype=float)
    if spec.kind == "none" or spec.level == 0:
        out = p.copy()
    elif spec.kind == "relative_uniform":
        out = p * (1.0 + spec.level * rng.uniform(-1.0, 1.0, size=p.shape))
    else:
        out = p + spec.level * rng.standard_normal(size=p.shape)
    return float(out) if out.ndim == 0 else out


def expected_noise_norm(values, spec):
    """Expected l2 norm of the noise added to ``values`` (same units as ``values``)."""
    values = np.asarray(values, dtype=float)
    if not spec.active:
        return 0.0
    if spec.kind == "relative_uniform":
        return spec.level * float(np.linalg.norm(values)) / np.sqrt(3.0)
    return spec.level * np.sqrt(values.size)

