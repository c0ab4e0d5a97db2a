"""Pauli-string basis, dense operators and the norms used throughout.

Coefficient vectors are indexed lexicographically over per-site labels with
``I < X < Y < Z`` and site 0 most significant, so for two qubits the order is
``II, IX, IY, IZ, XI, ...``.  A Hermitian operator on ``n`` qubits expands as
``H = sum_a h[a] * P_a`` with real ``h`` and ``Tr(P_a P_b) = 2**n * delta_ab``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .exceptions import CapacityError, ValidationError

LABELS = "IXYZ"
MAX_QUBITS = 6

PAULI_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# Q[a, 2*i + j] = P_a[j, i]  so that  Tr(P_a A) = sum_ij Q[a, ij] A[i, j]
_TRACE_KERNEL = np.transpose(PAULI_MATRICES, (0, 2, 1)).reshape(4, 4)
# R[2*i + j, a] = P_a[i, j]
_EXPAND_KERNEL = PAULI_MATRICES.reshape(4, 4).T


def _check_qubits(n, max_qubits=MAX_QUBITS):
    if n < 1:
        raise ValidationError(f"need at least one qubit, got {n}")
    if n > max_qubits:
        raise CapacityError(f"{n} qubits exceeds the dense limit of {max_qubits}")


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-site Pauli operators, e.g. ``PauliString("XZI")``."""

    sites: str

    def __post_init__(self):
        sites = str(self.sites).upper()
        if not sites:
            raise ValidationError("a Pauli string needs at least one site")
        bad = set(sites) - set(LABELS)
        if bad:
            raise ValidationError(f"unknown Pauli labels {sorted(bad)} in {self.sites!r}")
        object.__setattr__(self, "sites", sites)

    @property
    def n_qubits(self):
        return len(self.sites)

    @property
    def codes(self):
        return tuple(LABELS.index(c) for c in self.sites)

    @property
    def index(self):
        """Position of this string in the canonical coefficient order."""
        idx = 0
        for c in self.codes:
            idx = 4 * idx + c
        return idx

    @property
    def weight(self):
        """Number of sites carrying a non-identity factor."""
        return sum(c != "I" for c in self.sites)

    @classmethod
    def from_index(cls, index, n_qubits):
        if not 0 <= index < 4**n_qubits:
            raise ValidationError(f"index {index} out of range for {n_qubits} qubits")
        codes = []
        for _ in range(n_qubits):
            index, c = divmod(index, 4)
            codes.append(LABELS[c])
        return cls("".join(reversed(codes)))

    @classmethod
    def single(cls, n_qubits, site, label):
        """The string acting as ``label`` on ``site`` and identity elsewhere."""
        if not 0 <= site < n_qubits:
            raise ValidationError(f"site {site} out of range for {n_qubits} qubits")
        chars = ["I"] * n_qubits
        chars[site] = label
        return cls("".join(chars))

    def __str__(self):
        return self.sites


def basis_size(n_qubits):
    return 4**n_qubits


def pauli_basis(n_qubits):
    """All ``4**n`` Pauli strings in canonical order."""
    _check_qubits(n_qubits)
    return [PauliString("".join(p)) for p in product(LABELS, repeat=n_qubits)]


def pauli_weights(n_qubits):
    """Integer array holding the weight of every basis string, in canonical order."""
    w = np.zeros(1, dtype=int)
    for _ in range(n_qubits):
        w = (w[:, None] + np.array([0, 1, 1, 1])[None, :]).ravel()
    return w


def to_dense(p, max_qubits=MAX_QUBITS):
    """Dense ``2**n x 2**n`` matrix of a Pauli string (Kronecker product in site order)."""
    if not isinstance(p, PauliString):
        p = PauliString(p)
    _check_qubits(p.n_qubits, max_qubits)
    out = np.ones((1, 1), dtype=complex)
    for c in p.codes:
        out = np.kron(out, PAULI_MATRICES[c])
    return out


def n_qubits_of_dim(dim):
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return n


def n_qubits_of_coefficients(size):
    n = n_qubits_of_dim(int(round(np.sqrt(size)))) if size > 0 else -1
    if n < 0 or 4**n != size:
        raise ValidationError(f"coefficient vector of length {size} is not 4**n")
    return n


def is_hermitian(a, atol=1e-12):
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.max(np.abs(a - a.conj().T), initial=0.0) < atol


def pauli_traces(a):
    """Complex ``Tr(P_k a)`` for every basis string; ``a`` need not be Hermitian."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    n = n_qubits_of_dim(a.shape[0])
    _check_qubits(n)
    t = a.reshape((2,) * (2 * n))
    order = [ax for k in range(n) for ax in (k, n + k)]
    t = t.transpose(order).reshape((4,) * n)
    for k in range(n):
        t = np.moveaxis(np.tensordot(_TRACE_KERNEL, t, axes=([1], [k])), 0, k)
    return t.reshape(-1)


def decompose(a, atol=1e-9):
    """Real Pauli coefficients ``h[k] = Tr(P_k a) / d`` of a Hermitian matrix.

    Raises
    ------
    ValidationError
        If ``a`` is not square with power-of-two size, or if any coefficient
        has an imaginary part above ``atol`` (``a`` is not Hermitian).
    """
    coef = pauli_traces(a) / np.asarray(a).shape[0]
    if np.max(np.abs(coef.imag), initial=0.0) > atol:
        raise ValidationError("operator is not Hermitian: imaginary Pauli coefficient above tolerance")
    return coef.real.copy()


def reconstruct(values):
    """Dense operator ``sum_k values[k] P_k``; inverse of :func:`decompose`."""
    values = np.asarray(values)
    if values.ndim != 1:
        raise ValidationError("coefficients must be a 1-d vector")
    n = n_qubits_of_coefficients(values.size)
    _check_qubits(n)
    t = values.astype(complex).reshape((4,) * n)
    for k in range(n):
        t = np.moveaxis(np.tensordot(_EXPAND_KERNEL, t, axes=([1], [k])), 0, k)
    t = t.reshape((2,) * (2 * n))
    order = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)]
    d = 2**n
    return t.transpose(order).reshape(d, d)


def _state_vector(psi):
    if hasattr(psi, "to_vector"):
        return psi.to_vector()
    return np.asarray(psi, dtype=complex)


def commutator_expectation(g, m, psi):
    """Real number ``i <psi|[g, m]|psi>`` for two Pauli strings (dense evaluation).

    ``psi`` may be a :class:`~hamsense.experiment.ProductState` or a state vector.
    """
    g = g if isinstance(g, PauliString) else PauliString(g)
    m = m if isinstance(m, PauliString) else PauliString(m)
    if g.n_qubits != m.n_qubits:
        raise ValidationError(f"qubit counts differ: {g.n_qubits} vs {m.n_qubits}")
    vec = _state_vector(psi)
    if vec.shape != (2**g.n_qubits,):
        raise ValidationError(f"state of shape {vec.shape} does not match {g.n_qubits} qubits")
    G, M = to_dense(g), to_dense(m)
    val = 1j * np.vdot(vec, (G @ M - M @ G) @ vec)
    if abs(val.imag) > 1e-12:
        raise ValidationError(f"commutator expectation has imaginary residue {val.imag:.3e}")
    return float(val.real)


def spec_norm(a):
    """Largest singular value."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def fro_norm(a):
    return float(np.sqrt(np.sum(np.abs(np.asarray(a)) ** 2)))


def l1(v):
    return float(np.sum(np.abs(np.asarray(v))))


def l2(v):
    return float(np.sqrt(np.sum(np.abs(np.asarray(v)) ** 2)))
