"""Model Hamiltonians in the Pauli basis and sparsity bookkeeping."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .exceptions import ParameterError, ValidationError
from .pauli import PauliString, basis_size, decompose, to_dense

LATTICE_SITES = 4
DOT_SITES = 4
PHYSICAL_EXCHANGE_RATIO = 0.16


@dataclass(frozen=True)
class LatticeParams:
    """Two-species optical lattice on a four-site open cluster (rates in kHz)."""

    j_up: float
    j_down: float
    u: float
    n_sites: int = LATTICE_SITES

    def __post_init__(self):
        if self.n_sites != LATTICE_SITES:
            raise ParameterError("the lattice model is defined for exactly four sites")
        if self.u == 0:
            raise ParameterError("collisional coupling u must be nonzero")
        if abs(self.j_up / self.u) >= 1 or abs(self.j_down / self.u) >= 1:
            raise ParameterError("tunneling must satisfy |j/u| < 1 (perturbative regime)")

    @classmethod
    def from_ratio(cls, j, u=10.0):
        """Parameters with ``j_up = j`` and ``j_down = j / 2``."""
        return cls(j_up=j, j_down=j / 2, u=u)


@dataclass(frozen=True)
class ExchangeParams:
    """Four quantum dots with two-body ``j`` and four-body ``j_prime`` exchange."""

    j: float
    j_prime: float

    def __post_init__(self):
        if self.j == 0:
            raise ParameterError("two-body exchange j must be nonzero")
        if abs(self.j_prime / self.j) > PHYSICAL_EXCHANGE_RATIO:
            warnings.warn(
                f"|j_prime/j| = {abs(self.j_prime / self.j):.3g} exceeds the physical range "
                f"{PHYSICAL_EXCHANGE_RATIO}",
                stacklevel=2,
            )


def lattice_coefficients(p):
    """The four coupling amplitudes of the effective lattice Hamiltonian.

    Returns
    -------
    dict
        ``zz`` and ``xx_yy`` nearest-neighbour amplitudes, ``zzz`` and
        ``xzx_yzy`` amplitudes of the consecutive-triple terms.
    """
    ju, jd, u = p.j_up, p.j_down, p.u
    return {
        "zz": 0.03 * (ju**2 + jd**2) / u - 0.27 * (ju**3 + jd**3) / u**2,
        "xx_yy": -(2.1 * (ju + jd) * ju * jd / u**2 + ju * jd / u),
        "zzz": 0.14 * (ju**3 - jd**3) / u**2,
        "xzx_yzy": -0.6 * ju * jd * (ju - jd) / u**2,
    }


def _place(n, start, labels):
    chars = ["I"] * n
    chars[start : start + len(labels)] = labels
    return PauliString("".join(chars))


def optical_lattice_hamiltonian(p):
    """Coefficient vector (length 256) of the four-site lattice model, open chain."""
    c = lattice_coefficients(p)
    n = p.n_sites
    h = np.zeros(basis_size(n))
    for j in range(n - 1):
        h[_place(n, j, "ZZ").index] += c["zz"]
        h[_place(n, j, "XX").index] += c["xx_yy"]
        h[_place(n, j, "YY").index] += c["xx_yy"]
    for j in range(n - 2):
        h[_place(n, j, "ZZZ").index] += c["zzz"]
        h[_place(n, j, "XZX").index] += c["xzx_yzy"]
        h[_place(n, j, "YZY").index] += c["xzx_yzy"]
    return h


def _spin_dot(n, i, j):
    """Dense ``sigma_i . sigma_j``."""
    out = 0
    for a in "XYZ":
        chars = ["I"] * n
        chars[i] = chars[j] = a
        out = out + to_dense(PauliString("".join(chars)))
    return out


def exchange_hamiltonian(p):
    """Coefficient vector of the isotropic four-dot exchange Hamiltonian.

    The two-body part is ``j`` times the sum of ``sigma_i . sigma_j`` over all six
    pairs; the four-body part is ``j_prime`` times the three pairings
    ``(AB)(CD) + (AC)(BD) + (AD)(BC)`` of dot products, expanded through
    :func:`~hamsense.pauli.decompose`.
    """
    n = DOT_SITES
    h = np.zeros(basis_size(n))
    for i, j in combinations(range(n), 2):
        for a in "XYZ":
            chars = ["I"] * n
            chars[i] = chars[j] = a
            h[PauliString("".join(chars)).index] += p.j
    if p.j_prime != 0:
        dots = {pair: _spin_dot(n, *pair) for pair in combinations(range(n), 2)}
        four = (
            dots[0, 1] @ dots[2, 3]
            + dots[0, 2] @ dots[1, 3]
            + dots[0, 3] @ dots[1, 2]
        )
        h += p.j_prime * decompose(four)
    return h


def planted_sparse(n_qubits, s, seed, magnitude_range=(0.5, 1.0)):
    """Random exactly ``s``-sparse coefficient vector, identity string excluded.

    Support is uniform over the ``4**n - 1`` non-identity strings; magnitudes are
    uniform in ``magnitude_range`` with random signs. Deterministic per ``seed``.
    """
    size = basis_size(n_qubits)
    if not 1 <= s <= size - 1:
        raise ParameterError(f"support size must be in [1, {size - 1}], got {s}")
    lo, hi = magnitude_range
    if not 0 < lo <= hi:
        raise ParameterError(f"invalid magnitude range {magnitude_range}")
    rng = np.random.default_rng(seed)
    support = 1 + rng.choice(size - 1, size=s, replace=False)
    h = np.zeros(size)
    h[support] = rng.uniform(lo, hi, size=s) * rng.choice([-1.0, 1.0], size=s)
    return h


@dataclass(frozen=True)
class SparsityReport:
    s_at_threshold: int
    eta: float
    h_max: float
    support: tuple
    truncation_l1: float


def sparsity_report(h, eta):
    """Count coefficients above ``eta * max|h|`` and the l1 mass of the rest."""
    h = np.asarray(h, dtype=float)
    if not 0 < eta < 1:
        raise ParameterError(f"eta must lie in (0, 1), got {eta}")
    h_max = float(np.max(np.abs(h), initial=0.0))
    if h_max == 0:
        raise ValidationError("h_max is undefined for an all-zero coefficient vector")
    keep = np.abs(h) > eta * h_max
    return SparsityReport(
        s_at_threshold=int(keep.sum()),
        eta=eta,
        h_max=h_max,
        support=tuple(int(i) for i in np.flatnonzero(keep)),
        truncation_l1=float(np.sum(np.abs(h[~keep]))),
    )


def truncate(h, eta):
    """The thresholded approximation: entries with ``|h| <= eta * h_max`` set to zero."""
    h = np.asarray(h, dtype=float)
    rep = sparsity_report(h, eta)
    out = np.zeros_like(h)
    idx = list(rep.support)
    out[idx] = h[idx]
    return out
