"""Linear sensing around a known Hamiltonian, for closed and open systems.

Both variants rest on the first-order expansion of the propagator around a
known generator ``H0``: a perturbation ``G`` shifts a measured expectation by
``i tr(T_G [M0, rho])`` with ``M0 = e^{itH0} M e^{-itH0}`` and
``T_G = int_0^t e^{isH0} G e^{-isH0} ds``. In the eigenbasis of ``H0`` the
integral is an elementwise product with
``F_ab = (e^{it(l_a - l_b)} - 1) / (i (l_a - l_b))`` (``t`` when degenerate),
so every Pauli string is handled in one pass through :func:`pauli_traces`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import CapacityError, ParameterError, ValidationError
from .experiment import apply_local, exact_outcomes, sample_observable, sample_product_state
from .models import LatticeParams, optical_lattice_hamiltonian, planted_sparse
from .pauli import (
    PAULI_MATRICES,
    basis_size,
    is_hermitian,
    n_qubits_of_coefficients,
    pauli_traces,
    reconstruct,
    spec_norm,
)
from .sensing import build_matrix
from .solver import SolverOptions, performance, plugin_epsilon, solve

DEGENERACY_TOL = 1e-9
MAX_OPEN_QUBITS = 6
WEAK_COUPLING_RATIO = 0.1


def _eig(h):
    H = reconstruct(np.asarray(h, dtype=float))
    return np.linalg.eigh(H)


def integral_weights(energies, t):
    """``F_ab`` such that ``int_0^t e^{isH0} G e^{-isH0} ds = V (F * V^+ G V) V^+``."""
    gap = energies[:, None] - energies[None, :]
    small = np.abs(gap) < DEGENERACY_TOL
    safe = np.where(small, 1.0, gap)
    F = (np.exp(1j * t * safe) - 1.0) / (1j * safe)
    return np.where(small, t, F)


def time_integral(h0, g, t):
    """Dense ``int_0^t e^{isH0} g e^{-isH0} ds`` via the eigenbasis of ``H0``."""
    w, V = _eig(h0)
    return V @ (integral_weights(w, t) * (V.conj().T @ g @ V)) @ V.conj().T


def evolved_observable(h0, observable, t):
    """Heisenberg picture ``e^{itH0} M e^{-itH0}`` of a local Pauli observable."""
    h0 = np.asarray(h0, dtype=float)
    n = n_qubits_of_coefficients(h0.size)
    w, V = _eig(h0)
    M = _local_dense(observable, n)
    U = (V * np.exp(-1j * t * w)) @ V.conj().T
    out = U.conj().T @ M @ U
    return 0.5 * (out + out.conj().T)


def _local_dense(observable, n):
    d = 2**n
    M = np.empty((d, d), dtype=complex)
    eye = np.eye(d, dtype=complex)
    for k in range(d):
        M[:, k] = apply_local(eye[:, k], n, observable.site, PAULI_MATRICES[observable.axis_code])
    return M


def _response(w, V, t, rho, m0):
    """``i tr(T_a [m0, rho])`` for every Pauli string ``a`` on the full register."""
    C = m0 @ rho - rho @ m0
    Ct = V.conj().T @ C @ V
    K = integral_weights(w, t) * Ct.T
    Q = V.conj() @ K @ V.T
    vals = 1j * pauli_traces(Q.T)
    scale = max(float(np.max(np.abs(vals))), 1.0)
    if np.max(np.abs(vals.imag)) > 1e-10 * scale:
        raise ValidationError("linear response has a non-negligible imaginary part")
    return vals.real


def fine_row(h0, config, n_qubits=None):
    """Sensing row for the perturbation ``Delta`` of ``H = H0 + Delta``.

    Entry ``a`` is ``i <psi|[T_a, M0]|psi>``; with ``h0 = 0`` this reduces to
    :func:`hamsense.sensing.build_row`.
    """
    return fine_rows(h0, [config], n_qubits)[0]


def fine_rows(h0, configs, n_qubits=None):
    """Stack of :func:`fine_row` sharing one eigendecomposition of ``H0``."""
    h0 = np.asarray(h0, dtype=float)
    n = n_qubits_of_coefficients(h0.size)
    if n_qubits is not None and n_qubits != n:
        raise ValidationError(f"h0 acts on {n} qubits, expected {n_qubits}")
    w, V = _eig(h0)
    rows = []
    for c in configs:
        if c.n_qubits != n:
            raise ValidationError("configuration and h0 sizes differ")
        U = (V * np.exp(-1j * c.time * w)) @ V.conj().T
        m0 = U.conj().T @ _local_dense(c.observable, n) @ U
        psi = c.state.to_vector()
        rows.append(_response(w, V, c.time, np.outer(psi, psi.conj()), m0))
    return np.array(rows)


@dataclass(frozen=True)
class FineStructureProblem:
    """Known ``h0`` plus a small unknown ``delta_true`` probed at ``time``."""

    h0: np.ndarray
    delta_true: np.ndarray
    time: float

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=float)
        delta = np.asarray(self.delta_true, dtype=float)
        if h0.shape != delta.shape:
            raise ValidationError("h0 and delta_true must have the same length")
        if not self.time > 0:
            raise ValidationError("time must be positive")
        if self.time * spec_norm(reconstruct(delta)) >= 0.1:
            raise ParameterError("the perturbation must satisfy t * ||Delta|| < 0.1")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "delta_true", delta)

    @property
    def n_qubits(self):
        return n_qubits_of_coefficients(self.h0.size)


def planted_fine_structure(seed, s=2, j=5.0, u=10.0, background_scale=1.0, perturbation_scale=0.01):
    """Lattice background with a planted ``s``-sparse perturbation.

    The time is ``background_scale / ||H0||`` and the perturbation is rescaled to
    ``t ||Delta|| = perturbation_scale``.
    """
    h0 = optical_lattice_hamiltonian(LatticeParams.from_ratio(j, u))
    t = background_scale / spec_norm(reconstruct(h0))
    delta = planted_sparse(4, s, seed)
    delta *= perturbation_scale / (t * spec_norm(reconstruct(delta)))
    return FineStructureProblem(h0, delta, t)


def estimate_fine_structure(problem, configs, opts=None, plain=False, epsilon="plugin"):
    """Recover ``delta_true`` from exact outcomes under ``h0 + delta_true``.

    With ``plain=True`` the known part is instead removed through the ordinary
    first-order rows (``pbar - phi @ h0``), i.e. the short-time linearization
    around zero; used as the baseline.

    ``epsilon`` is ``"plugin"`` (self-consistent) or a number in scaled units.
    The returned result carries ``performance`` against ``delta_true``.
    """
    opts = SolverOptions() if opts is None else opts
    configs = list(configs)
    if not configs:
        raise ValidationError("at least one configuration is required")
    if any(c.time != problem.time for c in configs):
        raise ValidationError("configurations must use the problem's time")
    scale = 1.0 / np.sqrt(len(configs))
    h0 = problem.h0
    p = exact_outcomes(h0 + problem.delta_true, configs)
    base = exact_outcomes(h0, configs)
    if plain:
        phi = build_matrix(configs) * scale
        p_init = np.array([c.state.bloch()[c.observable.site, c.observable.axis_code] for c in configs])
        pbar = (p - p_init) * scale - phi @ h0

        def mismatch(d):
            return (exact_outcomes(h0 + d, configs) - p_init) * scale - phi @ (h0 + d)

    else:
        phi = fine_rows(h0, configs) * scale
        pbar = (p - base) * scale

        def mismatch(d):
            return (exact_outcomes(h0 + d, configs) - base) * scale - phi @ d

    if epsilon == "plugin":
        eps = plugin_epsilon(phi, pbar, mismatch, opts=opts)
    else:
        eps = float(epsilon)
    res = solve(phi, pbar, replace(opts, epsilon=eps))
    res.performance = performance(res.h_star, problem.delta_true)
    return res


# ---------------------------------------------------------------- open systems


def build_liouvillian(h):
    """Matrix of ``rho -> -i [H, rho]`` acting on row-major ``rho.reshape(-1)``."""
    h = np.asarray(h, dtype=float)
    n = n_qubits_of_coefficients(h.size)
    if n > MAX_OPEN_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the superoperator limit of {MAX_OPEN_QUBITS}")
    H = reconstruct(h)
    eye = np.eye(H.shape[0])
    return -1j * (np.kron(H, eye) - np.kron(eye, H.T))


def embed(hs, hb):
    """Coefficients of ``H_S (x) I + I (x) H_B`` on the joint register (system first)."""
    hs = np.asarray(hs, dtype=float)
    hb = np.asarray(hb, dtype=float)
    out = np.zeros((hs.size, hb.size))
    out[:, 0] += hs
    out[0, :] += hb
    return out.reshape(-1)


def _validate_density(rho, d):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (d, d):
        raise ValidationError(f"density operator must be {d}x{d}, got {rho.shape}")
    if not is_hermitian(rho, 1e-10):
        raise ValidationError("density operator must be Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10:
        raise ValidationError("density operator must have unit trace")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-10:
        raise ValidationError("density operator must be positive semidefinite")
    return rho


@dataclass(frozen=True)
class OpenSystemSpec:
    """System plus bath with bilinear coupling ``sum_pq lambdas[p, q] S_p (x) B_q``.

    ``lambdas`` has shape ``(4**n_s - 1, 4**n_b - 1)``: identity strings are
    excluded on both sides. ``bath_state`` is a density matrix on the bath; the
    default is the pure state with every bath qubit in ``|0>``.

    ``bath_preparation`` controls random data generation: ``"random"`` draws a
    fresh (known) Haar-random pure bath state per experiment, ``"fixed"`` uses
    ``bath_state`` every time. With a fixed bath the first-order rows span at
    most ``4**n_s - 1`` dimensions and the couplings are not identifiable in
    general.
    """

    hs: np.ndarray
    hb: np.ndarray
    lambdas: np.ndarray
    time: float
    bath_state: np.ndarray | None = field(default=None)
    bath_preparation: str = "random"

    def __post_init__(self):
        hs = np.asarray(self.hs, dtype=float)
        hb = np.asarray(self.hb, dtype=float)
        n_s = n_qubits_of_coefficients(hs.size)
        n_b = n_qubits_of_coefficients(hb.size)
        if n_s + n_b > MAX_OPEN_QUBITS:
            raise CapacityError(f"joint register of {n_s + n_b} qubits exceeds {MAX_OPEN_QUBITS}")
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.shape != (hs.size - 1, hb.size - 1):
            raise ValidationError(f"lambdas must have shape {(hs.size - 1, hb.size - 1)}, got {lam.shape}")
        if not self.time > 0:
            raise ValidationError("time must be positive")
        if self.bath_preparation not in ("random", "fixed"):
            raise ValidationError(f"bath_preparation must be 'random' or 'fixed', got {self.bath_preparation!r}")
        rho_b = self.bath_state
        if rho_b is None:
            rho_b = np.zeros((2**n_b, 2**n_b), dtype=complex)
            rho_b[0, 0] = 1.0
        rho_b = _validate_density(rho_b, 2**n_b)
        object.__setattr__(self, "hs", hs)
        object.__setattr__(self, "hb", hb)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "bath_state", rho_b)
        coupling = spec_norm(reconstruct(self.coupling_coefficients()))
        limit = WEAK_COUPLING_RATIO * min(spec_norm(reconstruct(hs)), spec_norm(reconstruct(hb)))
        if coupling >= limit and coupling > 0:
            raise ParameterError(f"coupling norm {coupling:.3g} violates weak coupling (limit {limit:.3g})")

    @property
    def n_system(self):
        return n_qubits_of_coefficients(self.hs.size)

    @property
    def n_bath(self):
        return n_qubits_of_coefficients(self.hb.size)

    @property
    def pair_indices(self):
        """Joint-register basis index of every ``(p, q)`` pair, row-major over ``lambdas``."""
        ds, db = self.hs.size, self.hb.size
        p, q = np.meshgrid(np.arange(1, ds), np.arange(1, db), indexing="ij")
        return (p * db + q).reshape(-1)

    def free_coefficients(self):
        return embed(self.hs, self.hb)

    def coupling_coefficients(self):
        out = np.zeros(self.hs.size * self.hb.size)
        out[self.pair_indices] = np.asarray(self.lambdas).reshape(-1)
        return out


def planted_open_system(seed, n_support=2, coupling=0.01, n_s=2, n_b=1, time_scale=1.0):
    """Random system and bath fields with an ``n_support``-term coupling.

    The coupling is rescaled so that ``||H_SB|| = coupling * ||H_S||`` and the
    time is ``time_scale / ||H_S (x) I + I (x) H_B||``.
    """
    rng = np.random.default_rng(seed)
    hs = planted_sparse(n_s, min(4, basis_size(n_s) - 1), int(rng.integers(2**31)))
    hb = planted_sparse(n_b, min(2, basis_size(n_b) - 1), int(rng.integers(2**31)))
    lam = np.zeros((hs.size - 1, hb.size - 1))
    flat = lam.reshape(-1)
    idx = rng.choice(flat.size, size=n_support, replace=False)
    flat[idx] = rng.uniform(0.5, 1.0, size=n_support) * rng.choice([-1.0, 1.0], size=n_support)
    lam = flat.reshape(lam.shape)
    pair = OpenSystemSpec(hs, hb, np.zeros_like(lam), 1.0)
    full = np.zeros(hs.size * hb.size)
    full[pair.pair_indices] = lam.reshape(-1)
    lam *= coupling * spec_norm(reconstruct(hs)) / spec_norm(reconstruct(full))
    t = time_scale / spec_norm(reconstruct(embed(hs, hb)))
    return OpenSystemSpec(hs, hb, lam, t)


def _joint_observable(observable, n_s, n_b):
    return _local_dense(observable, n_s + n_b)


def open_system_row(spec, rho_k, observable, t=None, rho_b=None):
    """First-order response of ``tr(rho(t) M)`` to every coupling ``lambda_pq``.

    Entry ``(p, q)`` is ``tr(X_pq (M (x) I))`` where ``X_pq`` is the time
    integral of ``e^{(t-s)L0} L_pq e^{sL0}`` applied to ``rho_k (x) rho_B``.
    Returned flattened row-major over ``(p, q)``. ``rho_b`` overrides the
    ``spec.bath_state``.
    """
    t = spec.time if t is None else t
    rho = _joint_state(spec, rho_k, rho_b)
    w, V = _eig(spec.free_coefficients())
    U = (V * np.exp(-1j * t * w)) @ V.conj().T
    m0 = U.conj().T @ _joint_observable(observable, spec.n_system, spec.n_bath) @ U
    return _response(w, V, t, rho, m0)[spec.pair_indices]


def _joint_state(spec, rho_k, rho_b):
    rho_k = _validate_density(rho_k, 2**spec.n_system)
    rho_b = spec.bath_state if rho_b is None else _validate_density(rho_b, 2**spec.n_bath)
    return np.kron(rho_k, rho_b)


def free_offset(spec, rho_k, observable, t=None, rho_b=None):
    """``tr(e^{tL0}[rho_k (x) rho_B] (M (x) I))``, the coupling-free prediction."""
    t = spec.time if t is None else t
    return _mixed_outcome(spec.free_coefficients(), _joint_state(spec, rho_k, rho_b), observable, spec, t)


def _mixed_outcome(h, rho, observable, spec, t):
    w, V = _eig(h)
    U = (V * np.exp(-1j * t * w)) @ V.conj().T
    M = _joint_observable(observable, spec.n_system, spec.n_bath)
    return float(np.trace(U @ rho @ U.conj().T @ M).real)


def open_system_outcome(spec, rho_k, observable, t=None, lambdas=None, rho_b=None):
    """Exact ``tr(rho(t) (M (x) I))`` under the full coupled Hamiltonian.

    ``lambdas`` overrides ``spec.lambdas`` (flattened or matrix form).
    """
    t = spec.time if t is None else t
    lam = spec.lambdas if lambdas is None else np.asarray(lambdas, dtype=float)
    coupling = np.zeros(spec.hs.size * spec.hb.size)
    coupling[spec.pair_indices] = lam.reshape(-1)
    h = spec.free_coefficients() + coupling
    return _mixed_outcome(h, _joint_state(spec, rho_k, rho_b), observable, spec, t)


@dataclass
class OpenSystemData:
    phi: np.ndarray
    pbar: np.ndarray
    states: list
    baths: list
    observables: list


def _pure(vec):
    return np.outer(vec, vec.conj())


def open_system_data(spec, m, rng):
    """Random experiments on the system, scaled by ``1/sqrt(m)``.

    Each experiment prepares a Haar-random product state on the system (and on
    the bath when ``spec.bath_preparation == "random"``) and measures a random
    local Pauli observable on the system.
    """
    if m < 1:
        raise ValidationError("m must be at least 1")
    rows, vals, states, baths, obs = [], [], [], [], []
    for _ in range(m):
        rho = _pure(sample_product_state(spec.n_system, rng).to_vector())
        o = sample_observable(spec.n_system, rng)
        if spec.bath_preparation == "random":
            rho_b = _pure(sample_product_state(spec.n_bath, rng).to_vector())
        else:
            rho_b = spec.bath_state
        rows.append(open_system_row(spec, rho, o, rho_b=rho_b))
        vals.append(open_system_outcome(spec, rho, o, rho_b=rho_b) - free_offset(spec, rho, o, rho_b=rho_b))
        states.append(rho)
        baths.append(rho_b)
        obs.append(o)
    scale = 1.0 / np.sqrt(m)
    return OpenSystemData(np.array(rows) * scale, np.array(vals) * scale, states, baths, obs)


def estimate_couplings(spec, m, opts=None, rng=None, epsilon="plugin"):
    """Sparse recovery of ``lambdas`` from ``m`` random system experiments.

    Returns a :class:`RecoveryResult` whose ``h_star`` is the flattened
    coupling matrix and whose ``performance`` is measured against
    ``spec.lambdas``.
    """
    opts = SolverOptions() if opts is None else opts
    rng = np.random.default_rng() if rng is None else rng
    data = open_system_data(spec, m, rng)
    scale = 1.0 / np.sqrt(m)

    cases = list(zip(data.states, data.observables, data.baths))
    offsets = np.array([free_offset(spec, r, o, rho_b=b) for r, o, b in cases])

    def mismatch(lam):
        exact = np.array([open_system_outcome(spec, r, o, lambdas=lam, rho_b=b) for r, o, b in cases])
        return (exact - offsets) * scale - data.phi @ lam

    if epsilon == "plugin":
        eps = plugin_epsilon(data.phi, data.pbar, mismatch, opts=opts)
    else:
        eps = float(epsilon)
    res = solve(data.phi, data.pbar, replace(opts, epsilon=eps))
    res.performance = performance(res.h_star, spec.lambdas.reshape(-1))
    return res

