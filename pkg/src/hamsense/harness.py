"""Seeded Monte Carlo experiments that write deterministic CSV output.

Every trial draws its randomness from ``SeedSequence([master_seed, m, trial])``,
so results do not depend on the number of worker threads or on scheduling.
Wall-clock timings go to a separate ``timing.csv`` to keep the result files
byte-reproducible.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import BenchmarkConfig
from .diagnostics import EnsembleSpec, concentration_scan, rip_scan
from .exceptions import ConfigError
from .experiment import NoiseSpec, evolution_time, expected_noise_norm, initial_expectation, sample_configs
from .extensions import estimate_couplings, estimate_fine_structure, planted_fine_structure, planted_open_system
from .models import (
    ExchangeParams,
    LatticeParams,
    exchange_hamiltonian,
    optical_lattice_hamiltonian,
    planted_sparse,
)
from .pauli import n_qubits_of_coefficients, reconstruct, spec_norm
from .sensing import assemble, model_mismatch
from .solver import bound_epsilon, certify_sparsity, performance, plugin_epsilon, solve

TRIAL_COLUMNS = ("m", "trial_index", "seed", "performance", "residual_l2", "iterations")
NOISE_COLUMNS = ("m", "trial_index", "seed", "noise_level", "performance", "residual_l2", "iterations")


@dataclass(frozen=True)
class TrialRecord:
    m: int
    trial_index: int
    seed: int
    performance: float
    residual_l2: float
    iterations: int
    wall_time_ms: float = 0.0


def trial_seed(master_seed, *key):
    """Deterministic 32-bit seed for one trial."""
    return int(np.random.SeedSequence([int(master_seed), *map(int, key)]).generate_state(1)[0])


def model_coefficients(cfg):
    """Ground-truth coefficients for the closed-system model kinds."""
    p = cfg.model.params
    kind = cfg.model.kind
    if kind == "optical_lattice":
        j_down = p.get("j_down")
        j_down = p["j"] / 2 if j_down is None else j_down
        return optical_lattice_hamiltonian(LatticeParams(p["j"], j_down, p["u"]))
    if kind == "quantum_dot":
        return exchange_hamiltonian(ExchangeParams(p["j"], p["j_prime"]))
    if kind == "planted":
        seed = cfg.master_seed if p.get("seed") is None else p["seed"]
        return planted_sparse(p["n_qubits"], p["s"], seed, tuple(p["magnitude_range"]))
    raise ConfigError(f"model {kind!r} has no fixed coefficient vector")


def noise_norm_estimate(system):
    """Expected noise norm in the scaled units of ``system.pbar``."""
    spec = system.noise
    if not spec.active:
        return 0.0
    if spec.target == "signal":
        return expected_noise_norm(system.pbar, spec)
    p0 = np.array([initial_expectation(c) for c in system.configs]) * system.scale
    if spec.kind == "additive_gaussian":
        return spec.level * np.sqrt(system.m) * system.scale
    return expected_noise_norm(system.pbar + p0, spec)


def choose_epsilon(system, solver_spec, h_true=None):
    """Residual bound for a simulated system according to ``solver_spec.epsilon``."""
    mode = solver_spec.epsilon
    noise = noise_norm_estimate(system)
    if mode == "plugin":
        return plugin_epsilon(
            system.phi,
            system.pbar,
            lambda h: model_mismatch(system, h),
            noise_norm=noise,
            factor=solver_spec.epsilon_factor,
            opts=solver_spec.options,
        )
    if mode == "bound":
        if h_true is None:
            raise ConfigError("the 'bound' epsilon rule needs the Hamiltonian norm")
        return bound_epsilon(spec_norm(reconstruct(h_true)), system.time, noise, solver_spec.epsilon_factor)
    return float(mode)


def recover(system, solver_spec, h_true=None, linearized=False):
    """Decode one system; linearized noiseless data use ``epsilon = 0`` under the plug-in rule."""
    if linearized and solver_spec.epsilon == "plugin" and not system.noise.active:
        eps = 0.0
    else:
        eps = choose_epsilon(system, solver_spec, h_true)
    return solve(system.phi, system.pbar, replace(solver_spec.options, epsilon=eps))


def _closed_trial(cfg, h, t, m, seed, noise=None):
    rng = np.random.default_rng(seed)
    n = n_qubits_of_coefficients(h.size)
    configs = sample_configs(n, m, t, rng)
    system = assemble(h, configs, noise or cfg.noise, linearized=cfg.linearized, rng=rng)
    return recover(system, cfg.solver, h, cfg.linearized)


def _run_trial(cfg, m, trial):
    seed = trial_seed(cfg.master_seed, m, trial)
    start = time.perf_counter()
    kind = cfg.model.kind
    p = cfg.model.params
    if kind == "fine_structure":
        prob = planted_fine_structure(
            seed, p["s"], p["j"], p["u"], p["background_scale"], p["perturbation_scale"]
        )
        configs = sample_configs(prob.n_qubits, m, prob.time, np.random.default_rng(seed))
        eps = cfg.solver.epsilon if not isinstance(cfg.solver.epsilon, str) else "plugin"
        res = estimate_fine_structure(prob, configs, cfg.solver.options, epsilon=eps)
        perf = res.performance
    elif kind == "open_system":
        spec = planted_open_system(seed, p["n_support"], p["coupling"], time_scale=p["time_scale"])
        if p.get("bath_preparation", "random") != spec.bath_preparation:
            spec = replace(spec, bath_preparation=p["bath_preparation"])
        eps = cfg.solver.epsilon if not isinstance(cfg.solver.epsilon, str) else "plugin"
        res = estimate_couplings(spec, m, cfg.solver.options, np.random.default_rng(seed), epsilon=eps)
        perf = res.performance
    else:
        h = model_coefficients(cfg)
        t = evolution_time(h, cfg.time_factor)
        res = _closed_trial(cfg, h, t, m, seed)
        perf = performance(res.h_star, h)
    elapsed = 1e3 * (time.perf_counter() - start)
    return TrialRecord(m, trial, seed, float(perf), float(res.residual_l2), int(res.iterations), elapsed)


def _pool_map(fn, jobs, threads):
    if threads <= 1:
        return [fn(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda j: fn(*j), jobs))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def qpt_reference(n_qubits):
    """Configuration count of full process tomography, ``3 * 4**n * 4**n``."""
    return 3 * 4**n_qubits * 4**n_qubits


def _model_qubits(cfg):
    kind = cfg.model.kind
    if kind == "planted":
        return cfg.model.params["n_qubits"]
    if kind == "open_system":
        return 3
    return 4


@dataclass
class BenchmarkResult:
    records: list
    summary: list

    def mean(self, m):
        return next(s["mean_performance"] for s in self.summary if s["m"] == m)


def summarize(records):
    out = []
    for m in sorted({r.m for r in records}):
        perf = np.array([r.performance for r in records if r.m == m])
        out.append(
            {
                "m": m,
                "trials": int(perf.size),
                "mean_performance": float(perf.mean()),
                "std_performance": float(perf.std(ddof=1)) if perf.size > 1 else 0.0,
            }
        )
    return out


def run_benchmark(cfg: BenchmarkConfig, out=None, threads=1):
    """Performance versus number of configurations.

    Writes ``trials.csv`` (one row per trial), ``summary.csv`` (mean and
    standard deviation per ``m``), ``summary.txt`` and ``timing.csv`` when
    ``out`` is given.
    """
    jobs = [(cfg, m, k) for m in cfg.m_grid for k in range(cfg.trials)]
    records = _pool_map(_run_trial, jobs, threads)
    summary = summarize(records)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "trials.csv", TRIAL_COLUMNS, [[getattr(r, c) for c in TRIAL_COLUMNS] for r in records])
        _write_csv(out / "timing.csv", ("m", "trial_index", "wall_time_ms"), [[r.m, r.trial_index, round(r.wall_time_ms, 3)] for r in records])
        cols = ("m", "trials", "mean_performance", "std_performance")
        _write_csv(out / "summary.csv", cols, [[s[c] for c in cols] for s in summary])
        n = _model_qubits(cfg)
        lines = [f"model: {cfg.model.kind}", f"master_seed: {cfg.master_seed}"]
        lines += [f"m={s['m']}: mean={s['mean_performance']:.4f} std={s['std_performance']:.4f}" for s in summary]
        lines.append(
            f"full process tomography reference for n={n}: 3*4^n*4^n = {qpt_reference(n)} configurations "
            f"(largest m here: {max(cfg.m_grid)})"
        )
        (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return BenchmarkResult(records, summary)


def _noise_trial(cfg, m, trial, h, t):
    seed = trial_seed(cfg.master_seed, m, trial)
    noise_seed = trial_seed(cfg.master_seed, m, trial, 1)
    rows = []
    base = cfg.noise if cfg.noise.kind != "none" else NoiseSpec("relative_uniform", 0.0, target=cfg.noise.target)
    for level in cfg.noise_levels:
        rng = np.random.default_rng(seed)
        configs = sample_configs(n_qubits_of_coefficients(h.size), m, t, rng)
        # common random numbers: every level reuses the same noise draws
        noise = replace(base, level=float(level))
        system = assemble(h, configs, noise, linearized=cfg.linearized, rng=np.random.default_rng(noise_seed))
        res = recover(system, cfg.solver, h, cfg.linearized)
        rows.append((m, trial, seed, float(level), performance(res.h_star, h), float(res.residual_l2), int(res.iterations)))
    return rows


def run_noise_study(cfg: BenchmarkConfig, out=None, threads=1):
    """Paired trials over ``cfg.noise_levels``: identical configurations, scaled noise draws.

    Returns one dict per ``(m, noise_level)`` with ``mean_performance`` and
    ``mean_drop`` (paired drop against the first level, normally zero).
    """
    h = model_coefficients(cfg)
    t = evolution_time(h, cfg.time_factor)
    jobs = [(cfg, m, k, h, t) for m in cfg.m_grid for k in range(cfg.trials)]
    rows = [r for batch in _pool_map(_noise_trial, jobs, threads) for r in batch]
    summary = []
    for m in cfg.m_grid:
        sub = [r for r in rows if r[0] == m]
        ref = {r[1]: r[4] for r in sub if r[3] == cfg.noise_levels[0]}
        for level in cfg.noise_levels:
            perf = np.array([r[4] for r in sub if r[3] == level])
            drop = np.array([ref[r[1]] - r[4] for r in sub if r[3] == level])
            summary.append({"m": m, "noise_level": level, "mean_performance": float(perf.mean()), "mean_drop": float(drop.mean())})
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "noise_trials.csv", NOISE_COLUMNS, rows)
        cols = ("m", "noise_level", "mean_performance", "mean_drop")
        _write_csv(out / "noise_summary.csv", cols, [[s[c] for c in cols] for s in summary])
    return summary


def _certify_trial(cfg, trial, h, t):
    c = cfg.certify
    seed = trial_seed(cfg.master_seed, c.m_stop, trial)
    rng = np.random.default_rng(seed)
    configs = sample_configs(n_qubits_of_coefficients(h.size), c.m_stop, t, rng)
    full = assemble(h, configs, cfg.noise, linearized=cfg.linearized, rng=rng)
    estimates, rows, prev = [], [], None
    for m in range(c.m_start, c.m_stop + 1, c.m_step):
        res = recover(full.subsystem(m), cfg.solver, h, cfg.linearized)
        inc = float("nan") if prev is None else float(np.linalg.norm(res.h_star - prev))
        prev = res.h_star
        estimates.append(res.h_star)
        rows.append((trial, m, seed, inc, performance(res.h_star, h)))
    report = certify_sparsity(estimates, window=c.window, rel_threshold=c.rel_threshold)
    return rows, report


def run_certification(cfg: BenchmarkConfig, out=None, threads=1):
    """Increments ``||h*_m - h*_(m - step)||`` on nested configuration sets.

    Returns the list of :class:`~hamsense.solver.CertificationReport`, one per trial.
    """
    h = model_coefficients(cfg)
    t = evolution_time(h, cfg.time_factor)
    jobs = [(cfg, k, h, t) for k in range(cfg.trials)]
    results = _pool_map(_certify_trial, jobs, threads)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        rows = [r for batch, _ in results for r in batch]
        _write_csv(out / "increments.csv", ("trial_index", "m", "seed", "increment", "performance"), rows)
        _write_csv(
            out / "certification.csv",
            ("trial_index", "window_mean", "threshold", "certified"),
            [(k, rep.window_mean, rep.threshold, int(rep.certified)) for k, (_, rep) in enumerate(results)],
        )
    return [rep for _, rep in results]


def run_diagnostics(cfg: BenchmarkConfig, out=None, threads=1):
    """Concentration scans over ``diagnostics.m_grid`` and a restricted-isometry probe.

    The ``f, g`` ratio is evaluated on the model's support columns
    (``gram_columns: support``) or on every non-identity string (``all``).
    """
    d = cfg.diagnostics
    h = model_coefficients(cfg)
    n = n_qubits_of_coefficients(h.size)
    t = evolution_time(h, cfg.time_factor)
    cols = tuple(int(i) for i in np.flatnonzero(h)) if d.gram_columns == "support" else None
    ens = EnsembleSpec("local", n, t, cols)
    scans = [(m, concentration_scan(ens, m, d.trials, d.deltas, seed=trial_seed(cfg.master_seed, m, 0))) for m in d.m_grid]
    s = min(d.s, (4**n - 1) // 2)
    rips = [
        (m, rip_scan(EnsembleSpec("local", n, t), s, m, d.rip_repeats, d.rip_samples, seed=trial_seed(cfg.master_seed, m, 1)))
        for m in d.m_grid
    ]
    result = {"concentration": scans, "rip": rips}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        rows = [(m, dl, p) for m, rep in scans for dl, p in zip(rep.delta_grid, rep.deviation_prob)]
        _write_csv(out / "concentration.csv", ("m", "delta", "deviation_prob"), rows)
        text = {str(m): json.loads(rep.to_text()) for m, rep in scans}
        (out / "concentration.json").write_text(json.dumps(text, indent=2, sort_keys=True) + "\n")
        rrows = [(m, k, e.s, e.delta_s_estimate, e.ratio_min, e.ratio_max) for m, ests in rips for k, e in enumerate(ests)]
        _write_csv(out / "rip.csv", ("m", "repeat", "s", "delta_s_estimate", "ratio_min", "ratio_max"), rrows)
    return result
