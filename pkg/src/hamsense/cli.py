"""Command line entry point: ``hamsense <command> [options]``.

Exit codes: 0 success, 1 configuration or input error, 2 decoder did not
converge (``estimate`` only).
"""
from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .config import BenchmarkConfig, load_config
from .exceptions import ConfigError, HamsenseError
from .experiment import evolution_time, sample_configs
from .harness import (
    model_coefficients,
    recover,
    run_benchmark,
    run_certification,
    run_diagnostics,
    run_noise_study,
    trial_seed,
)
from .pauli import PauliString, n_qubits_of_coefficients
from .sensing import assemble, load_system, save_system
from .solver import performance, solve

EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2


def _load(config, seed):
    cfg = load_config(config) if config else BenchmarkConfig()
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(EXIT_CONFIG)


config_option = click.option("--config", "config", type=click.Path(dir_okay=False), help="YAML run configuration.")
seed_option = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Override master_seed.")
out_option = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
threads_option = click.option("--threads", type=click.IntRange(1), default=1, show_default=True, help="Worker threads.")


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Estimate sparse Hamiltonians from simulated local experiments."""


@main.command()
@config_option
@seed_option
@out_option
def model(config, seed, out):
    """Write the nonzero coefficients of the configured model."""
    try:
        cfg = _load(config, seed)
        h = model_coefficients(cfg)
    except HamsenseError as exc:
        _fail(exc)
    n = n_qubits_of_coefficients(h.size)
    lines = ["index,pauli,coefficient"]
    lines += [f"{i},{PauliString.from_index(int(i), n)},{h[i]!r}" for i in np.flatnonzero(h)]
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "model.csv").write_text(text)
    else:
        click.echo(text, nl=False)


@main.command()
@config_option
@seed_option
@out_option
@click.option("--m", "m", type=click.IntRange(1), default=None, help="Number of configurations (default: largest m_grid entry).")
def simulate(config, seed, out, m):
    """Simulate one data set and write phi.csv, pbar.csv, meta.json and h_true.csv."""
    try:
        cfg = _load(config, seed)
        h = model_coefficients(cfg)
        m = max(cfg.m_grid) if m is None else m
        s = trial_seed(cfg.master_seed, m, 0)
        rng = np.random.default_rng(s)
        t = evolution_time(h, cfg.time_factor)
        configs = sample_configs(n_qubits_of_coefficients(h.size), m, t, rng)
        system = assemble(h, configs, cfg.noise, linearized=cfg.linearized, rng=rng)
        system.seeds = {"master_seed": cfg.master_seed, "trial_seed": s}
    except HamsenseError as exc:
        _fail(exc)
    target = save_system(system, out or ".", h_true=h)
    click.echo(f"wrote m={system.m} system to {target}")


@main.command()
@click.option("--in", "in_dir", type=click.Path(exists=True, file_okay=False), required=True, help="Directory with phi.csv and pbar.csv.")
@config_option
@out_option
@click.option("--epsilon", type=click.FloatRange(0), default=None, help="Residual bound (overrides the config).")
@click.option("--reweight", type=click.IntRange(0), default=None, help="Reweighted solves (overrides the config).")
def estimate(in_dir, config, out, epsilon, reweight):
    """Decode coefficients from saved data; exits 2 if the decoder does not converge."""
    try:
        cfg = _load(config, None)
        system = load_system(in_dir)
        truth_path = Path(in_dir) / "h_true.csv"
        truth = np.atleast_1d(np.loadtxt(truth_path)) if truth_path.exists() else None
        opts = cfg.solver.options
        if reweight is not None:
            opts = replace(opts, reweight_iters=reweight)
        if epsilon is not None:
            res = solve(system.phi, system.pbar, replace(opts, epsilon=epsilon))
        else:
            if isinstance(cfg.solver.epsilon, str) and not system.configs:
                raise ConfigError("data without meta.json need an explicit --epsilon")
            res = recover(system, replace(cfg.solver, options=opts), truth, system.linearized)
    except HamsenseError as exc:
        _fail(exc)
    report = {
        "converged": bool(res.converged),
        "epsilon": float(res.epsilon),
        "iterations": int(res.iterations),
        "residual_l2": float(res.residual_l2),
    }
    if truth is not None:
        report["performance"] = performance(res.h_star, truth)
    target = Path(out or in_dir)
    target.mkdir(parents=True, exist_ok=True)
    np.savetxt(target / "h_star.csv", res.h_star, fmt="%.17e")
    (target / "result.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    click.echo(json.dumps(report, sort_keys=True))
    if not res.converged:
        sys.exit(EXIT_NOT_CONVERGED)


def _harness_command(name, runner, doc):
    @main.command(name=name, help=doc)
    @config_option
    @seed_option
    @out_option
    @threads_option
    def command(config, seed, out, threads):
        try:
            cfg = _load(config, seed)
            runner(cfg, out=out or ".", threads=threads)
        except HamsenseError as exc:
            _fail(exc)
        click.echo(f"{name}: results written to {out or '.'}")

    return command


_harness_command("benchmark", run_benchmark, "Performance versus number of configurations (trials.csv, summary.csv).")
_harness_command("noise-study", run_noise_study, "Paired noiseless/noisy trials (noise_trials.csv, noise_summary.csv).")
_harness_command("certify", run_certification, "Increments on nested configuration sets (increments.csv).")
_harness_command("diagnose", run_diagnostics, "Concentration and restricted-isometry diagnostics.")


if __name__ == "__main__":  # pragma: no cover
    main()
