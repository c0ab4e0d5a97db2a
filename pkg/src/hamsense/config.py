"""YAML run configuration with schema validation and line-numbered errors.

Example::

    schema_version: 1
    model:
      kind: optical_lattice
      j: 1.0
      u: 10.0
    m_grid: [20, 40, 60]
    trials: 20
    time_factor: 0.1
    master_seed: 7
    noise: {kind: relative_uniform, level: 0.1}
    solver: {epsilon: plugin, reweight_iters: 0}
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .exceptions import ConfigError, HamsenseError
from .experiment import DEFAULT_THETA, NoiseSpec
from .solver import SolverOptions

SCHEMA_VERSION = 1
MODEL_KINDS = ("optical_lattice", "quantum_dot", "planted", "fine_structure", "open_system")
EPSILON_MODES = ("plugin", "bound")

_MODEL_KEYS = {
    "optical_lattice": {"j": 1.0, "u": 10.0, "j_down": None},
    "quantum_dot": {"j": 1.0, "j_prime": 0.05},
    "planted": {"n_qubits": 2, "s": 3, "seed": None, "magnitude_range": [0.5, 1.0]},
    "fine_structure": {"j": 5.0, "u": 10.0, "s": 2, "background_scale": 1.0, "perturbation_scale": 0.01},
    "open_system": {"n_support": 2, "coupling": 0.01, "time_scale": 1.0, "bath_preparation": "random"},
}


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "optical_lattice"
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SolverSpec:
    """Decoder options plus the residual-bound rule.

    ``epsilon`` is ``"plugin"`` (self-consistent estimate), ``"bound"``
    (worst-case linearization bound) or a fixed number in scaled units.
    """

    options: SolverOptions = field(default_factory=SolverOptions)
    epsilon: object = "plugin"
    epsilon_factor: float = 1.1


@dataclass(frozen=True)
class CertifySpec:
    m_start: int = 10
    m_stop: int = 80
    m_step: int = 1
    window: int = 5
    rel_threshold: float = 1e-3


@dataclass(frozen=True)
class DiagnosticsSpec:
    m_grid: tuple = (20, 40, 80)
    trials: int = 100
    s: int = 15
    rip_repeats: int = 20
    rip_samples: int = 2000
    deltas: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    gram_columns: str = "support"


@dataclass(frozen=True)
class BenchmarkConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    m_grid: tuple = (20, 40, 60)
    trials: int = 20
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    time_factor: float = DEFAULT_THETA
    master_seed: int = 0
    linearized: bool = False
    noise_levels: tuple = (0.0, 0.05, 0.1, 0.2)
    certify: CertifySpec = field(default_factory=CertifySpec)
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)

    def with_seed(self, seed):
        return _replace(self, master_seed=int(seed))


def _replace(obj, **kw):
    values = {f.name: getattr(obj, f.name) for f in fields(obj)}
    values.update(kw)
    return type(obj)(**values)


def _line_index(node, path=(), out=None):
    """Map every key path to its 1-based line in the source."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            p = path + (key.value,)
            out[p] = key.start_mark.line + 1
            _line_index(value, p, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, value in enumerate(node.value):
            p = path + (i,)
            out[p] = value.start_mark.line + 1
            _line_index(value, p, out)
    return out


class _Reader:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, path, msg):
        line = None
        p = tuple(path)
        while p and line is None:
            line = self.lines.get(p)
            p = p[:-1]
        raise ConfigError(f"{'.'.join(map(str, path)) or '<root>'}: {msg}", line=line)

    def mapping(self, obj, path, allowed):
        if obj is None:
            return {}
        if not isinstance(obj, dict):
            self.fail(path, "expected a mapping")
        for key in obj:
            if key not in allowed:
                self.fail(path + (key,), f"unknown key; expected one of {sorted(allowed)}")
        return obj

    def number(self, obj, path, kind=float, low=None, strict=False):
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            self.fail(path, f"expected a number, got {obj!r}")
        if kind is int and not float(obj).is_integer():
            self.fail(path, f"expected an integer, got {obj!r}")
        val = kind(obj)
        if low is not None and (val < low or (strict and val == low)):
            self.fail(path, f"must be {'>' if strict else '>='} {low}, got {val}")
        return val

    def number_list(self, obj, path, kind=float, low=None):
        if not isinstance(obj, list) or not obj:
            self.fail(path, "expected a non-empty list")
        return tuple(self.number(v, path + (i,), kind, low) for i, v in enumerate(obj))


def parse_config(text):
    """Parse YAML text into a :class:`BenchmarkConfig`.

    Raises
    ------
    ConfigError
        With the offending line number when it can be located.
    """
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", line=mark.line + 1 if mark else None) from None
    rd = _Reader(_line_index(node) if node is not None else {})
    top_keys = {"schema_version"} | {f.name for f in fields(BenchmarkConfig)}
    raw = rd.mapping(raw, (), top_keys)
    if "schema_version" not in raw:
        raise ConfigError("missing schema_version", line=1)
    if raw["schema_version"] != SCHEMA_VERSION:
        rd.fail(("schema_version",), f"unsupported schema version {raw['schema_version']!r}; expected {SCHEMA_VERSION}")
    kw = {}

    if "model" in raw:
        m = rd.mapping(raw["model"], ("model",), {"kind"} | set().union(*_MODEL_KEYS.values()))
        kind = m.get("kind", "optical_lattice")
        if kind not in MODEL_KINDS:
            rd.fail(("model", "kind"), f"unknown model {kind!r}; expected one of {MODEL_KINDS}")
        allowed = _MODEL_KEYS[kind]
        params = dict(allowed)
        for key, value in m.items():
            if key == "kind":
                continue
            if key not in allowed:
                rd.fail(("model", key), f"not a parameter of {kind}")
            if key == "magnitude_range":
                params[key] = list(rd.number_list(value, ("model", key), float, 0.0))
            elif key == "bath_preparation":
                if value not in ("random", "fixed"):
                    rd.fail(("model", key), "expected 'random' or 'fixed'")
                params[key] = value
            elif key in ("n_qubits", "s", "seed", "n_support"):
                params[key] = rd.number(value, ("model", key), int, 0)
            else:
                params[key] = rd.number(value, ("model", key))
        kw["model"] = ModelSpec(kind, params)
    else:
        kw["model"] = ModelSpec("optical_lattice", dict(_MODEL_KEYS["optical_lattice"]))

    if "m_grid" in raw:
        grid = rd.number_list(raw["m_grid"], ("m_grid",), int, 1)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            rd.fail(("m_grid",), "must be strictly increasing")
        kw["m_grid"] = grid
    if "trials" in raw:
        kw["trials"] = rd.number(raw["trials"], ("trials",), int, 1)
    if "time_factor" in raw:
        kw["time_factor"] = rd.number(raw["time_factor"], ("time_factor",), float, 0.0, strict=True)
    if "master_seed" in raw:
        kw["master_seed"] = rd.number(raw["master_seed"], ("master_seed",), int, 0)
    if "linearized" in raw:
        if not isinstance(raw["linearized"], bool):
            rd.fail(("linearized",), "expected true or false")
        kw["linearized"] = raw["linearized"]
    if "noise_levels" in raw:
        kw["noise_levels"] = rd.number_list(raw["noise_levels"], ("noise_levels",), float, 0.0)

    if "noise" in raw:
        n = rd.mapping(raw["noise"], ("noise",), {"kind", "level", "target", "seed"})
        try:
            kw["noise"] = NoiseSpec(
                kind=n.get("kind", "none"),
                level=rd.number(n.get("level", 0.0), ("noise", "level"), float, 0.0),
                target=n.get("target", "signal"),
                seed=None if n.get("seed") is None else rd.number(n["seed"], ("noise", "seed"), int, 0),
            )
        except ConfigError as exc:
            rd.fail(("noise",), str(exc))

    if "solver" in raw:
        option_names = {f.name for f in fields(SolverOptions)} - {"epsilon"}
        s = rd.mapping(raw["solver"], ("solver",), option_names | {"epsilon", "epsilon_factor"})
        opts = {}
        for key in option_names & set(s):
            if key == "reweight_sigma" and s[key] is None:
                continue
            kind = int if key in ("max_iters", "reweight_iters") else float
            opts[key] = rd.number(s[key], ("solver", key), kind, 0)
        eps = s.get("epsilon", "plugin")
        if isinstance(eps, str):
            if eps not in EPSILON_MODES:
                rd.fail(("solver", "epsilon"), f"expected a number or one of {EPSILON_MODES}")
        else:
            eps = rd.number(eps, ("solver", "epsilon"), float, 0.0)
        factor = rd.number(s.get("epsilon_factor", 1.1), ("solver", "epsilon_factor"), float, 0.0, strict=True)
        try:
            kw["solver"] = SolverSpec(SolverOptions(**opts), eps, factor)
        except HamsenseError as exc:
            rd.fail(("solver",), str(exc))

    if "certify" in raw:
        c = rd.mapping(raw["certify"], ("certify",), {f.name for f in fields(CertifySpec)})
        vals = {}
        for key, value in c.items():
            kind = float if key == "rel_threshold" else int
            vals[key] = rd.number(value, ("certify", key), kind, 0, strict=True)
        spec = CertifySpec(**vals)
        if spec.m_stop <= spec.m_start:
            rd.fail(("certify",), "m_stop must exceed m_start")
        kw["certify"] = spec

    if "diagnostics" in raw:
        d = rd.mapping(raw["diagnostics"], ("diagnostics",), {f.name for f in fields(DiagnosticsSpec)})
        vals = {}
        for key, value in d.items():
            path = ("diagnostics", key)
            if key == "m_grid":
                vals[key] = rd.number_list(value, path, int, 1)
            elif key == "deltas":
                vals[key] = rd.number_list(value, path, float, 0.0)
            elif key == "gram_columns":
                if value not in ("support", "all"):
                    rd.fail(path, "expected 'support' or 'all'")
                vals[key] = value
            else:
                vals[key] = rd.number(value, path, int, 1)
        if vals.get("trials", 100) < 100:
            rd.fail(("diagnostics", "trials"), "at least 100 trials are required")
        kw["diagnostics"] = DiagnosticsSpec(**vals)

    return BenchmarkConfig(**kw)


def load_config(path):
    """Read and parse a YAML configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
