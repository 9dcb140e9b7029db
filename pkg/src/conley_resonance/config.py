"""Experiment configuration files (INI syntax) with line-numbered diagnostics."""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError, InvalidArgument
from .nonlinearity import REGISTRY, parse_call
from .semiflow import SCHEMES

KINDS = ("criterion", "counterexample")

# key -> (type, default); a default of ... marks a required key
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "experiment": {
        "name": ("str", ...),
        "kind": ("str", "criterion"),
        "description": ("str", ""),
    },
    "operator": {
        "n_modes": ("int", ...),
        "length": ("real", ...),
        "k": ("int", ...),
    },
    "nonlinearity": {
        "name": ("str", ""),
        "params": ("reals", ()),
        "table": ("str", ""),
    },
    "constants": {
        "alpha": ("real", 0.8),
        "delta": ("real", 0.0),
    },
    "checks": {
        "seed": ("int", 0),
        "tolerance": ("real", 1e-9),
        "ball_samples": ("int", 64),
        "sphere_samples": ("int", 64),
        "block_samples": ("int", 256),
        "s_values": ("reals", (0.0, 0.25, 0.5, 0.75, 1.0)),
        "r_start": ("real", 0.125),
        "r_cap": ("real", 1e4),
        "confirm_seeds": ("int", 3),
    },
    "integration": {
        "scheme": ("str", "ETD2"),
        "step": ("real", 0.01),
        "t_end": ("real", 50.0),
        "save_stride": ("int", 10),
    },
    "orbit": {
        "epsilon": ("real", 1e-6),
        "n_starts": ("int", 32),
        "attraction_step": ("real", 0.1),
        "box_radius": ("real", 1.0),
        "drift_step": ("real", 1e-3),
        "drift_t_end": ("real", 20.0),
    },
}

_REAL = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*(pi)?\s*$")


def parse_real(text: str) -> float:
    """A float, optionally times ``pi`` (``"pi"``, ``"2pi"``, ``"0.5*pi"``)."""
    m = _REAL.match(text)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ValueError(f"not a real number: {text!r}")
    value = float(m.group(1)) if m.group(1) is not None else 1.0
    if m.group(2):
        value *= math.pi
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def _convert(kind: str, raw: str):
    if kind == "str":
        return raw.strip()
    if kind == "int":
        v = raw.strip()
        if not re.fullmatch(r"[-+]?\d+", v):
            raise ValueError(f"not an integer: {raw!r}")
        return int(v)
    if kind == "real":
        return parse_real(raw)
    if kind == "reals":
        parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
        return tuple(parse_real(p) for p in parts)
    raise AssertionError(kind)


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    source: str = ""

    def __getitem__(self, key: tuple[str, str]):
        return self.values[key[0]][key[1]]

    def section(self, name: str) -> dict:
        return dict(self.values[name])

    @property
    def name(self) -> str:
        return self["experiment", "name"]

    @property
    def kind(self) -> str:
        return self["experiment", "kind"]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        values = {s: dict(v) for s, v in self.values.items()}
        values["checks"]["seed"] = int(seed)
        return ExperimentConfig(values, self.source)

    def as_dict(self) -> dict:
        return {s: {k: list(v) if isinstance(v, tuple) else v for k, v in sec.items()} for s, sec in self.values.items()}


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    where, section = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), n)
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), n)
    return where


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("content before the first [section] header", e.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as e:
        raise ConfigError(str(e).split(": ", 1)[-1], getattr(e, "lineno", None)) from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigError(f"cannot parse {e.errors[0][1] if e.errors else 'line'}", line) from None
    lines = _line_index(text)

    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)))
        for key in parser[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", lines.get((sec, key)))

    values: dict = {}
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        for key, (kind, default) in keys.items():
            if parser.has_option(sec, key):
                raw = parser.get(sec, key)
                try:
                    values[sec][key] = _convert(kind, raw)
                except ValueError as e:
                    raise ConfigError(f"[{sec}] {key}: {e}", lines.get((sec, key))) from None
            elif default is ...:
                raise ConfigError(f"missing required key {key!r} in [{sec}]", lines.get((sec, None)))
            else:
                values[sec][key] = default
    _validate(values, lines)
    return ExperimentConfig(values, source)


def _validate(v: dict, lines: dict):
    def fail(sec, key, msg):
        raise ConfigError(f"[{sec}] {key}: {msg}", lines.get((sec, key), lines.get((sec, None))))

    if v["experiment"]["kind"] not in KINDS:
        fail("experiment", "kind", f"must be one of {KINDS}")
    op = v["operator"]
    if op["n_modes"] < 1:
        fail("operator", "n_modes", "must be positive")
    if op["length"] <= 0:
        fail("operator", "length", "must be positive")
    if not 1 <= op["k"] <= op["n_modes"]:
        fail("operator", "k", f"must lie in 1..n_modes ({op['n_modes']})")
    nl = v["nonlinearity"]
    if bool(nl["name"]) == bool(nl["table"]):
        fail("nonlinearity", "name", "give exactly one of name or table")
    if nl["name"]:
        name = nl["name"]
        if "(" in name:
            try:
                name, params = parse_call(name)
            except InvalidArgument as e:
                fail("nonlinearity", "name", str(e))
            if nl["params"]:
                fail("nonlinearity", "params", "parameters given twice")
            nl["name"], nl["params"] = name, params
        if name not in REGISTRY:
            fail("nonlinearity", "name", f"unknown nonlinearity {name!r}; known: {', '.join(sorted(REGISTRY))}")
    if not 0.75 < v["constants"]["alpha"] < 1:
        fail("constants", "alpha", "must lie in (0.75, 1)")
    if v["constants"]["delta"] < 0:
        fail("constants", "delta", "must be nonnegative")
    ck = v["checks"]
    for key in ("ball_samples", "sphere_samples", "block_samples"):
        if ck[key] < 1:
            fail("checks", key, "must be positive")
    if ck["confirm_seeds"] < 0:
        fail("checks", "confirm_seeds", "must be nonnegative")
    if not ck["s_values"] or any(not 0 <= s <= 1 for s in ck["s_values"]):
        fail("checks", "s_values", "need values in [0, 1]")
    if ck["tolerance"] < 0 or ck["r_start"] <= 0 or ck["r_cap"] < ck["r_start"]:
        fail("checks", "r_start", "need tolerance >= 0 and 0 < r_start <= r_cap")
    it = v["integration"]
    if it["scheme"] not in SCHEMES:
        fail("integration", "scheme", f"must be one of {SCHEMES}")
    if not 0 < it["step"] <= it["t_end"]:
        fail("integration", "step", "need 0 < step <= t_end")
    if it["save_stride"] < 1:
        fail("integration", "save_stride", "must be positive")
    ob = v["orbit"]
    for key in ("epsilon", "attraction_step", "box_radius", "drift_step", "drift_t_end"):
        if ob[key] <= 0:
            fail("orbit", key, "must be positive")
    if ob["n_starts"] < 1:
        fail("orbit", "n_starts", "must be positive")


def bundled_configs() -> dict[str, Path]:
    root = resources.files("conley_resonance") / "configs"
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".ini")}


def resolve_config(ref: str) -> Path:
    """A path to an existing file, or the name of a bundled experiment."""
    path = Path(ref)
    if path.is_file():
        return path
    bundled = bundled_configs()
    if ref in bundled:
        return bundled[ref]
    raise ConfigError(f"no config file or bundled experiment named {ref!r}")


def load_config(ref: str) -> ExperimentConfig:
    path = resolve_config(ref)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    cfg = parse_config_text(text, str(path))
    table = cfg["nonlinearity", "table"]
    if table and not Path(table).is_absolute():
        cfg.values["nonlinearity"]["table"] = str((path.parent / table).resolve())
    return cfg
