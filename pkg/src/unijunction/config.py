"""Presets and the sectioned ``key = value`` configuration format.

A configuration file is read with :mod:`configparser`. Recognised sections
and keys (every key optional; missing keys keep the preset value):

``[params]``      mu, a0, a1, a2, beta, omega, gamma, m
``[g]``           a, b, c
``[integrator]``  rtol, atol, h_init, h_max, t_transient, t_record, sample_dt,
                  blowup_bound, max_steps
``[lyapunov]``    renorm_interval, total_time, zero_threshold
``[circuit]``     v_s, v_bias, r, r2, rb2, cap, ind, alpha_scale, beta1, v_scale
``[run]``         preset, seed (written to snapshots; ``preset`` selects the
                  base the other sections override)

Inline overrides use ``section.key=value``, e.g. ``params.m=0.3``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .chaos import DEFAULT_RENORM_INTERVAL, DEFAULT_TOTAL_TIME, DEFAULT_ZERO_THRESHOLD
from .errors import ParseError
from .integrate import IntegratorConfig
from .model import PAPER_CIRCUIT, PAPER_G, PAPER_PARAMS, CircuitValues, GCoeffs, ModelParams

DEFAULT_PRESET = "paper-2018"


@dataclass(frozen=True)
class LyapunovSettings:
    renorm_interval: float = DEFAULT_RENORM_INTERVAL
    total_time: float = DEFAULT_TOTAL_TIME
    zero_threshold: float = DEFAULT_ZERO_THRESHOLD


@dataclass(frozen=True)
class RunConfig:
    preset: str
    params: ModelParams
    g: GCoeffs
    integrator: IntegratorConfig
    lyapunov: LyapunovSettings
    circuit: CircuitValues
    seed: int = 0
    extra: dict = field(default_factory=dict)  # command-specific options

    def sections(self):
        return {
            "params": self.params,
            "g": self.g,
            "integrator": self.integrator,
            "lyapunov": self.lyapunov,
            "circuit": self.circuit,
        }


PRESETS = {
    "paper-2018": dict(params=PAPER_PARAMS, g=PAPER_G, circuit=PAPER_CIRCUIT),
}

# published Lyapunov spectra for a preset, keyed by m; used for comparison reports
REFERENCE_SPECTRA = {
    "paper-2018": {
        0.0: (0.0, -0.10, -0.12, -202.14),
        0.3: (0.25, 0.0, -1.5, -212.24),
        0.5: (1.23, 0.0, -1.2, -207.09),
        0.57: (0.0, 0.0, -0.026, -206.2),
    },
}


def reference_spectrum(preset, m, tol=1e-12):
    for m_ref, spec in REFERENCE_SPECTRA.get(preset, {}).items():
        if abs(m_ref - m) <= tol:
            return spec
    return None

_SECTION_TYPES = {
    "params": ModelParams,
    "g": GCoeffs,
    "integrator": IntegratorConfig,
    "lyapunov": LyapunovSettings,
    "circuit": CircuitValues,
}


def _coerce(cls, key, text):
    names = {f.name: f for f in fields(cls)}
    if key not in names:
        raise ParseError(f"unknown key {key!r} for section of {cls.__name__}")
    try:
        if key == "max_steps":
            return int(float(text))
        return float(text)
    except ValueError:
        raise ParseError(f"{key}: cannot parse {text!r} as a number") from None


def base_config(preset=DEFAULT_PRESET):
    try:
        p = PRESETS[preset]
    except KeyError:
        raise ParseError(f"unknown preset {preset!r}; known: {', '.join(PRESETS)}") from None
    return RunConfig(preset=preset, params=p["params"], g=p["g"],
                     integrator=IntegratorConfig(), lyapunov=LyapunovSettings(),
                     circuit=p["circuit"])


def apply_overrides(cfg: RunConfig, values):
    """Apply ``{section: {key: text}}`` on top of ``cfg``."""
    updates = {}
    seed = cfg.seed
    for section, items in values.items():
        if section == "run":
            if "seed" in items:
                seed = int(items["seed"])
            continue
        if section not in _SECTION_TYPES:
            raise ParseError(f"unknown section [{section}]")
        cls = _SECTION_TYPES[section]
        kw = {k: _coerce(cls, k, v) for k, v in items.items()}
        try:
            updates[section] = replace(getattr(cfg, section), **kw)
        except ValueError as exc:
            raise ParseError(f"[{section}]: {exc}") from None
    return replace(cfg, seed=seed, **updates)


def read_config_file(path):
    """Parse a config file into ``{section: {key: text}}``."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ParseError(f"{path}: {exc}") from None
    return {s: dict(parser.items(s)) for s in parser.sections()}


def parse_overrides(items):
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            raise ParseError(f"override {item!r} is not of the form section.key=value")
        out.setdefault(section, {})[name] = value.strip()
    return out


def resolve(preset=None, config_path=None, overrides=()):
    """Preset, then file, then inline overrides; the file's ``[run] preset``
    is used when ``preset`` is not given."""
    file_values = read_config_file(config_path) if config_path else {}
    preset = preset or file_values.get("run", {}).get("preset") or DEFAULT_PRESET
    cfg = base_config(preset)
    cfg = apply_overrides(cfg, file_values)
    return apply_overrides(cfg, parse_overrides(overrides))


def write_config(cfg: RunConfig, path, command=None):
    """Write ``cfg`` in the same format :func:`resolve` reads back."""
    parser = configparser.ConfigParser()
    run = {"preset": cfg.preset, "seed": str(cfg.seed)}
    if command:
        run["command"] = command
    for k, v in sorted(cfg.extra.items()):
        run[f"option_{k}"] = str(v)
    parser["run"] = run
    for name, obj in cfg.sections().items():
        parser[name] = {f.name: repr(getattr(obj, f.name)) for f in fields(obj)}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def load_circuit(path):
    """CircuitValues from a file with a ``[circuit]`` section."""
    values = read_config_file(path)
    if "circuit" not in values:
        raise ParseError(f"{path}: no [circuit] section")
    return apply_overrides(base_config(), {"circuit": values["circuit"]}).circuit
