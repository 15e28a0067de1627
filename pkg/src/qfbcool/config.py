"""INI run configuration with sections ``[model]``, ``[controller]``, ``[ensemble]``, ``[output]``.

Keys placed before the first section header are accepted as shorthands:
``preset`` (for ``[model] preset``) and ``controller`` (for
``[controller] kind``). Unknown keys are rejected; missing keys take the
defaults in :data:`SCHEMA`. Optional numeric keys accept ``auto``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controllers import KINDS, HysteresisThresholds, compute_tau_s
from .ensemble import INIT_SCHEMES, EnsembleConfig
from .errors import MissingRequired, TypeMismatch, UnknownKey
from .model import ModelSpec
from .systems import PRESETS, get_preset

_TOP = "__top__"
SHORTHANDS = {"preset": ("model", "preset"), "controller": ("controller", "kind")}


class _Req:
    def __repr__(self):
        return "<required>"


REQUIRED = _Req()

# (type, default); type is one of: int, float, bool, str, "opt_float", "float_list", or a tuple of choices.
SCHEMA: dict[str, dict[str, tuple]] = {
    "model": {
        "preset": (tuple(PRESETS), REQUIRED),
        "jx": (float, 1.0),
        "jy": (float, 1.0),
        "jz": (float, 2.0),
        "f0": (("default", "zero"), "default"),
        "mode": (("cooling", "heating"), "cooling"),
    },
    "controller": {
        "kind": (KINDS, REQUIRED),
        "gamma": ("opt_float", None),
        "beta": (float, 0.6),
        "epsilon": ("opt_float", None),
        "window_k": (int, 5000),
        "tau_s_override": ("opt_float", None),
    },
    "ensemble": {
        "n_initial": (int, 1000),
        "runs_per_initial": (int, 20),
        "T": (float, 20.0),
        "dt": (float, 1e-4),
        "master_seed": (int, 0),
        "sample_every": (int, 100),
        "init_scheme": (INIT_SCHEMES, "haar_pure"),
        "init_diag": ("float_list", None),
        "workers": (int, 1),
        "batch_size": (int, 256),
    },
    "output": {
        "dir": (str, "results"),
        "dump_trajectories": (bool, False),
        "plot_stub": (bool, False),
    },
}

_BOOLS = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


def _convert(section: str, key: str, raw: str):
    typ, _ = SCHEMA[section][key]
    text = raw.strip()
    where = f"[{section}] {key} = {raw!r}"
    try:
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        if typ is bool:
            return _BOOLS[text.lower()]
        if typ is str:
            return text
        if typ == "opt_float":
            return None if text.lower() in ("auto", "none", "") else float(text)
        if typ == "float_list":
            if text.lower() in ("auto", "none", ""):
                return None
            return tuple(float(v) for v in text.replace(";", ",").split(","))
    except (ValueError, KeyError):
        raise TypeMismatch(f"{where}: expected {getattr(typ, '__name__', typ)}") from None
    if text not in typ:
        raise TypeMismatch(f"{where}: expected one of {', '.join(typ)}")
    return text


def _emit_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


@dataclass
class RunConfig:
    """Fully defaulted configuration, ``values[section][key]``."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def set(self, section: str, key: str, value) -> None:
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise UnknownKey(f"unknown key [{section}] {key}")
        if isinstance(value, str):
            value = _convert(section, key, value)
        self.values[section][key] = value

    def build_model(self) -> ModelSpec:
        m = self["model"]
        return get_preset(m["preset"], jx=m["jx"], jy=m["jy"], jz=m["jz"], f0=m["f0"], mode=m["mode"])

    def resolved(self, spec: ModelSpec | None = None) -> "RunConfig":
        """Copy with ``auto`` controller values replaced by the numbers actually used."""
        spec = spec or self.build_model()
        out = RunConfig({s: dict(v) for s, v in self.values.items()})
        c = out["controller"]
        if c["kind"] != "free":
            thr = HysteresisThresholds.from_model(spec, c["gamma"])
            c["gamma"] = thr.gamma
            if c["epsilon"] is None:
                c["epsilon"] = abs(spec.delta)
        return out

    def controller_params(self) -> dict:
        c = self["controller"]
        if c["kind"] == "free":
            return {}
        params = {"gamma": c["gamma"], "beta": c["beta"], "epsilon": c["epsilon"]}
        if c["kind"] != "ideal":
            params["tau_s_override"] = c["tau_s_override"]
        if c["kind"] == "windowed":
            params["window_k"] = c["window_k"]
        return params

    def tau_s(self, spec: ModelSpec) -> float | None:
        c = self["controller"]
        if c["kind"] in ("free", "ideal"):
            return None
        if c["tau_s_override"] is not None:
            return c["tau_s_override"]
        return compute_tau_s(c["beta"], abs(spec.delta) if c["epsilon"] is None else c["epsilon"])

    def to_ensemble_config(self) -> EnsembleConfig:
        m, e = self["model"], self["ensemble"]
        init_state = None
        if e["init_scheme"] == "fixed":
            if e["init_diag"] is None:
                raise MissingRequired("[ensemble] init_scheme = fixed requires init_diag")
            init_state = np.diag(np.asarray(e["init_diag"], dtype=float)).astype(complex)
        model_params = {"f0": m["f0"], "mode": m["mode"]}
        if m["preset"] == "heisenberg":
            model_params.update(jx=m["jx"], jy=m["jy"], jz=m["jz"])
        return EnsembleConfig(
            preset=m["preset"],
            model_params=model_params,
            controller=self["controller"]["kind"],
            controller_params=self.controller_params(),
            n_initial=e["n_initial"],
            runs_per_initial=e["runs_per_initial"],
            T=e["T"],
            dt=e["dt"],
            master_seed=e["master_seed"],
            sample_every=e["sample_every"],
            init_scheme=e["init_scheme"],
            init_state=init_state,
        )


def defaults() -> RunConfig:
    return RunConfig({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})


def parse_config_text(text: str, overrides: dict | None = None, check_required: bool = True) -> RunConfig:
    """Parse INI text; ``overrides`` maps ``(section, key)`` to raw strings or values and wins."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(f"[{_TOP}]\n" + text)
    except configparser.Error as exc:
        raise TypeMismatch(f"malformed config: {exc}") from None
    cfg = defaults()
    for section in cp.sections():
        for key, raw in cp.items(section):
            if section == _TOP:
                if key not in SHORTHANDS:
                    raise UnknownKey(f"unknown top-level key {key!r}; only {', '.join(SHORTHANDS)} are allowed")
                cfg.set(*SHORTHANDS[key], raw)
            elif section not in SCHEMA:
                raise UnknownKey(f"unknown section [{section}]")
            else:
                cfg.set(section, key, raw)
    for (section, key), value in (overrides or {}).items():
        cfg.set(section, key, value)
    if check_required:
        for section, keys in SCHEMA.items():
            for key in keys:
                if cfg[section][key] is REQUIRED:
                    raise MissingRequired(f"missing required key [{section}] {key}")
    return cfg


def parse_config(path, overrides: dict | None = None) -> RunConfig:
    return parse_config_text(Path(path).read_text(), overrides)


def emit_config(cfg: RunConfig) -> str:
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = cfg[section][key]
            if value is REQUIRED:
                lines.append(f"# {key} = (required)")
            else:
                lines.append(f"{key} = {_emit_value(value)}")
        lines.append("")
    return "\n".join(lines)
