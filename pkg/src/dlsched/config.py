"""Config-file loading: flat key-value with dotted sections, or JSON.

Both formats map onto the same SystemConfig fields. A flat file looks like

    users.n_rt = 10
    power.p_avg = 10
    control.scheduler = onoff
    run.horizon = 200000

Plain field names (`p_avg = 10`) are accepted too, and a JSON file may be
either a flat object of field names or nested by section. Environment
variables prefixed DLSCHED_ (e.g. DLSCHED_SEED=7) override file values.
"""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path

from .engine import ConfigError, SystemConfig

__all__ = ["ENV_PREFIX", "SECTION_KEYS", "load_config", "load_sweep_spec",
           "parse_flat_text", "SweepSpec"]

ENV_PREFIX = "DLSCHED_"

# Dotted section.key -> SystemConfig field.
SECTION_KEYS = {
    "users.n_rt": "n_rt",
    "users.n_nrt": "n_nrt",
    "traffic.lambda_rt": "lambda_rt",
    "traffic.lambda_nrt": "lambda_nrt",
    "traffic.packet_bits": "packet_bits",
    "traffic.packet_model": "packet_model",
    "traffic.packet_choices": "packet_choices",
    "qos.delivery_target": "q",
    "channel.kind": "channel",
    "channel.p_on": "p_on",
    "channel.mean_gain": "mean_gain",
    "channel.gamma_max": "gamma_max",
    "channel.states": "states",
    "channel.probs": "probs",
    "power.p_avg": "p_avg",
    "power.p_max": "p_max",
    "slot.length": "slot_len",
    "control.b_max": "b_max",
    "control.scheduler": "scheduler",
    "control.heavy_traffic": "heavy_traffic",
    "control.admit_all": "admit_all",
    "control.fixedp_bias": "fixedp_bias",
    "run.horizon": "horizon",
    "run.seed": "seed",
    "run.burn_in": "burn_in",
    "run.sample_every": "sample_every",
    "run.debug_checks": "debug_checks",
}

_FIELDS = {f.name: f for f in dataclasses.fields(SystemConfig)}
_INT_FIELDS = {"n_rt", "n_nrt", "horizon", "seed", "burn_in", "sample_every"}
_BOOL_FIELDS = {"heavy_traffic", "admit_all", "debug_checks"}


def _parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except (json.JSONDecodeError, ValueError):
        low = text.lower()
        if low in ("true", "yes", "on"):
            return True
        if low in ("false", "no", "off"):
            return False
        return text


def _field_for(key: str, lineno=None) -> str:
    key = key.strip()
    if key in SECTION_KEYS:
        return SECTION_KEYS[key]
    if key in _FIELDS:
        return key
    where = f" (line {lineno})" if lineno is not None else ""
    raise ConfigError(f"unknown configuration key {key!r}{where}")


def _coerce(field: str, value):
    if field in _BOOL_FIELDS:
        if isinstance(value, bool):
            return value
        if isinstance(value, (int, float)):
            return bool(value)
        raise ConfigError(f"{field}: expected a boolean, got {value!r}")
    if field in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{field}: expected an integer, got {value!r}")
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{field}: expected an integer, got {value!r}")
        return int(value)
    return value


def parse_flat_text(text: str) -> dict:
    """Flat `key = value` lines into a field dict. '#' starts a comment."""
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' (line {lineno}): {raw!r}")
        key, val = line.split("=", 1)
        field = _field_for(key, lineno)
        fields[field] = _coerce(field, _parse_value(val))
    return fields


def _flatten_json(obj: dict) -> dict:
    fields = {}
    for key, value in obj.items():
        if isinstance(value, dict) and key not in _FIELDS:
            for sub, v in value.items():
                field = _field_for(f"{key}.{sub}")
                fields[field] = _coerce(field, v)
        else:
            field = _field_for(key)
            fields[field] = _coerce(field, value)
    return fields


def _env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        field = name[len(ENV_PREFIX):].lower()
        if field not in _FIELDS:
            raise ConfigError(f"unknown field in environment override {name}")
        out[field] = _coerce(field, _parse_value(raw))
    return out


def config_from_fields(fields: dict, apply_env: bool = True) -> SystemConfig:
    if apply_env:
        fields = dict(fields, **_env_overrides())
    cfg = SystemConfig(**fields)
    cfg.validate()
    return cfg


def load_config(path, apply_env: bool = True) -> SystemConfig:
    """Load a run configuration from a flat key-value or JSON file."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        fields = _flatten_json(obj)
    else:
        fields = parse_flat_text(text)
    return config_from_fields(fields, apply_env=apply_env)


SWEEP_AXES = ("p_avg", "q", "n_users", "n_rt_complexity")


@dataclasses.dataclass
class SweepSpec:
    """One experiment sweep: a base config, an axis, values, seeds."""

    base: SystemConfig
    axis: str
    values: list
    seeds: list
    schedulers: list

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"axis: must be one of {SWEEP_AXES}")
        if not self.values or not self.seeds:
            raise ConfigError("sweep needs non-empty values and seeds")
        if not self.schedulers:
            raise ConfigError("sweep needs at least one scheduler")

    def cell_config(self, value, seed: int, scheduler: str) -> SystemConfig:
        """Config for one sweep cell; schedulers share the same streams."""
        fields = self.base.to_dict()
        fields.update(seed=int(seed), scheduler=scheduler)
        if self.axis == "p_avg":
            fields["p_avg"] = float(value)
        elif self.axis == "q":
            fields["q"] = float(value)
            fields["fixedp_bias"] = None
        elif self.axis == "n_users":
            n_rt = int(value) - self.base.n_nrt
            if n_rt < 0:
                raise ConfigError(f"n_users value {value} below n_nrt")
            fields["n_rt"] = n_rt
        else:  # n_rt_complexity
            fields["n_rt"] = int(value)
            fields["lambda_rt"] = 1.0  # keep every deadline user eligible
        cfg = SystemConfig(**fields)
        cfg.validate()
        return cfg


def load_sweep_spec(path) -> SweepSpec:
    """Sweep spec from JSON ({"base": {...}, "axis": ..., ...}) or flat text
    with `base.`-prefixed keys for the base config."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        base_fields = _flatten_json(obj.get("base", {}))
        axis = obj.get("axis")
        values = obj.get("values", [])
        seeds = obj.get("seeds", [])
        schedulers = obj.get("schedulers", ["onoff", "fixedp"])
    else:
        base_lines, top = [], {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, val = (s.strip() for s in line.split("=", 1))
            if key.startswith("base."):
                base_lines.append(f"{key[len('base.'):]} = {val}")
            else:
                top[key] = _parse_value(val)
        base_fields = parse_flat_text("\n".join(base_lines))
        axis = top.get("axis")
        values = top.get("values", [])
        seeds = top.get("seeds", [])
        schedulers = top.get("schedulers", ["onoff", "fixedp"])
    base = config_from_fields(base_fields, apply_env=False)
    return SweepSpec(base=base, axis=axis, values=list(values),
                     seeds=[int(s) for s in seeds],
                     schedulers=list(schedulers))
