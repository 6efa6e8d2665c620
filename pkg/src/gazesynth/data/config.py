"""Plain-text ``key = value`` run configuration.

Lines starting with ``#`` are comments.  Top-level keys set ``RunConfig``
fields; dotted keys address the nested blocks, e.g. ``diffusion.epochs = 5``
or ``fix_gan.latent_dim = 16``.  Values are parsed against the dataclass
field types, so ``none`` is accepted for optional fields.
"""
from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .simulator import TASKS, TaskSettings


class ConfigError(ValueError):
    pass


def parse_key_values(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def _coerce(value: str, tp, key: str):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value.lower() in ("none", "null", ""):
            return None
        return _coerce(value, args[0], key)
    if origin is tuple:
        parts = [p.strip() for p in value.strip("()[] ").split(",") if p.strip()]
        inner = typing.get_args(tp)[0]
        return tuple(_coerce(p, inner, key) for p in parts)
    try:
        if tp is bool:
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        if tp is int:
            return int(value)
        if tp is float:
            return float(value)
        if tp is str:
            return value
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {tp.__name__}") from None
    raise ConfigError(f"{key}: unsupported field type {tp!r}")


def coerce_dataclass(cls, values: dict[str, str]):
    """Build ``cls`` from string values, rejecting unknown keys."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} key(s): {', '.join(unknown)}")
    kwargs = {k: _coerce(v, hints[k], k) for k, v in values.items()}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from None


def _section_types():
    from ..diffusion.training import DiffusionTrainConfig
    from ..gan import GanConfig
    return {"diffusion": DiffusionTrainConfig, "fix_gan": GanConfig, "sac_gan": GanConfig}


def _default_diffusion():
    from ..diffusion.training import DiffusionTrainConfig
    return DiffusionTrainConfig()


def _default_fix_gan():
    from ..gan import GanConfig
    return GanConfig(kind="fixation")


def _default_sac_gan():
    from ..gan import GanConfig
    return GanConfig(kind="saccade")


@dataclass
class RunConfig(TaskSettings):
    """Task settings for the simulator plus the model blocks and I/O paths."""

    n_subjects: int = 2
    sessions: int = 1
    dispersion_deg: float = 1.0
    min_fix_ms: float = 100.0
    bin_ms: float = 80.0
    precision_method: str = "s2s"
    data_dir: str = "data"
    model_dir: str = "models"
    diffusion: object = field(default_factory=_default_diffusion)
    fix_gan: object = field(default_factory=_default_fix_gan)
    sac_gan: object = field(default_factory=_default_sac_gan)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        n = self.duration_s * self.rate_hz
        if n <= 0 or abs(n - round(n)) > 1e-9:
            raise ValueError("duration_s * rate_hz must be a positive integer")
        if self.precision_method not in ("s2s", "centroid"):
            raise ValueError("precision_method must be 's2s' or 'centroid'")

    def settings(self) -> TaskSettings:
        names = [f.name for f in dataclasses.fields(TaskSettings)]
        return TaskSettings(**{k: getattr(self, k) for k in names})


_NESTED = ("diffusion", "fix_gan", "sac_gan")


def config_from_mapping(values: dict[str, str]) -> RunConfig:
    top = {k: v for k, v in values.items() if "." not in k}
    sections: dict[str, dict[str, str]] = {s: {} for s in _NESTED}
    for k, v in values.items():
        if "." in k:
            sec, sub = k.split(".", 1)
            if sec not in sections:
                raise ConfigError(f"unknown config section {sec!r} in key {k!r}")
            sections[sec][sub] = v
    for k in _NESTED:
        if k in top:
            raise ConfigError(f"{k} is a section; set its fields as '{k}.<field> = value'")
    base = RunConfig()
    kw = {}
    types_ = _section_types()
    for sec, sub in sections.items():
        current = dataclasses.asdict(getattr(base, sec))
        current = {k: str(v) for k, v in current.items()}
        current.update(sub)
        kw[sec] = coerce_dataclass(types_[sec], current)
    hints = typing.get_type_hints(RunConfig)
    names = {f.name for f in dataclasses.fields(RunConfig)} - set(_NESTED)
    unknown = sorted(set(top) - names)
    if unknown:
        raise ConfigError(f"unknown RunConfig key(s): {', '.join(unknown)}")
    for k, v in top.items():
        kw[k] = _coerce(v, hints[k], k)
    try:
        return RunConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    return config_from_mapping(parse_key_values(Path(path).read_text()))


def _fmt_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    lines = ["# run configuration (key = value; dotted keys address nested blocks)"]
    for f in dataclasses.fields(cfg):
        if f.name in _NESTED:
            continue
        lines.append(f"{f.name} = {_fmt_value(getattr(cfg, f.name))}")
    for sec in _NESTED:
        lines.append("")
        for k, v in dataclasses.asdict(getattr(cfg, sec)).items():
            lines.append(f"{sec}.{k} = {_fmt_value(v)}")
    return "\n".join(lines) + "\n"
