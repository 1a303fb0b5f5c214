"""Flat ``key = value`` configuration files.

One assignment per line, ``#`` comments, section prefixes select the block
(``npath.c_in = 2pF``, ``hr2.ratios = 5:7:5``, ``loop = off``).  Values
accept SI suffixes; ``none`` clears an optional value.  Study parameters
(sweep grid, offsets, worker count) live in the same file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

import numpy as np

from .blocks import (Hr1Params, Hr2Params, NPathParams, PwmParams, ReceiverConfig, UpconverterParams)
from .errors import ConfigError
from .units import parse_quantity

_SECTIONS = {"npath": NPathParams, "hr2": Hr2Params, "hr1": Hr1Params, "pwm": PwmParams, "up": UpconverterParams}

_INT_FIELDS = {"npath.n_paths", "hr2.rotation", "pwm.grid_size", "up.sign"}
_BOOL_FIELDS = {"npath.differential"}
_TUPLE_FIELDS = {"hr2.ratios", "hr1.ratios"}
_OPTIONAL = {"npath.c_bb", "npath.r_bb", "hr2.c_out", "hr2.i_max", "hr1.i_max"}


@dataclass(frozen=True)
class StudyParams:
    sweep_start: float = 300e6
    sweep_stop: float = 3e9
    sweep_points: int = 271
    offset: float = 1e6
    span: float = 30e6
    offset_points: int = 271
    jobs: int = 1
    compress_harmonic: int = 3
    compress_blocker_offset: float = 20e6
    compress_desired_offset: float = 10e6
    compress_power_start: float = -40.0
    compress_power_stop: float = 20.0
    compress_power_step: float = 1.0
    impedance_freq: float | None = None  # None -> f_lo

    def __post_init__(self):
        if not self.sweep_start < self.sweep_stop:
            raise ConfigError("sweep.start must be below sweep.stop", key="sweep.start")
        if self.sweep_points < 2:
            raise ConfigError("sweep.points must be >= 2", key="sweep.points")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1", key="jobs")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.sweep_start, self.sweep_stop, self.sweep_points)


_STUDY_KEYS = {
    "sweep.start": ("sweep_start", float), "sweep.stop": ("sweep_stop", float),
    "sweep.points": ("sweep_points", int), "offset": ("offset", float), "span": ("span", float),
    "offset_points": ("offset_points", int), "jobs": ("jobs", int),
    "compress.harmonic": ("compress_harmonic", int),
    "compress.blocker_offset": ("compress_blocker_offset", float),
    "compress.desired_offset": ("compress_desired_offset", float),
    "compress.power_start": ("compress_power_start", float),
    "compress.power_stop": ("compress_power_stop", float),
    "compress.power_step": ("compress_power_step", float),
    "impedance.freq": ("impedance_freq", "optfloat"),
}
_TOP_KEYS = {"loop", "upconverter_mode"}


@dataclass(frozen=True)
class Settings:
    receiver: ReceiverConfig
    study: StudyParams
    explicit: tuple = ()  # keys set by the user, in order


def receiver_keys() -> list[str]:
    keys = []
    for sec, cls in _SECTIONS.items():
        keys += [f"{sec}.{f.name}" for f in fields(cls)]
    return keys + sorted(_TOP_KEYS)


def all_keys() -> list[str]:
    return receiver_keys() + list(_STUDY_KEYS)


def parse_text(text: str) -> list[tuple[str, str, int, int, int]]:
    """``[(key, raw_value, line, key_column, value_column)]``; duplicate keys are an error."""
    out, seen = [], {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line.strip()!r}", lineno, col)
        key, rest = line.split("=", 1)
        key = key.strip()
        val = rest.strip()
        if not key:
            raise ConfigError("missing key", lineno, col)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first set on line {seen[key]})", lineno, col, key)
        seen[key] = lineno
        vcol = line.index("=") + 2 + len(rest) - len(rest.lstrip())
        out.append((key, val, lineno, col, vcol))
    return out


def _convert(key: str, raw: str, kind):
    low = raw.lower()
    if kind == "optfloat" or key in _OPTIONAL:
        if low == "none":
            return None
        return parse_quantity(raw)
    if key in _BOOL_FIELDS or kind is bool:
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if key in _TUPLE_FIELDS:
        parts = [p for p in raw.replace(":", ",").split(",") if p.strip()]
        vals = [parse_quantity(p) for p in parts]
        return tuple(int(v) if float(v).is_integer() else v for v in vals)
    if key in _INT_FIELDS or kind is int:
        v = parse_quantity(raw)
        if v != int(v):
            raise ValueError(f"not an integer: {raw!r}")
        return int(v)
    return parse_quantity(raw)


def resolve(pairs, base: Settings | None = None) -> Settings:
    """Apply ``(key, raw, line, key_col, value_col)`` assignments on top of ``base`` (defaults)."""
    base = base or Settings(ReceiverConfig(), StudyParams())
    sections = {sec: {} for sec in _SECTIONS}
    top, study = {}, {}
    explicit = list(base.explicit)
    for key, raw, line, kcol, col in pairs:
        try:
            if key == "loop":
                low = raw.lower()
                if low not in ("on", "off", "true", "false", "1", "0"):
                    raise ValueError(f"loop must be on or off, got {raw!r}")
                top["loop_enabled"] = low in ("on", "true", "1")
            elif key == "upconverter_mode":
                if raw not in ("pwm_lo", "square_lo"):
                    raise ValueError(f"upconverter_mode must be pwm_lo or square_lo, got {raw!r}")
                top["upconverter_mode"] = raw
            elif key in _STUDY_KEYS:
                name, kind = _STUDY_KEYS[key]
                study[name] = _convert(key, raw, kind)
            elif "." in key and key.split(".", 1)[0] in _SECTIONS:
                sec, name = key.split(".", 1)
                if name not in {f.name for f in fields(_SECTIONS[sec])}:
                    raise ConfigError(f"unknown key {key!r}", line, kcol, key)
                sections[sec][name] = _convert(key, raw, None)
            else:
                raise ConfigError(f"unknown key {key!r}", line, kcol, key)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", line, col, key) from None
        if key not in explicit:
            explicit.append(key)
    rc = base.receiver
    try:
        kw = {sec: replace(getattr(rc, sec), **vals) for sec, vals in sections.items() if vals}
        rc = replace(rc, **kw, **top)
        st = replace(base.study, **study)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return Settings(rc, st, tuple(explicit))


def load(text: str = "", overrides=()) -> Settings:
    """Parse a config file body plus ``key=value`` override strings."""
    settings = resolve(parse_text(text))
    seen = {}
    pairs = []
    for i, item in enumerate(overrides, 1):
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}", key=item)
        k, v = (s.strip() for s in item.split("=", 1))
        if k in seen and seen[k] != v:
            raise ConfigError(f"conflicting --set values for {k!r}", key=k)
        seen[k] = v
        pairs.append((k, v, None, None, None))
    return resolve(pairs, settings) if pairs else settings


def effective(settings: Settings) -> list[tuple[str, object, str]]:
    """Every parameter as ``(key, value, origin)``, origin in {default, set, derived}."""
    rc = settings.receiver
    rows = []
    for sec, cls in _SECTIONS.items():
        obj = getattr(rc, sec)
        for f in fields(cls):
            key = f"{sec}.{f.name}"
            val = getattr(obj, f.name)
            origin = "set" if key in settings.explicit else "default"
            rows.append((key, val, origin))
    rows.append(("loop", "on" if rc.loop_enabled else "off", "set" if "loop" in settings.explicit else "default"))
    rows.append(("upconverter_mode", rc.upconverter_mode,
                 "set" if "upconverter_mode" in settings.explicit else "default"))
    for key, (name, _) in _STUDY_KEYS.items():
        rows.append((key, getattr(settings.study, name), "set" if key in settings.explicit else "default"))
    rows.append(("derived.c_bb", rc.npath.resolved_c_bb, "derived"))
    rows.append(("derived.hr2_c_out", rc.hr2.resolved_c_out(rc.npath.f_lo), "derived"))
    return rows


def _canonical(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ":".join(_canonical(v) for v in value)
    return str(value)


_NO_HASH = {"jobs"}  # execution only, results do not depend on it


def config_hash(settings: Settings) -> str:
    text = "\n".join(f"{k}={_canonical(v)}" for k, v, _ in effective(settings) if k not in _NO_HASH)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _text_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return _canonical(value)


def dump(settings: Settings) -> str:
    """Config file text that :func:`load` maps back to the same settings."""
    rows = [(k, v) for k, v, o in effective(settings) if o != "derived"]
    return "".join(f"{k} = {_text_value(v)}\n" for k, v in rows)


def render(settings: Settings) -> str:
    rows = effective(settings)
    width = max(len(k) for k, _, _ in rows)
    return "\n".join(f"{k:<{width}} = {_canonical(v):<24} # {o}" for k, v, o in rows) + "\n"
