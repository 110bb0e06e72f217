"""Run configuration: an INI-style file with one section per module.

Unknown sections or keys are rejected so that typos fail loudly.  Every key
is optional; absent keys keep the documented defaults (``halodeconv
config`` prints them all).
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from .objdeconv import ObjectSolverConfig
from .pipeline import CoreConfig, NoiseConfig, PipelineConfig
from .psfdeconv import PsfSolverConfig
from .simulator import SceneSpec


class ConfigError(ValueError):
    pass


@dataclass
class DetectionConfig:
    threshold: float = 5.0
    iso_thresh: float = 0.10
    vicinity: int = 3


@dataclass
class RunSection:
    seed: int = 1
    input: Optional[str] = None
    output: Optional[str] = None


@dataclass
class RunConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    simulator: SceneSpec = field(default_factory=SceneSpec)
    run: RunSection = field(default_factory=RunSection)

    def sections(self):
        """Map of section name to the dataclass instance it configures."""
        p = self.pipeline
        return {
            "noise": p.noise,
            "core": p.core,
            "object": p.object,
            "psf": p.psf,
            "pipeline": p,
            "detection": self.detection,
            "simulator": self.simulator,
            "run": self.run,
        }


_NESTED = {"noise", "core", "object", "psf"}


def _keys(obj, section):
    names = [f.name for f in dataclasses.fields(obj)]
    if section == "pipeline":
        names = [n for n in names if n not in _NESTED]
    return names


def _field_type(obj, name):
    for f in dataclasses.fields(obj):
        if f.name == name:
            return f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    raise KeyError(name)


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(type_name, text):
    text = text.strip()
    optional = type_name.startswith("Optional[")
    if optional:
        if text.lower() in ("", "none", "auto"):
            return None
        type_name = type_name[len("Optional["):-1]
    if type_name == "float":
        return float(text)
    if type_name == "int":
        return int(text)
    if type_name == "bool":
        return _parse_bool(text)
    if type_name == "str":
        return text
    if type_name.startswith("Tuple[float"):
        return tuple(float(v) for v in text.replace(",", " ").split())
    raise ConfigError(f"unsupported config type {type_name}")


def _format(value):
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return str(value)


def load_config(path=None, text=None):
    """Parse a config file (or string) into a :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        if text is not None:
            parser.read_string(text)
        elif path is not None:
            with open(path) as fh:
                parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    cfg = RunConfig()
    sections = cfg.sections()
    for name in parser.sections():
        if name not in sections:
            raise ConfigError(
                f"unknown config section [{name}]; expected one of {sorted(sections)}")
        obj = sections[name]
        allowed = _keys(obj, name)
        for key, raw in parser.items(name):
            if key not in allowed:
                raise ConfigError(
                    f"unknown key {key!r} in [{name}]; allowed: {', '.join(allowed)}")
            try:
                value = _convert(_field_type(obj, key), raw)
            except ValueError as exc:
                raise ConfigError(f"[{name}] {key}: {exc}") from exc
            setattr(obj, key, value)
    try:
        cfg.pipeline.object.validate()
        cfg.pipeline.psf.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def dump_config(cfg):
    """Render a config with every key spelled out (round-trips via load)."""
    lines = []
    for name, obj in cfg.sections().items():
        lines.append(f"[{name}]")
        for key in _keys(obj, name):
            lines.append(f"{key} = {_format(getattr(obj, key))}")
        lines.append("")
    return "\n".join(lines)


__all__ = ["ConfigError", "DetectionConfig", "RunConfig", "load_config",
           "dump_config", "NoiseConfig", "CoreConfig", "ObjectSolverConfig",
           "PsfSolverConfig"]
