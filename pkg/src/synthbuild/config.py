"""Dataset configuration: parsing, defaults, validation and seed derivation.

The whole pipeline is driven by one JSON document. Every key is optional
except ``samples``; unknown keys are logged and ignored so that newer configs
still load on older installs.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .massing import TypologyClass

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class ConfigError(ValueError):
    """Raised for malformed, mistyped or out-of-domain configuration.

    ``kind`` is one of ``"syntax"``, ``"type"`` or ``"domain"``; ``problems``
    lists every individual message.
    """

    def __init__(self, kind: str, problems: list[str]):
        self.kind = kind
        self.problems = list(problems)
        super().__init__(f"{kind} error: " + "; ".join(self.problems))


@dataclass(frozen=True)
class CameraConfig:
    yaw_range_deg: tuple[float, float] = (40.0, 100.0)
    elevation_range_deg: tuple[float, float] = (10.0, 35.0)
    fov_deg: float = 50.0
    framing_margin: float = 1.1


@dataclass(frozen=True)
class LightConfig:
    azimuth_range_deg: tuple[float, float] = (0.0, 360.0)
    altitude_range_deg: tuple[float, float] = (20.0, 70.0)
    color_range: tuple[float, float] = (0.8, 1.0)
    strength_range: tuple[float, float] = (0.6, 1.4)


@dataclass(frozen=True)
class EmitFlags:
    render_png: bool = True
    segmentation_png: bool = True
    depth_png: bool = True
    depth_float: bool = True
    normals_png: bool = True
    mesh_obj: bool = True
    cloud_ply: bool = True
    metadata_json: bool = True
    depth_float_format: str = "exr"
    cloud_binary: bool = False

    def any_view_output(self) -> bool:
        return any((self.render_png, self.segmentation_png, self.depth_png,
                    self.depth_float, self.normals_png))


@dataclass(frozen=True)
class GrammarConfig:
    """Architectural proportions used by the massing and facade rules (meters)."""

    skyscraper_aspect: float = 3.0
    courtyard_inset: float = 2.0
    courtyard_min: float = 2.0
    wing_min_width: float = 3.0
    facade_spacing: float = 2.5
    facade_margin: float = 0.6
    p_balcony: float = 0.3
    max_retries: int = 64


ALL_CLASSES: tuple[TypologyClass, ...] = tuple(TypologyClass)


@dataclass(frozen=True)
class DatasetConfig:
    samples: int
    seed: int = 0
    classes: tuple[TypologyClass, ...] = ALL_CLASSES
    lod: int = 2
    image_size: int = 500
    views_per_model: int = 1
    points_per_cloud: int = 2048
    min_width: float = 10.0
    max_width: float = 30.0
    min_length: float = 10.0
    max_length: float = 30.0
    min_height: float = 6.0
    max_height: float = 90.0
    floor_height: float = 3.0
    use_materials: bool = True
    textures_dir: str | None = None
    modules_dir: str | None = None
    p_uniform_texture: float = 0.5
    cull_hidden_faces: bool = False
    emit: EmitFlags = field(default_factory=EmitFlags)
    camera: CameraConfig = field(default_factory=CameraConfig)
    light: LightConfig = field(default_factory=LightConfig)
    grammar: GrammarConfig = field(default_factory=GrammarConfig)


_SECTIONS = {
    "emit": EmitFlags,
    "camera": CameraConfig,
    "light": LightConfig,
    "grammar": GrammarConfig,
}


def _coerce(name: str, value: Any, default: Any, annotation: str) -> Any:
    """Type-check one scalar/pair value against its declared field type."""
    if "tuple" in annotation:
        if (not isinstance(value, (list, tuple)) or len(value) != 2
                or not all(_is_number(v) for v in value)):
            raise ConfigError("type", [f"{name} must be a pair of numbers"])
        return (float(value[0]), float(value[1]))
    if annotation == "bool":
        if not isinstance(value, bool):
            raise ConfigError("type", [f"{name} must be a boolean"])
        return value
    if annotation == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError("type", [f"{name} must be an integer"])
        return value
    if annotation == "float":
        if not _is_number(value):
            raise ConfigError("type", [f"{name} must be a number"])
        return float(value)
    if annotation == "str":
        if not isinstance(value, str):
            raise ConfigError("type", [f"{name} must be a string"])
        return value
    if annotation == "str | None":
        if value is not None and not isinstance(value, str):
            raise ConfigError("type", [f"{name} must be a string or null"])
        return value
    raise AssertionError(f"unhandled annotation {annotation!r} for {name}")


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _build(cls: type, data: dict[str, Any], prefix: str = "") -> Any:
    kwargs: dict[str, Any] = {}
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in known:
            log.warning("unknown config key %r ignored", prefix + key)
            continue
        f = known[key]
        full = prefix + key
        if key in _SECTIONS and cls is DatasetConfig:
            if not isinstance(value, dict):
                raise ConfigError("type", [f"{full} must be an object"])
            kwargs[key] = _build(_SECTIONS[key], value, prefix=full + ".")
        elif key == "classes" and cls is DatasetConfig:
            kwargs[key] = _parse_classes(value)
        else:
            kwargs[key] = _coerce(full, value, f.default, str(f.type))
    return cls(**kwargs)


def _parse_classes(value: Any) -> tuple[TypologyClass, ...]:
    if not isinstance(value, list):
        raise ConfigError("type", ["classes must be a list"])
    out = []
    for item in value:
        try:
            out.append(TypologyClass.parse(item))
        except (KeyError, ValueError, TypeError):
            raise ConfigError("type", [f"unknown building class {item!r}"]) from None
    # deduplicate, keep typology-code order
    return tuple(sorted(set(out)))


def parse_config(text: str, *, check: bool = True) -> DatasetConfig:
    """Parse a JSON config document into a fully defaulted :class:`DatasetConfig`.

    With ``check`` (the default) the result is also validated and a
    ``ConfigError(kind="domain")`` carrying every violation is raised.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("syntax", [str(exc)]) from None
    if not isinstance(data, dict):
        raise ConfigError("syntax", ["top level must be a JSON object"])
    if "samples" not in data:
        raise ConfigError("domain", ["samples is required"])
    cfg = _build(DatasetConfig, data)
    if check:
        problems = validate_config(cfg)
        if problems:
            raise ConfigError("domain", problems)
    return cfg


def load_config(path: str | Path, **overrides: Any) -> DatasetConfig:
    """Read a config file, apply top-level overrides (``None`` values skipped)."""
    text = Path(path).read_text(encoding="utf-8")
    cfg = parse_config(text, check=False)
    cfg = apply_overrides(cfg, **overrides)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("domain", problems)
    return cfg


def apply_overrides(cfg: DatasetConfig, **overrides: Any) -> DatasetConfig:
    changes = {}
    for key, value in overrides.items():
        if value is None:
            continue
        f = {f.name: f for f in dataclasses.fields(DatasetConfig)}[key]
        changes[key] = _coerce(key, value, f.default, str(f.type))
    return dataclasses.replace(cfg, **changes) if changes else cfg


def validate_config(cfg: DatasetConfig) -> list[str]:
    """Return every violated invariant; an empty list means the config is usable."""
    p: list[str] = []
    if cfg.samples < 1:
        p.append("samples must be >= 1")
    if not 0 <= cfg.seed <= MASK64:
        p.append("seed must fit in an unsigned 64-bit integer")
    if not cfg.classes:
        p.append("classes must be non-empty")
    if cfg.lod not in (1, 2):
        p.append("lod must be 1 or 2")
    if cfg.image_size < 16:
        p.append("image_size must be >= 16")
    if cfg.views_per_model < 1:
        p.append("views_per_model must be >= 1")
    if cfg.points_per_cloud < 1:
        p.append("points_per_cloud must be >= 1")
    for dim in ("width", "length", "height"):
        lo, hi = getattr(cfg, f"min_{dim}"), getattr(cfg, f"max_{dim}")
        if lo <= 0 or hi <= 0:
            p.append(f"min_{dim} and max_{dim} must be > 0")
        if lo > hi:
            p.append(f"min_{dim} > max_{dim}")
    if cfg.floor_height <= 0:
        p.append("floor_height must be > 0")
    if not 0.0 <= cfg.p_uniform_texture <= 1.0:
        p.append("p_uniform_texture must be in [0, 1]")

    e = cfg.emit
    flags = [e.render_png, e.segmentation_png, e.depth_png, e.depth_float,
             e.normals_png, e.mesh_obj, e.cloud_ply, e.metadata_json]
    if not any(flags):
        p.append("emit: at least one output must be enabled")
    if e.depth_float_format not in ("exr", "pfm"):
        p.append("emit.depth_float_format must be 'exr' or 'pfm'")

    c = cfg.camera
    ylo, yhi = c.yaw_range_deg
    if not 0 <= ylo < yhi <= 360:
        p.append("camera.yaw_range_deg must satisfy 0 <= lo < hi <= 360")
    elo, ehi = c.elevation_range_deg
    if not 0 <= elo < ehi < 90:
        p.append("camera.elevation_range_deg must satisfy 0 <= lo < hi < 90")
    if not 10 <= c.fov_deg <= 120:
        p.append("camera.fov_deg must be in [10, 120]")
    if c.framing_margin < 1:
        p.append("camera.framing_margin must be >= 1")

    li = cfg.light
    for name in ("azimuth_range_deg", "altitude_range_deg", "color_range", "strength_range"):
        lo, hi = getattr(li, name)
        if lo > hi:
            p.append(f"light.{name}: lo > hi")
    alo, ahi = li.altitude_range_deg
    if not (0 < alo and ahi < 90):
        p.append("light.altitude_range_deg must lie strictly inside (0, 90)")
    clo, chi = li.color_range
    if not (0 <= clo and chi <= 1):
        p.append("light.color_range must lie in [0, 1]")
    if li.strength_range[0] < 0:
        p.append("light.strength_range must be >= 0")

    g = cfg.grammar
    for name in ("skyscraper_aspect", "courtyard_inset", "courtyard_min",
                 "wing_min_width", "facade_spacing"):
        if getattr(g, name) <= 0:
            p.append(f"grammar.{name} must be > 0")
    if g.facade_margin < 0:
        p.append("grammar.facade_margin must be >= 0")
    if not 0.0 <= g.p_balcony <= 1.0:
        p.append("grammar.p_balcony must be in [0, 1]")
    if g.max_retries < 1:
        p.append("grammar.max_retries must be >= 1")
    return p


def config_to_dict(cfg: DatasetConfig) -> dict[str, Any]:
    d = dataclasses.asdict(cfg)
    d["classes"] = [c.key for c in cfg.classes]
    for section in ("camera", "light"):
        for k, v in d[section].items():
            if isinstance(v, tuple):
                d[section][k] = list(v)
    return d


def dump_config(cfg: DatasetConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True, indent=2) + "\n"


# -- seeds -------------------------------------------------------------------

def splitmix64_mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_sample_seed(master_seed: int, sample_index: int) -> int:
    """Per-sample 64-bit seed: one SplitMix64 step on ``master ^ (index+1)*gamma``."""
    state = (master_seed ^ (((sample_index + 1) * GOLDEN_GAMMA) & MASK64)) & MASK64
    return splitmix64_mix((state + GOLDEN_GAMMA) & MASK64)
