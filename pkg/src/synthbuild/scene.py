"""Per-view domain randomization: camera pose, sun light and volume materials."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .config import CameraConfig, LightConfig
from .geometry import BoundingSphere, ComponentClass, Mesh
from .massing import Massing


@dataclass(frozen=True)
class CameraPose:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float]
    fov_deg: float
    image_size: int
    yaw_deg: float
    elevation_deg: float
    distance: float

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(right, up, forward) unit vectors of the view frame."""
        eye = np.asarray(self.position)
        fwd = np.asarray(self.look_at) - eye
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, self.up)
        right = right / np.linalg.norm(right)
        up = np.cross(right, fwd)
        return right, up, fwd

    @property
    def focal_px(self) -> float:
        return (self.image_size / 2) / math.tan(math.radians(self.fov_deg) / 2)

    def to_dict(self) -> dict:
        return {"yaw_deg": self.yaw_deg, "elevation_deg": self.elevation_deg, "distance": self.distance,
                "fov_deg": self.fov_deg, "position": list(self.position), "look_at": list(self.look_at)}


def framing_distance(radius: float, fov_deg: float, margin: float) -> float:
    return margin * radius / math.sin(math.radians(fov_deg) / 2)


def camera_from_polar(center, yaw_deg: float, elevation_deg: float, distance: float,
                      fov_deg: float, image_size: int) -> CameraPose:
    y, e = math.radians(yaw_deg), math.radians(elevation_deg)
    c = tuple(float(v) for v in center)
    pos = (c[0] + distance * math.cos(e) * math.cos(y),
           c[1] + distance * math.cos(e) * math.sin(y),
           c[2] + distance * math.sin(e))
    return CameraPose(pos, c, (0.0, 0.0, 1.0), fov_deg, image_size, yaw_deg, elevation_deg, distance)


def sample_camera(bsphere: BoundingSphere, cam: CameraConfig, rng: np.random.Generator,
                  image_size: int = 500) -> CameraPose:
    """Orbit camera aimed at the building centre, far enough to frame the whole sphere."""
    if bsphere.radius <= 0:
        raise ValueError("bounding sphere radius must be positive")
    yaw = float(rng.uniform(*cam.yaw_range_deg))
    elev = float(rng.uniform(*cam.elevation_range_deg))
    dist = framing_distance(bsphere.radius, cam.fov_deg, cam.framing_margin)
    return camera_from_polar(bsphere.center, yaw, elev, dist, cam.fov_deg, image_size)


@dataclass(frozen=True)
class LightSpec:
    direction: tuple[float, float, float]  # from the light toward the scene
    color: tuple[float, float, float]
    strength: float
    azimuth_deg: float = 0.0
    altitude_deg: float = 45.0

    def to_dict(self) -> dict:
        return {"direction": list(self.direction), "color": list(self.color), "strength": self.strength,
                "azimuth_deg": self.azimuth_deg, "altitude_deg": self.altitude_deg}


def _draw(rng: np.random.Generator, lo: float, hi: float) -> float:
    # always consume one draw so degenerate ranges keep the stream aligned
    u = float(rng.random())
    return lo + (hi - lo) * u


def sample_light(cfg: LightConfig, rng: np.random.Generator) -> LightSpec:
    az = math.radians(_draw(rng, *cfg.azimuth_range_deg))
    alt = math.radians(_draw(rng, *cfg.altitude_range_deg))
    color = tuple(_draw(rng, *cfg.color_range) for _ in range(3))
    strength = _draw(rng, *cfg.strength_range)
    direction = (-math.cos(alt) * math.cos(az), -math.cos(alt) * math.sin(az), -math.sin(alt))
    return LightSpec(direction, color, strength, math.degrees(az), math.degrees(alt))


# -- materials ---------------------------------------------------------------

@dataclass(frozen=True)
class MaterialSpec:
    material_id: int
    albedo: tuple[float, float, float]
    texture: str | None = None  # path to an 8-bit RGB PNG
    texture_scale: float = 4.0  # meters per texture tile
    reflectance: float = 0.1
    name: str = ""

    def to_dict(self) -> dict:
        return {"material_id": self.material_id, "name": self.name, "albedo": list(self.albedo),
                "texture": self.texture, "texture_scale": self.texture_scale, "reflectance": self.reflectance}


# plaster, brick, sandstone, concrete, ochre, slate, terracotta, cream
FACADE_PALETTE = (
    ("plaster", (0.86, 0.84, 0.80), 0.05),
    ("brick", (0.62, 0.30, 0.22), 0.05),
    ("sandstone", (0.80, 0.70, 0.52), 0.08),
    ("concrete", (0.62, 0.62, 0.60), 0.10),
    ("ochre", (0.80, 0.60, 0.30), 0.05),
    ("slate", (0.42, 0.46, 0.50), 0.15),
    ("terracotta", (0.76, 0.42, 0.30), 0.05),
    ("cream", (0.93, 0.89, 0.76), 0.05),
)
NEUTRAL = ("neutral", (0.75, 0.75, 0.75), 0.05)
GLASS = ("glass", (0.35, 0.50, 0.70), 0.8)
ROOF = ("roof", (0.32, 0.32, 0.34), 0.05)


@dataclass(frozen=True)
class MaterialTable:
    """Volume materials followed by the fixed window and roof overrides."""

    volume_materials: tuple[MaterialSpec, ...]
    glass: MaterialSpec
    roof: MaterialSpec

    @property
    def all(self) -> tuple[MaterialSpec, ...]:
        return self.volume_materials + (self.glass, self.roof)

    def by_id(self) -> dict[int, MaterialSpec]:
        return {m.material_id: m for m in self.all}


def build_material_table(use_materials: bool = True, textures_dir: str | Path | None = None) -> MaterialTable:
    specs: list[MaterialSpec] = []
    if not use_materials:
        specs.append(MaterialSpec(0, NEUTRAL[1], reflectance=NEUTRAL[2], name=NEUTRAL[0]))
    elif textures_dir is not None:
        paths = sorted(Path(textures_dir).glob("*.png"), key=lambda p: p.name)
        specs = [MaterialSpec(i, _mean_color(str(p.resolve())), texture=str(p.resolve()), name=p.stem)
                 for i, p in enumerate(paths)]
    if use_materials and not specs:
        specs = [MaterialSpec(i, rgb, reflectance=r, name=n) for i, (n, rgb, r) in enumerate(FACADE_PALETTE)]
    k = len(specs)
    glass = MaterialSpec(k, GLASS[1], reflectance=GLASS[2], name=GLASS[0])
    roof = MaterialSpec(k + 1, ROOF[1], reflectance=ROOF[2], name=ROOF[0])
    return MaterialTable(tuple(specs), glass, roof)


@lru_cache(maxsize=64)
def load_texture(path: str) -> np.ndarray:
    """Texture as float64 (H, W, 3) in [0, 1]."""
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def _mean_color(path: str) -> tuple[float, float, float]:
    return tuple(float(c) for c in load_texture(path).reshape(-1, 3).mean(axis=0))


@dataclass(frozen=True)
class MaterialAssignment:
    volume_materials: dict[int, int]
    window_material: int
    roof_material: int
    uniform: bool

    def to_dict(self) -> dict:
        return {"volumes": {str(k): v for k, v in sorted(self.volume_materials.items())},
                "window": self.window_material, "roof": self.roof_material, "uniform": self.uniform}

    def triangle_materials(self, mesh: Mesh) -> np.ndarray:
        ids = np.zeros(mesh.n_triangles, np.int32)
        for vid, mid in self.volume_materials.items():
            ids[mesh.volume_id == vid] = mid
        ids[mesh.component == ComponentClass.WINDOW] = self.window_material
        ids[mesh.component == ComponentClass.ROOF] = self.roof_material
        return ids


def assign_materials(massing: Massing, table: MaterialTable, p_uniform: float,
                     rng: np.random.Generator) -> MaterialAssignment:
    """One shared material with probability ``p_uniform``, else one draw per volume."""
    n = len(table.volume_materials)
    uniform = bool(rng.random() < p_uniform)
    ids = [v.volume_id for v in massing.volumes]
    if uniform:
        m = int(rng.integers(n))
        choice = {vid: table.volume_materials[m].material_id for vid in ids}
    else:
        draws = rng.integers(n, size=len(ids))
        choice = {vid: table.volume_materials[int(d)].material_id for vid, d in zip(ids, draws)}
    return MaterialAssignment(choice, table.glass.material_id, table.roof.material_id, uniform)
