"""Volumetric composition of the five building typologies.

Every building is a small set of axis-aligned boxes standing on z = 0:

* skyscraper, isolated -- one box
* patio -- four bars forming a closed ring around a courtyard
* L-shaped -- two wings sharing one contact face
* C-shaped -- two parallel wings joined by a connector

Touching volumes keep their own faces; nothing is merged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import TYPE_CHECKING

import numpy as np

from .geometry import Mesh, box_mesh, concat

if TYPE_CHECKING:
    from .config import DatasetConfig, GrammarConfig

log = logging.getLogger(__name__)


class TypologyClass(IntEnum):
    SKYSCRAPER = 1
    ISOLATED = 2
    PATIO = 3
    L_SHAPED = 4
    C_SHAPED = 5

    @property
    def key(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> TypologyClass:
        if isinstance(value, bool):
            raise TypeError(value)
        if isinstance(value, int):
            return cls(value)
        norm = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"lshaped": "l_shaped", "cshaped": "c_shaped", "l": "l_shaped", "c": "c_shaped"}
        return cls[aliases.get(norm, norm).upper()]


VOLUME_COUNT = {
    TypologyClass.SKYSCRAPER: 1,
    TypologyClass.ISOLATED: 1,
    TypologyClass.PATIO: 4,
    TypologyClass.L_SHAPED: 2,
    TypologyClass.C_SHAPED: 3,
}


class BoundsError(ValueError):
    """The configured dimension bounds admit no building at all."""


class TypologyInfeasible(ValueError):
    """The sampled footprint is too small for the requested typology."""


@dataclass(frozen=True)
class Volume:
    origin: tuple[float, float, float]
    size: tuple[float, float, float]
    volume_id: int

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=np.float64)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + np.asarray(self.size, dtype=np.float64)

    def floors(self, floor_height: float) -> int:
        return int(round(self.size[2] / floor_height))

    def to_dict(self) -> dict:
        return {"volume_id": self.volume_id, "origin": list(self.origin), "size": list(self.size)}


@dataclass(frozen=True)
class BuildingParams:
    width: float
    length: float
    height: float
    floors: int
    floor_height: float

    def to_dict(self) -> dict:
        return {"width": self.width, "length": self.length, "height": self.height,
                "floors": self.floors, "floor_height": self.floor_height}


@dataclass(frozen=True)
class Massing:
    typology: TypologyClass
    volumes: tuple[Volume, ...]
    params: BuildingParams


def _floor_range(min_h: float, max_h: float, floor_height: float) -> tuple[int, int]:
    lo = max(1, math.ceil(min_h / floor_height - 1e-9))
    hi = math.floor(max_h / floor_height + 1e-9)
    return lo, hi


def sample_building_params(cfg: DatasetConfig, cls: TypologyClass,
                           rng: np.random.Generator) -> BuildingParams:
    """Draw footprint and floor count within the configured bounds.

    Skyscrapers are kept at least ``skyscraper_aspect`` times taller than
    their longest side whenever the bounds allow it.
    """
    fh = cfg.floor_height
    f_lo, f_hi = _floor_range(cfg.min_height, cfg.max_height, fh)
    if f_hi < f_lo:
        raise BoundsError(
            f"no whole number of {fh} m floors fits in [{cfg.min_height}, {cfg.max_height}] m")

    w_lo, w_hi = cfg.min_width, cfg.max_width
    l_lo, l_hi = cfg.min_length, cfg.max_length
    aspect = cfg.grammar.skyscraper_aspect
    tower = cls is TypologyClass.SKYSCRAPER
    if tower:
        side_cap = f_hi * fh / aspect
        if w_lo > side_cap or l_lo > side_cap:
            log.warning("bounds too squat for a %.1f:1 skyscraper; aspect constraint dropped", aspect)
            tower = False
        else:
            w_hi, l_hi = min(w_hi, side_cap), min(l_hi, side_cap)

    width = float(rng.uniform(w_lo, w_hi)) if w_hi > w_lo else float(w_lo)
    length = float(rng.uniform(l_lo, l_hi)) if l_hi > l_lo else float(l_lo)
    if tower:
        f_lo = min(f_hi, max(f_lo, math.ceil(aspect * max(width, length) / fh - 1e-9)))
    floors = int(rng.integers(f_lo, f_hi + 1))
    return BuildingParams(width, length, floors * fh, floors, fh)


def _uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


def _wing_floors(rng: np.random.Generator, floors: int) -> int:
    return int(rng.integers(max(1, (floors + 1) // 2), floors + 1))


def generate_massing(cls: TypologyClass, params: BuildingParams, rng: np.random.Generator,
                     grammar: GrammarConfig | None = None) -> Massing:
    """Lay out the volumes of one building inside the ``width x length`` footprint."""
    if grammar is None:
        from .config import GrammarConfig
        grammar = GrammarConfig()
    W, L, fh = params.width, params.length, params.floor_height
    H = params.height
    wmin = grammar.wing_min_width
    boxes: list[tuple[tuple[float, float, float], tuple[float, float, float]]] = []

    if cls in (TypologyClass.SKYSCRAPER, TypologyClass.ISOLATED):
        boxes.append(((0.0, 0.0, 0.0), (W, L, H)))

    elif cls is TypologyClass.PATIO:
        bar_min = max(grammar.courtyard_inset, wmin)
        need = 2 * bar_min + grammar.courtyard_min
        if W < need or L < need:
            raise TypologyInfeasible(f"patio needs a footprint of at least {need} x {need} m")
        bar_max = (min(W, L) - grammar.courtyard_min) / 2
        d = _uniform(rng, bar_min, min(bar_max, max(bar_min, 0.3 * min(W, L))))
        boxes += [
            ((0.0, 0.0, 0.0), (W, d, H)),  # south bar
            ((0.0, L - d, 0.0), (W, d, H)),  # north bar
            ((0.0, d, 0.0), (d, L - 2 * d, H)),  # west bar
            ((W - d, d, 0.0), (d, L - 2 * d, H)),  # east bar
        ]

    elif cls is TypologyClass.L_SHAPED:
        if W < 2 * wmin or L < 2 * wmin:
            raise TypologyInfeasible(f"L-shape needs a footprint of at least {2 * wmin} x {2 * wmin} m")
        a = _uniform(rng, wmin, max(wmin, min(L - wmin, 0.5 * L)))  # depth of the long wing
        b = _uniform(rng, wmin, max(wmin, min(W - wmin, 0.5 * W)))  # width of the short wing
        h2 = _wing_floors(rng, params.floors) * fh
        boxes += [
            ((0.0, 0.0, 0.0), (W, a, H)),
            ((0.0, a, 0.0), (b, L - a, h2)),
        ]

    elif cls is TypologyClass.C_SHAPED:
        if W < 3 * wmin or L < 2 * wmin:
            raise TypologyInfeasible(f"C-shape needs a footprint of at least {3 * wmin} x {2 * wmin} m")
        a1 = _uniform(rng, wmin, max(wmin, min((W - wmin) / 2, 0.35 * W)))
        a2 = _uniform(rng, wmin, max(wmin, min(W - a1 - wmin, 0.35 * W)))
        c = _uniform(rng, wmin, max(wmin, min(L - wmin, 0.5 * L)))
        h_conn = _wing_floors(rng, params.floors) * fh
        h_wing2 = _wing_floors(rng, params.floors) * fh
        boxes += [
            ((0.0, 0.0, 0.0), (a1, L, H)),
            ((W - a2, 0.0, 0.0), (a2, L, h_wing2)),
            ((a1, 0.0, 0.0), (W - a1 - a2, c, h_conn)),
        ]
    else:  # pragma: no cover
        raise ValueError(cls)

    volumes = tuple(Volume(o, s, i) for i, (o, s) in enumerate(boxes))
    return Massing(cls, volumes, params)


def build_massing(cfg: DatasetConfig, cls: TypologyClass, rng: np.random.Generator) -> Massing:
    """Sample params and lay out a massing, redrawing infeasible footprints.

    Retries draw from the same stream, so the result stays deterministic.
    """
    last: Exception | None = None
    for _ in range(cfg.grammar.max_retries):
        params = sample_building_params(cfg, cls, rng)
        try:
            return generate_massing(cls, params, rng, cfg.grammar)
        except TypologyInfeasible as exc:
            last = exc
    raise TypologyInfeasible(
        f"{cls.key}: no feasible footprint after {cfg.grammar.max_retries} draws ({last})")


def massing_to_mesh(massing: Massing, lod: int = 1) -> Mesh:
    """Envelope mesh: one closed box per volume, tagged wall/roof and volume id.

    ``lod`` is accepted for symmetry with the detailing step; the envelope
    itself is the same at every level.
    """
    if lod not in (1, 2):
        raise ValueError("lod must be 1 or 2")
    return concat([box_mesh(v.origin, v.size, volume_id=v.volume_id) for v in massing.volumes])


# -- facades and contacts ----------------------------------------------------

class FacadeDir(Enum):
    PX = "+x"
    NX = "-x"
    PY = "+y"
    NY = "-y"

    @property
    def normal(self) -> np.ndarray:
        return {
            FacadeDir.PX: np.array([1.0, 0.0, 0.0]),
            FacadeDir.NX: np.array([-1.0, 0.0, 0.0]),
            FacadeDir.PY: np.array([0.0, 1.0, 0.0]),
            FacadeDir.NY: np.array([0.0, -1.0, 0.0]),
        }[self]

    @property
    def tangent(self) -> np.ndarray:
        """Horizontal facade axis ``z x n``; (tangent, up, normal) is right-handed."""
        return np.cross([0.0, 0.0, 1.0], self.normal)

    @property
    def axis(self) -> int:
        return 0 if self in (FacadeDir.PX, FacadeDir.NX) else 1

    @property
    def positive(self) -> bool:
        return self in (FacadeDir.PX, FacadeDir.PY)

    def opposite(self) -> FacadeDir:
        return {FacadeDir.PX: FacadeDir.NX, FacadeDir.NX: FacadeDir.PX,
                FacadeDir.PY: FacadeDir.NY, FacadeDir.NY: FacadeDir.PY}[self]


FACADE_ORDER = (FacadeDir.PX, FacadeDir.NX, FacadeDir.PY, FacadeDir.NY)


@dataclass(frozen=True)
class Facade:
    """One vertical side of a volume in its own 2D frame.

    A facade point is ``origin + u * tangent + z * up`` with ``u`` in
    ``[0, width]`` and ``z`` in ``[0, height]``.
    """

    volume_id: int
    direction: FacadeDir
    origin: np.ndarray
    width: float
    height: float

    @property
    def normal(self) -> np.ndarray:
        return self.direction.normal

    @property
    def tangent(self) -> np.ndarray:
        return self.direction.tangent

    def point(self, u: float, z: float) -> np.ndarray:
        return self.origin + u * self.tangent + np.array([0.0, 0.0, z])

    def to_u(self, world_coord: float) -> float:
        """Map a world coordinate along the tangent axis to ``u``."""
        t_axis = 1 - self.direction.axis
        sign = self.tangent[t_axis]
        return (world_coord - self.origin[t_axis]) * sign


def facade_of(volume: Volume, direction: FacadeDir) -> Facade:
    lo, hi = volume.lo, volume.hi
    x0, y0 = lo[0], lo[1]
    x1, y1 = hi[0], hi[1]
    corner = {
        FacadeDir.PX: (x1, y0),
        FacadeDir.NX: (x0, y1),
        FacadeDir.PY: (x1, y1),
        FacadeDir.NY: (x0, y0),
    }[direction]
    width = volume.size[1] if direction.axis == 0 else volume.size[0]
    return Facade(volume.volume_id, direction, np.array([corner[0], corner[1], lo[2]]),
                  float(width), float(volume.size[2]))


@dataclass(frozen=True)
class ContactRect:
    """Part of a facade touching another volume, in facade ``(u, z)`` coordinates."""

    volume_id: int
    direction: FacadeDir
    other_volume: int
    u0: float
    u1: float
    z0: float
    z1: float

    @property
    def area(self) -> float:
        return (self.u1 - self.u0) * (self.z1 - self.z0)


def contact_rects(massing: Massing, tol: float = 1e-9) -> list[ContactRect]:
    """All face-to-face contacts between distinct volumes (positive area only)."""
    out = []
    vols = massing.volumes
    for a in vols:
        for d in FACADE_ORDER:
            fa = facade_of(a, d)
            ax = d.axis
            plane = a.hi[ax] if d.positive else a.lo[ax]
            t_axis = 1 - ax
            for b in vols:
                if b.volume_id == a.volume_id:
                    continue
                other_plane = b.lo[ax] if d.positive else b.hi[ax]
                if abs(other_plane - plane) > tol:
                    continue
                s0 = max(a.lo[t_axis], b.lo[t_axis])
                s1 = min(a.hi[t_axis], b.hi[t_axis])
                z0 = max(a.lo[2], b.lo[2])
                z1 = min(a.hi[2], b.hi[2])
                if s1 - s0 <= tol or z1 - z0 <= tol:
                    continue
                ua, ub = sorted((fa.to_u(s0), fa.to_u(s1)))
                out.append(ContactRect(a.volume_id, d, b.volume_id, ua, ub, z0 - a.lo[2], z1 - a.lo[2]))
    return out


def hidden_face_mask(massing: Massing, mesh: Mesh, tol: float = 1e-9) -> np.ndarray:
    """True for envelope triangles lying wholly inside a volume-to-volume contact."""
    hidden = np.zeros(mesh.n_triangles, bool)
    corners = mesh.corners()
    by_id = {v.volume_id: v for v in massing.volumes}
    for c in contact_rects(massing, tol):
        vol = by_id[c.volume_id]
        f = facade_of(vol, c.direction)
        ax = c.direction.axis
        plane = vol.hi[ax] if c.direction.positive else vol.lo[ax]
        t_axis = 1 - ax
        sel = np.flatnonzero((mesh.volume_id == c.volume_id) & ~hidden)
        p = corners[sel]
        on_plane = (np.abs(p[:, :, ax] - plane) <= tol).all(axis=1)
        u = (p[:, :, t_axis] - f.origin[t_axis]) * f.tangent[t_axis]
        z = p[:, :, 2] - vol.lo[2]
        inside = ((u >= c.u0 - tol) & (u <= c.u1 + tol) & (z >= c.z0 - tol) & (z <= c.z1 + tol)).all(axis=1)
        hidden[sel[on_plane & inside]] = True
    return hidden
