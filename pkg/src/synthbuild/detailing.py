"""LoD-2 facade detailing: window grids, balconies and a door.

Modules are flat appliqués or small solids standing just outside the wall
plane; walls are never cut. User modules are OBJ files named
``window_*.obj``, ``balcony_*.obj`` or ``door_*.obj`` and are authored in a
local frame where x is width, y is height and +z points out of the wall.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .asset_io import read_obj
from .geometry import ComponentClass, Mesh, box_mesh, concat
from .massing import (FACADE_ORDER, BuildingParams, ContactRect, Facade, FacadeDir, Massing,
                      Volume, contact_rects, facade_of)

if TYPE_CHECKING:
    from .config import GrammarConfig

log = logging.getLogger(__name__)

FACADE_STANDOFF = 0.01  # m between wall plane and module back face, avoids z-fighting
WINDOW_SIZE = (1.2, 1.4)
DOOR_SIZE = (1.0, 2.1)
BALCONY_SLOT = (1.6, 1.1)

_PREFIXES = {"window": ComponentClass.WINDOW, "balcony": ComponentClass.BALCONY, "door": ComponentClass.DOOR}


class ModuleLoadError(ValueError):
    pass


@dataclass(frozen=True)
class FacadeGrid:
    volume_id: int
    direction: FacadeDir
    rows: int
    cols: int
    anchors: np.ndarray  # (rows * cols, 3), row-major
    cell_size: tuple[float, float]
    u_centers: np.ndarray  # (cols,)
    facade: Facade

    def anchor(self, row: int, col: int) -> np.ndarray:
        return self.anchors[row * self.cols + col]

    def cell_rect(self, row: int, col: int) -> tuple[float, float, float, float]:
        cw, ch = self.cell_size
        u = self.u_centers[col]
        return (u - cw / 2, u + cw / 2, row * ch, (row + 1) * ch)


def compute_facade_grid(volume: Volume, facade: FacadeDir, params: BuildingParams,
                        spacing: float = 2.5, margin: float = 0.6) -> FacadeGrid:
    """Evenly distributed ``floors x cols`` lattice of module anchors on one facade."""
    if spacing <= 0 or margin < 0:
        raise ValueError("spacing must be > 0 and margin >= 0")
    f = facade_of(volume, facade)
    fh = params.floor_height
    rows = volume.floors(fh)
    usable = f.width - 2 * margin
    cols = max(0, math.floor(usable / spacing)) if usable > 0 else 0
    step = usable / cols if cols else 0.0
    u = margin + (np.arange(cols) + 0.5) * step
    z = (np.arange(rows) + 0.5) * fh
    anchors = (f.origin[None, None, :]
               + u[None, :, None] * f.tangent[None, None, :]
               + z[:, None, None] * np.array([0.0, 0.0, 1.0])[None, None, :]).reshape(-1, 3)
    return FacadeGrid(volume.volume_id, facade, rows, cols, anchors, (step, fh), u, f)


@dataclass(frozen=True, eq=False)
class ModuleAsset:
    mesh: Mesh
    anchor: np.ndarray  # centre of the back (minimum z) face of the bounding box
    nominal_size: tuple[float, float, float]  # (width, height, depth)
    component: ComponentClass
    name: str = "builtin"


def _asset_from_mesh(mesh: Mesh, component: ComponentClass, name: str) -> ModuleAsset:
    if mesh.n_triangles == 0:
        raise ModuleLoadError(f"{name}: module mesh is empty")
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    size = hi - lo
    if size[0] <= 0 or size[1] <= 0:
        raise ModuleLoadError(f"{name}: module has zero width or height")
    anchor = np.array([(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, lo[2]])
    mesh = mesh.replace(component=np.full(mesh.n_triangles, int(component)))
    return ModuleAsset(mesh, anchor, tuple(float(s) for s in size), component, name)


def _quad(w: float, h: float) -> Mesh:
    v = np.array([(-w / 2, -h / 2, 0.0), (w / 2, -h / 2, 0.0), (w / 2, h / 2, 0.0), (-w / 2, h / 2, 0.0)])
    return Mesh(v, [(0, 1, 2), (0, 2, 3)], 0, 0, 0)


def builtin_window() -> ModuleAsset:
    return _asset_from_mesh(_quad(*WINDOW_SIZE), ComponentClass.WINDOW, "builtin_window")


def builtin_door() -> ModuleAsset:
    return _asset_from_mesh(_quad(*DOOR_SIZE), ComponentClass.DOOR, "builtin_door")


def builtin_balcony() -> ModuleAsset:
    slab = box_mesh((-0.8, 0.0, 0.0), (1.6, 0.15, 0.8))
    return _asset_from_mesh(slab, ComponentClass.BALCONY, "builtin_balcony")


def load_module_asset(path: str | Path) -> ModuleAsset:
    """Load a user module; its class comes from the filename prefix."""
    path = Path(path)
    prefix = path.stem.split("_", 1)[0].lower()
    if prefix not in _PREFIXES:
        raise ModuleLoadError(f"{path.name}: unknown module class prefix {prefix!r} "
                              f"(expected one of {sorted(_PREFIXES)})")
    return _asset_from_mesh(read_obj(path), _PREFIXES[prefix], path.name)


@dataclass
class ModuleLibrary:
    windows: list[ModuleAsset] = field(default_factory=list)
    balconies: list[ModuleAsset] = field(default_factory=list)
    doors: list[ModuleAsset] = field(default_factory=list)

    @classmethod
    def load(cls, modules_dir: str | Path | None) -> ModuleLibrary:
        lib = cls()
        if modules_dir is None:
            return lib
        for path in sorted(Path(modules_dir).glob("*.obj")):
            asset = load_module_asset(path)
            {ComponentClass.WINDOW: lib.windows, ComponentClass.BALCONY: lib.balconies,
             ComponentClass.DOOR: lib.doors}[asset.component].append(asset)
        return lib


@dataclass(frozen=True)
class Cell:
    """A slot on a facade: centre point on the wall plane and its extent."""

    center: np.ndarray
    width: float
    height: float
    align: str = "center"  # or "bottom": module rests on the slot's lower edge


def fit_scale(asset: ModuleAsset, width: float, height: float) -> float:
    w, h, _ = asset.nominal_size
    return min(width / w, height / h)


def instantiate_module(asset: ModuleAsset, cell: Cell, facade: FacadeDir, volume_id: int = 0,
                       material_id: int = 0, standoff: float = FACADE_STANDOFF) -> Mesh:
    """Scale an asset into ``cell`` and turn its +z axis onto the facade normal."""
    s = fit_scale(asset, cell.width, cell.height)
    rot = np.column_stack([facade.tangent, [0.0, 0.0, 1.0], facade.normal])
    target = np.asarray(cell.center, dtype=np.float64)
    if cell.align == "bottom":
        target = target + np.array([0.0, 0.0, s * asset.nominal_size[1] / 2 - cell.height / 2])
    target = target + standoff * facade.normal
    local = (asset.mesh.vertices - asset.anchor) * s
    verts = local @ rot.T + target
    return asset.mesh.replace(vertices=verts, material_id=material_id, volume_id=volume_id)


def _overlaps(rect: tuple[float, float, float, float], c: ContactRect, tol: float = 1e-9) -> bool:
    u0, u1, z0, z1 = rect
    return min(u1, c.u1) - max(u0, c.u0) > tol and min(z1, c.z1) - max(z0, c.z0) > tol


@dataclass(frozen=True)
class _Slot:
    grid: FacadeGrid
    row: int
    col: int


def exterior_slots(massing: Massing, spacing: float, margin: float) -> list[_Slot]:
    """Grid cells in fixed (volume, facade, row, col) order not touching another volume."""
    contacts = contact_rects(massing)
    slots = []
    for vol in massing.volumes:
        for d in FACADE_ORDER:
            grid = compute_facade_grid(vol, d, massing.params, spacing, margin)
            mine = [c for c in contacts if c.volume_id == vol.volume_id and c.direction is d]
            for r in range(grid.rows):
                for c in range(grid.cols):
                    rect = grid.cell_rect(r, c)
                    if not any(_overlaps(rect, ct) for ct in mine):
                        slots.append(_Slot(grid, r, c))
    return slots


def _door_fallback(massing: Massing, rng: np.random.Generator) -> tuple[Facade, float] | None:
    contacts = contact_rects(massing)
    candidates = []
    for vol in massing.volumes:
        for d in FACADE_ORDER:
            f = facade_of(vol, d)
            if f.width < DOOR_SIZE[0] + 0.2:
                continue
            rect = (f.width / 2 - DOOR_SIZE[0] / 2, f.width / 2 + DOOR_SIZE[0] / 2, 0.0, DOOR_SIZE[1])
            if any(_overlaps(rect, c) for c in contacts if c.volume_id == vol.volume_id and c.direction is d):
                continue
            candidates.append((f, f.width / 2))
    if not candidates:
        return None
    return candidates[int(rng.integers(len(candidates)))]


def place_modules(massing: Massing, mesh: Mesh, library: ModuleLibrary | None, lod: int,
                  rng: np.random.Generator, p_balcony: float = 0.3,
                  grammar: GrammarConfig | None = None) -> Mesh:
    """Append windows, balconies and one door to the envelope ``mesh``.

    LoD 1 returns ``mesh`` itself. Envelope triangles are kept unchanged at
    the front of the result.
    """
    if lod == 1:
        return mesh
    spacing = grammar.facade_spacing if grammar else 2.5
    margin = grammar.facade_margin if grammar else 0.6
    lib = library or ModuleLibrary()

    def pick(user: list[ModuleAsset], default) -> ModuleAsset:
        return user[int(rng.integers(len(user)))] if user else default()

    window = pick(lib.windows, builtin_window)
    balcony = pick(lib.balconies, builtin_balcony)
    door = pick(lib.doors, builtin_door)

    slots = exterior_slots(massing, spacing, margin)
    ground = [i for i, s in enumerate(slots) if s.row == 0]
    door_slot = ground[int(rng.integers(len(ground)))] if ground else None
    balcony_draws = rng.random(len(slots))

    parts = [mesh]
    for i, slot in enumerate(slots):
        g = slot.grid
        cw, ch = g.cell_size
        d = g.direction
        anchor = g.anchor(slot.row, slot.col)
        if i == door_slot:
            dw, dh = min(DOOR_SIZE[0], cw), min(DOOR_SIZE[1], ch)
            base = anchor - np.array([0.0, 0.0, ch / 2])
            cell = Cell(base + np.array([0.0, 0.0, dh / 2]), dw, dh, align="bottom")
            parts.append(instantiate_module(door, cell, d, g.volume_id))
            continue
        cell = Cell(anchor, min(WINDOW_SIZE[0], cw), min(WINDOW_SIZE[1], ch))
        parts.append(instantiate_module(window, cell, d, g.volume_id))
        if slot.row >= 1 and balcony_draws[i] < p_balcony:
            bw, bh = min(BALCONY_SLOT[0], cw), min(BALCONY_SLOT[1], ch / 2)
            floor_z = anchor - np.array([0.0, 0.0, ch / 2])
            cell = Cell(floor_z + np.array([0.0, 0.0, bh / 2]), bw, bh, align="bottom")
            parts.append(instantiate_module(balcony, cell, d, g.volume_id))

    if door_slot is None:
        spot = _door_fallback(massing, rng)
        if spot is None:
            raise RuntimeError("no exterior facade wide enough for a door")
        f, u = spot
        dh = min(DOOR_SIZE[1], massing.params.floor_height)
        cell = Cell(f.point(u, dh / 2), DOOR_SIZE[0], dh, align="bottom")
        parts.append(instantiate_module(door, cell, f.direction, f.volume_id))
    return concat(parts)
