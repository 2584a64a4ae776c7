"""Indexed triangle meshes and the numeric kernels that operate on them."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

# geometric tolerances, in one place
AREA_EPS = 1e-12  # m^2, triangles below this are degenerate
SURFACE_EPS = 1e-6  # m, point-on-surface containment
PLANE_EPS = 1e-9  # m, point-on-plane construction checks


class ComponentClass(IntEnum):
    WALL = 0
    ROOF = 1
    WINDOW = 2
    BALCONY = 3
    DOOR = 4

    @property
    def key(self) -> str:
        return self.name.lower()


class DegenerateTriangleError(ValueError):
    pass


def _frozen(a: np.ndarray, dtype) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh with per-triangle component, material and volume tags.

    Arrays are read-only after construction, so meshes can be shared freely.
    """

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64
    component: np.ndarray = 0  # (T,) uint8, scalars broadcast
    material_id: np.ndarray = 0  # (T,) int32
    volume_id: np.ndarray = 0  # (T,) int32

    def __post_init__(self):
        v = _frozen(np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3), np.float64)
        t = _frozen(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3), np.int64)
        n = len(t)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        for name, dt in (("component", np.uint8), ("material_id", np.int32), ("volume_id", np.int32)):
            arr = np.asarray(getattr(self, name))
            if arr.ndim == 0:
                arr = np.full(n, arr)
            if arr.shape != (n,):
                raise ValueError(f"{name} has {arr.shape[0]} entries for {n} triangles")
            object.__setattr__(self, name, _frozen(arr, dt))
        if n and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")

    @classmethod
    def empty(cls) -> Mesh:
        return cls(np.zeros((0, 3)), np.zeros((0, 3), np.int64), np.zeros(0), np.zeros(0), np.zeros(0))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> np.ndarray:
        """(T, 3, 3) array of triangle corner positions."""
        return self.vertices[self.triangles]

    def replace(self, **kw) -> Mesh:
        fields = dict(vertices=self.vertices, triangles=self.triangles, component=self.component,
                      material_id=self.material_id, volume_id=self.volume_id)
        fields.update(kw)
        return Mesh(**fields)

    def select(self, mask: np.ndarray) -> Mesh:
        """Sub-mesh of the masked triangles, with unused vertices dropped."""
        tris = self.triangles[mask]
        used, inverse = np.unique(tris.ravel(), return_inverse=True)
        return Mesh(self.vertices[used], inverse.reshape(-1, 3), self.component[mask],
                    self.material_id[mask], self.volume_id[mask])

    def equals(self, other: Mesh) -> bool:
        """Bit-exact equality of every array."""
        return all(
            a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(
                (self.vertices, self.triangles, self.component, self.material_id, self.volume_id),
                (other.vertices, other.triangles, other.component, other.material_id, other.volume_id),
            )
        )


def concat(meshes: list[Mesh]) -> Mesh:
    meshes = [m for m in meshes if m.n_triangles]
    if not meshes:
        return Mesh.empty()
    offsets = np.cumsum([0] + [m.n_vertices for m in meshes[:-1]])
    return Mesh(
        np.concatenate([m.vertices for m in meshes]),
        np.concatenate([m.triangles + o for m, o in zip(meshes, offsets)]),
        np.concatenate([m.component for m in meshes]),
        np.concatenate([m.material_id for m in meshes]),
        np.concatenate([m.volume_id for m in meshes]),
    )


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray  # (N, 3) float64
    source_triangles: np.ndarray | None = None  # (N,) triangle each point came from

    def __post_init__(self):
        pts = _frozen(np.asarray(self.points, dtype=np.float64).reshape(-1, 3), np.float64)
        if len(pts) == 0:
            raise ValueError("a point cloud needs at least one point")
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class BoundingSphere:
    center: tuple[float, float, float]
    radius: float


# box corner layout: bit 0 -> x, bit 1 -> y, bit 2 -> z
_BOX_FACES = (
    # (quad corners CCW seen from outside, component)
    ((0, 2, 3, 1), ComponentClass.WALL),  # bottom, -z
    ((4, 5, 7, 6), ComponentClass.ROOF),  # top, +z
    ((0, 1, 5, 4), ComponentClass.WALL),  # -y
    ((2, 6, 7, 3), ComponentClass.WALL),  # +y
    ((0, 4, 6, 2), ComponentClass.WALL),  # -x
    ((1, 3, 7, 5), ComponentClass.WALL),  # +x
)


def box_mesh(origin, size, volume_id: int = 0, material_id: int = 0,
             components: tuple[ComponentClass, ...] | None = None) -> Mesh:
    """Closed 12-triangle box with outward (counter-clockwise) winding.

    ``components`` optionally overrides the per-face classes, in the order
    bottom, top, -y, +y, -x, +x.
    """
    ox, oy, oz = map(float, origin)
    sx, sy, sz = map(float, size)
    if min(sx, sy, sz) <= 0:
        raise ValueError("box sizes must be positive")
    verts = np.array([
        (ox + sx * (i & 1), oy + sy * ((i >> 1) & 1), oz + sz * ((i >> 2) & 1))
        for i in range(8)
    ])
    tris, comps = [], []
    for k, (quad, comp) in enumerate(_BOX_FACES):
        a, b, c, d = quad
        tris += [(a, b, c), (a, c, d)]
        comp = components[k] if components is not None else comp
        comps += [comp, comp]
    return Mesh(verts, tris, comps, material_id, volume_id)


def triangle_areas(mesh: Mesh) -> np.ndarray:
    p = mesh.corners()
    return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)


def surface_area(mesh: Mesh) -> float:
    return float(triangle_areas(mesh).sum())


def face_normals(mesh: Mesh) -> np.ndarray:
    """Unit normals of every triangle (right-hand rule); degenerate rows are zero."""
    p = mesh.corners()
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    length = np.linalg.norm(n, axis=1, keepdims=True)
    return np.divide(n, length, out=np.zeros_like(n), where=length > 0)


def face_normal(mesh: Mesh, index: int) -> np.ndarray:
    a, b, c = mesh.vertices[mesh.triangles[index]]
    n = np.cross(b - a, c - a)
    length = np.linalg.norm(n)
    if 0.5 * length <= AREA_EPS:
        raise DegenerateTriangleError(f"triangle {index} has (near) zero area")
    return n / length


def bounding_sphere(mesh: Mesh) -> BoundingSphere:
    """AABB-centred sphere containing every vertex (not minimal)."""
    if mesh.n_vertices == 0:
        raise ValueError("bounding sphere of an empty mesh")
    v = mesh.vertices
    center = 0.5 * (v.min(axis=0) + v.max(axis=0))
    radius = float(np.sqrt(((v - center) ** 2).sum(axis=1)).max())
    return BoundingSphere(tuple(float(c) for c in center), radius)


def sample_point_cloud(mesh: Mesh, n: int, rng: np.random.Generator,
                       mask: np.ndarray | None = None) -> PointCloud:
    """Area-weighted uniform surface samples.

    Each point consumes one row of three uniforms (triangle pick, u, v) so a
    shorter run is always a prefix of a longer one with the same stream.
    ``mask`` restricts sampling to a subset of triangles.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    areas = triangle_areas(mesh)
    if mask is not None:
        areas = np.where(mask, areas, 0.0)
    cdf = np.cumsum(areas)
    total = cdf[-1] if len(cdf) else 0.0
    if total <= AREA_EPS:
        raise ValueError("cannot sample a mesh with zero surface area")
    r = rng.random((n, 3))
    tri = np.searchsorted(cdf, r[:, 0] * total, side="right")
    tri = np.minimum(tri, len(cdf) - 1)
    u, v = r[:, 1].copy(), r[:, 2].copy()
    fold = u + v > 1.0
    u[fold], v[fold] = 1.0 - u[fold], 1.0 - v[fold]
    p = mesh.corners()[tri]
    pts = p[:, 0] + u[:, None] * (p[:, 1] - p[:, 0]) + v[:, None] * (p[:, 2] - p[:, 0])
    return PointCloud(pts, tri)


def point_triangle_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Vectorised exact distance from points ``p`` to triangles ``(a, b, c)``, all (N, 3)."""
    # Ericson, Real-Time Collision Detection, closest point on triangle
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    closest = np.empty_like(p)
    done = np.zeros(len(p), bool)

    def put(mask, value):
        m = mask & ~done
        closest[m] = value[m] if value.ndim == 2 else value
        done[:] |= m

    with np.errstate(divide="ignore", invalid="ignore"):
        put((d1 <= 0) & (d2 <= 0), a)
        put((d3 >= 0) & (d4 <= d3), b)
        put((d6 >= 0) & (d5 <= d6), c)
        t = d1 / (d1 - d3)
        put((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + t[:, None] * ab)
        t = d2 / (d2 - d6)
        put((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + t[:, None] * ac)
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        put((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), b + t[:, None] * (c - b))
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        put(np.ones(len(p), bool), a + v[:, None] * ab + w[:, None] * ac)
    return np.linalg.norm(p - closest, axis=1)


@dataclass(frozen=True)
class ComponentReport:
    triangles: np.ndarray  # indices into the mesh
    n_vertices: int
    n_edges: int
    n_faces: int
    boundary_edges: int  # edges used by exactly one triangle
    nonmanifold_edges: int  # edges used by three or more
    manifold: bool

    @property
    def euler(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces


def connected_components(mesh: Mesh) -> list[np.ndarray]:
    """Triangle index groups connected through shared vertices."""
    parent = np.arange(mesh.n_vertices)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for a, b, c in mesh.triangles:
        ra, rb, rc = find(a), find(b), find(c)
        parent[rb] = ra
        parent[find(rc)] = ra
    roots = np.array([find(t[0]) for t in mesh.triangles], dtype=np.int64)
    groups: dict[int, list[int]] = {}
    for i, r in enumerate(roots):
        groups.setdefault(int(r), []).append(i)
    return [np.array(g) for g in groups.values()]


def validate_manifold(mesh: Mesh) -> list[ComponentReport]:
    """Edge-manifold flag and Euler characteristic per connected component."""
    reports = []
    for tri_idx in connected_components(mesh):
        tris = mesh.triangles[tri_idx]
        edges = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        reports.append(ComponentReport(
            triangles=tri_idx,
            n_vertices=len(np.unique(tris)),
            n_edges=len(counts),
            n_faces=len(tris),
            boundary_edges=int((counts == 1).sum()),
            nonmanifold_edges=int((counts > 2).sum()),
            manifold=bool((counts == 2).all()),
        ))
    return reports


def transform_mesh(mesh: Mesh, rotation=None, translation=None) -> Mesh:
    """Apply ``x -> R x + t``; R must be orthonormal with det +1 to keep winding."""
    r = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
    t = np.zeros(3) if translation is None else np.asarray(translation, dtype=np.float64)
    if not np.allclose(r @ r.T, np.eye(3), atol=1e-9):
        raise ValueError("rotation is not orthonormal")
    if rotation is None and translation is None:
        return mesh.replace()
    v = mesh.vertices @ r.T + t if rotation is not None else mesh.vertices + t
    return mesh.replace(vertices=v)
