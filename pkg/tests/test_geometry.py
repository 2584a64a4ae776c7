from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import edge_count_report, point_triangle_dist
from synthbuild.config import DatasetConfig
from synthbuild.detailing import place_modules
from synthbuild.geometry import (DegenerateTriangleError, Mesh, PointCloud, bounding_sphere, box_mesh,
                                 concat, face_normal, face_normals, point_triangle_distance,
                                 sample_point_cloud, surface_area, transform_mesh, validate_manifold)
from synthbuild.massing import TypologyClass, build_massing, massing_to_mesh
from synthbuild.rng import stream


def _rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def test_unit_cube_topology_and_area():
    m = box_mesh((0, 0, 0), (1, 1, 1))
    (rep,) = validate_manifold(m)
    assert rep.manifold and (rep.n_vertices, rep.n_edges, rep.n_faces) == (8, 18, 12) and rep.euler == 2
    assert surface_area(m) == pytest.approx(6.0, abs=1e-12)


def test_box_area_and_outward_normals():
    m = box_mesh((1, -2, 3), (2, 3, 4))
    assert surface_area(m) == pytest.approx(52.0, abs=1e-12)
    centroid = np.array([2, -0.5, 5])
    d = m.corners().mean(axis=1) - centroid
    assert np.all(np.einsum("ij,ij->i", face_normals(m), d) > 0)


def test_right_triangle_area():
    m = Mesh([(0, 0, 0), (3, 0, 0), (0, 4, 0)], [(0, 1, 2)])
    assert surface_area(m) == 6.0


def test_face_normal_top_and_reversed():
    m = box_mesh((0, 0, 0), (1, 1, 1))
    assert np.allclose(face_normal(m, 2), (0, 0, 1))
    flipped = m.replace(triangles=m.triangles[:, ::-1])
    assert np.allclose(face_normal(flipped, 2), (0, 0, -1))


def test_degenerate_normal_raises():
    m = Mesh([(0, 0, 0), (1, 0, 0), (2, 0, 0)], [(0, 1, 2)])
    with pytest.raises(DegenerateTriangleError):
        face_normal(m, 0)


def test_random_normals_unit_length():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(30_000, 3))
    m = Mesh(v, np.arange(30_000).reshape(-1, 3))
    n = face_normals(m)
    assert np.all(np.abs(np.linalg.norm(n, axis=1) - 1) <= 1e-12)


def test_bounding_sphere_cases():
    m = box_mesh((-0.5, -0.5, -0.5), (1, 1, 1))
    s = bounding_sphere(m)
    assert s.radius == pytest.approx(math.sqrt(3) / 2, abs=1e-12)
    point = Mesh([(1, 2, 3)], np.zeros((0, 3), int))
    assert bounding_sphere(point).radius == 0.0
    rng = np.random.default_rng(1)
    cloud = Mesh(rng.normal(size=(500, 3)) * 7, np.zeros((0, 3), int))
    s = bounding_sphere(cloud)
    assert np.all(np.linalg.norm(cloud.vertices - s.center, axis=1) <= s.radius + 1e-9)


def test_box_minus_triangle_is_open():
    m = box_mesh((0, 0, 0), (1, 1, 1))
    m = m.select(np.arange(12) != 5)
    (rep,) = validate_manifold(m)
    assert not rep.manifold and rep.boundary_edges == 3


def test_transform_cases():
    m = box_mesh((0, 0, 0), (1, 1, 1))
    assert transform_mesh(m).equals(m)
    c, s = 0.0, 1.0
    rz = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    assert surface_area(transform_mesh(m, rz)) == pytest.approx(6.0, abs=1e-9)
    t = transform_mesh(m, translation=(1.5, -2, 3))
    assert np.array_equal(t.vertices.min(axis=0), [1.5, -2, 3])
    assert np.array_equal(t.vertices.max(axis=0), [2.5, -1, 4])
    with pytest.raises(ValueError):
        transform_mesh(m, rotation=np.diag([1, 2, 1]))


def test_area_rigid_invariance():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        n = int(rng.integers(1, 20))
        m = Mesh(rng.normal(size=(3 * n, 3)), np.arange(3 * n).reshape(-1, 3))
        t = transform_mesh(m, _rotation(rng), rng.normal(size=3) * 10)
        assert surface_area(t) == pytest.approx(surface_area(m), abs=1e-9)


def test_mesh_is_immutable():
    m = box_mesh((0, 0, 0), (1, 1, 1))
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


def test_concat_offsets_indices():
    a = box_mesh((0, 0, 0), (1, 1, 1), volume_id=0)
    b = box_mesh((2, 0, 0), (1, 1, 1), volume_id=1)
    m = concat([a, b])
    assert m.n_vertices == 16 and m.triangles.max() == 15
    assert len(validate_manifold(m)) == 2


def test_default_point_count_and_constraints():
    m = box_mesh((0, 0, 0), (1, 2, 3))
    cloud = sample_point_cloud(m, 2048, stream(0, "cloud"))
    assert cloud.count == 2048
    p = m.corners()[cloud.source_triangles]
    n = face_normals(m)[cloud.source_triangles]
    plane = np.einsum("ij,ij->i", cloud.points - p[:, 0], n)
    assert np.all(np.abs(plane) <= 1e-9)
    # barycentric bounds: reconstruct (u, v) in each source triangle
    e1, e2, r = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0], cloud.points - p[:, 0]
    g = np.stack([np.einsum("ij,ij->i", e1, e1), np.einsum("ij,ij->i", e1, e2),
                  np.einsum("ij,ij->i", e2, e2)], axis=1)
    b1, b2 = np.einsum("ij,ij->i", r, e1), np.einsum("ij,ij->i", r, e2)
    det = g[:, 0] * g[:, 2] - g[:, 1] ** 2
    u = (g[:, 2] * b1 - g[:, 1] * b2) / det
    v = (g[:, 0] * b2 - g[:, 1] * b1) / det
    eps = 1e-9
    assert np.all(u >= -eps) and np.all(v >= -eps) and np.all(u + v <= 1 + eps)


def test_unit_cube_chi_square():
    m = box_mesh((0, 0, 0), (1, 1, 1))
    cloud = sample_point_cloud(m, 6000, stream(11, "cloud"))
    face = cloud.source_triangles // 2
    counts = np.bincount(face, minlength=6)
    chi2 = float(((counts - 1000.0) ** 2 / 1000.0).sum())
    assert chi2 < 20.52  # df = 5, alpha = 0.001


def test_cloud_determinism_and_prefix():
    m = box_mesh((0, 0, 0), (4, 2, 9))
    a = sample_point_cloud(m, 500, stream(9, "cloud"))
    b = sample_point_cloud(m, 500, stream(9, "cloud"))
    assert np.array_equal(a.points, b.points)
    long = sample_point_cloud(m, 1700, stream(9, "cloud"))
    assert np.array_equal(long.points[:500], a.points)


def test_cloud_mask_excludes_triangles():
    m = box_mesh((0, 0, 0), (1, 1, 1))
    mask = np.zeros(12, bool)
    mask[2:4] = True
    cloud = sample_point_cloud(m, 300, stream(0, "cloud"), mask)
    assert set(np.unique(cloud.source_triangles)) <= {2, 3}
    assert np.allclose(cloud.points[:, 2], 1.0)


def test_empty_cloud_rejected():
    with pytest.raises(ValueError):
        PointCloud(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        sample_point_cloud(box_mesh((0, 0, 0), (1, 1, 1)), 0, stream(0, "cloud"))


def test_point_triangle_distance_matches_oracle():
    rng = np.random.default_rng(4)
    a, b, c = (rng.normal(size=(400, 3)) for _ in range(3))
    p = rng.normal(size=(400, 3)) * 2
    fast = point_triangle_distance(p, a, b, c)
    slow = np.array([point_triangle_dist(*args) for args in zip(p, a, b, c)])
    assert np.allclose(fast, slow, atol=1e-9)


@pytest.mark.parametrize("k", range(100))
def test_manifold_report_matches_edge_oracle(k):
    cls = list(TypologyClass)[k % 5]
    massing = build_massing(DatasetConfig(samples=1), cls, stream(k, "massing"))
    mesh = place_modules(massing, massing_to_mesh(massing), None, 2, stream(k, "detailing"))
    for rep in validate_manifold(mesh):
        V, E, F, closed = edge_count_report(mesh.triangles[rep.triangles])
        assert (rep.n_vertices, rep.n_edges, rep.n_faces, rep.manifold) == (V, E, F, closed)


@settings(max_examples=50, deadline=None)
@given(size=st.tuples(*[st.floats(0.1, 50)] * 3), origin=st.tuples(*[st.floats(-100, 100)] * 3))
def test_box_euler_property(size, origin):
    (rep,) = validate_manifold(box_mesh(origin, size))
    assert rep.manifold and rep.euler == 2
    assert surface_area(box_mesh(origin, size)) == pytest.approx(
        2 * (size[0] * size[1] + size[1] * size[2] + size[0] * size[2]), rel=1e-12)
