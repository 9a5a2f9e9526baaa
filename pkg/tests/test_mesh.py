import math

import numpy as np
import pytest

from meshes import (
    STATS_HEADER,
    MeshError,
    MeshParseError,
    NonManifoldError,
    OrientationError,
    TriangleMesh,
    get_generator,
    load_mesh,
    make_sphere,
    make_torus,
    refine_structured,
    write_off,
)
from meshes.errors import DegenerateTriangleError, TopologyError


# ──────────────────────────────────────────────
# OFF reader
# ──────────────────────────────────────────────

def test_load_tetrahedron(fixtures_dir):
    mesh = load_mesh(fixtures_dir / "tetrahedron.off")
    assert (mesh.n_vertices, mesh.n_edges, mesh.n_cells) == (4, 6, 4)
    assert mesh.euler_characteristic == 2
    assert mesh.genus() == 0
    assert mesh.name == "tetrahedron"
    assert mesh.surface_area == pytest.approx(1.5 + math.sqrt(3) / 2)


def test_outward_normals_on_tetrahedron(fixtures_dir):
    mesh = load_mesh(fixtures_dir / "tetrahedron.off")
    center = mesh.vertices.mean(axis=0)
    outward = np.einsum("cd,cd->c", mesh.normals, mesh.centroids - center)
    assert np.all(outward > 0)


def test_flipped_face_is_rejected(fixtures_dir):
    with pytest.raises(OrientationError) as info:
        load_mesh(fixtures_dir / "flipped.off")
    assert info.value.edge_index >= 0


def test_nonmanifold_edge_is_rejected(fixtures_dir):
    with pytest.raises(NonManifoldError) as info:
        load_mesh(fixtures_dir / "nonmanifold.off")
    assert info.value.edge == (0, 1)


def test_missing_header(tmp_path):
    path = tmp_path / "bad.off"
    path.write_text("4 4 6\n0 0 0\n", encoding="utf-8")
    with pytest.raises(MeshParseError):
        load_mesh(path)


def test_truncated_body(tmp_path):
    path = tmp_path / "short.off"
    path.write_text("OFF\n4 4 6\n0 0 0\n1 0 0\n", encoding="utf-8")
    with pytest.raises(MeshParseError):
        load_mesh(path)


def test_quad_faces_are_rejected(tmp_path):
    path = tmp_path / "quad.off"
    path.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n", encoding="utf-8")
    with pytest.raises(MeshParseError):
        load_mesh(path)


def test_write_then_load_keeps_geometry(tmp_path, sphere1):
    path = write_off(sphere1, tmp_path / "sphere.off")
    again = load_mesh(path)
    np.testing.assert_array_equal(again.cells, sphere1.cells)
    np.testing.assert_allclose(again.vertices, sphere1.vertices, rtol=0, atol=1e-15)
    assert again.content_hash() == sphere1.content_hash()


# ──────────────────────────────────────────────
# Validation
# ──────────────────────────────────────────────

def test_repeated_vertex_is_degenerate():
    with pytest.raises(DegenerateTriangleError) as info:
        TriangleMesh(np.eye(3), [[0, 1, 1]])
    assert info.value.cell_index == 0


def test_two_disjoint_tetrahedra_are_disconnected(fixtures_dir):
    tet = load_mesh(fixtures_dir / "tetrahedron.off")
    vertices = np.vstack([tet.vertices, tet.vertices + 5.0])
    cells = np.vstack([tet.cells, tet.cells + 4])
    with pytest.raises(TopologyError):
        TriangleMesh(vertices, cells)


def test_unknown_generator():
    with pytest.raises(MeshError):
        get_generator("cube")


def test_mesh_errors_are_value_errors():
    assert issubclass(MeshError, ValueError)


# ──────────────────────────────────────────────
# Generators and refinement
# ──────────────────────────────────────────────

@pytest.mark.parametrize("level", [0, 1, 2])
def test_sphere_counts(level):
    mesh = make_sphere(1.0, level)
    assert mesh.n_cells == 20 * 4 ** level
    assert mesh.n_edges == 30 * 4 ** level
    assert mesh.n_vertices == 10 * 4 ** level + 2
    assert mesh.genus() == 0
    np.testing.assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, rtol=1e-14)


def test_sphere_area_grows_toward_exact():
    areas = [make_sphere(2.0, level).surface_area for level in range(4)]
    assert all(a < b for a, b in zip(areas, areas[1:]))
    assert areas[-1] < 4 * math.pi * 4.0
    assert areas[-1] > 0.97 * 4 * math.pi * 4.0


def test_torus_is_genus_one(torus_small):
    assert (torus_small.n_vertices, torus_small.n_edges, torus_small.n_cells) == (32, 96, 64)
    assert torus_small.euler_characteristic == 0
    assert torus_small.genus() == 1


def test_refined_torus_keeps_genus(torus_small):
    refined = refine_structured(torus_small)
    assert refined.n_cells == 4 * torus_small.n_cells
    assert refined.genus() == 1
    assert refined.h < torus_small.h


def test_torus_rejects_bad_radii():
    with pytest.raises(MeshError):
        make_torus(0.5, 2.0)


def test_sphere_name_carries_level():
    assert make_sphere(1.5, 1).name == "sphere-r1.5-L1"


# ──────────────────────────────────────────────
# Edge and RWG bookkeeping
# ──────────────────────────────────────────────

def test_edges_sorted_and_unique(sphere1):
    assert np.all(sphere1.edges[:, 0] < sphere1.edges[:, 1])
    keys = sphere1.edges[:, 0] * sphere1.n_vertices + sphere1.edges[:, 1]
    assert np.all(np.diff(keys) > 0)


def test_plus_cell_traverses_edge_forward(sphere1):
    for n, (c_plus, c_minus) in enumerate(sphere1.edge_cells):
        v1, v2 = sphere1.edges[n]
        plus = list(sphere1.cells[c_plus])
        minus = list(sphere1.cells[c_minus])
        assert plus[(plus.index(v1) + 1) % 3] == v2
        assert minus[(minus.index(v2) + 1) % 3] == v1


def test_rwg_local_opposite_vertex(sphere1):
    edge_index, sign = sphere1.rwg_local
    for c in range(sphere1.n_cells):
        for i in range(3):
            n = edge_index[c, i]
            assert sphere1.cells[c, i] not in sphere1.edges[n]
            side = 0 if sign[c, i] > 0 else 1
            assert sphere1.edge_cells[n, side] == c
            assert sphere1.edge_free_vertices[n, side] == sphere1.cells[c, i]


def test_each_edge_appears_twice_in_rwg_local(sphere1):
    edge_index, sign = sphere1.rwg_local
    counts = np.bincount(edge_index.ravel(), minlength=sphere1.n_edges)
    assert np.all(counts == 2)
    totals = np.bincount(edge_index.ravel(), weights=sign.ravel(), minlength=sphere1.n_edges)
    np.testing.assert_array_equal(totals, 0.0)


def test_icosahedron_neighbour_relations(sphere0):
    topo = sphere0.topology
    assert np.all(topo.cells_at_vertex == 5)
    np.testing.assert_array_equal(np.asarray(topo.edge_adjacency.sum(axis=1)).ravel(), 3)
    np.testing.assert_array_equal(np.asarray(topo.vertex_adjacency.sum(axis=1)).ravel(), 6)
    c_plus, c_minus = sphere0.edge_cells[0]
    assert topo.relation(c_plus, c_minus) == "edge"
    assert topo.relation(3, 3) == "identical"


# ──────────────────────────────────────────────
# Reporting
# ──────────────────────────────────────────────

def test_stats_row_matches_header(sphere1):
    values = sphere1.stats_row().split(",")
    assert len(values) == len(STATS_HEADER.split(","))
    assert values[:4] == ["42", "120", "80", "0"]
    stats = sphere1.stats()
    assert stats["h_min"] <= stats["h_avg"] <= stats["h_max"]


def test_content_hash_changes_on_refinement(sphere0, sphere1):
    assert sphere0.content_hash() == make_sphere(1.0, 0).content_hash()
    assert sphere0.content_hash() != sphere1.content_hash()


def test_mesh_arrays_are_read_only(sphere0):
    with pytest.raises(ValueError):
        sphere0.vertices[0, 0] = 2.0
