import numpy as np
import pytest

from dtninv.mesh import (Mesh, MeshError, ObservationSpec, disk_mesh,
                         export_vertex_csv, export_vtk, fingerprint,
                         mark_boundary, unit_square_mesh)

PAPER40 = (("left", 0.4, 0.8), ("right", 0.2, 0.6),
           ("bottom", 0.3, 0.7), ("top", 0.5, 0.9))


def undirected_edges(mesh):
    t = mesh.triangles
    edges = set()
    for tri in t:
        for i, j in ((0, 1), (1, 2), (2, 0)):
            edges.add(frozenset((int(tri[i]), int(tri[j]))))
    return edges


@pytest.mark.parametrize("n,nv,nt,ne", [(1, 4, 2, 4), (2, 9, 8, 8), (64, 4225, 8192, 256)])
def test_square_counts(n, nv, nt, ne):
    mesh = unit_square_mesh(n)
    assert mesh.n_vertices == nv
    assert mesh.n_triangles == nt
    assert len(mesh.boundary_edges) == ne


def test_square_rejects_zero():
    with pytest.raises(ValueError):
        unit_square_mesh(0)


def test_square_vertex_positions():
    mesh = unit_square_mesh(4)
    # vertex (i, j) at (i/4, j/4) with id j*5 + i
    assert np.allclose(mesh.vertices[7], [0.5, 0.25])
    assert mesh.tri_areas.sum() == 1.0  # dyadic areas sum exactly


def test_positive_areas_and_euler():
    for mesh in (unit_square_mesh(5), disk_mesh((0.5, 0.5), 0.5, 0.06)):
        assert (mesh.tri_areas > 0).all()
        edges = undirected_edges(mesh)
        euler = mesh.n_vertices - len(edges) + mesh.n_triangles
        assert euler == 1


def test_boundary_edges_manifold():
    mesh = unit_square_mesh(6)
    counts = {}
    for tri in mesh.triangles:
        for i, j in ((0, 1), (1, 2), (2, 0)):
            key = frozenset((int(tri[i]), int(tri[j])))
            counts[key] = counts.get(key, 0) + 1
    boundary = {frozenset(map(int, e)) for e in mesh.boundary_edges}
    for key, c in counts.items():
        assert c == (1 if key in boundary else 2)


def test_boundary_loop_closes():
    for mesh in (unit_square_mesh(3), disk_mesh((0.5, 0.5), 0.5, 0.08)):
        e = mesh.boundary_edges
        assert (e[1:, 0] == e[:-1, 1]).all()
        assert e[0, 0] == e[-1, 1]
        assert len(set(map(int, mesh.boundary_vertices))) == len(mesh.boundary_vertices)


def test_normals_outward_unit():
    for mesh in (unit_square_mesh(4), disk_mesh((0.5, 0.5), 0.5, 0.07)):
        lens = np.hypot(mesh.boundary_normals[:, 0], mesh.boundary_normals[:, 1])
        assert np.allclose(lens, 1.0, atol=1e-12)
        mids = mesh.vertices[mesh.boundary_edges].mean(axis=1)
        cents = mesh.vertices[mesh.triangles[mesh.boundary_edge_tri]].mean(axis=1)
        dots = np.sum((mids - cents) * mesh.boundary_normals, axis=1)
        assert (dots > 0).all()


def test_boundary_weights_sum_to_perimeter():
    mesh = unit_square_mesh(9)
    assert abs(mesh.boundary_weights.sum() - 4.0) < 1e-12
    dm = disk_mesh((0.5, 0.5), 0.5, 0.05)
    polygon = dm.boundary_edge_lengths.sum()
    assert abs(dm.boundary_weights.sum() - polygon) < 1e-12


def test_disk_boundary_on_circle():
    mesh = disk_mesh((0.5, 0.5), 0.5, 0.02)
    r = np.hypot(*(mesh.vertices[mesh.boundary_vertices] - [0.5, 0.5]).T)
    assert np.abs(r - 0.5).max() <= 5e-13


def test_disk_area_and_edge_bound():
    h = 0.04
    mesh = disk_mesh((0.5, 0.5), 0.5, h)
    area = mesh.tri_areas.sum()
    assert abs(area - np.pi * 0.25) <= 2 * h * np.pi  # 2*target_h*perimeter
    p, t = mesh.vertices, mesh.triangles
    emax = 0.0
    for i, j in ((0, 1), (1, 2), (2, 0)):
        d = p[t[:, i]] - p[t[:, j]]
        emax = max(emax, np.hypot(d[:, 0], d[:, 1]).max())
    assert emax <= 1.5 * h


def test_disk_refinement_scaling():
    v1 = disk_mesh((0.5, 0.5), 0.5, 0.05).n_vertices
    v2 = disk_mesh((0.5, 0.5), 0.5, 0.025).n_vertices
    assert 3.5 <= v2 / v1 <= 4.5


def test_disk_rejects_degenerate():
    with pytest.raises(ValueError):
        disk_mesh((0.5, 0.5), 0.0, 0.01)
    with pytest.raises(ValueError):
        disk_mesh((0.5, 0.5), 0.5, 0.6)


def test_disk_deterministic():
    a = disk_mesh((0.5, 0.5), 0.5, 0.03)
    b = disk_mesh((0.5, 0.5), 0.5, 0.03)
    assert fingerprint(a) == fingerprint(b)


def test_observation_spec_validation():
    with pytest.raises(ValueError):
        ObservationSpec("full", (("left", 0.1, 0.2),))
    with pytest.raises(ValueError):
        ObservationSpec("partial", (("left", -0.1, 0.2),))
    with pytest.raises(ValueError):
        ObservationSpec("partial", (("diagonal", 0.1, 0.2),))


def test_mark_boundary_full():
    mesh = unit_square_mesh(8)
    mask = mark_boundary(mesh, ObservationSpec("full"))
    assert mask.observed.all()
    assert mask.gamma0_length == 0.0


def test_mark_boundary_strict_interior():
    mesh = unit_square_mesh(10)
    mask = mark_boundary(mesh, ObservationSpec("partial", (("left", 0.2, 0.4),)))
    bxy = mesh.vertices[mesh.boundary_vertices]
    for (x, y), obs in zip(bxy, mask.observed):
        if abs(x) < 1e-12 and abs(y - 0.3) < 1e-12:
            assert not obs
        else:
            assert obs


def test_mark_boundary_paper_mask_length():
    mesh = unit_square_mesh(64)
    mask = mark_boundary(mesh, ObservationSpec("partial", PAPER40))
    assert abs(mask.gamma0_length - 1.6) < 1.0 / 64
    assert abs(mask.gamma0_length / mesh.boundary_weights.sum() - 0.4) < 0.01


def test_mark_boundary_rejects_disk_exclusions():
    mesh = disk_mesh((0.5, 0.5), 0.5, 0.1)
    with pytest.raises(ValueError):
        mark_boundary(mesh, ObservationSpec("partial", (("left", 0.1, 0.2),)))


def test_exports(tmp_path):
    mesh = unit_square_mesh(3)
    mask = mark_boundary(mesh, ObservationSpec("partial", (("left", 0.2, 0.5),)))
    export_vtk(mesh, tmp_path / "m.vtk", point_data={"x": mesh.vertices[:, 0]})
    export_vertex_csv(mesh, tmp_path / "m.csv", mask)
    vtk = (tmp_path / "m.vtk").read_text()
    assert "POINTS 16 double" in vtk and "CELL_TYPES 18" in vtk
    rows = (tmp_path / "m.csv").read_text().strip().splitlines()
    assert rows[0] == "id,x,y,on_boundary,observed"
    assert len(rows) == 17


def test_degenerate_triangle_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(MeshError):
        Mesh(verts, np.array([[0, 1, 2]]), "unit_square")
