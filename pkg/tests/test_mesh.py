import numpy as np
import pytest

from ridk.mesh import TWO_PI, Mesh, build_interval, build_torus2d, edge_rule, facet_trace_points


def test_interval_uniform_partition():
    m = build_interval(4)
    assert m.nelem == 4 and m.nfacet == 4
    assert np.allclose(m.elem_measures, np.pi / 2)
    assert np.isclose(m.h, np.pi / 2)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 64])
def test_interval_measures_sum(n):
    m = build_interval(n)
    assert abs(m.elem_measures.sum() - TWO_PI) / TWO_PI < 1e-12


def test_interval_degenerate_periodic():
    m = build_interval(1)
    assert m.nelem == 1 and m.nfacet == 1
    assert m.facet_elems[0, 0] == m.facet_elems[0, 1] == 0


def test_interval_rejects_zero():
    with pytest.raises(ValueError):
        build_interval(0)


def test_torus2d_counts_and_areas():
    m = build_torus2d(2, 2)
    assert m.nelem == 8
    m = build_torus2d(3, 5)
    assert m.nelem == 2 * 3 * 5
    assert abs(m.elem_measures.sum() - TWO_PI**2) / TWO_PI**2 < 1e-12


def test_torus2d_rejects_degenerate():
    with pytest.raises(ValueError):
        build_torus2d(1, 4)
    with pytest.raises(ValueError):
        build_torus2d(4, 1)


@pytest.mark.parametrize("mesh", [build_interval(5), build_torus2d(3, 4)])
def test_unit_normals(mesh):
    norms = np.linalg.norm(mesh.facet_normals, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)


@pytest.mark.parametrize("mesh", [build_interval(6), build_interval(1), build_torus2d(2, 3)])
def test_closed_surface_identity(mesh):
    # outward normals weighted by facet measure sum to zero on each element
    for e in range(mesh.nelem):
        total = np.zeros(mesh.d)
        for k in range(mesh.d + 1):
            f = mesh.elem_facets[e, k]
            total += mesh.elem_facet_sign[e, k] * mesh.facet_measures[f] * mesh.facet_normals[f]
        assert np.linalg.norm(total) < 1e-12


@pytest.mark.parametrize("mesh", [build_interval(6), build_torus2d(4, 2)])
def test_connectivity_involution(mesh):
    for f in range(mesh.nfacet):
        for side in (0, 1):
            e, loc = mesh.facet_elems[f, side], mesh.facet_local[f, side]
            assert mesh.elem_facets[e, loc] == f
    assert (mesh.elem_facets >= 0).all()


def test_refinement_halves_h():
    for n in (8, 16):
        assert build_interval(2 * n).h == build_interval(n).h / 2
    assert np.isclose(build_torus2d(8, 8).h, build_torus2d(4, 4).h / 2)


def test_edge_rule_exactness():
    s, w = edge_rule(3)
    assert abs(np.dot(w, s**2) - 1.0 / 3.0) < 1e-14
    assert abs(np.dot(w, s**5) - 1.0 / 6.0) < 1e-14
    s, w = edge_rule(2)
    assert abs(np.dot(w, s**3) - 1.0 / 4.0) < 1e-14
    with pytest.raises(ValueError):
        edge_rule(0)


def test_trace_points_weight_normalization():
    m1 = build_interval(7)
    pts, w = facet_trace_points(m1, 3, 4)
    assert w.shape == (1,) and w[0] == 1.0
    assert pts.shape == (1, 1)
    m2 = build_torus2d(3, 3)
    for f in (0, 5, m2.nfacet - 1):
        pts, w = facet_trace_points(m2, f, 3)
        assert abs(w.sum() - m2.facet_measures[f]) < 1e-13


def test_trace_points_agree_from_both_sides():
    # the same global parameter s must land on the same torus point whether
    # mapped through the minus or the plus element chart
    m = build_torus2d(3, 4)
    s, _ = edge_rule(3)
    for f in range(m.nfacet):
        xs = []
        for side in (0, 1):
            e, loc = m.facet_elems[f, side], m.facet_local[f, side]
            ref = m.facet_reference_points(loc, m.facet_orient[f, side], s)
            xs.append(m.wrap(m.reference_to_physical(e, ref)))
        diff = np.abs(xs[0] - xs[1])
        diff = np.minimum(diff, TWO_PI - diff)  # wrapped comparison
        assert diff.max() < 1e-12


def test_normal_points_out_of_minus_element():
    m = build_torus2d(4, 4)
    s = np.array([0.5])
    for f in range(m.nfacet):
        e, loc = m.facet_elems[f, 0], m.facet_local[f, 0]
        ref = m.facet_reference_points(loc, m.facet_orient[f, 0], s)
        mid = m.reference_to_physical(e, ref)[0]
        centroid = m.elem_coords[e].mean(axis=0)
        assert np.dot(m.facet_normals[f], mid - centroid) > 0
