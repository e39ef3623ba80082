import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ewod.mesh import (ChannelGeometry, Electrode, FacetTag, Mesh, Region, build_channel_mesh,
                       dirichlet_boundary_value, refine_uniform)

from conftest import move_geometry


def classify_oracle(mesh: Mesh, geom: ChannelGeometry):
    """Brute-force facet classification from edge midpoints and neighbouring cell regions."""
    out = {}
    for f in range(mesh.facet_tag.size):
        a, b = mesh.nodes[mesh.facet_nodes(f)]
        mx, my = 0.5 * (a + b)
        on_outer = np.isclose(mx, geom.x_min) or np.isclose(mx, geom.x_max) or \
            np.isclose(my, geom.y_min) or np.isclose(my, geom.y_max)
        in_fluid_band = geom.y_fluid_min < my < geom.y_fluid_max
        on_fluid_line = np.isclose(my, geom.y_fluid_min) or np.isclose(my, geom.y_fluid_max)
        tag = 0
        if on_outer:
            vertical = np.isclose(a[0], b[0])
            tag |= FacetTag.OUTER_NEUMANN | FacetTag.GAMMA if (vertical and in_fluid_band) \
                else FacetTag.OUTER_DIRICHLET
        if on_fluid_line and geom.x_min < mx < geom.x_max:
            tag |= FacetTag.GAMMA
        out[f] = int(tag)
    return out


def test_desk_example_counts(coarse_mesh):
    m = coarse_mesh
    assert (m.nx, m.ny) == (10, 4)
    assert (m.cell_region == Region.FLUID).sum() == 20
    assert (m.cell_region == Region.DIELECTRIC).sum() == 20
    assert m.facets(FacetTag.GAMMA).size == 24


def test_facet_tags_match_oracle(coarse_mesh):
    tags = classify_oracle(coarse_mesh, coarse_mesh.geometry)
    assert all(coarse_mesh.facet_tag[f] == t for f, t in tags.items())


def test_unit_fluid_square_all_gamma():
    geom = ChannelGeometry(0.0, 1.0, 0.0, 1.0, 0.25)
    m = build_channel_mesh(geom, 2, 2, 1)
    g = m.facets(FacetTag.GAMMA)
    assert g.size == 8
    neu = m.facets(FacetTag.OUTER_NEUMANN)
    assert neu.size == 4 and np.all(np.abs(m.facet_normal[neu][:, 0]) == 1.0)


def test_gamma_closed_and_outward(coarse_mesh):
    m = coarse_mesh
    g = m.facets(FacetTag.GAMMA)
    assert np.all(m.cell_region[m.facet_cell[g]] == Region.FLUID)
    nodes = m.facet_nodes(g)
    counts = np.bincount(nodes.ravel(), minlength=m.n_nodes)
    assert np.all(counts[counts > 0] == 2)  # each boundary vertex on exactly two facets
    mid = m.nodes[nodes].mean(axis=1)
    centre = np.array([0.0, 0.5])
    assert np.all(np.einsum("fk,fk->f", mid - centre, m.facet_normal[g]) > 0)


def test_outer_partition(coarse_mesh):
    m = coarse_mesh
    d = set(m.facets(FacetTag.OUTER_DIRICHLET))
    n = set(m.facets(FacetTag.OUTER_NEUMANN))
    assert not d & n
    perimeter = sum(m.facet_length(f) for f in d | n)
    assert np.isclose(perimeter, 2 * 10 + 2 * 2)


def test_fluid_area_and_additivity(coarse_mesh):
    m = coarse_mesh
    assert np.isclose(m.region_area(Region.FLUID), 10.0, rtol=1e-15)
    assert np.isclose(m.cell_area().sum(), 10.0 + 2 * 10 * 0.5, rtol=1e-15)


def test_refine_counts():
    one = Mesh.from_coordinates([0.0, 1.0], [0.0, 1.0])
    r = refine_uniform(one)
    assert r.n_cells == 4 and r.n_nodes == 9
    m = build_channel_mesh(move_geometry(), 10, 2, 1)
    r = refine_uniform(m)
    assert r.n_cells == 160
    assert r.n_nodes == m.n_nodes + m.n_edges + m.n_cells
    assert refine_uniform(r).n_cells == 16 * m.n_cells


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 12), st.integers(1, 4), st.integers(1, 3))
def test_refinement_preserves_measures(nx, nyf, nyp):
    m = build_channel_mesh(move_geometry(), nx, nyf, nyp)
    r = refine_uniform(m)
    for reg in Region:
        assert np.isclose(r.region_area(reg), m.region_area(reg), rtol=1e-14)
    assert np.isclose(r.facet_length(r.facets(FacetTag.GAMMA)).sum(),
                      m.facet_length(m.facets(FacetTag.GAMMA)).sum(), rtol=1e-14)


def test_electrode_values():
    g = move_geometry()
    assert dirichlet_boundary_value(g, (2.0, -0.5)) == 20.0
    assert dirichlet_boundary_value(g, (-2.0, -0.5)) == 0.0
    assert dirichlet_boundary_value(g, (0.0, -0.5)) == 20.0
    assert dirichlet_boundary_value(g, (5.0, -0.5)) == 20.0  # rightmost segment closed
    assert dirichlet_boundary_value(g, (1.0, 1.5)) == 0.0
    with pytest.raises(ValueError):
        dirichlet_boundary_value(g, (0.0, 0.5))


def test_half_open_segments():
    g = ChannelGeometry(electrodes=(Electrode("bottom", -5, -1.5, 1.0), Electrode("bottom", -1.5, 5, 2.0)))
    assert dirichlet_boundary_value(g, (-1.5, -0.5)) == 2.0
    assert dirichlet_boundary_value(g, (-5.0, -0.5)) == 1.0


@pytest.mark.parametrize("kw", [
    dict(x_min=1.0, x_max=1.0),
    dict(y_fluid_min=1.0, y_fluid_max=0.5),
    dict(plate_thickness=0.0),
    dict(electrodes=(Electrode("bottom", 4.0, 6.0, 1.0),)),
    dict(electrodes=(Electrode("top", 0.0, 2.0, 1.0), Electrode("top", 1.0, 3.0, 1.0))),
])
def test_geometry_errors(kw):
    with pytest.raises(ValueError):
        ChannelGeometry(**kw)


def test_electrode_errors():
    with pytest.raises(ValueError):
        Electrode("side", 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        Electrode("top", 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        build_channel_mesh(move_geometry(), 0, 2, 1)


def test_dirichlet_values_on_mesh(coarse_mesh):
    nodes, vals = coarse_mesh.dirichlet_values()
    xy = coarse_mesh.nodes[nodes]
    bottom = np.isclose(xy[:, 1], -0.5)
    assert np.all(vals[bottom & (xy[:, 0] >= 0)] == 20.0)
    assert np.all(vals[~bottom | (xy[:, 0] < 0)] == 0.0)
