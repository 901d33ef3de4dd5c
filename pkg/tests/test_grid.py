import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdn import ConfigurationError, DataError, GeometryError, NodeField, build_grid, build_regions, sample_field


def test_line_grid_nodes():
    g = build_grid(1, 1.0, 9)
    assert g.n_nodes == 9
    assert g.h == pytest.approx(0.2)
    np.testing.assert_allclose(g.coords[:, 0], np.linspace(-0.8, 0.8, 9), atol=1e-15)


def test_plane_grid_size():
    g = build_grid(2, 1.0, 8)
    assert g.n_nodes == 64
    assert g.h == pytest.approx(2 / 9)
    assert g.coords.shape == (64, 2)


@pytest.mark.parametrize("args", [(1, 1.0, 7), (3, 1.0, 9), (1, 0.0, 9), (1, -1.0, 9)])
def test_grid_preconditions(args):
    with pytest.raises(ConfigurationError):
        build_grid(*args)


def test_row_major_coordinates():
    g = build_grid(2, 1.5, 10)
    for i in (0, 7, 10, 55, 99):
        k0, k1 = divmod(i, 10)
        np.testing.assert_array_equal(g.coords[i], [-1.5 + (k0 + 1) * g.h, -1.5 + (k1 + 1) * g.h])


def test_nodes_strictly_inside():
    g = build_grid(2, 1.0, 12)
    assert np.all(np.abs(g.coords) < 1.0)


@pytest.mark.parametrize("dim,M", [(1, 9), (1, 40), (2, 8), (2, 13)])
def test_nearest_node_round_trip(dim, M):
    g = build_grid(dim, 1.0, M)
    for i in range(g.n_nodes):
        assert g.nearest_node(g.coords[i]) == i


def test_regions_basic():
    g = build_grid(1, 1.0, 19)
    r = build_regions(g, [-0.4, 0.0], [0.4, 0.7])
    assert r.idx_omega.size > 0 and r.idx_w.size > 0
    assert np.intersect1d(r.idx_omega, r.idx_w).size == 0
    gap = np.abs(g.coords[r.idx_omega, 0][:, None] - g.coords[r.idx_w, 0][None, :]).min()
    assert gap >= 2 * g.h - 1e-12


def test_regions_overlap_rejected():
    g = build_grid(1, 1.0, 19)
    with pytest.raises(GeometryError):
        build_regions(g, [-0.4, 0.2], [0.0, 0.7])


def test_regions_touching_rejected():
    # the boxes are disjoint but their nearest nodes are a single cell apart
    g = build_grid(1, 1.0, 19)
    h = g.h
    omega = [-0.4, 0.0 + 0.01]
    w = [h - 0.01, 0.7]
    xo = g.coords[(g.coords[:, 0] >= omega[0]) & (g.coords[:, 0] <= omega[1]), 0]
    xw = g.coords[(g.coords[:, 0] >= w[0]) & (g.coords[:, 0] <= w[1]), 0]
    assert np.abs(xo[:, None] - xw[None, :]).min() < 2 * h
    with pytest.raises(GeometryError):
        build_regions(g, omega, w)


def test_empty_region_rejected():
    g = build_grid(1, 1.0, 9)
    with pytest.raises(GeometryError):
        build_regions(g, [-0.45, -0.41], [0.3, 0.7])


def test_box_outside_grid_rejected():
    g = build_grid(1, 1.0, 9)
    with pytest.raises(GeometryError):
        build_regions(g, [-1.2, -0.3], [0.3, 0.7])


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(-0.9, 0.3),
    la=st.floats(0.05, 0.5),
    gap=st.floats(0.0, 0.4),
    lw=st.floats(0.05, 0.5),
    M=st.integers(8, 60),
)
def test_partition_property(a, la, gap, lw, M):
    g = build_grid(1, 1.0, M)
    om = [a, a + la]
    w = [a + la + gap, min(a + la + gap + lw, 0.99)]
    try:
        r = build_regions(g, om, w)
    except GeometryError:
        return
    allidx = np.arange(g.n_nodes)
    np.testing.assert_array_equal(np.sort(np.concatenate([r.idx_omega, r.idx_ext])), allidx)
    assert np.all(np.isin(r.idx_w, r.idx_ext))
    assert np.intersect1d(r.idx_omega, r.idx_w).size == 0
    d = np.abs(g.coords[r.idx_omega, 0][:, None] - g.coords[r.idx_w, 0][None, :]).min()
    assert d >= 2 * g.h - 1e-12


def test_layers_peel_region():
    g = build_grid(2, 1.0, 20)
    r = build_regions(g, [[-0.7, 0.0], [-0.5, 0.5]], [[0.3, 0.8], [-0.5, 0.5]])
    layers = r.omega_layers()
    np.testing.assert_array_equal(np.sort(np.concatenate(layers)), r.idx_omega)
    np.testing.assert_array_equal(layers[0], r.idx_omega_boundary)


def test_sample_constant():
    g = build_grid(1, 1.0, 9)
    f = sample_field(g, lambda x: 1.0)
    np.testing.assert_array_equal(np.asarray(f), np.ones(9))


def test_sample_identity():
    g = build_grid(1, 1.0, 9)
    f = sample_field(g, lambda x: x[..., 0])
    np.testing.assert_array_equal(np.asarray(f), g.coords[:, 0])


def test_sample_bump_peak():
    g = build_grid(2, 1.0, 15)
    c = np.array([-0.33, 0.1])
    f = np.asarray(sample_field(g, lambda x: np.exp(-np.sum((np.atleast_2d(x) - c) ** 2, axis=-1) / 0.05)))
    assert np.all(f > 0)
    assert np.argmax(f) == g.nearest_node(c)
    ref = np.exp(-np.sum((g.coords - c) ** 2, axis=1) / 0.05)
    np.testing.assert_allclose(f, ref, rtol=1e-15)


def test_sample_non_finite():
    g = build_grid(1, 1.0, 9)
    with np.errstate(divide="ignore", invalid="ignore"), pytest.raises(DataError):
        sample_field(g, lambda x: np.log(x[..., 0]))


def test_node_field_is_frozen_copy():
    g = build_grid(1, 1.0, 9)
    vals = np.arange(9.0)
    f = NodeField(vals, g)
    vals[0] = 99.0
    assert np.asarray(f)[0] == 0.0
    with pytest.raises(ValueError):
        f.values[0] = 1.0
