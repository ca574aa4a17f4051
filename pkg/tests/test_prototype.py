import numpy as np
import pytest

from geoproto.adaptive import AdaptiveParams
from geoproto.errors import ChannelMismatch, ShapeMismatch
from geoproto.oracles import loop_weighted_prototype
from geoproto.prototype import (
    Prototype,
    cell_bounds,
    density_field,
    global_prototype,
    grid_prototypes,
    prototype_matrix,
    unified_set,
)

from conftest import random_mask


def test_uniform_feature_identity():
    f = np.tile(np.array([1.0, -2.0, 3.0])[:, None, None], (1, 4, 4))
    m = np.ones((4, 4))
    p = global_prototype(f, m, np.ones((4, 4)))
    np.testing.assert_allclose(p.vector, [1, -2, 3], rtol=1e-6)
    assert p.support_weight == 16.0


def test_two_pixel_example():
    f = np.array([[[0.0, 4.0]]])
    p = global_prototype(f, np.ones((1, 2)), np.array([[1.0, 3.0]]))
    assert p.vector[0] == pytest.approx(12.0 / (4.0 + 1e-6), abs=1e-12)


def test_single_pixel():
    f = np.zeros((2, 3, 3))
    f[:, 1, 1] = [5.0, -1.0]
    m = np.zeros((3, 3))
    m[1, 1] = 1
    np.testing.assert_allclose(global_prototype(f, m, np.ones((3, 3))).vector, [5, -1], rtol=1e-6)


def test_matches_loop_oracle(rng):
    for _ in range(30):
        f = rng.normal(size=(4, 8, 8))
        w = rng.random((8, 8)) * random_mask(rng, 8, 8)
        got = global_prototype(f, np.ones((8, 8)), w).vector
        np.testing.assert_allclose(got, loop_weighted_prototype(f, w), atol=1e-12)


def test_grid_matches_loop_oracle(rng):
    f = rng.normal(size=(3, 32, 32))
    m = random_mask(rng, 32, 32, 0.5)
    w = rng.random((32, 32))
    rho = 1 + rng.random((32, 32))
    protos = grid_prototypes(f, m, w, rho)
    for p in protos:
        r, c = p.cell
        sl = (slice(4 * r, 4 * r + 4), slice(4 * c, 4 * c + 4))
        want = loop_weighted_prototype(f[:, sl[0], sl[1]], (rho * w * m)[sl])
        np.testing.assert_allclose(p.vector, want, atol=1e-12)


def test_permutation_invariance(rng):
    f = rng.normal(size=(5, 6, 7))
    w = rng.random((6, 7))
    perm = rng.permutation(42)
    fp = f.reshape(5, -1)[:, perm].reshape(5, 6, 7)
    wp = w.ravel()[perm].reshape(6, 7)
    a = global_prototype(f, np.ones((6, 7)), w).vector
    b = global_prototype(fp, np.ones((6, 7)), wp).vector
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_degenerate_mass_goes_to_zero(rng):
    f = rng.normal(size=(3, 4, 4))
    prev = np.inf
    for scale in (1e-3, 1e-6, 1e-9, 1e-12, 0.0):
        v = global_prototype(f, np.ones((4, 4)), np.full((4, 4), scale)).vector
        assert np.all(np.isfinite(v))
        n = np.linalg.norm(v)
        assert n <= prev + 1e-12
        prev = n
    assert prev == 0.0


def test_empty_cells_omitted_and_counting():
    f = np.ones((2, 32, 32))
    m = np.zeros((32, 32))
    m[:4, :4] = 1
    protos = grid_prototypes(f, m, np.ones((32, 32)), np.ones((32, 32)))
    assert [p.cell for p in protos] == [(0, 0)]
    np.testing.assert_allclose(protos[0].vector, 1.0, rtol=1e-6)
    full = grid_prototypes(f, np.ones((32, 32)), np.ones((32, 32)), np.ones((32, 32)))
    gp = global_prototype(f, np.ones((32, 32)), np.ones((32, 32)))
    assert len(unified_set(gp, full)) == 65
    assert len(unified_set(gp, [])) == 1


def test_occupied_cells_monotone_in_mask(rng):
    for _ in range(20):
        f = rng.normal(size=(2, 32, 32))
        small = random_mask(rng, 32, 32, 0.05)
        big = np.maximum(small, random_mask(rng, 32, 32, 0.1))
        w = rng.random((32, 32)) + 0.01
        a = {p.cell for p in grid_prototypes(f, small, w, np.ones((32, 32)))}
        b = {p.cell for p in grid_prototypes(f, big, w, np.ones((32, 32)))}
        assert a <= b


def test_channel_and_shape_mismatch():
    gp = Prototype(np.zeros(256), "global")
    with pytest.raises(ChannelMismatch):
        unified_set(gp, [Prototype(np.zeros(128), "grid", (0, 0))])
    with pytest.raises(ShapeMismatch):
        global_prototype(np.zeros((2, 4, 4)), np.ones((3, 3)), np.ones((3, 3)))


def test_density_examples(rng):
    g = np.full((5, 5), 3.0)
    np.testing.assert_array_equal(density_field(g, AdaptiveParams()), 1.0)
    ramp = np.tile(np.arange(5) * 0.5, (5, 1))
    rho = density_field(ramp, AdaptiveParams(sigma_density=2.0, tau_density=1.0))
    np.testing.assert_allclose(rho, 2.0)
    from geoproto.prototype import central_gradient_norm
    p = AdaptiveParams(sigma_density=4.0, tau_density=3.0)
    for _ in range(20):
        g = rng.random((9, 9)) * 5
        rho = density_field(g, p)
        assert rho.min() >= 1.0
        assert rho.max() <= 1 + 12 * central_gradient_norm(g).max() + 1e-12


def test_cell_bounds_cover():
    for n in (5, 31, 32, 33):
        b = cell_bounds(n, 8)
        assert b[0][0] == 0 and b[-1][1] == n
        assert all(x[1] == y[0] for x, y in zip(b, b[1:]))


def test_prototype_matrix_layout():
    gp = Prototype(np.array([1.0, 2.0]), "global", None, 3.0)
    cell = Prototype(np.array([4.0, 5.0]), "grid", (1, 2), 0.5)
    mat = prototype_matrix(unified_set(gp, [cell]))
    np.testing.assert_array_equal(mat, [[4, 5, 1, 1, 2, 0.5], [1, 2, 0, -1, -1, 3]])
