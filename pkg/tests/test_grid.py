import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reactive_ro.errors import ConfigError
from reactive_ro.grid import (CHANNEL_TAGS, FaceField, ScalarField, build_grid, divergence,
                              gradient, laplacian, tvd_corrections, tvd_face_value, van_leer)


class TestBuildGrid:
    def test_reference_mesh_spacing(self):
        g = build_grid(0.02, 0.003, 600, 200)
        assert g.dx == pytest.approx(3.333333e-5, rel=1e-6)
        assert g.dy == pytest.approx(1.5e-5, rel=1e-12)

    def test_single_cell(self):
        g = build_grid(0.01, 0.01, 1, 1)
        assert g.n_cells == 1
        assert g.dx == 0.01

    def test_arithmetic(self):
        assert build_grid(0.01, 1.0, 4, 2).dx == 0.0025

    def test_default_tags(self):
        g = build_grid(1.0, 1.0, 2, 2)
        assert g.tags == CHANNEL_TAGS
        assert g.side_of("membrane") == ["south"]

    @pytest.mark.parametrize("kw, key", [
        (dict(L=0.0), "[geometry].L"), (dict(H=-1.0), "[geometry].H"),
        (dict(nx=0), "[geometry].nx"), (dict(ny=2.5), "[geometry].ny"),
        (dict(Z=0.0), "[geometry].Z"),
    ])
    def test_invalid(self, kw, key):
        args = dict(L=1.0, H=1.0, nx=2, ny=2, Z=1.0)
        args.update(kw)
        with pytest.raises(ConfigError) as err:
            build_grid(**args)
        assert err.value.key == key

    def test_bad_tags(self):
        with pytest.raises(ConfigError):
            build_grid(1, 1, 2, 2, tags={"west": "inlet"})
        with pytest.raises(ConfigError):
            build_grid(1, 1, 2, 2, tags={**CHANNEL_TAGS, "north": "lid"})

    def test_coordinates(self):
        g = build_grid(2.0, 1.0, 4, 2)
        np.testing.assert_allclose(g.xc, [0.25, 0.75, 1.25, 1.75])
        np.testing.assert_allclose(g.yf, [0.0, 0.5, 1.0])
        X, Y = g.mesh()
        assert X.shape == g.shape and Y[0, 1] == 0.75

    def test_refined(self):
        g = build_grid(1.0, 2.0, 3, 4).refined()
        assert (g.nx, g.ny) == (6, 8)


class TestFields:
    def test_scalar_defaults_to_zero_gradient(self):
        g = build_grid(1, 1, 3, 2)
        f = ScalarField(g, np.arange(6.0).reshape(3, 2))
        np.testing.assert_array_equal(f.boundary["west"], [0.0, 1.0])
        np.testing.assert_array_equal(f.boundary["north"], [1.0, 3.0, 5.0])
        assert f.values.size == g.n_cells

    def test_scalar_broadcast_and_copy(self):
        g = build_grid(1, 1, 3, 2)
        f = ScalarField(g, 2.0, {"west": 5.0})
        c = f.copy()
        c.values[0, 0] = -1
        c.boundary["west"][0] = 0
        assert f.values[0, 0] == 2.0 and f.boundary["west"][0] == 5.0
        assert f.is_finite()
        c.values[1, 1] = np.nan
        assert not c.is_finite()

    def test_face_field_counts(self):
        g = build_grid(1, 1, 3, 2)
        f = FaceField(g)
        assert f.n_faces == 4 * 2 + 3 * 3
        with pytest.raises(ValueError):
            FaceField(g, x=np.zeros((3, 2)))

    def test_outward_sign(self):
        g = build_grid(1, 1, 2, 2)
        f = FaceField(g, np.ones((3, 2)), np.ones((2, 3)))
        np.testing.assert_array_equal(f.outward("west"), [-1, -1])
        np.testing.assert_array_equal(f.outward("north"), [1, 1])


def _loop_divergence(flux):
    g = flux.grid
    out = np.zeros(g.shape)
    for i in range(g.nx):
        for j in range(g.ny):
            out[i, j] = (flux.x[i + 1, j] - flux.x[i, j] + flux.y[i, j + 1] - flux.y[i, j]) / g.volume
    return out


class TestDivergence:
    def test_uniform_flux(self):
        g = build_grid(1, 1, 4, 3)
        f = FaceField(g, np.full((5, 3), 0.3), np.full((4, 4), -0.2))
        np.testing.assert_allclose(divergence(f).values, 0.0, atol=1e-15)

    def test_linear_field(self):
        g = build_grid(4, 4, 4, 4)
        f = FaceField(g, np.repeat(g.xf[:, None], 4, axis=1) * g.area_x)
        np.testing.assert_allclose(divergence(f).values, 1.0, rtol=1e-14)

    def test_random_against_loop(self, rng):
        g = build_grid(0.3, 0.2, 7, 5, Z=0.5)
        f = FaceField(g, rng.normal(size=(8, 5)), rng.normal(size=(7, 6)))
        ref = _loop_divergence(f)
        np.testing.assert_allclose(divergence(f).values, ref, rtol=1e-14, atol=1e-14 * np.abs(ref).max())


class TestGradientLaplacian:
    def test_constant(self):
        g = build_grid(1, 1, 5, 4)
        np.testing.assert_array_equal(gradient(ScalarField(g, 3.0)), 0.0)
        np.testing.assert_array_equal(laplacian(ScalarField(g, 3.0)).values, 0.0)

    def test_linear_exact_inside(self):
        g = build_grid(1, 1, 6, 5)
        X, Y = g.mesh()
        gr = gradient(ScalarField(g, 2 * X))
        np.testing.assert_allclose(gr[1:-1, :, 0], 2.0, rtol=1e-12)
        np.testing.assert_allclose(gr[..., 1], 0.0, atol=1e-12)

    def test_linear_with_exact_boundaries(self):
        g = build_grid(1, 1, 6, 5)
        X, _ = g.mesh()
        f = ScalarField(g, 2 * X, {"west": 0.0, "east": 2.0})
        np.testing.assert_allclose(gradient(f)[..., 0], 2.0, rtol=1e-12)

    def test_sine_second_order(self):
        errs = []
        for n in (32, 64, 128):
            g = build_grid(1.0, 1.0, n, 3)
            X, _ = g.mesh()
            f = ScalarField(g, np.sin(np.pi * X), {"west": 0.0, "east": 0.0})
            gr = gradient(f)[..., 0]
            errs.append(np.max(np.abs(gr - np.pi * np.cos(np.pi * X))[2:-2]))
        rates = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(rates > 1.9)

    def test_quadratic_laplacian(self):
        g = build_grid(1, 1, 7, 4)
        X, _ = g.mesh()
        lap = laplacian(ScalarField(g, X ** 2)).values
        np.testing.assert_allclose(lap[1:-1, :], 2.0, rtol=1e-10)

    def test_coefficient_scales(self):
        g = build_grid(1, 1, 7, 4)
        X, Y = g.mesh()
        f = ScalarField(g, X ** 2 + Y ** 2)
        np.testing.assert_allclose(laplacian(f, 3.0).values[1:-1, 1:-1], 12.0, rtol=1e-10)


class TestTVD:
    def test_van_leer_values(self):
        np.testing.assert_allclose(van_leer([-1.0, 0.0, 1.0, 3.0]), [0.0, 0.0, 1.0, 1.5])

    def test_flat_jump_takes_upwind(self):
        assert tvd_face_value(1.0, 1.0, 5.0) == 1.0

    def test_smooth_linear_is_central(self):
        # on a linear profile r = 1 and the limited value is the midpoint
        assert tvd_face_value(1.0, 2.0, 0.0) == pytest.approx(1.5)

    def test_extremum_drops_to_upwind(self):
        assert tvd_face_value(2.0, 1.0, 1.0) == 2.0

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
    def test_face_value_bounded_by_neighbours(self, u, d, uu):
        f = tvd_face_value(u, d, uu)
        assert min(u, d) - 1e-9 * (abs(u) + abs(d)) <= f <= max(u, d) + 1e-9 * (abs(u) + abs(d))

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.0, 1e6))
    def test_limiter_range(self, r):
        psi = float(van_leer(r))
        assert 0.0 <= psi <= min(2.0 * r, 2.0) + 1e-12

    def test_corrections_shapes_and_uniform(self):
        g = build_grid(1, 1, 5, 4)
        flux = FaceField(g, np.ones((6, 4)), -np.ones((5, 5)))
        cx, cy = tvd_corrections(ScalarField(g, 7.0), flux)
        assert cx.shape == (4, 4) and cy.shape == (5, 3)
        np.testing.assert_array_equal(cx, 0.0)
        np.testing.assert_array_equal(cy, 0.0)
