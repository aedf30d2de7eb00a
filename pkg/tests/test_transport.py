import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import column_oracle, steady_column

from reactive_ro.errors import ConfigError
from reactive_ro.grid import WALL, FaceField, ScalarField, build_grid
from reactive_ro.transport import (MembraneFluxSplit, MembraneSink, RobinClosure, Species,
                                   SpeciesBalance, film_factor, membrane_species_flux,
                                   step_species)

CLOSED = {"west": WALL, "east": WALL, "south": WALL, "north": WALL}


def attach(grid, values, D=1.5e-9, phi_in=0.0, name="a"):
    s = Species(name, D, phi_in)
    s.phi = ScalarField(grid, np.broadcast_to(values, grid.shape).astype(float))
    return s


def plug_flux(grid, u):
    fx = np.full((grid.nx + 1, grid.ny), u * grid.area_x)
    return FaceField(grid, fx, np.zeros((grid.nx, grid.ny + 1)))


def march(s, flux, dt, steps, sink=None, phi_m=None):
    old = None
    total = SpeciesBalance()
    for _ in range(steps):
        prev = s.phi.values.copy()
        field, bal = step_species(s, flux, dt, sink=sink, old=old, phi_m=phi_m, lin_tol=1e-13)
        old = prev
        s.phi = field
        total += bal
    return total


class TestSpecies:
    @pytest.mark.parametrize("kw, key", [
        ({"D": 0.0}, "[species.a].D"),
        ({"phi_in": -1.0}, "[species.a].phi_in"),
        ({"rejection": 0.9}, "[species.a].rejection"),
    ])
    def test_validation(self, kw, key):
        args = {"name": "a", "D": 1e-9, "phi_in": 1.0} | kw
        with pytest.raises(ConfigError) as info:
            Species(**args)
        assert key in str(info.value)

    def test_flux_split(self):
        MembraneFluxSplit()
        with pytest.raises(ConfigError):
            MembraneFluxSplit(0.5, 0.5)
        with pytest.raises(ConfigError):
            MembraneFluxSplit(0.7, 0.7)


class TestFilmClosure:
    def test_film_factor(self):
        assert film_factor(0.0) == 1.0
        assert film_factor(1e-10) == pytest.approx(1.0)
        assert film_factor(1.0) == pytest.approx(np.e - 1, rel=1e-15)

    def test_impermeable_inert_face_has_zero_gradient(self):
        c = membrane_species_flux([5.0], 0.0, 1e-9, [0.0])
        assert c.gradient(np.array([5.0]))[0] == 0.0

    def test_gradient_hand_value(self):
        # v phi - D grad = rate  ->  grad = (v phi - rate) / D
        c = membrane_species_flux([200.0], -1e-5, 1.5e-9, [-3e-4])
        assert c.gradient(np.array([200.0]))[0] == pytest.approx((-2e-3 + 3e-4) / 1.5e-9)

    def test_small_peclet_is_linear_robin(self):
        v, D, h, rate, phi_P = -1e-9, 1.5e-9, 1e-6, -1e-6, 10.0
        phi_m = RobinClosure(np.array(v), D, np.array(rate)).face_value(phi_P, h)
        # linear profile: phi_P = phi_m + h * grad, grad from the closure
        lin = (phi_P + h * rate / D) / (1 + h * v / D)
        assert phi_m == pytest.approx(lin, rel=1e-6)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-1e-3, 1e-3), st.floats(0.0, 500.0), st.floats(-1e-2, 1e-2))
    def test_face_and_cell_values_invert(self, v, phi_P, rate):
        c = RobinClosure(np.array(v), 1.5e-9, np.array(rate))
        h = 3e-5
        back = c.cell_value(c.face_value(phi_P, h), h)
        assert back == pytest.approx(phi_P, rel=1e-9, abs=1e-9 * (abs(rate) * h / 1.5e-9 + 1) * np.exp(min(abs(v) * h / 1.5e-9, 50)))

    def test_negative_face_value_rejected(self):
        with pytest.raises(ValueError):
            membrane_species_flux([-1.0], 0.0, 1e-9, [0.0])


class TestStepSpecies:
    def test_uniform_stays_uniform(self):
        g = build_grid(0.02, 0.003, 20, 8)
        s = attach(g, 201.85, phi_in=201.85)
        out, bal = step_species(s, plug_flux(g, 0.1), 1e-3, lin_tol=1e-14)
        np.testing.assert_allclose(out.values, 201.85, rtol=1e-12)
        assert abs(bal.relative_residual()) < 1e-12

    def test_gaussian_heat_kernel(self):
        g = build_grid(1.0, 1.0, 80, 80, tags=CLOSED)
        X, Y = g.mesh()
        D, s0, t = 1e-3, 0.05, 1.0
        s = attach(g, np.exp(-((X - 0.5) ** 2 + (Y - 0.5) ** 2) / (2 * s0 ** 2)), D=D)
        march(s, FaceField(g), 0.01, int(round(t / 0.01)))
        s2 = s0 ** 2 + 2 * D * t
        exact = s0 ** 2 / s2 * np.exp(-((X - 0.5) ** 2 + (Y - 0.5) ** 2) / (2 * s2))
        err = np.linalg.norm(s.phi.values - exact) / np.linalg.norm(exact)
        assert err < 0.01

    def test_second_order_in_time(self):
        g = build_grid(1.0, 0.1, 40, 1, tags=CLOSED)
        x = g.xc[:, None]

        def final(dt, T=2.0):
            s = attach(g, np.exp(-((x - 0.5) ** 2) / 0.01), D=5e-3)
            march(s, FaceField(g), dt, int(round(T / dt)))
            return s.phi.values

        a, b, c = final(0.2), final(0.1), final(0.05)
        order = np.log2(np.abs(a - b).max() / np.abs(b - c).max())
        assert 1.8 < order < 2.3

    def test_closed_box_conserves_mass(self, rng):
        g = build_grid(1.0, 1.0, 12, 10, tags=CLOSED)
        s = attach(g, rng.uniform(0, 1, g.shape), D=1e-2)
        m0 = s.phi.values.sum()
        march(s, FaceField(g), 0.5, 10)
        assert s.phi.values.sum() == pytest.approx(m0, rel=1e-12)

    def test_maximum_principle(self, rng):
        g = build_grid(0.02, 0.003, 16, 8)
        s = attach(g, rng.uniform(0, 100, g.shape), phi_in=50.0)
        lo, hi = s.phi.values.min(), s.phi.values.max()
        march(s, plug_flux(g, 0.1), 5e-3, 5)
        assert s.phi.values.min() >= lo - 1e-9 and s.phi.values.max() <= hi + 1e-9

    def test_balance_with_membrane_uptake(self):
        g = build_grid(0.02, 0.003, 20, 8)
        s = attach(g, 100.0, phi_in=201.85)
        sink = MembraneSink(np.full(g.nx, 1e-5), np.zeros(g.nx))
        bal = march(s, plug_flux(g, 0.1), 1e-3, 20, sink=sink)
        assert bal.membrane > 0
        assert abs(bal.relative_residual()) < 1e-9

    def test_identical_species_identical_fields(self, rng):
        g = build_grid(0.02, 0.003, 10, 6)
        vals = rng.uniform(0, 200, g.shape)
        a, b = attach(g, vals, name="a", phi_in=10.0), attach(g, vals, name="b", phi_in=10.0)
        fa, _ = step_species(a, plug_flux(g, 0.1), 1e-3)
        fb, _ = step_species(b, plug_flux(g, 0.1), 1e-3)
        np.testing.assert_array_equal(fa.values, fb.values)

    def test_dt_validation(self):
        g = build_grid(1.0, 1.0, 2, 2, tags=CLOSED)
        with pytest.raises(ValueError):
            step_species(attach(g, 1.0), FaceField(g), 0.0)


class TestPolarizationColumn:
    @pytest.mark.parametrize("pe", [0.5, 2.0])
    def test_matches_dense_oracle(self, pe):
        D, H = 1.5e-9, 1e-4
        v = pe * D / H
        ratio = steady_column(v, D, H, 40)
        ref = column_oracle(v, D, H)
        assert ref == pytest.approx(np.exp(pe), rel=1e-4)
        assert ratio == pytest.approx(ref, rel=0.02)
