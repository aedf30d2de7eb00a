"""
Transient incompressible laminar flow in the feed channel.

Collocated finite volumes with momentum-interpolated face fluxes and an
incremental pressure-correction projection.  Time derivatives use backward
differencing over two previous levels (implicit Euler on the first step).
Advection is implicit first-order upwind plus a deferred van Leer
correction, so repeated passes at one time level converge to the fully
implicit limited scheme.

Boundary conditions (channel layout):

* inlet (west): fully developed velocity profile, zero-gradient pressure;
* outlet (east): zero-gradient velocity, fixed pressure ``p_out``;
* wall (north): no slip;
* membrane (south): ``u = 0`` and a prescribed normal velocity per face.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SolverError
from .grid import (CHANNEL_TAGS, OUTLET, FaceField,
                   ScalarField, divergence, face_normal_gradients, gradient,
                   tvd_corrections)
from .linalg import PoissonOperator, assemble, side_slice, solve_bicgstab

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FluidProperties:
    rho: float
    mu: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigError("must be positive", key="[fluid].rho")
        if not self.mu > 0:
            raise ConfigError("must be positive", key="[fluid].mu")

    def reynolds(self, u_av, h):
        return self.rho * u_av * h / self.mu


@dataclass
class FlowState:
    """Cell velocities [m/s], pressure [Pa] and face fluxes [m^3/s]."""

    u: ScalarField
    v: ScalarField
    p: ScalarField
    face_flux: FaceField

    def copy(self):
        return FlowState(self.u.copy(), self.v.copy(), self.p.copy(), self.face_flux.copy())

    def is_finite(self):
        return (self.u.is_finite() and self.v.is_finite() and self.p.is_finite()
                and self.face_flux.is_finite())


@dataclass
class Provisional:
    """Predicted velocities and face fluxes before projection."""

    u: np.ndarray
    v: np.ndarray
    face_flux: FaceField
    coeff: float


def inlet_profile(y, u_av, h):
    """Fully developed channel profile ``6 u_av (y/h)(1 - y/h)``."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y > h):
        raise ValueError("inlet_profile: y must lie in [0, h]")
    eta = y / h
    out = 6.0 * u_av * eta * (1.0 - eta)
    return out[()] if out.ndim == 0 else out


def inlet_cell_profile(yf, u_av, h):
    """Cell averages of the developed profile between face positions ``yf``.

    The averages carry exactly ``u_av * h`` through the inlet.
    """
    eta = np.asarray(yf, dtype=float) / h
    prim = 3.0 * eta ** 2 - 2.0 * eta ** 3
    return u_av * np.diff(prim) / np.diff(eta)


def time_coefficients(first_step):
    """Backward-difference weights ``(a0, a1, a2)`` on levels n+1, n, n-1."""
    return (1.0, -1.0, 0.0) if first_step else (1.5, -2.0, 0.5)


class FlowSolver:
    """Owns the cached pressure operator and applies one flow time step.

    Parameters
    ----------
    grid : Grid
        Must use the channel tagging.
    props : FluidProperties
    u_av : float
        Mean inlet velocity [m/s].
    p_out : float
        Outlet pressure [Pa].
    n_correctors : int
        Predictor/projection passes per call to :meth:`step_flow`.
    lin_tol : float
        Relative tolerance of every linear solve.
    pressure_solver : {"direct", "cg"}
    """

    def __init__(self, grid, props, u_av, p_out, n_correctors=2, lin_tol=1e-8,
                 pressure_solver="direct"):
        if grid.tags != CHANNEL_TAGS:
            raise ConfigError("the flow solver supports the channel boundary layout only")
        if not u_av > 0:
            raise ConfigError("must be positive", key="[inlet].u_av")
        if n_correctors < 1:
            raise ConfigError("must be >= 1", key="[controls].n_correctors")
        self.grid = grid
        self.props = props
        self.u_av = float(u_av)
        self.p_out = float(p_out)
        self.n_correctors = int(n_correctors)
        self.lin_tol = float(lin_tol)
        self.poisson = PoissonOperator(grid, ["east"], method=pressure_solver, rtol=lin_tol)
        self.u_inlet = inlet_cell_profile(grid.yf, self.u_av, grid.H)
        self.last_pressure_residual = 0.0

    # -- states -----------------------------------------------------------

    def initial_state(self, developed=False):
        """Zero velocity at uniform ``p_out``, or the developed channel flow."""
        g = self.grid
        u = np.zeros(g.shape)
        p = np.full(g.shape, self.p_out)
        if developed:
            u[:] = self.u_inlet[None, :]
            dpdx = 12.0 * self.props.mu * self.u_av / g.H ** 2
            p += dpdx * (g.L - g.xc)[:, None]
        state = FlowState(ScalarField(g, u), ScalarField(g, np.zeros(g.shape)),
                          ScalarField(g, p), FaceField(g))
        membrane_v = np.zeros(g.nx)
        self._apply_velocity_bcs(state.u, state.v, membrane_v)
        self._apply_pressure_bcs(state.p)
        flux = state.face_flux
        flux.x[1:-1, :] = 0.5 * (u[1:, :] + u[:-1, :]) * g.area_x
        flux.x[-1, :] = u[-1, :] * g.area_x
        self._boundary_fluxes(flux, state.u, state.v)
        return state

    def _apply_velocity_bcs(self, u, v, membrane_v, boundary_values=None):
        u.set_boundary("west", self.u_inlet)
        v.set_boundary("west", 0.0)
        for f in (u, v):
            f.set_boundary("north", 0.0)
            f.set_boundary("east", f.values[-1, :])
        u.set_boundary("south", 0.0)
        v.set_boundary("south", membrane_v)
        if boundary_values:
            for name, field in (("u", u), ("v", v)):
                for side, val in boundary_values.get(name, {}).items():
                    field.set_boundary(side, val)
        return u, v

    def _apply_pressure_bcs(self, p):
        """Outlet pressure fixed; other sides linearly extrapolated."""
        vals = p.values
        p.set_boundary("east", self.p_out)
        for side, (a, b) in {"west": (vals[0, :], vals[1, :] if vals.shape[0] > 1 else None),
                             "south": (vals[:, 0], vals[:, 1] if vals.shape[1] > 1 else None),
                             "north": (vals[:, -1], vals[:, -2] if vals.shape[1] > 1 else None)}.items():
            p.set_boundary(side, a if b is None else 1.5 * a - 0.5 * b)
        return p

    def _boundary_fluxes(self, flux, u, v):
        """Fixed fluxes on the Dirichlet-velocity sides from boundary values."""
        g = self.grid
        flux.x[0, :] = u.boundary["west"] * g.area_x
        flux.y[:, 0] = v.boundary["south"] * g.area_y
        flux.y[:, -1] = v.boundary["north"] * g.area_y

    def membrane_pressure(self, state):
        """Feed-side pressure on each membrane face [Pa]."""
        return state.p.boundary["south"].copy()

    # -- operations -------------------------------------------------------

    def momentum_predict(self, state, dt, membrane_v, old=None, guess=None,
                         boundary_values=None):
        """Solve the implicit momentum equations with lagged pressure.

        ``state`` is the level-n solution, ``old`` the level n-1 solution
        (None selects implicit Euler) and ``guess`` the current iterate used
        to linearise advection and supply the lagged pressure.
        """
        if not dt > 0:
            raise ValueError("dt must be positive")
        g = self.grid
        rho, mu = self.props.rho, self.props.mu
        it = guess if guess is not None else state
        a0, a1, a2 = time_coefficients(old is None)

        u_it, v_it = it.u.copy(), it.v.copy()
        self._apply_velocity_bcs(u_it, v_it, membrane_v, boundary_values)
        flux = it.face_flux.copy()
        self._boundary_fluxes(flux, u_it, v_it)

        nx, ny = g.shape
        fx, fy = flux.x, flux.y
        dx_coef = mu * g.area_x / g.dx
        dy_coef = mu * g.area_y / g.dy
        a_p = np.full(g.shape, rho * g.volume * a0 / dt)
        a_w = np.zeros(g.shape)
        a_e = np.zeros(g.shape)
        a_s = np.zeros(g.shape)
        a_n = np.zeros(g.shape)

        # interior x faces: owner i-1 (west), neighbour i (east)
        F = fx[1:-1, :]
        a_p[:-1, :] += rho * np.maximum(F, 0) + dx_coef
        a_e[:-1, :] += rho * np.minimum(F, 0) - dx_coef
        a_p[1:, :] += rho * np.maximum(-F, 0) + dx_coef
        a_w[1:, :] += rho * np.minimum(-F, 0) - dx_coef
        F = fy[:, 1:-1]
        a_p[:, :-1] += rho * np.maximum(F, 0) + dy_coef
        a_n[:, :-1] += rho * np.minimum(F, 0) - dy_coef
        a_p[:, 1:] += rho * np.maximum(-F, 0) + dy_coef
        a_s[:, 1:] += rho * np.minimum(-F, 0) - dy_coef

        b_u = np.zeros(g.shape)
        b_v = np.zeros(g.shape)

        # boundary faces: Dirichlet on inlet/wall/membrane, zero gradient on outlet
        for side in ("west", "east", "south", "north"):
            sl = side_slice(side)
            Fo = flux.outward(side)
            tag = g.tags[side]
            if tag == OUTLET:
                a_p[sl] += rho * Fo
                continue
            diff = 2.0 * (dx_coef if side in ("west", "east") else dy_coef)
            a_p[sl] += diff
            for b, field in ((b_u, u_it), (b_v, v_it)):
                fb = field.boundary[side]
                b[sl] += diff * fb - rho * Fo * fb

        # time levels
        for b, cur, prev in ((b_u, state.u.values, None if old is None else old.u.values),
                             (b_v, state.v.values, None if old is None else old.v.values)):
            b -= rho * g.volume * a1 / dt * cur
            if prev is not None:
                b -= rho * g.volume * a2 / dt * prev

        # lagged pressure gradient
        p_it = self._apply_pressure_bcs(it.p.copy())
        gp = gradient(p_it)
        b_u -= g.volume * gp[..., 0]
        b_v -= g.volume * gp[..., 1]

        # deferred van Leer correction on interior faces
        for b, field in ((b_u, u_it), (b_v, v_it)):
            cx, cy = tvd_corrections(field, flux)
            qx = rho * fx[1:-1, :] * cx
            qy = rho * fy[:, 1:-1] * cy
            b[:-1, :] -= qx
            b[1:, :] += qx
            b[:, :-1] -= qy
            b[:, 1:] += qy

        A = assemble(a_p, a_w, a_e, a_s, a_n)
        us = solve_bicgstab(A, b_u.ravel(), x0=u_it.values.ravel(), rtol=self.lin_tol,
                            what="u-momentum").reshape(g.shape)
        vs = solve_bicgstab(A, b_v.ravel(), x0=v_it.values.ravel(), rtol=self.lin_tol,
                            what="v-momentum").reshape(g.shape)

        coeff = dt / (a0 * rho)
        star = FaceField(g)
        # momentum interpolation: replace the averaged cell pressure gradient
        # by the compact face gradient
        pgx, pgy = face_normal_gradients(p_it)
        star.x[1:-1, :] = g.area_x * (0.5 * (us[1:, :] + us[:-1, :])
                                      + coeff * (0.5 * (gp[1:, :, 0] + gp[:-1, :, 0]) - pgx[1:-1, :]))
        star.y[:, 1:-1] = g.area_y * (0.5 * (vs[:, 1:] + vs[:, :-1])
                                      + coeff * (0.5 * (gp[:, 1:, 1] + gp[:, :-1, 1]) - pgy[:, 1:-1]))
        star.x[-1, :] = g.area_x * (us[-1, :] + coeff * (gp[-1, :, 0] - pgx[-1, :]))
        self._boundary_fluxes(star, u_it, v_it)
        return Provisional(us, vs, star, coeff)

    def solve_pressure_poisson(self, div_source):
        """Pressure increment for the projection (outlet value zero).

        Returns ``(increment, relative_residual)``.
        """
        src = div_source.values if isinstance(div_source, ScalarField) else div_source
        b = self.poisson.rhs(src)
        x, res = self.poisson.solve(b)
        self.last_pressure_residual = res
        return ScalarField(self.grid, x.reshape(self.grid.shape)), res

    def project_velocity(self, provisional, p_lagged, membrane_v):
        """Make the provisional face fluxes divergence free.

        Returns the projected :class:`FlowState`; the pressure is the lagged
        pressure plus the projection increment.
        """
        g = self.grid
        c = provisional.coeff
        div = divergence(provisional.face_flux)
        phi, _ = self.solve_pressure_poisson(ScalarField(g, div.values / c))
        phi.set_boundary("east", 0.0)
        gx, gy = face_normal_gradients(phi)
        flux = provisional.face_flux.copy()
        flux.x[1:, :] -= c * g.area_x * gx[1:, :]
        flux.y[:, 1:-1] -= c * g.area_y * gy[:, 1:-1]
        gphi = gradient(phi)
        u = ScalarField(g, provisional.u - c * gphi[..., 0])
        v = ScalarField(g, provisional.v - c * gphi[..., 1])
        self._apply_velocity_bcs(u, v, membrane_v)
        p = ScalarField(g, p_lagged.values + phi.values)
        self._apply_pressure_bcs(p)
        return FlowState(u, v, p, flux)

    def step_flow(self, state, membrane_v, dt, old=None, guess=None, boundary_values=None):
        """Advance the flow one step with the given membrane normal velocity.

        ``membrane_v`` is the y-component of velocity on each membrane face
        (negative for permeation out of the channel).
        """
        membrane_v = np.broadcast_to(np.asarray(membrane_v, dtype=float), (self.grid.nx,))
        it = guess if guess is not None else state
        for _ in range(self.n_correctors):
            prov = self.momentum_predict(state, dt, membrane_v, old=old, guess=it,
                                         boundary_values=boundary_values)
            it = self.project_velocity(prov, it.p, membrane_v)
            if boundary_values:
                self._apply_velocity_bcs(it.u, it.v, membrane_v, boundary_values)
        return it

    # -- diagnostics ------------------------------------------------------

    def normalized_divergence(self, state):
        """``max |div(face_flux)| * dx / u_av``."""
        return float(np.max(np.abs(divergence(state.face_flux).values)) * self.grid.dx / self.u_av)

    def boundary_flow_rates(self, state):
        """Volumetric rates ``(Q_in, Q_out, Q_membrane)`` [m^3/s], outward-positive for out/membrane."""
        f = state.face_flux
        return (float(np.sum(f.x[0, :])), float(np.sum(f.x[-1, :])), float(-np.sum(f.y[:, 0])))

    def courant(self, state, dt):
        """Largest cell outflow Courant number."""
        g = self.grid
        f = state.face_flux
        out = (np.maximum(f.x[1:, :], 0) + np.maximum(-f.x[:-1, :], 0)
               + np.maximum(f.y[:, 1:], 0) + np.maximum(-f.y[:, :-1], 0))
        return float(np.max(out) * dt / g.volume)


def steady_channel_flow(solver, dt, tol=1e-9, max_steps=20000, state=None, membrane_v=0.0):
    """March from ``state`` (rest by default) until the flow stops changing.

    Stops when the largest velocity change over one step, relative to the
    mean inlet velocity, drops below ``tol``.  Returns ``(state, steps,
    max_divergence)``.
    """
    state = solver.initial_state() if state is None else state
    old = None
    worst = 0.0
    for n in range(1, max_steps + 1):
        new = solver.step_flow(state, membrane_v, dt, old=old)
        worst = max(worst, solver.normalized_divergence(new))
        change = max(np.max(np.abs(new.u.values - state.u.values)),
                     np.max(np.abs(new.v.values - state.v.values))) / solver.u_av
        old, state = state, new
        if change < tol:
            return state, n, worst
    raise SolverError(f"flow not steady after {max_steps} steps", residual=change,
                      iterations=max_steps)
