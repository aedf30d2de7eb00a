"""
Time marching with Picard coupling of flow, transport and membrane.

Each step iterates ``flow -> species -> membrane`` at the new time level
until the largest relative change of velocity, pressure, concentrations and
membrane velocity over one pass drops below ``picard_tol``.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as rio
from .chemistry import SurfaceReactions
from .config import SimulationConfig
from .errors import ConfigError, CouplingError, SolverError
from .flow import FlowSolver, FluidProperties
from .grid import MEMBRANE, ScalarField, build_grid
from .membrane import (OsmoticModel, initial_membrane_state, recovery, refresh_membrane,
                       solve_membrane_faces)
from .transport import MembraneSink, Species, SpeciesBalance, step_species

log = logging.getLogger(__name__)

DIVERGENCE_WINDOW = 5


@dataclass(frozen=True)
class CouplingControls:
    """Outer-iteration and output controls."""

    dt: float
    t_end: float
    picard_tol: float = 1e-6
    picard_max: int = 50
    output_times: tuple = (21600.0, 43200.0, 100800.0)
    cfl_warn: float = 0.5
    cfl_abort: float = 1.0
    series_stride: int = 1

    def __post_init__(self):
        if not self.picard_tol > 0:
            raise ConfigError("must be positive", key="[controls].picard_tol")
        if self.picard_max < 1:
            raise ConfigError("must be >= 1", key="[controls].picard_max")
        if not self.dt > 0:
            raise ConfigError("must be positive", key="[controls].dt")
        if not self.t_end > 0:
            raise ConfigError("must be positive", key="[controls].t_end")

    @classmethod
    def from_config(cls, cfg):
        c = cfg.controls
        return cls(c.dt, c.t_end, c.picard_tol, c.picard_max, tuple(c.output_times),
                   c.cfl_warn, c.cfl_abort, c.series_stride)


@dataclass
class StepDiagnostics:
    """What happened during one accepted step."""

    step: int
    t: float
    picard_iterations: int
    converged: bool
    residual: float
    residuals: dict
    history: list
    divergence: float
    courant: float
    water_balance: float
    balances: dict = field(default_factory=dict)
    clamped: dict = field(default_factory=dict)
    cfl_warning: bool = False
    reverse_flux: bool = False


def _mean(x):
    x = np.asarray(x, dtype=float)
    if np.all(x == x[0]):
        # a uniform array averages to its own value, without double rounding
        return float(x[0])
    return math.fsum(x) / x.size


def _rel_change(new, old, scale):
    return float(np.max(np.abs(new - old)) / scale) if np.size(new) else 0.0


class Simulation:
    """All state of one channel run.

    Parameters
    ----------
    config : SimulationConfig
    """

    def __init__(self, config: SimulationConfig):
        self.config = cfg = config
        self.controls = CouplingControls.from_config(cfg)
        self.grid = g = build_grid(cfg.L, cfg.H, cfg.nx, cfg.ny, cfg.Z)
        self.props = FluidProperties(cfg.rho, cfg.mu)
        self.flow_solver = FlowSolver(g, self.props, cfg.u_av, cfg.p_out,
                                      n_correctors=cfg.controls.n_correctors,
                                      lin_tol=cfg.controls.lin_tol,
                                      pressure_solver=cfg.controls.pressure_solver)
        self.osmotic = OsmoticModel(T=cfg.T, varphi=cfg.varphi)
        self.network = cfg.network()
        self.surface = SurfaceReactions(self.network, cfg.species_names, cfg.ell)
        self.species = [Species(s.name, s.D, s.phi_in, s.rejection, s.phi_init)
                        for s in cfg.species]
        self.D = np.array([s.D for s in self.species])
        self.frozen = bool(cfg.frozen_concentration)
        self.mside = g.side_of(MEMBRANE)[0]
        self.h = 0.5 * g.dy

        self.flow = self.flow_solver.initial_state(developed=cfg.initial_velocity == "developed")
        for s in self.species:
            s.phi = ScalarField(g, np.full(g.shape, s.phi_init))
            s.phi.set_boundary("west", s.phi_in)
        phi_wall = self.wall_values()
        p_m = self.flow_solver.membrane_pressure(self.flow)
        self.membrane = initial_membrane_state(
            g.xc, phi_wall, p_m, cfg.k0, cfg.epsilon0, cfg.ell, cfg.mu, self.osmotic,
            n_solids=self.surface.solid_cols.size, p_perm=cfg.p_perm, eps_min=cfg.eps_min)
        self.membrane.solid_rate = self.surface.solid_rates(phi_wall)
        self.J = self.surface.flux(phi_wall)
        self.frozen_phi_m = phi_wall.copy()
        self.flow.v.set_boundary("south", -self.membrane.v_m)
        self.flow_solver._boundary_fluxes(self.flow.face_flux, self.flow.u, self.flow.v)

        self.t = 0.0
        self.step_index = 0
        self.flow_old = None
        self.phi_old = None
        self.totals = {s.name: SpeciesBalance() for s in self.species}
        self.water = {"in": 0.0, "out": 0.0, "membrane": 0.0}
        self.diagnostics = []

    # -- helpers ------------------------------------------------------------

    def wall_values(self):
        """Concentrations in the membrane-adjacent cells, shape (nf, ns)."""
        return np.stack([s.phi.values[:, 0] for s in self.species], axis=1)

    def _sinks(self, phi_wall, J):
        sinks = []
        for i in range(len(self.species)):
            Ji = J[:, i]
            pw = phi_wall[:, i]
            cons = np.maximum(-Ji, 0.0)
            coef = np.divide(cons, pw, out=np.zeros_like(pw), where=pw > 0)
            sinks.append(MembraneSink(coef, np.maximum(Ji, 0.0)))
        return sinks

    def _close_faces(self, flow, membrane, v_guess):
        """Face concentrations, surface fluxes and face y-velocity."""
        p_m = self.flow_solver.membrane_pressure(flow)
        dp = p_m - membrane.p_perm
        if self.frozen:
            return self.frozen_phi_m, self.surface.flux(self.frozen_phi_m), p_m
        G = membrane.k / (membrane.ell * self.props.mu)
        _, phi_m, J = solve_membrane_faces(self.wall_values(), self.D, self.h, self.surface,
                                           G, dp, self.osmotic, v_guess=v_guess,
                                           phi_guess=membrane.phi_m)
        return phi_m, J, p_m

    # -- stepping -----------------------------------------------------------

    def picard_step(self):
        """Advance one step of ``dt``; returns the step diagnostics."""
        c = self.controls
        dt = c.dt
        start_flow = self.flow
        start_phi = [s.phi for s in self.species]
        start_mem = self.membrane
        first = self.flow_old is None

        flow_it = start_flow
        phi_it = [p.values for p in start_phi]
        mem_it = start_mem
        J_it = self.J
        balances = {}
        history = []
        growth = 0
        converged = False
        for k in range(1, c.picard_max + 1):
            prev_flow, prev_phi, prev_vm = flow_it, phi_it, mem_it.v_m
            flow_it = self.flow_solver.step_flow(start_flow, -mem_it.v_m, dt,
                                                 old=self.flow_old, guess=flow_it)
            if not flow_it.is_finite():
                raise CouplingError("non-finite flow field", diagnostics={"iteration": k})
            if not self.frozen:
                sinks = self._sinks(np.stack([p[:, 0] for p in phi_it], axis=1), J_it)
                new_phi = []
                for i, s in enumerate(self.species):
                    work = Species(s.name, s.D, s.phi_in, s.rejection, s.phi_init, start_phi[i])
                    old = None if first else self.phi_old[i]
                    f, bal = step_species(work, flow_it.face_flux, dt, sinks[i], old=old,
                                          guess=phi_it[i], phi_m=mem_it.phi_m[:, i],
                                          lin_tol=self.config.controls.lin_tol)
                    new_phi.append(f.values)
                    balances[s.name] = bal
                phi_it = new_phi
                for s, v in zip(self.species, phi_it):
                    s.phi = ScalarField(self.grid, v, {"west": s.phi_in})
            phi_m, J_it, p_m = self._close_faces(flow_it, mem_it, -mem_it.v_m)
            mem_it = refresh_membrane(start_mem, phi_m, p_m, self.surface, dt, self.osmotic,
                                      self.props.mu)

            u_scale = self.config.u_av
            p_scale = max(float(np.max(np.abs(flow_it.p.values))), 1.0)
            phi_scale = max([s.phi_in for s in self.species] + [1e-12])
            v_scale = max(float(np.max(np.abs(mem_it.v_m))), 1e-12)
            res = {
                "flow": max(_rel_change(flow_it.u.values, prev_flow.u.values, u_scale),
                            _rel_change(flow_it.v.values, prev_flow.v.values, u_scale),
                            _rel_change(flow_it.p.values, prev_flow.p.values, p_scale)),
                "species": max(_rel_change(a, b, phi_scale) for a, b in zip(phi_it, prev_phi)),
                "membrane": _rel_change(mem_it.v_m, prev_vm, v_scale),
            }
            r = max(res.values())
            history.append(r)
            if r <= c.picard_tol:
                converged = True
                break
            growth = growth + 1 if len(history) > 1 and r > history[-2] else 0
            if growth >= DIVERGENCE_WINDOW:
                # restore the start-of-step fields before reporting
                for s, p in zip(self.species, start_phi):
                    s.phi = p
                raise CouplingError("Picard iteration diverging",
                                    diagnostics={"step": self.step_index + 1, "history": history,
                                                 "residuals": res})
        if not converged:
            log.warning("step %d: Picard not converged after %d iterations (residual %.3e)",
                        self.step_index + 1, c.picard_max, history[-1])

        self.flow_old = start_flow
        self.phi_old = [p.values for p in start_phi]
        self.flow = flow_it
        self.membrane = mem_it
        self.J = J_it
        for s in self.species:
            s.phi.set_boundary("south", mem_it.phi_m[:, self.species.index(s)])
        self.t += dt
        self.step_index += 1

        q_in, q_out, q_mem = self.flow_solver.boundary_flow_rates(flow_it)
        self.water["in"] += q_in * dt
        self.water["out"] += q_out * dt
        self.water["membrane"] += q_mem * dt
        for name, bal in balances.items():
            self.totals[name] += bal
        cfl = self.flow_solver.courant(flow_it, dt)
        diag = StepDiagnostics(
            step=self.step_index, t=self.t, picard_iterations=len(history),
            converged=converged, residual=history[-1], residuals=res, history=history,
            divergence=self.flow_solver.normalized_divergence(flow_it), courant=cfl,
            water_balance=(q_in - q_out - q_mem) / q_in if q_in else q_in - q_out - q_mem,
            balances=balances, clamped={n: b.clamped for n, b in balances.items()},
            cfl_warning=cfl > c.cfl_warn, reverse_flux=bool(np.any(mem_it.reverse)))
        if diag.cfl_warning:
            log.warning("step %d: Courant number %.3f above %.3f", self.step_index, cfl, c.cfl_warn)
        if cfl >= c.cfl_abort:
            raise CouplingError(f"Courant number {cfl:.3f} reached the abort threshold",
                                diagnostics={"step": self.step_index, "courant": cfl})
        self.diagnostics.append(diag)
        return diag

    # -- outputs ------------------------------------------------------------

    def series_record(self):
        m = self.membrane
        v_mean = _mean(m.v_m)
        return rio.SeriesRecord(
            t=self.t, eps_mean=_mean(m.epsilon), k_mean=_mean(m.k), v_mean=v_mean,
            recovery=float(recovery(v_mean, self.config.u_av, self.config.L, self.config.H)),
            dpi_mean=_mean(m.delta_pi))

    def profile(self):
        m = self.membrane
        return rio.Profile(self.t, m.x.copy(), m.v_m.copy(), m.epsilon.copy(), m.k.copy(),
                           m.delta_pi.copy())

    def fields(self):
        out = {"u": self.flow.u.values, "v": self.flow.v.values, "p": self.flow.p.values}
        for s in self.species:
            out[f"phi_{s.name}"] = s.phi.values
        return out

    def face_bulk_ratio(self):
        """Membrane-face over inlet concentration, shape (nf, ns)."""
        phi_in = np.array([s.phi_in for s in self.species])
        return self.membrane.phi_m / np.where(phi_in > 0, phi_in, 1.0)


def picard_step(sim):
    """Advance ``sim`` by one coupled step; see :meth:`Simulation.picard_step`."""
    return sim.picard_step()


@dataclass
class RunResult:
    """In-memory outputs of a run."""

    config: SimulationConfig
    series: list
    profiles: list
    diagnostics: list
    status: str
    message: str = ""
    wall_time: float = 0.0
    simulation: Simulation = None

    @property
    def final(self):
        return self.series[-1]


def _matches(t, target, dt):
    return abs(t - target) <= 0.5 * dt * (1 + 1e-9)


def run(config, out_dir=None, keep_simulation=True, max_steps=None, on_step=None):
    """Run a simulation to ``t_end``.

    Records the time series every ``series_stride`` steps (plus the initial
    and final states) and membrane profiles at the output times.  With
    ``out_dir`` the outputs are written there; on failure everything
    recorded so far is flushed before the error propagates.
    """
    t0 = time.perf_counter()
    sim = Simulation(config)
    c = sim.controls
    n_steps = int(np.ceil(c.t_end / c.dt - 1e-9))
    if max_steps is not None:
        n_steps = min(n_steps, max_steps)
    series = [sim.series_record()]
    profiles = [sim.profile()] if any(_matches(0.0, t, c.dt) for t in c.output_times) else []
    snaps = []
    status, message = "ok", ""
    try:
        for n in range(1, n_steps + 1):
            sim.picard_step()
            if on_step is not None:
                on_step(sim)
            if n % c.series_stride == 0 or n == n_steps:
                series.append(sim.series_record())
            if any(_matches(sim.t, t, c.dt) for t in c.output_times):
                profiles.append(sim.profile())
                if config.controls.snapshots:
                    snaps.append((sim.t, sim.fields()))
    except (SolverError, CouplingError) as exc:
        status, message = "failed", str(exc)
        log.error("run aborted at t=%.6g s: %s", sim.t, exc)
        if out_dir is not None:
            _write_outputs(out_dir, config, series, profiles, snaps, sim, status, message,
                           time.perf_counter() - t0)
        raise
    result = RunResult(config, series, profiles, sim.diagnostics, status, message,
                       time.perf_counter() - t0, sim if keep_simulation else None)
    if out_dir is not None:
        if config.controls.snapshots:
            snaps.append((sim.t, sim.fields()))
        _write_outputs(out_dir, config, series, profiles, snaps, sim, status, message,
                       result.wall_time)
    return result


def _write_outputs(out_dir, config, series, profiles, snaps, sim, status, message, wall):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if series:
        rio.write_timeseries(out / "timeseries.csv", series)
    for prof in profiles:
        rio.write_profiles(out / f"profile_t{prof.t:.6g}s.csv", prof)
    for t, fields in snaps:
        rio.write_snapshot(out / f"snapshot_t{t:.6g}s.vtk", sim.grid, fields, t)
    diag = sim.diagnostics
    summary = {
        "status": status, "message": message, "steps": sim.step_index, "t_final": sim.t,
        "wall_time_s": wall,
        "max_picard_iterations": max((d.picard_iterations for d in diag), default=0),
        "unconverged_steps": sum(not d.converged for d in diag),
        "max_divergence": max((d.divergence for d in diag), default=0.0),
        "max_courant": max((d.courant for d in diag), default=0.0),
        "species_balance": {n: {"inflow": b.inflow, "outflow": b.outflow, "membrane": b.membrane,
                                "accumulation": b.accumulation, "clamped": b.clamped}
                            for n, b in sim.totals.items()},
        "water_balance": dict(sim.water),
    }
    rio.write_manifest(out, config, summary)


def sweep(config, kinetics, out_dir=None, **kw):
    """One run per rate constant with everything else shared.

    Failed runs are recorded and the sweep continues.  Returns a list of
    ``(K, RunResult or None, error message)``.
    """
    kinetics = [float(K) for K in kinetics]
    if not kinetics:
        raise ConfigError("at least one kinetic constant is required", key="--kinetics")
    results = []
    rows = []
    for K in kinetics:
        cfg = config.with_kinetics(K)
        sub = None if out_dir is None else Path(out_dir) / f"K_{K:g}"
        try:
            res = run(cfg, sub, **kw)
            fin = res.final
            rows.append((K, fin.eps_mean, fin.k_mean, fin.recovery, "ok"))
            results.append((K, res, ""))
        except (SolverError, CouplingError) as exc:
            rows.append((K, float("nan"), float("nan"), float("nan"), "failed"))
            results.append((K, None, str(exc)))
    if out_dir is not None:
        rio.write_comparison(Path(out_dir) / "comparison.csv", rows)
    return results
