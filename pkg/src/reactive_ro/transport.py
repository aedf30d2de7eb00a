"""
Advection-diffusion of dissolved species with a reactive membrane boundary.

The membrane closure is the flux balance at the feed-side face::

    v * phi_m - D * dphi/dy = J

where ``v`` is the y-velocity on the face (negative for permeation), ``J``
the surface reaction flux (negative when the species is consumed) and the
solute is fully rejected.  Between the wall-adjacent cell centre and the
face the concentration follows the exact steady one-dimensional film
profile, which stays well posed when the film is thinner than half a cell.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .flow import time_coefficients
from .grid import INLET, MEMBRANE, OUTLET, WALL, ScalarField, tvd_corrections
from .linalg import assemble, side_slice, solve_bicgstab

log = logging.getLogger(__name__)

EXP_CLIP = 500.0


@dataclass
class Species:
    """A dissolved ion species.

    ``phi`` holds the concentration field [mol/m^3] once the species is
    attached to a grid.
    """

    name: str
    D: float
    phi_in: float
    rejection: float = 1.0
    phi_init: float = 0.0
    phi: ScalarField = None

    def __post_init__(self):
        key = f"[species.{self.name}]"
        if not self.D > 0:
            raise ConfigError("must be positive", key=f"{key}.D")
        if not self.phi_in >= 0:
            raise ConfigError("must be non-negative", key=f"{key}.phi_in")
        if not self.phi_init >= 0:
            raise ConfigError("must be non-negative", key=f"{key}.phi_init")
        if self.rejection != 1.0:
            raise ConfigError("partial rejection is not implemented (use 1)",
                              key=f"{key}.rejection")


@dataclass(frozen=True)
class MembraneFluxSplit:
    """Fractions of the membrane species flux taken by reaction and permeation."""

    kappa_M: float = 1.0
    kappa_P: float = 0.0

    def __post_init__(self):
        if not (0 <= self.kappa_M <= 1 and 0 <= self.kappa_P <= 1):
            raise ConfigError("flux fractions must lie in [0, 1]")
        if abs(self.kappa_M + self.kappa_P - 1.0) > 1e-12:
            raise ConfigError("kappa_M + kappa_P must equal 1")
        if self.kappa_M != 1.0:
            raise ConfigError("only surface-reaction membranes (kappa_M = 1) are implemented")


def film_factor(a):
    """``expm1(a) / a`` with the removable singularity at 0 filled in."""
    a = np.asarray(a, dtype=float)
    small = np.abs(a) < 1e-8
    safe = np.where(small, 1.0, a)
    out = np.where(small, 1.0 + 0.5 * a, np.expm1(safe) / safe)
    return out[()] if out.ndim == 0 else out


@dataclass
class RobinClosure:
    """Membrane-face condition ``v*phi - D*dphi/dy = rate``."""

    v: np.ndarray
    D: float
    rate: np.ndarray

    def gradient(self, phi_m):
        """Normal gradient ``dphi/dy`` at the face implied by ``phi_m``."""
        return (self.v * np.asarray(phi_m) - self.rate) / self.D

    def flux(self, phi_m, grad):
        """Species flux in +y carried by a face state."""
        return self.v * np.asarray(phi_m) - self.D * np.asarray(grad)

    def face_value(self, phi_cell, h):
        """Face concentration for a cell value ``h`` away along the film profile."""
        a = np.clip(self.v * h / self.D, -EXP_CLIP, EXP_CLIP)
        return (np.asarray(phi_cell) + self.rate * (h / self.D) * film_factor(a)) * np.exp(-a)

    def cell_value(self, phi_m, h):
        """Inverse of :meth:`face_value`."""
        a = np.clip(self.v * h / self.D, -EXP_CLIP, EXP_CLIP)
        return np.asarray(phi_m) * np.exp(a) - self.rate * (h / self.D) * film_factor(a)


def membrane_species_flux(phi_m, v, D, surface_rate):
    """Boundary closure for one species on the membrane.

    Parameters
    ----------
    phi_m : array_like
        Face concentrations [mol/m^3] (used only for validation here).
    v : array_like
        y-velocity on the membrane faces [m/s].
    D : float
        Diffusion coefficient [m^2/s].
    surface_rate : array_like
        Surface production of the species [mol/(m^2 s)], negative when
        consumed.
    """
    if np.any(np.asarray(phi_m) < 0):
        raise ValueError("membrane concentrations must be non-negative")
    return RobinClosure(np.asarray(v, dtype=float), float(D), np.asarray(surface_rate, dtype=float))


@dataclass
class MembraneSink:
    """Linearised membrane uptake: outward flux per area ``coef*phi_P - release``."""

    coef: np.ndarray
    release: np.ndarray

    @classmethod
    def inert(cls, n):
        return cls(np.zeros(n), np.zeros(n))


@dataclass
class SpeciesBalance:
    """Amounts [mol] crossing each boundary group during one step."""

    inflow: float = 0.0
    outflow: float = 0.0
    membrane: float = 0.0
    accumulation: float = 0.0
    clamped: float = 0.0
    extra: dict = field(default_factory=dict)

    def __iadd__(self, other):
        self.inflow += other.inflow
        self.outflow += other.outflow
        self.membrane += other.membrane
        self.accumulation += other.accumulation
        self.clamped += other.clamped
        return self

    def residual(self):
        return self.inflow - self.outflow - self.membrane - self.accumulation

    def relative_residual(self):
        return abs(self.residual()) / self.inflow if self.inflow else abs(self.residual())


def species_boundary(species, phi_values, phi_m=None):
    """ScalarField with the species boundary values for the grid's tags."""
    g = species.phi.grid
    f = ScalarField(g, phi_values)
    for side, tag in g.tags.items():
        if tag == INLET:
            f.set_boundary(side, species.phi_in)
        elif tag == MEMBRANE and phi_m is not None:
            f.set_boundary(side, phi_m)
    return f


def step_species(species, face_flux, dt, sink=None, old=None, guess=None, phi_m=None,
                 lin_tol=1e-8):
    """Implicit advection-diffusion step for one species.

    Parameters
    ----------
    species : Species
        ``species.phi`` is the level-n field.
    face_flux : FaceField
        Divergence-free volumetric face fluxes [m^3/s].
    dt : float
    sink : MembraneSink, optional
        Linearised membrane uptake (inert membrane when omitted).
    old : ndarray, optional
        Level n-1 values; omitted on the first step (implicit Euler).
    guess : ndarray, optional
        Current iterate used for the deferred van Leer correction.
    phi_m : ndarray, optional
        Current membrane-face concentrations (ghost values for the limiter).

    Returns
    -------
    (ScalarField, SpeciesBalance)
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = species.phi.grid
    D = species.D
    a0, a1, a2 = time_coefficients(old is None)
    it_values = species.phi.values if guess is None else guess
    it = species_boundary(species, it_values, phi_m)

    fx, fy = face_flux.x, face_flux.y
    tx = D * g.area_x / g.dx
    ty = D * g.area_y / g.dy
    V = g.volume
    a_p = np.full(g.shape, V * a0 / dt)
    a_w = np.zeros(g.shape)
    a_e = np.zeros(g.shape)
    a_s = np.zeros(g.shape)
    a_n = np.zeros(g.shape)
    b = -V * a1 / dt * species.phi.values
    if old is not None:
        b -= V * a2 / dt * old

    F = fx[1:-1, :]
    a_p[:-1, :] += np.maximum(F, 0) + tx
    a_e[:-1, :] += np.minimum(F, 0) - tx
    a_p[1:, :] += np.maximum(-F, 0) + tx
    a_w[1:, :] += np.minimum(-F, 0) - tx
    F = fy[:, 1:-1]
    a_p[:, :-1] += np.maximum(F, 0) + ty
    a_n[:, :-1] += np.minimum(F, 0) - ty
    a_p[:, 1:] += np.maximum(-F, 0) + ty
    a_s[:, 1:] += np.minimum(-F, 0) - ty

    inlet_terms = []
    for side, tag in g.tags.items():
        sl = side_slice(side)
        Fo = face_flux.outward(side)
        area = g.area_x if side in ("west", "east") else g.area_y
        spacing = g.dx if side in ("west", "east") else g.dy
        if tag == INLET:
            diff = 2.0 * D * area / spacing
            a_p[sl] += diff
            b[sl] += diff * species.phi_in - Fo * species.phi_in
            inlet_terms.append((sl, Fo, diff))
        elif tag == OUTLET:
            a_p[sl] += Fo
        elif tag == MEMBRANE:
            s = sink if sink is not None else MembraneSink.inert(g.side_length(side))
            a_p[sl] += s.coef * area
            b[sl] += s.release * area
        elif tag == WALL:
            pass

    cx, cy = tvd_corrections(it, face_flux)
    qx = fx[1:-1, :] * cx
    qy = fy[:, 1:-1] * cy
    b[:-1, :] -= qx
    b[1:, :] += qx
    b[:, :-1] -= qy
    b[:, 1:] += qy

    A = assemble(a_p, a_w, a_e, a_s, a_n)
    x = solve_bicgstab(A, b.ravel(), x0=np.asarray(it_values).ravel(), rtol=lin_tol,
                       what=f"species {species.name}").reshape(g.shape)

    # bookkeeping uses the solved (unclamped) values so it matches the
    # discrete equations exactly; clamping is reported separately
    bal = SpeciesBalance()
    for sl, Fo, diff in inlet_terms:
        bal.inflow += float(np.sum(-Fo * species.phi_in + diff * (species.phi_in - x[sl])) * dt)
    for side, tag in g.tags.items():
        sl = side_slice(side)
        area = g.area_x if side in ("west", "east") else g.area_y
        if tag == OUTLET:
            bal.outflow += float(np.sum(face_flux.outward(side) * x[sl]) * dt)
        elif tag == MEMBRANE and sink is not None:
            bal.membrane += float(np.sum((sink.coef * x[sl] - sink.release) * area) * dt)
    neg = x < 0
    bal.clamped = float(-np.sum(x[neg]) * V)
    # accumulation in the scheme's own time difference (BDF2 after the first
    # step); summed over a run it differs from the stored-mass change only by
    # half the difference of the last and first increments
    stored = a0 * x + a1 * species.phi.values
    if old is not None:
        stored = stored + a2 * old
    bal.accumulation = float(np.sum(stored) * V)
    if bal.clamped:
        log.debug("species %s: clamped %.3e mol of negative concentration", species.name, bal.clamped)
        x = np.where(neg, 0.0, x)
    return species_boundary(species, x, phi_m), bal
