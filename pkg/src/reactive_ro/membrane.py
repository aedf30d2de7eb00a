"""
Membrane-face physics.

Van't Hoff osmotic pressure, Darcy permeation, porosity loss from
precipitation, Kozeny-Carman permeability, recovery and the commercial
water-permeability equivalence.  Velocities in :class:`MembraneState` are
outward permeate velocities (positive when water leaves the feed channel).

The feed-side membrane faces are solved jointly for the permeate velocity
and the face concentrations (:func:`solve_membrane_faces`): the film
closure links the face concentration to the adjacent cell value, the
osmotic pressure of the face concentration sets the Darcy velocity, and the
velocity sets the film.  Solving that local problem exactly avoids the
strong concentration-polarisation feedback that a lagged outer iteration
would otherwise have to resolve.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, SolverError
from .transport import film_factor

log = logging.getLogger(__name__)

GAS_CONSTANT = 8.314
# film exponent limit; keeps powers of the face concentration finite
FILM_CLIP = 200.0


@dataclass(frozen=True)
class OsmoticModel:
    """Van't Hoff parameters."""

    R: float = GAS_CONSTANT
    T: float = 298.0
    varphi: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigError("must be positive", key="[osmotic].T")
        if not self.varphi > 0:
            raise ConfigError("must be positive", key="[osmotic].varphi")
        if not self.R > 0:
            raise ConfigError("gas constant must be positive")

    @property
    def slope(self):
        """Osmotic pressure per unit total concentration [Pa m^3/mol]."""
        return self.R * self.T * self.varphi


@dataclass
class MembraneState:
    """Per-face membrane state.

    Attributes
    ----------
    x : ndarray
        Face centres [m].
    epsilon, k : ndarray
        Porosity [-] and permeability [m^2]; ``k`` always equals
        ``kozeny_carman(epsilon)``.
    v_m : ndarray
        Outward permeate velocity [m/s].
    delta_pi : ndarray
        Osmotic pressure difference [Pa].
    precipitate : ndarray
        Cumulative solid [mol/m^2].
    phi_m : ndarray, shape (nf, n_species)
        Feed-side face concentrations [mol/m^3].
    solid_rate : ndarray, shape (nf, n_solids)
        Molar solid production rate at the state's time [mol/(m^2 s)].
    reverse : ndarray of bool
        Faces where the osmotic pressure exceeds the applied one.
    """

    x: np.ndarray
    epsilon: np.ndarray
    k: np.ndarray
    v_m: np.ndarray
    delta_pi: np.ndarray
    precipitate: np.ndarray
    phi_m: np.ndarray
    solid_rate: np.ndarray
    reverse: np.ndarray
    ell: float
    k0: float
    epsilon0: float
    p_perm: float = 0.0
    eps_min: float = 0.01

    def copy(self):
        return replace(self, **{f: getattr(self, f).copy() for f in
                                ("x", "epsilon", "k", "v_m", "delta_pi", "precipitate",
                                 "phi_m", "solid_rate", "reverse")})

    @property
    def n_faces(self):
        return self.x.size

    def is_finite(self):
        return all(np.all(np.isfinite(getattr(self, f))) for f in
                   ("epsilon", "k", "v_m", "delta_pi", "precipitate", "phi_m"))


def osmotic_pressure(model, phi_m):
    """``R T varphi sum_i phi_i`` over the last axis [Pa]."""
    phi_m = np.asarray(phi_m, dtype=float)
    if np.any(phi_m < 0):
        raise ValueError("membrane concentrations must be non-negative")
    return model.slope * np.sum(phi_m, axis=-1)


def membrane_velocity(k, p_m, p_perm, delta_pi, ell, mu):
    """Outward permeate velocity ``k (p_m - p_perm - delta_pi) / (ell mu)`` [m/s].

    Negative values are reverse (osmotic) flow into the channel.
    """
    k, ell, mu = (np.asarray(a, dtype=float) for a in (k, ell, mu))
    if np.any(k <= 0) or not np.all(ell > 0) or not np.all(mu > 0):
        raise ValueError("k, ell and mu must be positive")
    return k * ((np.asarray(p_m) - p_perm) - np.asarray(delta_pi)) / (ell * mu)


def kozeny_carman(epsilon, epsilon0, k0):
    """Permeability from porosity, ``k0 (1-e0)^2/(1-e)^2 (e/e0)^3``."""
    eps = np.asarray(epsilon, dtype=float)
    if np.any(eps >= 1) or np.any(eps < 0):
        raise ValueError("porosity must lie in [0, 1)")
    if not 0 < epsilon0 < 1:
        raise ValueError("initial porosity must lie in (0, 1)")
    out = k0 * ((1.0 - epsilon0) ** 2 / (1.0 - eps) ** 2) * (eps / epsilon0) ** 3
    return out[()] if out.ndim == 0 else out


def update_porosity(epsilon, solid_rate, V_s, ell, dt, eps_min=0.0):
    """Porosity after ``dt`` of precipitation.

    ``epsilon - (V_s / ell) * solid_rate * dt`` floored at ``eps_min``.
    ``solid_rate`` and ``V_s`` may carry a trailing axis over several
    solids, which is summed.
    """
    rate = np.asarray(solid_rate, dtype=float)
    if np.any(rate < 0):
        raise ValueError("precipitation is irreversible: solid_rate must be >= 0")
    loss = rate * np.asarray(V_s, dtype=float)
    if loss.ndim > np.ndim(epsilon):
        loss = np.sum(loss, axis=-1)
    out = np.maximum(eps_min, np.asarray(epsilon, dtype=float) - loss * dt / ell)
    return out[()] if out.ndim == 0 else out


def recovery(v_bar, u_av, L, H):
    """Permeate over feed flow rate ``v_bar L / (u_av H)``."""
    if not u_av > 0:
        raise ValueError("u_av must be positive")
    return v_bar * L / (u_av * H)


def equivalent_water_permeability(k, S_m, ell, mu):
    """Commercial water permeability ``A = S_m k / (ell mu)``."""
    for name, val in (("k", k), ("S_m", S_m), ("ell", ell), ("mu", mu)):
        if not np.all(np.asarray(val) > 0):
            raise ValueError(f"{name} must be positive")
    return S_m * k / (ell * mu)


def membrane_resistance(k, S_m, ell):
    """Membrane resistance ``R_m = ell / (S_m k)``."""
    return ell / (S_m * k)


def initial_membrane_state(x, phi_m, p_m, k0, epsilon0, ell, mu, osmotic, n_solids=0,
                           p_perm=0.0, eps_min=0.01):
    """Fresh membrane with uniform porosity ``epsilon0``."""
    if not 0 < epsilon0 < 1:
        raise ConfigError("must lie in (0, 1)", key="[membrane].epsilon0")
    if not 0 <= eps_min < epsilon0:
        raise ConfigError("must lie in [0, epsilon0)", key="[membrane].eps_min")
    nf = np.size(x)
    eps = np.full(nf, float(epsilon0))
    k = kozeny_carman(eps, epsilon0, k0)
    phi_m = np.array(phi_m, dtype=float).reshape(nf, -1)
    dpi = osmotic_pressure(osmotic, phi_m)
    v = membrane_velocity(k, p_m, p_perm, dpi, ell, mu)
    return MembraneState(np.asarray(x, dtype=float).copy(), eps, k, v, dpi, np.zeros(nf), phi_m,
                         np.zeros((nf, n_solids)), v < 0, float(ell), float(k0),
                         float(epsilon0), float(p_perm), float(eps_min))


def refresh_membrane(state, phi_m, p_m, surface, dt, osmotic, mu):
    """End-of-step membrane state from the start-of-step ``state``.

    Per face: surface consumption, porosity (trapezoidal rule between the
    start-of-step and current precipitation rates), permeability, osmotic
    pressure and permeate velocity.

    Parameters
    ----------
    state : MembraneState
        State at the beginning of the step (not modified).
    phi_m : ndarray, shape (nf, n_species)
        Current face concentrations.
    p_m : ndarray
        Current feed-side membrane pressure [Pa].
    surface : SurfaceReactions
        Network seen from the membrane.
    dt : float
        Step length [s].
    """
    phi_m = np.asarray(phi_m, dtype=float)
    rate = surface.solid_rates(phi_m)
    if rate.shape != state.solid_rate.shape:
        raise ValueError("solid count does not match the membrane state")
    avg = 0.5 * (state.solid_rate + rate)
    eps = update_porosity(state.epsilon, avg, surface.molar_volume, state.ell, dt, state.eps_min)
    k = kozeny_carman(eps, state.epsilon0, state.k0)
    dpi = osmotic_pressure(osmotic, phi_m)
    v = membrane_velocity(k, p_m, state.p_perm, dpi, state.ell, mu)
    prec = state.precipitate + np.sum(avg, axis=-1) * dt
    return replace(state, epsilon=eps, k=k, v_m=v, delta_pi=dpi, precipitate=prec,
                   phi_m=phi_m.copy(), solid_rate=rate, reverse=v < 0)


def film_concentrations(phi_P, v, D, h, surface, tol=1e-12, maxiter=100, phi_guess=None):
    """Face concentrations for a given face y-velocity.

    Solves, per face and species, the film relation between the adjacent
    cell value ``phi_P`` (distance ``h``) and the face value under the
    surface-reaction flux evaluated at the face.

    Parameters
    ----------
    phi_P : ndarray, shape (nf, ns)
    v : ndarray, shape (nf,)
        y-velocity on the faces (negative for permeation).
    D : ndarray, shape (ns,)
    h : float
    surface : SurfaceReactions
    phi_guess : ndarray, optional
        Newton start (e.g. a nearby solution); falls back to the default
        start when Newton does not converge from it.

    Returns
    -------
    phi_m, J : ndarrays of shape (nf, ns)
        Face concentrations and surface production rates.
    """
    phi_P = np.asarray(phi_P, dtype=float)
    a = np.clip(np.asarray(v, dtype=float)[:, None] * h / D, -FILM_CLIP, FILM_CLIP)
    e = np.exp(a)
    c = (h / D) * film_factor(a)
    phi0 = phi_P / e
    if surface.inert:
        return phi0, np.zeros_like(phi0)

    def resid(phi):
        J = surface.flux(phi)
        return e * phi - c * J - phi_P, J

    if phi_guess is not None:
        out = _film_newton(resid, np.maximum(np.asarray(phi_guess, dtype=float), 0.0),
                           e, c, surface, phi_P, tol, maxiter=30)
        if out is not None:
            return out

    scale = np.maximum(phi_P, 1e-300)
    # common scale factor on the inert solution as the Newton start: for a
    # single reaction between equally diffusive species it is already the root
    lo = np.full(phi0.shape[0], -700.0)
    hi = np.zeros(phi0.shape[0])
    F1, _ = resid(phi0)
    need = np.max(F1 / scale, axis=1) > 0
    if np.any(need):
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            F, _ = resid(phi0 * np.exp(mid)[:, None])
            pos = np.max(F / scale, axis=1) > 0
            hi = np.where(pos & need, mid, hi)
            lo = np.where(pos | ~need, lo, mid)
    phi = phi0 * np.exp(np.where(need, hi, 0.0))[:, None]
    out = _film_newton(resid, phi, e, c, surface, phi_P, tol, maxiter)
    if out is not None:
        return out
    raise SolverError("membrane film concentrations did not converge", iterations=maxiter)


def _film_newton(resid, phi, e, c, surface, phi_P, tol, maxiter):
    """Damped Newton keeping concentrations non-negative; None if not converged."""
    eye = np.eye(phi.shape[1])
    for _ in range(maxiter):
        F, J = resid(phi)
        if np.all(np.abs(F) <= tol * (phi_P + e * phi + 1e-300)):
            return phi, J
        jac = e[:, :, None] * eye - c[:, :, None] * surface.flux_jacobian(phi)
        # concentrations on one face can span many decades (a scarce reactant
        # driven to zero next to a polarised partner), so rows are scaled by
        # the residual magnitude and columns by the unknowns; a tiny relative
        # shift keeps modes lost to round-off (e.g. the difference of two
        # equally consumed species at large film Peclet numbers) finite
        mag = phi_P + e * phi + np.abs(c * J)
        row = 1.0 / (mag + 1e-30 * np.max(mag, axis=1, keepdims=True) + 1e-300)
        col = np.maximum(phi, 1e-30 * np.max(phi_P, axis=1, keepdims=True) + 1e-300)
        js = row[:, :, None] * jac * col[:, None, :]
        js += (1e-13 * np.max(np.abs(js), axis=(1, 2)))[:, None, None] * eye
        step = col * np.linalg.solve(js, -(row * F)[..., None])[..., 0]
        shrink = (step < 0) & (phi > 0)
        ratio = np.where(shrink, 0.9 * phi / np.where(shrink, -step, 1.0), np.inf)
        lam = np.minimum(1.0, np.min(ratio, axis=1))
        phi = np.maximum(phi + lam[:, None] * step, 0.0)
    return None


def solve_membrane_faces(phi_P, D, h, surface, G, dp, osmotic, v_guess=None, phi_guess=None,
                         tol=1e-14, maxiter=200):
    """Joint solve of face y-velocity and face concentrations.

    Finds, per face, ``v`` with ``v = -G (dp - Pi(phi_m(v)))`` where
    ``phi_m(v)`` comes from :func:`film_concentrations`.  The residual is
    monotone in ``v``, so a safeguarded regula falsi (Illinois) converges
    from any bracket.

    Parameters
    ----------
    phi_P : ndarray, shape (nf, ns)
        Concentrations in the membrane-adjacent cells.
    D : ndarray, shape (ns,)
    h : float
        Distance from the cell centre to the face.
    G : ndarray
        Hydraulic conductance ``k / (ell mu)`` [m/(Pa s)].
    dp : ndarray
        Applied pressure difference ``p_m - p_perm`` [Pa].
    v_guess : ndarray, optional
        Starting y-velocity (e.g. the previous solution).
    phi_guess : ndarray, optional
        Starting face concentrations for the inner solves.

    Returns
    -------
    v, phi_m, J
    """
    phi_P = np.asarray(phi_P, dtype=float)
    nf = phi_P.shape[0]
    G = np.broadcast_to(np.asarray(G, dtype=float), (nf,))
    dp = np.broadcast_to(np.asarray(dp, dtype=float), (nf,))
    D = np.asarray(D, dtype=float)

    last = {"phi": phi_guess}

    def g(v):
        phi, J = film_concentrations(phi_P, v, D, h, surface, phi_guess=last["phi"])
        last["phi"] = phi
        return v + G * (dp - osmotic_pressure(osmotic, phi)), phi, J

    pi0 = osmotic_pressure(osmotic, film_concentrations(phi_P, np.zeros(nf), D, h, surface)[0])
    tiny = 1e-300
    v_min = np.minimum(0.0, -G * dp) - tiny
    v_max = np.maximum(0.0, G * (pi0 - dp)) + tiny
    if v_guess is None:
        v_guess = -G * (dp - osmotic_pressure(osmotic, phi_P))
    v0 = np.clip(np.asarray(v_guess, dtype=float), v_min, v_max)
    g0, phi, J = g(v0)
    vscale = np.maximum(np.abs(v0), G * (np.abs(dp) + pi0)) + tiny
    if np.all(np.abs(g0) <= tol * vscale):
        return v0, phi, J

    # expand a bracket around the guess, capped at the guaranteed bounds
    lo, hi = v0.copy(), v0.copy()
    glo, ghi = g0.copy(), g0.copy()
    delta = np.maximum(1e-3 * vscale, 0.05 * np.abs(v0))
    open_lo = glo > 0
    open_hi = ghi < 0
    for _ in range(200):
        if not (np.any(open_lo) or np.any(open_hi)):
            break
        # while open, lo (or hi) holds the latest point on the wrong side
        trial = np.where(open_lo, np.maximum(lo - delta, v_min), np.minimum(hi + delta, v_max))
        active = open_lo | open_hi
        gt, _, _ = g(np.where(active, trial, v0))
        down = open_lo & (gt <= 0)
        up = open_hi & (gt >= 0)
        still_lo = open_lo & ~down
        still_hi = open_hi & ~up
        hi, ghi = np.where(down, lo, hi), np.where(down, glo, ghi)
        lo, glo = np.where(open_lo, trial, lo), np.where(open_lo, gt, glo)
        lo, glo = np.where(up, hi, lo), np.where(up, ghi, glo)
        hi, ghi = np.where(open_hi, trial, hi), np.where(open_hi, gt, ghi)
        open_lo, open_hi = still_lo, still_hi
        delta = 2.0 * delta
    if np.any(open_lo | open_hi):
        raise SolverError("could not bracket the membrane velocity")

    v = np.where(np.abs(glo) <= np.abs(ghi), lo, hi)
    side = np.zeros(nf, dtype=int)
    for it in range(maxiter):
        width = hi - lo
        denom = ghi - glo
        secant = np.where(denom != 0, hi - ghi * width / np.where(denom != 0, denom, 1.0), 0.5 * (lo + hi))
        trial = np.where((it % 8 == 7) | ~((secant > lo) & (secant < hi)), 0.5 * (lo + hi), secant)
        gt, phi, J = g(trial)
        v = trial
        done = (np.abs(gt) <= tol * vscale) | (width <= 4e-16 * np.abs(trial) + tiny)
        if np.all(done):
            return v, phi, J
        same = gt * ghi > 0
        hi_new = np.where(same, trial, hi)
        ghi_new = np.where(same, gt, ghi)
        lo_new = np.where(same, lo, trial)
        glo_new = np.where(same, glo, gt)
        # Illinois: halve the stale end when the same side is replaced twice
        glo_new = np.where(same & (side == 1), 0.5 * glo_new, glo_new)
        ghi_new = np.where(~same & (side == -1), 0.5 * ghi_new, ghi_new)
        side = np.where(same, 1, -1)
        lo, hi, glo, ghi = lo_new, hi_new, glo_new, ghi_new
    raise SolverError("membrane velocity iteration did not converge",
                      residual=float(np.max(np.abs(gt) / vscale)), iterations=maxiter)
