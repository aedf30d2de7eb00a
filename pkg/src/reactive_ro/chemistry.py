"""
Mass-action kinetics for a stoichiometric reaction network.

A network of ``m`` irreversible reactions among ``n`` species is held as two
``m x n`` integer matrices: ``A`` (reactant coefficients) and ``B``
(product coefficients), plus the rate constants ``K``.  Reaction ``j`` runs
at ``K[j] * prod_i phi_i ** A[j, i]`` and changes species ``i`` at
``(B - A)[j, i]`` times that rate, so reactants are consumed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass
class ReactionNetwork:
    """Irreversible mass-action network.

    Attributes
    ----------
    species : list of str
        Names, in column order of ``A`` and ``B``.
    A, B : ndarray of int, shape (m, n)
        Reactant and product stoichiometric coefficients.
    K : ndarray, shape (m,)
        Rate constants; for a binary reaction in m^3/(mol s).
    solid : ndarray of bool, shape (n,)
        Species that precipitate (not transported).
    molar_volume : ndarray, shape (n,)
        Molar volume of each solid [m^3/mol]; zero for dissolved species.
    """

    species: list
    A: np.ndarray
    B: np.ndarray
    K: np.ndarray
    solid: np.ndarray = None
    molar_volume: np.ndarray = None
    names: list = field(default_factory=list)

    def __post_init__(self):
        self.species = list(self.species)
        n = len(self.species)
        self.A = np.atleast_2d(np.asarray(self.A))
        self.B = np.atleast_2d(np.asarray(self.B))
        self.K = np.atleast_1d(np.asarray(self.K, dtype=float))
        if n == 0:
            self.A = self.A.reshape(0, 0)
            self.B = self.B.reshape(0, 0)
        if self.A.size == 0 and n:
            self.A = np.zeros((0, n), dtype=int)
            self.B = np.zeros((0, n), dtype=int)
        for name, M in (("A", self.A), ("B", self.B)):
            if M.shape != (self.K.size, n):
                raise ConfigError(f"stoichiometric matrix {name} has shape {M.shape}, "
                                  f"expected {(self.K.size, n)}")
            if np.any(M < 0):
                raise ConfigError(f"stoichiometric matrix {name} has negative entries")
            if not np.all(np.equal(np.mod(M, 1), 0)):
                raise ConfigError("stoichiometric coefficients must be integers")
        self.A = self.A.astype(int)
        self.B = self.B.astype(int)
        if np.any(self.K < 0) or not np.all(np.isfinite(self.K)):
            raise ConfigError("kinetic constants must be finite and >= 0")
        self.solid = (np.zeros(n, dtype=bool) if self.solid is None
                      else np.asarray(self.solid, dtype=bool))
        self.molar_volume = (np.zeros(n) if self.molar_volume is None
                             else np.asarray(self.molar_volume, dtype=float))
        if not self.names:
            self.names = [str(j + 1) for j in range(self.K.size)]

    @property
    def n_species(self):
        return len(self.species)

    @property
    def m_reactions(self):
        return self.K.size

    @property
    def stoichiometry(self):
        """Net change matrix ``B - A``."""
        return self.B - self.A

    def index(self, name):
        return self.species.index(name)

    def with_kinetics(self, K):
        """Copy of the network with every rate constant replaced by ``K``."""
        K = np.broadcast_to(np.asarray(K, dtype=float), self.K.shape).copy()
        return ReactionNetwork(self.species, self.A.copy(), self.B.copy(), K,
                               self.solid.copy(), self.molar_volume.copy(), list(self.names))


def _as_conc(net, phi):
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != net.n_species:
        raise ValueError(f"expected {net.n_species} concentrations, got shape {phi.shape}")
    if np.any(phi < 0):
        raise ValueError("concentrations must be non-negative")
    return phi


def reaction_rates(net, phi):
    """Mass-action rate of every reaction [mol/(m^3 s)].

    ``phi`` has shape ``(..., n)``; the result has shape ``(..., m)``.
    """
    phi = _as_conc(net, phi)
    # phi ** A with exponent 0 -> 1 even when phi == 0
    powers = phi[..., None, :] ** net.A
    return net.K * np.prod(powers, axis=-1)


def rate_jacobian(net, phi):
    """Derivative of every reaction rate with respect to every concentration.

    Returns shape ``(..., m, n)``.
    """
    phi = _as_conc(net, phi)
    A = net.A
    base = phi[..., None, :] ** A
    jac = np.empty(phi.shape[:-1] + A.shape)
    for i in range(net.n_species):
        reduced = base.copy()
        reduced[..., i] = np.where(A[:, i] > 0, A[:, i] * phi[..., None, i] ** np.maximum(A[:, i] - 1, 0), 0.0)
        jac[..., i] = net.K * np.prod(reduced, axis=-1)
    return jac


def species_sources(net, phi):
    """Net volumetric production of every species ``(B - A)^T rates``."""
    return reaction_rates(net, phi) @ net.stoichiometry


def surface_consumption(net, phi_m, ell):
    """Surface reaction flux per membrane area ``species_sources * ell``.

    Negative entries are species consumed at the membrane; positive entries
    are produced (including solids).  Units mol/(m^2 s).
    """
    return species_sources(net, phi_m) * ell


def solid_production(net, phi_m, ell):
    """Solid volume produced per membrane area per second, summed over solids [m/s]."""
    xi = surface_consumption(net, phi_m, ell)
    return np.sum(np.where(net.solid, xi, 0.0) * net.molar_volume, axis=-1)


class SurfaceReactions:
    """Membrane-surface view of a network for a list of transported species.

    Maps face concentrations of the transported species (in their own
    order) onto the network columns; solids are held at zero since they do
    not enter any rate.  Transported species absent from the network are
    inert.
    """

    def __init__(self, net, transported, ell):
        self.net = net
        self.ell = float(ell)
        self.transported = list(transported)
        for name in self.transported:
            if name in net.species and net.solid[net.index(name)]:
                raise ConfigError(f"species {name!r} is both transported and solid")
        for i, name in enumerate(net.species):
            if not net.solid[i] and name not in self.transported:
                raise ConfigError(f"reaction species {name!r} has no [species.{name}] section")
            if net.solid[i] and np.any(net.A[:, i] > 0):
                raise ConfigError(f"solid {name!r} cannot be a reactant")
        self.cols = np.array([net.index(s) if s in net.species else -1 for s in self.transported],
                             dtype=int)
        self.active = self.cols >= 0
        self.solid_cols = np.flatnonzero(net.solid)
        self.molar_volume = net.molar_volume[self.solid_cols]

    @property
    def inert(self):
        return self.net.m_reactions == 0 or not np.any(self.net.K > 0)

    def full(self, phi_m):
        """Network-order concentrations from transported-order ones."""
        phi_m = np.asarray(phi_m, dtype=float)
        out = np.zeros(phi_m.shape[:-1] + (self.net.n_species,))
        out[..., self.cols[self.active]] = phi_m[..., self.active]
        return out

    def flux(self, phi_m):
        """Surface production of each transported species [mol/(m^2 s)]."""
        xi = surface_consumption(self.net, self.full(phi_m), self.ell)
        out = np.zeros(np.shape(phi_m))
        out[..., self.active] = xi[..., self.cols[self.active]]
        return out

    def flux_jacobian(self, phi_m):
        """``d flux_i / d phi_m,k`` over transported species, shape ``(..., ns, ns)``."""
        phi_m = np.asarray(phi_m, dtype=float)
        ns = phi_m.shape[-1]
        jr = rate_jacobian(self.net, self.full(phi_m))  # (..., m, n)
        full = np.einsum("ji,...jk->...ik", self.net.stoichiometry.astype(float), jr) * self.ell
        out = np.zeros(phi_m.shape[:-1] + (ns, ns))
        a = np.flatnonzero(self.active)
        c = self.cols[a]
        out[..., a[:, None], a[None, :]] = full[..., c[:, None], c[None, :]]
        return out

    def solid_rates(self, phi_m):
        """Molar production of every solid [mol/(m^2 s)], shape ``(..., n_solids)``."""
        xi = surface_consumption(self.net, self.full(phi_m), self.ell)
        return xi[..., self.solid_cols]
