"""
INI configuration for a channel simulation.

Sections (SI units throughout)::

    [geometry]   L, H, nx, ny, Z = 1
    [fluid]      rho, mu
    [inlet]      u_av
    [pressure]   p_out, p_perm = 0
    [species.X]  phi_in, D = 1.5e-9, phi_init = 0, rejection = 1
    [reaction.N] reactants = a:1, b:1 ; products = s:1 ; K
    [solid.X]    molar_volume
    [membrane]   k0, epsilon0, ell, eps_min = 0.01
    [osmotic]    T = 298, varphi = 1
    [controls]   dt, t_end, picard_tol, picard_max, output_times, ...
    [initial]    velocity = zero | developed
    [modes]      frozen_concentration = false

Concentrations are in mol/m^3 and rate constants of binary reactions in
m^3/(mol s).
"""

import configparser
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .chemistry import ReactionNetwork
from .errors import ConfigError

DEFAULT_D = 1.5e-9
HOUR = 3600.0


@dataclass(frozen=True)
class SpeciesConfig:
    name: str
    phi_in: float
    D: float = DEFAULT_D
    phi_init: float = 0.0
    rejection: float = 1.0


@dataclass(frozen=True)
class ReactionConfig:
    name: str
    reactants: dict
    products: dict
    K: float


@dataclass(frozen=True)
class Controls:
    dt: float
    t_end: float
    picard_tol: float = 1e-6
    picard_max: int = 50
    output_times: tuple = (6 * HOUR, 12 * HOUR, 28 * HOUR)
    n_correctors: int = 2
    lin_tol: float = 1e-10
    pressure_solver: str = "direct"
    cfl_warn: float = 0.5
    cfl_abort: float = 1.0
    series_stride: int = 1
    snapshots: bool = False


@dataclass(frozen=True)
class SimulationConfig:
    """Validated simulation input."""

    L: float
    H: float
    nx: int
    ny: int
    rho: float
    mu: float
    u_av: float
    p_out: float
    species: tuple
    reactions: tuple
    solids: dict
    k0: float
    epsilon0: float
    ell: float
    controls: Controls
    Z: float = 1.0
    p_perm: float = 0.0
    eps_min: float = 0.01
    T: float = 298.0
    varphi: float = 1.0
    initial_velocity: str = "zero"
    frozen_concentration: bool = False
    source: str = field(default="", compare=False)

    def __post_init__(self):
        validate(self)

    @property
    def species_names(self):
        return [s.name for s in self.species]

    def network(self):
        """Reaction network over the transported species followed by the solids."""
        names = self.species_names + sorted(self.solids)
        n = len(names)
        m = len(self.reactions)
        A = np.zeros((m, n), dtype=int)
        B = np.zeros((m, n), dtype=int)
        for j, r in enumerate(self.reactions):
            for s, c in r.reactants.items():
                A[j, names.index(s)] = c
            for s, c in r.products.items():
                B[j, names.index(s)] = c
        solid = np.array([nm in self.solids for nm in names], dtype=bool)
        vol = np.array([self.solids.get(nm, 0.0) for nm in names])
        return ReactionNetwork(names, A, B, [r.K for r in self.reactions], solid, vol,
                               [r.name for r in self.reactions])

    def with_kinetics(self, K):
        """Copy with every rate constant replaced by ``K``."""
        rx = tuple(replace(r, K=float(K)) for r in self.reactions)
        return replace(self, reactions=rx)

    def with_controls(self, **kw):
        return replace(self, controls=replace(self.controls, **kw))

    def reynolds(self):
        return self.rho * self.u_av * self.H / self.mu


def _positive(value, key):
    if not (np.isfinite(value) and value > 0):
        raise ConfigError("must be positive", key=key)


def validate(cfg):
    for key, val in (("[geometry].L", cfg.L), ("[geometry].H", cfg.H), ("[geometry].Z", cfg.Z),
                     ("[fluid].rho", cfg.rho), ("[fluid].mu", cfg.mu), ("[inlet].u_av", cfg.u_av),
                     ("[membrane].k0", cfg.k0), ("[membrane].ell", cfg.ell),
                     ("[osmotic].T", cfg.T), ("[osmotic].varphi", cfg.varphi),
                     ("[controls].dt", cfg.controls.dt), ("[controls].t_end", cfg.controls.t_end),
                     ("[controls].picard_tol", cfg.controls.picard_tol),
                     ("[controls].lin_tol", cfg.controls.lin_tol),
                     ("[controls].cfl_warn", cfg.controls.cfl_warn),
                     ("[controls].cfl_abort", cfg.controls.cfl_abort)):
        _positive(val, key)
    for key, val in (("[geometry].nx", cfg.nx), ("[geometry].ny", cfg.ny),
                     ("[controls].picard_max", cfg.controls.picard_max),
                     ("[controls].n_correctors", cfg.controls.n_correctors),
                     ("[controls].series_stride", cfg.controls.series_stride)):
        if int(val) != val or val < 1:
            raise ConfigError("must be an integer >= 1", key=key)
    if not np.isfinite(cfg.p_out):
        raise ConfigError("must be finite", key="[pressure].p_out")
    if not (np.isfinite(cfg.p_perm) and cfg.p_perm >= 0):
        raise ConfigError("must be non-negative", key="[pressure].p_perm")
    if not 0 < cfg.epsilon0 < 1:
        raise ConfigError("must lie in (0, 1)", key="[membrane].epsilon0")
    if not 0 <= cfg.eps_min < cfg.epsilon0:
        raise ConfigError("must lie in [0, epsilon0)", key="[membrane].eps_min")
    if cfg.controls.pressure_solver not in ("direct", "cg"):
        raise ConfigError("must be 'direct' or 'cg'", key="[controls].pressure_solver")
    if cfg.initial_velocity not in ("zero", "developed"):
        raise ConfigError("must be 'zero' or 'developed'", key="[initial].velocity")
    if any(t < 0 for t in cfg.controls.output_times):
        raise ConfigError("must be non-negative", key="[controls].output_times")
    if not cfg.species:
        raise ConfigError("at least one [species.X] section is required", key="[species]")
    names = set()
    for s in cfg.species:
        key = f"[species.{s.name}]"
        if s.name in names:
            raise ConfigError("duplicate species", key=key)
        names.add(s.name)
        _positive(s.D, f"{key}.D")
        if not (np.isfinite(s.phi_in) and s.phi_in >= 0):
            raise ConfigError("must be non-negative", key=f"{key}.phi_in")
        if not (np.isfinite(s.phi_init) and s.phi_init >= 0):
            raise ConfigError("must be non-negative", key=f"{key}.phi_init")
        if s.rejection != 1.0:
            raise ConfigError("partial rejection is not implemented (use 1)", key=f"{key}.rejection")
    for solid, vol in cfg.solids.items():
        key = f"[solid.{solid}].molar_volume"
        if solid in names:
            raise ConfigError("a solid cannot also be a transported species", key=key)
        _positive(vol, key)
    known = names | set(cfg.solids)
    for r in cfg.reactions:
        key = f"[reaction.{r.name}]"
        if not (np.isfinite(r.K) and r.K >= 0):
            raise ConfigError("must be finite and >= 0", key=f"{key}.K")
        if not r.reactants:
            raise ConfigError("at least one reactant is required", key=f"{key}.reactants")
        for part, terms in (("reactants", r.reactants), ("products", r.products)):
            for s, c in terms.items():
                if s not in known:
                    raise ConfigError(f"unknown species {s!r}", key=f"{key}.{part}")
                if int(c) != c or c < 1:
                    raise ConfigError("coefficients must be integers >= 1", key=f"{key}.{part}")
        for s in r.reactants:
            if s in cfg.solids:
                raise ConfigError(f"solid {s!r} cannot be a reactant", key=f"{key}.reactants")


# -- parsing ----------------------------------------------------------------

_REQUIRED = object()


def _get(cp, section, key, conv=float, default=_REQUIRED):
    full = f"[{section}].{key}"
    if not cp.has_section(section) or not cp.has_option(section, key):
        if default is _REQUIRED:
            raise ConfigError("missing required key", key=full)
        return default
    raw = cp.get(section, key).strip()
    try:
        return conv(raw)
    except (ValueError, TypeError):
        raise ConfigError(f"cannot parse {raw!r}", key=full) from None


def _int(raw):
    val = float(raw)
    if val != int(val):
        raise ValueError(raw)
    return int(val)


def _bool(raw):
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _floats(raw):
    return tuple(float(t) for t in raw.replace(",", " ").split())


def _terms(raw):
    out = {}
    for tok in raw.replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        name, _, coef = tok.partition(":")
        c = float(coef) if coef.strip() else 1.0
        if c != int(c):
            raise ValueError(tok)
        name = name.strip()
        if not name or name in out:
            raise ValueError(tok)
        out[name] = int(c)
    return out


def parse_config(text, source=""):
    """Parse and validate configuration text."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    species = []
    reactions = []
    solids = {}
    for sec in cp.sections():
        kind, dot, name = sec.partition(".")
        if dot and not name:
            raise ConfigError("section needs a name after the dot", key=f"[{sec}]")
        if kind == "species":
            species.append(SpeciesConfig(
                name=name,
                phi_in=_get(cp, sec, "phi_in"),
                D=_get(cp, sec, "D", default=DEFAULT_D),
                phi_init=_get(cp, sec, "phi_init", default=0.0),
                rejection=_get(cp, sec, "rejection", default=1.0),
            ))
        elif kind == "reaction":
            reactions.append(ReactionConfig(
                name=name,
                reactants=_get(cp, sec, "reactants", _terms),
                products=_get(cp, sec, "products", _terms, default={}),
                K=_get(cp, sec, "K"),
            ))
        elif kind == "solid":
            solids[name] = _get(cp, sec, "molar_volume")
        elif sec in _SECTIONS:
            continue
        else:
            raise ConfigError("unknown section", key=f"[{sec}]")

    d = Controls(dt=1.0, t_end=1.0)
    controls = Controls(
        dt=_get(cp, "controls", "dt"),
        t_end=_get(cp, "controls", "t_end"),
        picard_tol=_get(cp, "controls", "picard_tol", default=d.picard_tol),
        picard_max=_get(cp, "controls", "picard_max", _int, default=d.picard_max),
        output_times=_get(cp, "controls", "output_times", _floats, default=d.output_times),
        n_correctors=_get(cp, "controls", "n_correctors", _int, default=d.n_correctors),
        lin_tol=_get(cp, "controls", "lin_tol", default=d.lin_tol),
        pressure_solver=_get(cp, "controls", "pressure_solver", str, default=d.pressure_solver),
        cfl_warn=_get(cp, "controls", "cfl_warn", default=d.cfl_warn),
        cfl_abort=_get(cp, "controls", "cfl_abort", default=d.cfl_abort),
        series_stride=_get(cp, "controls", "series_stride", _int, default=d.series_stride),
        snapshots=_get(cp, "controls", "snapshots", _bool, default=d.snapshots),
    )
    return SimulationConfig(
        L=_get(cp, "geometry", "L"),
        H=_get(cp, "geometry", "H"),
        nx=_get(cp, "geometry", "nx", _int),
        ny=_get(cp, "geometry", "ny", _int),
        Z=_get(cp, "geometry", "Z", default=1.0),
        rho=_get(cp, "fluid", "rho"),
        mu=_get(cp, "fluid", "mu"),
        u_av=_get(cp, "inlet", "u_av"),
        p_out=_get(cp, "pressure", "p_out"),
        p_perm=_get(cp, "pressure", "p_perm", default=0.0),
        species=tuple(species),
        reactions=tuple(reactions),
        solids=solids,
        k0=_get(cp, "membrane", "k0"),
        epsilon0=_get(cp, "membrane", "epsilon0"),
        ell=_get(cp, "membrane", "ell"),
        eps_min=_get(cp, "membrane", "eps_min", default=0.01),
        T=_get(cp, "osmotic", "T", default=298.0),
        varphi=_get(cp, "osmotic", "varphi", default=1.0),
        controls=controls,
        initial_velocity=_get(cp, "initial", "velocity", str, default="zero"),
        frozen_concentration=_get(cp, "modes", "frozen_concentration", _bool, default=False),
        source=source,
    )


_SECTIONS = ("geometry", "fluid", "inlet", "pressure", "membrane", "osmotic", "controls",
             "initial", "modes")


def load_config(path):
    """Read, parse and validate a config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def shipped_config(name):
    """Path of a config shipped with the package (``table1`` or ``paper_comparison``)."""
    return Path(__file__).parent / "data" / f"{name}.cfg"


def _fmt(x):
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int, str)):
        return str(x)
    return repr(float(x))


def to_ini(cfg):
    """Normalised config text with every default written out.

    ``parse_config(to_ini(cfg)) == cfg`` holds exactly.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["geometry"] = {"L": _fmt(cfg.L), "H": _fmt(cfg.H), "Z": _fmt(cfg.Z),
                      "nx": str(cfg.nx), "ny": str(cfg.ny)}
    cp["fluid"] = {"rho": _fmt(cfg.rho), "mu": _fmt(cfg.mu)}
    cp["inlet"] = {"u_av": _fmt(cfg.u_av)}
    cp["pressure"] = {"p_out": _fmt(cfg.p_out), "p_perm": _fmt(cfg.p_perm)}
    for s in cfg.species:
        cp[f"species.{s.name}"] = {"phi_in": _fmt(s.phi_in), "D": _fmt(s.D),
                                   "phi_init": _fmt(s.phi_init), "rejection": _fmt(s.rejection)}
    for r in cfg.reactions:
        sec = {"reactants": ", ".join(f"{k}:{v}" for k, v in r.reactants.items()), "K": _fmt(r.K)}
        if r.products:
            sec["products"] = ", ".join(f"{k}:{v}" for k, v in r.products.items())
        cp[f"reaction.{r.name}"] = sec
    for name, vol in sorted(cfg.solids.items()):
        cp[f"solid.{name}"] = {"molar_volume": _fmt(vol)}
    cp["membrane"] = {"k0": _fmt(cfg.k0), "epsilon0": _fmt(cfg.epsilon0), "ell": _fmt(cfg.ell),
                      "eps_min": _fmt(cfg.eps_min)}
    cp["osmotic"] = {"T": _fmt(cfg.T), "varphi": _fmt(cfg.varphi)}
    c = cfg.controls
    cp["controls"] = {
        "dt": _fmt(c.dt), "t_end": _fmt(c.t_end), "picard_tol": _fmt(c.picard_tol),
        "picard_max": str(c.picard_max),
        "output_times": ", ".join(_fmt(t) for t in c.output_times),
        "n_correctors": str(c.n_correctors), "lin_tol": _fmt(c.lin_tol),
        "pressure_solver": c.pressure_solver, "cfl_warn": _fmt(c.cfl_warn),
        "cfl_abort": _fmt(c.cfl_abort), "series_stride": str(c.series_stride),
        "snapshots": _fmt(c.snapshots),
    }
    cp["initial"] = {"velocity": cfg.initial_velocity}
    cp["modes"] = {"frozen_concentration": _fmt(cfg.frozen_concentration)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
