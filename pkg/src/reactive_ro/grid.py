"""
Structured rectangular grid, field containers and finite-volume operators.

Cells are indexed ``[i, j]`` with ``i`` along the channel (x) and ``j`` across
it (y); every cell array has shape ``(nx, ny)``.  Face-normal quantities live
on two arrays: ``x`` faces with shape ``(nx + 1, ny)`` (positive in +x) and
``y`` faces with shape ``(nx, ny + 1)`` (positive in +y).

The four sides are named ``west`` (x = 0), ``east`` (x = L), ``south``
(y = 0) and ``north`` (y = H).  By default they carry the channel tags
inlet / outlet / membrane / wall.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

INLET = "inlet"
OUTLET = "outlet"
MEMBRANE = "membrane"
WALL = "wall"

SIDES = ("west", "east", "south", "north")
CHANNEL_TAGS = {"west": INLET, "east": OUTLET, "south": MEMBRANE, "north": WALL}


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid over (0, L) x (0, H) with spanwise depth Z."""

    L: float
    H: float
    nx: int
    ny: int
    Z: float = 1.0
    tags: dict = field(default_factory=lambda: dict(CHANNEL_TAGS))

    @property
    def dx(self):
        return self.L / self.nx

    @property
    def dy(self):
        return self.H / self.ny

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def volume(self):
        """Cell volume [m^3]."""
        return self.dx * self.dy * self.Z

    @property
    def area_x(self):
        """Area of an x-normal face [m^2]."""
        return self.dy * self.Z

    @property
    def area_y(self):
        """Area of a y-normal face [m^2]."""
        return self.dx * self.Z

    @property
    def xc(self):
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def yc(self):
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def xf(self):
        return np.arange(self.nx + 1) * self.dx

    @property
    def yf(self):
        return np.arange(self.ny + 1) * self.dy

    def mesh(self):
        """Cell-centre coordinate arrays ``(X, Y)`` with shape ``(nx, ny)``."""
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    def side_of(self, tag):
        """Names of the sides carrying ``tag``."""
        return [s for s in SIDES if self.tags[s] == tag]

    def side_length(self, side):
        return self.ny if side in ("west", "east") else self.nx

    def refined(self, factor=2):
        return build_grid(self.L, self.H, self.nx * factor, self.ny * factor,
                          self.Z, tags=self.tags)


def build_grid(L, H, nx, ny, Z=1.0, tags=None):
    """Build a uniform grid and tag its four sides.

    Parameters
    ----------
    L, H, Z : float
        Channel length, height and spanwise depth [m].
    nx, ny : int
        Number of cells along and across the channel.
    tags : dict, optional
        Side -> tag mapping.  Defaults to the channel layout (inlet on the
        west side, membrane along the whole south side).
    """
    for name, value in (("L", L), ("H", H), ("Z", Z)):
        if not np.isfinite(value) or value <= 0:
            raise ConfigError("must be positive", key=f"[geometry].{name}")
    for name, value in (("nx", nx), ("ny", ny)):
        if int(value) != value or value < 1:
            raise ConfigError("must be an integer >= 1", key=f"[geometry].{name}")
    tags = dict(CHANNEL_TAGS if tags is None else tags)
    if set(tags) != set(SIDES):
        raise ConfigError(f"tags must cover exactly the sides {SIDES}")
    for side, tag in tags.items():
        if tag not in (INLET, OUTLET, MEMBRANE, WALL):
            raise ConfigError(f"unknown boundary tag {tag!r} on {side}")
    return Grid(float(L), float(H), int(nx), int(ny), float(Z), tags)


class ScalarField:
    """Cell-centred values plus explicit boundary-face values.

    Boundary values default to the adjacent cell values (zero normal
    gradient); boundary conditions are applied by assigning into
    ``boundary[side]``.
    """

    def __init__(self, grid, values=None, boundary=None):
        self.grid = grid
        if values is None:
            values = np.zeros(grid.shape)
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            values = np.broadcast_to(values, grid.shape).copy()
        self.values = values
        self.boundary = self.zero_gradient_boundary()
        if boundary:
            for side, bv in boundary.items():
                self.set_boundary(side, bv)

    def zero_gradient_boundary(self):
        v = self.values
        return {
            "west": v[0, :].copy(),
            "east": v[-1, :].copy(),
            "south": v[:, 0].copy(),
            "north": v[:, -1].copy(),
        }

    def set_boundary(self, side, value):
        n = self.grid.side_length(side)
        self.boundary[side] = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()

    def copy(self):
        out = ScalarField(self.grid, self.values.copy())
        out.boundary = {s: b.copy() for s, b in self.boundary.items()}
        return out

    def is_finite(self):
        return bool(np.all(np.isfinite(self.values))
                    and all(np.all(np.isfinite(b)) for b in self.boundary.values()))

    def __repr__(self):
        return f"ScalarField(shape={self.grid.shape}, min={self.values.min():.4g}, max={self.values.max():.4g})"


class FaceField:
    """Face-normal values (e.g. volumetric flux [m^3/s]) on every face."""

    def __init__(self, grid, x=None, y=None):
        self.grid = grid
        self.x = np.zeros((grid.nx + 1, grid.ny)) if x is None else np.array(x, dtype=float)
        self.y = np.zeros((grid.nx, grid.ny + 1)) if y is None else np.array(y, dtype=float)
        if self.x.shape != (grid.nx + 1, grid.ny) or self.y.shape != (grid.nx, grid.ny + 1):
            raise ValueError("face array shapes do not match the grid")

    @property
    def n_faces(self):
        return self.x.size + self.y.size

    def side(self, name):
        """View of the boundary-face values on one side (outward sign not applied)."""
        return {"west": self.x[0, :], "east": self.x[-1, :],
                "south": self.y[:, 0], "north": self.y[:, -1]}[name]

    def outward(self, name):
        """Boundary-face values on ``name`` with the outward-normal sign applied."""
        sign = -1.0 if name in ("west", "south") else 1.0
        return sign * self.side(name)

    def copy(self):
        return FaceField(self.grid, self.x.copy(), self.y.copy())

    def is_finite(self):
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)))


def divergence(flux):
    """Net outward face flux of every cell divided by the cell volume."""
    g = flux.grid
    net = (flux.x[1:, :] - flux.x[:-1, :]) + (flux.y[:, 1:] - flux.y[:, :-1])
    return ScalarField(g, net / g.volume)


def face_values_linear(phi):
    """Linearly interpolated face values (boundary faces take the stored values)."""
    g = phi.grid
    v = phi.values
    fx = np.empty((g.nx + 1, g.ny))
    fy = np.empty((g.nx, g.ny + 1))
    fx[1:-1, :] = 0.5 * (v[1:, :] + v[:-1, :])
    fx[0, :] = phi.boundary["west"]
    fx[-1, :] = phi.boundary["east"]
    fy[:, 1:-1] = 0.5 * (v[:, 1:] + v[:, :-1])
    fy[:, 0] = phi.boundary["south"]
    fy[:, -1] = phi.boundary["north"]
    return fx, fy


def gradient(phi):
    """Gauss-linear cell gradient, shape ``(nx, ny, 2)``."""
    g = phi.grid
    fx, fy = face_values_linear(phi)
    out = np.empty(g.shape + (2,))
    out[..., 0] = (fx[1:, :] - fx[:-1, :]) / g.dx
    out[..., 1] = (fy[:, 1:] - fy[:, :-1]) / g.dy
    return out


def face_normal_gradients(phi):
    """Compact normal gradients on all faces; boundary faces use the half spacing."""
    g = phi.grid
    v = phi.values
    gx = np.empty((g.nx + 1, g.ny))
    gy = np.empty((g.nx, g.ny + 1))
    gx[1:-1, :] = (v[1:, :] - v[:-1, :]) / g.dx
    gx[0, :] = (v[0, :] - phi.boundary["west"]) / (0.5 * g.dx)
    gx[-1, :] = (phi.boundary["east"] - v[-1, :]) / (0.5 * g.dx)
    gy[:, 1:-1] = (v[:, 1:] - v[:, :-1]) / g.dy
    gy[:, 0] = (v[:, 0] - phi.boundary["south"]) / (0.5 * g.dy)
    gy[:, -1] = (phi.boundary["north"] - v[:, -1]) / (0.5 * g.dy)
    return gx, gy


def laplacian(phi, coeff=1.0):
    """Five-point finite-volume Laplacian ``coeff * div(grad phi)``."""
    g = phi.grid
    gx, gy = face_normal_gradients(phi)
    lap = (gx[1:, :] - gx[:-1, :]) / g.dx + (gy[:, 1:] - gy[:, :-1]) / g.dy
    return ScalarField(g, coeff * lap)


def van_leer(r):
    """Van Leer limiter ``(r + |r|) / (1 + |r|)``."""
    r = np.asarray(r, dtype=float)
    return (r + np.abs(r)) / (1.0 + np.abs(r))


def tvd_face_value(upwind, downwind, far_upwind):
    """Limited face value between an upwind and a downwind cell.

    ``upwind + 0.5 * psi(r) * (downwind - upwind)`` with the van Leer
    limiter and ``r = (upwind - far_upwind) / (downwind - upwind)``.  When
    ``downwind == upwind`` the face takes the upwind value.  Works on
    scalars and arrays.
    """
    u = np.asarray(upwind, dtype=float)
    d = np.asarray(downwind, dtype=float)
    uu = np.asarray(far_upwind, dtype=float)
    jump = d - u
    flat = jump == 0.0
    r = np.divide(u - uu, jump, out=np.zeros(np.broadcast(u, d, uu).shape), where=~flat)
    face = np.where(flat, u, u + 0.5 * van_leer(r) * jump)
    return face[()] if face.ndim == 0 else face


def _tvd_axis(v, b_lo, b_hi, flux):
    """High-order minus upwind face values on interior faces along axis 0."""
    if v.shape[0] < 2:
        return np.zeros((0,) + v.shape[1:])
    ghost_lo = 2.0 * b_lo - v[0]
    ghost_hi = 2.0 * b_hi - v[-1]
    ext = np.concatenate([ghost_lo[None], v, ghost_hi[None]], axis=0)
    left, right = ext[1:-2], ext[2:-1]
    left2, right2 = ext[:-3], ext[3:]
    forward = flux >= 0.0
    up = np.where(forward, left, right)
    down = np.where(forward, right, left)
    far = np.where(forward, left2, right2)
    return tvd_face_value(up, down, far) - up


def tvd_corrections(phi, flux):
    """Deferred-correction increments on interior faces.

    Returns ``(dx_faces, dy_faces)`` with shapes ``(nx - 1, ny)`` and
    ``(nx, ny - 1)``: the van Leer face value minus the first-order upwind
    value, using the flux direction from ``flux``.
    """
    b = phi.boundary
    cx = _tvd_axis(phi.values, b["west"], b["east"], flux.x[1:-1, :])
    cy = _tvd_axis(phi.values.T, b["south"], b["north"], flux.y[:, 1:-1].T).T
    return cx, cy
