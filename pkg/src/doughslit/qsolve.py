"""2D time-dependent Schrödinger solver with a double-slit barrier.

Dimensionless convention: hbar = m = 1 on a square domain of side `length`
(default 1.0) with hard walls (psi = 0 on the edges). Time stepping is
Crank-Nicolson on the 5-point Laplacian; the time-independent system matrix
is factorized once per evolution and reused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    EmptyProfileError,
    InvalidParameterError,
    SolverFailure,
    UnderResolutionError,
)

# Defaults used by the CLI and the dataset generator. The governing
# convention fixes hbar = m = 1 and L = 1; everything else is configurable.
DEFAULT_GRID_N = 256
DEFAULT_DT = 1e-4
DEFAULT_STEPS = 2000
DEFAULT_RECORD_STRIDE = 100
DEFAULT_WAVENUMBER = 100.0
DEFAULT_SCREEN_X = 0.9

_EDGE_GUARD = 1e-9  # index-rounding guard for rasterized rectangles


@dataclass(frozen=True)
class Grid:
    """Uniform square-domain grid; spacing is length/(n-1) per axis."""

    n_x: int
    n_y: int
    length: float = 1.0

    def __post_init__(self):
        if self.n_x < 8 or self.n_y < 8:
            raise InvalidParameterError(f"grid must be at least 8x8, got {self.n_x}x{self.n_y}")
        if not self.length > 0:
            raise InvalidParameterError(f"domain length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / (self.n_x - 1)

    @property
    def dy(self) -> float:
        return self.length / (self.n_y - 1)

    def axis_x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_x)

    def axis_y(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_y)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis_x(), self.axis_y(), indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros((self.n_x, self.n_y), dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m


@dataclass(frozen=True)
class WavePacketParams:
    """Gaussian packet parameters.

    sigma_x and sigma_y appear in the exponent denominators as written,
    exp(-(x-x0)^2 / (2 sigma_x)), so they carry units of length^2.
    k is the central wavenumber of the plane-wave factor exp(i k (x-x0)).
    """

    x0: float
    y0: float
    sigma_x: float
    sigma_y: float
    k: float

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise InvalidParameterError(
                f"packet widths must be positive, got sigma_x={self.sigma_x}, sigma_y={self.sigma_y}"
            )


def default_packet(length: float = 1.0) -> WavePacketParams:
    """Packet defaults tuned for the default double-slit geometry."""
    return WavePacketParams(
        x0=0.45 * length,
        y0=0.50 * length,
        sigma_x=2e-3 * length**2,
        sigma_y=6e-3 * length**2,
        k=DEFAULT_WAVENUMBER / length,
    )


@dataclass(frozen=True)
class SlitGeometry:
    """Double-slit barrier geometry; v0=None means a Dirichlet-masked hard barrier."""

    barrier_x: float
    barrier_thickness: float
    slit1_center: float
    slit2_center: float
    slit_width: float
    v0: float | None = None

    def __post_init__(self):
        if not (self.barrier_thickness > 0 and self.slit_width > 0):
            raise InvalidParameterError("barrier thickness and slit width must be positive")
        if abs(self.slit1_center - self.slit2_center) <= self.slit_width:
            raise InvalidParameterError(
                "slit openings overlap: |slit1_center - slit2_center| must exceed slit_width"
            )
        if self.v0 is not None and not (math.isfinite(self.v0) and self.v0 > 0):
            raise InvalidParameterError(f"barrier height v0 must be finite and positive, got {self.v0}")

    @property
    def hard_barrier(self) -> bool:
        return self.v0 is None

    @property
    def x_min(self) -> float:
        return self.barrier_x - 0.5 * self.barrier_thickness

    @property
    def x_max(self) -> float:
        return self.barrier_x + 0.5 * self.barrier_thickness


def default_slits(length: float = 1.0) -> SlitGeometry:
    """Barrier at 0.75 L, slit separation 0.16 L, width 0.04 L, hard barrier."""
    return SlitGeometry(
        barrier_x=0.75 * length,
        barrier_thickness=0.02 * length,
        slit1_center=0.42 * length,
        slit2_center=0.58 * length,
        slit_width=0.04 * length,
        v0=None,
    )


@dataclass
class ComplexField2D:
    """Complex wave function sampled on a grid; edges are hard-wall zeros."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n_x, self.grid.n_y):
            raise InvalidParameterError(
                f"field shape {self.values.shape} does not match grid "
                f"({self.grid.n_x}, {self.grid.n_y})"
            )

    def norm(self) -> float:
        """Discrete L2 norm, sqrt(sum |psi|^2 dx dy)."""
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.grid.dx * self.grid.dy)

    def modulus(self) -> np.ndarray:
        return np.abs(self.values)


def packet_amplitude(x, y, p: WavePacketParams) -> np.ndarray:
    """Unnormalized packet amplitude exp(-(x-x0)^2/(2 sx) - (y-y0)^2/(2 sy)) e^{ik(x-x0)}."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    envelope = np.exp(
        -((x - p.x0) ** 2) / (2.0 * p.sigma_x) - ((y - p.y0) ** 2) / (2.0 * p.sigma_y)
    )
    return envelope * np.exp(1j * p.k * (x - p.x0))


def init_packet(grid: Grid, p: WavePacketParams) -> ComplexField2D:
    """Gaussian packet with plane-wave phase, edges zeroed, unit discrete norm."""
    if not (0.0 < p.x0 < grid.length and 0.0 < p.y0 < grid.length):
        raise InvalidParameterError(
            f"packet center ({p.x0}, {p.y0}) must lie strictly inside the domain (0, {grid.length})"
        )
    X, Y = grid.mesh()
    values = packet_amplitude(X, Y, p)
    values[grid.boundary_mask()] = 0.0

    mod = np.abs(values)
    resolved_x = int(np.count_nonzero(mod.max(axis=1) > 1e-6))
    resolved_y = int(np.count_nonzero(mod.max(axis=0) > 1e-6))
    if resolved_x < 3 or resolved_y < 3:
        raise UnderResolutionError(
            f"packet too narrow for grid: {resolved_x} x-points and {resolved_y} y-points "
            "carry amplitude above 1e-6 (need >= 3 on each axis)"
        )

    norm = math.sqrt(float(np.sum(mod**2)) * grid.dx * grid.dy)
    return ComplexField2D(grid, values / norm)


def _index_range(lo: float, hi: float, spacing: float, n: int) -> tuple[int, int]:
    """Inclusive grid-index range covered by the coordinate interval [lo, hi].

    A small guard keeps rasterization stable (and mirror-symmetric for
    mirror-symmetric geometry) when interval ends land on grid points.
    """
    i_lo = max(0, math.ceil(lo / spacing - _EDGE_GUARD))
    i_hi = min(n - 1, math.floor(hi / spacing + _EDGE_GUARD))
    return i_lo, i_hi


def build_potential(grid: Grid, s: SlitGeometry) -> np.ndarray:
    """Rasterize the double-slit barrier.

    Returns a float array with value v0 on barrier points (0 elsewhere), or a
    boolean mask when the geometry is in hard-barrier mode; the solver treats
    masked points as additional Dirichlet (psi = 0) points.
    """
    L = grid.length
    if not (0.0 < s.x_min and s.x_max < L):
        raise InvalidParameterError("barrier must lie strictly inside the domain")
    for c in (s.slit1_center, s.slit2_center):
        if not (0.0 <= c - 0.5 * s.slit_width and c + 0.5 * s.slit_width <= L):
            raise InvalidParameterError(f"slit opening at {c} extends outside the domain")

    in_barrier = np.zeros((grid.n_x, grid.n_y), dtype=bool)
    ix0, ix1 = _index_range(s.x_min, s.x_max, grid.dx, grid.n_x)
    if ix0 > ix1:
        raise InvalidParameterError("barrier thinner than one grid spacing; increase resolution")
    in_barrier[ix0 : ix1 + 1, :] = True
    for c in (s.slit1_center, s.slit2_center):
        iy0, iy1 = _index_range(c - 0.5 * s.slit_width, c + 0.5 * s.slit_width, grid.dy, grid.n_y)
        in_barrier[:, iy0 : iy1 + 1] = False

    if s.hard_barrier:
        return in_barrier
    return np.where(in_barrier, float(s.v0), 0.0)


class CrankNicolson:
    """One-step implicit propagator for i dpsi/dt = (-1/2 lap + V) psi.

    The potential is either a real array (added to the Hamiltonian diagonal)
    or a boolean mask whose True points are held at psi = 0 alongside the
    domain boundary. (I + i dt H / 2) is factorized once and reused.
    """

    def __init__(self, grid: Grid, potential: np.ndarray, dt: float, residual_tol: float = 1e-10):
        if not dt > 0:
            raise InvalidParameterError(f"time step must be positive, got {dt}")
        potential = np.asarray(potential)
        if potential.shape != (grid.n_x, grid.n_y):
            raise InvalidParameterError(
                f"potential shape {potential.shape} does not match grid ({grid.n_x}, {grid.n_y})"
            )
        self.grid = grid
        self.dt = dt
        self.residual_tol = residual_tol

        active = ~grid.boundary_mask()
        if potential.dtype == bool:
            active &= ~potential
            v_diag = None
        else:
            v_diag = np.asarray(potential, dtype=float)
        self.active = active

        index = -np.ones((grid.n_x, grid.n_y), dtype=np.int64)
        n_active = int(active.sum())
        if n_active == 0:
            raise InvalidParameterError("no active grid points: barrier mask covers the interior")
        index[active] = np.arange(n_active)

        inv_dx2 = 1.0 / grid.dx**2
        inv_dy2 = 1.0 / grid.dy**2
        rows = [index[active]]
        cols = [index[active]]
        diag = np.full(n_active, inv_dx2 + inv_dy2)  # -1/2 * (-2/dx^2 - 2/dy^2)
        if v_diag is not None:
            diag = diag + v_diag[active]
        vals = [diag]
        for shift_axis, coef in ((0, -0.5 * inv_dx2), (1, -0.5 * inv_dy2)):
            for direction in (1, -1):
                here = active & np.roll(active, -direction, axis=shift_axis)
                if shift_axis == 0:
                    there = np.roll(index, -direction, axis=0)
                else:
                    there = np.roll(index, -direction, axis=1)
                rows.append(index[here])
                cols.append(there[here])
                vals.append(np.full(int(here.sum()), coef))
        h = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_active, n_active),
        ).tocsr()

        identity = sp.identity(n_active, dtype=complex, format="csr")
        self._a = (identity + 0.5j * dt * h).tocsc()
        self._b = (identity - 0.5j * dt * h).tocsr()
        self._lu = spla.splu(self._a, permc_spec="MMD_AT_PLUS_A")

    def step_values(self, values: np.ndarray) -> np.ndarray:
        """Advance the full-grid array one step; inactive points stay exactly zero."""
        rhs = self._b @ values[self.active]
        x = self._lu.solve(rhs)
        rhs_norm = float(np.linalg.norm(rhs))
        if rhs_norm > 0.0:
            residual = float(np.linalg.norm(self._a @ x - rhs)) / rhs_norm
        else:
            residual = 0.0
        if not np.isfinite(residual) or residual > self.residual_tol or not np.all(np.isfinite(x)):
            raise SolverFailure(
                f"implicit solve failed: relative residual {residual:.3e} "
                f"exceeds tolerance {self.residual_tol:.1e}",
                residual=residual,
            )
        out = np.zeros_like(values, dtype=complex)
        out[self.active] = x
        return out

    def project(self, values: np.ndarray) -> np.ndarray:
        """Zero every constrained (boundary or masked) point."""
        out = np.array(values, dtype=complex, copy=True)
        out[~self.active] = 0.0
        return out


# A few most recent propagators, so repeated step() calls don't refactorize.
_solver_cache: dict[tuple, CrankNicolson] = {}
_SOLVER_CACHE_MAX = 4


def _cached_solver(grid: Grid, potential: np.ndarray, dt: float) -> CrankNicolson:
    key = (grid, float(dt), potential.dtype.str, potential.tobytes())
    solver = _solver_cache.get(key)
    if solver is None:
        solver = CrankNicolson(grid, potential, dt)
        if len(_solver_cache) >= _SOLVER_CACHE_MAX:
            _solver_cache.pop(next(iter(_solver_cache)))
        _solver_cache[key] = solver
    return solver


def step(field: ComplexField2D, potential: np.ndarray, dt: float) -> ComplexField2D:
    """One Crank-Nicolson step of the field under the given potential."""
    solver = _cached_solver(field.grid, np.asarray(potential), dt)
    return ComplexField2D(field.grid, solver.step_values(np.asarray(field.values)))


@dataclass
class FieldSeries:
    """Recorded |psi| frames from one evolution, with the solver parameters used."""

    grid: Grid
    dt: float
    record_stride: int
    frames: list[tuple[int, np.ndarray]]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        steps = [s for s, _ in self.frames]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise InvalidParameterError("frame step indices must be strictly increasing")
        for s, frame in self.frames:
            if frame.shape != (self.grid.n_x, self.grid.n_y):
                raise InvalidParameterError(f"frame at step {s} does not match the grid shape")

    def steps(self) -> list[int]:
        return [s for s, _ in self.frames]

    def frame_at(self, position: int) -> np.ndarray:
        return self.frames[position][1]

    def time_of(self, position: int) -> float:
        return self.frames[position][0] * self.dt


def evolve(
    initial: ComplexField2D,
    potential: np.ndarray,
    dt: float,
    n_steps: int,
    record_stride: int = 1,
) -> FieldSeries:
    """Apply `step` n_steps times, recording |psi| at step 0, every
    record_stride steps, and the final step."""
    if n_steps < 1:
        raise InvalidParameterError(f"n_steps must be >= 1, got {n_steps}")
    if record_stride < 1:
        raise InvalidParameterError(f"record_stride must be >= 1, got {record_stride}")
    potential = np.asarray(potential)
    solver = CrankNicolson(initial.grid, potential, dt)
    values = solver.project(initial.values)
    frames: list[tuple[int, np.ndarray]] = [(0, np.abs(values))]
    for i in range(1, n_steps + 1):
        try:
            values = solver.step_values(values)
        except SolverFailure as err:
            err.step_index = i
            raise SolverFailure(f"step {i}: {err}", residual=err.residual, step_index=i) from err
        if i % record_stride == 0 or i == n_steps:
            frames.append((i, np.abs(values)))
    return FieldSeries(
        grid=initial.grid,
        dt=dt,
        record_stride=record_stride,
        frames=frames,
        params={"dt": dt, "n_steps": n_steps, "record_stride": record_stride},
    )


def screen_profile(
    frame: np.ndarray, grid: Grid, geometry: SlitGeometry, screen_x: float
) -> np.ndarray:
    """|psi|^2 along the grid column nearest screen_x, normalized to unit sum.

    The screen must sit strictly beyond the barrier's far edge.
    """
    if not (0.0 < screen_x < grid.length):
        raise InvalidParameterError(f"screen_x={screen_x} outside the domain (0, {grid.length})")
    if screen_x <= geometry.x_max:
        raise InvalidParameterError(
            f"screen_x={screen_x} is on or before the barrier (far edge at {geometry.x_max})"
        )
    frame = np.asarray(frame)
    if frame.shape != (grid.n_x, grid.n_y):
        raise InvalidParameterError("frame shape does not match the grid")
    column = int(np.argmin(np.abs(grid.axis_x() - screen_x)))
    prob = frame[column, :].astype(float) ** 2
    total = float(prob.sum())
    if total <= 0.0:
        raise EmptyProfileError(f"empty profile: no probability at screen column x={screen_x}")
    return prob / total


def crossed_fraction(frame: np.ndarray, grid: Grid, geometry: SlitGeometry) -> float:
    """Fraction of |psi|^2 beyond the barrier's far edge."""
    frame = np.asarray(frame, dtype=float)
    prob = frame**2
    total = float(prob.sum())
    if total <= 0.0:
        return 0.0
    beyond = grid.axis_x() > geometry.x_max
    return float(prob[beyond, :].sum()) / total


def select_stage_frames(series: FieldSeries, geometry: SlitGeometry) -> tuple[int, int, int]:
    """Pick the three analysis stages from a recorded series.

    Returns positions into series.frames: first frame with more than half the
    probability past the barrier (falling back to the last frame if that never
    happens), the frame nearest the step midpoint between that and the end,
    and the final frame.
    """
    n = len(series.frames)
    t1 = n - 1
    for pos in range(n):
        if crossed_fraction(series.frame_at(pos), series.grid, geometry) > 0.5:
            t1 = pos
            break
    t3 = n - 1
    steps = series.steps()
    target = 0.5 * (steps[t1] + steps[t3])
    t2 = min(range(t1, n), key=lambda p: abs(steps[p] - target))
    return t1, t2, t3
