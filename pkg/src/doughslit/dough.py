"""Stochastic dough-model Monte Carlo for double-slit screen statistics.

Each trial draws an event (two mass-split weights, three slit-edge force
levels), splits the particle's mass across the slits, recombines it at the
mass-weighted merge position, and propagates it with a constant-acceleration
phase followed by uniform motion. The no-interference variant skips the
merge: each branch leaves its own slit and the branch with the smaller
acceleration sets the detection point. All times are integer iteration steps.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np

from .analysis import ScreenHistogram, histogram
from .errors import InvalidParameterError

HBAR = 1.0

INTERFERENCE = "interference"
NO_INTERFERENCE = "no-interference"

_SEED_LIMIT = 2**64


@dataclass(frozen=True)
class DoughEvent:
    """One sampled configuration: mass-split weights and slit force levels."""

    left_weight: int
    right_weight: int
    left_force: int
    center_force: int
    right_force: int

    def __post_init__(self):
        for name in ("left_weight", "right_weight", "left_force", "center_force", "right_force"):
            if getattr(self, name) < 1:
                raise InvalidParameterError(f"{name} must be a positive integer level")


@dataclass(frozen=True)
class DoughConfig:
    """Global Monte Carlo parameters; level values are the integers 1..max."""

    total_mass: float = 1.0
    weight_levels: int = 4
    force_levels: int = 4
    t_interact: int = 15
    total_steps: int = 30
    slit_y_left: float = -40.0
    slit_y_right: float = 40.0
    bin_size: float = 4.0
    trials: int = 2000
    master_seed: int = 0
    mode: str = INTERFERENCE

    def __post_init__(self):
        if not self.total_mass > 0:
            raise InvalidParameterError(f"total_mass must be positive, got {self.total_mass}")
        if self.weight_levels < 1 or self.force_levels < 1:
            raise InvalidParameterError("weight_levels and force_levels must be >= 1")
        if not (1 <= self.t_interact <= self.total_steps):
            raise InvalidParameterError(
                f"need 1 <= t_interact <= total_steps, got {self.t_interact} and {self.total_steps}"
            )
        if not self.slit_y_left < self.slit_y_right:
            raise InvalidParameterError("slit_y_left must be below slit_y_right")
        if not self.bin_size > 0:
            raise InvalidParameterError(f"bin_size must be positive, got {self.bin_size}")
        if self.trials < 0:
            raise InvalidParameterError(f"trials must be >= 0, got {self.trials}")
        if not (0 <= self.master_seed < _SEED_LIMIT):
            raise InvalidParameterError("master_seed must be a 64-bit unsigned integer")
        if self.mode not in (INTERFERENCE, NO_INTERFERENCE):
            raise InvalidParameterError(f"unknown mode {self.mode!r}")

    def as_dict(self) -> dict:
        return asdict(self)


def mass_split(left_weight: int, right_weight: int, total_mass: float = 1.0) -> tuple[float, float]:
    """Split total_mass across the slits in proportion to the drawn weights."""
    if left_weight < 1 or right_weight < 1 or not total_mass > 0:
        raise InvalidParameterError(
            f"weights must be >= 1 and mass positive, got "
            f"({left_weight}, {right_weight}, {total_mass})"
        )
    denom = left_weight + right_weight
    return total_mass * left_weight / denom, total_mass * right_weight / denom


def effective_forces(event: DoughEvent) -> tuple[int, int]:
    """Per-slit effective forces: each edge force plus the shared central force."""
    return event.left_force + event.center_force, event.right_force + event.center_force


def merge_position(mass_left: float, mass_right: float, y_left: float, y_right: float) -> float:
    """Center of mass of the two branches, where they recombine."""
    if mass_left < 0 or mass_right < 0:
        raise InvalidParameterError("branch masses must be nonnegative")
    total = mass_left + mass_right
    if not total > 0:
        raise InvalidParameterError("at least one branch mass must be positive")
    return (mass_left * y_left + mass_right * y_right) / total


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Deterministic per-trial generator, independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, trial_index)))


def sample_event(rng: np.random.Generator, config: DoughConfig) -> DoughEvent:
    """Draw one event uniformly: weights (left, right), then forces (L, C, R)."""
    w = rng.integers(1, config.weight_levels + 1, size=2)
    f = rng.integers(1, config.force_levels + 1, size=3)
    return DoughEvent(int(w[0]), int(w[1]), int(f[0]), int(f[1]), int(f[2]))


@dataclass
class Trajectory:
    """Screen-coordinate positions at iteration steps 0..T.

    start_y is the launch point: the merge position in interference mode, the
    originating slit position in no-interference mode.
    """

    positions: np.ndarray
    start_y: float
    event: DoughEvent | None = None

    @property
    def arrival(self) -> float:
        return float(self.positions[-1])


def _positions(start_y, accel, t_interact: int, total_steps: int) -> np.ndarray:
    """Two-phase path: 0.5 a t^2 up to t_interact, then uniform drift.

    start_y and accel may be scalars or aligned 1-D arrays; the result gains
    a leading trial axis in the array case.
    """
    t = np.arange(total_steps + 1, dtype=float)
    start_y = np.asarray(start_y, dtype=float)
    accel = np.asarray(accel, dtype=float)
    scalar = start_y.ndim == 0 and accel.ndim == 0
    start_y = np.atleast_1d(start_y)[:, None]
    accel = np.atleast_1d(accel)[:, None]
    pos = start_y + 0.5 * accel * t[None, :] ** 2
    held = start_y + 0.5 * accel * float(t_interact - 1) ** 2
    uniform = t >= t_interact
    pos[:, uniform] = held + (t_interact * accel) * (t[None, uniform] - t_interact + 1)
    return pos[0] if scalar else pos


def trajectory(
    start_y: float, total_force: float, mass: float, t_interact: int, total_steps: int
) -> Trajectory:
    """Propagate from start_y under total_force acting on mass."""
    if not mass > 0:
        raise InvalidParameterError(f"mass must be positive, got {mass}")
    if not (1 <= t_interact <= total_steps):
        raise InvalidParameterError(
            f"need 1 <= t_interact <= total_steps, got {t_interact} and {total_steps}"
        )
    pos = _positions(float(start_y), total_force / mass, t_interact, total_steps)
    return Trajectory(positions=pos, start_y=float(start_y))


def _sample_range(config: DoughConfig, start: int, stop: int, draw_ties: bool):
    """Sample events for trials [start, stop); optionally draw tie-break bits.

    A tie bit is consumed from a trial's own stream only when that trial's
    branch accelerations compare exactly equal, so streams stay reproducible.
    """
    events = np.empty((stop - start, 5), dtype=np.int64)
    bits = np.full(stop - start, -1, dtype=np.int8)
    for i in range(start, stop):
        rng = trial_rng(config.master_seed, i)
        e = sample_event(rng, config)
        events[i - start] = (
            e.left_weight,
            e.right_weight,
            e.left_force,
            e.center_force,
            e.right_force,
        )
        if draw_ties:
            m_l, m_r = mass_split(e.left_weight, e.right_weight, config.total_mass)
            f_l, f_r = effective_forces(e)
            if f_l / m_l == f_r / m_r:
                bits[i - start] = int(rng.integers(0, 2))
    return events, bits


def _sample_all(config: DoughConfig, jobs: int, draw_ties: bool):
    n = config.trials
    if jobs <= 1 or n < 2 * jobs:
        return _sample_range(config, 0, n, draw_ties)
    chunk = -(-n // jobs)
    ranges = [(k, min(k + chunk, n)) for k in range(0, n, chunk)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_sample_range_star, [(config, a, b, draw_ties) for a, b in ranges]))
    events = np.concatenate([p[0] for p in parts])
    bits = np.concatenate([p[1] for p in parts])
    return events, bits


def _sample_range_star(args):
    return _sample_range(*args)


def _event_arrays(config: DoughConfig, events: np.ndarray):
    """Vectorized per-trial masses, effective forces, and merge positions."""
    w_l = events[:, 0].astype(float)
    w_r = events[:, 1].astype(float)
    denom = w_l + w_r
    m_l = config.total_mass * w_l / denom
    m_r = config.total_mass * w_r / denom
    f_left = (events[:, 2] + events[:, 3]).astype(float)
    f_right = (events[:, 4] + events[:, 3]).astype(float)
    y_c = (m_l * config.slit_y_left + m_r * config.slit_y_right) / (m_l + m_r)
    return m_l, m_r, f_left, f_right, y_c


@dataclass
class InterferenceResult:
    config: DoughConfig
    events: list[DoughEvent]
    arrivals: np.ndarray
    histogram: ScreenHistogram
    trajectories: list[Trajectory]
    merge_positions: np.ndarray


def run_interference(config: DoughConfig, jobs: int = 1) -> InterferenceResult:
    """Monte Carlo with branch recombination at the merge position."""
    if config.mode != INTERFERENCE:
        raise InvalidParameterError(f"config mode is {config.mode!r}, expected {INTERFERENCE!r}")
    events, _ = _sample_all(config, jobs, draw_ties=False)
    if events.shape[0] == 0:
        return InterferenceResult(
            config, [], np.empty(0), histogram([], config.bin_size), [], np.empty(0)
        )
    _, _, f_left, f_right, y_c = _event_arrays(config, events)
    f_tot = f_left + f_right
    pos = _positions(y_c, f_tot / config.total_mass, config.t_interact, config.total_steps)
    arrivals = pos[:, -1].copy()
    event_objs = [DoughEvent(*map(int, row)) for row in events]
    trajectories = [
        Trajectory(positions=pos[i], start_y=float(y_c[i]), event=event_objs[i])
        for i in range(events.shape[0])
    ]
    hist = histogram(arrivals, config.bin_size, anchor=0.0, pad_bins=1)
    return InterferenceResult(config, event_objs, arrivals, hist, trajectories, y_c)


@dataclass
class NoInterferenceResult:
    config: DoughConfig
    events: list[DoughEvent]
    detections: np.ndarray
    first_slit: np.ndarray  # 'L' or 'R' per trial
    left_arrivals: np.ndarray
    right_arrivals: np.ndarray
    histogram: ScreenHistogram
    trajectories: list[Trajectory]
    nominal_merge_positions: np.ndarray


def run_no_interference(config: DoughConfig, jobs: int = 1) -> NoInterferenceResult:
    """Monte Carlo without recombination: branches race from their own slits.

    The branch with the larger acceleration departs more slowly; the other
    branch's arrival is the detection point, and the late branch is dragged
    to that same point without further dynamics. Exact acceleration ties are
    broken by one fair bit from the trial's own stream (0 means left first).
    """
    if config.mode != NO_INTERFERENCE:
        raise InvalidParameterError(f"config mode is {config.mode!r}, expected {NO_INTERFERENCE!r}")
    events, bits = _sample_all(config, jobs, draw_ties=True)
    if events.shape[0] == 0:
        empty = np.empty(0)
        return NoInterferenceResult(
            config, [], empty, np.empty(0, dtype="<U1"), empty, empty,
            histogram([], config.bin_size), [], empty,
        )
    m_l, m_r, f_left, f_right, y_c = _event_arrays(config, events)
    a_l = f_left / m_l
    a_r = f_right / m_r
    left_first = a_l < a_r
    ties = a_l == a_r
    left_first[ties] = bits[ties] == 0

    start = np.where(left_first, config.slit_y_left, config.slit_y_right)
    accel = np.where(left_first, a_l, a_r)
    pos = _positions(start, accel, config.t_interact, config.total_steps)
    detections = pos[:, -1].copy()

    event_objs = [DoughEvent(*map(int, row)) for row in events]
    trajectories = [
        Trajectory(positions=pos[i], start_y=float(start[i]), event=event_objs[i])
        for i in range(events.shape[0])
    ]
    first_slit = np.where(left_first, "L", "R")
    hist = histogram(detections, config.bin_size, anchor=0.0, pad_bins=1)
    return NoInterferenceResult(
        config=config,
        events=event_objs,
        detections=detections,
        first_slit=first_slit,
        left_arrivals=detections[left_first],
        right_arrivals=detections[~left_first],
        histogram=hist,
        trajectories=trajectories,
        nominal_merge_positions=y_c,
    )


def run(config: DoughConfig, jobs: int = 1):
    """Dispatch on config.mode."""
    if config.mode == INTERFERENCE:
        return run_interference(config, jobs=jobs)
    return run_no_interference(config, jobs=jobs)


def run_batch(configs, jobs: int = 1) -> list:
    """Run a list of configs (e.g. a t_interact sweep) sequentially."""
    return [run(c, jobs=jobs) for c in configs]


@dataclass(frozen=True)
class WorkEnergyBalance:
    """Ratio of slit work to particle energy change, with its regime.

    regime is "balanced" when the ratio is 1 within 1e-12, otherwise
    "excess" (>1) or "deficit" (<1).
    """

    ratio: float
    work: float
    regime: str


def work_energy_ratio(
    delta_x: float, delta_p: float, delta_t: float, delta_e: float
) -> WorkEnergyBalance:
    """Perturbation ratio (dX dP)/(dE dT) = dW/dE with dW = (dP/dT) dX.

    All spreads must be positive and satisfy the two uncertainty bounds
    dX dP >= hbar/2 and dE dT >= hbar/2 (hbar = 1).
    """
    for name, v in (
        ("delta_x", delta_x),
        ("delta_p", delta_p),
        ("delta_t", delta_t),
        ("delta_e", delta_e),
    ):
        if not (math.isfinite(v) and v > 0):
            raise InvalidParameterError(f"{name} must be positive and finite, got {v}")
    half_hbar = 0.5 * HBAR
    a = (delta_x * delta_p) / half_hbar
    b = (delta_e * delta_t) / half_hbar
    if a < 1.0 - 1e-12:
        raise InvalidParameterError(f"position-momentum uncertainty bound violated: dX dP = {a * half_hbar}")
    if b < 1.0 - 1e-12:
        raise InvalidParameterError(f"energy-time uncertainty bound violated: dE dT = {b * half_hbar}")
    ratio = a / b
    work = (delta_p / delta_t) * delta_x
    if abs(ratio - 1.0) <= 1e-12:
        regime = "balanced"
    elif ratio > 1.0:
        regime = "excess"
    else:
        regime = "deficit"
    return WorkEnergyBalance(ratio=ratio, work=work, regime=regime)
