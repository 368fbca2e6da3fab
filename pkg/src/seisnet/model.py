"""Discretized subsurface, stations, events and scenario configuration.

Grids are uniform constant-velocity cells, row-major with axis order
(x, y).  A point on a shared cell boundary belongs to the cell with the
larger index; points on the outer extent boundary are clamped into the
last cell so that stations placed on the array perimeter stay inside.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, InvalidArgumentError

__all__ = [
    "VelocityGrid",
    "Station",
    "SeismicEvent",
    "Scenario",
    "build_grid",
    "apply_checkerboard",
    "perimeter_stations",
    "lattice_stations",
    "random_interior_events",
]


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform 2D (or 3D) grid of constant-velocity cells."""

    origin: tuple
    spacing: float
    dims: tuple
    velocity: np.ndarray
    background: float

    def __post_init__(self):
        if self.spacing <= 0:
            raise InvalidArgumentError("spacing must be > 0")
        if any(d < 2 for d in self.dims):
            raise InvalidArgumentError("need at least 2 cells per axis")
        if self.velocity.shape != tuple(self.dims):
            raise InvalidArgumentError("velocity shape does not match dims")
        if not np.all(np.isfinite(self.velocity)) or np.any(self.velocity <= 0):
            raise InvalidArgumentError("velocities must be positive and finite")
        self.velocity.flags.writeable = False

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def n_cells(self):
        return int(np.prod(self.dims))

    @property
    def extent(self):
        """Physical size per axis in meters."""
        return tuple(d * self.spacing for d in self.dims)

    @property
    def slowness(self):
        """Per-cell slowness in s/m, derived (never stored) from velocity."""
        return 1.0 / self.velocity

    def contains(self, point):
        """True if the point is inside or on the boundary of the extent."""
        return all(
            o - 1e-9 <= p <= o + e + 1e-9
            for p, o, e in zip(point, self.origin, self.extent)
        )

    def cell_of(self, point):
        """Cell index tuple containing a point (boundary -> larger index)."""
        if not self.contains(point):
            raise InvalidArgumentError(f"point {point} outside grid extent")
        idx = []
        for p, o, d in zip(point, self.origin, self.dims):
            i = int(np.floor((p - o) / self.spacing))
            idx.append(min(max(i, 0), d - 1))
        return tuple(idx)

    def flat_index(self, cell):
        """Row-major flat index of a cell tuple."""
        return int(np.ravel_multi_index(cell, self.dims))

    def cell_center(self, cell):
        return tuple(
            o + (i + 0.5) * self.spacing for o, i in zip(self.origin, cell)
        )

    def is_uniform(self):
        return bool(np.all(self.velocity == self.velocity.flat[0]))

    def with_velocity(self, velocity):
        return replace(self, velocity=np.ascontiguousarray(velocity, dtype=float))


def build_grid(extent, spacing, background_velocity, origin=None):
    """Uniform grid covering ``extent`` meters per axis at ``spacing`` m/cell.

    The extent must divide into whole cells.
    """
    if spacing <= 0:
        raise InvalidArgumentError("spacing must be > 0")
    if background_velocity <= 0:
        raise InvalidArgumentError("background_velocity must be > 0")
    dims = []
    for e in extent:
        n = e / spacing
        if abs(n - round(n)) > 1e-9 or round(n) < 2:
            raise InvalidArgumentError(
                f"extent {e} not divisible into >=2 whole cells of {spacing} m"
            )
        dims.append(int(round(n)))
    if origin is None:
        origin = (0.0,) * len(dims)
    velocity = np.full(dims, float(background_velocity))
    return VelocityGrid(
        origin=tuple(float(o) for o in origin),
        spacing=float(spacing),
        dims=tuple(dims),
        velocity=velocity,
        background=float(background_velocity),
    )


def apply_checkerboard(grid, amplitude_pct, block_cells):
    """Alternate cells +/- ``amplitude_pct`` about the grid background.

    The perturbation is additive in blocks of ``block_cells`` per axis; the
    delta is derived from the stored background, so applying with -pct and
    then +pct restores the input bit-exactly.
    """
    if not 0 < abs(amplitude_pct) < 100:
        raise InvalidArgumentError("amplitude_pct must be in (0, 100)")
    if not 1 <= block_cells <= min(grid.dims):
        raise InvalidArgumentError("block_cells must be in [1, min(dims)]")
    delta = grid.background * amplitude_pct / 100.0
    idx = np.indices(grid.dims)
    parity = np.zeros(grid.dims, dtype=int)
    for axis_idx in idx:
        parity += axis_idx // block_cells
    signs = np.where(parity % 2 == 0, 1.0, -1.0)
    return grid.with_velocity(grid.velocity + signs * delta)


def checkerboard_signs(dims, block_cells):
    """Sign pattern (+1/-1) used by :func:`apply_checkerboard`."""
    idx = np.indices(dims)
    parity = np.zeros(dims, dtype=int)
    for axis_idx in idx:
        parity += axis_idx // block_cells
    return np.where(parity % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True)
class Station:
    """Point receiver; ``cluster_id`` groups stations for in-network stacking."""

    id: int
    position: tuple
    cluster_id: int = 0


@dataclass(frozen=True)
class SeismicEvent:
    """Point source with an origin time and a dimensionless amplitude factor."""

    hypocenter: tuple
    origin_time: float
    magnitude_scale: float = 1.0

    def __post_init__(self):
        if self.magnitude_scale <= 0:
            raise InvalidArgumentError("magnitude_scale must be > 0")


def perimeter_stations(grid, count, margin=0.0):
    """Evenly spaced stations along the grid perimeter, 4 sides round-robin.

    Station ``cluster_id`` is the side index (0..3) so perimeter layouts get
    one cluster per side.
    """
    if count % 4 != 0:
        raise InvalidArgumentError("perimeter station count must be divisible by 4")
    per_side = count // 4
    ox, oy = grid.origin[:2]
    ex, ey = grid.extent[:2]
    stations = []
    sid = 0
    for side in range(4):
        for k in range(per_side):
            frac = (k + 0.5) / per_side
            if side == 0:
                pos = (ox + frac * ex, oy + margin)
            elif side == 1:
                pos = (ox + ex - margin, oy + frac * ey)
            elif side == 2:
                pos = (ox + ex - frac * ex, oy + ey - margin)
            else:
                pos = (ox + margin, oy + ey - frac * ey)
            stations.append(Station(id=sid, position=pos, cluster_id=side))
            sid += 1
    return stations


def lattice_stations(grid, nx, ny, margin_frac=0.08):
    """Regular nx-by-ny station lattice inside the grid extent."""
    ox, oy = grid.origin[:2]
    ex, ey = grid.extent[:2]
    xs = np.linspace(ox + margin_frac * ex, ox + (1 - margin_frac) * ex, nx)
    ys = np.linspace(oy + margin_frac * ey, oy + (1 - margin_frac) * ey, ny)
    stations = []
    sid = 0
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            cluster = (j // max(1, ny // 2)) * 2 + (i // max(1, nx // 2))
            stations.append(Station(id=sid, position=(float(x), float(y)), cluster_id=int(cluster)))
            sid += 1
    return stations


def random_interior_events(grid, count, seed, origin_time_span=(0.35, 0.65), margin_frac=0.12):
    """Seeded random events strictly inside the grid extent."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xE7E27]))
    ox, oy = grid.origin[:2]
    ex, ey = grid.extent[:2]
    events = []
    for _ in range(count):
        x = ox + (margin_frac + (1 - 2 * margin_frac) * rng.random()) * ex
        y = oy + (margin_frac + (1 - 2 * margin_frac) * rng.random()) * ey
        t0 = origin_time_span[0] + (origin_time_span[1] - origin_time_span[0]) * rng.random()
        events.append(SeismicEvent(hypocenter=(float(x), float(y)), origin_time=float(t0)))
    return events


# -- scenario ---------------------------------------------------------------

_PIPELINES = ("TOMO_TT", "MMI", "ANSI")
_ALGORITHMS = ("DGD_SYNC", "ASYNC_BROADCAST", "KACZMARZ_CAV")
_PICKERS = ("STA_LTA", "MER", "AIC")


@dataclass(frozen=True)
class Scenario:
    """Validated run configuration; the seed is mandatory.

    ``solver``, ``mmi`` and ``ansi`` are free-form parameter mappings whose
    keys are interpreted by the pipelines; unknown keys are rejected there.
    """

    seed: int
    pipeline: str = "TOMO_TT"
    # grid
    extent: tuple = (2000.0, 2000.0)
    spacing: float = 100.0
    background_velocity: float = 2000.0
    checkerboard_pct: float = 0.0
    checkerboard_block: int = 5
    # acquisition
    station_layout: str = "perimeter"  # perimeter | lattice
    n_stations: int = 16
    n_events: int = 30
    sampling_rate: float = 500.0
    wavelet_freq: float = 25.0
    snr: float = 20.0
    trace_duration: float = 2.5
    # network
    comm_range: float = 600.0
    drop_prob: float = 0.0
    # algorithm selections
    algorithm: str = "KACZMARZ_CAV"
    picker: str = "STA_LTA"
    lam: Optional[float] = None  # None -> scale-aware default
    solver: dict = field(default_factory=dict)
    mmi: dict = field(default_factory=dict)
    ansi: dict = field(default_factory=dict)
    faults: tuple = ()  # ((round, "FAIL_LINK"|"RESTORE_LINK", a, b), ...)

    def __post_init__(self):
        if not 50.0 <= self.sampling_rate <= 1000.0:
            raise ConfigError("sampling_rate", "must be within [50, 1000] Hz")
        if self.pipeline not in _PIPELINES:
            raise ConfigError("pipeline", f"must be one of {_PIPELINES}")
        if self.algorithm not in _ALGORITHMS:
            raise ConfigError("algorithm", f"must be one of {_ALGORITHMS}")
        if self.picker not in _PICKERS:
            raise ConfigError("picker", f"must be one of {_PICKERS}")
        if self.snr <= 0:
            raise ConfigError("snr", "must be > 0 (math.inf for noise-free)")
        if self.wavelet_freq >= self.sampling_rate / 2:
            raise ConfigError("wavelet_freq", "must be below Nyquist")

    def build_grid(self):
        grid = build_grid(self.extent, self.spacing, self.background_velocity)
        if self.checkerboard_pct:
            grid = apply_checkerboard(grid, self.checkerboard_pct, self.checkerboard_block)
        return grid

    def build_stations(self, grid=None):
        grid = grid or self.build_grid()
        if self.station_layout == "perimeter":
            return perimeter_stations(grid, self.n_stations)
        if self.station_layout == "lattice":
            side = int(round(self.n_stations ** 0.5))
            if side * side != self.n_stations:
                raise ConfigError("n_stations", "lattice layout needs a square count")
            return lattice_stations(grid, side, side)
        raise ConfigError("station_layout", "must be 'perimeter' or 'lattice'")

    def build_events(self, grid=None):
        grid = grid or self.build_grid()
        return random_interior_events(grid, self.n_events, self.seed)

    def to_json_dict(self):
        return {
            "seed": self.seed,
            "pipeline": self.pipeline,
            "extent": list(self.extent),
            "spacing": self.spacing,
            "background_velocity": self.background_velocity,
            "checkerboard_pct": self.checkerboard_pct,
            "checkerboard_block": self.checkerboard_block,
            "station_layout": self.station_layout,
            "n_stations": self.n_stations,
            "n_events": self.n_events,
            "sampling_rate": self.sampling_rate,
            "wavelet_freq": self.wavelet_freq,
            "snr": self.snr if self.snr != float("inf") else "inf",
            "trace_duration": self.trace_duration,
            "comm_range": self.comm_range,
            "drop_prob": self.drop_prob,
            "algorithm": self.algorithm,
            "picker": self.picker,
            "lam": self.lam,
            "solver": dict(self.solver),
            "mmi": dict(self.mmi),
            "ansi": dict(self.ansi),
            "faults": [list(f) for f in self.faults],
        }

    @classmethod
    def from_json_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("scenario", "top level must be a JSON object")
        if "seed" not in data:
            raise ConfigError("seed", "is required")
        known = {
            "seed", "pipeline", "extent", "spacing", "background_velocity",
            "checkerboard_pct", "checkerboard_block", "station_layout",
            "n_stations", "n_events", "sampling_rate", "wavelet_freq", "snr",
            "trace_duration", "comm_range", "drop_prob", "algorithm",
            "picker", "lam", "solver", "mmi", "ansi", "faults",
        }
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown scenario field")
        kwargs = dict(data)
        if "extent" in kwargs:
            kwargs["extent"] = tuple(float(e) for e in kwargs["extent"])
        if kwargs.get("snr") == "inf":
            kwargs["snr"] = float("inf")
        if "faults" in kwargs:
            kwargs["faults"] = tuple(tuple(f) for f in kwargs["faults"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError("scenario", str(exc)) from exc
