"""Forward modeling: straight rays, travel times, synthetics, 2D acoustic FD.

Rays are straight segments (no bending); the per-cell lengths are exact
parametric traversal lengths, so the ray matrix entries are exactly the
chord lengths through each cell.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "RayPath",
    "Trace",
    "Wavefield",
    "ricker",
    "trace_ray",
    "travel_time",
    "synthesize_trace",
    "fd_propagate",
    "cfl_limit",
]


@dataclass(frozen=True)
class RayPath:
    """Straight source-receiver ray as ordered (flat cell index, length m)."""

    cells: tuple
    source: tuple
    receiver: tuple

    @property
    def length(self):
        return float(sum(l for _, l in self.cells))

    @property
    def distance(self):
        return float(
            np.sqrt(sum((a - b) ** 2 for a, b in zip(self.source, self.receiver)))
        )


@dataclass(frozen=True)
class Trace:
    """Uniformly sampled time series recorded at one station."""

    station_id: int
    start_time: float
    sampling_rate: float
    samples: np.ndarray

    def __post_init__(self):
        if self.sampling_rate <= 0:
            raise InvalidArgumentError("sampling_rate must be > 0")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidArgumentError("samples must be finite")
        self.samples.flags.writeable = False

    @property
    def n(self):
        return len(self.samples)

    @property
    def dt(self):
        return 1.0 / self.sampling_rate

    def times(self):
        return self.start_time + np.arange(self.n) / self.sampling_rate

    def with_samples(self, samples, start_time=None):
        return Trace(
            station_id=self.station_id,
            start_time=self.start_time if start_time is None else start_time,
            sampling_rate=self.sampling_rate,
            samples=np.ascontiguousarray(samples, dtype=float),
        )


@dataclass(frozen=True)
class Wavefield:
    """Time-expanded field: frames[k] is the grid amplitude after step k."""

    grid: object
    dt: float
    frames: np.ndarray  # (nt, nx, ny)

    @property
    def nt(self):
        return self.frames.shape[0]


def ricker(t, freq):
    """Ricker wavelet of peak frequency ``freq``, unit peak amplitude at t=0."""
    a = (np.pi * freq * np.asarray(t)) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


def trace_ray(source, receiver, grid):
    """Exact straight-ray cell traversal from source to receiver.

    Interval midpoints decide cell membership, which combined with the
    floor rule makes boundary handling deterministic (larger index wins).
    """
    for name, p in (("source", source), ("receiver", receiver)):
        if not grid.contains(p):
            raise InvalidArgumentError(f"{name} {p} outside grid extent")
    p0 = np.asarray(source, dtype=float)
    p1 = np.asarray(receiver, dtype=float)
    delta = p1 - p0
    dist = float(np.sqrt(np.sum(delta**2)))
    if dist == 0.0:
        cell = grid.flat_index(grid.cell_of(source))
        return RayPath(cells=((cell, 0.0),), source=tuple(p0), receiver=tuple(p1))

    ts = [0.0, 1.0]
    for axis in range(len(grid.dims)):
        if delta[axis] == 0.0:
            continue
        o = grid.origin[axis]
        for k in range(1, grid.dims[axis]):
            t = (o + k * grid.spacing - p0[axis]) / delta[axis]
            if 0.0 < t < 1.0:
                ts.append(t)
    ts = np.unique(np.asarray(ts))

    cells = []
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if t1 <= t0:
            continue
        mid = p0 + 0.5 * (t0 + t1) * delta
        idx = grid.flat_index(grid.cell_of(tuple(mid)))
        seg = dist * (t1 - t0)
        if cells and cells[-1][0] == idx:
            cells[-1] = (idx, cells[-1][1] + seg)
        else:
            cells.append((idx, seg))
    return RayPath(cells=tuple(cells), source=tuple(p0), receiver=tuple(p1))


def travel_time(ray, grid):
    """Line integral of slowness along the ray: sum of length x slowness."""
    slowness = grid.slowness.reshape(-1)
    n = slowness.shape[0]
    total = 0.0
    for idx, length in ray.cells:
        if not 0 <= idx < n:
            raise InvalidArgumentError(f"ray cell {idx} invalid for grid")
        total += length * slowness[idx]
    return total


def synthesize_trace(
    event,
    station,
    grid,
    sampling_rate,
    wavelet_freq=25.0,
    snr=np.inf,
    duration=2.5,
    seed=0,
):
    """Ricker arrival at origin_time + travel time, plus white noise.

    Noise std is peak-signal-amplitude / snr; snr=inf gives a noise-free
    trace.  Deterministic for a fixed seed.
    """
    if wavelet_freq >= sampling_rate / 2:
        raise InvalidArgumentError("wavelet_freq must be below Nyquist")
    if snr <= 0:
        raise InvalidArgumentError("snr must be > 0 (use inf for noise-free)")
    ray = trace_ray(event.hypocenter, station.position, grid)
    arrival = event.origin_time + travel_time(ray, grid)
    t = np.arange(int(round(duration * sampling_rate))) / sampling_rate
    samples = event.magnitude_scale * ricker(t - arrival, wavelet_freq)
    if np.isfinite(snr):
        rng = np.random.default_rng(seed)
        samples = samples + rng.normal(
            0.0, event.magnitude_scale / snr, size=samples.shape
        )
    return Trace(
        station_id=station.id,
        start_time=0.0,
        sampling_rate=sampling_rate,
        samples=samples,
    )


def cfl_limit(grid, cfl_factor=0.6):
    """Largest stable time step for :func:`fd_propagate`."""
    return cfl_factor * grid.spacing / (np.sqrt(2.0) * float(grid.velocity.max()))


def _sponge_profile(dims, width, strength=0.0085):
    """Multiplicative per-step decay, ~1 in the interior, <1 near edges."""
    taper = np.ones(dims)
    for axis, n in enumerate(dims):
        ramp = np.ones(n)
        w = min(width, n // 2)
        edge = np.exp(-((strength * (w - np.arange(w))) ** 2) * width)
        ramp[:w] = edge
        ramp[n - w :] = edge[::-1]
        shape = [1] * len(dims)
        shape[axis] = n
        taper = taper * ramp.reshape(shape)
    return taper


def fd_propagate(
    grid,
    source,
    dt,
    nt,
    cfl_factor=0.6,
    sponge=True,
    sponge_width=20,
):
    """Constant-density acoustic wave propagation, 2nd order in time and
    4th order in space, with a multiplicative sponge at the edges.

    ``source`` is a (point, signature) pair; the signature may be a Trace
    or a plain sample array and is injected additively at the source cell.
    A dt above the stability bound raises instead of being clamped.
    """
    if grid.ndim != 2:
        raise InvalidArgumentError("fd_propagate supports 2D grids only")
    if nt < 1:
        raise InvalidArgumentError("nt must be >= 1")
    limit = cfl_limit(grid, cfl_factor)
    if dt > limit * (1 + 1e-12):
        raise InvalidArgumentError(
            f"dt={dt:g}s violates stability bound {limit:g}s (cfl_factor={cfl_factor})"
        )
    point, signature = source
    if isinstance(signature, Trace):
        signature = signature.samples
    signature = np.asarray(signature, dtype=float)
    sx, sy = grid.cell_of(point)

    # the sponge lives on a padded rim outside the physical domain, so
    # sources and receivers on the domain boundary are not absorbed
    pad = sponge_width if sponge else 0
    velocity = np.pad(grid.velocity, pad, mode="edge") if pad else grid.velocity
    mx, my = velocity.shape
    c2 = (velocity * dt) ** 2 / grid.spacing**2
    taper = _sponge_profile((mx, my), sponge_width) if sponge else None

    # two-cell halo for the 4th order stencil, zero Dirichlet outside
    cur = np.zeros((mx + 4, my + 4))
    prev = np.zeros((mx + 4, my + 4))
    nx, ny = grid.dims
    frames = np.zeros((nt, nx, ny))
    inner = (slice(2, mx + 2), slice(2, my + 2))
    crop = (slice(2 + pad, 2 + pad + nx), slice(2 + pad, 2 + pad + ny))

    for k in range(nt):
        if k < len(signature) and signature[k] != 0.0:
            cur[sx + pad + 2, sy + pad + 2] += signature[k]
        u = cur
        lap = (
            -60.0 * u[2:-2, 2:-2]
            + 16.0 * (u[1:-3, 2:-2] + u[3:-1, 2:-2] + u[2:-2, 1:-3] + u[2:-2, 3:-1])
            - (u[:-4, 2:-2] + u[4:, 2:-2] + u[2:-2, :-4] + u[2:-2, 4:])
        ) / 12.0
        nxt = np.zeros_like(cur)
        nxt[inner] = 2.0 * u[inner] - prev[inner] + c2 * lap
        if taper is not None:
            nxt[inner] *= taper
            u[inner] *= taper
        prev, cur = cur, nxt
        frames[k] = cur[crop]
    return Wavefield(grid=grid, dt=dt, frames=frames)
