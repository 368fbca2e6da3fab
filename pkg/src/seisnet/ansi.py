"""Ambient-noise imaging: diffuse-field synthesis, virtual-source gathers,
group travel times and gradient-based phase-velocity maps.

The noise field is a far-field ring of uncorrelated random-phase sources
with flat spectra in the synthesis band.  Flat source spectra make each
segment's pair correlation carry a deterministic band-limited kernel at
the inter-station lag, so the Green's-function peak emerges cleanly and
segment stacking only has to average down cross-source interference.
"""

from dataclasses import dataclass

import numpy as np
import scipy.signal as sps
from scipy.interpolate import RBFInterpolator

from .errors import InsufficientDataError, InvalidArgumentError
from .forward import Trace
from .sigproc import CorrelationFunction, cross_correlate

__all__ = [
    "NoiseField",
    "TravelTimeMeasurement",
    "TravelTimeSurface",
    "PhaseVelocityMap",
    "synthesize_noise",
    "virtual_source_gather",
    "extract_travel_time",
    "build_surface",
    "interpolate_surface",
    "velocity_map_from_fields",
    "eikonal_map",
    "stack_maps",
]


@dataclass(frozen=True)
class NoiseField:
    """Per-station ambient noise traces plus the generation spec."""

    traces: dict  # station_id -> Trace
    spec: dict

    def sampling_rate(self):
        return next(iter(self.traces.values())).sampling_rate


@dataclass(frozen=True)
class TravelTimeMeasurement:
    tau: float
    amplitude: float
    reliable: bool


@dataclass(frozen=True)
class TravelTimeSurface:
    """Group travel times and amplitudes seen from one virtual source."""

    virtual_source: int
    station_ids: tuple
    positions: np.ndarray  # (n, 2)
    tau: np.ndarray
    amplitude: np.ndarray
    omega: float

    def __post_init__(self):
        if np.any(self.tau < 0):
            raise InvalidArgumentError("travel times must be >= 0")
        k = self.station_ids.index(self.virtual_source)
        if self.tau[k] != 0.0:
            raise InvalidArgumentError("tau at the virtual source must be 0")


@dataclass(frozen=True)
class PhaseVelocityMap:
    grid: object
    c: np.ndarray
    hits: np.ndarray
    band: tuple

    def __post_init__(self):
        if np.any((self.hits > 0) & ~(self.c > 0)):
            raise InvalidArgumentError("c must be positive wherever hits > 0")


def synthesize_noise(
    stations,
    duration,
    sampling_rate,
    c_medium,
    band,
    ring_radius=None,
    n_sources=720,
    segment_s=4.0,
    geometric_spreading=True,
    seed=0,
):
    """Far-field ring of uncorrelated band-limited random-phase sources.

    Each station records the superposed, distance-delayed source signals at
    the medium speed; delays are exact (frequency-domain phase shifts).
    Traces are built segment by segment so long records stay cheap.
    """
    positions = np.asarray([s.position for s in stations], dtype=float)
    aperture = 0.0
    for i in range(len(positions)):
        d = np.linalg.norm(positions - positions[i], axis=1).max()
        aperture = max(aperture, float(d))
    if ring_radius is None:
        ring_radius = 4.0 * max(aperture, 1.0)
    if ring_radius < 3.0 * aperture:
        raise InvalidArgumentError("ring radius must be >= 3x array aperture")
    nyq = sampling_rate / 2.0
    if not 0 < band[0] < band[1] < nyq:
        raise InvalidArgumentError("band must lie inside (0, Nyquist)")

    nseg = int(round(segment_s * sampling_rate))
    n_segments = max(1, int(duration / segment_s))
    center = positions.mean(axis=0)
    angles = 2.0 * np.pi * np.arange(n_sources) / n_sources
    sources = center + ring_radius * np.column_stack([np.cos(angles), np.sin(angles)])
    freqs = np.fft.rfftfreq(nseg, 1.0 / sampling_rate)
    in_band = (freqs >= band[0]) & (freqs <= band[1])
    fb = freqs[in_band]
    dist = np.linalg.norm(positions[:, None, :] - sources[None, :, :], axis=2)
    phase = np.exp(-2j * np.pi * (dist[:, :, None] / c_medium) * fb[None, None, :]).astype(
        np.complex64
    )
    if geometric_spreading:
        phase /= np.sqrt(dist)[:, :, None].astype(np.float32)

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA0153]))
    records = np.zeros((len(stations), n_segments * nseg))
    spec = np.zeros((len(stations), freqs.size), dtype=complex)
    for s in range(n_segments):
        src_phases = np.exp(2j * np.pi * rng.random((n_sources, fb.size))).astype(np.complex64)
        for k in range(len(stations)):
            spec[k, in_band] = (src_phases * phase[k]).sum(axis=0)
        records[:, s * nseg : (s + 1) * nseg] = np.fft.irfft(spec, n=nseg, axis=1)

    traces = {
        st.id: Trace(
            station_id=st.id,
            start_time=0.0,
            sampling_rate=sampling_rate,
            samples=records[k],
        )
        for k, st in enumerate(stations)
    }
    return NoiseField(
        traces=traces,
        spec={
            "c_medium": c_medium,
            "band": tuple(band),
            "ring_radius": ring_radius,
            "n_sources": n_sources,
            "segment_s": segment_s,
            "geometric_spreading": geometric_spreading,
            "seed": seed,
        },
    )


def _fold_even(corr):
    """Replace a correlation by its symmetric fold on the same lag axis."""
    mid = len(corr.lags) // 2
    pos = corr.values[mid:]
    neg = corr.values[mid::-1]
    half = 0.5 * (pos + neg)
    folded = np.concatenate([half[::-1], half[1:]])
    return CorrelationFunction(
        station_a=corr.station_a,
        station_b=corr.station_b,
        lags=corr.lags,
        values=folded,
    )


def virtual_source_gather(center, field, n_segments, max_lag):
    """Correlations of the center station against every station.

    Each pair correlation is the mean of per-segment energy-normalized
    correlations, folded symmetrically so the gather for (A, B) and (B, A)
    stores identical values.
    """
    if n_segments < 1:
        raise InvalidArgumentError("n_segments must be >= 1")
    base = field.traces[center.id if hasattr(center, "id") else center]
    center_id = base.station_id
    n = base.n
    seg_len = n // n_segments
    if seg_len <= int(max_lag * base.sampling_rate):
        raise InsufficientDataError("traces too short for the requested segmentation")
    gathers = {}
    for sid, tr in field.traces.items():
        acc = None
        for s in range(n_segments):
            sl = slice(s * seg_len, (s + 1) * seg_len)
            a = Trace(
                station_id=center_id,
                start_time=0.0,
                sampling_rate=base.sampling_rate,
                samples=base.samples[sl],
            )
            b = Trace(
                station_id=sid,
                start_time=0.0,
                sampling_rate=tr.sampling_rate,
                samples=tr.samples[sl],
            )
            corr = cross_correlate(a, b, max_lag, normalized=True)
            acc = corr.values if acc is None else acc + corr.values
        mean = CorrelationFunction(
            station_a=center_id,
            station_b=sid,
            lags=corr.lags,
            values=acc / n_segments,
        )
        gathers[sid] = _fold_even(mean)
    return gathers


def extract_travel_time(corr, band, distance=None, velocity_window=None):
    """Group travel time and amplitude from a folded correlation.

    The group time is the lag of the envelope maximum of the band-passed
    positive branch; with a known pair distance and velocity window the
    search is restricted to physically admissible lags.  A peak pinned to
    the window or lag-axis boundary is flagged unreliable.
    """
    values = np.asarray(corr.values, dtype=float)
    fs = 1.0 / corr.dt
    nyq = fs / 2.0
    if not 0 < band[0] < band[1] < nyq:
        raise InvalidArgumentError("band must lie inside (0, Nyquist)")
    mid = len(corr.lags) // 2
    if len(values) - mid < 4:
        raise InsufficientDataError("positive-lag branch is empty")
    if np.max(np.abs(values)) == 0.0:
        return TravelTimeMeasurement(tau=0.0, amplitude=0.0, reliable=False)
    sos = sps.butter(4, [band[0] / nyq, band[1] / nyq], btype="bandpass", output="sos")
    bp = sps.sosfiltfilt(sos, values, padlen=min(len(values) - 2, 3 * (2 * len(sos) + 1)))
    pos = bp[mid:]
    env = np.abs(sps.hilbert(pos))
    k0, k1 = 0, len(env)
    if distance is not None and velocity_window is not None:
        vmin, vmax = velocity_window
        k0 = max(0, int(distance / vmax * fs))
        k1 = min(len(env), int(np.ceil(distance / vmin * fs)) + 1)
        if k1 <= k0:
            return TravelTimeMeasurement(tau=0.0, amplitude=0.0, reliable=False)
    k = k0 + int(np.argmax(env[k0:k1]))
    reliable = 0 < k < len(env) - 1
    return TravelTimeMeasurement(tau=k / fs, amplitude=float(env[k]), reliable=reliable)


def build_surface(center, stations, measurements, omega):
    """Assemble a TravelTimeSurface; the virtual source gets tau = 0."""
    ids, pos, taus, amps = [], [], [], []
    for st in stations:
        ids.append(st.id)
        pos.append(st.position)
        if st.id == center.id:
            taus.append(0.0)
            amps.append(measurements[st.id].amplitude if st.id in measurements else 1.0)
        else:
            m = measurements[st.id]
            taus.append(m.tau)
            amps.append(m.amplitude)
    return TravelTimeSurface(
        virtual_source=center.id,
        station_ids=tuple(ids),
        positions=np.asarray(pos, dtype=float),
        tau=np.asarray(taus),
        amplitude=np.asarray(amps),
        omega=float(omega),
    )


def _cell_centers(grid):
    nx, ny = grid.dims
    ox, oy = grid.origin
    cx = ox + (np.arange(nx) + 0.5) * grid.spacing
    cy = oy + (np.arange(ny) + 0.5) * grid.spacing
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def interpolate_surface(surface, grid, smoothing=0.0):
    """Thin-plate-spline interpolation of station tau and A to the grid.

    A smooth interpolant is required because the phase-velocity map
    differentiates the field; plain inverse-distance weighting plateaus at
    the stations and its gradients are unusable.
    """
    cells = _cell_centers(grid)
    tau_f = RBFInterpolator(surface.positions, surface.tau, kernel="thin_plate_spline",
                            smoothing=smoothing)
    amp_f = RBFInterpolator(surface.positions, surface.amplitude,
                            kernel="thin_plate_spline", smoothing=smoothing)
    tau_grid = tau_f(cells).reshape(grid.dims)
    amp_grid = amp_f(cells).reshape(grid.dims)
    return tau_grid, amp_grid


def velocity_map_from_fields(grid, tau_grid, omega, mode="EIKONAL", amp_grid=None,
                             valid=None, band=(0.0, 0.0)):
    """Per-cell phase velocity from gridded travel-time (and amplitude).

    EIKONAL: 1/c^2 = |grad tau|^2.  HELMHOLTZ additionally subtracts
    laplacian(A) / (A omega^2); cells where that leaves a nonpositive
    squared slowness (or where A <= 0) are masked, not errors.
    """
    gx, gy = np.gradient(tau_grid, grid.spacing)
    s2 = gx**2 + gy**2
    mask = np.ones(grid.dims, dtype=bool) if valid is None else valid.copy()
    if mode == "HELMHOLTZ":
        if amp_grid is None:
            raise InvalidArgumentError("HELMHOLTZ mode needs an amplitude grid")
        ax, ay = np.gradient(amp_grid, grid.spacing)
        axx = np.gradient(ax, grid.spacing, axis=0)
        ayy = np.gradient(ay, grid.spacing, axis=1)
        lap = axx + ayy
        positive_amp = amp_grid > 0
        corr = np.zeros_like(s2)
        corr[positive_amp] = lap[positive_amp] / (amp_grid[positive_amp] * omega**2)
        s2 = s2 - corr
        mask &= positive_amp
    elif mode != "EIKONAL":
        raise InvalidArgumentError(f"unknown mode {mode!r}")
    mask &= s2 > 1e-18
    c = np.zeros(grid.dims)
    c[mask] = 1.0 / np.sqrt(s2[mask])
    hits = mask.astype(int)
    return PhaseVelocityMap(grid=grid, c=c, hits=hits, band=tuple(band))


def eikonal_map(surface, grid, mode="EIKONAL", support_radius=None, min_offset=None,
                smoothing=0.0, band=(0.0, 0.0)):
    """Full map from one virtual source: interpolate, differentiate, mask.

    Cells farther than ``support_radius`` from every station, or closer
    than ``min_offset`` to the virtual source (where the travel-time
    surface has a kink), get hit count 0.
    """
    tau_grid, amp_grid = interpolate_surface(surface, grid, smoothing=smoothing)
    cells = _cell_centers(grid)
    if support_radius is None:
        support_radius = 3.5 * grid.spacing
    if min_offset is None:
        min_offset = 5.0 * grid.spacing
    d_near = np.min(
        np.linalg.norm(cells[:, None, :] - surface.positions[None, :, :], axis=2), axis=1
    )
    vs_pos = surface.positions[surface.station_ids.index(surface.virtual_source)]
    d_vs = np.linalg.norm(cells - vs_pos[None, :], axis=1)
    valid = ((d_near <= support_radius) & (d_vs >= min_offset)).reshape(grid.dims)
    return velocity_map_from_fields(
        grid, tau_grid, surface.omega, mode=mode, amp_grid=amp_grid, valid=valid, band=band
    )


def stack_maps(maps):
    """Hit-count-weighted mean of slowness across maps, converted back to c."""
    if not maps:
        raise InvalidArgumentError("need at least one map")
    grid = maps[0].grid
    band = maps[0].band
    for m in maps[1:]:
        if m.c.shape != maps[0].c.shape or m.band != band:
            raise InvalidArgumentError("maps must share grid and band")
    slow_sum = np.zeros(grid.dims)
    hits = np.zeros(grid.dims, dtype=int)
    for m in maps:
        covered = m.hits > 0
        slow_sum[covered] += m.hits[covered] / m.c[covered]
        hits += m.hits
    c = np.zeros(grid.dims)
    covered = hits > 0
    c[covered] = hits[covered] / slow_sum[covered]
    return PhaseVelocityMap(grid=grid, c=c, hits=hits, band=band)
