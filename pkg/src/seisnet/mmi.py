"""Migration-based microseismic imaging: back-propagation and stacking.

Per-receiver wavefields are built by injecting the time-reversed,
event-windowed, RMS-normalized trace at the receiver and running the
acoustic propagator.  Receivers back-propagating a shared event must use a
common window so their reversed clocks align; the pipeline takes care of
that.  Stacking follows the cluster split: temporal collapse inside a
cluster, pointwise product across clusters.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError
from .forward import Wavefield, fd_propagate

__all__ = [
    "ImageVolume",
    "ClusterImage",
    "assign_clusters",
    "reverse_extrapolate",
    "image_per_receiver",
    "image_sum",
    "image_hybrid",
    "cluster_temporal_stack",
    "cross_cluster_product",
    "locate_max",
]


@dataclass(frozen=True)
class ImageVolume:
    """Per-cell amplitude; 3D array (t, x, y) in time-expanded form,
    2D array (x, y) once the time axis is collapsed."""

    grid: object
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("image values must be finite")

    @property
    def time_expanded(self):
        return self.values.ndim == 3


@dataclass(frozen=True)
class ClusterImage:
    cluster_id: int
    grid: object
    values: np.ndarray  # (x, y)


def assign_clusters(stations, comm_range, size):
    """Group stations into fixed-size clusters of mutually reachable members.

    Stations are taken in id order; each group head must cover every member
    within comm_range (single-hop member-to-head traffic).
    """
    if len(stations) % size != 0:
        raise InvalidArgumentError("cluster size must divide the station count")
    ordered = sorted(stations, key=lambda s: s.id)
    clusters = []
    for k in range(0, len(ordered), size):
        group = ordered[k : k + size]
        head = group[0]
        for member in group[1:]:
            d = float(np.linalg.norm(np.subtract(member.position, head.position)))
            if d > comm_range:
                raise InvalidArgumentError(
                    f"station {member.id} is {d:.0f} m from head {head.id}, "
                    f"beyond comm_range {comm_range:.0f} m"
                )
        clusters.append({"head": head.id, "members": [s.id for s in group]})
    return clusters


def reverse_extrapolate(trace, station, grid, dt, window, nt=None, cfl_factor=0.6):
    """Receiver wavefield: back-propagate the reversed windowed trace.

    The trace segment inside ``window`` (seconds, absolute) is divided by
    its RMS so unbalanced receiver amplitudes cannot dominate the stack.
    """
    t0, t1 = window
    i0 = int(round((t0 - trace.start_time) * trace.sampling_rate))
    i1 = int(round((t1 - trace.start_time) * trace.sampling_rate))
    i0, i1 = max(0, i0), min(trace.n, i1)
    if i1 - i0 < 2:
        raise InsufficientDataError("empty event window")
    seg = np.asarray(trace.samples[i0:i1], dtype=float)
    rms = float(np.sqrt(np.mean(seg**2)))
    if rms == 0.0:
        seg = seg.copy()
    else:
        seg = seg / rms
    if nt is None:
        span = max(grid.extent)
        nt = len(seg) + int(np.ceil(np.sqrt(2.0) * span / float(grid.velocity.min()) / dt))
    return fd_propagate(grid, (station.position, seg[::-1].copy()), dt, nt, cfl_factor=cfl_factor)


def image_per_receiver(receiver_field, mode="SOURCELESS", source_field=None):
    """Per-receiver time-expanded image.

    SOURCELESS takes the receiver wavefield directly (the cross-correlation
    against other receivers happens in the downstream sum/product stack);
    INTERFEROMETRIC multiplies pointwise with a modeled source wavefield.
    """
    if mode == "SOURCELESS":
        return ImageVolume(grid=receiver_field.grid, values=receiver_field.frames.copy())
    if mode == "INTERFEROMETRIC":
        if source_field is None:
            raise InvalidArgumentError("INTERFEROMETRIC mode needs a source wavefield")
        s = source_field.frames if isinstance(source_field, Wavefield) else source_field
        if np.ndim(s) == 0:
            values = float(s) * receiver_field.frames
        else:
            if np.shape(s) != receiver_field.frames.shape:
                raise InvalidArgumentError("source and receiver wavefields must share dims")
            values = np.asarray(s) * receiver_field.frames
        return ImageVolume(grid=receiver_field.grid, values=values)
    raise InvalidArgumentError(f"unknown imaging mode {mode!r}")


def _check_matching(images):
    if not images:
        raise InvalidArgumentError("need at least one image")
    shape = images[0].values.shape
    for im in images[1:]:
        if im.values.shape != shape:
            raise InvalidArgumentError("image dims must match")


def image_sum(images):
    """Pointwise sum over receivers."""
    _check_matching(images)
    total = images[0].values.copy()
    for im in images[1:]:
        total += im.values
    return ImageVolume(grid=images[0].grid, values=total)


def image_hybrid(images, n):
    """Product over groups of within-group sums; group j covers receiver
    indices j*n .. j*n+n-1.  n must divide the receiver count."""
    _check_matching(images)
    N = len(images)
    if n < 1 or N % n != 0:
        raise InvalidArgumentError("group length n must be >= 1 and divide N")
    out = None
    for j in range(N // n):
        group = image_sum(images[j * n : (j + 1) * n])
        out = group.values if out is None else out * group.values
    return ImageVolume(grid=images[0].grid, values=out)


def cluster_temporal_stack(images, cluster_id=0):
    """Collapse a cluster's time-expanded images to one 2D image:
    sum over members, then over the time axis."""
    _check_matching(images)
    if not images[0].time_expanded:
        raise InvalidArgumentError("cluster stack expects time-expanded images")
    stacked = image_sum(images)
    return ClusterImage(
        cluster_id=cluster_id,
        grid=images[0].grid,
        values=stacked.values.sum(axis=0),
    )


def cross_cluster_product(cluster_images):
    """Pointwise product of cluster images: the final spatial image."""
    if not cluster_images:
        raise InvalidArgumentError("need at least one cluster image")
    out = cluster_images[0].values.copy()
    for ci in cluster_images[1:]:
        if ci.values.shape != out.shape:
            raise InvalidArgumentError("cluster image dims must match")
        out = out * ci.values
    return ImageVolume(grid=cluster_images[0].grid, values=out)


def locate_max(image):
    """Cell center of the global maximum; lowest flat index wins ties."""
    values = image.values
    if values.ndim != 2 or values.size == 0:
        raise InvalidArgumentError("locate_max expects a nonempty 2D image")
    cell = np.unravel_index(int(np.argmax(values)), values.shape)
    return image.grid.cell_center(cell)
