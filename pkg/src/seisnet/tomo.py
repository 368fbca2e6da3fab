"""Travel-time tomography: event location, system assembly, ridge solver.

The unknown is absolute per-cell slowness.  Regularization is ridge toward
a reference model (the grid background for assembled systems, zero for raw
systems), so the infinite-regularization limit is the reference model and
the lam=0 limit is plain least squares.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceFailure, InsufficientDataError, InvalidArgumentError
from .forward import trace_ray, travel_time

__all__ = [
    "TomoSystem",
    "TomoModel",
    "locate_event",
    "assemble_system",
    "default_lambda",
    "solve_centralized",
    "checkerboard_score",
    "ray_coverage",
    "export_system",
    "import_system",
]


@dataclass(frozen=True)
class TomoSystem:
    """Sparse ray system: one row per (event, station) ray."""

    A: sp.csr_matrix
    t: np.ndarray
    row_meta: tuple  # (event_id, station_id) per row
    lam: float
    s_ref: np.ndarray
    grid: object = None

    def __post_init__(self):
        if self.A.shape[0] != len(self.t):
            raise InvalidArgumentError("rows(A) must equal len(t)")
        if self.A.nnz and self.A.data.min() < 0:
            raise InvalidArgumentError("ray lengths must be >= 0")
        if self.lam < 0:
            raise InvalidArgumentError("lam must be >= 0")
        if len(self.s_ref) != self.A.shape[1]:
            raise InvalidArgumentError("s_ref length must match columns(A)")

    @property
    def n_rows(self):
        return self.A.shape[0]

    @property
    def n_cells(self):
        return self.A.shape[1]


@dataclass(frozen=True)
class TomoModel:
    """Per-cell slowness in s/m plus solver statistics."""

    grid: object
    slowness: np.ndarray
    stats: dict = field(default_factory=dict)

    def velocity(self):
        return 1.0 / self.slowness


def default_lambda(A, scale=0.1):
    """Scale-aware ridge default: scale x trace(A'A)/L."""
    L = A.shape[1]
    return scale * float((A.multiply(A)).sum()) / L


def _travel_time_table(points, stations, grid):
    """Travel times from each candidate point to each station."""
    if grid.is_uniform():
        s = 1.0 / float(grid.velocity.flat[0])
        pts = np.asarray(points)[:, None, :]
        pos = np.asarray([st.position for st in stations])[None, :, :]
        return np.linalg.norm(pts - pos, axis=2) * s
    table = np.empty((len(points), len(stations)))
    for i, p in enumerate(points):
        for j, st in enumerate(stations):
            table[i, j] = travel_time(trace_ray(tuple(p), st.position, grid), grid)
    return table


def locate_event(picks, stations, grid, search_spacing):
    """Grid search for the hypocenter and origin time minimizing pick misfit.

    For each candidate x the origin time is the mean of (pick - T); the
    candidate with the smallest squared misfit wins, lowest index on ties.
    """
    if len(picks) < 3:
        raise InsufficientDataError("need at least 3 picks to locate")
    if search_spacing > grid.spacing:
        raise InvalidArgumentError("search_spacing must be <= grid spacing")
    by_id = {s.id: s for s in stations}
    try:
        sts = [by_id[p.station_id] for p in picks]
    except KeyError as exc:
        raise InvalidArgumentError(f"pick references unknown station {exc}") from exc
    times = np.asarray([p.arrival_time for p in picks])

    axes = [
        np.arange(0, int(np.floor(e / search_spacing)) + 1) * search_spacing + o
        for o, e in zip(grid.origin, grid.extent)
    ]
    gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
    candidates = np.column_stack([gx.ravel(), gy.ravel()])
    table = _travel_time_table(candidates, sts, grid)
    t0 = (times[None, :] - table).mean(axis=1)
    resid = times[None, :] - t0[:, None] - table
    cost = (resid**2).sum(axis=1)
    best = int(np.argmin(cost))  # argmin returns the lowest index on ties
    return tuple(candidates[best]), float(t0[best])


def assemble_system(events, stations, grid, lam=None, arrivals=None, lam_scale=0.1):
    """One sparse row per (event, station) ray; t = arrival - origin time.

    ``arrivals`` maps (event_index, station_id) to an absolute picked
    arrival time; missing entries mean no pick and the row is dropped.
    With arrivals=None the theoretical travel times are used (a consistent
    system for oracle comparisons).
    """
    n_cells = grid.n_cells
    rows, cols, vals = [], [], []
    t = []
    meta = []
    r = 0
    for ei, event in enumerate(events):
        for st in stations:
            if arrivals is None:
                ray = trace_ray(event.hypocenter, st.position, grid)
                t_row = travel_time(ray, grid)
            else:
                picked = arrivals.get((ei, st.id))
                if picked is None:
                    continue
                ray = trace_ray(event.hypocenter, st.position, grid)
                t_row = picked - event.origin_time
            for idx, length in ray.cells:
                if length > 0.0:
                    rows.append(r)
                    cols.append(idx)
                    vals.append(length)
            t.append(t_row)
            meta.append((ei, st.id))
            r += 1
    A = sp.csr_matrix(
        (np.asarray(vals), (np.asarray(rows), np.asarray(cols))),
        shape=(r, n_cells),
    )
    if lam is None:
        lam = default_lambda(A, scale=lam_scale)
    s_ref = np.full(n_cells, 1.0 / grid.background)
    return TomoSystem(
        A=A,
        t=np.asarray(t),
        row_meta=tuple(meta),
        lam=float(lam),
        s_ref=s_ref,
        grid=grid,
    )


def normal_residual(system, slowness):
    """Relative residual of (A'A + lam I) s = A' t + lam s_ref."""
    A = system.A
    b = A.T @ system.t + system.lam * system.s_ref
    r = A.T @ (A @ slowness) + system.lam * slowness - b
    denom = np.linalg.norm(b)
    return float(np.linalg.norm(r) / (denom if denom > 0 else 1.0))


def solve_centralized(system, tol=1e-8, max_iter=None, clamp=True):
    """Conjugate gradient on the ridge normal equations, started at s_ref.

    Raises ConvergenceFailure carrying the best iterate when the iteration
    cap (10 x cells by default) is reached before tolerance.
    """
    if system.n_rows == 0:
        raise InsufficientDataError("empty system")
    A = system.A
    lam = system.lam
    L = system.n_cells
    if max_iter is None:
        max_iter = 10 * L
    b = A.T @ system.t + lam * system.s_ref

    def apply_M(x):
        return A.T @ (A @ x) + lam * x

    x = system.s_ref.astype(float).copy()
    r = b - apply_M(x)
    p = r.copy()
    rs = float(r @ r)
    bnorm = float(np.linalg.norm(b)) or 1.0
    best_x, best_res = x.copy(), np.sqrt(rs) / bnorm
    iterations = 0
    converged = best_res <= tol
    while not converged and iterations < max_iter:
        Mp = apply_M(p)
        denom = float(p @ Mp)
        if denom <= 0:
            break  # numerically singular direction; keep best iterate
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * Mp
        rs_new = float(r @ r)
        iterations += 1
        res = np.sqrt(rs_new) / bnorm
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= tol:
            converged = True
            break
        p = r + (rs_new / rs) * p
        rs = rs_new

    stats = {"iterations": iterations, "relative_residual": best_res, "clamped_cells": 0}
    slowness = best_x
    if clamp and np.any(system.s_ref > 0):
        floor = 0.1 * system.s_ref
        mask = slowness < floor
        if np.any(mask & (system.s_ref > 0)):
            stats["clamped_cells"] = int(np.count_nonzero(mask & (system.s_ref > 0)))
            slowness = np.where(mask & (system.s_ref > 0), floor, slowness)
    model = TomoModel(grid=system.grid, slowness=slowness, stats=stats)
    if not converged:
        raise ConvergenceFailure(
            f"normal-equation CG hit the {max_iter}-iteration cap "
            f"(relative residual {best_res:.2e})",
            best=model,
            stats=stats,
        )
    return model


def ray_coverage(system):
    """Number of rays touching each cell."""
    counts = np.zeros(system.n_cells, dtype=int)
    csc = system.A.tocsc()
    counts[:] = np.diff(csc.indptr)
    return counts


def checkerboard_score(recovered, truth, hit_mask):
    """Pearson correlation of slowness over cells with ray coverage >= 1."""
    mask = np.asarray(hit_mask) >= 1
    if not np.any(mask):
        raise InsufficientDataError("empty coverage mask")
    a = np.asarray(recovered.slowness)[mask]
    b = np.asarray(truth.slowness)[mask]
    da = a - a.mean()
    db = b - b.mean()
    denom = np.linalg.norm(da) * np.linalg.norm(db)
    if denom == 0:
        raise InsufficientDataError("zero variance over covered cells")
    return float(np.dot(da, db) / denom)


def export_system(system, path_base):
    """Debug/oracle interchange: Matrix Market for A, CSV for t and metadata."""
    import csv
    from pathlib import Path

    import scipy.io as sio

    sio.mmwrite(str(path_base) + "_A.mtx", system.A)
    with open(str(path_base) + "_t.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["event_id", "station_id", "t_s"])
        meta = system.row_meta or [(-1, -1)] * len(system.t)
        for (ev, sid), t in zip(meta, system.t):
            writer.writerow([ev, sid, repr(float(t))])
    Path(str(path_base) + "_meta.csv").write_text(
        "lam\n" + repr(float(system.lam)) + "\n"
    )


def import_system(path_base, s_ref=None, grid=None):
    import csv

    import scipy.io as sio

    A = sio.mmread(str(path_base) + "_A.mtx").tocsr()
    t, meta = [], []
    with open(str(path_base) + "_t.csv") as fh:
        for row in csv.DictReader(fh):
            t.append(float(row["t_s"]))
            meta.append((int(row["event_id"]), int(row["station_id"])))
    with open(str(path_base) + "_meta.csv") as fh:
        lam = float(fh.read().splitlines()[1])
    return TomoSystem(
        A=A,
        t=np.asarray(t),
        row_meta=tuple(meta),
        lam=lam,
        s_ref=np.zeros(A.shape[1]) if s_ref is None else s_ref,
        grid=grid,
    )
