"""File formats: float32 grid dumps with JSON sidecars, trace dumps, CSVs.

All writers are deterministic (sorted JSON keys, no timestamps) so repeated
runs with the same seed produce byte-identical artifacts.
"""

import csv
import json
from pathlib import Path

import numpy as np

__all__ = [
    "write_grid",
    "read_grid",
    "write_trace",
    "read_trace",
    "write_picks_csv",
    "write_convergence_csv",
    "write_json",
]


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_grid(path_base, values, spacing, origin, extra=None):
    """Write a little-endian float32 row-major dump plus a JSON manifest.

    ``path_base`` gets the suffixes ``.f32`` and ``.json``.  Returns the
    pair of paths.
    """
    values = np.asarray(values)
    raw = Path(str(path_base) + ".f32")
    raw.write_bytes(np.ascontiguousarray(values, dtype="<f4").tobytes())
    manifest = {
        "dims": list(values.shape),
        "spacing": spacing,
        "origin": list(origin),
        "dtype": "<f4",
        "order": "C",
    }
    if extra:
        manifest.update(extra)
    side = Path(str(path_base) + ".json")
    write_json(side, manifest)
    return raw, side


def read_grid(path_base):
    manifest = json.loads(Path(str(path_base) + ".json").read_text())
    raw = np.frombuffer(Path(str(path_base) + ".f32").read_bytes(), dtype="<f4")
    return raw.reshape(manifest["dims"]).astype(float), manifest


def write_trace(path, trace):
    """Single-file trace dump: one JSON header line + raw float32 samples."""
    header = {
        "station_id": trace.station_id,
        "start_time": trace.start_time,
        "sampling_rate": trace.sampling_rate,
        "n": len(trace.samples),
    }
    blob = json.dumps(header, sort_keys=True).encode() + b"\n"
    blob += np.ascontiguousarray(trace.samples, dtype="<f4").tobytes()
    Path(path).write_bytes(blob)


def read_trace(path):
    from .forward import Trace

    blob = Path(path).read_bytes()
    nl = blob.index(b"\n")
    header = json.loads(blob[:nl].decode())
    samples = np.frombuffer(blob[nl + 1 :], dtype="<f4").astype(float)
    if len(samples) != header["n"]:
        raise ValueError("trace payload length does not match header")
    return Trace(
        station_id=header["station_id"],
        start_time=header["start_time"],
        sampling_rate=header["sampling_rate"],
        samples=samples,
    )


def write_picks_csv(path, picks):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station_id", "time_s", "method", "quality"])
        for p in picks:
            writer.writerow([p.station_id, repr(p.arrival_time), p.method, repr(p.quality)])


def write_convergence_csv(path, rows):
    """Rows of (round, wall_sim_time_s, objective, consensus_error, bytes_total)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "wall_sim_time_s", "objective", "consensus_error", "bytes_total"])
        for row in rows:
            writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3]), row[4]])
