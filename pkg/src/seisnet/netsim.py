"""Deterministic discrete-event simulation of the wireless sensor network.

Events are ordered by (timestamp, monotone sequence number), so identical
seeds and command sequences replay identical traces byte for byte.
Bandwidth is accounted (header 32 bytes + 8 bytes per payload element),
not enforced.  Multi-hop routing is deliberately unsupported; unicast to a
non-neighbor raises.
"""

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, InvalidRouteError, InvalidTopologyError

__all__ = ["BROADCAST", "Topology", "Message", "RunStats", "NetworkSimulator", "build_topology"]

BROADCAST = -1
HEADER_BYTES = 32
BYTES_PER_ELEMENT = 8


@dataclass(frozen=True)
class Topology:
    """Undirected geometric graph with per-edge latency and drop probability."""

    nodes: tuple
    edges: dict  # (a, b) sorted tuple -> {"latency": s, "drop_prob": p}
    positions: dict
    connected: bool

    def neighbors(self, node):
        out = []
        for a, b in self.edges:
            if a == node:
                out.append(b)
            elif b == node:
                out.append(a)
        return sorted(out)

    def has_edge(self, a, b):
        return (min(a, b), max(a, b)) in self.edges


def build_topology(stations, comm_range, latency_base=5e-3, drop_prob=0.0):
    """Geometric graph: edge iff station distance <= comm_range.

    Default latency is 5 ms plus propagation at 2e8 m/s.  A disconnected
    result is returned with ``connected=False`` rather than raised; callers
    that need connectivity (consensus) must check.
    """
    if comm_range <= 0:
        raise InvalidArgumentError("comm_range must be > 0")
    nodes = tuple(s.id for s in stations)
    if len(set(nodes)) != len(nodes):
        raise InvalidArgumentError("station ids must be unique")
    positions = {s.id: tuple(s.position) for s in stations}
    edges = {}
    for i, a in enumerate(stations):
        for b in stations[i + 1 :]:
            d = float(np.linalg.norm(np.subtract(a.position, b.position)))
            if d <= comm_range and a.id != b.id:
                key = (min(a.id, b.id), max(a.id, b.id))
                edges[key] = {
                    "latency": latency_base + d / 2e8,
                    "drop_prob": float(drop_prob),
                }
    connected = _is_connected(nodes, edges)
    return Topology(nodes=nodes, edges=edges, positions=positions, connected=connected)


def _is_connected(nodes, edges):
    if not nodes:
        return False
    adj = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        for m in adj[stack.pop()]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return len(seen) == len(nodes)


@dataclass(frozen=True)
class Message:
    """One wire unit; size is computed from the payload, never asserted."""

    src: int
    dst: int
    kind: str
    payload: object
    payload_len: int
    send_time: float

    @property
    def size_bytes(self):
        return HEADER_BYTES + BYTES_PER_ELEMENT * self.payload_len


@dataclass
class RunStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    in_flight: int = 0
    bytes_total: int = 0
    sim_time: float = 0.0
    per_edge_bytes: dict = field(default_factory=dict)

    def check(self):
        if self.delivered + self.dropped + self.in_flight != self.sent:
            raise AssertionError("message ledger out of balance")
        return self

    def snapshot(self):
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "bytes_total": self.bytes_total,
            "sim_time": self.sim_time,
        }


def _payload_len(payload):
    if payload is None:
        return 0
    if isinstance(payload, np.ndarray):
        return int(payload.size)
    if isinstance(payload, (int, float)):
        return 1
    return len(payload)


class NetworkSimulator:
    """Single-threaded event loop over a Topology.

    ``step_until`` processes events in (time, seq) order and returns the
    messages delivered in that span; commands scheduled via
    ``schedule_command`` run at their timestamp between deliveries.
    """

    def __init__(self, topology, seed=0, trace_log=None):
        self.topology = topology
        self.time = 0.0
        self._seq = 0
        self._heap = []
        self._failed = set()
        self._rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x4E455453]))
        self.stats = RunStats()
        self._trace = trace_log  # file-like, JSON lines
        self.on_deliver = None  # optional in-loop delivery callback

    # -- wiring ---------------------------------------------------------

    def _edge(self, a, b):
        key = (min(a, b), max(a, b))
        edge = self.topology.edges.get(key)
        if edge is None:
            raise InvalidArgumentError(f"no edge between {a} and {b}")
        return key, edge

    def live_neighbors(self, node):
        out = []
        for n in self.topology.neighbors(node):
            key = (min(node, n), max(node, n))
            if key not in self._failed:
                out.append(n)
        return out

    def fail_link(self, a, b):
        key, _ = self._edge(a, b)
        self._failed.add(key)
        self._log({"event": "fail_link", "edge": list(key), "time": self.time})

    def restore_link(self, a, b):
        key, _ = self._edge(a, b)
        self._failed.discard(key)
        self._log({"event": "restore_link", "edge": list(key), "time": self.time})

    # -- sending --------------------------------------------------------

    def send(self, src, dst, payload, kind="data"):
        """Unicast to a live neighbor; dropped per the edge's probability."""
        key, edge = self._edge(src, dst)
        if key in self._failed:
            raise InvalidRouteError(f"link {key} is down")
        msg = Message(
            src=src,
            dst=dst,
            kind=kind,
            payload=payload,
            payload_len=_payload_len(payload),
            send_time=self.time,
        )
        self._charge(key, msg)
        if self._rng.random() < edge["drop_prob"]:
            self.stats.dropped += 1
            self._log({"event": "drop", "src": src, "dst": dst, "time": self.time})
        else:
            self.stats.in_flight += 1
            self._push(self.time + edge["latency"], ("deliver", msg))
        return msg

    def broadcast(self, src, payload, kind="data"):
        """One delivery per live neighbor, charged once per neighbor."""
        messages = []
        for dst in self.live_neighbors(src):
            messages.append(self.send(src, dst, payload, kind=kind))
        return messages

    def schedule_command(self, time, fn):
        """Run ``fn(sim)`` at ``time``, serialized with deliveries."""
        if time < self.time:
            raise InvalidArgumentError("cannot schedule a command in the past")
        self._push(time, ("command", fn))

    # -- event loop -----------------------------------------------------

    def step_until(self, t):
        """Advance to simulated time ``t``; returns delivered messages."""
        if t < self.time:
            raise InvalidArgumentError("time must not run backwards")
        delivered = []
        while self._heap and self._heap[0][0] <= t:
            when, _, (kind, data) = heapq.heappop(self._heap)
            self.time = when
            if kind == "deliver":
                self.stats.in_flight -= 1
                self.stats.delivered += 1
                if self.on_deliver is not None:
                    self.on_deliver(data)
                delivered.append(data)
                self._log(
                    {
                        "event": "deliver",
                        "src": data.src,
                        "dst": data.dst,
                        "kind": data.kind,
                        "time": when,
                    }
                )
            else:
                data(self)
        self.time = t
        self.stats.sim_time = self.time
        return delivered

    def run_all(self):
        """Drain every pending event; returns delivered messages."""
        delivered = []
        while self._heap:
            horizon = self._heap[0][0]
            delivered.extend(self.step_until(horizon))
        return delivered

    def get_stats(self):
        self.stats.sim_time = self.time
        return self.stats.check()

    # -- internals ------------------------------------------------------

    def _push(self, when, item):
        heapq.heappush(self._heap, (when, self._seq, item))
        self._seq += 1

    def _charge(self, key, msg):
        self.stats.sent += 1
        self.stats.bytes_total += msg.size_bytes
        self.stats.per_edge_bytes[key] = (
            self.stats.per_edge_bytes.get(key, 0) + msg.size_bytes
        )

    def _log(self, record):
        if self._trace is not None:
            self._trace.write(json.dumps(record, sort_keys=True) + "\n")


def require_connected(topology):
    if not topology.connected:
        raise InvalidTopologyError("topology is disconnected")
    return topology
