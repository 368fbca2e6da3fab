"""Decentralized solvers for the ridge ray system with neighbor-only traffic.

Three algorithm families: synchronous decentralized gradient descent with
Metropolis mixing, asynchronous broadcast gossip with local iterations, and
per-node randomized Kaczmarz sweeps combined by component averaging.  All
of them drive their traffic through the network simulator so the byte
ledger is real, and all are deterministic for a fixed seed because every
random stream is derived from (seed, round, node).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, InvalidArgumentError, InvalidTopologyError
from .tomo import TomoModel

__all__ = [
    "ConsensusProblem",
    "distributed_rounds",
    "NodeState",
    "MixingMatrix",
    "StoppingRule",
    "ConsensusStats",
    "metropolis_weights",
    "dgd_sync_round",
    "async_broadcast_step",
    "kaczmarz_cav_round",
    "consensus_error",
    "run_distributed",
]

ALGORITHMS = ("DGD_SYNC", "ASYNC_BROADCAST", "KACZMARZ_CAV")

DEFAULT_CONFIG = {
    "gamma0": None,  # None -> spectral bound from the per-node Hessians
    "step_schedule": "sqrt",  # gamma_k = gamma0 mult / sqrt(k); or "constant"
    "step_mult": 1.0,
    "step_tau": None,  # sqrt knee: gamma_k = gamma0 mult / sqrt(1 + (k-1)/tau)
    "local_iters": 10,
    "local_update": "gradient",  # or "solve"
    "beta": 0.5,
    "wake_mean": 0.02,
    "round_interval": 0.02,
    "relaxation": 1.0,
    "relaxation_decay": 0.0,  # omega_k = relaxation / (1 + decay * k)
    "sweeps_per_round": 1,
    "seed": 0,
}


@dataclass
class NodeState:
    """Local estimate and bookkeeping for one node."""

    node_id: int
    x: np.ndarray
    iteration: int = 0
    last_broadcast: float = 0.0


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic averaging weights on the live topology."""

    nodes: tuple
    W: np.ndarray

    def __post_init__(self):
        W = self.W
        if not np.allclose(W, W.T):
            raise InvalidArgumentError("mixing matrix must be symmetric")
        if np.any(W < -1e-12):
            raise InvalidArgumentError("mixing weights must be nonnegative")
        if not np.allclose(W.sum(axis=1), 1.0):
            raise InvalidArgumentError("mixing rows must sum to 1")

    def index(self, node):
        return self.nodes.index(node)


def metropolis_weights(adjacency):
    """Metropolis-Hastings weights: w_ij = 1/(1+max(deg_i, deg_j)).

    ``adjacency`` maps node id to its neighbor list; the graph must be
    connected.
    """
    nodes = tuple(sorted(adjacency))
    deg = {i: len(adjacency[i]) for i in nodes}
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        for m in adjacency[stack.pop()]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    if len(seen) != len(nodes):
        raise InvalidTopologyError("mixing requires a connected graph")
    p = len(nodes)
    pos = {n: k for k, n in enumerate(nodes)}
    W = np.zeros((p, p))
    for i in nodes:
        for j in adjacency[i]:
            if j == i:
                continue
            W[pos[i], pos[j]] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for k in range(p):
        W[k, k] = 1.0 - W[k].sum()
    return MixingMatrix(nodes=nodes, W=W)


class ConsensusProblem:
    """Row partition of a ridge system across nodes.

    Each node i holds rows (A_i, t_i) plus its lam/p share of the ridge
    term, so the sum of the node objectives equals the centralized one.
    """

    def __init__(self, partition, lam, L, s_ref=None, grid=None):
        self.node_ids = tuple(sorted(partition))
        self.lam = float(lam)
        self.L = int(L)
        self.s_ref = np.zeros(L) if s_ref is None else np.asarray(s_ref, float)
        self.grid = grid
        self.A = {}
        self.t = {}
        for node, (A_i, t_i) in partition.items():
            A_dense = np.asarray(
                A_i.toarray() if hasattr(A_i, "toarray") else A_i, dtype=float
            )
            if A_dense.shape[1] != L:
                raise InvalidArgumentError("partition width must equal L")
            self.A[node] = A_dense
            self.t[node] = np.asarray(t_i, dtype=float)
        self.p = len(self.node_ids)
        # per-column data-row nonzero counts drive component averaging
        self.col_counts = {
            i: (self.A[i] != 0.0).sum(axis=0).astype(float) for i in self.node_ids
        }
        self.row_norms2 = {
            i: (self.A[i] ** 2).sum(axis=1) for i in self.node_ids
        }
        self._solve_cache = {}

    @classmethod
    def from_system(cls, system, node_of_row):
        """Partition a TomoSystem by a per-row owner list (disjoint, complete)."""
        owners = {}
        for r, node in enumerate(node_of_row):
            owners.setdefault(node, []).append(r)
        partition = {
            node: (system.A[rows, :], system.t[rows]) for node, rows in owners.items()
        }
        return cls(
            partition,
            lam=system.lam,
            L=system.n_cells,
            s_ref=system.s_ref,
            grid=system.grid,
        )

    def data_free(self, node):
        return self.A[node].shape[0] == 0

    def gradient(self, node, x):
        A, t = self.A[node], self.t[node]
        g = 2.0 * (self.lam / self.p) * (x - self.s_ref)
        if A.shape[0]:
            g = g + 2.0 * (A.T @ (A @ x - t))
        return g

    def node_objective(self, node, x):
        A, t = self.A[node], self.t[node]
        val = (self.lam / self.p) * float(np.sum((x - self.s_ref) ** 2))
        if A.shape[0]:
            val += float(np.sum((A @ x - t) ** 2))
        return val

    def objective(self, x):
        return sum(self.node_objective(i, x) for i in self.node_ids)

    def local_solve(self, node, x):
        """Exact local solve: minimum-change least squares on the local rows.

        Stacks the node's data rows with its sqrt(lam/p) ridge rows and
        moves x by the minimum-norm correction, which for lam=0 is the
        projection onto the local solution set.
        """
        key = node
        if key not in self._solve_cache:
            A = self.A[node]
            mu = np.sqrt(self.lam / self.p) if self.lam > 0 else 0.0
            if mu > 0:
                stacked = np.vstack([A, mu * np.eye(self.L)])
            else:
                stacked = A
            self._solve_cache[key] = (np.linalg.pinv(stacked), mu)
        pinv, mu = self._solve_cache[key]
        r_data = self.t[node] - self.A[node] @ x
        if mu > 0:
            r = np.concatenate([r_data, mu * (self.s_ref - x)])
        else:
            r = r_data
        return x + pinv @ r

    def default_gamma0(self):
        """Stable step bound from the largest per-node Hessian eigenvalue,
        estimated by a short deterministic power iteration."""
        L_max = self.lam / self.p
        for A in self.A.values():
            if not A.size:
                continue
            v = np.ones(self.L) / np.sqrt(self.L)
            for _ in range(30):
                w = A.T @ (A @ v)
                n = np.linalg.norm(w)
                if n == 0:
                    break
                v = w / n
            L_max = max(L_max, float(v @ (A.T @ (A @ v))) + self.lam / self.p)
        return 1.0 / (2.2 * 2.0 * L_max)




def _step_size(cfg, gamma0, k):
    g = gamma0 * cfg.get("step_mult", 1.0)
    if cfg["step_schedule"] == "constant":
        return g
    tau = cfg.get("step_tau")
    if tau:
        return g / np.sqrt(1.0 + (k - 1) / tau)
    return g / np.sqrt(k)

def consensus_error(states):
    """max_i ||x_i - mean|| / max(1, ||mean||)."""
    if not states:
        raise InvalidArgumentError("need at least one node state")
    xs = np.stack([s.x for s in states.values()])
    mean = xs.mean(axis=0)
    dev = np.linalg.norm(xs - mean[None, :], axis=1).max()
    return float(dev / max(1.0, np.linalg.norm(mean)))


def mean_model(states):
    xs = np.stack([s.x for s in states.values()])
    return xs.mean(axis=0)


def dgd_sync_round(states, mixing, problem, step):
    """One synchronous round: mix neighbor estimates, step down the local
    gradient evaluated at the pre-mixing state."""
    nodes = mixing.nodes
    X = np.stack([states[i].x for i in nodes])
    mixed = mixing.W @ X
    out = {}
    for k, i in enumerate(nodes):
        g = problem.gradient(i, states[i].x)
        out[i] = NodeState(
            node_id=i,
            x=mixed[k] - step * g,
            iteration=states[i].iteration + 1,
            last_broadcast=states[i].last_broadcast,
        )
    return out


def async_broadcast_step(states, waking_node, neighbors, problem, config=None, now=0.0):
    """Waking node runs local iterations then broadcasts; each neighbor j
    averages x_j <- beta x_j + (1-beta) x_i.  The sender is unchanged by
    its own broadcast."""
    cfg = {**DEFAULT_CONFIG, **(config or {})}
    beta = cfg["beta"]
    node = states[waking_node]
    x = node.x.copy()
    if cfg["local_update"] == "solve":
        x = problem.local_solve(waking_node, x)
        node.iteration += 1
    else:
        gamma0 = cfg["gamma0"] or problem.default_gamma0()
        for _ in range(cfg["local_iters"]):
            node.iteration += 1
            x = x - _step_size(cfg, gamma0, node.iteration) * problem.gradient(waking_node, x)
    node.x = x
    node.last_broadcast = now
    for j in neighbors:
        if j == waking_node:
            continue
        states[j].x = beta * states[j].x + (1.0 - beta) * x
    return states


def _kaczmarz_sweep(problem, node, x, omega, rng, passes=1):
    """Randomized Kaczmarz sweep: a full pass over the node's stacked rows
    (data rows plus its sqrt(lam/p) ridge rows) in random order.

    Projecting onto a ridge row moves that cell toward the reference by a
    factor omega, independent of lam's magnitude, which is why relaxation
    must decay on inconsistent systems.
    """
    A, t = problem.A[node], problem.t[node]
    m = A.shape[0]
    has_reg = problem.lam > 0
    n_rows = m + (problem.L if has_reg else 0)
    if n_rows == 0:
        return x
    norms2 = problem.row_norms2[node]
    x = x.copy()
    for _ in range(passes):
        for r in rng.permutation(n_rows):
            if r < m:
                a = A[r]
                resid = t[r] - a @ x
                x += (omega * resid / norms2[r]) * a
            else:
                cell = r - m
                x[cell] += omega * (problem.s_ref[cell] - x[cell])
    return x


def kaczmarz_cav_round(states, problem, omega=1.0, rng=None, round_index=0, seed=0, passes=1):
    """One sweep per node followed by component averaging.

    Component ell is combined across nodes with weights equal to each
    node's data-row nonzero count in column ell and redistributed; columns
    nobody covers fall back to a uniform average.
    """
    nodes = problem.node_ids
    swept = {}
    for i in nodes:
        node_rng = rng or np.random.default_rng(
            np.random.SeedSequence([int(seed), int(round_index), int(i)])
        )
        swept[i] = _kaczmarz_sweep(problem, i, states[i].x, omega, node_rng, passes=passes)
    counts = np.stack([problem.col_counts[i] for i in nodes])
    X = np.stack([swept[i] for i in nodes])
    denom = counts.sum(axis=0)
    num = (counts * X).sum(axis=0)
    uniform = X.mean(axis=0)
    combined = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), uniform)
    out = {}
    for i in nodes:
        out[i] = NodeState(
            node_id=i,
            x=combined.copy(),
            iteration=states[i].iteration + 1,
            last_broadcast=states[i].last_broadcast,
        )
    return out


@dataclass(frozen=True)
class StoppingRule:
    """Stop when the model stops moving and the network agrees, or at the cap."""

    max_rounds: int = 2000
    model_change_tol: float = 1e-6
    consensus_tol: float = 1e-4
    window: int = 10


@dataclass
class ConsensusStats:
    algorithm: str = ""
    rounds: int = 0
    messages: int = 0
    bytes: int = 0
    final_consensus_error: float = np.inf
    final_objective: float = np.inf
    converged: bool = False
    log: list = field(default_factory=list)  # (round, time, objective, cons_err, bytes)

    def snapshot(self):
        return {
            "algorithm": self.algorithm,
            "rounds": self.rounds,
            "messages": self.messages,
            "bytes": self.bytes,
            "final_consensus_error": self.final_consensus_error,
            "final_objective": self.final_objective,
            "converged": self.converged,
        }


def _bfs_tree(adjacency, root):
    """Parent map of a BFS tree over the live adjacency."""
    parent = {root: None}
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for v in sorted(adjacency[u]):
                if v not in parent:
                    parent[v] = u
                    nxt.append(v)
        frontier = nxt
    if len(parent) != len(adjacency):
        raise InvalidTopologyError("aggregation tree requires a connected graph")
    return parent


def distributed_rounds(problem, algorithm, net, config=None, states=None):
    """Generator driving one algorithm round at a time through the simulator.

    Yields (round_index, states) after every round; the caller owns the
    stopping policy.  Passing ``states`` warm-starts from a previous run
    (iteration counters included), which is how live parameter changes
    restart the solve without losing the current estimate.
    """
    if algorithm not in ALGORITHMS:
        raise InvalidArgumentError(f"unknown algorithm {algorithm!r}")
    cfg = {**DEFAULT_CONFIG, **(config or {})}
    nodes = problem.node_ids
    if states is None:
        states = {i: NodeState(node_id=i, x=problem.s_ref.copy()) for i in nodes}
    gamma0 = cfg["gamma0"] or problem.default_gamma0()
    interval = cfg["round_interval"]

    if algorithm == "ASYNC_BROADCAST":
        wake_rng = {
            i: np.random.default_rng(np.random.SeedSequence([int(cfg["seed"]), 0xA57, int(i)]))
            for i in nodes
        }

        def deliver(msg):
            if msg.kind != "model":
                return
            j = msg.dst
            states[j].x = cfg["beta"] * states[j].x + (1.0 - cfg["beta"]) * msg.payload

        def wake(node_id):
            def fn(sim):
                st = states[node_id]
                x = st.x.copy()
                if cfg["local_update"] == "solve":
                    x = problem.local_solve(node_id, x)
                    st.iteration += 1
                else:
                    for _ in range(cfg["local_iters"]):
                        st.iteration += 1
                        x = x - _step_size(cfg, gamma0, st.iteration) * problem.gradient(
                            node_id, x
                        )
                st.x = x
                st.last_broadcast = sim.time
                sim.broadcast(node_id, x.copy(), kind="model")
                sim.schedule_command(
                    sim.time + wake_rng[node_id].exponential(cfg["wake_mean"]), fn
                )

            return fn

        net.on_deliver = deliver
        for i in nodes:
            net.schedule_command(
                net.time + wake_rng[i].exponential(cfg["wake_mean"]), wake(i)
            )

    # per-node view of each neighbor's latest received estimate; with
    # lossless links these are always fresh and the round equals
    # dgd_sync_round exactly, with drops the stale value is reused
    views = {i: {j: states[j].x.copy() for j in nodes if j != i} for i in nodes}

    k = 0
    try:
        while True:
            k += 1
            if algorithm == "DGD_SYNC":
                adjacency = {i: net.live_neighbors(i) for i in nodes}
                mixing = metropolis_weights(adjacency)
                for i in nodes:
                    net.broadcast(i, states[i].x, kind="model")
                    states[i].last_broadcast = net.time
                for msg in net.step_until(net.time + interval):
                    if msg.kind == "model":
                        views[msg.dst][msg.src] = msg.payload
                step = _step_size(cfg, gamma0, k)
                pos = {n: idx for idx, n in enumerate(mixing.nodes)}
                new_states = {}
                for i in nodes:
                    V = np.stack(
                        [states[j].x if j == i else views[i][j] for j in mixing.nodes]
                    )
                    mixed = mixing.W[pos[i]] @ V
                    new_states[i] = NodeState(
                        node_id=i,
                        x=mixed - step * problem.gradient(i, states[i].x),
                        iteration=states[i].iteration + 1,
                        last_broadcast=states[i].last_broadcast,
                    )
                states = new_states
            elif algorithm == "ASYNC_BROADCAST":
                net.step_until(net.time + interval)
            else:  # KACZMARZ_CAV
                omega = cfg["relaxation"] / (1.0 + cfg["relaxation_decay"] * k)
                states = kaczmarz_cav_round(
                    states,
                    problem,
                    omega=omega,
                    round_index=k,
                    seed=cfg["seed"],
                    passes=cfg["sweeps_per_round"],
                )
                adjacency = {i: net.live_neighbors(i) for i in nodes}
                parent = _bfs_tree(adjacency, nodes[0])
                payload = states[nodes[0]].x
                for child, par in parent.items():
                    if par is not None:
                        net.send(child, par, payload.copy(), kind="cav-up")
                        net.send(par, child, payload.copy(), kind="cav-down")
                net.step_until(net.time + interval)
            yield k, states
    finally:
        if algorithm == "ASYNC_BROADCAST":
            net.on_deliver = None


def run_distributed(problem, algorithm, net, stop=None, config=None, on_round=None):
    """Drive one algorithm inside the network simulator until the stop rule.

    Returns (TomoModel of the consensus mean, ConsensusStats).  Raises
    ConvergenceFailure carrying the best model when max_rounds passes
    without meeting the tolerance.
    """
    stop = stop or StoppingRule()
    stats = ConsensusStats(algorithm=algorithm)
    changes = []
    prev_mean = None
    states = None
    rounds = distributed_rounds(problem, algorithm, net, config=config)
    for k, states in rounds:
        mean = mean_model(states)
        cons = consensus_error(states)
        if prev_mean is None:
            changes.append(np.inf)
        else:
            denom = max(1.0, float(np.linalg.norm(mean)))
            changes.append(float(np.linalg.norm(mean - prev_mean)) / denom)
        prev_mean = mean
        stats.rounds = k
        net_stats = net.get_stats()
        obj = problem.objective(mean)
        stats.log.append((k, net.time, obj, cons, net_stats.bytes_total))
        if on_round is not None:
            on_round(k, mean, cons, obj, net_stats)
        window = changes[-stop.window :]
        if (
            len(changes) >= stop.window
            and max(window) < stop.model_change_tol
            and cons < stop.consensus_tol
        ):
            stats.converged = True
            break
        if k >= stop.max_rounds:
            break
    rounds.close()

    net_stats = net.get_stats()
    stats.messages = net_stats.sent
    stats.bytes = net_stats.bytes_total
    mean = mean_model(states)
    stats.final_consensus_error = consensus_error(states)
    stats.final_objective = problem.objective(mean)
    model = TomoModel(grid=problem.grid, slowness=mean, stats={"rounds": stats.rounds})
    if not stats.converged:
        raise ConvergenceFailure(
            f"{algorithm} hit max_rounds={stop.max_rounds} "
            f"(consensus_error={stats.final_consensus_error:.2e})",
            best=model,
            stats=stats,
        )
    return model, stats
