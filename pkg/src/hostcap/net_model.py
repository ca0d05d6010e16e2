"""Radial feeder model and the compact branch-flow matrices derived from it.

A feeder is a tree rooted at the substation (internal index 0). Branches are
indexed by their downstream bus: branch k connects bus k to its parent, for
k = 1..N, stored at array offset k-1. With buses topologically ordered from
the substation, the adjacency matrix A is strictly upper triangular and the
path matrix C = (I - A)^-1 is unit upper triangular with 0/1 entries, so it
is built exactly by walking parent pointers instead of inverting.

Sign conventions used throughout the package:
  * demand vectors are positive for consumption,
  * net injection p = p_g - p_d,
  * branch flow P[k] is the real power flowing from bus k toward its parent
    (negative when the feeder delivers power downstream, positive under
    reverse flow), evaluated at the downstream end of the branch.

Everything internal is per-unit; kW/MW appear only at I/O boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class NetworkError(ValueError):
    """Raised when a feeder description is structurally invalid."""


@dataclass(frozen=True)
class Network:
    """Validated, immutable description of a balanced radial feeder.

    Buses are relabeled internally so that index 0 is the substation and
    every parent index is smaller than its child. ``bus_ids`` maps internal
    indices back to the ids used in the input file.
    """

    s_base_mva: float
    v_base_kv: float
    v0_sq: float                    # substation squared voltage, pu
    v_lo_sq: float                  # lower squared-voltage limit, pu
    v_hi_sq: float                  # upper squared-voltage limit, pu
    bus_ids: tuple                  # external ids, internal order, len N+1
    parent: np.ndarray              # parent[k-1] = internal parent of bus k
    r: np.ndarray                   # branch resistance, pu, len N
    x: np.ndarray                   # branch reactance, pu, len N
    p_demand: np.ndarray            # base real demand, pu, len N
    q_demand: np.ndarray            # base reactive demand, pu, len N
    gen_nodes: np.ndarray           # internal indices (1..N) eligible for HC
    l_max: np.ndarray               # squared-current limits, pu, len N (inf = none)
    p_max: np.ndarray               # branch real-flow limits, pu (inf = none)
    q_max: np.ndarray               # branch reactive-flow limits, pu (inf = none)

    @property
    def n_branches(self) -> int:
        return len(self.r)

    @property
    def n_buses(self) -> int:
        return self.n_branches + 1

    @property
    def z_sq(self) -> np.ndarray:
        return self.r**2 + self.x**2

    def index_of(self, bus_id) -> int:
        """Internal index of an external bus id."""
        try:
            return self.bus_ids.index(bus_id)
        except ValueError:
            raise NetworkError(f"unknown bus id {bus_id!r}") from None

    def gen_index_map(self) -> np.ndarray:
        """N x G 0/1 matrix mapping generation-node injections to buses."""
        m = np.zeros((self.n_branches, len(self.gen_nodes)))
        for col, node in enumerate(self.gen_nodes):
            m[node - 1, col] = 1.0
        return m

    def mw(self, pu) -> np.ndarray:
        return np.asarray(pu) * self.s_base_mva

    def pu(self, mw) -> np.ndarray:
        return np.asarray(mw) / self.s_base_mva


@dataclass(frozen=True)
class CompactMatrices:
    """Topology/impedance matrices of the compact branch-flow formulation.

    All matrices are N x N, per-unit. The sign splits satisfy
    D_X = D_X_pos + D_X_neg and H = H_pos + H_neg exactly, with the *_pos
    parts elementwise nonnegative and the *_neg parts nonpositive.
    """

    E: np.ndarray                   # (N+1) x N incidence, 0/1
    A: np.ndarray                   # branch adjacency (strictly upper triangular)
    C: np.ndarray                   # (I - A)^-1, subtree aggregation
    D_R: np.ndarray
    D_X: np.ndarray
    D_X_pos: np.ndarray
    D_X_neg: np.ndarray
    M_p: np.ndarray
    M_q: np.ndarray
    H: np.ndarray
    H_pos: np.ndarray
    H_neg: np.ndarray
    R: np.ndarray                   # diag(r)
    X: np.ndarray                   # diag(x)
    Z2: np.ndarray                  # diag(|z|^2)


def build_network(spec: dict) -> Network:
    """Validate a feeder description and return an ordered `Network`.

    The first entry of ``spec["buses"]`` is the substation; its demand is
    ignored. Demands are given in kW/kvar and converted to per-unit.

    Raises `NetworkError` on: duplicate branch, cycle, disconnected bus,
    nonpositive impedance magnitude, or malformed limits.
    """
    s_base = float(spec["s_base_mva"])
    v_base = float(spec["v_base_kv"])
    if s_base <= 0 or v_base <= 0:
        raise NetworkError("s_base_mva and v_base_kv must be positive")
    v0 = float(spec.get("v0_pu", 1.0))
    limits = spec.get("limits", {})
    v_lo = float(limits.get("v_lo_pu", 0.95))
    v_hi = float(limits.get("v_hi_pu", 1.05))
    if not (v_lo < v0 < v_hi):
        raise NetworkError(f"need v_lo < v0 < v_hi, got {v_lo} / {v0} / {v_hi}")

    buses = spec["buses"]
    if len(buses) < 2:
        raise NetworkError("a feeder needs at least one branch")
    ids = [b["id"] for b in buses]
    if len(set(ids)) != len(ids):
        raise NetworkError("duplicate bus id")
    by_id = {b["id"]: b for b in buses}
    root = ids[0]

    branches = spec["branches"]
    n = len(buses) - 1
    if len(branches) != n:
        raise NetworkError(
            f"radial feeder with {n + 1} buses needs exactly {n} branches, "
            f"got {len(branches)}: " + ("cycle detected" if len(branches) > n else "disconnected bus")
        )

    adj: dict = {i: [] for i in ids}
    seen_pairs = set()
    for br in branches:
        a, b = br["from"], br["to"]
        if a not in by_id or b not in by_id:
            raise NetworkError(f"branch {a}-{b} references unknown bus")
        key = (a, b) if str(a) <= str(b) else (b, a)
        if a == b or key in seen_pairs:
            raise NetworkError(f"duplicate branch {a}-{b}")
        seen_pairs.add(key)
        r_, x_ = float(br["r_pu"]), float(br["x_pu"])
        if r_ < 0:
            raise NetworkError(f"branch {a}-{b}: negative resistance")
        if r_ * r_ + x_ * x_ <= 0.0:
            raise NetworkError(f"branch {a}-{b}: nonpositive impedance magnitude")
        adj[a].append((b, br))
        adj[b].append((a, br))

    # BFS from the substation assigns the topological order.
    order = [root]
    parent_of = {root: None}
    branch_of = {}
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        for v, br in adj[u]:
            if v in parent_of:
                if v != parent_of[u]:
                    raise NetworkError(f"cycle detected through bus {v}")
                continue
            parent_of[v] = u
            branch_of[v] = br
            order.append(v)
    if len(order) != len(buses):
        missing = sorted(set(map(str, ids)) - set(map(str, order)))
        raise NetworkError(f"disconnected bus(es): {', '.join(missing)}")

    pos = {bid: k for k, bid in enumerate(order)}
    parent = np.array([pos[parent_of[order[k]]] for k in range(1, n + 1)], dtype=int)
    r = np.array([float(branch_of[order[k]]["r_pu"]) for k in range(1, n + 1)])
    x = np.array([float(branch_of[order[k]]["x_pu"]) for k in range(1, n + 1)])

    kw_to_pu = 1.0 / (1000.0 * s_base)
    p_d = np.array([float(by_id[order[k]].get("p_demand_kw", 0.0)) for k in range(1, n + 1)]) * kw_to_pu
    q_d = np.array([float(by_id[order[k]].get("q_demand_kvar", 0.0)) for k in range(1, n + 1)]) * kw_to_pu
    gen = np.array(sorted(pos[b["id"]] for b in buses if b.get("is_generator", False)), dtype=int)
    if gen.size and gen[0] == 0:
        raise NetworkError("the substation cannot be a generation node")

    def _branch_limit(field_name, default):
        vals = np.full(n, default)
        for k in range(1, n + 1):
            br = branch_of[order[k]]
            if field_name in br:
                vals[k - 1] = float(br[field_name])
        return vals

    net = Network(
        s_base_mva=s_base,
        v_base_kv=v_base,
        v0_sq=v0 * v0,
        v_lo_sq=v_lo * v_lo,
        v_hi_sq=v_hi * v_hi,
        bus_ids=tuple(order),
        parent=parent,
        r=r,
        x=x,
        p_demand=p_d,
        q_demand=q_d,
        gen_nodes=gen,
        l_max=_branch_limit("l_max_pu", np.inf),
        p_max=_branch_limit("p_max_pu", np.inf),
        q_max=_branch_limit("q_max_pu", np.inf),
    )
    for arr in (net.parent, net.r, net.x, net.p_demand, net.q_demand,
                net.gen_nodes, net.l_max, net.p_max, net.q_max):
        arr.setflags(write=False)
    return net


def load_network(path) -> Network:
    """Read a feeder JSON file (see README for the schema)."""
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return build_network(spec)


def compact_matrices(net: Network) -> CompactMatrices:
    """Construct every derived matrix of the compact branch-flow model."""
    n = net.n_branches
    E = np.zeros((n + 1, n))
    for k in range(1, n + 1):
        E[k, k - 1] = 1.0
        E[net.parent[k - 1], k - 1] = 1.0

    # A = [0 I] E - I: A[k, m] = 1 iff branch m hangs directly below bus k+1.
    A = E[1:, :] - np.eye(n)

    # C[k, m] = 1 iff branch m+1 lies in the subtree rooted at bus k+1
    # (including itself); exact unit-triangular inverse of (I - A).
    C = np.eye(n)
    for m in range(1, n + 1):
        a = net.parent[m - 1]
        while a != 0:
            C[a - 1, m - 1] = 1.0
            a = net.parent[a - 1]

    err = np.max(np.abs(C @ (np.eye(n) - A) - np.eye(n)))
    if not err < 1e-12:
        raise NetworkError("singular (I - A): topology is not a tree")

    R = np.diag(net.r)
    X = np.diag(net.x)
    Z2 = np.diag(net.z_sq)
    D_R = C @ A @ R
    D_X = C @ A @ X
    if np.any(D_R < 0):
        # Negative entries would invalidate the envelope construction, which
        # relies on D_R >= 0 when swapping l bounds into the P proxies.
        raise NetworkError("D_R has negative entries; check branch resistances")
    M_p = 2.0 * C.T @ R @ C
    M_q = 2.0 * C.T @ X @ C
    H = C.T @ (2.0 * (R @ D_R + X @ D_X) + Z2)

    mats = CompactMatrices(
        E=E, A=A, C=C,
        D_R=D_R,
        D_X=D_X,
        D_X_pos=np.maximum(D_X, 0.0),
        D_X_neg=np.minimum(D_X, 0.0),
        M_p=M_p,
        M_q=M_q,
        H=H,
        H_pos=np.maximum(H, 0.0),
        H_neg=np.minimum(H, 0.0),
        R=R, X=X, Z2=Z2,
    )
    for arr in vars(mats).values():
        arr.setflags(write=False)
    return mats


def dump_matrices(mats: CompactMatrices) -> dict:
    """JSON-serializable dump of every compact matrix (lists of rows)."""
    return {name: np.asarray(m).tolist() for name, m in vars(mats).items()}


def fixture_path(name: str) -> Path:
    """Path of a bundled data fixture (e.g. ``fourbus.json``)."""
    p = Path(__file__).parent / "fixtures" / name
    if not p.exists():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return p
