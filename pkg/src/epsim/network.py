"""Brickwork circuits compiled into channel networks on the bond space.

``build_network`` turns an initial MPS, a brickwork circuit, and a product
observable into a two-dimensional lattice of tensors: the state row, one
row of two-site gate halves per circuit layer (each gate split through the
operator-Schmidt decomposition of its Choi vector), the observable row at
the conjugation interface, and the mirrored conjugate rows.  Horizontal
wires carry bond (entanglement) indices, vertical wires carry physical
indices.  Evaluation then happens entirely on the entanglement space:

* :func:`evaluate_exact` sweeps the lattice column by column,
* :func:`evaluate_regions` contracts disjoint node regions independently
  and joins them along the cut wires,
* :func:`evaluate_sampled` simulates the heralded-measurement realization,
  where every wire is a binary Bell measurement {|w><w|, 1 - |w><w|} on a
  pair of prepared qudits and only the observable outcome is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import serialize
from .channels import bell_vector
from .errors import (
    CanonicalFormError,
    SamplingError,
    ShapeError,
    SizeGuardError,
)
from .linalg import as_matrix, dagger, is_unitary, svd
from .mps import MPS

CONTRACTION_GUARD = 2**24
BRANCH_GUARD = 2**20


# ---------------------------------------------------------------------------
# Brickwork circuits


@dataclass(frozen=True)
class BrickworkCircuit:
    """Layers of non-overlapping nearest-neighbor two-site gates."""

    n_sites: int
    layers: tuple  # per layer: tuple of (site, gate) with gate on (site, site+1)
    phys_dim: int = 2

    def __post_init__(self):
        d = self.phys_dim
        layers = []
        for layer in self.layers:
            entries = []
            used = set()
            for site, gate in layer:
                gate = as_matrix(gate)
                if not 0 <= site < self.n_sites - 1:
                    raise ShapeError(f"gate site {site} out of range")
                if gate.shape != (d * d, d * d):
                    raise ShapeError(
                        f"gate shape {gate.shape} != ({d * d}, {d * d})"
                    )
                if not is_unitary(gate, tol=1e-10):
                    raise ShapeError(f"gate at site {site} is not unitary")
                if site in used or site + 1 in used:
                    raise ShapeError(f"overlapping gates in a layer at site {site}")
                used.update((site, site + 1))
                entries.append((site, gate))
            layers.append(tuple(sorted(entries, key=lambda e: e[0])))
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_gates(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "phys_dim": self.phys_dim,
            "layers": [
                [{"site": site, "gate": serialize.cmat_nested(gate)} for site, gate in layer]
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BrickworkCircuit":
        layers = tuple(
            tuple((int(e["site"]), serialize.parse_cmat_nested(e["gate"])) for e in layer)
            for layer in data["layers"]
        )
        return cls(int(data["n_sites"]), layers, int(data.get("phys_dim", 2)))


@dataclass(frozen=True)
class ResourceEstimate:
    state_qudits: int
    evolution_qudits: int
    total_gates: int
    sample_cost_order: str


def resources(circuit: BrickworkCircuit) -> ResourceEstimate:
    """Qudit bookkeeping of the heralded realization.

    ``total_gates`` is the nominal full-brickwork count L * floor(N/2);
    six qudits per gate, floor(N/2) for the initial state.
    """
    half = circuit.n_sites // 2
    m = circuit.n_layers * half
    return ResourceEstimate(
        state_qudits=half,
        evolution_qudits=6 * m,
        total_gates=m,
        sample_cost_order="O(N^2 M L)",
    )


# ---------------------------------------------------------------------------
# Gate compilation: two-site gate -> pair of bond-connected channel halves


@dataclass(frozen=True)
class GateChannelPair:
    """Operator-Schmidt split u = sum_m left[m] (x) right[m].

    The halves are trace-scaled Kraus sets, not channels on their own: each
    carries a scalar weight making it trace non-increasing, and the product
    of the recorded weights restores the exact gate.
    """

    left_ops: tuple
    right_ops: tuple
    bond_dim: int
    gate: np.ndarray = field(repr=False)

    def recombined(self) -> np.ndarray:
        d = self.left_ops[0].shape[0]
        u4 = np.einsum("mik,mjl->ijkl", np.stack(self.left_ops), np.stack(self.right_ops))
        return u4.reshape(d * d, d * d)

    def weighted_half(self, side: str):
        """(normalized_ops, weight): ops scaled so sum K^dag K <= 1."""
        ops = self.left_ops if side == "left" else self.right_ops
        gram = sum(dagger(k) @ k for k in ops)
        weight = float(np.sqrt(np.max(np.linalg.eigvalsh(gram))))
        return tuple(k / weight for k in ops), weight


def compile_gate(u: np.ndarray) -> GateChannelPair:
    """Split a two-site gate through the SVD of its Choi vector."""
    u = as_matrix(u)
    d = math.isqrt(u.shape[0])
    if d * d != u.shape[0] or u.shape[0] != u.shape[1]:
        raise ShapeError(f"expected a d^2 x d^2 gate, got {u.shape}")
    if not is_unitary(u, tol=1e-10):
        raise ShapeError("gate is not unitary")
    # Group (out_1, in_1) rows vs (out_2, in_2) columns of the gate tensor.
    r = u.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    x, s, yh = svd(r)
    keep = int(np.sum(s > 1e-12))
    left = tuple(
        np.sqrt(s[m]) * x[:, m].reshape(d, d) for m in range(keep)
    )
    right = tuple(
        np.sqrt(s[m]) * yh[m, :].reshape(d, d) for m in range(keep)
    )
    pair = GateChannelPair(left, right, keep, u)
    if np.max(np.abs(pair.recombined() - u)) > 1e-10:
        raise ShapeError("gate split failed to recombine")
    return pair


# ---------------------------------------------------------------------------
# Network construction


@dataclass(frozen=True)
class NetNode:
    nid: int
    kind: str  # state | gate | obs | boundary | state* | gate* | boundary*
    row: int
    col: int
    tensor: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class NetWire:
    wid: int
    ends: tuple  # ((nid, axis), (nid, axis))
    orientation: str  # "h" | "v"
    dim: int


class ChannelNetwork:
    """The compiled lattice; see the module docstring for the layout."""

    def __init__(self, psi: MPS, circuit: BrickworkCircuit, observables: dict):
        self.psi = psi
        self.circuit = circuit
        self.observables = {int(k): as_matrix(v) for k, v in observables.items()}
        self.d = circuit.phys_dim
        self.gate_pairs = {}  # (layer, site) -> GateChannelPair
        self.layer_mpos = []  # [layer][site] -> (a, b, out, in)
        self._compile()
        self.nodes: list[NetNode] = []
        self.wires: list[NetWire] = []
        self._build_graph()

    # -- compilation of per-layer MPO rows

    def _compile(self):
        n, d = self.circuit.n_sites, self.d
        ident = np.eye(d, dtype=complex).reshape(1, 1, d, d)
        for l, layer in enumerate(self.circuit.layers):
            row = [ident] * n
            for site, gate in layer:
                pair = compile_gate(gate)
                self.gate_pairs[(l, site)] = pair
                g = pair.bond_dim
                left = np.zeros((1, g, d, d), dtype=complex)
                right = np.zeros((g, 1, d, d), dtype=complex)
                for m in range(g):
                    left[0, m] = pair.left_ops[m]
                    right[m, 0] = pair.right_ops[m]
                row[site] = left
                row[site + 1] = right
            self.layer_mpos.append(row)

    # -- doubled node/wire graph

    def _build_graph(self):
        n = self.circuit.n_sites
        nl = self.circuit.n_layers
        obs_row = nl + 1
        last_row = 2 * nl + 2
        grid = {}

        def add(kind, row, col, tensor):
            node = NetNode(len(self.nodes), kind, row, col, np.asarray(tensor, complex))
            self.nodes.append(node)
            grid[(row, col)] = node
            return node

        for c in range(n):
            add("state", 0, c, self.psi.tensors[c])
        add("boundary", 0, n, self.psi.boundary)
        for l in range(nl):
            for c in range(n):
                add("gate", l + 1, c, self.layer_mpos[l][c])
        for c in range(n):
            obs = self.observables.get(c, np.eye(self.d))
            add("obs", obs_row, c, obs.T)  # legs (ket, conj)
        for l in range(nl):
            for c in range(n):
                add("gate*", last_row - 1 - l, c, self.layer_mpos[l][c].conj())
        for c in range(n):
            add("state*", last_row, c, self.psi.tensors[c].conj())
        add("boundary*", last_row, n, self.psi.boundary.conj())

        def wire(end_a, end_b, orientation, dim):
            self.wires.append(
                NetWire(len(self.wires), (end_a, end_b), orientation, dim)
            )

        # Horizontal wires: state rows close through the boundary node,
        # gate rows wrap their (dimension-1) outer edges.
        for row in (0, last_row):
            bnd = grid[(row, n)]
            for c in range(n - 1):
                a, b = grid[(row, c)], grid[(row, c + 1)]
                wire((a.nid, 2), (b.nid, 1), "h", a.tensor.shape[2])
            wire((grid[(row, n - 1)].nid, 2), (bnd.nid, 0), "h",
                 grid[(row, n - 1)].tensor.shape[2])
            wire((bnd.nid, 1), (grid[(row, 0)].nid, 1), "h",
                 grid[(row, 0)].tensor.shape[1])
        for row in list(range(1, nl + 1)) + list(range(obs_row + 1, last_row)):
            for c in range(n - 1):
                a, b = grid[(row, c)], grid[(row, c + 1)]
                wire((a.nid, 1), (b.nid, 0), "h", a.tensor.shape[1])
            wire((grid[(row, n - 1)].nid, 1), (grid[(row, 0)].nid, 0), "h", 1)

        # Vertical wires: physical index chains through the rows.
        # Gate tensors have axes (bond_l, bond_r, out, in); state axis 0 and
        # obs axes 0/1 carry the physical legs.
        for c in range(n):
            ket_chain = [(grid[(0, c)].nid, 0)]  # state phys
            for l in range(nl):
                node = grid[(l + 1, c)]
                ket_chain.append((node.nid, 3))  # in
                ket_chain.append((node.nid, 2))  # out
            ket_chain.append((grid[(obs_row, c)].nid, 0))
            for i in range(0, len(ket_chain) - 1, 2):
                wire(ket_chain[i], ket_chain[i + 1], "v", self.d)
            conj_chain = [(grid[(last_row, c)].nid, 0)]
            for l in range(nl):
                node = grid[(last_row - 1 - l, c)]
                conj_chain.append((node.nid, 3))
                conj_chain.append((node.nid, 2))
            conj_chain.append((grid[(obs_row, c)].nid, 1))
            for i in range(0, len(conj_chain) - 1, 2):
                wire(conj_chain[i], conj_chain[i + 1], "v", self.d)

    def to_dict(self) -> dict:
        return {
            "n_sites": self.circuit.n_sites,
            "n_layers": self.circuit.n_layers,
            "phys_dim": self.d,
            "nodes": [
                {
                    "id": node.nid,
                    "kind": node.kind,
                    "row": node.row,
                    "col": node.col,
                    "shape": list(node.tensor.shape),
                    "payload": serialize.cvec(node.tensor.reshape(-1)),
                }
                for node in self.nodes
            ],
            "wires": [
                {
                    "id": w.wid,
                    "ends": [list(w.ends[0]), list(w.ends[1])],
                    "orientation": w.orientation,
                    "dim": w.dim,
                }
                for w in self.wires
            ],
        }


def build_network(psi: MPS, circuit: BrickworkCircuit, observables) -> ChannelNetwork:
    if psi.canonical != "left":
        raise CanonicalFormError("build_network needs a left-canonical MPS")
    if psi.n_sites != circuit.n_sites:
        raise ShapeError(
            f"state has {psi.n_sites} sites, circuit has {circuit.n_sites}"
        )
    if any(d != circuit.phys_dim for d in psi.phys_dims):
        raise ShapeError("physical dimensions of state and circuit differ")
    if psi.boundary.shape != (1, 1):
        raise ShapeError("channel networks assume open boundary conditions")
    obs = {}
    for site, op in observables:
        op = as_matrix(op)
        if op.shape != (circuit.phys_dim,) * 2:
            raise ShapeError(f"observable at site {site} has shape {op.shape}")
        if site in obs:
            raise ShapeError(f"duplicate observable site {site}")
        obs[int(site)] = op
    return ChannelNetwork(psi, circuit, obs)


# ---------------------------------------------------------------------------
# Exact evaluation: column sweep along the chain direction


def evaluate_exact(net: ChannelNetwork) -> complex:
    """Contract the network exactly, column by column.

    The running environment lives on the cut bond space (state bond, the
    per-layer gate bonds, and their conjugates); intermediate tensors above
    the size guard raise SizeGuardError with a cost report.
    """
    n = net.circuit.n_sites
    env = np.ones((1, 1), dtype=complex)  # (ket-left, bra-left) blocks
    for c in range(n):
        # Cost precheck from shapes alone, before any tensor is built.
        d, chi_l, chi_r = net.psi.tensors[c].shape
        size = d * chi_l * chi_r
        for l in range(net.circuit.n_layers):
            a, b = net.layer_mpos[l][c].shape[:2]
            size *= a * b
        _guard(size, f"column {c} half")
        ket = _column_half(net, c, conj=False)
        bra = _column_half(net, c, conj=True)
        obs = net.observables.get(c, np.eye(net.d)).astype(complex)
        ket = np.tensordot(obs, ket, axes=([1], [0]))  # apply O to the ket top
        env = _apply_column(env, ket, bra, c)
    scalar = net.psi.boundary[0, 0]
    return complex(abs(scalar) ** 2 * env.reshape(()))


def _column_half(net: ChannelNetwork, c: int, conj: bool) -> np.ndarray:
    """Vertical contraction of one column's state and gate tensors.

    Returns legs (phys_top, chi_l, chi_r, a_1, b_1, ..., a_L, b_L).
    """
    t = net.psi.tensors[c]
    if conj:
        t = t.conj()
    acc = t  # (phys, chi_l, chi_r)
    for l in range(net.circuit.n_layers):
        w = net.layer_mpos[l][c]
        if conj:
            w = w.conj()
        acc = np.einsum("abop,p...->o...ab", w, acc)
    return acc


def _apply_column(env, ket, bra, c):
    """One sweep step: env[ketL, braL] -> env'[ketR, braR]."""
    n_rows = (ket.ndim - 1) // 2
    perm = [0] + [1 + 2 * i for i in range(n_rows)] + [2 + 2 * i for i in range(n_rows)]
    dl = int(np.prod([ket.shape[p] for p in perm[1 : 1 + n_rows]]))
    dr = int(np.prod([ket.shape[p] for p in perm[1 + n_rows :]]))
    kb = ket.transpose(perm).reshape(ket.shape[0], dl, dr)
    bb = bra.transpose(perm).reshape(bra.shape[0], dl, dr)
    _guard(dl * dl + dr * dr, f"column {c} environment")
    _guard(ket.shape[0] * dl * dr, f"column {c} environment")
    # bb already holds conjugated tensors.
    out = np.einsum("pkr,kK,pKs->rs", kb, env, bb, optimize=True)
    return out


def _guard(size, label):
    if size > CONTRACTION_GUARD:
        raise SizeGuardError(
            f"contraction intermediate for {label} has {size} entries "
            f"(> {CONTRACTION_GUARD}); refusing"
        )


# ---------------------------------------------------------------------------
# Region-partitioned evaluation on the node graph


@dataclass(frozen=True)
class NetworkPartition:
    regions: tuple  # tuple of tuples of node ids

    def validate(self, net: ChannelNetwork):
        seen = set()
        for region in self.regions:
            for nid in region:
                if nid in seen:
                    raise ShapeError(f"node {nid} appears in two regions")
                seen.add(nid)
        if seen != {node.nid for node in net.nodes}:
            raise ShapeError("partition does not cover the network")


def _node_axis_wires(net: ChannelNetwork):
    axes = {node.nid: {} for node in net.nodes}
    for w in net.wires:
        for nid, axis in w.ends:
            axes[nid][axis] = w.wid
    return axes


def _label_key(label):
    """Total order over int and tuple wire labels."""
    if isinstance(label, tuple):
        return (1,) + tuple(label)
    return (0, label)


def _contract_group(tensors_and_legs, order_key, guard_label):
    """Pairwise contraction of (tensor, leg-wire-ids) items; legs sharing a
    wire id are contracted, the rest stay open (sorted by wire id)."""
    items = sorted(tensors_and_legs, key=order_key)
    acc, acc_legs = None, None
    for tensor, legs in items:
        legs = list(legs)
        if acc is None:
            acc, acc_legs = tensor, legs
        else:
            shared = sorted(set(acc_legs) & set(legs), key=_label_key)
            ax_a = [acc_legs.index(w) for w in shared]
            ax_b = [legs.index(w) for w in shared]
            acc = np.tensordot(acc, tensor, axes=(ax_a, ax_b))
            acc_legs = [w for i, w in enumerate(acc_legs) if i not in ax_a] + [
                w for i, w in enumerate(legs) if i not in ax_b
            ]
        # Trace out leg pairs that met inside the accumulator.
        while True:
            dup = _first_dup(acc_legs)
            if dup is None:
                break
            i, j = dup
            acc = np.trace(acc, axis1=i, axis2=j)
            acc_legs = [w for k, w in enumerate(acc_legs) if k not in (i, j)]
        _guard(acc.size, guard_label)
    # Canonical open-leg order.
    perm = sorted(range(len(acc_legs)), key=lambda i: _label_key(acc_legs[i]))
    return acc.transpose(perm), sorted(acc_legs, key=_label_key)


def _first_dup(legs):
    seen = {}
    for i, w in enumerate(legs):
        if w in seen:
            return (seen[w], i)
        seen[w] = i
    return None


def evaluate_regions(net: ChannelNetwork, partition: NetworkPartition):
    """Contract each region independently, then join along cut wires.

    Returns (value, region_probs): the joined value is partition independent;
    the per-region Frobenius weights are diagnostics of the heralded
    branch mass each region carries.
    """
    partition.validate(net)
    axes = _node_axis_wires(net)
    by_id = {node.nid: node for node in net.nodes}

    def node_item(nid):
        node = by_id[nid]
        legs = [axes[nid][a] for a in range(node.tensor.ndim)]
        return node.tensor, legs

    def contract_region(region):
        # Row-major: each row is contracted through before moving on, so the
        # frontier stays at the physical-row scale.
        ordered = sorted(region, key=lambda nid: (by_id[nid].row, by_id[nid].col))
        return _contract_group(
            [node_item(nid) for nid in ordered],
            order_key=lambda item: 0,
            guard_label="region contraction",
        )

    from .parallel import parallel_map

    region_tensors = parallel_map(contract_region, partition.regions)
    region_probs = [float(np.linalg.norm(t) ** 2) for t, _ in region_tensors]
    region_order = [
        min((by_id[n].row, by_id[n].col) for n in region)
        for region in partition.regions
    ]
    joined = [t for _, t in sorted(zip(region_order, region_tensors))]
    value, legs = _contract_group(
        joined, order_key=lambda item: 0, guard_label="region join"
    )
    if legs:
        raise ShapeError("region join left open legs; partition inconsistent")
    return complex(value.reshape(())), region_probs


def singleton_partition(net: ChannelNetwork) -> NetworkPartition:
    order = sorted(net.nodes, key=lambda node: (node.row, node.col))
    return NetworkPartition(tuple((node.nid,) for node in order))


def column_partition(net: ChannelNetwork, splits) -> NetworkPartition:
    """Partition into vertical strips; ``splits`` lists the first column of
    each strip after the first (boundary nodes join the last strip)."""
    edges = [0] + sorted(splits) + [net.circuit.n_sites + 1]
    regions = []
    for lo, hi in zip(edges, edges[1:]):
        region = tuple(
            node.nid for node in net.nodes if lo <= node.col < hi
        )
        if region:
            regions.append(region)
    return NetworkPartition(tuple(regions))


# ---------------------------------------------------------------------------
# Heralded sampling


def obs_eigenbasis(op: np.ndarray):
    """Eigenvalues ascending; each eigenvector's first nonzero component is
    made real positive (the package-wide phase convention)."""
    vals, vecs = np.linalg.eigh(as_matrix(op))
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)[0]
        vecs[:, k] = col * np.exp(-1j * np.angle(col[nz]))
    return vals, vecs


def _ket_graph(net: ChannelNetwork):
    """Ket-side preparation graph for the heralded protocol.

    Returns (nodes, sampled, finals): nodes as (tensor, axis->label) pairs,
    sampled wires as (label, dim, orientation) with identity passthroughs
    spliced out, and finals mapping each site to its dangling physical label.
    """
    n, nl, d = net.circuit.n_sites, net.circuit.n_layers, net.d
    nodes = []
    labels = iter(range(10**6))
    sampled = []
    finals = {}

    state_axes = []
    for c in range(n):
        t = net.psi.tensors[c]
        ax = {}
        nodes.append([t, ax])
        state_axes.append(ax)
    # Bond labels (horizontal, state row).
    for c in range(n - 1):
        lab = next(labels)
        chi = net.psi.tensors[c].shape[2]
        state_axes[c][2] = lab
        state_axes[c + 1][1] = lab
        if chi > 1:
            sampled.append((lab, chi, "h"))
    # Dangling dimension-1 edge bonds get trivial caps.
    for c, axis in ((0, 1), (n - 1, 2)):
        lab = next(labels)
        state_axes[c][axis] = lab
        nodes.append([np.ones(1, dtype=complex), {0: lab}])

    # Vertical chains with real gate halves only.
    chain = {}
    for c in range(n):
        lab = next(labels)
        state_axes[c][0] = lab
        chain[c] = lab
    for l in range(nl):
        for site, _ in net.circuit.layers[l]:
            pair = net.gate_pairs[(l, site)]
            gl = next(labels)  # gate bond label
            if pair.bond_dim > 1:
                sampled.append((gl, pair.bond_dim, "h"))
            for half, ops in (("L", pair.left_ops), ("R", pair.right_ops)):
                c = site if half == "L" else site + 1
                t = np.stack(ops)  # (g, out, in)
                in_lab = chain[c]
                sampled.append((in_lab, d, "v"))
                out_lab = next(labels)
                chain[c] = out_lab
                nodes.append([t, {0: gl, 1: out_lab, 2: in_lab}])
    for c in range(n):
        finals[c] = chain[c]
    return nodes, sampled, finals


def _frobenius_contract(nodes, guard_label):
    """Contract nodes over shared labels; returns squared Frobenius norm of
    the remainder (open legs are summed over incoherently)."""
    tensor, _ = _contract_group(
        [(t, list(ax[a] for a in sorted(ax))) for t, ax in nodes],
        order_key=lambda item: 0,
        guard_label=guard_label,
    )
    return float(np.linalg.norm(tensor) ** 2)


class BranchTable:
    """Exact joint distribution of wire outcomes and observable outcomes."""

    def __init__(self, wires, lam, probs, outcome_index):
        self.wires = wires          # (label, dim, orientation) per wire
        self.lam = lam              # per-outcome product of eigenvalues
        self.probs = probs          # (2**W, n_out), rows indexed by outcome bits
        self.outcome_index = outcome_index

    @property
    def n_wires(self):
        return len(self.wires)

    def acceptance(self) -> float:
        return float(np.sum(self.probs[0]))


def branch_distribution(net: ChannelNetwork) -> BranchTable:
    """Enumerate every heralded branch of the preparation exactly.

    Wire outcome bit 0 is the Bell outcome |w><w|, bit 1 its complement;
    observable outcomes run over the eigenbases of the measured sites.
    """
    import itertools

    for site, op in net.observables.items():
        if np.max(np.abs(op - dagger(op))) > 1e-10:
            raise ShapeError(f"observable at site {site} is not Hermitian")
    nodes, sampled, finals = _ket_graph(net)
    w = len(sampled)
    measured = sorted(net.observables)
    eig = {c: obs_eigenbasis(net.observables[c]) for c in measured}
    n_out = int(np.prod([net.d] * len(measured))) if measured else 1
    if (2**w) * n_out > BRANCH_GUARD:
        raise SizeGuardError(
            f"branch enumeration needs {(2**w) * n_out} entries "
            f"(> {BRANCH_GUARD}); refusing"
        )
    outcomes = list(itertools.product(*[range(net.d) for _ in measured]))

    # G[mask, o]: all wires in mask Bell-capped, others physically open.
    g = np.zeros((2**w, len(outcomes)))
    for mask in range(2**w):
        base = []
        for t, ax in nodes:
            new_ax = {}
            for a, lab in ax.items():
                new_ax[a] = lab
            base.append([t, new_ax])
        # Bell-capped wires route both endpoints through a |w> cap node;
        # open wires get distinct endpoint sublabels so nothing contracts
        # and the Frobenius norm sums them incoherently.
        for k, (lab, dim, _) in enumerate(sampled):
            ends = [
                (node, a)
                for node in base
                for a, l in node[1].items()
                if l == lab
            ]
            capped = bool(mask >> k & 1)
            if capped:
                cap = np.eye(dim, dtype=complex) / np.sqrt(dim)
                base.append([cap, {0: (lab, 0), 1: (lab, 1)}])
            for i, (node, a) in enumerate(ends):
                node[1][a] = (lab, i) if capped else (lab, "open", i)
        for o_idx, o in enumerate(outcomes):
            run = [[t, dict(ax)] for t, ax in base]
            for c, oc in zip(measured, o):
                vec = eig[c][1][:, oc].conj()
                run.append([vec, {0: finals[c]}])
            g[mask, o_idx] = _frobenius_contract(run, "branch enumeration")

    # Moebius: P(b) = sum_{T subset of ones(b)} (-1)^|T| G(zeros(b) | T).
    full = 2**w - 1
    probs = np.zeros_like(g)
    for b in range(2**w):
        zeros = full & ~b
        t = b
        while True:
            sign = (-1) ** bin(t).count("1")
            probs[b] += sign * g[zeros | t]
            if t == 0:
                break
            t = (t - 1) & b
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if total <= 0:
        raise SamplingError("branch distribution has no mass")
    probs /= total
    lam = np.array(
        [np.prod([eig[c][0][oc] for c, oc in zip(measured, o)]) for o in outcomes]
    ) if measured else np.ones(1)
    return BranchTable(sampled, lam, probs, outcomes)


@dataclass(frozen=True)
class SampleResult:
    estimate: float
    stderr: float
    shots: int
    accepted: int
    acceptance_rate: float
    strategy: str


def evaluate_sampled(
    net: ChannelNetwork,
    shots: int,
    seed: int,
    strategy: str = "postselect",
    correct_vertical: bool = False,
) -> SampleResult:
    """Monte-Carlo estimate from the heralded-measurement realization.

    ``postselect`` keeps only the all-Bell branch (unbiased, exponential
    acceptance in the wire count); ``corrected`` removes the depolarizing
    offset of horizontal wires with an exactly computed baseline so their
    failure branches contribute too.  Vertical-wire correction is gated
    behind ``correct_vertical``.
    """
    if shots < 1:
        raise ShapeError("need at least one shot")
    table = branch_distribution(net)
    rng = np.random.default_rng(seed)
    flat = table.probs.reshape(-1)
    counts = rng.multinomial(shots, flat / flat.sum()).reshape(table.probs.shape)
    if strategy == "postselect":
        return _postselect_estimate(table, counts, shots)
    if strategy == "corrected":
        return _corrected_estimate(table, counts, shots, rng, correct_vertical)
    raise ShapeError(f"unknown sampling strategy {strategy!r}")


def _postselect_estimate(table, counts, shots):
    acc = counts[0]
    n_acc = int(acc.sum())
    if n_acc == 0:
        raise SamplingError(
            f"no accepted samples in {shots} shots "
            f"(expected acceptance rate {table.acceptance():.3e})"
        )
    est = float(np.dot(acc, table.lam) / n_acc)
    if n_acc > 1:
        var = float(np.dot(acc, (table.lam - est) ** 2) / (n_acc - 1))
        stderr = float(np.sqrt(var / n_acc))
    else:
        stderr = float("inf")
    return SampleResult(est, stderr, shots, n_acc, n_acc / shots, "postselect")


def _corrected_estimate(table, counts, shots, rng, correct_vertical):
    w = table.n_wires
    corrected = [
        k for k, (_, _, orient) in enumerate(table.wires)
        if orient == "h" or correct_vertical
    ]
    post = [k for k in range(w) if k not in corrected]

    def assemble(freq):
        """sum_S (-1)^|S| T(S): S=empty from the exact table, else freq."""
        num = 0.0
        den = 0.0
        for s_bits in range(2 ** len(corrected)):
            rows = _row_set(w, corrected, s_bits, post)
            src = table.probs if s_bits == 0 else freq
            mass = src[rows].sum(axis=0)
            sign = (-1) ** bin(s_bits).count("1")
            num += sign * float(np.dot(mass, table.lam))
            den += sign * float(mass.sum())
        return num, den

    freq = counts / shots
    num, den = assemble(freq)
    if abs(den) < 1e-12:
        raise SamplingError("corrected estimator lost all mass")
    est = num / den
    # Bootstrap over the multinomial tally for the uncertainty.
    boots = []
    p_hat = freq.reshape(-1)
    p_hat = p_hat / p_hat.sum() if p_hat.sum() > 0 else p_hat
    for _ in range(64):
        resample = rng.multinomial(shots, p_hat).reshape(counts.shape) / shots
        bn, bd = assemble(resample)
        if abs(bd) > 1e-12:
            boots.append(bn / bd)
    stderr = float(np.std(boots)) if len(boots) > 1 else float("inf")
    n_acc = int(counts[0].sum())
    return SampleResult(float(est), stderr, shots, n_acc, n_acc / shots, "corrected")


def _row_set(w, corrected, s_bits, post):
    """Branch-row indices with b=1 on the chosen corrected wires, b=0 on the
    postselected wires, and both values on the remaining corrected wires."""
    fixed_one = [corrected[i] for i in range(len(corrected)) if s_bits >> i & 1]
    free = [k for k in corrected if k not in fixed_one]
    rows = []
    for bits in range(2 ** len(free)):
        row = 0
        for k in fixed_one:
            row |= 1 << k
        for i, k in enumerate(free):
            if bits >> i & 1:
                row |= 1 << k
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Oblivious segment joining (OQT): preparation plan for the initial MPS


@dataclass(frozen=True)
class OqtPlan:
    """Two-site segments of an MPS, to be joined by binary Bell measurements
    between each segment's input reference and the next segment's output."""

    psi: MPS
    segments: tuple  # per segment: (first_site, n_sites_in_segment)
    join_dims: tuple  # bond dimension at each segment boundary

    @property
    def n_joins(self) -> int:
        return len(self.join_dims)


def oqt_prepare_plan(psi: MPS) -> OqtPlan:
    if psi.canonical != "left":
        raise CanonicalFormError("oqt_prepare_plan needs a left-canonical MPS")
    if psi.boundary.shape != (1, 1):
        raise ShapeError("oqt_prepare_plan assumes open boundary conditions")
    tensors = list(psi.tensors)
    if len(tensors) % 2 == 1:
        # Pad with a trivial site so segments pair up.
        tensors.append(np.ones((1, 1, 1), dtype=complex))
        psi = MPS(tuple(tensors), psi.boundary, canonical="left")
    n = len(tensors)
    segments = tuple((2 * k, 2) for k in range(n // 2))
    join_dims = tuple(
        tensors[2 * k + 1].shape[2] for k in range(n // 2 - 1)
    )
    return OqtPlan(psi, segments, join_dims)


def _segment_tensor(psi: MPS, first: int) -> np.ndarray:
    """G[out, i, j, ref] = (T_first[i] @ T_{first+1}[j])[out, ref]."""
    a, b = psi.tensors[first], psi.tensors[first + 1]
    return np.einsum("iax,jxb->ijab", a, b).transpose(2, 0, 1, 3)


def simulate_oqt_plan(plan: OqtPlan, observables, mode: str = "corrected") -> complex:
    """Exact density-matrix simulation of the preparation plan.

    Each segment is prepared as the purified Choi state of its two site
    channels; consecutive segments are joined by the binary Bell measurement.
    ``postselect`` keeps the all-Bell branch (teleportation identity);
    ``corrected`` reconstructs the same value from all branches through the
    depolarizing mixing identity of the failure outcome.
    """
    psi = plan.psi
    obs = {int(site): as_matrix(op) for site, op in observables}
    segs = [_segment_tensor(psi, first) for first, _ in plan.segments]
    joint = segs[0]
    for g in segs[1:]:
        joint = np.tensordot(joint, g, axes=0)
    if joint.size > BRANCH_GUARD:
        raise SizeGuardError(
            f"oqt joint state needs {joint.size} entries (> {BRANCH_GUARD})"
        )
    dims = list(joint.shape)
    vec = joint.reshape(-1)

    # Leg layout per segment k: [out_k, phys, phys, ref_k]; observable blocks
    # sit on the physical legs, junction blocks on (ref_k, out_{k+1}) pairs.
    obs_blocks = []
    join_legs = []
    for k, (first, _) in enumerate(plan.segments):
        base = 4 * k
        for off, site in ((1, first), (2, first + 1)):
            if site in obs:
                obs_blocks.append((base + off, 1, obs[site]))
        if k < len(segs) - 1:
            join_legs.append((base + 3, plan.join_dims[k]))

    def apply_block(w, pos, span, op):
        left = int(np.prod(dims[:pos])) or 1
        mid = int(np.prod(dims[pos : pos + span]))
        right = int(np.prod(dims[pos + span :])) or 1
        w = w.reshape(left, mid, right)
        return np.einsum("ab,xby->xay", op, w).reshape(-1)

    def branch_value(bits, traced):
        """<Psi| (x)_j Pi_{b_j} (x) O |Psi> with selected joins traced out."""
        w = vec
        for pos, span, op in obs_blocks:
            w = apply_block(w, pos, span, op)
        for j, (pos, chi) in enumerate(join_legs):
            if j in traced:
                continue
            omega = np.outer(bell_vector(chi), bell_vector(chi).conj())
            junction = omega if bits[j] == 0 else np.eye(chi * chi) - omega
            w = apply_block(w, pos, 2, junction)
        return complex(np.vdot(vec, w))

    n_j = plan.n_joins
    scalar = abs(psi.boundary[0, 0]) ** 2
    # Raw segment tensors have squared norm chi_in, which equals the join
    # dimension, so one chi per join both normalizes the preparations and
    # undoes the Bell-projection weight.
    weight = scalar * float(np.prod(plan.join_dims))
    if mode == "postselect":
        return weight * branch_value([0] * n_j, traced=set())
    if mode == "corrected":
        # contraction_j = chi_j * (traced_j - branch1_j), expanded over joins.
        total = 0.0 + 0.0j
        for t_bits in range(2**n_j):
            traced = {j for j in range(n_j) if not t_bits >> j & 1}
            bits = [1] * n_j
            sign = (-1) ** bin(t_bits).count("1")
            total += sign * branch_value(bits, traced)
        return weight * total
    raise ShapeError(f"unknown oqt simulation mode {mode!r}")
