"""Brute-force reference values for everything the other modules estimate.

Every quantity here is computed by dense linear algebra with hard size
guards; these are the ground truths the acceptance suites compare against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, SizeGuardError
from .hamiltonians import LocalHamiltonian
from .linalg import embed_operator, matrix_exp
from .network import BranchTable, BrickworkCircuit, ChannelNetwork, OqtPlan
from .network import branch_distribution

STATE_GUARD = 2**14
UNITARY_GUARD = 2**12
BRANCH_GUARD = 2**20


@dataclass(frozen=True)
class DenseState:
    """Statevector (or density matrix) with explicit site structure."""

    phys_dims: tuple
    vector: np.ndarray | None = field(default=None, repr=False)
    rho: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        dim = int(np.prod(self.phys_dims))
        if dim > STATE_GUARD:
            raise SizeGuardError(f"dense state dimension {dim} exceeds {STATE_GUARD}")
        if (self.vector is None) == (self.rho is None):
            raise ShapeError("provide exactly one of vector / rho")
        if self.vector is not None:
            v = np.asarray(self.vector, dtype=complex).reshape(-1)
            if v.size != dim:
                raise ShapeError(f"vector length {v.size} != {dim}")
            if abs(np.linalg.norm(v) - 1) > 1e-10:
                raise ShapeError("statevector is not normalized")
            object.__setattr__(self, "vector", v)
        else:
            r = np.asarray(self.rho, dtype=complex)
            if r.shape != (dim, dim):
                raise ShapeError(f"density matrix shape {r.shape} != {(dim, dim)}")
            if abs(np.trace(r) - 1) > 1e-10:
                raise ShapeError("density matrix trace != 1")
            object.__setattr__(self, "rho", r)

    @property
    def n_sites(self) -> int:
        return len(self.phys_dims)


def apply_gate(psi: np.ndarray, gate: np.ndarray, site: int, dims) -> np.ndarray:
    """Apply a two-site gate on (site, site+1) to a statevector."""
    dims = list(dims)
    d1, d2 = dims[site], dims[site + 1]
    left = int(np.prod(dims[:site])) or 1
    right = int(np.prod(dims[site + 2 :])) or 1
    t = psi.reshape(left, d1 * d2, right)
    t = np.einsum("gp,apb->agb", gate.reshape(d1 * d2, d1 * d2), t)
    return t.reshape(-1)


def apply_circuit(psi, circuit: BrickworkCircuit, dims=None) -> np.ndarray:
    """Exact gate-by-gate application of a brickwork circuit."""
    if isinstance(psi, DenseState):
        dims = list(psi.phys_dims)
        psi = psi.vector
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    dims = list(dims) if dims is not None else [circuit.phys_dim] * circuit.n_sites
    if psi.size > STATE_GUARD:
        raise SizeGuardError(f"statevector length {psi.size} exceeds {STATE_GUARD}")
    if int(np.prod(dims)) != psi.size:
        raise ShapeError("state length does not match site dimensions")
    out = psi.copy()
    for layer in circuit.layers:
        for site, gate in layer:
            out = apply_gate(out, gate, site, dims)
    return out


def expectation(psi, ops, dims) -> complex:
    """<psi| (x)_n O_n |psi> with identities at unlisted sites."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    full = np.eye(psi.size, dtype=complex)
    for site, op in dict(ops).items():
        full = full @ embed_operator(np.asarray(op, complex), [site], dims)
    return complex(np.conj(psi) @ full @ psi)


def circuit_expectation(psi, circuit: BrickworkCircuit, ops, dims=None) -> complex:
    """<psi| U^dag ((x) O) U |psi> by dense evolution."""
    dims = list(dims) if dims is not None else [circuit.phys_dim] * circuit.n_sites
    evolved = apply_circuit(psi, circuit, dims)
    return expectation(evolved, ops, dims)


def thermal_exact(a: np.ndarray, h, beta: float) -> float:
    """Tr(A e^{-beta H}) by eigendecomposition (unnormalized)."""
    hm = h.dense() if isinstance(h, LocalHamiltonian) else np.asarray(h, complex)
    if hm.shape[0] > UNITARY_GUARD:
        raise SizeGuardError(f"dense dimension {hm.shape[0]} exceeds {UNITARY_GUARD}")
    return float(np.real(np.trace(np.asarray(a, complex) @ matrix_exp(hm, -beta))))


def entropy_exact(rho: np.ndarray) -> float:
    """von Neumann entropy -Tr(rho log rho) in nats."""
    w = np.linalg.eigvalsh(np.asarray(rho, dtype=complex))
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log(w)))


def amplitude_exact(phi, u, psi) -> complex:
    """<phi| U |psi> directly."""
    return complex(np.conj(np.asarray(phi)) @ np.asarray(u) @ np.asarray(psi))


def channel_branch_simulate(plan, observables=None) -> BranchTable | list:
    """Exhaustive enumeration of heralded-measurement branches.

    For a ChannelNetwork, returns the exact BranchTable of wire and
    observable outcomes.  For an OqtPlan, returns per-branch rows
    (bits, probability, postselect-corrected value contribution).
    """
    if isinstance(plan, ChannelNetwork):
        return branch_distribution(plan)
    if isinstance(plan, OqtPlan):
        if 2**plan.n_joins > BRANCH_GUARD:
            raise SizeGuardError("too many OQT branches")
        rows = []
        for bits_int in range(2**plan.n_joins):
            bits = [(bits_int >> j) & 1 for j in range(plan.n_joins)]
            prob = _oqt_branch_probability(plan, bits)
            rows.append((tuple(bits), prob))
        return rows
    raise ShapeError(f"cannot branch-simulate {type(plan).__name__}")


def _oqt_branch_probability(plan: OqtPlan, bits) -> float:
    """Probability of a join-outcome pattern on normalized segment states."""
    from .network import _segment_tensor, bell_vector

    psi = plan.psi
    segs = [_segment_tensor(psi, first) for first, _ in plan.segments]
    joint = segs[0]
    for g in segs[1:]:
        joint = np.tensordot(joint, g, axes=0)
    dims = list(joint.shape)
    vec = joint.reshape(-1)
    norm_sq = float(np.prod([float(np.sum(np.abs(g) ** 2)) for g in segs]))
    w = vec
    for k in range(len(segs) - 1):
        pos = 4 * k + 3  # (ref_k, out_{k+1}) are adjacent legs
        chi = plan.join_dims[k]
        omega = np.outer(bell_vector(chi), bell_vector(chi).conj())
        junction = omega if bits[k] == 0 else np.eye(chi * chi) - omega
        left = int(np.prod(dims[:pos])) or 1
        right = int(np.prod(dims[pos + 2 :])) or 1
        w = np.einsum(
            "ab,xby->xay", junction, w.reshape(left, chi * chi, right)
        ).reshape(-1)
    return float(np.real(np.vdot(vec, w)) / norm_sq)
