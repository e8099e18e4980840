"""Named property suites with fixed seeds and reported residuals.

Each suite re-derives its expectations from the brute-force oracle and
returns one :class:`CheckResult` per property; the CLI ``verify`` command
prints them, and the acceptance tests assert them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import algorithms as alg
from . import channels as ch
from . import hamiltonians as ham
from . import mps as mpsmod
from . import network as net
from . import oracle
from .errors import ShapeError
from .linalg import dagger, embed_operator
from .rand import haar_unitary, random_density, random_kraus_set, random_state

PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    metric: float
    threshold: float
    passed: bool
    seconds: float
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.note})" if self.note else ""
        return (
            f"[{status}] {self.suite}/{self.name}: "
            f"{self.metric:.3e} <= {self.threshold:.1e} "
            f"[{self.seconds:.2f}s]{extra}"
        )


def _check(suite, name, metric, threshold, t0, note="", ok=None):
    passed = bool(metric <= threshold) if ok is None else bool(ok)
    return CheckResult(
        suite, name, float(metric), float(threshold), passed,
        time.perf_counter() - t0, note,
    )


def _random_channel(rng, d_in, d_out, n_kraus):
    return ch.Channel(tuple(random_kraus_set(rng, d_in, d_out, n_kraus)))


def suite_duality(seed: int = 2024) -> list:
    rng = np.random.default_rng(seed)
    out = []

    t0 = time.perf_counter()
    worst_readout = 0.0
    worst_roundtrip = 0.0
    for _ in range(100):
        d_in = int(rng.integers(2, 5))
        d_out = int(rng.integers(2, 5))
        phi = _random_channel(rng, d_in, d_out, int(rng.integers(1, 4)))
        omega = phi.to_choi()
        back = omega.to_channel()
        for _ in range(10):
            rho = random_density(rng, d_in)
            worst_readout = max(
                worst_readout,
                float(np.max(np.abs(omega.apply(rho) - phi.apply(rho)))),
            )
            worst_roundtrip = max(
                worst_roundtrip,
                float(np.max(np.abs(back.apply(rho) - phi.apply(rho)))),
            )
    out.append(_check("duality", "choi-readout-identity", worst_readout, 1e-12, t0,
                      note="100 channels x 10 states"))
    out.append(_check("duality", "choi-roundtrip-action", worst_roundtrip, 1e-10, t0))

    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        d_in = int(rng.integers(2, 4))
        d_out = int(rng.integers(2, 4))
        phi = _random_channel(rng, d_in, d_out, int(rng.integers(1, 4)))
        rho = random_density(rng, d_in)
        m = rng.normal(size=(d_out, d_out)) + 1j * rng.normal(size=(d_out, d_out))
        obs = (m + dagger(m)) / 2
        value, _ = ch.measured_expectation(phi, rho, obs)
        target = np.trace(obs @ phi.apply(rho))
        worst = max(worst, abs(value - target))
    out.append(_check("duality", "binary-measurement-reconstruction", worst, 1e-10, t0,
                      note="50 (channel, state, observable) triples"))
    return out


def suite_mps(seed: int = 2025) -> list:
    rng = np.random.default_rng(seed)
    out = []
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        psi = random_state(rng, 2**n)
        m = mpsmod.from_statevector(psi, [2] * n)
        n_ops = int(rng.integers(1, min(n, 3) + 1))
        sites = rng.choice(n, size=n_ops, replace=False)
        ops = {}
        for s in sites:
            name = ("X", "Y", "Z")[int(rng.integers(3))]
            ops[int(s)] = PAULI[name]
        got = m.expectation_product(ops)
        want = oracle.expectation(psi, ops, [2] * n)
        worst = max(worst, abs(got - want))
    out.append(_check("mps", "bulk-edge-duality", worst, 1e-10, t0,
                      note="200 random MPS, product Pauli observables"))
    return out


def _random_brickwork(rng, n, layers):
    circ = []
    for l in range(layers):
        start = l % 2
        circ.append(tuple((s, haar_unitary(rng, 4)) for s in range(start, n - 1, 2)))
    return net.BrickworkCircuit(n, tuple(circ))


def suite_network(seed: int = 2026) -> list:
    rng = np.random.default_rng(seed)
    out = []

    t0 = time.perf_counter()
    worst_exact = 0.0
    worst_regions = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        layers = int(rng.integers(1, 4))
        psi = mpsmod.from_statevector(random_state(rng, 2**n), [2] * n)
        circ = _random_brickwork(rng, n, layers)
        n_obs = int(rng.integers(1, min(n, 2) + 1))
        sites = rng.choice(n, size=n_obs, replace=False)
        obs = [(int(s), PAULI[("X", "Y", "Z")[int(rng.integers(3))]]) for s in sites]
        network = net.build_network(psi, circ, obs)
        got = net.evaluate_exact(network)
        want = oracle.circuit_expectation(
            psi.to_statevector(), circ, dict(obs), [2] * n
        )
        worst_exact = max(worst_exact, abs(got - want))
        partitions = [
            net.column_partition(network, [max(1, n // 2)]),
            net.column_partition(network, [1]),
            net.singleton_partition(network),
        ]
        for part in partitions:
            value, _ = net.evaluate_regions(network, part)
            worst_regions = max(worst_regions, abs(value - got))
    out.append(_check("network", "entanglement-picture-equality", worst_exact, 1e-8, t0,
                      note="100 random (state, circuit, observable)"))
    out.append(_check("network", "partition-invariance", worst_regions, 1e-10, t0,
                      note="3 partitions per network"))

    t0 = time.perf_counter()
    psi = mpsmod.from_statevector(random_state(rng, 4), [2, 2])
    circ = _random_brickwork(rng, 2, 1)
    obs = [(0, PAULI["Z"])]
    network = net.build_network(psi, circ, obs)
    exact = net.evaluate_exact(network).real
    hits = 0
    for s in range(20):
        res = net.evaluate_sampled(network, shots=10**5, seed=s)
        if abs(res.estimate - exact) <= 4 * res.stderr:
            hits += 1
    out.append(_check("network", "postselect-sampling-4sigma", 20 - hits, 1.0, t0,
                      note=f"{hits}/20 seeds within 4 sigma", ok=hits >= 19))

    t0 = time.perf_counter()
    h = ham.build_tfim(4, 1.0, 0.7)
    target = ham.exact_unitary(h, 1.0)
    errors = []
    for reps in (4, 8, 16):
        circ = ham.trotter_circuit(h, 1.0, reps)
        u = np.eye(16, dtype=complex)
        cols = [oracle.apply_circuit(u[:, k], circ, [2] * 4) for k in range(16)]
        errors.append(np.linalg.norm(np.stack(cols, axis=1) - target, ord=2))
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    ok = all(1.6 <= r <= 2.4 for r in ratios)
    out.append(_check("network", "trotter-first-order-scaling",
                      max(abs(r - 2) for r in ratios), 0.4, t0,
                      note=f"error ratios {['%.2f' % r for r in ratios]}", ok=ok))

    t0 = time.perf_counter()
    ok = True
    for n in (2, 4, 5, 6):
        for layers in (0, 1, 3):
            circ = net.BrickworkCircuit(n, tuple(() for _ in range(layers)))
            est = net.resources(circ)
            m = layers * (n // 2)
            ok = ok and est.state_qudits == n // 2
            ok = ok and est.total_gates == m and est.evolution_qudits == 6 * m
            ok = ok and est.sample_cost_order == "O(N^2 M L)"
    out.append(_check("network", "resource-formulas", 0.0 if ok else 1.0, 0.5, t0,
                      note="floor(N/2) and 6M over an (N, L) grid", ok=ok))
    return out


def suite_oqt(seed: int = 2027) -> list:
    rng = np.random.default_rng(seed)
    out = []
    t0 = time.perf_counter()
    worst = 0.0
    for d in (2, 3, 4):
        p = ch.oqt_channel(d)
        for _ in range(5):
            rho = random_density(rng, d)
            mixed = rho / d**2 + (d**2 - 1) / d**2 * p.apply(rho)
            worst = max(worst, float(np.max(np.abs(mixed - np.eye(d) / d))))
    out.append(_check("oqt", "mixing-identity", worst, 1e-14, t0, note="d = 2..4"))

    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(5):
        psi = mpsmod.from_statevector(random_state(rng, 2**4), [2] * 4)
        plan = net.oqt_prepare_plan(psi)
        site = int(rng.integers(4))
        obs = [(site, PAULI["Z"])]
        want = psi.expectation_product(dict(obs))
        for mode in ("postselect", "corrected"):
            got = net.simulate_oqt_plan(plan, obs, mode=mode)
            worst = max(worst, abs(got - want))
    out.append(_check("oqt", "prepare-plan-expectations", worst, 1e-8, t0,
                      note="N=4 MPS, both join reconstructions"))
    return out


def suite_thermal(seed: int = 2028) -> list:
    out = []
    t0 = time.perf_counter()
    worst_exact = 0.0
    worst_trotter = 0.0
    for build in (lambda n: ham.build_tfim(n, 1.0, 1.0),
                  lambda n: ham.build_heisenberg(n, 1.0)):
        for n in (2, 3):
            h = build(n)
            a = embed_operator(PAULI["Z"], [0], [2] * n)
            for beta in (0.25, 0.5, 1.0):
                order = alg.choose_truncation(
                    beta, h.norm_bound(), 0.5 * 1e-3 / 2**n
                )
                want = oracle.thermal_exact(a, h, beta)
                res = alg.thermal_value(alg.ThermalJob(
                    observable=a, hamiltonian=h, beta=beta,
                    epsilon=1e-3, order=order,
                ))
                worst_exact = max(worst_exact, abs(res.value - want))
                res_t = alg.thermal_value(alg.ThermalJob(
                    observable=a, hamiltonian=h, beta=beta,
                    epsilon=1e-3, order=order, mode="trotter",
                ))
                worst_trotter = max(worst_trotter, abs(res_t.value - want))
    out.append(_check("thermal", "exact-mode-accuracy", worst_exact, 1e-3, t0,
                      note="TFIM+Heisenberg, N<=3, beta in {1/4,1/2,1}"))
    out.append(_check("thermal", "trotter-mode-accuracy", worst_trotter, 5e-3, t0))

    t0 = time.perf_counter()
    orders = [alg.choose_truncation(1.0, 1.0, 10.0**-k) for k in range(2, 9)]
    growth = max(np.diff(orders)) if len(orders) > 1 else 0
    out.append(_check("thermal", "truncation-log-growth", float(growth), 2.0, t0,
                      note=f"orders {orders} over eps 1e-2..1e-8"))

    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    import scipy.linalg

    worst = 0.0
    for _ in range(20):
        rho = random_density(rng, 4)
        hm = -scipy.linalg.logm(rho)
        hm = (hm + dagger(hm)) / 2
        h = ham.LocalHamiltonian(2, 2, (((0, 1), hm),))
        got = alg.entropy(h, 1e-2)
        worst = max(worst, abs(got - oracle.entropy_exact(rho)))
    out.append(_check("thermal", "modular-entropy", worst, 1e-2, t0,
                      note="20 random two-qubit states"))
    return out


def suite_amplitude(seed: int = 2029) -> list:
    rng = np.random.default_rng(seed)
    out = []
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        d = 2 ** int(rng.integers(1, 4))
        u = haar_unitary(rng, d)
        phi, psi = random_state(rng, d), random_state(rng, d)
        est = alg.transition_amplitude(phi, u, psi)
        worst = max(worst, abs(est.value - np.conj(phi) @ u @ psi))
    out.append(_check("amplitude", "reflection-assembly", worst, 1e-10, t0,
                      note="100 random (phi, U, psi), <= 3 qubits"))

    t0 = time.perf_counter()
    phi = np.zeros(8, dtype=complex)
    phi[3] = 1.0  # <0|phi> = 0 by construction
    psi = random_state(rng, 8)
    if abs(psi[3]) < 1e-3:
        psi[3] += 0.5
        psi /= np.linalg.norm(psi)
    u = haar_unitary(rng, 8)
    est = alg.transition_amplitude(phi, u, psi)
    err = abs(est.value - np.conj(phi) @ u @ psi)
    out.append(_check("amplitude", "degenerate-reference-fallback", err, 1e-10, t0,
                      note="<0|phi> = 0 forces a basis rescan"))

    t0 = time.perf_counter()
    worst_unitary = 0.0
    worst_rebuild = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 9))
        m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        a = (m + dagger(m)) / 2
        shift, scale, up, um = alg.unitary_decompose(a)
        for u in (up, um):
            worst_unitary = max(
                worst_unitary, float(np.max(np.abs(dagger(u) @ u - np.eye(d))))
            )
        rebuilt = scale * (up + um) + shift * np.eye(d)
        worst_rebuild = max(worst_rebuild, float(np.max(np.abs(rebuilt - a))))
    out.append(_check("amplitude", "two-unitary-unitarity", worst_unitary, 1e-10, t0,
                      note="100 random Hermitian, d <= 8"))
    out.append(_check("amplitude", "two-unitary-reconstruction", worst_rebuild, 1e-10, t0))
    return out


SUITES = {
    "duality": suite_duality,
    "mps": suite_mps,
    "network": suite_network,
    "oqt": suite_oqt,
    "thermal": suite_thermal,
    "amplitude": suite_amplitude,
}


def run_suite(name: str) -> list:
    if name == "all":
        results = []
        for suite in SUITES.values():
            results.extend(suite())
        return results
    if name not in SUITES:
        raise ShapeError(
            f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'"
        )
    return SUITES[name]()
