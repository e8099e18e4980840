import numpy as np
import pytest

from epsim import channels as ch
from epsim.errors import InvalidChoiError, ShapeError
from epsim.linalg import dagger, devectorize, partial_trace, vectorize
from epsim.rand import haar_unitary, random_density, random_kraus_set


def random_channel(rng, d_in, d_out, n_kraus):
    return ch.Channel(tuple(random_kraus_set(rng, d_in, d_out, n_kraus)))


def test_identity_channel_apply():
    rng = np.random.default_rng(0)
    rho = random_density(rng, 3)
    assert np.allclose(ch.identity_channel(3).apply(rho), rho)


def test_depolarizing_apply():
    rng = np.random.default_rng(1)
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    assert np.allclose(ch.depolarizing(2).apply(rho0), np.eye(2) / 2, atol=1e-12)
    rho = random_density(rng, 3)
    assert np.allclose(ch.depolarizing(3).apply(rho), np.eye(3) / 3, atol=1e-12)


def test_apply_matches_kraus_sum_oracle():
    rng = np.random.default_rng(2)
    phi = random_channel(rng, 3, 3, 3)
    rho = random_density(rng, 3)
    direct = sum(a @ rho @ dagger(a) for a in phi.kraus)
    assert np.allclose(phi.apply(rho), direct)


def test_non_trace_preserving_rejected():
    with pytest.raises(ShapeError, match="trace preserving"):
        ch.Channel((np.eye(2) * 0.5,))


def test_choi_of_identity_is_bell():
    omega = ch.identity_channel(2).to_choi()
    bell = ch.bell_vector(2)
    assert np.allclose(omega.matrix, np.outer(bell, bell.conj()))
    omega.validate()


def test_choi_rank_counts_independent_kraus():
    rng = np.random.default_rng(21)
    for k in (1, 2, 3):
        phi = random_channel(rng, 3, 3, k)
        evals = np.linalg.eigvalsh(phi.to_choi().matrix)
        assert int(np.sum(evals > 1e-12)) == k


def test_choi_of_depolarizing_is_maximally_mixed():
    omega = ch.depolarizing(2).to_choi()
    assert np.allclose(omega.matrix, np.eye(4) / 4, atol=1e-12)


@pytest.mark.parametrize("dims", [(2, 2, 2), (2, 3, 2), (3, 2, 4), (4, 4, 3)])
def test_duality_round_trip(dims):
    d_in, d_out, k = dims
    rng = np.random.default_rng(hash(dims) % 2**32)
    phi = random_channel(rng, d_in, d_out, k)
    back = phi.to_choi().to_channel()
    for _ in range(10):
        rho = random_density(rng, d_in)
        assert np.max(np.abs(back.apply(rho) - phi.apply(rho))) < 1e-10


def test_from_choi_of_unitary_is_rank_one():
    rng = np.random.default_rng(5)
    u = haar_unitary(rng, 3)
    back = ch.unitary_channel(u).to_choi().to_channel()
    assert len(back.kraus) == 1
    phase = back.kraus[0][0, 0] / u[0, 0]
    assert np.allclose(back.kraus[0], phase * u, atol=1e-10)
    assert abs(abs(phase) - 1) < 1e-10


def test_from_choi_rejects_bad_marginal():
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = 1.0
    with pytest.raises(InvalidChoiError):
        ch.ChoiState(2, 2, m).to_channel()


def test_readout_identity():
    rng = np.random.default_rng(6)
    for d_in, d_out in [(2, 2), (3, 2), (2, 4), (4, 3)]:
        phi = random_channel(rng, d_in, d_out, 3)
        omega = phi.to_choi()
        rho = random_density(rng, d_in)
        assert np.max(np.abs(omega.apply(rho) - phi.apply(rho))) < 1e-12


def test_readout_on_plus_state():
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    rho = np.outer(plus, plus.conj())
    omega = ch.identity_channel(2).to_choi()
    assert np.allclose(omega.apply(rho), rho)


def test_state_measurement_trivial_cases():
    d = 2
    meas = ch.state_measurement(np.eye(d) / d)
    assert np.allclose(meas.m0, np.eye(d) / np.sqrt(d))
    assert np.allclose(meas.m1, np.sqrt(1 - 1 / d) * np.eye(d))
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    meas = ch.state_measurement(rho0)
    assert np.allclose(meas.m0, np.diag([1.0, 0.0]))
    assert np.allclose(meas.m1, np.diag([0.0, 1.0]))


def test_measured_expectation_reconstruction():
    rng = np.random.default_rng(7)
    for _ in range(20):
        d_in = int(rng.integers(2, 4))
        d_out = int(rng.integers(2, 4))
        phi = random_channel(rng, d_in, d_out, int(rng.integers(1, 4)))
        rho = random_density(rng, d_in)
        a = rng.normal(size=(d_out, d_out)) + 1j * rng.normal(size=(d_out, d_out))
        obs = (a + dagger(a)) / 2
        value, branches = ch.measured_expectation(phi, rho, obs)
        target = np.trace(obs @ phi.apply(rho))
        assert abs(value - target) < 1e-10
        # Each branch reconstruction is individually exact.
        for _, _, v in branches:
            assert abs(v - target) < 1e-10
        assert abs(sum(p for p, _, _ in branches) - 1) < 1e-10


def test_stinespring_identity_and_unitary():
    u, anc = ch.identity_channel(2).stinespring()
    assert anc == 1 and np.allclose(u, np.eye(2))
    rng = np.random.default_rng(8)
    w = haar_unitary(rng, 3)
    u, anc = ch.unitary_channel(w).stinespring()
    assert anc == 1 and np.allclose(u, w)


@pytest.mark.parametrize("dims", [(2, 2, 2), (3, 2, 2), (2, 3, 3)])
def test_stinespring_dilation(dims):
    d_in, d_out, k = dims
    rng = np.random.default_rng(sum(dims))
    phi = random_channel(rng, d_in, d_out, k)
    u, anc = phi.stinespring()
    dim = u.shape[0]
    assert np.max(np.abs(dagger(u) @ u - np.eye(dim))) < 1e-10
    m_in = dim // d_in
    anc_in = np.zeros((m_in, m_in), dtype=complex)
    anc_in[0, 0] = 1.0
    for _ in range(10):
        rho = random_density(rng, d_in)
        big = u @ np.kron(rho, anc_in) @ dagger(u)
        out = partial_trace(big, [d_out, anc], keep=[0])
        assert np.max(np.abs(out - phi.apply(rho))) < 1e-10


def test_purified_choi():
    rng = np.random.default_rng(9)
    ident = ch.identity_channel(2).purified_choi()
    assert np.allclose(ident.vector, ch.bell_vector(2))
    phi = random_channel(rng, 3, 2, 3)
    pure = phi.purified_choi()
    assert abs(np.linalg.norm(pure.vector) - 1) < 1e-10
    assert np.max(np.abs(pure.choi_matrix() - phi.to_choi().matrix)) < 1e-10


def test_transfer_matches_apply():
    rng = np.random.default_rng(10)
    assert np.allclose(ch.identity_channel(2).transfer(), np.eye(4))
    phi = random_channel(rng, 3, 2, 2)
    rho = random_density(rng, 3)
    lhs = phi.transfer() @ vectorize(rho)
    assert np.max(np.abs(devectorize(lhs) - phi.apply(rho))) < 1e-12


def test_transfer_obs_reduces_to_transfer():
    rng = np.random.default_rng(11)
    phi = random_channel(rng, 2, 2, 3)
    assert np.allclose(phi.transfer_obs(np.eye(3)), phi.transfer())


def test_transfer_composition():
    rng = np.random.default_rng(12)
    phi1 = random_channel(rng, 2, 3, 2)
    phi2 = random_channel(rng, 3, 2, 3)
    composed = phi2.compose(phi1)
    assert (
        np.max(np.abs(composed.transfer() - phi2.transfer() @ phi1.transfer())) < 1e-12
    )


def test_oqt_mixing_identity_is_exact():
    rng = np.random.default_rng(13)
    for d in (2, 3, 4):
        p = ch.oqt_channel(d)
        rho = random_density(rng, d)
        mixed = rho / d**2 + (d**2 - 1) / d**2 * p.apply(rho)
        assert np.max(np.abs(mixed - np.eye(d) / d)) < 1e-14
        assert np.max(np.abs(p.apply(rho) - p.apply_direct(rho))) < 1e-12


def test_oqt_choi_is_psd():
    for d in (2, 3, 4):
        w = np.linalg.eigvalsh(ch.oqt_channel(d).choi.matrix)
        assert w[0] >= -1e-12
        ch.oqt_channel(d).choi.validate()


def test_oqt_example_value():
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    out = ch.oqt_channel(2).apply(rho0)
    assert np.allclose(out, np.diag([1.0 / 3.0, 2.0 / 3.0]), atol=1e-12)


def test_bell_binary_measurement_probabilities():
    d = 2
    meas = ch.bell_binary_measurement(d)
    bell = ch.bell_vector(d)
    rho = np.outer(bell, bell.conj())
    e0, e1 = meas.effects()
    assert abs(np.trace(e0 @ rho) - 1) < 1e-12
    assert abs(np.trace(e1 @ rho)) < 1e-12
    mixed = np.eye(d * d) / d**2
    assert abs(np.trace(e0 @ mixed) - 1 / d**2) < 1e-12


def test_bell_teleportation_branches():
    # Bell-measuring a segment against a maximally entangled resource
    # conditions the passthrough on identity (outcome 0) or the OQT
    # correction channel (outcome 1).
    d = 2
    rng = np.random.default_rng(14)
    meas = ch.bell_binary_measurement(d)
    bell = ch.bell_vector(d)
    resource = np.outer(bell, bell.conj())
    p_map = ch.oqt_channel(d)
    for _ in range(5):
        rho = random_density(rng, d)
        joint = np.kron(rho, resource)  # X (x) (R (x) Y)
        for outcome, effect in enumerate(meas.effects()):
            big = np.kron(effect, np.eye(d))  # measure (X, R)
            post = partial_trace(big @ joint @ big, [d, d, d], keep=[2])
            p = np.real(np.trace(post))
            cond = post / p
            if outcome == 0:
                assert abs(p - 1 / d**2) < 1e-12
                assert np.max(np.abs(cond - rho)) < 1e-12
            else:
                assert abs(p - (1 - 1 / d**2)) < 1e-12
                assert np.max(np.abs(cond - p_map.apply(rho))) < 1e-12


def test_channel_json_roundtrip():
    rng = np.random.default_rng(15)
    phi = random_channel(rng, 2, 3, 2)
    data = phi.to_dict()
    assert data["in_dim"] == 2 and data["out_dim"] == 3
    back = ch.Channel.from_dict(data)
    rho = random_density(rng, 2)
    assert np.allclose(back.apply(rho), phi.apply(rho))
    omega = phi.to_choi()
    omega2 = ch.ChoiState.from_dict(omega.to_dict())
    assert np.allclose(omega2.matrix, omega.matrix)
