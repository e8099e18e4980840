import numpy as np
import pytest

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@pytest.fixture
def pauli():
    return PAULI


def dense_expectation(psi, ops, dims):
    """Brute-force <psi| (x)_n O_n |psi> with identities at unlisted sites."""
    from epsim.linalg import embed_operator

    full = np.eye(int(np.prod(dims)), dtype=complex)
    for site, op in ops.items():
        full = full @ embed_operator(np.asarray(op, dtype=complex), [site], dims)
    return np.conj(psi) @ full @ psi
