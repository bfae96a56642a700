import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# Dense Pauli-Kronecker oracle, independent of the package's bit tricks.
# Single-site basis is ordered (down, up) so that the kron product index of a
# basis vector equals the integer whose bit (i-1) is the spin at site i.
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SZ = np.diag([-1.0, 1.0]).astype(complex)
ID2 = np.eye(2, dtype=complex)


def kron_site(L, ops):
    """Tensor product with per-site 2x2 factors, site 1 least significant."""
    m = np.array([[1.0]], dtype=complex)
    for i in range(L, 0, -1):
        m = np.kron(m, ops.get(i, ID2))
    return m


def dense_xxz(L, alpha, delta, boundary="open", b=0.0, h=0.0, edge=0.0):
    """Dense full-space XXZ(+fields) Hamiltonian built from Pauli products."""
    bonds = [(i, i + 1) for i in range(1, L)]
    if boundary == "periodic":
        bonds.append((L, 1))
    H = np.zeros((2**L, 2**L), dtype=complex)
    for (i, j) in bonds:
        H += alpha * (kron_site(L, {i: SX, j: SX}) + kron_site(L, {i: SY, j: SY}))
        H += delta * kron_site(L, {i: SZ, j: SZ})
    if b:
        for i in range(1, L + 1, 2):
            H += b * kron_site(L, {i: SZ})
    if h:
        H += h * kron_site(L, {L // 2: SZ})
    if edge:
        H += edge * kron_site(L, {1: SZ})
    return H
