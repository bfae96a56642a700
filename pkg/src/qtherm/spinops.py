"""Symmetry-sector bases and sparse lattice operators for spin-1/2 chains.

Conventions used throughout the package:

* sites are labelled 1..L, site i lives on bit (i-1) of the basis integer,
* an up spin (= one excitation, = one spinless fermion) is a set bit,
* sigma^z |up> = +|up>,
* all operators are stored as complex CSR matrices, since current
  operators have purely imaginary matrix elements in this basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp

SPIN_KINDS = ("xxz", "single-impurity", "staggered-field")
MODEL_KINDS = SPIN_KINDS + ("fermion-chain",)


@dataclass(frozen=True)
class SectorBasis:
    """Ordered basis of a fixed-magnetization (fixed particle number) sector."""

    sites: int
    excitations: int
    states: np.ndarray  # ascending unsigned integers, popcount == excitations

    @property
    def dim(self):
        return len(self.states)

    def index_of(self, state):
        """Ordinal of a bit-string in the sector, by binary search."""
        i = np.searchsorted(self.states, state)
        if i >= len(self.states) or self.states[i] != state:
            raise KeyError(f"state {state:#x} not in sector (L={self.sites}, N={self.excitations})")
        return int(i)


@dataclass
class ModelSpec:
    """Parameters of one of the four chain models.

    For the spin kinds, ``alpha`` is the hopping scale, ``delta`` the
    anisotropy, ``h`` the impurity strength (site L/2), ``b`` the staggered
    field on odd sites and ``edge_delta`` a symmetry-breaking sigma^z field
    on site 1.  For ``fermion-chain``, ``eps`` are the on-site energies,
    ``t_s`` the hopping and ``u`` the nearest-neighbour interaction.
    """

    kind: str
    sites: int
    alpha: float = 1.0
    delta: float = 0.0
    h: float = 0.0
    b: float = 0.0
    edge_delta: float = 0.0
    boundary: str = "open"
    eps: np.ndarray | None = None
    t_s: float = 0.0
    u: float = 0.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if self.kind in SPIN_KINDS:
            if self.alpha <= 0:
                raise ValueError("spin models require alpha > 0")
            if self.eps is not None or self.t_s != 0.0 or self.u != 0.0:
                raise ValueError("fermion-chain fields set on a spin model kind")
            if self.kind == "single-impurity" and self.sites % 2:
                raise ValueError("single-impurity model requires even L (impurity at site L/2)")
            if self.kind == "staggered-field" and self.sites % 2:
                raise ValueError("staggered-field model requires even L")
        else:
            if self.eps is None:
                self.eps = np.zeros(self.sites)
            self.eps = np.asarray(self.eps, dtype=float)
            if self.eps.shape != (self.sites,):
                raise ValueError(f"eps must have length {self.sites}")

    @property
    def impurity_site(self):
        return self.sites // 2


def build_sector_basis(L, N):
    """All L-bit strings with N set bits, ascending as unsigned integers."""
    if not (0 <= N <= L <= 30):
        raise ValueError(f"need 0 <= N <= L <= 30, got L={L}, N={N}")
    states = np.fromiter(
        (sum(1 << p for p in combo) for combo in combinations(range(L), N)),
        dtype=np.int64,
        count=math.comb(L, N),
    )
    states.sort()
    return SectorBasis(sites=L, excitations=N, states=states)


# ---------------------------------------------------------------------------
# low-level term builders (all sector-conserving by construction)
# ---------------------------------------------------------------------------

def _bonds(L, boundary):
    bonds = [(i, i + 1) for i in range(1, L)]
    if boundary == "periodic":
        bonds.append((L, 1))
    return bonds


def _z_values(states, site):
    """Diagonal of sigma^z at a 1-indexed site."""
    bit = 1 << (site - 1)
    return np.where((states & bit) > 0, 1.0, -1.0)


def diagonal_operator(basis, values):
    return sp.diags(np.asarray(values, dtype=complex), format="csr")


def exchange_operator(basis, a, b, amplitude):
    """amplitude * (sigma^+_a sigma^-_b + sigma^-_a sigma^+_b) in the sector."""
    rows, cols = _exchange_pairs(basis, a, b)
    data = np.full(len(rows), amplitude, dtype=complex)
    m = sp.csr_matrix((data, (rows, cols)), shape=(basis.dim, basis.dim))
    return m + m.conj().T.tocsr()


def imag_exchange_operator(basis, a, b, amplitude, z_sites=()):
    """i * amplitude * (sigma^+_a sigma^-_b - sigma^-_a sigma^+_b) * prod sigma^z.

    ``rows`` states have the excitation at ``a``; the sigma^z factors act on
    the source state (they commute with the hop on distinct sites).
    """
    rows, cols = _exchange_pairs(basis, a, b)
    data = np.full(len(rows), 1j * amplitude, dtype=complex)
    for zs in z_sites:
        data = data * _z_values(basis.states[cols], zs)
    m = sp.csr_matrix((data, (rows, cols)), shape=(basis.dim, basis.dim))
    return m + m.conj().T.tocsr()


def _exchange_pairs(basis, a, b):
    """Row/col ordinals of sigma^+_a sigma^-_b (excitation moves b -> a)."""
    states = basis.states
    bit_a, bit_b = 1 << (a - 1), 1 << (b - 1)
    src = (states & bit_a == 0) & (states & bit_b > 0)
    cols = np.nonzero(src)[0]
    targets = (states[cols] | bit_a) & ~bit_b
    rows = np.searchsorted(states, targets)
    return rows, cols


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

def build_hamiltonian(spec, basis):
    """Sector Hamiltonian of ``spec`` as a Hermitian complex CSR matrix."""
    if basis.sites != spec.sites:
        raise ValueError(f"basis has L={basis.sites}, spec has L={spec.sites}")
    if spec.kind == "fermion-chain":
        return _fermion_chain_hamiltonian(spec, basis)

    L, states = spec.sites, basis.states
    diag = np.zeros(basis.dim)
    H = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for (i, j) in _bonds(L, spec.boundary):
        H = H + exchange_operator(basis, i, j, 2.0 * spec.alpha)
        diag += spec.delta * _z_values(states, i) * _z_values(states, j)
    if spec.kind == "single-impurity" and spec.h != 0.0:
        diag += spec.h * _z_values(states, spec.impurity_site)
    if spec.kind == "staggered-field" and spec.b != 0.0:
        for i in range(1, L + 1, 2):
            diag += spec.b * _z_values(states, i)
    if spec.edge_delta != 0.0:
        diag += spec.edge_delta * _z_values(states, 1)
    return H + diagonal_operator(basis, diag)


def _fermion_chain_hamiltonian(spec, basis):
    # open boundary only: nearest-neighbour hops carry no Jordan-Wigner sign
    if spec.boundary != "open":
        raise ValueError("fermion-chain supports open boundary only")
    states = basis.states
    occ = [(1.0 + _z_values(states, j)) / 2.0 for j in range(1, spec.sites + 1)]
    diag = sum(spec.eps[j - 1] * occ[j - 1] for j in range(1, spec.sites + 1))
    diag = diag + spec.u * sum(occ[j - 1] * occ[j] for j in range(1, spec.sites))
    H = diagonal_operator(basis, diag)
    for j in range(1, spec.sites):
        H = H + exchange_operator(basis, j, j + 1, -spec.t_s)
    return H


def single_particle_matrix(spec):
    """One-body matrix of a fermion chain: eps_j on the diagonal, -t_s hopping."""
    if spec.kind != "fermion-chain":
        raise ValueError("single_particle_matrix requires a fermion-chain spec")
    D = spec.sites
    m = np.diag(spec.eps.astype(float))
    if D > 1:
        m += np.diag(np.full(D - 1, -spec.t_s), 1) + np.diag(np.full(D - 1, -spec.t_s), -1)
    return m


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

def build_observable(kind, basis, site=None, alpha=1.0, boundary="open"):
    """Named Hermitian observables in the sector basis.

    kind:
        'sz'               sigma^z at ``site``
        'szsz'             sigma^z_site sigma^z_{site+1}
        'local_kinetic'    sigma^x sigma^x + sigma^y sigma^y on bond (site, site+1)
        'kinetic_per_site' (1/L) sum of all open-chain bond kinetic terms
        'kinetic_total'    alpha * sum of bond kinetic terms (stress tensor;
                           respects ``boundary``)
        'staggered_per_site'  (1/L) sum_i (-1)^i sigma^z_i
        'staggered_total'     sum_i (-1)^i sigma^z_i
        'gaussian_sz'      sum_j u_j sigma^z_j with u_j ~ exp(-(j-site)^2), sum u = 1
        'density'          n_site = (1 + sigma^z_site)/2
    """
    L, states = basis.sites, basis.states

    def check_site(maxsite=L):
        if site is None or not (1 <= site <= maxsite):
            raise ValueError(f"kind {kind!r} needs a site in [1, {maxsite}], got {site}")

    if kind == "sz":
        check_site()
        return diagonal_operator(basis, _z_values(states, site))
    if kind == "szsz":
        check_site(L - 1)
        return diagonal_operator(basis, _z_values(states, site) * _z_values(states, site + 1))
    if kind == "local_kinetic":
        check_site(L - 1)
        return exchange_operator(basis, site, site + 1, 2.0)
    if kind == "kinetic_per_site":
        op = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
        for i in range(1, L):
            op = op + exchange_operator(basis, i, i + 1, 2.0)
        return op / L
    if kind == "kinetic_total":
        op = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
        for (i, j) in _bonds(L, boundary):
            op = op + exchange_operator(basis, i, j, 2.0 * alpha)
        return op
    if kind in ("staggered_per_site", "staggered_total"):
        diag = np.zeros(basis.dim)
        for i in range(1, L + 1):
            diag += (-1.0) ** i * _z_values(states, i)
        if kind == "staggered_per_site":
            diag /= L
        return diagonal_operator(basis, diag)
    if kind == "gaussian_sz":
        check_site()
        u = np.exp(-((np.arange(1, L + 1) - site) ** 2).astype(float))
        u /= u.sum()
        diag = sum(u[i - 1] * _z_values(states, i) for i in range(1, L + 1))
        return diagonal_operator(basis, diag)
    if kind == "density":
        check_site()
        return diagonal_operator(basis, (1.0 + _z_values(states, site)) / 2.0)
    raise ValueError(f"unknown observable kind {kind!r}")


# ---------------------------------------------------------------------------
# Current operators
# ---------------------------------------------------------------------------

@dataclass
class CurrentOperators:
    """Spin and energy current operators of a spin-model spec."""

    local_spin: dict = field(default_factory=dict)   # bond i -> j^P_i
    total: sp.csr_matrix = None                      # J = sum_i j^P_i
    per_site: sp.csr_matrix = None                   # J / L
    local_energy: dict = field(default_factory=dict)  # bulk site i -> j^E_i


def spin_current(basis, i, j, alpha):
    """j^P = 2 alpha (sx_i sy_j - sy_i sx_j) = 4 i alpha (s+_i s-_j - s-_i s+_j)."""
    return imag_exchange_operator(basis, i, j, 4.0 * alpha)


def energy_current(basis, i, alpha, delta):
    """Local energy current at bulk site i (needs sites i-1, i, i+1)."""
    if not (2 <= i <= basis.sites - 1):
        raise ValueError(f"energy current needs a bulk site 2 <= i <= L-1, got {i}")
    op = imag_exchange_operator(basis, i - 1, i + 1, -4.0 * alpha**2, z_sites=(i,))
    if delta != 0.0:
        op = op + imag_exchange_operator(basis, i - 1, i, 4.0 * alpha * delta, z_sites=(i + 1,))
        op = op + imag_exchange_operator(basis, i, i + 1, 4.0 * alpha * delta, z_sites=(i - 1,))
    return op


def velocity_current(spec, basis):
    """Transport current i[X, H] with X = sum_k k n_k; equals -J_spin/2.

    This is the normalization under which the stress tensor is the kinetic
    energy operator, the open-boundary Drude weights vanish identically and
    the XX dispersion gives diagonal elements 4 alpha sin(k).  The
    continuity-equation spin current (``spin_current``) is -2 times this,
    because sigma^z = 2 n - 1 carries twice the density.
    """
    if spec.kind not in SPIN_KINDS:
        raise ValueError("velocity current is defined for the spin model kinds")
    op = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for (i, j) in _bonds(spec.sites, spec.boundary):
        op = op + imag_exchange_operator(basis, i, j, -2.0 * spec.alpha)
    return op


def build_current_operators(spec, basis):
    """All spin-current operators plus the bulk energy currents."""
    if spec.kind not in SPIN_KINDS:
        raise ValueError("current operators are defined for the spin model kinds")
    L = spec.sites
    ops = CurrentOperators()
    total = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for (i, j) in _bonds(L, spec.boundary):
        jp = spin_current(basis, i, j, spec.alpha)
        ops.local_spin[i] = jp
        total = total + jp
    ops.total = total
    ops.per_site = total / L
    for i in range(2, L):
        ops.local_energy[i] = energy_current(basis, i, spec.alpha, spec.delta)
    return ops


# ---------------------------------------------------------------------------
# Full-Hilbert-space operators (no magnetization restriction); used by the
# boundary-driving Lindblad construction, which breaks the U(1) symmetry.
# ---------------------------------------------------------------------------

def full_space_basis(L):
    """The trivial 2^L basis, reusing SectorBasis plumbing (popcount varies)."""
    return SectorBasis(sites=L, excitations=-1, states=np.arange(2**L, dtype=np.int64))


def sigma_plus_full(L, j):
    d = 2**L
    bit = 1 << (j - 1)
    s = np.arange(d)
    src = s[(s & bit) == 0]
    return sp.csr_matrix(
        (np.ones(len(src), dtype=complex), (src | bit, src)), shape=(d, d)
    )


def sigma_z_full(L, j):
    bit = 1 << (j - 1)
    diag = np.where((np.arange(2**L) & bit) > 0, 1.0, -1.0).astype(complex)
    return sp.diags(diag, format="csr")


def build_hamiltonian_full(spec):
    """Spin Hamiltonian on the full 2^L space (all magnetization sectors)."""
    if spec.kind not in SPIN_KINDS:
        raise ValueError("full-space Hamiltonian is defined for the spin kinds")
    L = spec.sites
    d = 2**L
    H = sp.csr_matrix((d, d), dtype=complex)
    for (i, j) in _bonds(L, spec.boundary):
        spi, spj = sigma_plus_full(L, i), sigma_plus_full(L, j)
        H = H + 2.0 * spec.alpha * (spi @ spj.conj().T.tocsr() + spi.conj().T.tocsr() @ spj)
        H = H + spec.delta * (sigma_z_full(L, i) @ sigma_z_full(L, j))
    if spec.kind == "single-impurity" and spec.h != 0.0:
        H = H + spec.h * sigma_z_full(L, spec.impurity_site)
    if spec.kind == "staggered-field" and spec.b != 0.0:
        for i in range(1, L + 1, 2):
            H = H + spec.b * sigma_z_full(L, i)
    if spec.edge_delta != 0.0:
        H = H + spec.edge_delta * sigma_z_full(L, 1)
    return H


def spin_current_full(L, i, j, alpha):
    """Full-space j^P on bond (i, j)."""
    spi, spj = sigma_plus_full(L, i), sigma_plus_full(L, j)
    hop = spi @ spj.conj().T.tocsr()
    return 4j * alpha * (hop - hop.conj().T.tocsr())
