"""Vectorized Lindblad generators, boundary driving, and direct NESS solves.

Vectorization is column-stacking throughout: vec(ABC) = (C^T kron A) vec(B),
so the vec index v encodes (row r, column c) of rho as v = c*d + r.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import spinops

CONVENTIONS = ("boundary", "standard")
_REDUCE_MIN_DIM = 32  # use the weak-U(1) block reduction above this d


@dataclass
class LiouvillianModel:
    """Hamiltonian plus (jump operator, rate) pairs and a dissipator convention.

    'boundary' means rate * (2 L rho L+ - {L+L, rho}) per jump; 'standard'
    means rate * (L rho L+ - {L+L, rho}/2).
    """

    hamiltonian: sp.spmatrix
    jumps: list
    convention: str = "standard"
    sites: int | None = None

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        for _, rate in self.jumps:
            if rate < 0:
                raise ValueError("jump rates must be non-negative")

    @property
    def dim(self):
        return self.hamiltonian.shape[0]


@dataclass
class NessSolution:
    rho: np.ndarray
    residual: float
    trace_error: float
    hermiticity_defect: float
    min_eigenvalue: float


def boundary_driving_model(spec, gamma, mu):
    """Boundary-driven chain: sigma+/- injection at site 1, ejection at site D.

    Rates gamma(1 +/- mu) with 0 <= mu <= 1; the full 2^D space is used since
    the driving breaks magnetization conservation.
    """
    if not (0.0 <= mu <= 1.0):
        raise ValueError("driving strength mu must lie in [0, 1]")
    if gamma <= 0:
        raise ValueError("bath coupling gamma must be positive")
    D = spec.sites
    H = spinops.build_hamiltonian_full(spec)
    sp1 = spinops.sigma_plus_full(D, 1)
    spD = spinops.sigma_plus_full(D, D)
    jumps = [
        (sp1, gamma * (1.0 + mu)),
        (sp1.conj().T.tocsr(), gamma * (1.0 - mu)),
        (spD, gamma * (1.0 - mu)),
        (spD.conj().T.tocsr(), gamma * (1.0 + mu)),
    ]
    return LiouvillianModel(hamiltonian=H, jumps=jumps, convention="boundary",
                            sites=D)


def build_liouvillian_matrix(model):
    """Sparse d^2 x d^2 matrix form of the Lindblad generator."""
    H = model.hamiltonian.tocsr().astype(complex)
    d = H.shape[0]
    I = sp.identity(d, format="csr", dtype=complex)
    W = -1j * (sp.kron(I, H, format="csr") - sp.kron(H.T, I, format="csr"))
    sandwich_scale = 2.0 if model.convention == "boundary" else 1.0
    anticomm_scale = 1.0 if model.convention == "boundary" else 0.5
    for op, rate in model.jumps:
        L = op.tocsr().astype(complex)
        LdL = (L.conj().T @ L).tocsr()
        W = W + rate * (
            sandwich_scale * sp.kron(L.conj(), L, format="csr")
            - anticomm_scale * (sp.kron(I, LdL, format="csr")
                                + sp.kron(LdL.T, I, format="csr"))
        )
    return W.tocsr()


def apply_superoperator(model, rho):
    """Direct action of the generator on a density matrix (oracle-friendly)."""
    H = model.hamiltonian
    H = H.toarray() if sp.issparse(H) else np.asarray(H)
    rho = np.asarray(rho)
    out = -1j * (H @ rho - rho @ H)
    scale = 2.0 if model.convention == "boundary" else 1.0
    half = 1.0 if model.convention == "boundary" else 0.5
    for op, rate in model.jumps:
        L = op.toarray() if sp.issparse(op) else np.asarray(op)
        LdL = L.conj().T @ L
        out = out + rate * (scale * (L @ rho @ L.conj().T)
                            - half * (LdL @ rho + rho @ LdL))
    return out


def _popcount_classes(d):
    pc = np.zeros(d, dtype=np.int64)
    for bit in range(d.bit_length()):
        pc += (np.arange(d) >> bit) & 1
    v = np.arange(d * d)
    return pc[v % d] - pc[v // d]


def _block_reducible(W, kv):
    coo = W.tocoo()
    return not np.any(kv[coo.row] != kv[coo.col])


def solve_ness(W, d, check_positivity=True):
    """NESS from the trace-fixed linear system (W + |0>><<1|) x = e_0.

    For boundary-driven chains the generator conserves the difference of
    row/column magnetizations of rho, so the solve is restricted to that
    zero-difference block when the structure is detected (the steady state
    has no support elsewhere -- every other block is purely decaying).
    """
    W = W.tocsr()
    n = d * d
    if W.shape != (n, n):
        raise ValueError(f"W has shape {W.shape}, expected ({n}, {n})")
    diag_pos = np.arange(0, n, d + 1)
    trace_row = sp.csr_matrix(
        (np.ones(d), (np.zeros(d, dtype=np.int64), diag_pos)), shape=(n, n))
    Wt = W + trace_row

    kv = _popcount_classes(d)
    if d >= _REDUCE_MIN_DIM and _block_reducible(W, kv):
        sel = np.nonzero(kv == 0)[0]
        x = np.zeros(n, dtype=complex)
        x[sel] = _direct_solve(Wt[sel][:, sel].tocsc(), int(np.searchsorted(sel, 0)))
    else:
        x = _direct_solve(Wt.tocsc(), 0)

    rho = x.reshape((d, d), order="F")
    hermiticity = float(np.abs(rho - rho.conj().T).max())
    rho = (rho + rho.conj().T) / 2.0
    trace_error = float(abs(np.trace(rho).real - 1.0))
    residual = float(np.linalg.norm(W @ rho.reshape(-1, order="F")))
    min_eig = float(np.linalg.eigvalsh(rho).min()) if check_positivity else np.nan
    return NessSolution(rho=rho, residual=residual, trace_error=trace_error,
                        hermiticity_defect=hermiticity, min_eigenvalue=min_eig)


def _direct_solve(A, rhs_index):
    b = np.zeros(A.shape[0], dtype=complex)
    b[rhs_index] = 1.0
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise RuntimeError(
            "trace-fixed Liouvillian is singular: the NESS is not unique "
            "(check that the jump operators generate the full algebra)") from exc
    x = lu.solve(b)
    x += lu.solve(b - A @ x)  # one step of iterative refinement
    return x


# ---------------------------------------------------------------------------
# steady-state observables
# ---------------------------------------------------------------------------

@dataclass
class NessObservables:
    magnetizations: np.ndarray     # <sigma^z_i>, i = 1..D
    bond_currents: np.ndarray      # <j_i>, i = 1..D-1
    boundary_left: float           # 4 gamma (mu - <sigma^z_1>)
    boundary_right: float          # 4 gamma (mu + <sigma^z_D>)
    current_spread: float          # max_i |<j_i> - <j_1>| incl. boundary values
    mean_current: float


def ness_observables(solution, spec, gamma, mu):
    """Magnetization profile, bond currents and boundary-current identities."""
    D = spec.sites
    rho = solution.rho
    mags = np.array([
        float(np.real(np.trace(spinops.sigma_z_full(D, i) @ rho)))
        for i in range(1, D + 1)
    ])
    currents = np.array([
        float(np.real(np.trace(spinops.spin_current_full(D, i, i + 1, spec.alpha) @ rho)))
        for i in range(1, D)
    ])
    j_left = 4.0 * gamma * (mu - mags[0])
    j_right = 4.0 * gamma * (mu + mags[-1])
    allj = np.concatenate([[j_left], currents, [j_right]])
    spread = float(np.abs(allj - allj[0]).max())
    return NessObservables(
        magnetizations=mags,
        bond_currents=currents,
        boundary_left=j_left,
        boundary_right=j_right,
        current_spread=spread,
        mean_current=float(currents.mean()),
    )


def boundary_current_from_generator(model, solution, site, gamma, mu):
    """Tr(sigma^z_site L_boundary{rho}) evaluated directly from the jumps."""
    D = model.sites
    rho = solution.rho
    picks = [0, 1] if site == 1 else [2, 3]
    sz = spinops.sigma_z_full(D, site).toarray()
    total = 0.0
    for k in picks:
        op, rate = model.jumps[k]
        L = op.toarray()
        LdL = L.conj().T @ L
        term = 2.0 * L @ rho @ L.conj().T - (LdL @ rho + rho @ LdL)
        total += rate * float(np.real(np.trace(sz @ term)))
    return total


# ---------------------------------------------------------------------------
# transport exponent
# ---------------------------------------------------------------------------

def transport_exponent_fit(currents, trim=0, gradients=None):
    """Power-law fit <j> ~ 1/D^nu from (D, <j>) pairs.

    With ``gradients`` (the mean magnetization gradient 2*Delta sigma^z_ave
    per size), the normalized form <j>/gradient = Ddiff / (D - 2 trim)^nu is
    fitted and (nu, Ddiff) returned; otherwise Ddiff is the plain prefactor.
    """
    pairs = list(currents)
    if len(pairs) < 3:
        raise ValueError("need at least 3 chain sizes for the fit")
    sizes = np.array([float(p[0]) for p in pairs])
    js = np.array([float(p[1]) for p in pairs])
    if np.any(js <= 0):
        raise ValueError("currents must be positive for a log-log fit")
    if gradients is not None:
        g = np.asarray(gradients, dtype=float)
        if np.any(g <= 0):
            raise ValueError("gradient normalization must be positive")
        y = np.log(js / g)
    else:
        y = np.log(js)
    x = np.log(sizes - 2.0 * trim)
    slope, intercept = np.polyfit(x, y, 1)
    return float(-slope), float(np.exp(intercept))
