"""Mesoscopic leads: lin-log discretization, superfermion NESS, currents,
and heat-engine metrics for non-interacting working media.

The superfermion construction doubles each fermionic mode with an ancilla:
for a quadratic system-lead Hamiltonian the Lindblad generator becomes a
2M x 2M matrix whose eigenvectors give the steady-state two-point function
directly, with modes of positive imaginary eigenvalue occupied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.special import expit

from . import lindblad, spinops


@dataclass
class LeadSpec:
    """Damped-mode representation of one flat-band reservoir."""

    energies: np.ndarray    # mode energies, ascending in [-W, W]
    spacings: np.ndarray    # interval widths e_k
    gammas: np.ndarray      # damping rates, equal to the spacings
    couplings: np.ndarray   # kappa_k = sqrt(Gamma e_k / 2 pi)
    fermi: np.ndarray       # f(eps_k) at (beta, mu)
    beta: float
    mu: float
    bandwidth: float        # W
    inner: float            # W*
    n_lin: int
    n_log: int

    @property
    def size(self):
        return len(self.energies)


def discretize_lead(W, W_star, L, log_fraction=0.2, beta=1.0, mu=0.0, Gamma=1.0):
    """Lin-log mode placement: L_lin equal bins on [-W*, W*], L_log/2
    logarithmically shrinking bins per side on (W*, W].

    Modes sit at interval midpoints, each mode is damped at the width of its
    interval, and couplings follow Gamma = 2 pi kappa^2 / e_k so that the
    summed Lorentzians approximate the flat spectral density Gamma.
    """
    if not (0.0 < W_star < W):
        raise ValueError("need 0 < W* < W")
    # nearest even count, so that the log modes split across the two sides
    n_log = 2 * int(round(L * log_fraction / 2.0))
    n_lin = L - n_log
    if n_lin <= 0:
        raise ValueError(f"log fraction {log_fraction} leaves no linear modes at L={L}")
    edges_lin = np.linspace(-W_star, W_star, n_lin + 1)

    half = n_log // 2
    if half:
        lam = (W / W_star) ** (1.0 / half)
        bounds = W * lam ** (-np.arange(half + 1, dtype=float))  # W down to W*
        bounds[-1] = W_star  # pin the junction exactly
        pos_edges = bounds[::-1]                                 # W* up to W
        edges = np.concatenate([-pos_edges[::-1][:-1], edges_lin, pos_edges[1:]])
    else:
        edges = edges_lin
    centers = (edges[:-1] + edges[1:]) / 2.0
    widths = np.diff(edges)
    return LeadSpec(
        energies=centers,
        spacings=widths,
        gammas=widths.copy(),
        couplings=np.sqrt(Gamma * widths / (2.0 * np.pi)),
        fermi=expit(-beta * (centers - mu)),
        beta=beta, mu=mu, bandwidth=W, inner=W_star,
        n_lin=n_lin, n_log=n_log,
    )


def effective_spectral_density(lead, omegas):
    """Sum of the mode Lorentzians kappa^2 gamma / ((w-eps)^2 + (gamma/2)^2)."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    num = lead.couplings**2 * lead.gammas
    return (num[None, :] /
            ((w[:, None] - lead.energies[None, :]) ** 2
             + (lead.gammas[None, :] / 2.0) ** 2)).sum(axis=1)


# ---------------------------------------------------------------------------
# superfermion generator and NESS correlations
# ---------------------------------------------------------------------------

@dataclass
class SuperfermionSystem:
    h_matrix: np.ndarray          # M x M one-body Hamiltonian (leads + system)
    gamma_plus: np.ndarray        # injection rates gamma_k f_k (0 on system)
    gamma_minus: np.ndarray       # ejection rates gamma_k (1 - f_k)
    generator: np.ndarray         # 2M x 2M matrix L
    left: slice
    right: slice
    system: slice
    left_lead: LeadSpec | None = None
    right_lead: LeadSpec | None = None

    @property
    def modes(self):
        return self.h_matrix.shape[0]


def build_superfermion_generator(h_sys, left=None, right=None):
    """Assemble the quadratic generator for a chain between two leads.

    The left lead couples to the first system site, the right lead to the
    last.  Mode ordering is [left lead | system | right lead].
    """
    h_sys = np.asarray(h_sys, dtype=complex)
    D = h_sys.shape[0]
    nl = left.size if left is not None else 0
    nr = right.size if right is not None else 0
    M = nl + D + nr
    H = np.zeros((M, M), dtype=complex)
    gp = np.zeros(M)
    gm = np.zeros(M)
    sys_sl = slice(nl, nl + D)
    H[sys_sl, sys_sl] = h_sys
    if left is not None:
        H[:nl, :nl] = np.diag(left.energies)
        if D:
            H[:nl, nl] = left.couplings
            H[nl, :nl] = left.couplings
        gp[:nl] = left.gammas * left.fermi
        gm[:nl] = left.gammas * (1.0 - left.fermi)
    if right is not None:
        H[nl + D:, nl + D:] = np.diag(right.energies)
        if D:
            H[nl + D:, nl + D - 1] = right.couplings
            H[nl + D - 1, nl + D:] = right.couplings
        gp[nl + D:] = right.gammas * right.fermi
        gm[nl + D:] = right.gammas * (1.0 - right.fermi)
    omega = np.diag((gm - gp) / 2.0)
    gen = np.block([
        [H - 1j * omega, 1j * np.diag(gp)],
        [1j * np.diag(gm), H + 1j * omega],
    ])
    return SuperfermionSystem(
        h_matrix=H, gamma_plus=gp, gamma_minus=gm, generator=gen,
        left=slice(0, nl), right=slice(nl + D, M), system=sys_sl,
        left_lead=left, right_lead=right,
    )


def ness_correlations(system):
    """Steady-state two-point function C[i, j] = <d+_i d_j>.

    The generator is diagonalized (LAPACK geev, balancing on); modes with
    positive imaginary eigenvalue are occupied, and
    <d+_i d_j> = [V diag(Theta(Im eps)) V^-1]_{ji}.
    """
    gen = system.generator
    M = system.modes
    eps, V = la.eig(gen)
    im = eps.imag
    if np.any(np.abs(im) < 1e-12):
        raise ValueError(
            "generator eigenvalue with vanishing imaginary part: occupation "
            "is ambiguous; ensure every lead mode has a nonzero damping rate")
    n_pos = int((im > 0).sum())
    if n_pos != M:
        raise ValueError(f"expected {M} occupied modes, found {n_pos}")
    occ = (im > 0).astype(float)
    right = V * occ[None, :]
    corr = np.linalg.solve(V.T, right.T).T  # V D V^-1
    C = corr[:M, :M].T.copy()
    defect = np.abs(C - C.conj().T).max()
    if defect > 1e-9:
        raise ValueError(f"correlation matrix not Hermitian (defect {defect:.2e})")
    occs = np.real(np.diag(C))
    if occs.min() < -1e-8 or occs.max() > 1.0 + 1e-8:
        raise ValueError("unphysical mode occupations in the NESS")
    return C


def meso_currents(C, system):
    """Particle and energy currents into the system through the left lead.

    Positive values flow left to right.  The energy current includes the
    dissipative half of the system-lead coupling term; the right-lead
    expressions provide the conservation cross-check.
    """
    left, right = system.left_lead, system.right_lead
    if left is None or right is None:
        raise ValueError("currents need both leads attached")
    nl = left.size
    occ = np.real(np.diag(C))
    jp_left = float(np.sum(left.gammas * (left.fermi - occ[system.left])))
    site1 = system.system.start
    cross = np.real(C[site1, system.left])
    je_left = float(np.sum(left.gammas * left.energies
                           * (left.fermi - occ[system.left]))
                    - np.sum(left.gammas * left.couplings * cross))
    jp_right = float(np.sum(right.gammas * (right.fermi - occ[system.right])))
    siteD = system.system.stop - 1
    cross_r = np.real(C[siteD, system.right])
    je_right = float(np.sum(right.gammas * right.energies
                            * (right.fermi - occ[system.right]))
                     - np.sum(right.gammas * right.couplings * cross_r))
    return CurrentPair(
        particle=jp_left, energy=je_left,
        particle_mismatch=abs(jp_left + jp_right),
        energy_mismatch=abs(je_left + je_right),
    )


@dataclass
class CurrentPair:
    particle: float
    energy: float
    particle_mismatch: float = 0.0
    energy_mismatch: float = 0.0


# ---------------------------------------------------------------------------
# engine metrics
# ---------------------------------------------------------------------------

@dataclass
class EngineMetrics:
    power: float
    heat_left: float      # out of the hot (left) lead
    heat_right: float     # into the cold (right) lead
    efficiency: float     # nan outside the engine regime
    carnot: float
    engine_regime: bool


def engine_metrics(jp, je, T_L, T_R, mu_L, mu_R):
    """Power, heat currents, and efficiency for the two-lead machine.

    P = V J_P with V = mu_R - mu_L; Qdot_a = J_E - mu_a J_P, so the first
    law P = Qdot_L - Qdot_R holds identically.  The efficiency is reported
    only in the engine regime (P > 0 and Qdot_L > 0).
    """
    V = mu_R - mu_L
    power = V * jp
    q_left = je - mu_L * jp
    q_right = je - mu_R * jp
    carnot = 1.0 - T_R / T_L if T_L > 0 else np.nan
    regime = power > 0 and q_left > 0
    eta = power / q_left if regime else np.nan
    return EngineMetrics(power=power, heat_left=q_left, heat_right=q_right,
                         efficiency=eta, carnot=carnot, engine_regime=regime)


# ---------------------------------------------------------------------------
# dense-Lindblad cross-check (tiny mode counts)
# ---------------------------------------------------------------------------

def _fermion_annihilators(M):
    """Jordan-Wigner ladder operators on the 2^M Fock space (bit i-1 = mode i)."""
    ops = []
    for i in range(1, M + 1):
        op = spinops.sigma_plus_full(M, i).conj().T.tocsr()  # lowers occupation
        for j in range(1, i):
            op = op @ spinops.sigma_z_full(M, j)
        ops.append(op.tocsr())
    return ops


def dense_lindblad_reference(system):
    """NESS correlations from the many-body Lindblad solve on 2^M states.

    Exponential in M: use only to validate the superfermion solution at tiny
    lead sizes.  Returns (C, NessSolution).
    """
    M = system.modes
    if M > 12:
        raise ValueError("dense reference is limited to M <= 12 modes")
    c_ops = _fermion_annihilators(M)
    d = 2**M
    H = sp.csr_matrix((d, d), dtype=complex)
    hmat = system.h_matrix
    for i in range(M):
        for j in range(M):
            if hmat[i, j] != 0:
                H = H + hmat[i, j] * (c_ops[i].conj().T @ c_ops[j])
    jumps = []
    for k in range(M):
        if system.gamma_minus[k] > 0:
            jumps.append((c_ops[k], system.gamma_minus[k]))
        if system.gamma_plus[k] > 0:
            jumps.append((c_ops[k].conj().T.tocsr(), system.gamma_plus[k]))
    model = lindblad.LiouvillianModel(hamiltonian=H, jumps=jumps,
                                      convention="standard")
    W = lindblad.build_liouvillian_matrix(model)
    sol = lindblad.solve_ness(W, d, check_positivity=(M <= 8))
    C = np.empty((M, M), dtype=complex)
    for i in range(M):
        for j in range(M):
            C[i, j] = np.trace((c_ops[i].conj().T @ c_ops[j]) @ sol.rho)
    return C, sol
