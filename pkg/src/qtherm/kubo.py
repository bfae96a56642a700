"""Finite-frequency spin conductivity, Drude weights, and peak weights.

All matrix inputs live in the energy eigenbasis (see ethstats.to_eigenbasis).
The zero-frequency delta is counted one-sided, so the exact summation
identity reads  pi*D_L/2 + integral(sigma_fin) = pi*<-T>/(2L),  and the
sum-rule-normalized total weight is 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectra import boltzmann_weights

DEGENERACY_TOL = 1e-12  # |E_n - E_m| <= tol * bandwidth counts as degenerate
_CHUNK = 256


@dataclass
class ConductivityProfile:
    beta: float
    bin_width: float
    omegas: np.ndarray            # bin centers, all > 0
    sigma: np.ndarray             # Re sigma(omega), unnormalized
    sigma_normalized: np.ndarray  # sigma * L / (pi * <-T>)
    drude: float                  # D_L
    drude_bar: float              # D-bar_L
    kinetic_mean: float           # <-T>
    sites: int
    sum_rule_residual: float

    def cumulative_weight(self):
        """Running normalized weight including the one-sided Drude part."""
        drude_part = self.drude * self.sites / (2.0 * self.kinetic_mean)
        return drude_part + np.cumsum(self.sigma_normalized) * self.bin_width


def _pair_sums(energies, weights, J, bin_width, beta, degeneracy_tol):
    """Chunked accumulation of the finite-frequency and Drude pair sums."""
    E = np.asarray(energies, dtype=float)
    dim = len(E)
    thr = degeneracy_tol * max(E[-1] - E[0], 1e-300)
    nbins = int(np.ceil((E[-1] - E[0]) / bin_width)) + 1
    bins = np.zeros(nbins)
    drude_sum = 0.0       # sum over E_n != E_m of (p_n - p_m)/(E_m - E_n) |J_nm|^2
    degenerate_sum = 0.0  # sum over E_n == E_m (incl. n = m) of p_n |J_nm|^2
    for start in range(0, dim, _CHUNK):
        stop = min(start + _CHUNK, dim)
        Jblk = J[start:stop, :]
        absJ2 = np.abs(Jblk) ** 2
        omega = E[None, :] - E[start:stop, None]   # E_m - E_n
        pn = weights[start:stop, None]
        degenerate = np.abs(omega) <= thr
        drude_sum += np.sum(
            np.where(degenerate, 0.0, (pn - weights[None, :]) * absJ2
                     / np.where(degenerate, 1.0, omega))
        )
        degenerate_sum += np.sum(np.where(degenerate, pn * absJ2, 0.0))
        # positive-frequency histogram of p_n |J_nm|^2 (1 - e^{-beta w})/w
        pos = omega > thr
        w = omega[pos]
        contrib = np.broadcast_to(pn, omega.shape)[pos] * absJ2[pos]
        contrib = contrib * (-np.expm1(-beta * w)) / w
        which = np.floor(w / bin_width).astype(np.int64)
        bins += np.bincount(which, weights=contrib, minlength=nbins)
    return bins, drude_sum, degenerate_sum


def drude_weights(eig, J, T, beta, sites):
    """Drude weights (D_L, D-bar_L) from the spectral pair sums.

    D_L subtracts the off-degenerate pair sum from the thermal expectation
    of the stress tensor (identical to the kinetic energy operator here),
    D-bar_L keeps only the degenerate pairs.
    """
    E = eig.energies
    L = sites
    p = boltzmann_weights(E, beta)
    _, drude_sum, degenerate_sum = _pair_sums(E, p, J.matrix, max(eig.bandwidth, 1.0),
                                              beta, DEGENERACY_TOL)
    kinetic_mean = float(-(p @ np.real(np.diag(T.matrix))))
    D = (kinetic_mean - drude_sum) / L
    D_bar = beta * degenerate_sum / L
    return D, D_bar


def conductivity_profile(eig, J, T, beta, bin_width=0.01, sites=None):
    """Binned finite-frequency Re sigma(omega) plus Drude weights.

    Pairs with |E_m - E_n| below the degeneracy threshold go to the Drude
    channel; the rest accumulate (pi/L) (1-e^{-beta w})/w p_n |J_nm|^2 into
    bins of width ``bin_width``.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if beta <= 0:
        raise ValueError("beta must be positive (use e.g. 0.001 for high T)")
    if sites is None:
        raise ValueError("pass sites=L (the chain length entering 1/L factors)")
    E = eig.energies
    L = sites
    p = boltzmann_weights(E, beta)
    bins, drude_sum, degenerate_sum = _pair_sums(E, p, J.matrix, bin_width, beta,
                                                 DEGENERACY_TOL)
    kinetic_mean = float(-(p @ np.real(np.diag(T.matrix))))
    D = (kinetic_mean - drude_sum) / L
    D_bar = beta * degenerate_sum / L

    sigma = (np.pi / L) * bins / bin_width
    norm = L / (np.pi * kinetic_mean)
    total = norm * (np.pi * D / 2.0 + (np.pi / L) * bins.sum())
    residual = abs(total - 0.5)
    centers = (np.arange(len(bins)) + 0.5) * bin_width
    keep = np.nonzero(bins)[0]
    return ConductivityProfile(
        beta=beta,
        bin_width=bin_width,
        omegas=centers[keep],
        sigma=sigma[keep],
        sigma_normalized=norm * sigma[keep],
        drude=D,
        drude_bar=D_bar,
        kinetic_mean=kinetic_mean,
        sites=L,
        sum_rule_residual=residual,
    )


def peak_weight_xi(profile, omega_lo, omega_hi, baseline=0.0):
    """Twice the baseline-subtracted normalized area over [omega_lo, omega_hi]."""
    if omega_lo >= omega_hi:
        raise ValueError("need omega_lo < omega_hi")
    mask = (profile.omegas >= omega_lo) & (profile.omegas <= omega_hi)
    if not mask.any():
        raise ValueError("no conductivity bins inside the requested range")
    excess = np.clip(profile.sigma_normalized[mask] - baseline, 0.0, None)
    return float(2.0 * excess.sum() * profile.bin_width)


def lowest_peak(profile, floor=1e-12):
    """Center frequency of the first local maximum of the binned profile."""
    v = profile.sigma_normalized
    above = np.nonzero(v > floor * max(v.max(), 1.0))[0]
    if len(above) == 0:
        raise ValueError("profile is empty")
    first = above[0]
    k = first
    while k + 1 < len(v) and v[k + 1] >= v[k]:
        k += 1
    return float(profile.omegas[k])


# ---------------------------------------------------------------------------
# Free-fermion path: XX chains via the one-body spectrum, linear in L.
# Grand canonical at zero chemical potential; used for large-L checks where
# full diagonalization is out of reach.
# ---------------------------------------------------------------------------

@dataclass
class FreeFermionConductivity:
    profile: ConductivityProfile
    orbital_energies: np.ndarray


def xx_obc_conductivity(L, alpha=1.0, beta=0.001, bin_width=None):
    """Conductivity of the open XX chain from its single-particle modes.

    The hopping 2*alpha one-body matrix is diagonalized; pair weights
    f_p (1 - f_q) |j_qp|^2 with Fermi factors at mu = 0 reproduce the
    many-body grand-canonical sums exactly for this quadratic model.  The
    current carries the velocity normalization i[X, H] (see
    spinops.velocity_current).
    """
    if bin_width is None:
        bin_width = max(0.01, np.pi / L / 4)
    h = np.zeros((L, L))
    idx = np.arange(L - 1)
    h[idx, idx + 1] = h[idx + 1, idx] = 2.0 * alpha
    jmat = np.zeros((L, L), dtype=complex)
    jmat[idx, idx + 1] = -2j * alpha
    jmat[idx + 1, idx] = 2j * alpha
    eps, phi = np.linalg.eigh(h)
    jorb = phi.conj().T @ jmat @ phi
    f = 1.0 / (1.0 + np.exp(beta * eps))

    omega = eps[None, :] - eps[:, None]       # eps_q - eps_p
    absj2 = np.abs(jorb) ** 2
    thr = DEGENERACY_TOL * (eps[-1] - eps[0])
    pos = omega > thr
    w = omega[pos]
    weight = (f[:, None] * (1.0 - f[None, :]))[pos] * absj2[pos]
    contrib = weight * (-np.expm1(-beta * w)) / w
    nbins = int(np.ceil((eps[-1] - eps[0]) / bin_width)) + 1
    bins = np.bincount(np.floor(w / bin_width).astype(np.int64),
                       weights=contrib, minlength=nbins)

    off = np.abs(omega) > thr
    drude_sum = float(np.sum(
        np.where(off, (f[:, None] - f[None, :]) * absj2 / np.where(off, omega, 1.0), 0.0)
    ))
    deg_sum = float(np.sum(np.where(~off, f[:, None] * (1.0 - f[None, :]) * absj2, 0.0)))
    kinetic_mean = float(-(eps @ f))
    D = (kinetic_mean - drude_sum) / L
    D_bar = beta * deg_sum / L

    sigma = (np.pi / L) * bins / bin_width
    norm = L / (np.pi * kinetic_mean)
    total = norm * (np.pi * D / 2.0 + (np.pi / L) * bins.sum())
    centers = (np.arange(len(bins)) + 0.5) * bin_width
    keep = np.nonzero(bins)[0]
    profile = ConductivityProfile(
        beta=beta, bin_width=bin_width,
        omegas=centers[keep], sigma=sigma[keep],
        sigma_normalized=norm * sigma[keep],
        drude=D, drude_bar=D_bar, kinetic_mean=kinetic_mean, sites=L,
        sum_rule_residual=abs(total - 0.5),
    )
    return FreeFermionConductivity(profile=profile, orbital_energies=eps)
