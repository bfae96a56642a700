"""Full diagonalization, level statistics, and thermal-ensemble utilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

DEGENERACY_FLOOR = 1e-13  # spacings below this * bandwidth count as degenerate


@dataclass
class EnergyEigensystem:
    """Ascending eigenvalues and the unitary that diagonalizes H."""

    energies: np.ndarray
    vectors: np.ndarray  # columns are eigenstates

    @property
    def dim(self):
        return len(self.energies)

    @property
    def bandwidth(self):
        return float(self.energies[-1] - self.energies[0])


@dataclass
class GapStatistics:
    r_mean: float
    spacing_bins: np.ndarray      # bin centers of the unfolded-spacing histogram
    spacing_density: np.ndarray   # P(s), integrates to 1
    kept_fraction: float
    n_degenerate_dropped: int


def diagonalize(H):
    """Dense eigensolve of a Hermitian operator (sparse or ndarray)."""
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
    if np.abs(Hd - Hd.conj().T).max() > 1e-12 * max(1.0, np.abs(Hd).max()):
        raise ValueError("diagonalize expects a Hermitian matrix")
    energies, vectors = la.eigh(Hd)
    return EnergyEigensystem(energies=energies, vectors=vectors)


def gap_ratio_stats(energies, keep_fraction=0.8, unfold_window=20, bins=40):
    """Mean adjacent-gap ratio and the unfolded spacing distribution.

    The central ``keep_fraction`` of the sorted spectrum is used.  Spacings
    smaller than 1e-13 * bandwidth count as numerical degeneracies and are
    dropped (their number is reported).  P(s) is computed on spacings
    rescaled by a moving-average local mean over ``unfold_window``
    neighbours, so that the local mean spacing is one.
    """
    E = np.sort(np.asarray(energies, dtype=float))
    if not (0.0 < keep_fraction <= 1.0):
        raise ValueError("keep_fraction must lie in (0, 1]")
    n = len(E)
    cut = int(round(n * (1.0 - keep_fraction) / 2.0))
    E = E[cut:n - cut] if cut else E
    if len(E) < 101:
        raise ValueError("need at least 100 eigenvalues after truncation")
    bandwidth = E[-1] - E[0]
    s = np.diff(E)
    degenerate = s < DEGENERACY_FLOOR * bandwidth
    n_dropped = int(degenerate.sum())
    s = s[~degenerate]

    ratios = np.minimum(s[:-1], s[1:]) / np.maximum(s[:-1], s[1:])
    r_mean = float(ratios.mean())

    # unfold: divide each spacing by the mean spacing of its neighbourhood
    w = max(1, int(unfold_window))
    kernel = np.ones(2 * w + 1) / (2 * w + 1)
    local_mean = np.convolve(s, kernel, mode="same")
    norm = np.convolve(np.ones_like(s), kernel, mode="same")  # edge correction
    unfolded = s / (local_mean / norm)
    density, edges = np.histogram(unfolded, bins=bins, density=True)
    centers = (edges[:-1] + edges[1:]) / 2.0

    return GapStatistics(
        r_mean=r_mean,
        spacing_bins=centers,
        spacing_density=density,
        kept_fraction=keep_fraction,
        n_degenerate_dropped=n_dropped,
    )


def spectral_form_factor(energies, times):
    """|Z(t)|^2 = |sum_a exp(-i E_a t)|^2 on the given time grid."""
    E = np.asarray(energies, dtype=float)
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.size == 0:
        raise ValueError("empty time grid")
    phases = np.exp(-1j * np.outer(t, E))
    return np.abs(phases.sum(axis=1)) ** 2


def boltzmann_weights(energies, beta):
    """Normalized exp(-beta E) with an overflow-safe shift; beta = 0 is T = inf."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    E = np.asarray(energies, dtype=float)
    w = np.exp(-beta * (E - E.min()))
    return w / w.sum()


def thermal_quantities(eig, beta, observable=None):
    """Partition data and thermal averages at inverse temperature beta.

    Returns ``(Z, E_mean, O_mean, O_var)``.  ``observable`` may be None, a
    1-D array of diagonal matrix elements in the energy basis (the variance
    is then the classical variance over that diagonal), or a full matrix in
    the energy basis, in which case [O^2]_nn = sum_m |O_nm|^2 enters the
    variance.
    """
    E = eig.energies
    p = boltzmann_weights(E, beta)
    with np.errstate(over="ignore"):
        Z = float(np.exp(-beta * E).sum())
    E_mean = float(p @ E)
    if observable is None:
        return Z, E_mean, None, None
    O = np.asarray(observable)
    if O.ndim == 1:
        diag = np.real(O)
        o2_diag = diag**2
    else:
        diag = np.real(np.diag(O))
        o2_diag = (np.abs(O) ** 2).sum(axis=1)
    o_mean = float(p @ diag)
    o_var = float(p @ o2_diag - o_mean**2)
    return Z, E_mean, o_mean, o_var


def mean_energy_of_beta(eig, beta):
    _, e_mean, _, _ = thermal_quantities(eig, beta)
    return e_mean


def microcanonical_average(diagonal, energies, target_energy, window=0.1):
    """Mean of O_nn over |E_n - E*| <= window * bandwidth / 2."""
    if window <= 0:
        raise ValueError("window must be positive")
    E = np.asarray(energies, dtype=float)
    diag = np.real(np.asarray(diagonal))
    half = window * (E.max() - E.min()) / 2.0
    mask = np.abs(E - target_energy) <= half
    if not mask.any():
        nearest = E[np.argmin(np.abs(E - target_energy))]
        raise ValueError(
            f"no eigenvalue within {half:g} of E*={target_energy:g}; nearest is {nearest:g}"
        )
    return float(diag[mask].mean())
