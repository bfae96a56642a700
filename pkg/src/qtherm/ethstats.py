"""Statistics of observable matrix elements in the energy eigenbasis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

HERMITICITY_TOL = 1e-10


@dataclass
class ObservableMatrix:
    """A Hermitian observable rotated into an energy eigenbasis."""

    matrix: np.ndarray
    energies: np.ndarray
    extensive: bool = False

    @property
    def dim(self):
        return len(self.energies)

    @property
    def bandwidth(self):
        return float(self.energies[-1] - self.energies[0])

    def diagonal(self):
        return np.real(np.diag(self.matrix))


@dataclass
class FrequencyProfile:
    """Binned frequency-resolved statistic of off-diagonal matrix elements."""

    omegas: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    target_energy: float = 0.0
    window: float = 0.0
    bin_width: float = 0.0


def to_eigenbasis(op, eig, extensive=False):
    """Rotate a sparse or dense operator into the energy eigenbasis."""
    U = eig.vectors
    if sp.issparse(op):
        if op.shape[0] != U.shape[0]:
            raise ValueError(f"operator dim {op.shape[0]} != eigensystem dim {U.shape[0]}")
        rotated = U.conj().T @ (op @ U)
    else:
        op = np.asarray(op)
        if op.shape[0] != U.shape[0]:
            raise ValueError(f"operator dim {op.shape[0]} != eigensystem dim {U.shape[0]}")
        rotated = U.conj().T @ op @ U
    defect = np.abs(rotated - rotated.conj().T).max()
    scale = max(1.0, np.abs(rotated).max())
    if defect > HERMITICITY_TOL * scale:
        raise ValueError(f"rotation lost Hermiticity (defect {defect:.2e})")
    return ObservableMatrix(matrix=rotated, energies=eig.energies, extensive=extensive)


def diagonal_profile(om, central_fraction=0.2, coarse_bins=50):
    """Diagonal matrix elements vs normalized energy density.

    Returns ``(eps_n, O_nn, coarse)`` plus the eigenstate-to-eigenstate
    fluctuation mean |O_nn - O_{n+1,n+1}| over the central
    ``central_fraction`` of the spectrum.
    """
    if not (0.0 < central_fraction <= 1.0):
        raise ValueError("central_fraction must lie in (0, 1]")
    E = om.energies
    diag = om.diagonal()
    eps = (E - E[0]) / (E[-1] - E[0])
    n = len(E)
    lo = int(round(n * (0.5 - central_fraction / 2.0)))
    hi = max(lo + 2, int(round(n * (0.5 + central_fraction / 2.0))))
    ete = float(np.abs(np.diff(diag[lo:hi])).mean())
    edges = np.linspace(0.0, 1.0, coarse_bins + 1)
    which = np.clip(np.digitize(eps, edges) - 1, 0, coarse_bins - 1)
    sums = np.bincount(which, weights=diag, minlength=coarse_bins)
    counts = np.bincount(which, minlength=coarse_bins)
    mask = counts > 0
    coarse = ((edges[:-1] + edges[1:]) / 2.0)[mask], sums[mask] / counts[mask]
    return eps, diag, coarse, ete


def _window_pairs(om, target_energy, window):
    """Index pairs (n, m), n < m, whose mean energy lies in the window."""
    E = om.energies
    half = window * om.bandwidth / 2.0
    # mean energy (E_n + E_m)/2 within half of the target
    lo, hi = target_energy - half, target_energy + half
    n_idx, m_idx = np.triu_indices(len(E), k=1)
    ebar = (E[n_idx] + E[m_idx]) / 2.0
    keep = (ebar >= lo) & (ebar <= hi)
    return n_idx[keep], m_idx[keep]


def _binned(om, n_idx, m_idx, bin_width, reduce_fn):
    E = om.energies
    omega = E[m_idx] - E[n_idx]
    vals = om.matrix[n_idx, m_idx]
    which = np.floor(omega / bin_width).astype(np.int64)
    nbins = int(which.max()) + 1 if len(which) else 0
    counts = np.bincount(which, minlength=nbins)
    out_bins = np.nonzero(counts)[0]
    centers = (out_bins + 0.5) * bin_width
    values = reduce_fn(vals, which, nbins)[out_bins]
    return centers, values, counts[out_bins]


def offdiag_f2_profile(om, target_energy, window=0.05, bin_width=0.05):
    """Mean |O_nm|^2 vs omega in an energy window around ``target_energy``."""
    if window <= 0:
        raise ValueError("window must be positive")
    n_idx, m_idx = _window_pairs(om, target_energy, window)
    if len(n_idx) == 0:
        raise ValueError("no eigenstate pairs inside the energy window")

    def mean_abs2(vals, which, nbins):
        s = np.bincount(which, weights=np.abs(vals) ** 2, minlength=nbins)
        c = np.maximum(np.bincount(which, minlength=nbins), 1)
        return s / c

    centers, values, counts = _binned(om, n_idx, m_idx, bin_width, mean_abs2)
    return FrequencyProfile(centers, values, counts, target_energy, window, bin_width)


def gamma_ratio_profile(om, target_energy, window=0.05, bin_width=0.05, min_count=10):
    """Gaussianity ratio mean|O_nm|^2 / (mean|O_nm|)^2 per frequency bin.

    Bins holding fewer than ``min_count`` pairs are suppressed.  The ratio is
    pi/2 for zero-mean Gaussian matrix elements.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    n_idx, m_idx = _window_pairs(om, target_energy, window)
    if len(n_idx) == 0:
        raise ValueError("no eigenstate pairs inside the energy window")
    E = om.energies
    omega = E[m_idx] - E[n_idx]
    vals = np.abs(om.matrix[n_idx, m_idx])
    which = np.floor(omega / bin_width).astype(np.int64)
    nbins = int(which.max()) + 1
    counts = np.bincount(which, minlength=nbins)
    sum_abs = np.bincount(which, weights=vals, minlength=nbins)
    sum_abs2 = np.bincount(which, weights=vals**2, minlength=nbins)
    keep = counts >= min_count
    out = np.nonzero(keep)[0]
    mean_abs = sum_abs[out] / counts[out]
    mean_abs2 = sum_abs2[out] / counts[out]
    gamma = np.where(mean_abs > 0, mean_abs2 / np.maximum(mean_abs, 1e-300) ** 2, np.inf)
    centers = (out + 0.5) * bin_width
    return FrequencyProfile(centers, gamma, counts[out], target_energy, window, bin_width)


@dataclass
class BandedTestResult:
    """Spectra of a frequency-banded submatrix and its sign-randomized twin."""

    eigenvalues: np.ndarray
    randomized_eigenvalues: np.ndarray
    hist_bins: np.ndarray
    hist_density: np.ndarray
    randomized_hist_bins: np.ndarray
    randomized_hist_density: np.ndarray
    r_mean: float
    submatrix_dim: int
    omega_c: float
    localized: bool = False


def _fd_histogram(values, bins=None):
    if bins is None:
        bins = "fd"  # Freedman-Diaconis
    density, edges = np.histogram(values, bins=bins, density=True)
    return (edges[:-1] + edges[1:]) / 2.0, density


def banded_goe_test(om, target_energy, omega_c, window=0.125, seed=0, bins=None):
    """Eigenvalue statistics of a banded submatrix around ``target_energy``.

    A submatrix spanning ``window`` of the bandwidth is cut around the
    eigenstate closest to the target energy, entries with |E_m - E_n| >=
    omega_c are zeroed, and the spectrum is compared against a
    Hermiticity-preserving sign-randomized copy (seeded).  The mean adjacent
    gap ratio of the banded spectrum is returned; values below 0.45 flag the
    localized small-omega_c regime.
    """
    if omega_c < 0:
        raise ValueError("omega_c must be >= 0")
    E = om.energies
    center = int(np.argmin(np.abs(E - target_energy)))
    half = window * om.bandwidth / 2.0
    sel = np.nonzero(np.abs(E - E[center]) <= half)[0]
    if len(sel) < 50:
        raise ValueError(f"submatrix dimension {len(sel)} < 50; widen the window")
    sub = om.matrix[np.ix_(sel, sel)].copy()
    Esub = E[sel]
    if omega_c == 0:
        sub = np.diag(np.diag(sub))
    else:
        omega = np.abs(Esub[:, None] - Esub[None, :])
        sub[omega >= omega_c] = 0.0

    rng = np.random.default_rng(seed)
    signs = np.where(rng.random(sub.shape) < 0.5, -1.0, 1.0)
    signs = np.triu(signs, k=1)
    signs = signs + signs.T + np.eye(len(sel))  # joint (n,m)/(m,n) flips keep Hermiticity
    randomized = sub * signs

    evals = np.linalg.eigvalsh(sub)
    evals_rand = np.linalg.eigvalsh(randomized)
    spacings = np.diff(evals)
    spacings = spacings[spacings > 0]
    r_mean = float(np.mean(np.minimum(spacings[:-1], spacings[1:])
                           / np.maximum(spacings[:-1], spacings[1:])))
    hb, hd = _fd_histogram(evals, bins)
    rb, rd = _fd_histogram(evals_rand, bins)
    return BandedTestResult(
        eigenvalues=evals,
        randomized_eigenvalues=evals_rand,
        hist_bins=hb,
        hist_density=hd,
        randomized_hist_bins=rb,
        randomized_hist_density=rd,
        r_mean=r_mean,
        submatrix_dim=len(sel),
        omega_c=omega_c,
        localized=r_mean < 0.45,
    )
