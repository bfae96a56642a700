"""Correlation dynamics: exact and ETH-reconstructed two-point functions,
fluctuation-dissipation fits, quantum Fisher information, square-commutator
OTOCs (exact / ETH-uncorrelated / typicality + Krylov), and the driven
heating-relaxation experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.optimize
import scipy.sparse as sp

from . import spinops
from .ethstats import FrequencyProfile
from .spectra import boltzmann_weights, diagonalize


@dataclass
class CorrelationSeries:
    """Complex two-point function on a time grid, tagged with its origin."""

    times: np.ndarray
    values: np.ndarray
    provenance: str  # canonical-exact | eth-reconstructed | eigenstate


@dataclass
class QfiReport:
    betas: np.ndarray
    f_gibbs: np.ndarray
    f_eth: np.ndarray
    sites: int | None = None

    def densities(self):
        if not self.sites:
            raise ValueError("site count unknown; pass sites= to qfi()")
        return self.f_gibbs / self.sites, self.f_eth / self.sites


# ---------------------------------------------------------------------------
# two-point functions
# ---------------------------------------------------------------------------

def f2_canonical(eig, om, beta, times):
    """Connected <O(t) O(0)> in the canonical ensemble, by eigenbasis sums."""
    E = eig.energies
    p = boltzmann_weights(E, beta)
    A = p[:, None] * np.abs(om.matrix) ** 2   # p_n O_nm O_mn (Hermitian O)
    diag_mean = float(p @ np.real(np.diag(om.matrix)))
    t = np.asarray(times, dtype=float)
    vals = np.empty(len(t), dtype=complex)
    for k, tk in enumerate(t):
        phase_m = np.exp(-1j * E * tk)
        vals[k] = np.exp(1j * E * tk) @ (A @ phase_m)
    vals -= diag_mean**2
    return CorrelationSeries(times=t, values=vals, provenance="canonical-exact")


def eth_reconstruct(profile, beta, sum_rule, times):
    """Two-point function from the |f|^2 frequency profile.

    ``profile`` holds binned mean |O_nm|^2 values; the symmetric and
    antisymmetric spectral functions are cosh/sinh-weighted copies of it,
    normalized so the symmetric one integrates (two-sidedly) to
    ``sum_rule`` = 4 pi <Delta O^2>, which removes the entropy prefactor.
    """
    if sum_rule <= 0:
        raise ValueError("sum rule must be positive (did the window variance vanish?)")
    w = profile.omegas
    s_plus = np.cosh(beta * w / 2.0) * profile.values
    area = np.trapezoid(s_plus, w)
    if area <= 0:
        raise ValueError("profile carries no spectral weight")
    s_plus = s_plus * (sum_rule / 2.0) / area
    s_minus = np.tanh(beta * w / 2.0) * s_plus
    t = np.asarray(times, dtype=float)
    cos_t = np.cos(np.outer(t, w))
    sin_t = np.sin(np.outer(t, w))
    re = np.trapezoid(cos_t * s_plus, w, axis=1) / (2.0 * np.pi)
    im = -np.trapezoid(sin_t * s_minus, w, axis=1) / (2.0 * np.pi)
    return CorrelationSeries(times=t, values=re + 1j * im, provenance="eth-reconstructed")


def response_profiles(om, beta, target_energy, window=0.1, bin_width=0.05):
    """Canonical noise and response spectral functions S+(w), S-(w).

    Pair sums restricted to eigenstate pairs whose mean energy lies in the
    window: S+ collects (p_n + p_m)|O_nm|^2 and S- collects
    (p_n - p_m)|O_nm|^2, binned over omega = E_m - E_n > 0.  Their ratio is
    the fluctuation-dissipation factor tanh(beta w / 2) up to binning error.
    """
    E = om.energies
    p = boltzmann_weights(E, beta)
    half = window * om.bandwidth / 2.0
    n_idx, m_idx = np.triu_indices(len(E), k=1)
    ebar = (E[n_idx] + E[m_idx]) / 2.0
    keep = np.abs(ebar - target_energy) <= half
    n_idx, m_idx = n_idx[keep], m_idx[keep]
    if len(n_idx) == 0:
        raise ValueError("no eigenstate pairs inside the energy window")
    omega = E[m_idx] - E[n_idx]
    abs2 = np.abs(om.matrix[n_idx, m_idx]) ** 2
    which = np.floor(omega / bin_width).astype(np.int64)
    nbins = int(which.max()) + 1
    plus = np.bincount(which, weights=(p[n_idx] + p[m_idx]) * abs2, minlength=nbins)
    minus = np.bincount(which, weights=(p[n_idx] - p[m_idx]) * abs2, minlength=nbins)
    counts = np.bincount(which, minlength=nbins)
    sel = np.nonzero(counts)[0]
    centers = (sel + 0.5) * bin_width
    scale = 2.0 * np.pi / (bin_width * max(p[n_idx].sum(), 1e-300))
    mk = lambda v: FrequencyProfile(centers, v[sel] * scale, counts[sel],
                                    target_energy, window, bin_width)
    return mk(plus), mk(minus)


def fdt_beta_fit(s_plus, s_minus, omega_max):
    """Inverse temperature from fitting tanh(beta w/2) to S-/S+."""
    if len(s_plus.omegas) != len(s_minus.omegas) or not np.allclose(
            s_plus.omegas, s_minus.omegas):
        raise ValueError("profiles must share frequency bins")
    mask = (s_plus.omegas <= omega_max) & (s_plus.values > 0)
    w = s_plus.omegas[mask]
    if len(w) == 0:
        raise ValueError("no usable bins below omega_max")
    ratio = s_minus.values[mask] / s_plus.values[mask]
    if np.allclose(ratio, 0.0, atol=1e-15):
        return 0.0
    if np.abs(ratio).max() < 1e-12:
        raise ValueError("degenerate ratio: all bins vanish")
    beta0 = max(2.0 * ratio[0] / w[0], 1e-6)
    popt, _ = scipy.optimize.curve_fit(
        lambda x, b: np.tanh(b * x / 2.0), w, ratio, p0=[beta0], maxfev=10_000)
    return float(popt[0])


# ---------------------------------------------------------------------------
# quantum Fisher information
# ---------------------------------------------------------------------------

def pure_state_qfi(om, index):
    """QFI of a single eigenstate: four times the operator variance."""
    col = om.matrix[:, index]
    variance = float(np.sum(np.abs(col) ** 2) - np.real(col[index]) ** 2)
    return 4.0 * variance


def qfi(eig, om, betas, window=0.1, sites=None):
    """Gibbs vs eigenstate (ETH) quantum Fisher information on a beta grid.

    F_Gibbs is the Braunstein-Caves double sum; F_ETH is four times the
    eigenstate variance of the observable, Boltzmann-averaged over the
    eigenstates inside the energy window around the thermal mean energy
    (plain window average at beta = 0, single-state value as beta -> inf).
    """
    E = eig.energies
    M2 = np.abs(om.matrix) ** 2
    variances = M2.sum(axis=1) - np.real(np.diag(om.matrix)) ** 2
    f_gibbs = np.empty(len(betas))
    f_eth = np.empty(len(betas))
    half = window * om.bandwidth / 2.0
    for k, beta in enumerate(betas):
        p = boltzmann_weights(E, beta)
        psum = p[:, None] + p[None, :]
        pdif = p[:, None] - p[None, :]
        safe = psum > 1e-300
        f_gibbs[k] = 2.0 * float(
            np.sum(np.where(safe, pdif**2 / np.where(safe, psum, 1.0), 0.0) * M2))
        e_mean = float(p @ E)
        mask = np.abs(E - e_mean) <= half
        pw = p[mask]
        f_eth[k] = 4.0 * float(pw @ variances[mask] / pw.sum())
    return QfiReport(betas=np.asarray(betas, dtype=float), f_gibbs=f_gibbs,
                     f_eth=f_eth, sites=sites)


# ---------------------------------------------------------------------------
# square-commutator OTOCs
# ---------------------------------------------------------------------------

def otoc_exact(eig, om, beta, times):
    """c(t) = -(<[O(t),O]^2> - <[O(t),O]>^2) by dense eigenbasis products."""
    E = eig.energies
    p = boltzmann_weights(E, beta)
    O = om.matrix
    t = np.asarray(times, dtype=float)
    out = np.empty(len(t))
    for k, tk in enumerate(t):
        phase = np.exp(1j * E * tk)
        Ot = (phase[:, None] * O) * phase.conj()[None, :]
        K = Ot @ O - O @ Ot
        # K is anti-Hermitian: <K^2> = -sum_n p_n sum_m |K_mn|^2
        k2 = -float(p @ (np.abs(K) ** 2).sum(axis=0))
        k1 = complex(p @ np.diag(K))
        out[k] = -(k2 - np.real(k1**2))
    return out


def otoc_eth_uncorrelated(f2):
    """Leading uncorrelated-ETH square commutator 2|F2(0)|^2 - 2|F2(t)|^2."""
    v0 = f2.values[np.argmin(np.abs(f2.times))]
    return 2.0 * np.abs(v0) ** 2 - 2.0 * np.abs(f2.values) ** 2


def saturation_time(times, values, eps=0.99, window=0.5, tail_fraction=0.1):
    """First time the running-averaged signal reaches eps of its tail value."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    n_tail = max(2, int(len(t) * tail_fraction))
    target = eps * v[-n_tail:].mean()
    for k, tk in enumerate(t):
        near = np.abs(t - tk) <= window
        if v[near].mean() >= target:
            return float(tk)
    return float(t[-1])


# ---------------------------------------------------------------------------
# Krylov propagation
# ---------------------------------------------------------------------------

def krylov_evolve(H, psi, t, m=30, dt_max=0.1, tol=1e-10):
    """Approximate exp(-i H t) psi by time-stepped Arnoldi projection.

    Each sub-step projects H onto an m-dimensional Krylov space (with
    re-orthogonalization) and propagates with the small dense exponential;
    the a-priori step error estimate beta * h_{m+1,m} * |u_m| * tau is kept
    below ``tol`` by halving the step when needed.  Happy breakdown (the
    Krylov space closes) terminates the recursion exactly.
    """
    if m < 4:
        raise ValueError("Krylov dimension m must be at least 4")
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"state must be normalized (got |psi| = {nrm:.2e})")
    matvec = (lambda v: H @ v) if sp.issparse(H) else (lambda v: np.asarray(H) @ v)
    dim = len(psi)
    m = min(m, dim)

    remaining = float(t)
    sign = 1.0 if remaining >= 0 else -1.0
    remaining = abs(remaining)
    while remaining > 1e-15:
        tau = min(dt_max if dt_max else remaining, remaining)
        beta = np.linalg.norm(psi)
        V = np.empty((dim, m + 1), dtype=complex)
        h = np.zeros((m + 1, m), dtype=complex)
        V[:, 0] = psi / beta
        breakdown = m
        for j in range(m):
            w = matvec(V[:, j])
            for _ in range(2):  # re-orthogonalize
                coeffs = V[:, : j + 1].conj().T @ w
                w = w - V[:, : j + 1] @ coeffs
                h[: j + 1, j] += coeffs
            h[j + 1, j] = np.linalg.norm(w)
            if np.abs(h[j + 1, j]) < 1e-14 * max(1.0, np.abs(h[: j + 1, j]).max()):
                breakdown = j + 1
                break
            V[:, j + 1] = w / h[j + 1, j]
        mm = breakdown
        Hm = h[:mm, :mm]
        while True:
            u = la.expm(-1j * sign * tau * Hm)[:, 0]
            if mm < m:  # exact in the closed subspace
                err = 0.0
            else:
                err = float(beta * np.abs(h[mm, mm - 1]) * np.abs(u[-1]) * tau)
            if err <= tol or tau < 1e-12:
                break
            tau /= 2.0
        psi = beta * (V[:, :mm] @ u)
        remaining -= tau
    return psi


def otoc_typicality(H, O, times, n_samples=100, seed=0, m=30, dt_max=0.1,
                    target_stderr=0.01, min_samples=8):
    """Infinite-temperature square commutator from Haar-random states.

    Per sample and time, [O(t), O]|psi> is assembled from four Krylov
    evolutions (two backward, two forward).  Sampling stops early once the
    standard error is below ``target_stderr`` of the mean at every t > 0.
    Returns (mean, standard error, samples used).
    """
    t = np.asarray(times, dtype=float)
    dim = O.shape[0]
    Omat = O.tocsr() if sp.issparse(O) else np.asarray(O)
    seeds = np.random.SeedSequence(seed).spawn(n_samples)
    acc = np.zeros(len(t))
    acc2 = np.zeros(len(t))
    used = 0
    for s in range(n_samples):
        rng = np.random.default_rng(seeds[s])
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi /= np.linalg.norm(psi)
        row = np.empty(len(t))
        for k, tk in enumerate(t):
            if tk == 0.0:
                row[k] = 0.0
                continue
            a = Omat @ psi
            na = np.linalg.norm(a)
            b = krylov_evolve(H, a / na, -tk, m=m, dt_max=dt_max) * na
            d = Omat @ b
            nd = np.linalg.norm(d)
            d = krylov_evolve(H, d / nd, tk, m=m, dt_max=dt_max) * nd
            e = krylov_evolve(H, psi, -tk, m=m, dt_max=dt_max)
            f = Omat @ e
            nf = np.linalg.norm(f)
            g = krylov_evolve(H, f / nf, tk, m=m, dt_max=dt_max) * nf
            hvec = Omat @ g
            u = d - hvec
            k1 = complex(np.vdot(psi, u))
            row[k] = float(np.linalg.norm(u) ** 2 + np.real(k1**2))
        acc += row
        acc2 += row**2
        used += 1
        if used >= min_samples:
            mean = acc / used
            var = np.maximum(acc2 / used - mean**2, 0.0)
            stderr = np.sqrt(var / used)
            nz = t > 0
            if np.all(stderr[nz] <= target_stderr * np.maximum(np.abs(mean[nz]), 1e-300)):
                break
    mean = acc / used
    var = np.maximum(acc2 / used - mean**2, 0.0)
    return mean, np.sqrt(var / used), used


# ---------------------------------------------------------------------------
# driven heating-relaxation experiment
# ---------------------------------------------------------------------------

@dataclass
class DrivenResult:
    prep_times: np.ndarray
    prep_energy: np.ndarray
    mean_energy: float        # <H> when the drive switches off
    relax_times: np.ndarray
    observables: dict = field(default_factory=dict)
    norm_drift: float = 0.0
    dt_used: float = 0.0


def driven_relaxation(H, drive_op, amplitude, omega0, t_prep, observables,
                      dt=0.01, t_relax=50.0, psi0=None, record_stride=10,
                      max_halvings=6):
    """Drive a chain from its ground state, then watch it relax.

    H(t) = H + amplitude sin(omega0 t) drive_op is integrated with RK4 up to
    ``t_prep`` (the step is halved until the norm drift stays below 1e-6;
    drift beyond 1e-4 aborts).  The drive is then removed and expectation
    values of ``observables`` (a name -> operator dict) are recorded on a
    uniform grid during unitary relaxation under H alone.
    """
    Hs = H.tocsr() if sp.issparse(H) else sp.csr_matrix(H)
    V = drive_op.tocsr() if sp.issparse(drive_op) else sp.csr_matrix(drive_op)
    if psi0 is None:
        eig = diagonalize(Hs)
        psi0 = eig.vectors[:, 0].astype(complex)
    psi0 = np.asarray(psi0, dtype=complex)

    for _ in range(max_halvings + 1):
        psi, prep_t, prep_e = _rk4_drive(Hs, V, amplitude, omega0, psi0, t_prep, dt,
                                         record_stride)
        drift = abs(np.linalg.norm(psi) - 1.0)
        if drift < 1e-6:
            break
        dt /= 2.0
    if drift > 1e-4:
        raise RuntimeError(f"norm drift {drift:.2e} > 1e-4 at dt={dt:.2e}; "
                           "reduce the step size")
    psi /= np.linalg.norm(psi)

    e_mean = float(np.real(np.vdot(psi, Hs @ psi)))
    n_rec = max(2, int(round(t_relax / (dt * record_stride))))
    relax_times = np.linspace(0.0, t_relax, n_rec)
    series = {name: np.empty(n_rec) for name in observables}
    step = relax_times[1] - relax_times[0]
    cur = psi.copy()
    for k in range(n_rec):
        for name, op in observables.items():
            series[name][k] = float(np.real(np.vdot(cur, op @ cur)))
        if k + 1 < n_rec:
            cur = krylov_evolve(Hs, cur, step, m=30, dt_max=min(step, 0.2))
    return DrivenResult(
        prep_times=prep_t, prep_energy=prep_e, mean_energy=e_mean,
        relax_times=relax_times, observables=series,
        norm_drift=drift, dt_used=dt,
    )


def _rk4_drive(Hs, V, a, omega0, psi0, t_prep, dt, record_stride):
    def rhs(tau, v):
        return -1j * (Hs @ v + (a * np.sin(omega0 * tau)) * (V @ v))

    psi = psi0.copy()
    nsteps = int(np.ceil(t_prep / dt)) if t_prep > 0 else 0
    times, energies = [0.0], [float(np.real(np.vdot(psi, Hs @ psi)))]
    tcur = 0.0
    for n in range(nsteps):
        step = min(dt, t_prep - tcur)
        k1 = rhs(tcur, psi)
        k2 = rhs(tcur + step / 2, psi + step / 2 * k1)
        k3 = rhs(tcur + step / 2, psi + step / 2 * k2)
        k4 = rhs(tcur + step, psi + step * k3)
        psi = psi + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tcur += step
        if (n + 1) % record_stride == 0 or n == nsteps - 1:
            times.append(tcur)
            energies.append(float(np.real(np.vdot(psi, Hs @ psi))))
    return psi, np.asarray(times), np.asarray(energies)
