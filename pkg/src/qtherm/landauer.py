"""Landauer-Buttiker benchmark: flat-band self-energies, transmission,
continuum currents, and engine sweeps for non-interacting chains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .mesoleads import engine_metrics


@dataclass
class TransmissionModel:
    h_sys: np.ndarray   # one-body chain matrix (see spinops.single_particle_matrix)
    Gamma: float        # flat-band system-lead coupling
    W: float            # reservoir half-bandwidth

    @property
    def sites(self):
        return self.h_sys.shape[0]


def self_energy(omega, Gamma, W):
    """Flat-band retarded lead self-energy, principal value done analytically.

    Sigma(w) = (1/2pi) PV int dw' J(w')/(w - w') - i J(w)/2, which for the
    flat band gives Lambda(w) = Gamma/(2 pi) ln|(W+w)/(W-w)| and
    Im = -J(w)/2 with J = Gamma inside the band, zero outside.  (This is the
    sign the damped-mode Lorentzian sum converges to.)
    """
    inside = abs(omega) < W
    num, den = abs(W + omega), abs(W - omega)
    if num == 0.0 or den == 0.0:
        return 0.0 - 0.5j * Gamma * inside  # band edge: |Lambda| -> inf, tau -> 0
    lam = Gamma / (2.0 * np.pi) * np.log(num / den)
    return lam - 0.5j * (Gamma if inside else 0.0)


def transmission(model, omega):
    """tau(w) = J^2 |G_1D|^2 with G = (w - H_S - Sigma_1 - Sigma_D)^-1."""
    omega = float(omega)
    if abs(omega) >= model.W:
        return 0.0
    D = model.sites
    sigma = self_energy(omega, model.Gamma, model.W)
    M = omega * np.eye(D, dtype=complex) - model.h_sys.astype(complex)
    M[0, 0] -= sigma
    M[D - 1, D - 1] -= sigma
    try:
        G = np.linalg.solve(M, np.eye(D, dtype=complex)[:, D - 1])
    except np.linalg.LinAlgError:
        sigma = self_energy(omega + 1e-12, model.Gamma, model.W)
        M = (omega + 1e-12) * np.eye(D, dtype=complex) - model.h_sys.astype(complex)
        M[0, 0] -= sigma
        M[D - 1, D - 1] -= sigma
        G = np.linalg.solve(M, np.eye(D, dtype=complex)[:, D - 1])
    return float(model.Gamma**2 * np.abs(G[0]) ** 2)


def transmission_curve(model, omegas):
    return np.array([transmission(model, w) for w in np.asarray(omegas, dtype=float)])


def fermi(omega, T, mu):
    x = (omega - mu) / T if T > 0 else np.sign(omega - mu) * np.inf
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(x))


def lb_currents(model, T_L, T_R, mu_L, mu_R, tol=1e-10):
    """Continuum particle and energy currents by adaptive quadrature.

    Integrates tau(w) [f_L - f_R] / 2 pi (and its first moment) over the
    band to absolute tolerance ``tol``, subdividing at the chain resonances.
    """
    W = model.W
    points = [float(e) for e in np.linalg.eigvalsh(model.h_sys) if abs(e) < W]
    points += [mu_L, mu_R]
    points = sorted(p for p in set(points) if abs(p) < W)

    def bias(w):
        return fermi(w, T_L, mu_L) - fermi(w, T_R, mu_R)

    def integrate(f):
        val, err = scipy.integrate.quad(
            f, -W, W, points=points or None, epsabs=tol, epsrel=1e-12, limit=400)
        if err > max(100 * tol, 1e-8):
            raise RuntimeError(
                f"quadrature error estimate {err:.2e} exceeds tolerance")
        return val

    jp = integrate(lambda w: transmission(model, w) * bias(w) / (2.0 * np.pi))
    je = integrate(lambda w: w * transmission(model, w) * bias(w) / (2.0 * np.pi))
    return jp, je


def lb_engine_sweep(model, mu_values, bias_values, T_L, T_R):
    """(P, eta, currents) over a chemical-potential / bias grid."""
    rows = []
    for mu in np.atleast_1d(mu_values):
        for V in np.atleast_1d(bias_values):
            mu_L, mu_R = mu - V / 2.0, mu + V / 2.0
            jp, je = lb_currents(model, T_L, T_R, mu_L, mu_R)
            met = engine_metrics(jp, je, T_L, T_R, mu_L, mu_R)
            rows.append({
                "mu": float(mu), "V": float(V), "T_L": T_L, "T_R": T_R,
                "JP": jp, "JE": je, "P": met.power,
                "QL": met.heat_left, "QR": met.heat_right,
                "eta": met.efficiency, "eta_carnot": met.carnot,
            })
    return rows
