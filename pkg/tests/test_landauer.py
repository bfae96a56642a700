import numpy as np
import pytest

from qtherm import landauer
from qtherm import spinops as so


def chain_model(eps, t_s=1.0, Gamma=1.0, W=8.0):
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    spec = so.ModelSpec(kind="fermion-chain", sites=len(eps), eps=eps, t_s=t_s)
    return landauer.TransmissionModel(h_sys=so.single_particle_matrix(spec),
                                      Gamma=Gamma, W=W)


# ---------------------------------------------------------------------------
# transmission
# ---------------------------------------------------------------------------

def test_resonant_level_unit_transmission():
    model = chain_model([0.0])
    assert landauer.transmission(model, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_transmission_zero_outside_band():
    model = chain_model([0.0])
    assert landauer.transmission(model, 9.0) == 0.0
    assert landauer.transmission(model, -8.0) == 0.0


def test_transmission_bounded_by_one():
    model = chain_model([0.25, 0.5, 0.75])
    tau = landauer.transmission_curve(model, np.linspace(-7.9, 7.9, 801))
    assert tau.max() <= 1.0 + 1e-9
    assert tau.min() >= 0.0


def test_three_site_resonances_near_eigenvalues():
    model = chain_model([0.25, 0.5, 0.75], t_s=1.0, Gamma=1.0)
    w = np.linspace(-4.0, 4.0, 4001)
    tau = landauer.transmission_curve(model, w)
    eigs = np.linalg.eigvalsh(model.h_sys)
    # three peaks, each within Gamma of a chain eigenvalue
    peaks = []
    for k in range(1, len(w) - 1):
        if tau[k] > tau[k - 1] and tau[k] > tau[k + 1] and tau[k] > 0.5:
            peaks.append(w[k])
    assert len(peaks) == 3
    assert np.abs(np.asarray(peaks) - eigs).max() < 1.0


def test_transmission_particle_hole_symmetry():
    # eps_j = 0 chains: tau is even in omega
    model = chain_model([0.0, 0.0, 0.0, 0.0])
    w = np.linspace(0.1, 7.5, 40)
    tau_p = landauer.transmission_curve(model, w)
    tau_m = landauer.transmission_curve(model, -w)
    assert np.abs(tau_p - tau_m).max() < 1e-12


def test_lorentzian_shape_single_level():
    # weak coupling: half-width at half-maximum approaches Gamma
    model = chain_model([0.0], Gamma=0.2)
    tau_half = landauer.transmission(model, 0.2)
    assert tau_half == pytest.approx(0.5, abs=0.02)


# ---------------------------------------------------------------------------
# currents
# ---------------------------------------------------------------------------

def test_currents_vanish_in_equilibrium():
    model = chain_model([0.3])
    jp, je = landauer.lb_currents(model, 1.0, 1.0, 0.2, 0.2)
    assert abs(jp) < 1e-12
    assert abs(je) < 1e-12


def test_box_transmission_low_temperature_limit():
    # tau ~ 1 across the bias window, T -> 0: J_P -> (mu_L - mu_R) / 2 pi
    model = chain_model([0.0], Gamma=50.0, W=8.0)  # overdamped: tau ~ 1 mid-band
    tau_mid = landauer.transmission_curve(model, np.linspace(-0.1, 0.1, 5))
    assert np.all(tau_mid > 0.9999)
    jp, _ = landauer.lb_currents(model, 1e-3, 1e-3, 0.1, -0.1)
    assert jp == pytest.approx(0.2 / (2 * np.pi), rel=1e-3)


def test_currents_antisymmetric_under_lead_swap():
    model = chain_model([0.2, 0.4])
    jp, je = landauer.lb_currents(model, 1.2, 0.8, 0.5, -0.3)
    jp_swapped, je_swapped = landauer.lb_currents(model, 0.8, 1.2, -0.3, 0.5)
    assert jp == pytest.approx(-jp_swapped, abs=1e-12)
    assert je == pytest.approx(-je_swapped, abs=1e-12)


def test_quadrature_stable_under_refinement():
    model = chain_model([0.25, 0.5, 0.75])
    jp1, je1 = landauer.lb_currents(model, 1.0, 0.5, 0.5, -0.5)
    # brute-force refinement oracle
    w = np.linspace(-8.0 + 1e-9, 8.0 - 1e-9, 800001)
    tau = landauer.transmission_curve(model, w)
    bias = landauer.fermi(w, 1.0, 0.5) - landauer.fermi(w, 0.5, -0.5)
    jp2 = np.trapezoid(tau * bias, w) / (2 * np.pi)
    je2 = np.trapezoid(w * tau * bias, w) / (2 * np.pi)
    assert jp1 == pytest.approx(jp2, abs=1e-9)
    assert je1 == pytest.approx(je2, abs=1e-9)


# ---------------------------------------------------------------------------
# engine sweep
# ---------------------------------------------------------------------------

def test_engine_sweep_obeys_thermodynamics():
    model = chain_model([0.0], Gamma=0.5)
    T_L, T_R = 1.1, 1.0
    rows = landauer.lb_engine_sweep(model, np.linspace(0.2, 1.2, 4),
                                    np.linspace(0.01, 0.2, 4), T_L, T_R)
    assert len(rows) == 16
    for row in rows:
        assert row["P"] == pytest.approx(row["QL"] - row["QR"], abs=1e-12)
        beta_term = row["QR"] / T_R - row["QL"] / T_L
        assert beta_term >= -1e-9  # second law
        if np.isfinite(row["eta"]):
            assert row["eta"] <= row["eta_carnot"] + 1e-9
