import numpy as np
import pytest

from qtherm import ethstats, kubo, spectra
from qtherm import spinops as so

BETA = 0.001


def sector_setup(kind, L, boundary="open", delta=0.0, h=0.0, b=0.0, edge=0.0):
    spec = so.ModelSpec(kind=kind, sites=L, alpha=1.0, delta=delta, h=h, b=b,
                        edge_delta=edge, boundary=boundary)
    basis = so.build_sector_basis(L, L // 2)
    H = so.build_hamiltonian(spec, basis)
    eig = spectra.diagonalize(H)
    J = so.velocity_current(spec, basis)
    T = so.build_observable("kinetic_total", basis, alpha=1.0, boundary=boundary)
    J_eig = ethstats.to_eigenbasis(J, eig)
    T_eig = ethstats.to_eigenbasis(T, eig)
    return eig, J_eig, T_eig


def test_velocity_current_is_commutator_with_position():
    # OBC: J = i[X, H] exactly, with X = sum_k k n_k
    L = 8
    spec = so.ModelSpec(kind="single-impurity", sites=L, alpha=1.0, delta=0.5, h=0.5)
    basis = so.build_sector_basis(L, 4)
    H = so.build_hamiltonian(spec, basis).toarray()
    X = sum(k * so.build_observable("density", basis, site=k).toarray()
            for k in range(1, L + 1))
    J = so.velocity_current(spec, basis).toarray()
    assert np.abs(1j * (X @ H - H @ X) - J).max() < 1e-12


def test_velocity_current_xx_single_magnon_dispersion():
    # PBC, one-excitation sector: since [H, J] = 0 the spectrum of J is the
    # group velocity set {4 alpha sin k}
    L = 10
    spec = so.ModelSpec(kind="xxz", sites=L, alpha=1.0, delta=0.0, boundary="periodic")
    basis = so.build_sector_basis(L, 1)
    J = so.velocity_current(spec, basis).toarray()
    ks = 2 * np.pi * np.arange(L) / L
    assert np.allclose(np.sort(np.linalg.eigvalsh(J)), np.sort(4.0 * np.sin(ks)),
                       atol=1e-12)


# ---------------------------------------------------------------------------
# Drude identities
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("L", [8, 10])
def test_drude_ratio_one_xx_periodic(L):
    eig, J, T = sector_setup("xxz", L, boundary="periodic")
    D, _ = kubo.drude_weights(eig, J, T, BETA, sites=L)
    kinetic = -np.real(np.diag(T.matrix)) @ spectra.boltzmann_weights(eig.energies, BETA)
    assert D / (kinetic / L) == pytest.approx(1.0, abs=1e-8)


def test_drude_zero_open_boundary():
    for delta, h in [(0.0, 0.0), (0.5, 0.0), (0.5, 1.0)]:
        kind = "single-impurity" if h else "xxz"
        eig, J, T = sector_setup(kind, 8, delta=delta, h=h)
        D, Dbar = kubo.drude_weights(eig, J, T, BETA, sites=8)
        assert abs(D) < 1e-10
        assert abs(Dbar) < 1e-10


def test_drude_zero_single_impurity_periodic():
    # the impurity breaks the k,-k degeneracy: D vanishes even with PBC
    eig, J, T = sector_setup("single-impurity", 8, boundary="periodic", h=0.5)
    D, Dbar = kubo.drude_weights(eig, J, T, BETA, sites=8)
    assert abs(D) < 1e-10
    assert abs(Dbar) < 1e-10


# ---------------------------------------------------------------------------
# sum rule and profile basics
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind,kw", [
    ("xxz", dict(delta=0.5)),
    ("single-impurity", dict(delta=0.5, h=0.5)),
    ("staggered-field", dict(delta=0.5, b=1.0, edge=0.1)),
])
def test_sum_rule_half(kind, kw):
    L = 10
    eig, J, T = sector_setup(kind, L, **kw)
    prof = kubo.conductivity_profile(eig, J, T, BETA, bin_width=0.05, sites=L)
    assert prof.sum_rule_residual < 1e-8


def test_sum_rule_half_periodic_with_drude():
    L = 8
    eig, J, T = sector_setup("xxz", L, boundary="periodic")
    prof = kubo.conductivity_profile(eig, J, T, BETA, bin_width=0.05, sites=L)
    assert prof.sum_rule_residual < 1e-8
    assert prof.drude > 0


def test_profile_bins_nonnegative_and_positive_centers():
    eig, J, T = sector_setup("staggered-field", 8, delta=0.5, b=1.0, edge=0.1)
    prof = kubo.conductivity_profile(eig, J, T, 0.5, bin_width=0.05, sites=8)
    assert np.all(prof.omegas > 0)
    assert np.all(prof.sigma >= -1e-12)


def test_profile_rejects_bad_bins():
    eig, J, T = sector_setup("xxz", 8, delta=0.5)
    with pytest.raises(ValueError):
        kubo.conductivity_profile(eig, J, T, BETA, bin_width=0.0, sites=8)


# ---------------------------------------------------------------------------
# free-fermion path vs full many-body grand canonical (quadratic model)
# ---------------------------------------------------------------------------

def test_xx_obc_free_fermion_matches_many_body():
    L = 8
    spec = so.ModelSpec(kind="xxz", sites=L, alpha=1.0, delta=0.0)
    Hf = so.build_hamiltonian_full(spec)
    Jf = -0.5 * sum(so.spin_current_full(L, i, i + 1, 1.0) for i in range(1, L))
    eig = spectra.diagonalize(Hf)
    J = ethstats.to_eigenbasis(Jf, eig)
    T = ethstats.to_eigenbasis(Hf, eig)  # kinetic operator == H_XX at Delta=0
    bw = 0.05
    many = kubo.conductivity_profile(eig, J, T, BETA, bin_width=bw, sites=L)
    free = kubo.xx_obc_conductivity(L, alpha=1.0, beta=BETA, bin_width=bw).profile
    assert many.kinetic_mean == pytest.approx(free.kinetic_mean, rel=1e-10)
    assert abs(many.drude - free.drude) < 1e-12
    # same weight in every bin (the rotated many-body matrix carries ~1e-15
    # numerical noise in otherwise-empty bins, hence the absolute floor)
    grid = {}
    for om, s in zip(many.omegas, many.sigma):
        grid[round(om / bw)] = grid.get(round(om / bw), 0.0) + s
    for om, s in zip(free.omegas, free.sigma):
        grid[round(om / bw)] = grid.get(round(om / bw), 0.0) - s
    assert max(abs(v) for v in grid.values()) < 1e-9
    assert free.sum_rule_residual < 1e-8


def test_xx_obc_lowest_peak_position():
    L = 200
    res = kubo.xx_obc_conductivity(L, bin_width=0.01)
    peak = kubo.lowest_peak(res.profile)
    assert abs(peak - 4 * np.pi / L) <= 0.01  # within one bin


def test_xx_obc_peak_weight_converges():
    xis = {}
    for L in (100, 200):
        res = kubo.xx_obc_conductivity(L, bin_width=2 * np.pi / L / 8)
        lo, hi = 2 * np.pi / L, 6 * np.pi / L
        xis[L] = kubo.peak_weight_xi(res.profile, lo, hi)
    assert abs(xis[200] - xis[100]) / xis[100] < 0.05


# ---------------------------------------------------------------------------
# peak weight
# ---------------------------------------------------------------------------

def synthetic_profile(omegas, normalized, bin_width):
    omegas = np.asarray(omegas, dtype=float)
    normalized = np.asarray(normalized, dtype=float)
    return kubo.ConductivityProfile(
        beta=BETA, bin_width=bin_width, omegas=omegas,
        sigma=normalized.copy(), sigma_normalized=normalized,
        drude=0.0, drude_bar=0.0, kinetic_mean=1.0, sites=2,
        sum_rule_residual=0.0,
    )


def test_xi_zero_profile():
    prof = synthetic_profile([0.1, 0.2, 0.3], [0.0, 0.0, 0.0], 0.1)
    assert kubo.peak_weight_xi(prof, 0.05, 0.35) == 0.0


def test_xi_single_bin_quarter_weight():
    prof = synthetic_profile([0.5], [25.0], 0.01)  # bin area = 1/4
    assert kubo.peak_weight_xi(prof, 0.4, 0.6) == pytest.approx(0.5)


def test_xi_baseline_clipping():
    prof = synthetic_profile([0.1, 0.2], [1.0, 5.0], 0.1)
    # baseline above the first bin: only the second contributes
    assert kubo.peak_weight_xi(prof, 0.0, 0.3, baseline=2.0) == pytest.approx(2 * 3.0 * 0.1)


def test_xi_empty_range_raises():
    prof = synthetic_profile([0.5], [1.0], 0.01)
    with pytest.raises(ValueError):
        kubo.peak_weight_xi(prof, 2.0, 3.0)
