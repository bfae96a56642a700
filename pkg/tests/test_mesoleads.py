import numpy as np
import pytest

from qtherm import landauer, mesoleads
from qtherm import spinops as so


def resonant_level(eps=0.0):
    spec = so.ModelSpec(kind="fermion-chain", sites=1, eps=[eps])
    return so.single_particle_matrix(spec)


def standard_leads(L=40, W=8.0, beta=1.0, mu_L=0.5, mu_R=-0.5, Gamma=1.0):
    left = mesoleads.discretize_lead(W, W / 2, L, 0.2, beta=beta, mu=mu_L, Gamma=Gamma)
    right = mesoleads.discretize_lead(W, W / 2, L, 0.2, beta=beta, mu=mu_R, Gamma=Gamma)
    return left, right


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------

def test_lead_linear_window_spacings():
    lead = mesoleads.discretize_lead(8.0, 4.0, 50, 0.2, beta=1.0, mu=0.0, Gamma=1.0)
    assert lead.n_lin == 40 and lead.n_log == 10
    inner = np.abs(lead.energies) < 4.0
    assert inner.sum() == 40
    assert np.allclose(lead.spacings[inner], 0.2)
    assert np.allclose(lead.couplings[inner], np.sqrt(1.0 * 0.2 / (2 * np.pi)))


def test_lead_invariants():
    lead = mesoleads.discretize_lead(8.0, 4.0, 50, 0.2, beta=2.0, mu=0.3, Gamma=0.7)
    assert np.all(np.diff(lead.energies) > 0)
    assert np.allclose(lead.gammas, lead.spacings)
    assert lead.energies.min() > -8.0 and lead.energies.max() < 8.0
    assert np.all((lead.fermi >= 0) & (lead.fermi <= 1))
    assert np.allclose(lead.spacings.sum(), 16.0)  # intervals tile [-W, W]


def test_lead_effective_density_flat_midband():
    # the Lorentzian comb with gamma_k = e_k ripples pointwise by ~10%, but
    # its band average reproduces the flat density
    lead = mesoleads.discretize_lead(8.0, 4.0, 100, 0.2, beta=1.0, mu=0.0, Gamma=1.3)
    omegas = np.linspace(-2.0, 2.0, 4001)
    dens = mesoleads.effective_spectral_density(lead, omegas)
    assert abs(dens.mean() - 1.3) / 1.3 < 0.02
    assert np.abs(dens - 1.3).max() / 1.3 < 0.15


def test_lead_count_validation():
    # odd L * log_fraction rounds to the nearest even split
    lead = mesoleads.discretize_lead(8.0, 4.0, 25, 0.2)
    assert lead.n_log == 4 and lead.n_lin == 21
    with pytest.raises(ValueError):
        mesoleads.discretize_lead(8.0, 9.0, 50, 0.2)  # W* > W
    with pytest.raises(ValueError):
        mesoleads.discretize_lead(8.0, 4.0, 10, 1.0)  # no linear modes left


# ---------------------------------------------------------------------------
# superfermion generator
# ---------------------------------------------------------------------------

def test_generator_no_leads_is_hamiltonian_doubled():
    h = resonant_level(0.5)
    sys = mesoleads.build_superfermion_generator(h)
    assert np.allclose(sys.generator, np.diag([0.5, 0.5]))
    ev = np.linalg.eigvals(sys.generator)
    assert np.abs(ev.imag).max() == 0.0


def test_generator_single_damped_mode_eigenvalues():
    # one lead mode, no system: eigenvalues eps -+ i gamma / 2
    lead = mesoleads.LeadSpec(
        energies=np.array([0.7]), spacings=np.array([0.2]),
        gammas=np.array([0.2]), couplings=np.array([0.0]),
        fermi=np.array([0.3]), beta=1.0, mu=0.0, bandwidth=8.0, inner=4.0,
        n_lin=1, n_log=0)
    sys = mesoleads.build_superfermion_generator(np.zeros((0, 0)), left=lead)
    ev = np.sort_complex(np.linalg.eigvals(sys.generator))
    assert np.allclose(sorted(ev.imag), [-0.1, 0.1])
    assert np.allclose(ev.real, 0.7)


def test_generator_block_structure():
    h = resonant_level(0.2)
    left, right = standard_leads(L=10)
    sys = mesoleads.build_superfermion_generator(h, left, right)
    M = sys.modes
    gen = sys.generator
    H = sys.h_matrix
    assert np.abs(gen[:M, :M] - (H - 0.5j * np.diag(sys.gamma_minus - sys.gamma_plus))).max() < 1e-14
    assert np.abs(gen[:M, M:] - 1j * np.diag(sys.gamma_plus)).max() < 1e-14
    assert np.abs(gen[M:, :M] - 1j * np.diag(sys.gamma_minus)).max() < 1e-14


# ---------------------------------------------------------------------------
# NESS correlations
# ---------------------------------------------------------------------------

def test_single_damped_mode_occupation_is_fermi_factor():
    f = 0.42
    lead = mesoleads.LeadSpec(
        energies=np.array([0.3]), spacings=np.array([0.15]),
        gammas=np.array([0.15]), couplings=np.array([0.0]),
        fermi=np.array([f]), beta=1.0, mu=0.0, bandwidth=8.0, inner=4.0,
        n_lin=1, n_log=0)
    sys = mesoleads.build_superfermion_generator(np.zeros((0, 0)), left=lead)
    C = mesoleads.ness_correlations(sys)
    assert C[0, 0].real == pytest.approx(f, abs=1e-12)


def test_equilibrium_occupations_and_zero_currents():
    h = resonant_level(0.0)
    left, right = standard_leads(L=30, mu_L=0.2, mu_R=0.2)
    sys = mesoleads.build_superfermion_generator(h, left, right)
    C = mesoleads.ness_correlations(sys)
    cur = mesoleads.meso_currents(C, sys)
    assert abs(cur.particle) < 1e-12
    assert abs(cur.energy) < 1e-12
    # lead occupations stay near their Fermi factors in equilibrium
    occ = np.real(np.diag(C))[sys.left]
    assert np.abs(occ - left.fermi).max() < 0.05


def test_current_conservation_left_right():
    h = resonant_level(0.0)
    left, right = standard_leads(L=40)
    sys = mesoleads.build_superfermion_generator(h, left, right)
    C = mesoleads.ness_correlations(sys)
    cur = mesoleads.meso_currents(C, sys)
    assert cur.particle > 0  # mu_L > mu_R drives left -> right
    assert cur.particle_mismatch < 1e-9
    assert cur.energy_mismatch < 1e-9


def test_occupations_monotone_in_mu():
    h = resonant_level(0.0)
    occs = []
    for mu in (-1.0, -0.5, 0.0, 0.5, 1.0):
        left, right = standard_leads(L=20, mu_L=mu, mu_R=mu)
        sys = mesoleads.build_superfermion_generator(h, left, right)
        C = mesoleads.ness_correlations(sys)
        occs.append(np.real(C[sys.system.start, sys.system.start]))
    assert np.all(np.diff(occs) > 0)


def test_cross_solver_dense_lindblad():
    # D = 1 system, two modes per lead: superfermion NESS == dense Lindblad
    W = 8.0
    left = mesoleads.discretize_lead(W, W / 2, 2, 0.0, beta=1.0, mu=0.5, Gamma=1.0)
    right = mesoleads.discretize_lead(W, W / 2, 2, 0.0, beta=0.5, mu=-0.5, Gamma=1.0)
    sys = mesoleads.build_superfermion_generator(resonant_level(0.3), left, right)
    C = mesoleads.ness_correlations(sys)
    C_dense, sol = mesoleads.dense_lindblad_reference(sys)
    assert sol.residual < 1e-10
    assert np.abs(C - C_dense).max() < 1e-8
    cur = mesoleads.meso_currents(C, sys)
    cur_dense = mesoleads.meso_currents(C_dense, sys)
    assert cur.particle == pytest.approx(cur_dense.particle, abs=1e-8)
    assert cur.energy == pytest.approx(cur_dense.energy, abs=1e-8)


# ---------------------------------------------------------------------------
# currents vs Landauer-Buttiker
# ---------------------------------------------------------------------------

def test_meso_current_approaches_lb():
    W, Gamma = 8.0, 1.0
    T = W / 8
    model = landauer.TransmissionModel(h_sys=resonant_level(0.0), Gamma=Gamma, W=W)
    jp_lb, _ = landauer.lb_currents(model, T, T, W / 16, -W / 16)
    errs = []
    for L in (25, 50):
        left = mesoleads.discretize_lead(W, W / 2, L, 0.2, beta=1 / T, mu=W / 16,
                                         Gamma=Gamma)
        right = mesoleads.discretize_lead(W, W / 2, L, 0.2, beta=1 / T, mu=-W / 16,
                                          Gamma=Gamma)
        sys = mesoleads.build_superfermion_generator(resonant_level(0.0), left, right)
        cur = mesoleads.meso_currents(mesoleads.ness_correlations(sys), sys)
        errs.append(abs(cur.particle - jp_lb) / abs(jp_lb))
    assert errs[1] < errs[0]
    assert errs[1] < 0.05


# ---------------------------------------------------------------------------
# engine metrics
# ---------------------------------------------------------------------------

def test_engine_metrics_basics():
    met = mesoleads.engine_metrics(1.0, 0.2, T_L=2.0, T_R=1.0, mu_L=-0.25, mu_R=0.25)
    assert met.power == pytest.approx(0.5)
    assert met.power == pytest.approx(met.heat_left - met.heat_right, abs=1e-15)
    assert met.carnot == pytest.approx(0.5)


def test_engine_equal_temperatures_no_engine():
    # physical currents at T_L = T_R flow down the potential gradient, so the
    # power V J_P is negative and the engine regime never triggers
    W = 8.0
    model = landauer.TransmissionModel(h_sys=resonant_level(0.0), Gamma=1.0, W=W)
    jp, je = landauer.lb_currents(model, 1.0, 1.0, -0.2, 0.2)
    met = mesoleads.engine_metrics(jp, je, T_L=1.0, T_R=1.0, mu_L=-0.2, mu_R=0.2)
    assert met.carnot == 0.0
    assert met.power < 0
    assert not met.engine_regime and np.isnan(met.efficiency)


def test_cp_symmetry_null_energy_current():
    # U = 0, eps = 0, T_L = T_R, mu_L = -mu_R: energy current vanishes
    W = 8.0
    spec = so.ModelSpec(kind="fermion-chain", sites=4, eps=np.zeros(4), t_s=1.0)
    h = so.single_particle_matrix(spec)
    left = mesoleads.discretize_lead(W, W / 2, 50, 0.2, beta=1.0, mu=0.2, Gamma=1.0)
    right = mesoleads.discretize_lead(W, W / 2, 50, 0.2, beta=1.0, mu=-0.2, Gamma=1.0)
    sys = mesoleads.build_superfermion_generator(h, left, right)
    cur = mesoleads.meso_currents(mesoleads.ness_correlations(sys), sys)
    assert abs(cur.particle) > 1e-4  # finite particle current
    assert abs(cur.energy) < 1e-9 * max(1.0, abs(cur.particle) * W)
