"""Config-driven experiment runner.

Invocation:  qtherm <experiment> --config <path> [--out <dir>] [--seed <u64>]
[--threads <n>]

Configs are flat INI key=value files with sections (see the demos/ scripts
and README for worked examples).  Each run writes CSV tables plus a JSON
sidecar echoing the config, the seed, library versions and wall time.  For
a fixed config the CSV bodies are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, dynamics, ethstats, kubo, landauer, lindblad, mesoleads
from . import spectra, spinops

EXPERIMENTS = (
    "level-stats", "kubo", "eth-diagonal", "eth-offdiag", "gamma-ratio",
    "banded-goe", "f2", "fdt", "qfi", "otoc", "typicality", "driven",
    "bd-ness", "meso-engine", "lb-benchmark",
)


class ConfigError(Exception):
    """Invalid or missing configuration; maps to exit status 2."""


# ---------------------------------------------------------------------------
# table writing
# ---------------------------------------------------------------------------

def _format_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip decimal form
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_table(rows, schema, path):
    """CSV with header ``schema``; '.' decimals, UTF-8, LF line endings."""
    schema = list(schema)
    lines = [",".join(schema)]
    for row in rows:
        if isinstance(row, dict):
            missing = [c for c in schema if c not in row]
            if missing:
                raise ValueError(f"row is missing columns {missing}")
            cells = [row[c] for c in schema]
        else:
            cells = list(row)
            if len(cells) != len(schema):
                raise ValueError(
                    f"row has {len(cells)} cells for {len(schema)} columns")
        lines.append(",".join(_format_cell(c) for c in cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

class Config:
    def __init__(self, parser):
        self._p = parser

    def get(self, section, key, cast=str, default=None, required=False):
        if not self._p.has_option(section, key):
            if required:
                raise ConfigError(f"missing required option [{section}] {key}")
            return default
        raw = self._p.get(section, key)
        try:
            if cast is bool:
                return raw.strip().lower() in ("1", "true", "yes", "on")
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"option [{section}] {key} = {raw!r}: {exc}") from exc

    def floats(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return [float(tok) for tok in raw.replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"option [{section}] {key}: {exc}") from exc

    def echo(self):
        return {s: dict(self._p.items(s)) for s in self._p.sections()}


def load_config(path):
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    return Config(parser)


def model_from_config(cfg):
    kind = cfg.get("model", "kind", required=True)
    sites = cfg.get("model", "sites", int, required=True)
    kwargs = dict(
        kind=kind, sites=sites,
        alpha=cfg.get("model", "alpha", float, 1.0),
        delta=cfg.get("model", "delta", float, 0.0),
        h=cfg.get("model", "h", float, 0.0),
        b=cfg.get("model", "b", float, 0.0),
        edge_delta=cfg.get("model", "edge_delta", float, 0.0),
        boundary=cfg.get("model", "boundary", str, "open"),
    )
    if kind == "fermion-chain":
        eps = cfg.floats("model", "eps", default=[0.0] * sites)
        kwargs.update(eps=np.asarray(eps), t_s=cfg.get("model", "t_s", float, 0.0),
                      u=cfg.get("model", "u", float, 0.0))
    try:
        return spinops.ModelSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def sector_eigensystem(cfg):
    spec = model_from_config(cfg)
    N = cfg.get("model", "excitations", int, spec.sites // 2)
    basis = spinops.build_sector_basis(spec.sites, N)
    H = spinops.build_hamiltonian(spec, basis)
    return spec, basis, spectra.diagonalize(H)


def observable_from_config(cfg, basis, eig):
    kind = cfg.get("observable", "kind", str, "staggered_total")
    site = cfg.get("observable", "site", int)
    op = spinops.build_observable(kind, basis, site=site)
    return ethstats.to_eigenbasis(op, eig, extensive=kind.startswith("staggered"))


def beta_from_config(cfg, default=None):
    beta = cfg.get("ensemble", "beta", float)
    temperature = cfg.get("ensemble", "temperature", float)
    if beta is None and temperature is None:
        if default is None:
            raise ConfigError("one of [ensemble] beta or temperature is required")
        return default
    if beta is not None and temperature is not None:
        raise ConfigError("give only one of [ensemble] beta / temperature")
    return beta if beta is not None else 1.0 / temperature


def target_energy(cfg, eig):
    beta = beta_from_config(cfg)
    _, e_mean, _, _ = spectra.thermal_quantities(eig, beta)
    return beta, e_mean


# ---------------------------------------------------------------------------
# experiment runners (each returns a JSON-able summary dict)
# ---------------------------------------------------------------------------

def run_level_stats(cfg, out, seed):
    _, _, eig = sector_eigensystem(cfg)
    stats = spectra.gap_ratio_stats(
        eig.energies,
        keep_fraction=cfg.get("numerics", "keep_fraction", float, 0.8),
        unfold_window=cfg.get("numerics", "unfold_window", int, 20),
        bins=cfg.get("numerics", "bins", int, 40),
    )
    write_table(zip(stats.spacing_bins, stats.spacing_density),
                ["s", "density"], out / "level-stats_spacings.csv")
    return {"r_mean": stats.r_mean,
            "n_degenerate_dropped": stats.n_degenerate_dropped,
            "dimension": eig.dim}


def run_kubo(cfg, out, seed):
    spec, basis, eig = sector_eigensystem(cfg)
    J = ethstats.to_eigenbasis(spinops.velocity_current(spec, basis), eig)
    T = ethstats.to_eigenbasis(
        spinops.build_observable("kinetic_total", basis, alpha=spec.alpha,
                                 boundary=spec.boundary), eig)
    beta = beta_from_config(cfg, default=0.001)
    prof = kubo.conductivity_profile(
        eig, J, T, beta,
        bin_width=cfg.get("numerics", "bin_width", float, 0.01),
        sites=spec.sites)
    write_table(zip(prof.omegas, prof.sigma_normalized, prof.cumulative_weight()),
                ["omega", "sigma_normalized", "cumulative_weight"],
                out / "kubo_conductivity.csv")
    return {"drude": prof.drude, "drude_bar": prof.drude_bar,
            "kinetic_mean": prof.kinetic_mean,
            "sum_rule_residual": prof.sum_rule_residual}


def run_eth_diagonal(cfg, out, seed):
    _, basis, eig = sector_eigensystem(cfg)
    om = observable_from_config(cfg, basis, eig)
    eps, diag, coarse, ete = ethstats.diagonal_profile(
        om, central_fraction=cfg.get("numerics", "central_fraction", float, 0.2))
    write_table(zip(eps, diag), ["eps_n", "o_nn"], out / "eth-diagonal_elements.csv")
    write_table(zip(*coarse), ["eps", "coarse_average"],
                out / "eth-diagonal_coarse.csv")
    return {"ete_fluctuations": ete, "dimension": om.dim}


def _frequency_profile_runner(cfg, out, seed, fn, stem, value_name):
    _, basis, eig = sector_eigensystem(cfg)
    om = observable_from_config(cfg, basis, eig)
    beta, e_star = target_energy(cfg, eig)
    prof = fn(om, e_star,
              window=cfg.get("numerics", "window", float, 0.05),
              bin_width=cfg.get("numerics", "bin_width", float, 0.05))
    write_table(zip(prof.omegas, prof.values, prof.counts),
                ["omega", value_name, "count"], out / f"{stem}.csv")
    return {"beta": beta, "target_energy": e_star, "bins": len(prof.omegas)}


def run_eth_offdiag(cfg, out, seed):
    return _frequency_profile_runner(cfg, out, seed, ethstats.offdiag_f2_profile,
                                     "eth-offdiag_profile", "mean_abs2")


def run_gamma_ratio(cfg, out, seed):
    return _frequency_profile_runner(cfg, out, seed, ethstats.gamma_ratio_profile,
                                     "gamma-ratio_profile", "gamma")


def run_banded_goe(cfg, out, seed):
    _, basis, eig = sector_eigensystem(cfg)
    om = observable_from_config(cfg, basis, eig)
    beta, e_star = target_energy(cfg, eig)
    res = ethstats.banded_goe_test(
        om, e_star,
        omega_c=cfg.get("numerics", "omega_c", float, required=True),
        window=cfg.get("numerics", "window", float, 0.125),
        seed=seed)
    write_table(zip(res.hist_bins, res.hist_density),
                ["lam", "density"], out / "banded-goe_spectrum.csv")
    write_table(zip(res.randomized_hist_bins, res.randomized_hist_density),
                ["lam", "density"], out / "banded-goe_randomized.csv")
    lam = res.eigenvalues
    return {"r_mean": res.r_mean, "submatrix_dim": res.submatrix_dim,
            "localized": res.localized,
            "fourth_moment_ratio": float(np.mean(lam**4) / np.mean(lam**2) ** 2)}


def _time_grid(cfg, default_max=10.0, default_n=101):
    t_max = cfg.get("numerics", "t_max", float, default_max)
    n = cfg.get("numerics", "time_points", int, default_n)
    return np.linspace(0.0, t_max, n)


def run_f2(cfg, out, seed):
    _, basis, eig = sector_eigensystem(cfg)
    om = observable_from_config(cfg, basis, eig)
    beta, e_star = target_energy(cfg, eig)
    window = cfg.get("numerics", "window", float, 0.15)
    times = _time_grid(cfg)
    exact = dynamics.f2_canonical(eig, om, beta, times)
    prof = ethstats.offdiag_f2_profile(
        om, e_star, window=window,
        bin_width=cfg.get("numerics", "bin_width", float, 0.03))
    idx = np.abs(eig.energies - e_star) <= window * eig.bandwidth / 2
    var = float(np.mean((np.abs(om.matrix[idx]) ** 2).sum(axis=1)
                        - np.real(np.diag(om.matrix))[idx] ** 2))
    eth = dynamics.eth_reconstruct(prof, beta, 4 * np.pi * var, times)
    write_table(
        zip(times, exact.values.real, exact.values.imag,
            eth.values.real, eth.values.imag),
        ["t", "re_exact", "im_exact", "re_eth", "im_eth"], out / "f2_series.csv")
    offset = float((exact.values.real - eth.values.real).mean())
    return {"beta": beta, "window_variance": var, "constant_offset": offset}


def run_fdt(cfg, out, seed):
    _, basis, eig = sector_eigensystem(cfg)
    om = observable_from_config(cfg, basis, eig)
    beta, e_star = target_energy(cfg, eig)
    splus, sminus = dynamics.response_profiles(
        om, beta, e_star,
        window=cfg.get("numerics", "window", float, 0.1),
        bin_width=cfg.get("numerics", "bin_width", float, 0.05))
    fitted = dynamics.fdt_beta_fit(
        splus, sminus, omega_max=cfg.get("numerics", "omega_max", float, 4.0))
    write_table(zip(splus.omegas, splus.values, sminus.values),
                ["omega", "s_plus", "s_minus"], out / "fdt_profiles.csv")
    return {"beta": beta, "fitted_beta": fitted,
            "relative_error": abs(fitted - beta) / beta if beta else None}


def run_qfi(cfg, out, seed):
    spec, basis, eig = sector_eigensystem(cfg)
    om = observable_from_config(cfg, basis, eig)
    betas = cfg.floats("ensemble", "betas",
                       default=list(np.linspace(0.0, 2.0, 20)))
    report = dynamics.qfi(eig, om, betas,
                          window=cfg.get("numerics", "window", float, 0.1),
                          sites=spec.sites)
    fq_g, fq_e = report.densities()
    write_table(zip(report.betas, report.f_gibbs, report.f_eth, fq_g, fq_e),
                ["beta", "f_gibbs", "f_eth", "fq_gibbs", "fq_eth"],
                out / "qfi_report.csv")
    return {"bound_satisfied": bool(np.all(report.f_eth >= report.f_gibbs
                                           - 1e-8 * np.abs(report.f_eth)))}


def run_otoc(cfg, out, seed):
    _, basis, eig = sector_eigensystem(cfg)
    om = observable_from_config(cfg, basis, eig)
    beta = beta_from_config(cfg, default=0.0)
    times = _time_grid(cfg, default_max=30.0, default_n=61)
    c_exact = dynamics.otoc_exact(eig, om, beta, times)
    f2 = dynamics.f2_canonical(eig, om, beta, times)
    c_eth = dynamics.otoc_eth_uncorrelated(f2)
    write_table(zip(times, c_exact, c_eth),
                ["t", "c_exact", "c_eth_uncorrelated"], out / "otoc_series.csv")
    return {"beta": beta,
            "saturation_time": dynamics.saturation_time(times, c_exact)}


def run_typicality(cfg, out, seed):
    spec = model_from_config(cfg)
    N = cfg.get("model", "excitations", int, spec.sites // 2)
    basis = spinops.build_sector_basis(spec.sites, N)
    H = spinops.build_hamiltonian(spec, basis)
    kind = cfg.get("observable", "kind", str, "staggered_total")
    O = spinops.build_observable(kind, basis,
                                 site=cfg.get("observable", "site", int))
    times = _time_grid(cfg, default_max=10.0, default_n=21)
    mean, err, used = dynamics.otoc_typicality(
        H, O, times,
        n_samples=cfg.get("numerics", "n_samples", int, 50),
        seed=seed, m=cfg.get("numerics", "krylov_dim", int, 30))
    write_table(zip(times, mean, err), ["t", "c_mean", "stderr"],
                out / "typicality_series.csv")
    return {"samples_used": used}


def run_driven(cfg, out, seed):
    spec, basis, eig = sector_eigensystem(cfg)
    j0 = cfg.get("drive", "site", int, spec.sites // 2)
    drive_op = spinops.build_observable("sz", basis, site=j0)
    sz = spinops.build_observable("sz", basis, site=j0)
    res = dynamics.driven_relaxation(
        spinops.build_hamiltonian(spec, basis), drive_op,
        amplitude=cfg.get("drive", "amplitude", float, 2.0),
        omega0=cfg.get("drive", "frequency", float, 8.0),
        t_prep=cfg.get("drive", "t_prep", float, 10.0),
        observables={"sz_drive_site": sz},
        dt=cfg.get("numerics", "dt", float, 0.01),
        t_relax=cfg.get("numerics", "t_relax", float, 50.0))
    write_table(zip(res.prep_times, res.prep_energy), ["t", "energy"],
                out / "driven_heating.csv")
    write_table(zip(res.relax_times, res.observables["sz_drive_site"]),
                ["t", "sz_drive_site"], out / "driven_relaxation.csv")
    sz_eig = ethstats.to_eigenbasis(sz, eig)
    micro = spectra.microcanonical_average(np.diag(sz_eig.matrix), eig.energies,
                                           res.mean_energy)
    tail = res.relax_times > res.relax_times[-1] / 2
    tail_avg = float(res.observables["sz_drive_site"][tail].mean())
    return {"mean_energy": res.mean_energy, "microcanonical": micro,
            "relaxed_average": tail_avg, "norm_drift": res.norm_drift,
            "dt_used": res.dt_used}


def run_bd_ness(cfg, out, seed):
    spec = model_from_config(cfg)
    gamma = cfg.get("driving", "gamma", float, 1.0)
    mu = cfg.get("driving", "mu", float, required=True)
    model = lindblad.boundary_driving_model(spec, gamma, mu)
    W = lindblad.build_liouvillian_matrix(model)
    sol = lindblad.solve_ness(W, model.dim)
    obs = lindblad.ness_observables(sol, spec, gamma, mu)
    write_table(zip(range(1, spec.sites + 1), obs.magnetizations),
                ["site", "sz"], out / "bd-ness_profile.csv")
    write_table(zip(range(1, spec.sites), obs.bond_currents),
                ["bond", "current"], out / "bd-ness_currents.csv")
    return {"residual": sol.residual, "trace_error": sol.trace_error,
            "min_eigenvalue": sol.min_eigenvalue,
            "boundary_left": obs.boundary_left,
            "boundary_right": obs.boundary_right,
            "current_spread": obs.current_spread,
            "mean_current": obs.mean_current}


def _lead_pair(cfg, mu_L, mu_R, T_L, T_R):
    W = cfg.get("leads", "bandwidth", float, 8.0)
    W_star = cfg.get("leads", "inner", float, W / 2)
    L = cfg.get("leads", "modes", int, 50)
    frac = cfg.get("leads", "log_fraction", float, 0.2)
    Gamma = cfg.get("leads", "coupling", float, 1.0)
    left = mesoleads.discretize_lead(W, W_star, L, frac, beta=1.0 / T_L, mu=mu_L,
                                     Gamma=Gamma)
    right = mesoleads.discretize_lead(W, W_star, L, frac, beta=1.0 / T_R, mu=mu_R,
                                      Gamma=Gamma)
    return left, right


def run_meso_engine(cfg, out, seed):
    spec = model_from_config(cfg)
    if spec.kind != "fermion-chain":
        raise ConfigError("meso-engine requires a fermion-chain model")
    h_sys = spinops.single_particle_matrix(spec)
    T_L = cfg.get("ensemble", "t_left", float, required=True)
    T_R = cfg.get("ensemble", "t_right", float, required=True)
    mus = cfg.floats("ensemble", "mu_values", default=[0.0])
    biases = cfg.floats("ensemble", "bias_values", default=[0.5])
    rows = []
    for mu in mus:
        for V in biases:
            mu_L, mu_R = mu - V / 2.0, mu + V / 2.0
            left, right = _lead_pair(cfg, mu_L, mu_R, T_L, T_R)
            sys = mesoleads.build_superfermion_generator(h_sys, left, right)
            cur = mesoleads.meso_currents(mesoleads.ness_correlations(sys), sys)
            met = mesoleads.engine_metrics(cur.particle, cur.energy,
                                           T_L, T_R, mu_L, mu_R)
            eta_ratio = met.efficiency / met.carnot if met.engine_regime else np.nan
            rows.append([mu, V, T_L, T_R, cur.particle, cur.energy, met.power,
                         met.heat_left, met.heat_right, met.efficiency, eta_ratio])
    write_table(rows,
                ["mu", "V", "T_L", "T_R", "JP", "JE", "P", "QL", "QR", "eta",
                 "eta_over_carnot"],
                out / "meso-engine_sweep.csv")
    powers = [r[6] for r in rows]
    return {"operating_points": len(rows), "max_power": max(powers)}


def run_lb_benchmark(cfg, out, seed):
    spec = model_from_config(cfg)
    if spec.kind != "fermion-chain":
        raise ConfigError("lb-benchmark requires a fermion-chain model")
    h_sys = spinops.single_particle_matrix(spec)
    W = cfg.get("leads", "bandwidth", float, 8.0)
    Gamma = cfg.get("leads", "coupling", float, 1.0)
    model = landauer.TransmissionModel(h_sys=h_sys, Gamma=Gamma, W=W)
    omegas = np.linspace(-W + 1e-9, W - 1e-9,
                         cfg.get("numerics", "omega_points", int, 801))
    tau = landauer.transmission_curve(model, omegas)
    write_table(zip(omegas, tau), ["omega", "tau"], out / "lb-benchmark_tau.csv")
    T_L = cfg.get("ensemble", "t_left", float, required=True)
    T_R = cfg.get("ensemble", "t_right", float, required=True)
    mu_L = cfg.get("ensemble", "mu_left", float, required=True)
    mu_R = cfg.get("ensemble", "mu_right", float, required=True)
    jp_lb, je_lb = landauer.lb_currents(model, T_L, T_R, mu_L, mu_R)
    rows = []
    for L in [int(x) for x in cfg.floats("leads", "mode_counts", default=[25, 50, 100])]:
        W_star = cfg.get("leads", "inner", float, W / 2)
        frac = cfg.get("leads", "log_fraction", float, 0.2)
        left = mesoleads.discretize_lead(W, W_star, L, frac, beta=1.0 / T_L,
                                         mu=mu_L, Gamma=Gamma)
        right = mesoleads.discretize_lead(W, W_star, L, frac, beta=1.0 / T_R,
                                          mu=mu_R, Gamma=Gamma)
        sys = mesoleads.build_superfermion_generator(h_sys, left, right)
        cur = mesoleads.meso_currents(mesoleads.ness_correlations(sys), sys)
        rows.append([L, cur.particle, cur.energy,
                     abs(cur.particle - jp_lb) / max(abs(jp_lb), 1e-300),
                     abs(cur.energy - je_lb) / max(abs(je_lb), 1e-300)])
    write_table(rows, ["modes", "jp_meso", "je_meso", "jp_rel_err", "je_rel_err"],
                out / "lb-benchmark_convergence.csv")
    return {"jp_lb": jp_lb, "je_lb": je_lb}


RUNNERS = {
    "level-stats": run_level_stats,
    "kubo": run_kubo,
    "eth-diagonal": run_eth_diagonal,
    "eth-offdiag": run_eth_offdiag,
    "gamma-ratio": run_gamma_ratio,
    "banded-goe": run_banded_goe,
    "f2": run_f2,
    "fdt": run_fdt,
    "qfi": run_qfi,
    "otoc": run_otoc,
    "typicality": run_typicality,
    "driven": run_driven,
    "bd-ness": run_bd_ness,
    "meso-engine": run_meso_engine,
    "lb-benchmark": run_lb_benchmark,
}


def run_experiment(name, config_path, out_dir=None, seed=None, threads=None):
    """Run one experiment; returns the path of the JSON sidecar."""
    if name not in RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}; choose from "
                          + ", ".join(EXPERIMENTS))
    cfg = load_config(config_path)
    if seed is None:
        seed = cfg.get("experiment", "seed", int, 0)
    out = Path(out_dir) if out_dir else Path(cfg.get("experiment", "out", str, "."))
    out.mkdir(parents=True, exist_ok=True)

    started = time.time()
    if threads:
        import threadpoolctl
        with threadpoolctl.threadpool_limits(limits=threads):
            summary = RUNNERS[name](cfg, out, seed)
    else:
        summary = RUNNERS[name](cfg, out, seed)
    sidecar = {
        "experiment": name,
        "seed": seed,
        "config": cfg.echo(),
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "qtherm": __version__,
        },
        "wall_time_s": time.time() - started,
        "summary": summary,
    }
    sidecar_path = out / f"{name}_meta.json"
    sidecar_path.write_text(json.dumps(sidecar, indent=2, default=float) + "\n",
                            encoding="utf-8")
    return sidecar_path


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qtherm",
        description="Run one transport/thermalization experiment from a config file.")
    parser.add_argument("experiment", help="one of: " + ", ".join(EXPERIMENTS))
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed")
    parser.add_argument("--threads", type=int,
                        default=os.environ.get("QTHERM_THREADS"),
                        help="cap BLAS threads (env QTHERM_THREADS)")
    args = parser.parse_args(argv)
    try:
        sidecar = run_experiment(args.experiment, args.config, args.out,
                                 args.seed, args.threads)
    except ConfigError as exc:
        print(f"qtherm: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qtherm: I/O error: {exc}", file=sys.stderr)
        return 3
    print(sidecar)
    return 0


if __name__ == "__main__":
    sys.exit(main())
