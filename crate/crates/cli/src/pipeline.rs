//! model → decomposition → propagation → observables.

use std::path::Path;

use heom_core::aaa::{fp_decompose, fp_half_width, negative_cutoff, PoleCount, PoleSet};
use heom_core::chain::{
    chain_map_star, chain_map_thermal, chain_propagate_dense, star_weights, thermal_extend_lvc, ChainModel,
    DEFAULT_AMPLITUDE_BUDGET, DEFAULT_GRID,
};
use heom_core::discretize::{broaden_lvc, discrete_modes, discretize_equal_lambda, load_lvc_csv};
use heom_core::heom::{Heom, HeomBath, HeomOptions, Integrator, Scaling, SystemSpec, Trajectory, Truncation};
use heom_core::models::{
    build_pure_dephasing, build_two_bath, rotate_basis_pi4, superposition, upper_state, Preset,
    J1_TERMS, J2_TERMS, JD_TERMS, JOD_TERMS, PURE_DEPHASING_GAP,
};
use heom_core::oracles::decoherence_analytic;
use heom_core::spectral::TabulatedDensity;
use heom_core::tm::{default_matsubara_count, matsubara_min_terms, matsubara_modes, tm_fit_modes, tm_pole_modes, TAIL_BOUND};
use heom_core::{BathSpec, DecayMode, Operator, SpectralDensity, UnitSystem};

use crate::config::{
    energy, energy_unit, fmt_energy, fmt_time, temperature, time, Config, DensityConfig, MethodConfig, RK45_ATOL,
    RK45_RTOL,
};
use crate::error::{field, io, Context, Result};

/// Chain-extension threshold on n_β for undamped mode lists.
const LVC_NEGATIVE_THRESHOLD: f64 = 1e-6;
/// Absolute tolerance of the pure-dephasing oracle.
const ORACLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    PureDephasing,
    TwoBath,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub kind: ModelKind,
    pub system: SystemSpec,
    pub baths: Vec<BathSpec>,
    pub rho0: Operator,
}

fn tm_terms(name: &str, unit: &str, terms: &[[f64; 3]]) -> Result<SpectralDensity> {
    let u = energy_unit(&format!("{name}.unit"), unit)?;
    let scaled: Vec<(f64, f64, f64)> = terms.iter().map(|t| (t[0] * u.powi(4), t[1] * u, t[2] * u)).collect();
    SpectralDensity::tannor_meier(&scaled).map_err(|e| field(&format!("{name}.terms"), e.to_string()))
}

fn read_table(name: &str, path: &Path, unit: &str) -> Result<SpectralDensity> {
    let u = energy_unit(&format!("{name}.unit"), unit)?;
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let (mut w, mut j) = (Vec::new(), Vec::new());
    for (k, line) in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (cols.len() == 2).then(|| (cols[0].parse::<f64>(), cols[1].parse::<f64>()));
        match parsed {
            Some((Ok(a), Ok(b))) => {
                w.push(a * u);
                j.push(b * u);
            }
            // A non-numeric first line is a header.
            _ if k == 0 => continue,
            _ => {
                return Err(field(
                    &format!("{name}.file"),
                    format!("{}: row {} is not 'omega,J'", path.display(), k + 1),
                ))
            }
        }
    }
    TabulatedDensity::new(w, j)
        .map(SpectralDensity::Tabulated)
        .map_err(|e| field(&format!("{name}.file"), e.to_string()))
}

pub fn load_density(name: &str, d: &DensityConfig) -> Result<SpectralDensity> {
    match d {
        DensityConfig::TannorMeier { unit, terms } => tm_terms(name, unit, terms),
        DensityConfig::Tabulated { file, unit } => read_table(name, file, unit),
        DensityConfig::Lvc {
            file,
            expected_modes,
            broadening,
        } => {
            let modes = load_lvc_csv(file, &UnitSystem::default(), *expected_modes)
                .map_err(|e| field(&format!("{name}.file"), e.to_string()))?;
            let samples: Vec<(f64, f64)> = modes.into_iter().map(|m| m.to_sample()).collect();
            match broadening {
                Some(g) => {
                    let gamma = energy(&format!("{name}.broadening"), g)?;
                    broaden_lvc(&samples, gamma).context("broaden_lvc")
                }
                None => SpectralDensity::discrete(&samples).context("LVC modes"),
            }
        }
    }
}

fn tm_density(terms: &[(f64, f64, f64)]) -> Result<SpectralDensity> {
    SpectralDensity::tannor_meier(terms).context("preset density")
}

/// Builds the model and fills in model defaults.
pub fn build_problem(cfg: &mut Config) -> Result<Problem> {
    let preset = cfg.preset()?;
    let m = &mut cfg.model;
    let t_k = temperature("model.temperature", &m.temperature)?;
    match preset {
        Preset::PureDephasingJ1 | Preset::PureDephasingJ2 => {
            for (f, v) in [
                ("model.eps1", m.eps1.is_some()),
                ("model.eps2", m.eps2.is_some()),
                ("model.alpha_corr", m.alpha_corr.is_some()),
                ("model.tuning_density", m.tuning_density.is_some()),
                ("model.coupling_density", m.coupling_density.is_some()),
            ] {
                if v {
                    return Err(field(f, "only used by the two-bath-dimer preset"));
                }
            }
            let delta_e = match &m.delta_e {
                Some(s) => energy("model.delta_e", s)?,
                None => {
                    m.delta_e = Some(fmt_energy(PURE_DEPHASING_GAP));
                    PURE_DEPHASING_GAP
                }
            };
            let density = match &m.density {
                Some(d) => load_density("model.density", d)?,
                None if preset == Preset::PureDephasingJ1 => tm_density(&J1_TERMS)?,
                None => tm_density(&J2_TERMS)?,
            };
            let init = m.initial_state.get_or_insert_with(|| "superposition".into());
            let rho0 = initial_state(init)?;
            let model = build_pure_dephasing(delta_e, density, t_k).context("build_pure_dephasing")?;
            Ok(Problem {
                kind: ModelKind::PureDephasing,
                system: model.system().context("system Hamiltonian")?,
                baths: vec![model.bath],
                rho0,
            })
        }
        Preset::TwoBathDimer => {
            if m.delta_e.is_some() || m.density.is_some() {
                return Err(field(
                    "model.delta_e",
                    "two-bath-dimer takes eps1/eps2/alpha_corr and tuning_density/coupling_density",
                ));
            }
            // No silent defaults: these are not published with the model.
            let eps1 = energy("model.eps1", m.eps1.as_deref().ok_or_else(|| field("model.eps1", "required"))?)?;
            let eps2 = energy("model.eps2", m.eps2.as_deref().ok_or_else(|| field("model.eps2", "required"))?)?;
            let alpha = m.alpha_corr.ok_or_else(|| field("model.alpha_corr", "required"))?;
            let init = m.initial_state.get_or_insert_with(|| "upper".into());
            let rho0 = initial_state(init)?;
            let mut model = build_two_bath(eps1, eps2, alpha, &JD_TERMS, &JOD_TERMS, t_k).context("build_two_bath")?;
            if let Some(d) = &m.tuning_density {
                model.tuning_bath.density = load_density("model.tuning_density", d)?;
            }
            if let Some(d) = &m.coupling_density {
                model.coupling_bath.density = load_density("model.coupling_density", d)?;
            }
            Ok(Problem {
                kind: ModelKind::TwoBath,
                system: model.system().context("system Hamiltonian")?,
                baths: vec![model.tuning_bath, model.coupling_bath],
                rho0,
            })
        }
    }
}

fn initial_state(name: &str) -> Result<Operator> {
    match name {
        "superposition" => Ok(superposition()),
        "upper" => Ok(upper_state()),
        other => Err(field(
            "model.initial_state",
            format!("unknown state '{other}' (expected superposition or upper)"),
        )),
    }
}

/// Modes of one bath plus what produced them.
#[derive(Debug, Clone)]
pub struct BathModes {
    pub modes: Vec<DecayMode>,
    pub poles: Option<PoleSet>,
    /// Rel. C(t) deviation reported by the pole fit.
    pub fit_deviation: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Decomposition {
    Modes(Vec<BathModes>),
    Chain(ChainModel),
}

fn discrete_samples(density: &SpectralDensity) -> Option<Vec<(f64, f64)>> {
    match density {
        SpectralDensity::DiscreteModes(m) => Some(m.iter().map(|d| (d.omega, d.c)).collect()),
        _ => None,
    }
}

/// Runs the decomposition method on every bath and fills in method defaults.
pub fn decompose(cfg: &mut Config, problem: &Problem) -> Result<Decomposition> {
    let t_end = time("propagation.t_end", &cfg.propagation.t_end)?;
    let default_k_fit = if problem.kind == ModelKind::TwoBath { 2 } else { 4 };
    match &mut cfg.method {
        MethodConfig::TmFit {
            k_fit,
            matsubara_terms,
            fit_horizon,
        } => {
            let k_fit = *k_fit.get_or_insert(default_k_fit);
            let horizon = match fit_horizon {
                Some(h) => time("method.fit_horizon", h)?,
                None => {
                    *fit_horizon = Some(fmt_time(t_end));
                    t_end
                }
            };
            let m_a = match matsubara_terms {
                Some(m) => *m,
                None => {
                    let mut m = 1;
                    for b in &problem.baths {
                        m = m.max(default_matsubara_count(&b.density, b.beta, horizon).context("matsubara count")?);
                    }
                    *matsubara_terms = Some(m);
                    m
                }
            };
            let mut out = Vec::new();
            for (i, b) in problem.baths.iter().enumerate() {
                let modes = tm_fit_modes(&b.density, b.beta, m_a, k_fit, horizon)
                    .context(&format!("TM&FIT decomposition of bath {i}"))?;
                out.push(BathModes {
                    modes,
                    poles: None,
                    fit_deviation: None,
                });
            }
            Ok(Decomposition::Modes(out))
        }
        MethodConfig::TmMatsubara { matsubara_terms } => {
            let m_a = match matsubara_terms {
                Some(m) => *m,
                None => {
                    let mut m = 1;
                    for b in &problem.baths {
                        m = m.max(matsubara_min_terms(&b.density, b.beta, TAIL_BOUND).context("matsubara count")?);
                    }
                    *matsubara_terms = Some(m);
                    m
                }
            };
            let mut out = Vec::new();
            for (i, b) in problem.baths.iter().enumerate() {
                let ctx = format!("TM+Matsubara decomposition of bath {i}");
                let mut modes = tm_pole_modes(&b.density, b.beta).context(&ctx)?;
                modes.extend(matsubara_modes(&b.density, b.beta, m_a).context(&ctx)?);
                out.push(BathModes {
                    modes,
                    poles: None,
                    fit_deviation: None,
                });
            }
            Ok(Decomposition::Modes(out))
        }
        MethodConfig::FreePole {
            degree,
            target,
            max_degree,
            horizon,
        } => {
            let horizon_au = match horizon {
                Some(h) => time("method.horizon", h)?,
                None => {
                    *horizon = Some(fmt_time(t_end));
                    t_end
                }
            };
            let count = match degree {
                Some(d) => PoleCount::Degree(*d),
                None => PoleCount::Adaptive {
                    target: *target.get_or_insert(1e-3),
                    max_degree: *max_degree.get_or_insert(40),
                },
            };
            let mut out = Vec::new();
            for (i, b) in problem.baths.iter().enumerate() {
                let d = fp_decompose(b, horizon_au, count).context(&format!("free-pole decomposition of bath {i}"))?;
                out.push(BathModes {
                    modes: d.modes,
                    poles: Some(d.poles),
                    fit_deviation: Some(d.rel_deviation),
                });
            }
            Ok(Decomposition::Modes(out))
        }
        MethodConfig::Discrete { modes, omega_max } => {
            let cap = omega_max
                .as_deref()
                .map(|s| energy("method.omega_max", s))
                .transpose()?;
            let mut out = Vec::new();
            for (i, b) in problem.baths.iter().enumerate() {
                let ctx = format!("discretization of bath {i}");
                let samples = match discrete_samples(&b.density) {
                    Some(s) => s,
                    None => discretize_equal_lambda(&b.density, *modes, cap).context(&ctx)?,
                };
                out.push(BathModes {
                    modes: discrete_modes(&samples, b.beta).context(&ctx)?,
                    poles: None,
                    fit_deviation: None,
                });
            }
            Ok(Decomposition::Modes(out))
        }
        MethodConfig::ChainDense {
            sites,
            omega_min,
            omega_max,
            grid,
            ..
        } => {
            if problem.baths.len() != 1 {
                return Err(field("method.kind", "chain_dense supports single-bath models only"));
            }
            let b = &problem.baths[0];
            if let Some(samples) = discrete_samples(&b.density) {
                let ext = thermal_extend_lvc(&samples, b.beta, LVC_NEGATIVE_THRESHOLD).context("thermal extension")?;
                let (f, w) = star_weights(&ext).context("star weights")?;
                let (chain, _) = chain_map_star(&f, &w, *sites, b.beta).context("chain_map_star")?;
                return Ok(Decomposition::Chain(chain));
            }
            let hi = match omega_max {
                Some(s) => energy("method.omega_max", s)?,
                None => {
                    let hi = fp_half_width(&b.density).context("chain cutoff")?;
                    *omega_max = Some(fmt_energy(hi));
                    hi
                }
            };
            let lo = match omega_min {
                Some(s) => energy("method.omega_min", s)?,
                None => {
                    let lo = negative_cutoff(b, hi, 1e-6).context("chain cutoff")?;
                    *omega_min = Some(fmt_energy(lo));
                    lo
                }
            };
            let g = *grid.get_or_insert(DEFAULT_GRID);
            let chain = chain_map_thermal(b, *sites, lo, hi, g).context("chain_map_thermal")?;
            Ok(Decomposition::Chain(chain))
        }
    }
}

pub fn heom_baths(problem: &Problem, modes: &[BathModes]) -> Result<Vec<HeomBath>> {
    problem
        .baths
        .iter()
        .zip(modes)
        .map(|(b, m)| HeomBath::from_spec(b, m.modes.clone()).context("HEOM bath"))
        .collect()
}

/// Builds the hierarchy and fills in scaling, budget and time-step defaults.
pub fn build_heom(cfg: &mut Config, problem: &Problem, modes: &[BathModes]) -> Result<Heom> {
    let baths = heom_baths(problem, modes)?;
    let h = &mut cfg.hierarchy;
    let scaling = match h.scaling.as_deref() {
        Some("unscaled") => Scaling::Unscaled,
        Some("sqrt_scaled") => Scaling::SqrtScaled,
        Some(other) => {
            return Err(field(
                "hierarchy.scaling",
                format!("unknown scaling '{other}' (expected unscaled or sqrt_scaled)"),
            ))
        }
        None => {
            let s = heom_core::heom::default_scaling(&baths);
            h.scaling = Some(if s == Scaling::Unscaled { "unscaled" } else { "sqrt_scaled" }.into());
            s
        }
    };
    let budget = *h
        .memory_budget
        .get_or_insert(heom_core::heom::DEFAULT_MEMORY_BUDGET as u64);
    let options = HeomOptions {
        truncation: Truncation {
            depth: h.depth,
            per_mode_cap: h.per_mode_cap,
        },
        scaling,
        memory_budget: budget as u128,
    };
    Heom::new(&problem.system, &baths, options).context("build_hierarchy")
}

pub fn integrator(cfg: &mut Config, default_dt: f64) -> Result<Integrator> {
    let p = &mut cfg.propagation;
    match p.integrator.as_str() {
        "rk4" => {
            if p.rtol.is_some() || p.atol.is_some() {
                return Err(field("propagation.rtol", "tolerances apply to rk45 only"));
            }
            let dt = match &p.dt {
                Some(s) => time("propagation.dt", s)?,
                None => {
                    p.dt = Some(fmt_time(default_dt));
                    default_dt
                }
            };
            if !(dt > 0.0) {
                return Err(field("propagation.dt", "must be > 0"));
            }
            Ok(Integrator::Rk4 { dt })
        }
        "rk45" => {
            if p.dt.is_some() {
                return Err(field("propagation.dt", "rk45 chooses its own step; set rtol/atol instead"));
            }
            let rtol = *p.rtol.get_or_insert(RK45_RTOL);
            let atol = *p.atol.get_or_insert(RK45_ATOL);
            if !(rtol > 0.0 && atol > 0.0) {
                return Err(field("propagation.rtol", "tolerances must be > 0"));
            }
            Ok(Integrator::Rk45 { rtol, atol })
        }
        other => Err(field(
            "propagation.integrator",
            format!("unknown integrator '{other}' (expected rk4 or rk45)"),
        )),
    }
}

pub fn output_times(cfg: &Config) -> Result<Vec<f64>> {
    let t_end = time("propagation.t_end", &cfg.propagation.t_end)?;
    let every = time("propagation.output_every", &cfg.propagation.output_every)?;
    if !(t_end > 0.0) {
        return Err(field("propagation.t_end", "must be > 0"));
    }
    if !(every > 0.0 && every <= t_end) {
        return Err(field("propagation.output_every", "must lie in (0, t_end]"));
    }
    let n = (t_end / every + 1e-9).floor() as usize;
    let mut t: Vec<f64> = (0..=n).map(|i| i as f64 * every).collect();
    if t_end - t[n] > 1e-9 * t_end {
        t.push(t_end);
    }
    Ok(t)
}

/// Resolved run ready to propagate.
pub struct Prepared {
    pub config: Config,
    pub problem: Problem,
    pub decomposition: Decomposition,
    pub engine: Engine,
    pub times: Vec<f64>,
}

pub enum Engine {
    Heom(Box<Heom>, Integrator),
    Chain { fock_dim: usize, budget: usize },
}

pub fn prepare(mut cfg: Config) -> Result<Prepared> {
    let problem = build_problem(&mut cfg)?;
    let times = output_times(&cfg)?;
    let decomposition = decompose(&mut cfg, &problem)?;
    let engine = match &decomposition {
        Decomposition::Modes(m) => {
            let heom = build_heom(&mut cfg, &problem, m)?;
            let integ = integrator(&mut cfg, heom.default_time_step())?;
            Engine::Heom(Box::new(heom), integ)
        }
        Decomposition::Chain(_) => {
            let MethodConfig::ChainDense {
                fock_dim,
                amplitude_budget,
                ..
            } = &mut cfg.method
            else {
                unreachable!("chain decomposition comes from chain_dense");
            };
            let budget = *amplitude_budget.get_or_insert(DEFAULT_AMPLITUDE_BUDGET);
            Engine::Chain {
                fock_dim: *fock_dim,
                budget,
            }
        }
    };
    Ok(Prepared {
        config: cfg,
        problem,
        decomposition,
        engine,
        times,
    })
}

pub fn propagate(p: &Prepared) -> Result<Trajectory> {
    match (&p.engine, &p.decomposition) {
        (Engine::Heom(heom, integ), _) => {
            let state = heom.init_state(&p.problem.rho0).context("init_state")?;
            heom.propagate(&state, &p.times, *integ, p.config.propagation.layer_norms)
                .context("propagate")
        }
        (Engine::Chain { fock_dim, budget }, Decomposition::Chain(chain)) => {
            let s = &p.problem.baths[0].coupling;
            let t = chain_propagate_dense(&p.problem.system, s, chain, *fock_dim, &p.problem.rho0, &p.times, *budget)
                .context("chain_propagate_dense")?;
            Ok(Trajectory {
                times: t.times,
                rho: t.rho,
                layer_norms: None,
                steps: 0,
            })
        }
        _ => unreachable!("engine and decomposition are built together"),
    }
}

/// Named observable columns on the output grid.
pub struct Observables {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Observables {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn observables(problem: &Problem, traj: &Trajectory) -> Result<Observables> {
    let units = UnitSystem::default();
    let mut names: Vec<String> = ["t_au", "t_fs", "pop_1", "pop_2", "trace", "abs_rho_12"]
        .map(String::from)
        .to_vec();
    let oracle = match problem.kind {
        ModelKind::PureDephasing => {
            names.extend(["D", "D_oracle", "D_abs_dev"].map(String::from));
            Some(decoherence_analytic(&problem.baths[0], &traj.times, ORACLE_TOL).context("decoherence_analytic")?)
        }
        ModelKind::TwoBath => {
            names.extend(["pop_R", "pop_L", "abs_coh_RL"].map(String::from));
            None
        }
    };
    let mut rows = Vec::with_capacity(traj.times.len());
    for (k, (&t, rho)) in traj.times.iter().zip(&traj.rho).enumerate() {
        let mut row = vec![
            t,
            units.au_to_fs(t),
            rho[(0, 0)].re,
            rho[(1, 1)].re,
            (rho[(0, 0)] + rho[(1, 1)]).re,
            rho[(0, 1)].norm(),
        ];
        match &oracle {
            Some(o) => {
                let d = 2.0 * rho[(0, 1)].norm();
                row.extend([d, o[k], (d - o[k]).abs()]);
            }
            None => {
                let (r, l, coh) = rotate_basis_pi4(rho).context("rotate_basis_pi4")?;
                row.extend([r, l, coh.norm()]);
            }
        }
        rows.push(row);
    }
    Ok(Observables { names, rows })
}
