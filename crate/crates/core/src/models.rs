//! Benchmark systems: the pure-dephasing qubit and the two-bath model of
//! two coupled excited states.

use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::heom::SystemSpec;
use crate::linalg::{c, from_real_rows, real_diag};
use crate::units::UnitSystem;
use crate::{BathSpec, Operator, SpectralDensity};

/// Tannor–Meier (p, Ω, Γ) of J1 in a.u.
pub const J1_TERMS: [(f64, f64, f64); 1] = [(2e-9, 6e-3, 5e-3)];
/// Tannor–Meier (p, Ω, Γ) of J2 in a.u.
pub const J2_TERMS: [(f64, f64, f64); 1] = [(2.2e-10, 6e-3, 1e-3)];

/// Tuning bath J_d.
pub const JD_TERMS: [(f64, f64, f64); 3] = [
    (5.30e-10, 1.078687e-2, 3.40e-4),
    (1.06e-10, 7.6634e-3, 4.0e-4),
    (5.30e-11, 5.4517e-3, 3.40e-4),
];
/// Coupling bath J_od.
pub const JOD_TERMS: [(f64, f64, f64); 3] = [
    (3.82e-10, 1.078275e-2, 3.40e-4),
    (1.45e-10, 7.6634e-3, 4.0e-4),
    (4.58e-11, 5.286e-3, 4.50e-4),
];

/// Energy gap of the pure-dephasing benchmark, Ha.
pub const PURE_DEPHASING_GAP: f64 = 0.002;

pub fn pauli_z() -> Operator {
    real_diag(&[1.0, -1.0])
}

pub fn pauli_x() -> Operator {
    from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

fn beta_of(temperature_k: f64) -> Result<f64> {
    if !(temperature_k >= 0.0) {
        return Err(invalid(format!("temperature must be >= 0 K (got {temperature_k})")));
    }
    Ok(if temperature_k == 0.0 {
        f64::INFINITY
    } else {
        UnitSystem::default().beta_from_kelvin(temperature_k)
    })
}

/// H_S = (ΔE/2)σ_z with S = σ_z/2.
#[derive(Debug, Clone, PartialEq)]
pub struct PureDephasingModel {
    pub delta_e: f64,
    pub bath: BathSpec,
}

pub fn build_pure_dephasing(delta_e: f64, density: SpectralDensity, temperature_k: f64) -> Result<PureDephasingModel> {
    if !delta_e.is_finite() {
        return Err(invalid("energy gap must be finite"));
    }
    let bath = BathSpec::new(density, beta_of(temperature_k)?, pauli_z() * c(0.5, 0.0))?;
    Ok(PureDephasingModel { delta_e, bath })
}

impl PureDephasingModel {
    pub fn system(&self) -> Result<SystemSpec> {
        SystemSpec::new(pauli_z() * c(0.5 * self.delta_e, 0.0))
    }

    /// |+⟩⟨+|, all entries 1/2; D(t) = 2|ρ_12(t)|.
    pub fn initial_state(&self) -> Operator {
        superposition()
    }
}

/// H_S = ε₁|1⟩⟨1| + ε₂|2⟩⟨2|, tuning bath through |1⟩⟨1| + α|2⟩⟨2| and
/// coupling bath through |1⟩⟨2| + |2⟩⟨1|.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBathModel {
    pub eps1: f64,
    pub eps2: f64,
    pub alpha_corr: f64,
    pub tuning_bath: BathSpec,
    pub coupling_bath: BathSpec,
}

pub fn build_two_bath(
    eps1: f64,
    eps2: f64,
    alpha_corr: f64,
    jd: &[(f64, f64, f64)],
    jod: &[(f64, f64, f64)],
    temperature_k: f64,
) -> Result<TwoBathModel> {
    if !(eps1.is_finite() && eps2.is_finite() && alpha_corr.is_finite()) {
        return Err(invalid("two-bath energies and correlation factor must be finite"));
    }
    let beta = beta_of(temperature_k)?;
    let tuning_bath = BathSpec::new(SpectralDensity::tannor_meier(jd)?, beta, real_diag(&[1.0, alpha_corr]))?;
    let coupling_bath = BathSpec::new(SpectralDensity::tannor_meier(jod)?, beta, pauli_x())?;
    Ok(TwoBathModel {
        eps1,
        eps2,
        alpha_corr,
        tuning_bath,
        coupling_bath,
    })
}

/// Two-bath model with the tabulated Tannor–Meier parameters.
pub fn build_two_bath_default(eps1: f64, eps2: f64, alpha_corr: f64, temperature_k: f64) -> Result<TwoBathModel> {
    build_two_bath(eps1, eps2, alpha_corr, &JD_TERMS, &JOD_TERMS, temperature_k)
}

impl TwoBathModel {
    pub fn system(&self) -> Result<SystemSpec> {
        SystemSpec::new(real_diag(&[self.eps1, self.eps2]))
    }
}

/// |2⟩⟨2|.
pub fn upper_state() -> Operator {
    real_diag(&[0.0, 1.0])
}

/// (|1⟩+|2⟩)(⟨1|+⟨2|)/2.
pub fn superposition() -> Operator {
    from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]])
}

/// Populations of |R⟩, |L⟩ = (|1⟩ ± |2⟩)/√2 and the coherence ⟨R|ρ|L⟩.
pub fn rotate_basis_pi4(rho: &Operator) -> Result<(f64, f64, Complex64)> {
    if rho.nrows() != 2 || rho.ncols() != 2 {
        return Err(invalid(format!(
            "rotation needs a 2x2 density matrix (got {}x{})",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let mean = 0.5 * (rho[(0, 0)].re + rho[(1, 1)].re);
    let re12 = 0.5 * (rho[(0, 1)] + rho[(1, 0)]).re;
    let half_diff = 0.5 * (rho[(0, 0)] - rho[(1, 1)]);
    let coherence = half_diff + 0.5 * (rho[(1, 0)] - rho[(0, 1)]);
    Ok((mean + re12, mean - re12, coherence))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    PureDephasingJ1,
    PureDephasingJ2,
    TwoBathDimer,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::PureDephasingJ1, Preset::PureDephasingJ2, Preset::TwoBathDimer];

    pub fn name(self) -> &'static str {
        match self {
            Preset::PureDephasingJ1 => "pure-dephasing-j1",
            Preset::PureDephasingJ2 => "pure-dephasing-j2",
            Preset::TwoBathDimer => "two-bath-dimer",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown model preset '{s}' (expected pure-dephasing-j1, pure-dephasing-j2 or two-bath-dimer)"
                ))
            })
    }
}
