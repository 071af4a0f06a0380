//! Spectral densities J(ω), the Bose function and the thermal density
//! J_β(ω) = J(ω)(1 + n_β(ω)).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_relative, integrate_to_infinity_relative};
use crate::Operator;

/// One Ohmic-Lorentzian term p ω / ([(ω+Ω)²+Γ²][(ω−Ω)²+Γ²]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TannorMeierTerm {
    pub p: f64,
    pub omega: f64,
    pub gamma: f64,
}

impl TannorMeierTerm {
    pub fn new(p: f64, omega: f64, gamma: f64) -> Result<Self> {
        if !(p > 0.0 && omega > 0.0 && gamma > 0.0) {
            return Err(invalid(format!(
                "Tannor-Meier term needs p, Omega, Gamma > 0 (got {p}, {omega}, {gamma})"
            )));
        }
        Ok(Self { p, omega, gamma })
    }

    pub fn eval(&self, w: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        let a = (w + self.omega).powi(2) + g2;
        let b = (w - self.omega).powi(2) + g2;
        self.p * w / (a * b)
    }

    /// Analytic continuation to complex frequency.
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let g2 = self.gamma * self.gamma;
        let a = (z + self.omega).powi(2) + g2;
        let b = (z - self.omega).powi(2) + g2;
        z * self.p / (a * b)
    }

    pub fn slope_at_zero(&self) -> f64 {
        let s = self.omega * self.omega + self.gamma * self.gamma;
        self.p / (s * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMode {
    pub omega: f64,
    pub c: f64,
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Butland
/// slopes), monotone wherever the data are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(invalid("monotone cubic needs >= 2 points and equal lengths"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("interpolation grid must be strictly increasing"));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    /// Evaluates inside the domain; callers check bounds.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// J(ω) sampled on ω ≥ 0 and extended to ω < 0 by antisymmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    interp: MonotoneCubic,
}

impl TabulatedDensity {
    /// Builds from samples on a strictly increasing non-negative grid. A
    /// sample at ω = 0 is forced to J(0) = 0; if the grid starts above zero
    /// the point (0, 0) is prepended.
    pub fn new(omega: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if omega.len() != value.len() || omega.is_empty() {
            return Err(invalid("tabulated density needs matching, non-empty columns"));
        }
        if omega[0] < 0.0 {
            return Err(invalid("tabulated density grid must start at omega >= 0"));
        }
        let (mut x, mut y) = (omega, value);
        if x[0] > 0.0 {
            x.insert(0, 0.0);
            y.insert(0, 0.0);
        } else {
            y[0] = 0.0;
        }
        Ok(Self {
            interp: MonotoneCubic::new(x, y)?,
        })
    }

    pub fn omega_max(&self) -> f64 {
        self.interp.domain().1
    }

    pub fn grid(&self) -> &[f64] {
        self.interp.knots()
    }

    pub fn values(&self) -> &[f64] {
        self.interp.values()
    }

    pub fn eval(&self, w: f64) -> Result<f64> {
        let hi = self.omega_max();
        if w.abs() > hi || w.is_nan() {
            return Err(Error::OutsideGrid {
                omega: w,
                lo: -hi,
                hi,
            });
        }
        let v = self.interp.eval(w.abs());
        Ok(if w < 0.0 { -v } else { v })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpectralDensity {
    TannorMeierSum(Vec<TannorMeierTerm>),
    DiscreteModes(Vec<DiscreteMode>),
    Tabulated(TabulatedDensity),
}

impl SpectralDensity {
    pub fn tannor_meier(terms: &[(f64, f64, f64)]) -> Result<Self> {
        terms
            .iter()
            .map(|&(p, o, g)| TannorMeierTerm::new(p, o, g))
            .collect::<Result<Vec<_>>>()
            .map(SpectralDensity::TannorMeierSum)
    }

    pub fn discrete(modes: &[(f64, f64)]) -> Result<Self> {
        if modes.iter().any(|&(w, _)| !(w > 0.0)) {
            return Err(invalid("discrete modes need omega > 0"));
        }
        Ok(SpectralDensity::DiscreteModes(
            modes.iter().map(|&(omega, c)| DiscreteMode { omega, c }).collect(),
        ))
    }

    pub fn eval(&self, w: f64) -> Result<f64> {
        match self {
            SpectralDensity::TannorMeierSum(terms) => Ok(terms.iter().map(|t| t.eval(w)).sum()),
            SpectralDensity::DiscreteModes(_) => Err(Error::NotPointwise),
            SpectralDensity::Tabulated(tab) => tab.eval(w),
        }
    }

    /// Analytic continuation J(z); only Tannor–Meier sums have one.
    pub fn eval_complex(&self, z: Complex64) -> Option<Complex64> {
        match self {
            SpectralDensity::TannorMeierSum(terms) => {
                Some(terms.iter().map(|t| t.eval_complex(z)).sum())
            }
            _ => None,
        }
    }

    /// J′(0): closed form for Tannor–Meier sums, centered difference for
    /// tabulated curves.
    pub fn slope_at_zero(&self) -> Result<f64> {
        match self {
            SpectralDensity::TannorMeierSum(terms) => {
                Ok(terms.iter().map(TannorMeierTerm::slope_at_zero).sum())
            }
            SpectralDensity::DiscreteModes(_) => Err(Error::NotPointwise),
            SpectralDensity::Tabulated(tab) => {
                let h = 1e-6 * tab.omega_max();
                Ok((tab.eval(h)? - tab.eval(-h)?) / (2.0 * h))
            }
        }
    }

    /// Characteristic frequency width used to scale quadratures.
    pub fn frequency_scale(&self) -> f64 {
        match self {
            SpectralDensity::TannorMeierSum(terms) => terms
                .iter()
                .map(|t| t.omega + t.gamma)
                .fold(0.0, f64::max),
            SpectralDensity::DiscreteModes(m) => m.iter().map(|m| m.omega).fold(0.0, f64::max),
            SpectralDensity::Tabulated(tab) => tab.omega_max(),
        }
    }

    /// Upper end of the frequency support, if finite.
    pub fn support_max(&self) -> Option<f64> {
        match self {
            SpectralDensity::TannorMeierSum(_) => None,
            SpectralDensity::DiscreteModes(m) => Some(m.iter().map(|m| m.omega).fold(0.0, f64::max)),
            SpectralDensity::Tabulated(tab) => Some(tab.omega_max()),
        }
    }

    /// J(ω)/ω with its ω → 0 limit.
    pub fn eval_over_omega(&self, w: f64) -> Result<f64> {
        if w == 0.0 {
            return self.slope_at_zero();
        }
        match self {
            SpectralDensity::TannorMeierSum(terms) => Ok(terms
                .iter()
                .map(|t| {
                    let g2 = t.gamma * t.gamma;
                    t.p / (((w + t.omega).powi(2) + g2) * ((w - t.omega).powi(2) + g2))
                })
                .sum()),
            _ => Ok(self.eval(w)? / w),
        }
    }

    /// ∫₀^upper J(ω)/ω dω by adaptive quadrature (upper = ∞ allowed for
    /// Tannor–Meier sums).
    pub fn lambda_integral(&self, upper: f64, rel_tol: f64) -> Result<f64> {
        if let SpectralDensity::DiscreteModes(_) = self {
            return Err(Error::NotPointwise);
        }
        if let SpectralDensity::Tabulated(tab) = self {
            if upper > tab.omega_max() {
                return Err(Error::OutsideGrid {
                    omega: upper,
                    lo: -tab.omega_max(),
                    hi: tab.omega_max(),
                });
            }
        }
        let f = |w: f64| self.eval_over_omega(w).unwrap_or(f64::NAN);
        let v = if upper.is_infinite() {
            integrate_to_infinity_relative(f, 0.0, self.frequency_scale(), rel_tol)?.value
        } else {
            let panels = match self {
                SpectralDensity::Tabulated(tab) => (tab.grid().len() - 1).clamp(1, 4096),
                _ => 16,
            };
            integrate_relative(f, 0.0, upper, rel_tol, 0.0, panels)?.value
        };
        if v.is_nan() {
            return Err(invalid("spectral density produced NaN inside the quadrature range"));
        }
        Ok(v)
    }
}

/// A bath: spectral density, inverse temperature and system coupling
/// operator S.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub density: SpectralDensity,
    pub beta: f64,
    pub coupling: Operator,
}

impl BathSpec {
    /// `beta` may be `f64::INFINITY` for a zero-temperature bath.
    pub fn new(density: SpectralDensity, beta: f64, coupling: Operator) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(invalid(format!("beta must be > 0 (got {beta})")));
        }
        crate::linalg::check_hermitian(&coupling, 1e-14)?;
        Ok(Self {
            density,
            beta,
            coupling,
        })
    }

    pub fn thermal(&self, w: f64) -> Result<f64> {
        thermal_density(&self.density, self.beta, w)
    }
}

/// e^z − 1 without cancellation for small |z|.
pub fn expm1_complex(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    let s = (0.5 * b).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * s * s, a.exp() * b.sin())
}

/// 1 + n_β(z) = 1/(1 − e^{−βz}) continued to complex z; `beta` may be
/// infinite.
pub fn one_plus_bose_complex(z: Complex64, beta: f64) -> Complex64 {
    if beta.is_infinite() {
        return if z.re > 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    if z.re >= 0.0 {
        -expm1_complex(-z * beta).inv()
    } else {
        let e = (z * beta).exp();
        e / expm1_complex(z * beta)
    }
}

/// n_β(ω) = 1/(e^{βω} − 1).
pub fn bose_occupancy(omega: f64, beta: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    if !(beta > 0.0) {
        return Err(invalid("beta must be > 0"));
    }
    Ok(1.0 / (beta * omega).exp_m1())
}

/// 1 + n_β(ω), evaluated without cancellation for either sign of ω.
pub(crate) fn one_plus_bose(omega: f64, beta: f64) -> f64 {
    -1.0 / (-beta * omega).exp_m1()
}

pub fn thermal_density(density: &SpectralDensity, beta: f64, w: f64) -> Result<f64> {
    if w == 0.0 {
        let slope = density.slope_at_zero()?;
        return Ok(if beta.is_infinite() { 0.0 } else { slope / beta });
    }
    Ok(density.eval(w)? * one_plus_bose(w, beta))
}

/// J_β(ω) = J(ω)(1 + n_β(ω)), with the removable singularity at ω = 0
/// replaced by J′(0)/β.
pub fn eval_thermal_sd(bath: &BathSpec, omega: f64) -> Result<f64> {
    bath.thermal(omega)
}

/// λ = (1/π)∫₀^∞ J(ω)/ω dω. Exact sum Σ c²/(2ω²) for discrete modes.
pub fn reorganization_energy(density: &SpectralDensity) -> Result<f64> {
    match density {
        SpectralDensity::DiscreteModes(modes) => Ok(modes
            .iter()
            .map(|m| m.c * m.c / (2.0 * m.omega * m.omega))
            .sum()),
        SpectralDensity::TannorMeierSum(_) => {
            Ok(density.lambda_integral(f64::INFINITY, 1e-11)? / std::f64::consts::PI)
        }
        SpectralDensity::Tabulated(tab) => {
            Ok(density.lambda_integral(tab.omega_max(), 1e-11)? / std::f64::consts::PI)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::UnitSystem;
    use proptest::prelude::*;

    fn j1() -> SpectralDensity {
        SpectralDensity::tannor_meier(&[(2e-9, 6e-3, 5e-3)]).unwrap()
    }

    fn sigma_z_half() -> Operator {
        Operator::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(-0.5, 0.0),
        ]))
    }

    #[test]
    fn bose_limits() {
        assert_eq!(bose_occupancy(0.0, 1.0), Err(Error::ZeroFrequency));
        assert!(bose_occupancy(1e3, 1.0).unwrap() < 1e-300);
        let beta = UnitSystem::default().beta_from_kelvin(298.0);
        let n = bose_occupancy(6e-3, beta).unwrap();
        // Independent series form: Σ_k e^{-kβω}.
        let series: f64 = (1..200).map(|k| (-(k as f64) * beta * 6e-3).exp()).sum();
        assert!((n - series).abs() / series < 1e-12);
        assert!((n - 1.74e-3).abs() / 1.74e-3 < 1e-2);
        for beta in [0.1, 10.0, 1e3] {
            let w = 1e-3;
            let lhs = bose_occupancy(-w, beta).unwrap();
            let rhs = -1.0 - bose_occupancy(w, beta).unwrap();
            assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn thermal_density_limits() {
        let beta = UnitSystem::default().beta_from_kelvin(298.0);
        let bath = BathSpec::new(j1(), beta, sigma_z_half()).unwrap();
        let w = 6e-3;
        let expected = j1().eval(w).unwrap() * (1.0 + bose_occupancy(w, beta).unwrap());
        assert!((eval_thermal_sd(&bath, w).unwrap() - expected).abs() < 1e-15 * expected);
        // ω = 0 uses J'(0)/β; compare against a small-ω evaluation.
        let at0 = eval_thermal_sd(&bath, 0.0).unwrap();
        let near = eval_thermal_sd(&bath, 1e-9).unwrap();
        assert!((at0 - near).abs() / at0 < 1e-5);
        let cold = BathSpec::new(j1(), f64::INFINITY, sigma_z_half()).unwrap();
        assert_eq!(eval_thermal_sd(&cold, w).unwrap(), j1().eval(w).unwrap());
        assert_eq!(eval_thermal_sd(&cold, -w).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_outside_grid() {
        let tab = TabulatedDensity::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.5]).unwrap();
        let d = SpectralDensity::Tabulated(tab);
        assert!(matches!(d.eval(2.5), Err(Error::OutsideGrid { .. })));
        assert_eq!(d.eval(-1.0).unwrap(), -1.0);
        assert!(TabulatedDensity::new(vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn monotone_interpolant_has_no_overshoot() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v < 10.0 { 0.0 } else { 1.0 }).collect();
        let m = MonotoneCubic::new(x, y).unwrap();
        for i in 0..1900 {
            let v = m.eval(i as f64 * 0.01);
            assert!((-1e-15..=1.0 + 1e-15).contains(&v));
        }
    }

    #[test]
    fn reorganization_energies_of_pure_dephasing_densities() {
        let l1 = reorganization_energy(&j1()).unwrap();
        assert!((l1 - 1.64e-3).abs() / 1.64e-3 < 0.01);
        let j2 = SpectralDensity::tannor_meier(&[(2.2e-10, 6e-3, 1e-3)]).unwrap();
        let l2 = reorganization_energy(&j2).unwrap();
        assert!((l2 - 1.49e-3).abs() / 1.49e-3 < 0.01);
    }

    #[test]
    fn discrete_reorganization_is_exact_sum() {
        let d = SpectralDensity::discrete(&[(1.0, 2.0), (2.0, 2.0)]).unwrap();
        assert_eq!(reorganization_energy(&d).unwrap(), 2.0 + 0.5);
    }

    proptest! {
        #[test]
        fn density_antisymmetry(w in -0.1f64..0.1) {
            let j = SpectralDensity::tannor_meier(&[(2e-9, 6e-3, 5e-3), (1e-10, 1e-2, 1e-3)]).unwrap();
            prop_assert_eq!(j.eval(-w).unwrap(), -j.eval(w).unwrap());
            let tab = TabulatedDensity::new(vec![0.0, 0.05, 0.1], vec![0.0, 2.0, 1.0]).unwrap();
            let t = SpectralDensity::Tabulated(tab);
            prop_assert_eq!(t.eval(-w).unwrap(), -t.eval(w).unwrap());
        }

        #[test]
        fn detailed_balance(w in 1e-5f64..0.05, beta in 10.0f64..5e4) {
            let j = j1();
            let plus = thermal_density(&j, beta, w).unwrap();
            let minus = thermal_density(&j, beta, -w).unwrap();
            let expected = (-beta * w).exp() * plus;
            prop_assert!((minus - expected).abs() <= 1e-10 * expected.abs() + 1e-300);
        }

        #[test]
        fn tm_reorganization_matches_closed_form(
            p in 1e-11f64..1e-8, omega in 1e-3f64..2e-2, gamma in 1e-4f64..1e-2
        ) {
            let j = SpectralDensity::tannor_meier(&[(p, omega, gamma)]).unwrap();
            let closed = p / (4.0 * gamma * (omega * omega + gamma * gamma));
            let quad = reorganization_energy(&j).unwrap();
            prop_assert!((quad - closed).abs() / closed < 1e-8);
        }
    }
}
