//! Reference values: C(t) by direct quadrature and the closed-form
//! pure-dephasing decoherence functions.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::quadrature::{integrate_panels, integrate_to_infinity, DEFAULT_MAX_PANELS};
use crate::spectral::{one_plus_bose, one_plus_bose_complex, thermal_density, SpectralDensity};
use crate::units::UnitSystem;
use crate::BathSpec;

/// C(t) sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl CorrelationSeries {
    pub fn new(times: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(invalid("times and values differ in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("correlation time grid must be strictly increasing"));
        }
        Ok(Self { times, values })
    }

    /// Largest |self − other| over a shared grid.
    pub fn max_deviation(&self, other: &CorrelationSeries) -> Result<f64> {
        if self.times != other.times {
            return Err(invalid("correlation series are on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// CSV with columns `t_au, t_fs, re_C, im_C`.
    pub fn write_csv<W: Write>(&self, mut w: W, units: &UnitSystem) -> std::io::Result<()> {
        writeln!(w, "t_au,t_fs,re_C,im_C")?;
        for (t, c) in self.times.iter().zip(&self.values) {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                t,
                units.au_to_fs(*t),
                c.re,
                c.im
            )?;
        }
        Ok(())
    }
}

/// Uniform grid of `n` points on [0, t_end].
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect(),
    }
}

/// C(t) = (1/π)∫ J_β(ω) e^{−iωt} dω with absolute error ≤ `tol` per point.
///
/// Tannor–Meier sums are integrated on [−W, W] along the real axis and the
/// two tails along vertical rays into the lower half plane, where the
/// kernel e^{−iωt} decays; no singularity lies between the rays and the
/// real axis once W exceeds every Lorentzian centre. Discrete modes use the
/// closed form.
pub fn correlation_exact(bath: &BathSpec, times: &[f64], tol: f64) -> Result<CorrelationSeries> {
    if !(tol > 0.0) {
        return Err(invalid("oracle tolerance must be > 0"));
    }
    let values: Vec<Result<Complex64>> = times
        .par_iter()
        .map(|&t| {
            let c = correlation_point(bath, t.abs(), tol)?;
            Ok(if t < 0.0 { c.conj() } else { c })
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    CorrelationSeries::new(times.to_vec(), values)
}

fn correlation_point(bath: &BathSpec, t: f64, tol: f64) -> Result<Complex64> {
    let beta = bath.beta;
    match &bath.density {
        SpectralDensity::DiscreteModes(modes) => {
            let mut s = Complex64::new(0.0, 0.0);
            for m in modes {
                let w = m.omega;
                let amp = m.c * m.c / (2.0 * w);
                let n = if beta.is_infinite() {
                    0.0
                } else {
                    one_plus_bose(w, beta) - 1.0
                };
                let (sn, cs) = (w * t).sin_cos();
                s += amp * ((1.0 + n) * Complex64::new(cs, -sn) + n * Complex64::new(cs, sn));
            }
            Ok(s)
        }
        SpectralDensity::Tabulated(tab) => {
            let hi = tab.omega_max();
            let f = |w: f64| {
                let jb = thermal_density(&bath.density, beta, w).unwrap_or(f64::NAN);
                jb * Complex64::new(0.0, -w * t).exp()
            };
            let knots = tab.grid().len().min(20_000);
            let periods = (hi * t / (2.0 * PI)).ceil() as usize;
            let panels = knots.max(periods).max(1);
            let piece = PI * tol / 2.0;
            let neg = integrate_panels(f, -hi, 0.0, piece, panels, DEFAULT_MAX_PANELS)?.value;
            let pos = integrate_panels(f, 0.0, hi, piece, panels, DEFAULT_MAX_PANELS)?.value;
            finite_or_err((neg + pos) / PI)
        }
        SpectralDensity::TannorMeierSum(terms) => {
            let w_cut = 4.0
                * terms
                    .iter()
                    .map(|l| l.omega + l.gamma)
                    .fold(0.0, f64::max);
            let density = &bath.density;
            let f = |w: f64| {
                let jb = thermal_density(density, beta, w).unwrap_or(f64::NAN);
                jb * Complex64::new(0.0, -w * t).exp()
            };
            let periods = (w_cut * t / (2.0 * PI)).ceil() as usize;
            let panels = (periods + 4).max(8);
            let piece = PI * tol / 4.0;
            let neg = integrate_panels(f, -w_cut, 0.0, piece, panels, DEFAULT_MAX_PANELS)?.value;
            let pos = integrate_panels(f, 0.0, w_cut, piece, panels, DEFAULT_MAX_PANELS)?.value;
            let thermal_c = |z: Complex64| {
                density.eval_complex(z).unwrap_or(Complex64::new(f64::NAN, 0.0))
                    * one_plus_bose_complex(z, beta)
            };
            let scale = w_cut / (1.0 + w_cut * t);
            let upper = integrate_to_infinity(
                |s: f64| thermal_c(Complex64::new(w_cut, -s)) * (-s * t).exp(),
                0.0,
                scale,
                piece,
            )?
            .value
                * Complex64::new(0.0, -w_cut * t).exp()
                * Complex64::new(0.0, -1.0);
            let lower = if beta.is_infinite() {
                Complex64::new(0.0, 0.0)
            } else {
                integrate_to_infinity(
                    |s: f64| thermal_c(Complex64::new(-w_cut, -s)) * (-s * t).exp(),
                    0.0,
                    scale,
                    piece,
                )?
                .value
                    * Complex64::new(0.0, w_cut * t).exp()
                    * Complex64::new(0.0, 1.0)
            };
            finite_or_err((neg + pos + upper + lower) / PI)
        }
    }
}

fn finite_or_err(c: Complex64) -> Result<Complex64> {
    if c.re.is_finite() && c.im.is_finite() {
        Ok(c)
    } else {
        Err(invalid("non-finite value in correlation quadrature"))
    }
}

/// coth(βω/2)/ω with the Laurent expansion 2/(βω²) + β/6 for small βω.
fn coth_over_omega(w: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        return 1.0 / w;
    }
    let x = beta * w;
    if x.abs() < 1e-4 {
        2.0 / (beta * w * w) + beta / 6.0
    } else {
        1.0 / ((0.5 * x).tanh() * w)
    }
}

/// 1 − cos(ωt), evaluated as 2 sin²(ωt/2).
fn one_minus_cos(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    2.0 * s * s
}

/// D(t)/D(0) = exp(−(1/π)∫₀^∞ J(ω)/ω² coth(βω/2)(1 − cos ωt) dω) for a
/// pure-dephasing qubit with coupling σ_z/2, each point to absolute `tol`.
pub fn decoherence_analytic(bath: &BathSpec, times: &[f64], tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(invalid("oracle tolerance must be > 0"));
    }
    if let SpectralDensity::DiscreteModes(modes) = &bath.density {
        let pairs: Vec<(f64, f64)> = modes.iter().map(|m| (m.omega, m.c)).collect();
        return decoherence_discrete(&pairs, bath.beta, times);
    }
    let beta = bath.beta;
    let density = &bath.density;
    let out: Vec<Result<f64>> = times
        .par_iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok(1.0);
            }
            let slope = density.slope_at_zero()?;
            let f = |w: f64| {
                if w == 0.0 {
                    // (J/ω)(coth/ω)(1 − cos) → J′(0)·t²/β as ω → 0.
                    return if beta.is_infinite() { 0.0 } else { slope * t * t / beta };
                }
                let jw = density.eval_over_omega(w).unwrap_or(f64::NAN);
                jw * coth_over_omega(w, beta) * one_minus_cos(w * t)
            };
            let scale = density.frequency_scale();
            let (upper, tail) = match density.support_max() {
                Some(hi) => (hi, false),
                None => (8.0 * scale, true),
            };
            let periods = (upper * t.abs() / (2.0 * PI)).ceil() as usize;
            let knots = match density {
                SpectralDensity::Tabulated(tab) => tab.grid().len().min(20_000),
                _ => 8,
            };
            let piece = PI * tol / 4.0;
            let mut integral =
                integrate_panels(f, 0.0, upper, piece, periods.max(knots) + 4, DEFAULT_MAX_PANELS)?
                    .value;
            if tail {
                integral += integrate_to_infinity(f, upper, upper, piece)?.value;
            }
            if !integral.is_finite() {
                return Err(invalid("non-finite value in decoherence quadrature"));
            }
            Ok((-integral / PI).exp())
        })
        .collect();
    out.into_iter().collect()
}

/// D(t)/D(0) = exp(−Σ_j c_j²/(2ω_j³) coth(βω_j/2)(1 − cos ω_j t)).
pub fn decoherence_discrete(modes: &[(f64, f64)], beta: f64, times: &[f64]) -> Result<Vec<f64>> {
    if let Some(&(w, _)) = modes.iter().find(|(w, _)| !(*w > 0.0)) {
        return Err(invalid(format!("discrete mode frequency must be > 0 (got {w})")));
    }
    if !(beta > 0.0) {
        return Err(invalid("beta must be > 0"));
    }
    Ok(times
        .iter()
        .map(|&t| {
            let phi: f64 = modes
                .iter()
                .map(|&(w, c)| {
                    c * c / (2.0 * w * w) * coth_over_omega(w, beta) * one_minus_cos(w * t)
                })
                .sum();
            (-phi).exp()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_diag;
    use crate::quadrature::integrate;

    fn bath(terms: &[(f64, f64, f64)], kelvin: f64) -> BathSpec {
        let beta = UnitSystem::default().beta_from_kelvin(kelvin);
        BathSpec::new(
            SpectralDensity::tannor_meier(terms).unwrap(),
            beta,
            real_diag(&[0.5, -0.5]),
        )
        .unwrap()
    }

    const J1: (f64, f64, f64) = (2e-9, 6e-3, 5e-3);

    #[test]
    fn zero_time_value_is_real_integral() {
        let b = bath(&[J1], 298.0);
        let c = correlation_exact(&b, &[0.0], 1e-15).unwrap();
        assert!(c.values[0].im.abs() < 1e-15);
        let direct = integrate(|w| b.thermal(w).unwrap(), -0.02, 0.05, 1e-16).unwrap().value;
        // The window misses only the far tails of J_β.
        let tail: f64 = integrate(|w: f64| b.thermal(w).unwrap(), 0.05, 50.0, 1e-17).unwrap().value;
        // Beyond ω = 50 only the p/ω³ asymptote matters.
        let far = 2e-9 / (2.0 * 50.0 * 50.0);
        let expected = (direct + tail + far) / PI;
        assert!((expected - c.values[0].re).abs() < 1e-9 * expected, "{expected} vs {}", c.values[0]);
    }

    #[test]
    fn conjugation_symmetry() {
        let b = bath(&[J1], 298.0);
        let c = correlation_exact(&b, &[-300.0, -10.0, 10.0, 300.0], 1e-14).unwrap();
        assert!((c.values[0] - c.values[3].conj()).norm() < 1e-14);
        assert!((c.values[1] - c.values[2].conj()).norm() < 1e-14);
    }

    #[test]
    fn imaginary_part_is_temperature_independent() {
        let ts = [50.0, 500.0, 5000.0];
        let hot = correlation_exact(&bath(&[J1], 298.0), &ts, 1e-14).unwrap();
        let cold = correlation_exact(&bath(&[J1], 10.0), &ts, 1e-14).unwrap();
        for (h, c) in hot.values.iter().zip(&cold.values) {
            assert!((h.im - c.im).abs() < 5e-14, "{} vs {}", h.im, c.im);
        }
    }

    #[test]
    fn contour_tail_matches_long_real_axis_quadrature() {
        // Independent check of the rotated tails: integrate far out on the
        // real axis, where the 1/ω³ tail is below the tolerance.
        let b = bath(&[J1], 298.0);
        let t = 800.0;
        let f = |w: f64| b.thermal(w).unwrap() * Complex64::new(0.0, -w * t).exp();
        let reference = crate::quadrature::quadrature_oscillatory(f, -0.05, 3.0, 1e-16, t)
            .unwrap()
            .value
            / PI;
        let c = correlation_exact(&b, &[t], 1e-15).unwrap().values[0];
        assert!((c - reference).norm() < 1e-13, "{c} vs {reference}");
    }

    #[test]
    fn j1_decays_within_fifty_fs() {
        let u = UnitSystem::default();
        let b = bath(&[J1], 298.0);
        let c = correlation_exact(&b, &[0.0, u.fs_to_au(50.0)], 1e-14).unwrap();
        assert!(c.values[1].norm() < 0.2 * c.values[0].norm());
    }

    #[test]
    fn decoherence_limits() {
        let b = bath(&[J1], 298.0);
        let u = UnitSystem::default();
        let ts = uniform_grid(u.fs_to_au(500.0), 51);
        let d = decoherence_analytic(&b, &ts, 1e-10).unwrap();
        assert_eq!(d[0], 1.0);
        for w in d.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 && w[1] > 0.0);
        }
        let zero = decoherence_discrete(&[(1e-3, 0.0)], 1e3, &ts).unwrap();
        assert!(zero.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn decoherence_refinement_is_stable() {
        let b = bath(&[(2.2e-10, 6e-3, 1e-3)], 10.0);
        let ts = [4000.0, 20000.0];
        let a = decoherence_analytic(&b, &ts, 1e-8).unwrap();
        let fine = decoherence_analytic(&b, &ts, 1e-12).unwrap();
        for (x, y) in a.iter().zip(&fine) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn discrete_recurrence() {
        let w = 3e-3;
        let t = 2.0 * PI / w;
        let d = decoherence_discrete(&[(w, 1e-4)], 500.0, &[0.0, t]).unwrap();
        assert_eq!(d[0], 1.0);
        assert!((d[1] - 1.0).abs() < 1e-12);
        assert!(decoherence_discrete(&[(0.0, 1.0)], 1.0, &[0.0]).is_err());
    }

    #[test]
    fn csv_header() {
        let s = CorrelationSeries::new(vec![0.0], vec![Complex64::new(1.0, 0.0)]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, &UnitSystem::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_au,t_fs,re_C,im_C\n"));
    }
}
