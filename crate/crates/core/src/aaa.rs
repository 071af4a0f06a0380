//! Free-pole decomposition: AAA barycentric rational fit of J_β(ω), its
//! poles and residues, and the decay modes they define.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::modes::{correlation_from_modes, DecayMode, ModeFamily};
use crate::oracles::{correlation_exact, uniform_grid};
use crate::quadrature::integrate_relative;
use crate::spectral::thermal_density;
use crate::{BathSpec, SpectralDensity};

/// r(z) = Σ w_j f_j/(z − z_j) / Σ w_j/(z − z_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycentricFit {
    pub support_points: Vec<f64>,
    pub values: Vec<f64>,
    pub weights: Vec<Complex64>,
    pub max_rel_error: f64,
}

impl BarycentricFit {
    pub fn degree(&self) -> usize {
        self.support_points.len().saturating_sub(1)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for ((&zj, &fj), &wj) in self.support_points.iter().zip(&self.values).zip(&self.weights) {
            let d = z - zj;
            if d == Complex64::new(0.0, 0.0) {
                return Complex64::new(fj, 0.0);
            }
            let c = wj / d;
            num += c * fj;
            den += c;
        }
        num / den
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).re
    }

    fn denominator_and_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut d = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for (&zj, &wj) in self.support_points.iter().zip(&self.weights) {
            let inv = (z - zj).inv();
            d += wj * inv;
            dp -= wj * inv * inv;
        }
        (d, dp)
    }

    fn numerator(&self, z: Complex64) -> Complex64 {
        self.support_points
            .iter()
            .zip(&self.values)
            .zip(&self.weights)
            .map(|((&zj, &fj), &wj)| wj * fj / (z - zj))
            .sum()
    }

    /// r(∞) = Σ w_j f_j / Σ w_j.
    pub fn value_at_infinity(&self) -> Complex64 {
        let n: Complex64 = self.weights.iter().zip(&self.values).map(|(w, f)| w * f).sum();
        let d: Complex64 = self.weights.iter().sum();
        n / d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
    /// Constant part r(∞) of the fit; contributes only at t = 0.
    pub constant: Complex64,
}

impl PoleSet {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.constant
            + self
                .poles
                .iter()
                .zip(&self.residues)
                .map(|(p, r)| r / (z - p))
                .sum::<Complex64>()
    }

    /// CSV with columns `re_pole, im_pole, re_res, im_res`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "re_pole,im_pole,re_res,im_res")?;
        for (p, r) in self.poles.iter().zip(&self.residues) {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", p.re, p.im, r.re, r.im)?;
        }
        Ok(())
    }
}

/// Smallest right singular vector of the Loewner matrix for the support
/// set `support` (indices into the sorted samples).
fn solve_weights(z: &[f64], f: &[f64], support: &[usize], is_support: &[bool]) -> Result<Vec<f64>> {
    let rows: Vec<usize> = (0..z.len()).filter(|&i| !is_support[i]).collect();
    let m = support.len();
    if rows.is_empty() || m == 1 {
        return Ok(vec![1.0; m]);
    }
    let a = DMatrix::from_fn(rows.len(), m, |r, c| {
        let i = rows[r];
        let j = support[c];
        (f[i] - f[j]) / (z[i] - z[j])
    });
    // Square up tall systems through the Gram matrix only when the row
    // count is huge; otherwise the direct SVD is the accurate route.
    let svd = a.svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::EigenFailure("SVD of the Loewner matrix failed".into()))?;
    let sv = &svd.singular_values;
    // nalgebra does not sort; a tall matrix has m singular values.
    let k = (0..sv.len())
        .min_by(|&a, &b| sv[a].total_cmp(&sv[b]))
        .expect("non-empty");
    if sv.len() < m {
        // Fewer rows than columns: the null space is not spanned by v_t.
        return Err(invalid("AAA needs more sample points than support points"));
    }
    Ok((0..m).map(|j| vt[(k, j)]).collect())
}

fn eval_all(z: &[f64], f: &[f64], support: &[usize], w: &[f64], is_support: &[bool]) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            if is_support[i] {
                return f[i];
            }
            if support.len() == 1 {
                return f[support[0]];
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, &j) in support.iter().enumerate() {
                let c = w[k] / (z[i] - z[j]);
                num += c * f[j];
                den += c;
            }
            num / den
        })
        .collect()
}

fn max_error(f: &[f64], r: &[f64], is_support: &[bool], fmax: f64) -> (f64, usize) {
    let mut best = (0.0, usize::MAX);
    for i in 0..f.len() {
        if is_support[i] {
            continue;
        }
        let e = (f[i] - r[i]).abs() / fmax;
        // Strict comparison on ascending ω: ties go to the lowest frequency.
        if e > best.0 || best.1 == usize::MAX || e.is_nan() {
            best = (if e.is_nan() { f64::INFINITY } else { e }, i);
            if e.is_nan() {
                break;
            }
        }
    }
    best
}

fn build_fit(z: &[f64], f: &[f64], support: &[usize], w: &[f64], err: f64) -> BarycentricFit {
    BarycentricFit {
        support_points: support.iter().map(|&j| z[j]).collect(),
        values: support.iter().map(|&j| f[j]).collect(),
        weights: w.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        max_rel_error: err,
    }
}

/// Greedy AAA on real samples. `max_degree` bounds the number of support
/// points minus one.
pub fn aaa_fit(samples: &[(f64, f64)], tol: f64, max_degree: usize) -> Result<BarycentricFit> {
    let (fit, converged) = aaa_run(samples, tol, max_degree)?;
    if converged {
        Ok(fit)
    } else {
        Err(Error::AaaNotConverged {
            tol,
            max_degree,
            best: fit.max_rel_error,
        })
    }
}

/// AAA stopped at exactly `degree` (unless the samples are matched to
/// rounding earlier).
pub fn aaa_fit_degree(samples: &[(f64, f64)], degree: usize) -> Result<BarycentricFit> {
    Ok(aaa_run(samples, 1e-15, degree)?.0)
}

fn aaa_run(samples: &[(f64, f64)], tol: f64, max_degree: usize) -> Result<(BarycentricFit, bool)> {
    if samples.len() < 4 {
        return Err(invalid("aaa_fit needs at least 4 samples"));
    }
    if !(tol > 0.0) {
        return Err(invalid("aaa_fit tolerance must be > 0"));
    }
    let mut s: Vec<(f64, f64)> = samples.to_vec();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    if s.windows(2).any(|p| p[0].0 == p[1].0) {
        return Err(invalid("aaa_fit samples must have distinct frequencies"));
    }
    let z: Vec<f64> = s.iter().map(|p| p.0).collect();
    let f: Vec<f64> = s.iter().map(|p| p.1).collect();
    let fmax = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut is_support = vec![false; z.len()];
    let mut support: Vec<usize> = Vec::new();
    if fmax == 0.0 {
        support.push(0);
        return Ok((build_fit(&z, &f, &support, &[1.0], 0.0), true));
    }
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let mut r = vec![mean; z.len()];
    let mut last: Option<BarycentricFit> = None;
    let limit = (max_degree + 1).min(z.len() - 1);
    while support.len() < limit {
        let (_, next) = max_error(&f, &r, &is_support, fmax);
        support.push(next);
        is_support[next] = true;
        let w = solve_weights(&z, &f, &support, &is_support)?;
        r = eval_all(&z, &f, &support, &w, &is_support);
        let (err, _) = max_error(&f, &r, &is_support, fmax);
        let fit = build_fit(&z, &f, &support, &w, err);
        if err <= tol {
            return Ok((cleanup(&z, &f, fit, fmax), true));
        }
        last = Some(fit);
    }
    let fit = last.ok_or_else(|| invalid("aaa_fit: max_degree leaves no room for a support point"))?;
    Ok((cleanup(&z, &f, fit, fmax), false))
}

/// Removes the support point nearest to each Froissart doublet (pole with
/// negligible residue) and re-solves the weights once.
fn cleanup(z: &[f64], f: &[f64], fit: BarycentricFit, fmax: f64) -> BarycentricFit {
    let Ok((poles, residues)) = raw_poles(&fit) else {
        return fit;
    };
    let rmax = residues.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let spurious: Vec<Complex64> = poles
        .iter()
        .zip(&residues)
        .filter(|(_, r)| r.norm() < FROISSART * rmax)
        .map(|(p, _)| *p)
        .collect();
    if spurious.is_empty() {
        return fit;
    }
    let mut keep: Vec<f64> = fit.support_points.clone();
    for p in spurious {
        if keep.len() <= 1 {
            break;
        }
        let (k, _) = keep
            .iter()
            .enumerate()
            .map(|(k, &x)| (k, (Complex64::new(x, 0.0) - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        keep.remove(k);
    }
    let support: Vec<usize> = keep
        .iter()
        .map(|x| z.partition_point(|v| v < x))
        .collect();
    let mut is_support = vec![false; z.len()];
    for &j in &support {
        is_support[j] = true;
    }
    let Ok(w) = solve_weights(z, f, &support, &is_support) else {
        return fit;
    };
    let r = eval_all(z, f, &support, &w, &is_support);
    let (err, _) = max_error(f, &r, &is_support, fmax);
    build_fit(z, f, &support, &w, err)
}

const FROISSART: f64 = 1e-13;
const WINDOW_FACTOR: f64 = 10.0;
const TAIL_FACTOR: f64 = 100.0;

/// Orthonormal basis of the complement of `u` (columns), via a Householder
/// reflection mapping u to a multiple of e₁.
fn complement(u: &[f64]) -> DMatrix<f64> {
    let m = u.len();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut h: Vec<f64> = u.iter().map(|x| x / norm).collect();
    let s = if h[0] >= 0.0 { 1.0 } else { -1.0 };
    h[0] += s;
    let hn = h.iter().map(|x| x * x).sum::<f64>();
    DMatrix::from_fn(m, m - 1, |i, j| {
        let col = j + 1;
        let id = if i == col { 1.0 } else { 0.0 };
        id - 2.0 * h[i] * h[col] / hn
    })
}

/// Finite poles (roots of the barycentric denominator) and residues.
fn raw_poles(fit: &BarycentricFit) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let m = fit.support_points.len();
    if m < 2 {
        return Err(invalid("pole extraction needs at least 2 support points"));
    }
    let w: Vec<f64> = fit.weights.iter().map(|w| w.re).collect();
    if fit.weights.iter().any(|w| w.im != 0.0) {
        return Err(invalid("pole extraction expects real weights"));
    }
    let q = complement(&w);
    let l = complement(&vec![1.0; m]);
    let zd = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&fit.support_points));
    let ltq = l.transpose() * &q;
    let ltzq = l.transpose() * zd * &q;
    let inv = ltq
        .try_inverse()
        .ok_or_else(|| Error::EigenFailure("singular deflated pencil (pole at infinity)".into()))?;
    let a = inv * ltzq;
    let eig = a.complex_eigenvalues();
    if eig.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
        return Err(Error::EigenFailure("non-finite eigenvalue".into()));
    }
    // Keep the closed-upper half, polish by Newton on the denominator and
    // mirror to restore exact conjugate pairing.
    let mut poles = Vec::new();
    for &p0 in eig.iter().filter(|e| e.im >= 0.0) {
        let mut p = p0;
        for _ in 0..3 {
            let (d, dp) = fit.denominator_and_derivative(p);
            let step = d / dp;
            if !step.re.is_finite() || !step.im.is_finite() || step.norm() > 1e-3 * (p.norm() + 1e-300) {
                break;
            }
            p -= step;
        }
        if p0.im == 0.0 {
            p.im = 0.0;
        }
        poles.push(if p.im < 0.0 { p0 } else { p });
    }
    let mut all = Vec::new();
    let mut res = Vec::new();
    for p in poles {
        let (_, dp) = fit.denominator_and_derivative(p);
        let r = fit.numerator(p) / dp;
        all.push(p);
        res.push(r);
        if p.im > 0.0 {
            all.push(p.conj());
            res.push(r.conj());
        }
    }
    Ok((all, res))
}

/// Poles with residues; poles with negligible residue are dropped.
pub fn poles_and_residues(fit: &BarycentricFit) -> Result<PoleSet> {
    let (poles, residues) = raw_poles(fit)?;
    let rmax = residues.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let (poles, residues): (Vec<_>, Vec<_>) = poles
        .into_iter()
        .zip(residues)
        .filter(|(_, r)| r.norm() >= FROISSART * rmax)
        .unzip();
    Ok(PoleSet {
        poles,
        residues,
        constant: fit.value_at_infinity(),
    })
}

/// Two modes per upper-half-plane pole P with residue R:
/// γ = −Re P + i Im P with α = −2i R̄ acting from the left, and γ = P with
/// α̃ = 2i R acting from the right.
pub fn fp_modes(poles: &PoleSet) -> Result<Vec<DecayMode>> {
    let mut out = Vec::new();
    for (p, r) in poles.poles.iter().zip(&poles.residues) {
        if p.im.abs() <= 1e-14 * p.norm() {
            return Err(Error::RealAxisPole(format!("{p}")));
        }
        if p.im < 0.0 {
            continue;
        }
        let a = Complex64::new(0.0, 2.0) * r;
        let zero = Complex64::new(0.0, 0.0);
        out.push(DecayMode::new(zero, *p, a, ModeFamily::FreePole));
        out.push(DecayMode::new(
            a.conj(),
            Complex64::new(-p.re, p.im),
            zero,
            ModeFamily::FreePole,
        ));
    }
    Ok(out)
}

fn push_log_side(out: &mut Vec<f64>, center: f64, dir: f64, lo: f64, hi: f64, n: usize) {
    for i in 0..n {
        let s = lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1).max(1) as f64;
        out.push(center + dir * s.exp());
    }
}

/// Frequency where J_β first drops below `rel`·max|J_β| on the negative
/// side, searched on [−limit, 0].
pub fn negative_cutoff(bath: &BathSpec, limit: f64, rel: f64) -> Result<f64> {
    let mut jmax: f64 = 0.0;
    for w in uniform_grid(limit, 4001) {
        jmax = jmax.max(thermal_density(&bath.density, bath.beta, w)?.abs());
    }
    if bath.beta.is_infinite() {
        return Ok(0.0);
    }
    let small = |w: f64| -> Result<bool> {
        Ok(thermal_density(&bath.density, bath.beta, w)?.abs() < rel * jmax)
    };
    if !small(-limit)? {
        return Ok(-limit);
    }
    let (mut a, mut b) = (-limit, 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if small(m)? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(a)
}

/// Half-width W of the linear sampling window [−W, W].
pub fn fp_half_width(density: &SpectralDensity) -> Result<f64> {
    match density {
        SpectralDensity::TannorMeierSum(terms) => {
            Ok(WINDOW_FACTOR * terms.iter().map(|t| t.omega + t.gamma).fold(0.0, f64::max))
        }
        SpectralDensity::Tabulated(tab) => Ok(tab.omega_max()),
        SpectralDensity::DiscreteModes(_) => Err(Error::NotPointwise),
    }
}

/// Sample grid for the fit: 1000 linear points on [−W, W], 500 log-spaced
/// points per Lorentzian centre, a log-dense cluster on both sides of
/// ω = 0 resolving the thermal scale 1/β and, for densities with
/// unbounded support, log-spaced tail points out to 100 W.
///
/// The negative side is sampled in full even where J_β is negligible: left
/// unsampled, the fit is free to place real-axis poles there.
pub fn fp_sample_grid(bath: &BathSpec) -> Result<Vec<(f64, f64)>> {
    let hi = fp_half_width(&bath.density)?;
    let lo = -hi;
    let mut w: Vec<f64> = (0..1000).map(|i| lo + (hi - lo) * i as f64 / 999.0).collect();
    if let SpectralDensity::TannorMeierSum(terms) = &bath.density {
        for t in terms {
            push_log_side(&mut w, t.omega, 1.0, 1e-3 * t.gamma, 10.0 * t.gamma, 250);
            push_log_side(&mut w, t.omega, -1.0, 1e-3 * t.gamma, 10.0 * t.gamma, 250);
        }
    }
    if bath.beta.is_finite() {
        let th = 1.0 / bath.beta;
        push_log_side(&mut w, 0.0, 1.0, 1e-3 * th, 30.0 * th, 250);
        push_log_side(&mut w, 0.0, -1.0, 1e-3 * th, 30.0 * th, 250);
    }
    w.retain(|&x| x >= lo && x <= hi);
    if bath.density.support_max().is_none() {
        push_log_side(&mut w, 0.0, 1.0, hi * 1.01, hi * TAIL_FACTOR, 200);
        push_log_side(&mut w, 0.0, -1.0, hi * 1.01, hi * TAIL_FACTOR, 200);
    }
    w.sort_by(f64::total_cmp);
    w.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * hi);
    w.into_iter()
        .map(|x| Ok((x, thermal_density(&bath.density, bath.beta, x)?)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct FreePoleDecomposition {
    pub fit: BarycentricFit,
    pub poles: PoleSet,
    pub modes: Vec<DecayMode>,
    pub tol: f64,
    /// max |C_FP − C_exact| / |C(0)| on the check window.
    pub rel_deviation: f64,
}

pub const FP_TOLERANCES: [f64; 9] = [1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6, 3e-7, 1e-7];

/// How many poles to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PoleCount {
    /// Tighten the AAA tolerance until C(t) on [0, horizon] is reproduced
    /// to `target`·|C(0)|.
    Adaptive { target: f64, max_degree: usize },
    /// Rational degree fixed in advance; yields `degree` modes when every
    /// pole is complex.
    Degree(usize),
}

fn decomposition(
    fit: BarycentricFit,
    tol: f64,
    exact: &crate::oracles::CorrelationSeries,
) -> Result<FreePoleDecomposition> {
    let poles = poles_and_residues(&fit)?;
    let modes = fp_modes(&poles)?;
    if modes.is_empty() {
        return Err(invalid("fit has no complex poles"));
    }
    let approx = correlation_from_modes(&modes, &exact.times)?;
    let dev = approx.max_deviation(exact)? / exact.values[0].norm();
    Ok(FreePoleDecomposition {
        fit,
        poles,
        modes,
        tol,
        rel_deviation: dev,
    })
}

/// Free-pole modes for a bath, checked against the quadrature C(t) on
/// [0, horizon].
pub fn fp_decompose(bath: &BathSpec, horizon: f64, count: PoleCount) -> Result<FreePoleDecomposition> {
    let samples = fp_sample_grid(bath)?;
    let times = uniform_grid(horizon, 401);
    let exact = correlation_exact(bath, &times, 1e-13 * reference_scale(bath)?)?;
    match count {
        PoleCount::Degree(d) => {
            let fit = aaa_fit_degree(&samples, d)?;
            let tol = fit.max_rel_error;
            decomposition(fit, tol, &exact)
        }
        PoleCount::Adaptive { target, max_degree } => {
            let mut last = None;
            for &tol in &FP_TOLERANCES {
                let fit = match aaa_fit(&samples, tol, max_degree) {
                    Ok(f) => f,
                    Err(e) => {
                        last = Some(e);
                        break;
                    }
                };
                match decomposition(fit, tol, &exact) {
                    Ok(d) if d.rel_deviation <= target => return Ok(d),
                    Ok(d) => {
                        last = Some(Error::AaaNotConverged {
                            tol,
                            max_degree,
                            best: d.rel_deviation,
                        })
                    }
                    // A real-axis pole at one degree is usually gone at the next.
                    Err(e @ Error::RealAxisPole(_)) => last = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(last.unwrap_or_else(|| invalid("no AAA tolerance tried")))
        }
    }
}

/// Rough |C(0)| scale, (1/π)∫|J_β| over the fit window, used to set
/// absolute oracle tolerances.
pub fn reference_scale(bath: &BathSpec) -> Result<f64> {
    let hi = fp_half_width(&bath.density)?;
    let lo = -hi;
    let f = |w: f64| thermal_density(&bath.density, bath.beta, w).map_or(f64::NAN, f64::abs);
    let v = integrate_relative(f, lo, hi, 1e-6, 0.0, 64)?.value / std::f64::consts::PI;
    Ok(v.max(f64::MIN_POSITIVE))
}
