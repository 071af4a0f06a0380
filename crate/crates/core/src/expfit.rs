//! Least-squares fits of a real decaying series by Σ a_k e^{−b_k t}.
//!
//! A matrix pencil on a resampled subset of the data supplies the initial
//! rates; amplitudes follow by linear least squares, and Levenberg–Marquardt
//! refines both with b_k = e^{u_k} so rates stay positive.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{DecayMode, ModeFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Sorted by rate, fastest first.
    pub terms: Vec<ExpTerm>,
    pub rms: f64,
}

impl ExponentialFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|e| e.a * (-e.b * t).exp()).sum()
    }

    /// FittedExp modes: α = α̃ = a_k, γ = i b_k.
    pub fn modes(&self) -> Vec<DecayMode> {
        self.terms
            .iter()
            .map(|e| {
                let a = Complex64::new(e.a, 0.0);
                DecayMode::new(a, Complex64::new(0.0, e.b), a, ModeFamily::FittedExp)
            })
            .collect()
    }
}

fn fail(msg: impl Into<String>) -> Error {
    Error::FitFailed(msg.into())
}

const PENCIL_SAMPLES: usize = 240;

/// Rates from the matrix pencil on uniformly spaced data.
fn pencil_rates(y: &[f64], dt: f64, k: usize) -> Result<Vec<f64>> {
    let n = y.len();
    let l = n / 3;
    if n < 2 * k + 2 || l < k {
        return Err(fail("too few samples for the requested number of terms"));
    }
    let rows = n - l;
    let h = DMatrix::from_fn(rows, l + 1, |i, j| y[i + j]);
    let svd = h.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| fail("SVD failed in the pencil step"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s0 = svd.singular_values[order[0]];
    let sk = svd.singular_values[order[k - 1]];
    if !(sk > 1e-14 * s0) {
        return Err(fail(format!(
            "pencil is rank deficient: singular value {k} is {sk:e} against {s0:e}"
        )));
    }
    // Right singular vectors of the K dominant values, as columns.
    let v = DMatrix::from_fn(l + 1, k, |i, j| vt[(order[j], i)]);
    let v1 = v.rows(0, l).into_owned();
    let v2 = v.rows(1, l).into_owned();
    let pinv = v1
        .pseudo_inverse(1e-300)
        .map_err(|e| fail(format!("pencil pseudo-inverse: {e}")))?;
    let a = pinv * v2;
    let eig = a.complex_eigenvalues();
    let mut rates: Vec<f64> = eig
        .iter()
        .map(|z| {
            let r = -z.norm().ln() / dt;
            if r.is_finite() && r > 0.0 {
                r
            } else {
                1.0 / (dt * n as f64)
            }
        })
        .collect();
    rates.sort_by(|a, b| b.total_cmp(a));
    // Repeated rates make the amplitude problem singular; spread them.
    for i in 1..rates.len() {
        if rates[i] >= rates[i - 1] * (1.0 - 1e-6) {
            rates[i] = rates[i - 1] * 0.9;
        }
    }
    Ok(rates)
}

fn basis(t: &[f64], rates: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(t.len(), rates.len(), |i, k| (-rates[k] * t[i]).exp())
}

fn amplitudes(t: &[f64], y: &[f64], rates: &[f64]) -> Result<Vec<f64>> {
    let a = basis(t, rates);
    let rhs = DVector::from_column_slice(y);
    let sol = a
        .svd(true, true)
        .solve(&rhs, 1e-15)
        .map_err(|e| fail(format!("amplitude solve: {e}")))?;
    Ok(sol.iter().copied().collect())
}

fn residual(t: &[f64], y: &[f64], a: &[f64], b: &[f64]) -> DVector<f64> {
    DVector::from_fn(t.len(), |i, _| {
        a.iter()
            .zip(b)
            .map(|(a, b)| a * (-b * t[i]).exp())
            .sum::<f64>()
            - y[i]
    })
}

/// Levenberg–Marquardt on (a, u = ln b). Returns refined (a, b).
fn refine(t: &[f64], y: &[f64], mut a: Vec<f64>, b: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = a.len();
    let mut u: Vec<f64> = b.iter().map(|b| b.ln()).collect();
    let rates = |u: &[f64]| u.iter().map(|u| u.exp()).collect::<Vec<_>>();
    let mut r = residual(t, y, &a, &rates(&u));
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..2000 {
        let bb = rates(&u);
        let jac = DMatrix::from_fn(t.len(), 2 * k, |i, j| {
            if j < k {
                (-bb[j] * t[i]).exp()
            } else {
                let m = j - k;
                -a[m] * bb[m] * t[i] * (-bb[m] * t[i]).exp()
            }
        });
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for d in 0..2 * k {
                lhs[(d, d)] += mu * jtj[(d, d)].max(1e-300);
            }
            let step = match lhs.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    mu *= 10.0;
                    continue;
                }
            };
            let a_new: Vec<f64> = (0..k).map(|i| a[i] + step[i]).collect();
            let u_new: Vec<f64> = (0..k).map(|i| u[i] + step[k + i].clamp(-2.0, 2.0)).collect();
            let r_new = residual(t, y, &a_new, &rates(&u_new));
            let c_new = r_new.norm_squared();
            if c_new.is_finite() && c_new < cost {
                let gain = (cost - c_new) / cost.max(1e-300);
                a = a_new;
                u = u_new;
                r = r_new;
                cost = c_new;
                mu = (mu / 3.0).max(1e-15);
                improved = gain > 1e-14;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Ok((a, rates(&u)))
}

/// Fits Σ_{k ≤ K} a_k e^{−b_k t} to `values` on the uniform grid `times`.
pub fn fit_exponentials(times: &[f64], values: &[f64], k_fit: usize) -> Result<ExponentialFit> {
    if k_fit == 0 {
        return Err(fail("K_fit must be >= 1"));
    }
    if times.len() != values.len() || times.len() < 2 * k_fit + 2 {
        return Err(fail("need matching time/value arrays with at least 2K+2 points"));
    }
    let horizon = times[times.len() - 1] - times[0];
    if !(horizon > 0.0) {
        return Err(fail("time grid must span a positive interval"));
    }
    let t0 = times[0];
    let y_scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if y_scale == 0.0 {
        return Err(fail("series is identically zero"));
    }
    // Work in τ = (t − t0)/horizon and y/max|y|.
    let tau: Vec<f64> = times.iter().map(|t| (t - t0) / horizon).collect();
    let y: Vec<f64> = values.iter().map(|v| v / y_scale).collect();

    let stride = (times.len() / PENCIL_SAMPLES).max(1);
    let sub: Vec<f64> = y.iter().step_by(stride).copied().collect();
    let dtau = tau[stride.min(tau.len() - 1)] - tau[0];
    let rates0 = pencil_rates(&sub, dtau, k_fit)?;
    let a0 = amplitudes(&tau, &y, &rates0)?;
    let (a, b) = refine(&tau, &y, a0, rates0)?;

    let mut terms: Vec<ExpTerm> = a
        .iter()
        .zip(&b)
        .map(|(&a, &b)| ExpTerm {
            a: a * y_scale,
            b: b / horizon,
        })
        .collect();
    if let Some(bad) = terms.iter().find(|e| !(e.b > 0.0 && e.b.is_finite() && e.a.is_finite())) {
        return Err(fail(format!("refinement produced an invalid rate {:e}", bad.b)));
    }
    // Shift back to the original time origin.
    for e in &mut terms {
        e.a *= (e.b * t0).exp();
    }
    terms.sort_by(|p, q| q.b.total_cmp(&p.b));
    let mut fit = ExponentialFit { terms, rms: 0.0 };
    let ss: f64 = times
        .iter()
        .zip(values)
        .map(|(&t, &v)| (fit.eval(t) - v).powi(2))
        .sum();
    fit.rms = (ss / times.len() as f64).sqrt();
    Ok(fit)
}
