//! Modes from the poles of a Tannor–Meier density: two Lorentzian poles per
//! term, the Matsubara series of the Bose function, and its compression
//! into a few fitted real exponentials.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::expfit::{fit_exponentials, ExponentialFit};
use crate::modes::{DecayMode, ModeFamily};
use crate::spectral::{expm1_complex, TannorMeierTerm};
use crate::SpectralDensity;

fn terms(density: &SpectralDensity) -> Result<&[TannorMeierTerm]> {
    match density {
        SpectralDensity::TannorMeierSum(t) => Ok(t),
        _ => Err(invalid("pole decomposition needs a Tannor-Meier sum")),
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("beta must be > 0 (got {beta})")))
    }
}

/// n_β(z) for Re z > 0, computed as e^{−βz}/(1 − e^{−βz}).
fn bose_complex(z: Complex64, beta: f64, term: usize) -> Result<Complex64> {
    if beta.is_infinite() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let em = expm1_complex(-z * beta);
    if em.norm() < 1e-300 {
        return Err(Error::CothPole(term));
    }
    Ok(-(-z * beta).exp() / em)
}

/// Two modes per Lorentzian term, γ = ±Ω + iΓ.
pub fn tm_pole_modes(density: &SpectralDensity, beta: f64) -> Result<Vec<DecayMode>> {
    check_beta(beta)?;
    let mut out = Vec::new();
    for (l, t) in terms(density)?.iter().enumerate() {
        let pref = t.p / (4.0 * t.omega * t.gamma);
        let z1 = Complex64::new(t.omega, t.gamma);
        let z2 = Complex64::new(t.omega, -t.gamma);
        let a1 = pref * bose_complex(z1, beta, l)?;
        let a2 = pref * (1.0 + bose_complex(z2, beta, l)?);
        out.push(DecayMode::new(a1, z1, a2.conj(), ModeFamily::LorentzPole));
        out.push(DecayMode::new(
            a2,
            Complex64::new(-t.omega, t.gamma),
            a1.conj(),
            ModeFamily::LorentzPole,
        ));
    }
    Ok(out)
}

pub fn matsubara_frequency(n: usize, beta: f64) -> f64 {
    2.0 * PI * n as f64 / beta
}

/// α_n = 2i J(iν_n)/β, real and (for positive p) negative.
fn matsubara_alpha(t: &[TannorMeierTerm], n: usize, beta: f64) -> Result<f64> {
    let nu = matsubara_frequency(n, beta);
    let mut s = 0.0;
    for l in t {
        // (Ω + iν)² + Γ² and its conjugate form the denominator.
        let d = Complex64::new(l.omega, nu).powi(2) + l.gamma * l.gamma;
        let scale = l.omega * l.omega + l.gamma * l.gamma + nu * nu;
        if d.norm() < 1e-12 * scale {
            return Err(Error::DoublePole { n, nu });
        }
        // 2i·(i p ν/|d|²)/β
        s += -2.0 * l.p * nu / (d.norm_sqr() * beta);
    }
    Ok(s)
}

pub fn matsubara_modes(density: &SpectralDensity, beta: f64, m_a: usize) -> Result<Vec<DecayMode>> {
    check_beta(beta)?;
    let t = terms(density)?;
    if beta.is_infinite() && m_a > 0 {
        return Err(invalid("Matsubara series is not discrete at zero temperature"));
    }
    (1..=m_a)
        .map(|n| {
            let a = Complex64::new(matsubara_alpha(t, n, beta)?, 0.0);
            Ok(DecayMode::new(
                a,
                Complex64::new(0.0, matsubara_frequency(n, beta)),
                a,
                ModeFamily::Matsubara,
            ))
        })
        .collect()
}

/// |C(0)| proxy: pole modes plus the first `m_a` Matsubara terms at t = 0.
fn c0_proxy(t: &[TannorMeierTerm], density: &SpectralDensity, beta: f64, m_a: usize) -> Result<f64> {
    let poles: Complex64 = tm_pole_modes(density, beta)?.iter().map(|m| m.alpha).sum();
    let mut mats = 0.0;
    for n in 1..=m_a {
        mats += matsubara_alpha(t, n, beta)?;
    }
    Ok((poles + mats).norm())
}

fn tail_estimate(t: &[TannorMeierTerm], n: usize, beta: f64) -> Result<f64> {
    Ok(matsubara_alpha(t, n, beta)?.abs() / matsubara_frequency(n, beta))
}

/// Smallest M_a with |α_M|/ν_M < `rel_bound`·|C(0)|.
pub fn matsubara_min_terms(density: &SpectralDensity, beta: f64, rel_bound: f64) -> Result<usize> {
    check_beta(beta)?;
    let t = terms(density)?;
    let ok = |n: usize| -> Result<bool> {
        Ok(tail_estimate(t, n, beta)? < rel_bound * c0_proxy(t, density, beta, n)?)
    };
    // The estimate decreases monotonically in n once ν_n exceeds every
    // Lorentzian scale; bracket then bisect.
    let mut hi = 1usize;
    while !ok(hi)? {
        hi *= 2;
        if hi > 1 << 40 {
            return Err(invalid("Matsubara tail bound unreachable"));
        }
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Ok(1);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub const TAIL_BOUND: f64 = 1e-12;

/// C_Matsu(t) = Σ_{n ≤ M_a} α_n e^{−ν_n t}, after checking the tail bound.
pub fn matsubara_tail(
    density: &SpectralDensity,
    beta: f64,
    m_a: usize,
    times: &[f64],
) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let t = terms(density)?;
    if m_a == 0 {
        return Err(invalid("matsubara_tail needs M_a >= 1"));
    }
    let bound = TAIL_BOUND * c0_proxy(t, density, beta, m_a)?;
    let estimate = tail_estimate(t, m_a, beta)?;
    if estimate >= bound {
        return Err(Error::MatsubaraTail {
            m_a,
            estimate,
            bound,
        });
    }
    let alphas: Vec<f64> = (1..=m_a)
        .map(|n| matsubara_alpha(t, n, beta))
        .collect::<Result<_>>()?;
    let nu1 = matsubara_frequency(1, beta);
    Ok(times
        .iter()
        .map(|&tt| {
            // e^{−ν_n t} = q^n with q = e^{−ν_1 t}.
            let q = (-nu1 * tt).exp();
            let mut w = 1.0;
            let mut s = 0.0;
            for a in &alphas {
                w *= q;
                if w == 0.0 {
                    break;
                }
                s += a * w;
            }
            s
        })
        .collect())
}

/// Default Matsubara count for the data fed to the fit: at least the tail
/// bound and at least ν_n > 50/horizon.
pub fn default_matsubara_count(density: &SpectralDensity, beta: f64, horizon: f64) -> Result<usize> {
    let by_tail = matsubara_min_terms(density, beta, TAIL_BOUND)?;
    let by_rate = (50.0 / (horizon * matsubara_frequency(1, beta))).ceil() as usize;
    Ok(by_tail.max(by_rate).max(1))
}

pub const FIT_SAMPLES: usize = 2000;

/// Fit of the Matsubara tail on [0, horizon] with `k_fit` exponentials.
pub fn fit_matsubara_tail(
    density: &SpectralDensity,
    beta: f64,
    m_a: usize,
    k_fit: usize,
    horizon: f64,
) -> Result<ExponentialFit> {
    if !(horizon > 0.0) {
        return Err(invalid("fit horizon must be > 0"));
    }
    let times: Vec<f64> = (0..FIT_SAMPLES)
        .map(|i| horizon * i as f64 / (FIT_SAMPLES - 1) as f64)
        .collect();
    let tail = matsubara_tail(density, beta, m_a, &times)?;
    fit_exponentials(&times, &tail, k_fit)
}

/// 2N_l pole modes followed by `k_fit` fitted real exponentials.
pub fn tm_fit_modes(
    density: &SpectralDensity,
    beta: f64,
    m_a: usize,
    k_fit: usize,
    horizon: f64,
) -> Result<Vec<DecayMode>> {
    let mut modes = tm_pole_modes(density, beta)?;
    if k_fit == 0 {
        return Ok(modes);
    }
    let fit = fit_matsubara_tail(density, beta, m_a, k_fit, horizon)?;
    modes.extend(fit.modes());
    Ok(modes)
}
