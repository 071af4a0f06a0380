//! Thermalized chain mapping and a dense small-chain propagator.
//!
//! The bath is the zero-temperature star Σ_i g_i(b_i + b_i†) with
//! frequencies on both sides of zero and Σ g_i² δ(ω − ω_i) ≈ J_β(ω)/π, so
//! its vacuum correlation function is C(t). A Lanczos run on diag(ω_i)
//! started from g/|g| turns the star into a number-conserving chain
//!
//! H_B = Σ_j ω̃_j a_j†a_j + Σ_j t_j (a_j†a_{j+1} + h.c.),
//!
//! coupled to the system through t₀ S (a_1 + a_1†) with t₀² = Σ g_i².

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::heom::SystemSpec;
use crate::linalg::{check_hermitian, hermitian_eigen};
use crate::quadrature::gauss_legendre;
use crate::spectral::{bose_occupancy, thermal_density};
use crate::{BathSpec, Operator};

/// Default number of measure nodes.
pub const DEFAULT_GRID: usize = 20_000;
/// Nodes per Gauss–Legendre panel of the measure grid.
const PANEL_NODES: usize = 20;
/// Default ceiling on n·d^{N_ch}.
pub const DEFAULT_AMPLITUDE_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub t0: f64,
    pub omegas: Vec<f64>,
    /// t_j between sites j and j+1; one shorter than `omegas`.
    pub couplings: Vec<f64>,
    pub beta: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl ChainModel {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Symmetric tridiagonal matrix of the chain.
    pub fn tridiagonal(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(j, j)] = self.omegas[j];
            if j + 1 < n {
                m[(j, j + 1)] = self.couplings[j];
                m[(j + 1, j)] = self.couplings[j];
            }
        }
        m
    }

    /// Earliest time an excitation injected at site 1 can reach the last
    /// site: (N_ch − 1)/(2 max t_j).
    pub fn light_cone_time(&self) -> f64 {
        let tmax = self.couplings.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if self.len() <= 1 || tmax == 0.0 {
            f64::INFINITY
        } else {
            (self.len() - 1) as f64 / (2.0 * tmax)
        }
    }

    /// `site,omega,coupling_to_next`; the comment header records t0, β and
    /// the cutoffs.
    pub fn write_csv<W: Write>(&self, w: &mut W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(
            w,
            "# t0={:.16e} beta={:e} omega_min={:.16e} omega_max={:.16e}",
            self.t0, self.beta, self.omega_min, self.omega_max
        )?;
        writeln!(w, "site,omega,coupling_to_next")?;
        for (j, om) in self.omegas.iter().enumerate() {
            let t = self.couplings.get(j).copied().unwrap_or(0.0);
            writeln!(w, "{},{:.16e},{:.16e}", j + 1, om, t)?;
        }
        Ok(())
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Lanczos on diag(freqs) from the start vector ∝ √weights. Returns the
/// chain together with the Lanczos basis (columns) for diagnostics.
pub fn chain_map_star(
    freqs: &[f64],
    weights: &[f64],
    n_ch: usize,
    beta: f64,
) -> Result<(ChainModel, DMatrix<f64>)> {
    if n_ch == 0 {
        return Err(invalid("chain needs at least one site"));
    }
    if freqs.len() != weights.len() || freqs.is_empty() {
        return Err(invalid("star frequencies and weights must be non-empty and of equal length"));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(invalid(format!("star weights must be >= 0 (got {w})")));
    }
    let mu0 = compensated_sum(weights.iter().copied());
    if !(mu0 > 0.0) {
        return Err(invalid("star measure has zero mass"));
    }
    let t0 = mu0.sqrt();
    let m = freqs.len();
    let mut basis = DMatrix::<f64>::zeros(m, n_ch);
    for i in 0..m {
        basis[(i, 0)] = (weights[i] / mu0).sqrt();
    }
    let mut omegas = Vec::with_capacity(n_ch);
    let mut couplings = Vec::with_capacity(n_ch.saturating_sub(1));
    let mut r = vec![0.0; m];
    for j in 0..n_ch {
        let a = compensated_sum((0..m).map(|i| freqs[i] * basis[(i, j)] * basis[(i, j)]));
        omegas.push(a);
        if j + 1 == n_ch {
            break;
        }
        for i in 0..m {
            r[i] = freqs[i] * basis[(i, j)] - a * basis[(i, j)];
            if j > 0 {
                r[i] -= couplings[j - 1] * basis[(i, j - 1)];
            }
        }
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            for q in 0..=j {
                let proj = compensated_sum((0..m).map(|i| r[i] * basis[(i, q)]));
                for i in 0..m {
                    r[i] -= proj * basis[(i, q)];
                }
            }
        }
        let b = compensated_sum(r.iter().map(|v| v * v)).sqrt();
        if !(b > 1e-14 * t0) || j + 1 >= m {
            return Err(Error::LanczosBreakdown {
                achieved: j + 1,
                requested: n_ch,
            });
        }
        couplings.push(b);
        for i in 0..m {
            basis[(i, j + 1)] = r[i] / b;
        }
    }
    let (lo, hi) = freqs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &w| (a.min(w), b.max(w)));
    Ok((
        ChainModel {
            t0,
            omegas,
            couplings,
            beta,
            omega_min: lo,
            omega_max: hi,
        },
        basis,
    ))
}

/// Composite Gauss–Legendre nodes and weights of (1/π)J_β(ω)dω on
/// [ω_min, ω_max].
pub fn thermal_measure(bath: &BathSpec, omega_min: f64, omega_max: f64, grid: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(omega_min < omega_max) {
        return Err(invalid(format!(
            "chain cutoffs must satisfy omega_min < omega_max (got {omega_min}, {omega_max})"
        )));
    }
    let panels = grid.div_ceil(PANEL_NODES).max(1);
    let (x, w) = gauss_legendre(PANEL_NODES);
    let h = (omega_max - omega_min) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * PANEL_NODES);
    let mut weights = Vec::with_capacity(panels * PANEL_NODES);
    for p in 0..panels {
        let mid = omega_min + h * (p as f64 + 0.5);
        for (xi, wi) in x.iter().zip(&w) {
            let om = mid + 0.5 * h * xi;
            let jb = thermal_density(&bath.density, bath.beta, om)?;
            nodes.push(om);
            weights.push((jb * wi * 0.5 * h / std::f64::consts::PI).max(0.0));
        }
    }
    Ok((nodes, weights))
}

/// Chain coefficients of the thermalized density J_β on [ω_min, ω_max].
pub fn chain_map_thermal(
    bath: &BathSpec,
    n_ch: usize,
    omega_min: f64,
    omega_max: f64,
    grid: usize,
) -> Result<ChainModel> {
    if grid < n_ch {
        return Err(invalid(format!("measure grid ({grid}) must exceed the chain length ({n_ch})")));
    }
    let (nodes, weights) = thermal_measure(bath, omega_min, omega_max, grid)?;
    let (mut chain, _) = chain_map_star(&nodes, &weights, n_ch, bath.beta)?;
    chain.omega_min = omega_min;
    chain.omega_max = omega_max;
    Ok(chain)
}

/// Thermal extension of discrete (ω, c) modes: (+ω, c√(1+n)) always and
/// (−ω, c√n) when n_β(ω) exceeds `threshold`.
pub fn thermal_extend_lvc(modes: &[(f64, f64)], beta: f64, threshold: f64) -> Result<Vec<(f64, f64)>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid(format!("threshold must lie in (0, 1) (got {threshold})")));
    }
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be > 0 (got {beta})")));
    }
    let mut out = Vec::with_capacity(2 * modes.len());
    let mut negative = Vec::new();
    for &(w, c) in modes {
        if !(w > 0.0) {
            return Err(invalid(format!("mode frequency must be > 0 (got {w})")));
        }
        let n = if beta.is_infinite() { 0.0 } else { bose_occupancy(w, beta)? };
        out.push((w, c * (1.0 + n).sqrt()));
        if n > threshold {
            negative.push((-w, c * n.sqrt()));
        }
    }
    out.extend(negative);
    Ok(out)
}

/// Star frequencies and weights g² = c²/(2|ω|) of (signed) discrete modes.
pub fn star_weights(modes: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut f = Vec::with_capacity(modes.len());
    let mut g2 = Vec::with_capacity(modes.len());
    for &(w, c) in modes {
        if w == 0.0 || !w.is_finite() {
            return Err(invalid(format!("star mode frequency must be nonzero (got {w})")));
        }
        f.push(w);
        g2.push(c * c / (2.0 * w.abs()));
    }
    Ok((f, g2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrajectory {
    pub times: Vec<f64>,
    pub rho: Vec<Operator>,
    /// ⟨a_j†a_j⟩ per site at each output time.
    pub site_occupations: Vec<Vec<f64>>,
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
}

/// Matrix-free Hamiltonian on system ⊗ Fock^{N_ch}.
struct DenseChain {
    n: usize,
    d: usize,
    sites: usize,
    dim_bath: usize,
    h_s: Vec<Complex64>,
    s: Vec<Complex64>,
    t0: f64,
    hops: Vec<f64>,
    /// Σ_j ω̃_j n_j for each bath basis index.
    onsite: Vec<f64>,
    strides: Vec<usize>,
    occ: Vec<u8>,
}

impl DenseChain {
    fn new(system: &SystemSpec, s: &Operator, chain: &ChainModel, d: usize, budget: usize) -> Result<Self> {
        let n = system.dim();
        let sites = chain.len();
        let mut dim_bath: usize = 1;
        let mut overflow = false;
        for _ in 0..sites {
            match dim_bath.checked_mul(d) {
                Some(v) => dim_bath = v,
                None => overflow = true,
            }
        }
        let amplitudes = if overflow { usize::MAX } else { dim_bath.saturating_mul(n) };
        if amplitudes > budget {
            return Err(Error::ChainTooLarge {
                amplitudes: amplitudes as u128,
                budget: budget as u128,
            });
        }
        let mut strides = vec![1usize; sites];
        for j in (0..sites.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * d;
        }
        let mut occ = vec![0u8; dim_bath * sites];
        let mut onsite = vec![0.0; dim_bath];
        for idx in 0..dim_bath {
            let mut e = 0.0;
            for j in 0..sites {
                let v = (idx / strides[j]) % d;
                occ[idx * sites + j] = v as u8;
                e += chain.omegas[j] * v as f64;
            }
            onsite[idx] = e;
        }
        let flat = |a: &Operator| (0..n * n).map(|i| a[(i / n, i % n)]).collect::<Vec<_>>();
        Ok(Self {
            n,
            d,
            sites,
            dim_bath,
            h_s: flat(system.hamiltonian()),
            s: flat(s),
            t0: chain.t0,
            hops: chain.couplings.clone(),
            onsite,
            strides,
            occ,
        })
    }

    fn dim(&self) -> usize {
        self.n * self.dim_bath
    }

    fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let (n, db, d) = (self.n, self.dim_bath, self.d);
        for (o, (i, p)) in out.iter_mut().zip(psi.iter().enumerate()) {
            *o = *p * self.onsite[i % db];
        }
        for a in 0..n {
            for b in 0..n {
                let h = self.h_s[a * n + b];
                if h != Complex64::new(0.0, 0.0) {
                    for k in 0..db {
                        out[a * db + k] += h * psi[b * db + k];
                    }
                }
            }
        }
        if self.sites == 0 {
            return;
        }
        // t₀ S (a_1 + a_1†)
        let st = self.strides[0];
        for a in 0..n {
            for b in 0..n {
                let sv = self.s[a * n + b] * self.t0;
                if sv == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..db {
                    let m = self.occ[k * self.sites] as usize;
                    let src = psi[b * db + k];
                    if m + 1 < d {
                        out[a * db + k + st] += sv * ((m + 1) as f64).sqrt() * src;
                    }
                    if m > 0 {
                        out[a * db + k - st] += sv * (m as f64).sqrt() * src;
                    }
                }
            }
        }
        // t_j (a_j† a_{j+1} + a_{j+1}† a_j)
        for (j, &t) in self.hops.iter().enumerate() {
            let (sj, sk) = (self.strides[j], self.strides[j + 1]);
            for k in 0..db {
                let mj = self.occ[k * self.sites + j] as usize;
                let mk = self.occ[k * self.sites + j + 1] as usize;
                if mk > 0 && mj + 1 < d {
                    let target = k + sj - sk;
                    let amp = t * ((mj + 1) as f64 * mk as f64).sqrt();
                    for a in 0..n {
                        out[a * db + target] += amp * psi[a * db + k];
                        out[a * db + k] += amp * psi[a * db + target];
                    }
                }
            }
        }
    }

    fn reduced(&self, psi: &[Complex64], rho: &mut Operator, weight: f64) {
        let db = self.dim_bath;
        for a in 0..self.n {
            for b in 0..self.n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..db {
                    s += psi[a * db + k] * psi[b * db + k].conj();
                }
                rho[(a, b)] += s * weight;
            }
        }
    }

    fn occupations(&self, psi: &[Complex64], acc: &mut [f64], weight: f64) {
        let db = self.dim_bath;
        for (i, p) in psi.iter().enumerate() {
            let k = i % db;
            let pr = p.norm_sqr() * weight;
            for j in 0..self.sites {
                acc[j] += pr * self.occ[k * self.sites + j] as f64;
            }
        }
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

const KRYLOV_DIM: usize = 24;
const KRYLOV_TOL: f64 = 1e-13;

/// ψ ← exp(−iHh)ψ over `span`, splitting into Krylov steps as needed.
fn krylov_evolve(hm: &DenseChain, psi: &mut Vec<Complex64>, span: f64, h_guess: &mut f64) -> Result<()> {
    let dim = hm.dim();
    let mut t = 0.0;
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    while t < span {
        let beta0 = norm(psi);
        let mut v: Vec<Vec<Complex64>> = vec![psi.iter().map(|z| z / beta0).collect()];
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        let mut beta_last = 0.0;
        for j in 0..KRYLOV_DIM.min(dim) {
            hm.apply(&v[j], &mut w);
            let a = dot(&v[j], &w).re;
            alphas.push(a);
            for (wi, vi) in w.iter_mut().zip(&v[j]) {
                *wi -= vi * a;
            }
            if j > 0 {
                let b: f64 = betas[j - 1];
                for (wi, vi) in w.iter_mut().zip(&v[j - 1]) {
                    *wi -= vi * b;
                }
            }
            for q in &v {
                let c = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= qi * c;
                }
            }
            let b = norm(&w);
            beta_last = b;
            if b < 1e-14 * beta0.max(1.0) || j + 1 == KRYLOV_DIM.min(dim) {
                break;
            }
            betas.push(b);
            v.push(w.iter().map(|z| z / b).collect());
        }
        let m = alphas.len();
        let mut tri = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            tri[(j, j)] = alphas[j];
            if j + 1 < m {
                tri[(j, j + 1)] = betas[j];
                tri[(j + 1, j)] = betas[j];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let mut h = (*h_guess).min(span - t);
        let coeffs = loop {
            // c = Q exp(−iΛh) Qᵀ e₁
            let c: Vec<Complex64> = (0..m)
                .map(|r| {
                    (0..m)
                        .map(|k| {
                            let ph = Complex64::new(0.0, -eig.eigenvalues[k] * h).exp();
                            ph * eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)]
                        })
                        .sum()
                })
                .collect();
            let err = beta_last * c[m - 1].norm();
            if err <= KRYLOV_TOL || m < KRYLOV_DIM.min(dim) {
                break c;
            }
            h *= 0.5;
            if h < 1e-14 * span.max(1.0) {
                return Err(invalid("Krylov step size underflow in dense chain propagation"));
            }
        };
        for z in psi.iter_mut() {
            *z = Complex64::new(0.0, 0.0);
        }
        for (c, vj) in coeffs.iter().zip(&v) {
            let s = c * beta0;
            for (p, x) in psi.iter_mut().zip(vj) {
                *p += s * x;
            }
        }
        t += h;
        *h_guess = if h == *h_guess { h * 1.25 } else { h };
    }
    Ok(())
}

/// Evolves ρ_S ⊗ |0…0⟩⟨0…0| under H_S + t₀S(a_1 + a_1†) + H_B with each
/// site truncated at `d` Fock states, and returns ρ_S(t) at `times`
/// (non-decreasing, from 0). Mixed ρ_S is handled as an ensemble of its
/// eigenvectors.
pub fn chain_propagate_dense(
    system: &SystemSpec,
    s: &Operator,
    chain: &ChainModel,
    d: usize,
    rho0: &Operator,
    times: &[f64],
    budget: usize,
) -> Result<ChainTrajectory> {
    let n = system.dim();
    if s.nrows() != n || s.ncols() != n || rho0.nrows() != n || rho0.ncols() != n {
        return Err(invalid("coupling operator and initial state must match the system dimension"));
    }
    if d < 2 {
        return Err(invalid("Fock dimension d must be >= 2"));
    }
    check_hermitian(s, 1e-14)?;
    check_hermitian(rho0, 1e-12)?;
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("times must be non-empty, non-decreasing and start at t >= 0"));
    }
    let hm = DenseChain::new(system, s, chain, d, budget)?;
    let (evals, evecs) = hermitian_eigen(rho0);
    let tr: f64 = evals.iter().sum();
    if (tr - 1.0).abs() > 1e-10 {
        return Err(Error::BadTrace(tr));
    }
    let mut rho = vec![Operator::zeros(n, n); times.len()];
    let mut occ = vec![vec![0.0; chain.len()]; times.len()];
    let mut max_norm_drift: f64 = 0.0;
    let mut max_energy_drift: f64 = 0.0;
    let mut hpsi = vec![Complex64::new(0.0, 0.0); hm.dim()];
    for (p, &weight) in evals.iter().enumerate() {
        if weight <= 1e-14 {
            continue;
        }
        let mut psi = vec![Complex64::new(0.0, 0.0); hm.dim()];
        for a in 0..n {
            psi[a * hm.dim_bath] = evecs[(a, p)];
        }
        hm.apply(&psi, &mut hpsi);
        let e0 = dot(&psi, &hpsi).re;
        let mut t = 0.0;
        let mut h_guess = f64::INFINITY;
        for (k, &target) in times.iter().enumerate() {
            if target > t {
                krylov_evolve(&hm, &mut psi, target - t, &mut h_guess)?;
                t = target;
            }
            let drift = (norm(&psi) - 1.0).abs();
            if drift > 1e-8 {
                return Err(Error::NormDrift(drift));
            }
            max_norm_drift = max_norm_drift.max(drift);
            hm.apply(&psi, &mut hpsi);
            let e = dot(&psi, &hpsi).re;
            max_energy_drift = max_energy_drift.max((e - e0).abs());
            hm.reduced(&psi, &mut rho[k], weight);
            hm.occupations(&psi, &mut occ[k], weight);
        }
    }
    Ok(ChainTrajectory {
        times: times.to_vec(),
        rho,
        site_occupations: occ,
        max_norm_drift,
        max_energy_drift,
    })
}
