//! Hierarchical equations of motion on a dense index simplex.
//!
//! For C(t) = Σ_k α_k e^{iγ_k t}, with α̃_k the coefficient of the same
//! exponential in C̄(t), each ADO obeys
//!
//! dρ_m/dt = −i[H_S, ρ_m] + i(Σ_k m_k γ_k)ρ_m − iΣ_k [S, ρ_{m+e_k}]
//!           − iΣ_k m_k(α_k S ρ_{m−e_k} − α̃_k ρ_{m−e_k} S).
//!
//! In the square-root scaled form ρ_m = Π_k (m_k! w_k^{m_k})^{1/2} ρ̃_m the
//! upward term carries √((m_k+1)w_k) and the downward one √(m_k/w_k).

mod hierarchy;
mod integrate;
mod resources;

pub use hierarchy::{build_hierarchy, count_ados, Hierarchy, Truncation, NONE};
pub use integrate::{Integrator, Trajectory};
pub use resources::{estimate_resources, ResourceEstimate, ResourceInput};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{check_hermitian, hermitian_eigen, spectral_radius_hermitian};
use crate::modes::{check_decaying, DecayMode, FamilyGroup};
use crate::{BathSpec, Operator};

/// Default ceiling on stored complex numbers (n² per ADO).
pub const DEFAULT_MEMORY_BUDGET: u128 = 40_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    Unscaled,
    SqrtScaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    hamiltonian: Operator,
}

impl SystemSpec {
    pub fn new(hamiltonian: Operator) -> Result<Self> {
        check_hermitian(&hamiltonian, 1e-14)?;
        Ok(Self { hamiltonian })
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }
}

/// One bath as seen by the hierarchy: its coupling operator and modes.
#[derive(Debug, Clone, PartialEq)]
pub struct HeomBath {
    pub coupling: Operator,
    pub modes: Vec<DecayMode>,
}

impl HeomBath {
    pub fn new(coupling: Operator, modes: Vec<DecayMode>) -> Result<Self> {
        check_hermitian(&coupling, 1e-14)?;
        Ok(Self { coupling, modes })
    }

    pub fn from_spec(bath: &BathSpec, modes: Vec<DecayMode>) -> Result<Self> {
        Self::new(bath.coupling.clone(), modes)
    }

    fn group(&self) -> Result<Option<FamilyGroup>> {
        let mut group = None;
        for m in &self.modes {
            let g = m.family.group();
            match group {
                None => group = Some(g),
                Some(h) if h != g => {
                    return Err(invalid(format!(
                        "bath mixes {h:?} and {g:?} mode families; one decomposition per bath"
                    )))
                }
                _ => {}
            }
        }
        Ok(group)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeomOptions {
    pub truncation: Truncation,
    pub scaling: Scaling,
    pub memory_budget: u128,
}

impl HeomOptions {
    pub fn new(depth: usize, scaling: Scaling) -> Self {
        Self {
            truncation: Truncation::total_depth(depth),
            scaling,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Scaling the SM-style equations use for the given mode families.
pub fn default_scaling(baths: &[HeomBath]) -> Scaling {
    let fp = baths
        .iter()
        .flat_map(|b| &b.modes)
        .any(|m| m.family.group() == FamilyGroup::FreePole);
    if fp {
        Scaling::SqrtScaled
    } else {
        Scaling::Unscaled
    }
}

/// All ADOs in one flat buffer, row-major n×n blocks in hierarchy order.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    pub ados: Vec<Complex64>,
    pub n: usize,
    pub scaling: Scaling,
}

impl HierarchyState {
    pub fn len(&self) -> usize {
        self.ados.len() / (self.n * self.n)
    }

    pub fn is_empty(&self) -> bool {
        self.ados.is_empty()
    }

    pub fn ado(&self, i: usize) -> Operator {
        let n = self.n;
        let block = &self.ados[i * n * n..(i + 1) * n * n];
        DMatrix::from_fn(n, n, |r, c| block[r * n + c])
    }

    pub fn root(&self) -> Operator {
        self.ado(0)
    }
}

/// The assembled equations: hierarchy, flattened operators and per-mode
/// coefficient tables.
#[derive(Debug, Clone)]
pub struct Heom {
    n: usize,
    hierarchy: Hierarchy,
    scaling: Scaling,
    h: Vec<Complex64>,
    couplings: Vec<Vec<Complex64>>,
    /// Modes of bath b occupy mode_ranges[b].
    mode_ranges: Vec<std::ops::Range<usize>>,
    modes: Vec<DecayMode>,
    /// coef_up[k][m] multiplies ρ_{m+e_k}; coef_left/right[k][m] multiply
    /// S ρ_{m−e_k} and ρ_{m−e_k} S. Indexed by the current m_k.
    coef_up: Vec<Vec<Complex64>>,
    coef_left: Vec<Vec<Complex64>>,
    coef_right: Vec<Vec<Complex64>>,
    damping: Vec<Complex64>,
    system_norm: f64,
}

fn flatten(a: &Operator) -> Vec<Complex64> {
    let n = a.nrows();
    (0..n * n).map(|i| a[(i / n, i % n)]).collect()
}

impl Heom {
    pub fn new(system: &SystemSpec, baths: &[HeomBath], options: HeomOptions) -> Result<Self> {
        let n = system.dim();
        if baths.is_empty() {
            return Err(invalid("HEOM needs at least one bath (use an empty mode list for none)"));
        }
        let mut modes = Vec::new();
        let mut mode_ranges = Vec::new();
        let mut couplings = Vec::new();
        for (b, bath) in baths.iter().enumerate() {
            if bath.coupling.nrows() != n || bath.coupling.ncols() != n {
                return Err(invalid(format!(
                    "bath {b} coupling is {}x{}, system is {n}x{n}",
                    bath.coupling.nrows(),
                    bath.coupling.ncols()
                )));
            }
            check_hermitian(&bath.coupling, 1e-14)?;
            let group = bath.group()?;
            check_decaying(&bath.modes)?;
            if group == Some(FamilyGroup::FreePole) && options.scaling != Scaling::SqrtScaled {
                return Err(Error::ScalingMismatch(format!(
                    "bath {b} carries free-pole modes, which require the square-root scaled hierarchy"
                )));
            }
            let start = modes.len();
            modes.extend_from_slice(&bath.modes);
            mode_ranges.push(start..modes.len());
            couplings.push(flatten(&bath.coupling));
        }
        let k = modes.len();
        let hierarchy = if k == 0 {
            // Single root ADO: plain Liouville–von Neumann.
            build_hierarchy(1, Truncation::total_depth(0), n, options.memory_budget)?
        } else {
            build_hierarchy(k, options.truncation, n, options.memory_budget)?
        };
        let depth = options.truncation.depth;
        let mut coef_up = Vec::with_capacity(k);
        let mut coef_left = Vec::with_capacity(k);
        let mut coef_right = Vec::with_capacity(k);
        let mi = Complex64::new(0.0, -1.0);
        for (idx, mode) in modes.iter().enumerate() {
            let (mut up, mut left, mut right) = (Vec::new(), Vec::new(), Vec::new());
            match options.scaling {
                Scaling::Unscaled => {
                    for m in 0..=depth {
                        let mf = m as f64;
                        up.push(mi);
                        left.push(mi * mf * mode.alpha);
                        right.push(-mi * mf * mode.alpha_tilde);
                    }
                }
                Scaling::SqrtScaled => {
                    let w = mode.scale_weight();
                    if w.norm() == 0.0 {
                        return Err(Error::ScalingMismatch(format!(
                            "mode {idx} has zero weight and cannot be square-root scaled"
                        )));
                    }
                    let sw = w.sqrt();
                    for m in 0..=depth {
                        let mf = m as f64;
                        up.push(mi * ((mf + 1.0).sqrt() * sw));
                        let down = mf.sqrt() / sw;
                        left.push(mi * down * mode.alpha);
                        right.push(-mi * down * mode.alpha_tilde);
                    }
                }
            }
            coef_up.push(up);
            coef_left.push(left);
            coef_right.push(right);
        }
        let damping = (0..hierarchy.len())
            .map(|i| {
                if k == 0 {
                    return Complex64::new(0.0, 0.0);
                }
                let occ = hierarchy.occupations(i);
                let s: Complex64 = occ
                    .iter()
                    .zip(&modes)
                    .map(|(&m, mode)| mode.gamma * m as f64)
                    .sum();
                Complex64::i() * s
            })
            .collect();
        Ok(Self {
            n,
            hierarchy,
            scaling: options.scaling,
            h: flatten(system.hamiltonian()),
            couplings,
            mode_ranges,
            modes,
            coef_up,
            coef_left,
            coef_right,
            damping,
            system_norm: spectral_radius_hermitian(system.hamiltonian()),
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn modes(&self) -> &[DecayMode] {
        &self.modes
    }

    /// Number of stored complex numbers.
    pub fn elements(&self) -> usize {
        self.hierarchy.len() * self.n * self.n
    }

    /// dt = min(0.02/max|γ_k|, 0.02/‖H_S‖) a.u.
    pub fn default_time_step(&self) -> f64 {
        let g = self.modes.iter().map(|m| m.gamma.norm()).fold(0.0, f64::max);
        let mut dt = f64::INFINITY;
        if g > 0.0 {
            dt = dt.min(0.02 / g);
        }
        if self.system_norm > 0.0 {
            dt = dt.min(0.02 / self.system_norm);
        }
        if dt.is_finite() {
            dt
        } else {
            1.0
        }
    }

    /// Root ADO = ρ_S, everything else zero.
    pub fn init_state(&self, rho: &Operator) -> Result<HierarchyState> {
        let n = self.n;
        if rho.nrows() != n || rho.ncols() != n {
            return Err(invalid(format!("initial density matrix must be {n}x{n}")));
        }
        check_hermitian(rho, 1e-12)?;
        let tr: Complex64 = rho.diagonal().iter().sum();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::BadTrace(tr.re));
        }
        let (eig, _) = hermitian_eigen(rho);
        if let Some(&min) = eig.iter().find(|&&e| e < -1e-12) {
            return Err(invalid(format!(
                "initial density matrix is not positive semidefinite (eigenvalue {min:e})"
            )));
        }
        let mut ados = vec![Complex64::new(0.0, 0.0); self.elements()];
        ados[..n * n].copy_from_slice(&flatten(rho));
        Ok(HierarchyState {
            ados,
            n,
            scaling: self.scaling,
        })
    }

    /// Time derivative of the whole hierarchy.
    pub fn rhs(&self, state: &HierarchyState) -> Result<HierarchyState> {
        if state.scaling != self.scaling {
            return Err(Error::ScalingMismatch(format!(
                "state is {:?}, equations are {:?}",
                state.scaling, self.scaling
            )));
        }
        if state.ados.len() != self.elements() {
            return Err(invalid("state size does not match the hierarchy"));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); state.ados.len()];
        self.rhs_into(&state.ados, &mut out);
        Ok(HierarchyState {
            ados: out,
            n: self.n,
            scaling: self.scaling,
        })
    }

    pub(crate) fn rhs_into(&self, y: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        let n2 = n * n;
        let zero = Complex64::new(0.0, 0.0);
        let has_modes = !self.modes.is_empty();
        out.par_chunks_mut(n2)
            .enumerate()
            .with_min_len(64)
            .for_each_init(
                || (vec![zero; n2], vec![zero; n2]),
                |(left, right), (i, o)| {
                    let rho = &y[i * n2..(i + 1) * n2];
                    let d = self.damping[i];
                    // −i[H, ρ] + dρ
                    for r in 0..n {
                        for c in 0..n {
                            let mut s = zero;
                            for q in 0..n {
                                s += self.h[r * n + q] * rho[q * n + c] - rho[r * n + q] * self.h[q * n + c];
                            }
                            o[r * n + c] = Complex64::new(s.im, -s.re) + d * rho[r * n + c];
                        }
                    }
                    if !has_modes {
                        return;
                    }
                    let occ = self.hierarchy.occupations(i);
                    let ups = self.hierarchy.up_row(i);
                    let downs = self.hierarchy.down_row(i);
                    for (b, range) in self.mode_ranges.iter().enumerate() {
                        left.iter_mut().for_each(|z| *z = zero);
                        right.iter_mut().for_each(|z| *z = zero);
                        let mut any = false;
                        for k in range.clone() {
                            let m = occ[k] as usize;
                            let j = ups[k];
                            if j != NONE {
                                let cu = self.coef_up[k][m];
                                let src = &y[j as usize * n2..(j as usize + 1) * n2];
                                for (p, &v) in src.iter().enumerate() {
                                    left[p] += cu * v;
                                    right[p] -= cu * v;
                                }
                                any = true;
                            }
                            let j = downs[k];
                            if j != NONE {
                                let cl = self.coef_left[k][m];
                                let cr = self.coef_right[k][m];
                                let src = &y[j as usize * n2..(j as usize + 1) * n2];
                                for (p, &v) in src.iter().enumerate() {
                                    left[p] += cl * v;
                                    right[p] += cr * v;
                                }
                                any = true;
                            }
                        }
                        if !any {
                            continue;
                        }
                        // o += S·left + right·S
                        let s = &self.couplings[b];
                        for r in 0..n {
                            for c in 0..n {
                                let mut acc = zero;
                                for q in 0..n {
                                    acc += s[r * n + q] * left[q * n + c] + right[r * n + q] * s[q * n + c];
                                }
                                o[r * n + c] += acc;
                            }
                        }
                    }
                },
            );
    }

    /// Frobenius norm of each hierarchy layer, physical (unscaled) ADOs
    /// are not reconstructed.
    pub fn layer_norms(&self, state: &HierarchyState) -> Vec<f64> {
        let n2 = self.n * self.n;
        let mut acc = vec![0.0; self.hierarchy.truncation().depth + 1];
        for i in 0..self.hierarchy.len() {
            let s: f64 = state.ados[i * n2..(i + 1) * n2].iter().map(|z| z.norm_sqr()).sum();
            acc[self.hierarchy.level(i)] += s;
        }
        acc.into_iter().map(f64::sqrt).collect()
    }
}
