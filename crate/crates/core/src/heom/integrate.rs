//! Time stepping: classical RK4 at fixed step and the Cash–Karp embedded
//! 4(5) pair with step-size control.

use std::io::Write;
use std::ops::ControlFlow;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Heom, HierarchyState};
use crate::error::{invalid, Error, Result};
use crate::units::UnitSystem;
use crate::Operator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    Rk4 { dt: f64 },
    Rk45 { rtol: f64, atol: f64 },
}

/// Anything beyond this in a single element is treated as blow-up.
const DIVERGENCE_LIMIT: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Root ADO at each output time.
    pub rho: Vec<Operator>,
    /// Per-layer norms at each output time, when requested.
    pub layer_norms: Option<Vec<Vec<f64>>>,
    pub steps: usize,
}

impl Trajectory {
    /// Header `t_au,t_fs,re_rho_11,…,im_rho_11,…` (1-based indices),
    /// followed by `norm_L0,…` when layer norms are present. `comments`
    /// are written first as `# ` lines.
    pub fn write_csv<W: Write>(&self, w: &mut W, comments: &[String]) -> std::io::Result<()> {
        let units = UnitSystem::default();
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let n = self.rho.first().map_or(0, |r| r.nrows());
        let mut head = vec!["t_au".to_string(), "t_fs".to_string()];
        for part in ["re", "im"] {
            for i in 0..n {
                for j in 0..n {
                    head.push(format!("{part}_rho_{}{}", i + 1, j + 1));
                }
            }
        }
        if let Some(norms) = &self.layer_norms {
            for l in 0..norms.first().map_or(0, Vec::len) {
                head.push(format!("norm_L{l}"));
            }
        }
        writeln!(w, "{}", head.join(","))?;
        for (k, (&t, rho)) in self.times.iter().zip(&self.rho).enumerate() {
            let mut row = vec![format!("{t:.16e}"), format!("{:.16e}", units.au_to_fs(t))];
            for i in 0..n {
                for j in 0..n {
                    row.push(format!("{:.16e}", rho[(i, j)].re));
                }
            }
            for i in 0..n {
                for j in 0..n {
                    row.push(format!("{:.16e}", rho[(i, j)].im));
                }
            }
            if let Some(norms) = &self.layer_norms {
                row.extend(norms[k].iter().map(|v| format!("{v:.16e}")));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// ρ_ij(t) as a series.
    pub fn element(&self, i: usize, j: usize) -> Vec<Complex64> {
        self.rho.iter().map(|r| r[(i, j)]).collect()
    }
}

fn axpy(out: &mut [Complex64], a: f64, x: &[Complex64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += *v * a;
    }
}

fn combine(out: &mut [Complex64], y: &[Complex64], terms: &[(f64, &[Complex64])]) {
    out.copy_from_slice(y);
    for (a, k) in terms {
        if *a != 0.0 {
            axpy(out, *a, k);
        }
    }
}

fn max_norm(y: &[Complex64]) -> f64 {
    y.iter().map(|z| z.norm()).fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

fn check_finite(y: &[Complex64], t: f64) -> Result<()> {
    let m = max_norm(y);
    if !m.is_finite() || m > DIVERGENCE_LIMIT {
        return Err(Error::Divergence { t, max_norm: m });
    }
    Ok(())
}

// Cash–Karp tableau (the system is autonomous, so the nodes c_i are not
// needed).
const CK_A: [[f64; 5]; 6] = [
    [0.0; 5],
    [0.2, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [0.3, -0.9, 1.2, 0.0, 0.0],
    [-11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0],
];
const CK_B5: [f64; 6] = [37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0];
const CK_B4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    0.25,
];

impl Heom {
    /// Propagates `state` and records the root ADO at every entry of
    /// `output_times` (non-decreasing, starting at or after 0).
    pub fn propagate(
        &self,
        state: &HierarchyState,
        output_times: &[f64],
        integrator: Integrator,
        record_layer_norms: bool,
    ) -> Result<Trajectory> {
        self.propagate_observed(state, output_times, integrator, record_layer_norms, |_, _| ControlFlow::Continue(()))
    }

    /// Like [`Heom::propagate`], but hands every recorded root ADO to
    /// `observe`; returning `Break` ends the run early and the trajectory
    /// stops at that output time.
    pub fn propagate_observed(
        &self,
        state: &HierarchyState,
        output_times: &[f64],
        integrator: Integrator,
        record_layer_norms: bool,
        mut observe: impl FnMut(f64, &Operator) -> ControlFlow<()>,
    ) -> Result<Trajectory> {
        if state.scaling != self.scaling {
            return Err(Error::ScalingMismatch(format!(
                "state is {:?}, equations are {:?}",
                state.scaling, self.scaling
            )));
        }
        if state.ados.len() != self.elements() {
            return Err(invalid("state size does not match the hierarchy"));
        }
        if output_times.is_empty() || output_times[0] < 0.0 {
            return Err(invalid("output times must be non-empty and start at t >= 0"));
        }
        if output_times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(invalid("output times must be non-decreasing"));
        }
        match integrator {
            Integrator::Rk4 { dt } if !(dt > 0.0 && dt.is_finite()) => {
                return Err(invalid(format!("RK4 step must be > 0 (got {dt})")))
            }
            Integrator::Rk45 { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
                return Err(invalid("RK45 tolerances must be > 0"))
            }
            _ => {}
        }
        let mut y = state.ados.clone();
        let mut t = 0.0;
        let mut traj = Trajectory {
            times: Vec::with_capacity(output_times.len()),
            rho: Vec::with_capacity(output_times.len()),
            layer_norms: record_layer_norms.then(Vec::new),
            steps: 0,
        };
        let mut stepper = Stepper::new(self, y.len(), integrator);
        for &target in output_times {
            stepper.advance(self, &mut y, &mut t, target, &mut traj.steps)?;
            let n = self.n;
            traj.times.push(target);
            traj.rho.push(Operator::from_fn(n, n, |r, c| y[r * n + c]));
            if let Some(norms) = traj.layer_norms.as_mut() {
                let full = HierarchyState {
                    ados: y.clone(),
                    n: self.n,
                    scaling: self.scaling,
                };
                norms.push(self.layer_norms(&full));
            }
            if observe(target, traj.rho.last().expect("just pushed")).is_break() {
                break;
            }
        }
        Ok(traj)
    }
}

struct Stepper {
    integrator: Integrator,
    k: Vec<Vec<Complex64>>,
    tmp: Vec<Complex64>,
    acc: Vec<Complex64>,
    /// Last accepted adaptive step.
    h: f64,
}

impl Stepper {
    fn new(heom: &Heom, len: usize, integrator: Integrator) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let stages = match integrator {
            Integrator::Rk4 { .. } => 1,
            Integrator::Rk45 { .. } => 6,
        };
        Self {
            integrator,
            k: vec![vec![zero; len]; stages],
            tmp: vec![zero; len],
            acc: vec![zero; len],
            h: heom.default_time_step(),
        }
    }

    fn advance(&mut self, heom: &Heom, y: &mut Vec<Complex64>, t: &mut f64, target: f64, steps: &mut usize) -> Result<()> {
        let span = target - *t;
        if span <= 0.0 {
            return Ok(());
        }
        match self.integrator {
            Integrator::Rk4 { dt } => {
                let n = (span / dt - 1e-9).ceil().max(1.0) as usize;
                let h = span / n as f64;
                let start = *t;
                for s in 0..n {
                    self.rk4_step(heom, y, h);
                    *steps += 1;
                    *t = start + h * (s + 1) as f64;
                    check_finite(y, *t)?;
                }
                *t = target;
            }
            Integrator::Rk45 { rtol, atol } => {
                while *t < target {
                    let remaining = target - *t;
                    let last = self.h >= remaining;
                    let h = if last { remaining } else { self.h };
                    let err = self.ck_trial(heom, y, h, rtol, atol);
                    if err.is_nan() {
                        return Err(Error::Divergence {
                            t: *t,
                            max_norm: max_norm(y),
                        });
                    }
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if err <= 1.0 {
                        std::mem::swap(y, &mut self.acc);
                        *t = if last { target } else { *t + h };
                        *steps += 1;
                        check_finite(y, *t)?;
                        if !last || factor < 1.0 {
                            self.h = h * factor;
                        }
                    } else {
                        self.h = h * factor;
                        if self.h < 1e-12 * target.max(1.0) {
                            return Err(Error::Divergence {
                                t: *t,
                                max_norm: max_norm(y),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn rk4_step(&mut self, heom: &Heom, y: &mut Vec<Complex64>, h: f64) {
        let k = &mut self.k[0];
        heom.rhs_into(y, k);
        self.acc.copy_from_slice(y);
        axpy(&mut self.acc, h / 6.0, k);
        combine(&mut self.tmp, y, &[(0.5 * h, k)]);
        heom.rhs_into(&self.tmp, k);
        axpy(&mut self.acc, h / 3.0, k);
        combine(&mut self.tmp, y, &[(0.5 * h, k)]);
        heom.rhs_into(&self.tmp, k);
        axpy(&mut self.acc, h / 3.0, k);
        combine(&mut self.tmp, y, &[(h, k)]);
        heom.rhs_into(&self.tmp, k);
        axpy(&mut self.acc, h / 6.0, k);
        std::mem::swap(y, &mut self.acc);
    }

    /// One Cash–Karp trial; the fifth-order result is left in `acc`, the
    /// scaled error norm is returned.
    fn ck_trial(&mut self, heom: &Heom, y: &[Complex64], h: f64, rtol: f64, atol: f64) -> f64 {
        for s in 0..6 {
            self.tmp.copy_from_slice(y);
            for (j, &a) in CK_A[s].iter().enumerate().take(s) {
                if a != 0.0 {
                    axpy(&mut self.tmp, h * a, &self.k[j]);
                }
            }
            heom.rhs_into(&self.tmp, &mut self.k[s]);
        }
        self.acc.copy_from_slice(y);
        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let mut hi = Complex64::new(0.0, 0.0);
            let mut lo = Complex64::new(0.0, 0.0);
            for s in 0..6 {
                hi += self.k[s][i] * CK_B5[s];
                lo += self.k[s][i] * CK_B4[s];
            }
            let ynew = y[i] + hi * h;
            self.acc[i] = ynew;
            let sc = atol + rtol * y[i].norm().max(ynew.norm());
            let e = ((hi - lo) * h).norm() / sc;
            if e.is_nan() {
                return f64::NAN;
            }
            err = err.max(e);
        }
        err
    }
}
