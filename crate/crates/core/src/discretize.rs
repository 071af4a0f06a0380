//! Equal-reorganization-energy sampling of J(ω) into undamped modes, their
//! fluctuation–dissipation coefficients, and Lorentzian broadening of
//! discrete mode lists.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::modes::{DecayMode, ModeFamily};
use crate::quadrature::{gauss_legendre, integrate_relative};
use crate::spectral::{bose_occupancy, TabulatedDensity, TannorMeierTerm};
use crate::units::{Unit, UnitSystem};
use crate::SpectralDensity;

const CUMULATIVE_GRID: usize = 20_000;

/// Cumulative Λ(ω) = ∫₀^ω J(x)/x dx on a fixed grid with exact local
/// Gauss–Legendre integrals, so Λ can be evaluated anywhere by one local
/// rule.
struct Cumulative<'a> {
    density: &'a SpectralDensity,
    grid: Vec<f64>,
    values: Vec<f64>,
    nodes: (Vec<f64>, Vec<f64>),
}

impl<'a> Cumulative<'a> {
    fn new(density: &'a SpectralDensity, omega_max: f64) -> Result<Self> {
        let mut grid: Vec<f64> = (0..=CUMULATIVE_GRID)
            .map(|i| omega_max * i as f64 / CUMULATIVE_GRID as f64)
            .collect();
        if let SpectralDensity::Tabulated(tab) = density {
            grid.extend(tab.grid().iter().copied().filter(|&x| x > 0.0 && x < omega_max));
            grid.sort_by(f64::total_cmp);
            grid.dedup();
        }
        let nodes = gauss_legendre(15);
        let mut c = Self {
            density,
            grid,
            values: Vec::new(),
            nodes,
        };
        let mut acc = 0.0;
        let mut values = vec![0.0];
        for k in 0..c.grid.len() - 1 {
            acc += c.local(c.grid[k], c.grid[k + 1])?;
            values.push(acc);
        }
        c.values = values;
        Ok(c)
    }

    fn local(&self, a: f64, b: f64) -> Result<f64> {
        let (x, w) = &self.nodes;
        let m = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            s += wi * self.density.eval_over_omega(m + h * xi)?;
        }
        Ok(s * h)
    }

    fn total(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    fn at(&self, w: f64) -> Result<f64> {
        let k = self.grid.partition_point(|&g| g <= w).saturating_sub(1);
        let k = k.min(self.grid.len() - 2);
        Ok(self.values[k] + self.local(self.grid[k], w)?)
    }

    /// ω with Λ(ω) = target, by bisection to `rel` relative in ω.
    fn invert(&self, target: f64, rel: f64) -> Result<f64> {
        let k = self.values.partition_point(|&v| v < target).clamp(1, self.grid.len() - 1);
        let (mut a, mut b) = (self.grid[k - 1], self.grid[k]);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.at(m)? < target {
                a = m;
            } else {
                b = m;
            }
            if b - a <= rel * b {
                break;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// Frequency where the cumulative reorganization energy reaches `fraction`
/// of the total.
pub fn lambda_quantile(density: &SpectralDensity, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid("fraction must lie in (0, 1)"));
    }
    let upper = density.support_max().unwrap_or(f64::INFINITY);
    let total = density.lambda_integral(upper, 1e-12)?;
    let target = fraction * total;
    let cum = |w: f64| -> Result<f64> {
        let f = |x: f64| density.eval_over_omega(x).unwrap_or(f64::NAN);
        Ok(integrate_relative(f, 0.0, w, 1e-12, 0.0, 16)?.value)
    };
    let mut hi = density.frequency_scale();
    while cum(hi)? < target {
        hi *= 2.0;
        if hi > upper {
            hi = upper;
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if cum(m)? < target {
            lo = m;
        } else {
            hi = m;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub const DEFAULT_LAMBDA_FRACTION: f64 = 0.999;

/// M modes (ω_m, c_m) carrying equal shares ε of ∫₀^{ω_max} J/ω; ω_m sits
/// at the (m − 1/2)/M quantile and c_m² = (2/π)ω_m²ε. With `omega_max`
/// absent the 99.9 % point of the cumulative reorganization energy is
/// used.
pub fn discretize_equal_lambda(
    density: &SpectralDensity,
    m: usize,
    omega_max: Option<f64>,
) -> Result<Vec<(f64, f64)>> {
    if m == 0 {
        return Err(invalid("discretization needs M >= 1"));
    }
    if let SpectralDensity::DiscreteModes(_) = density {
        return Err(Error::NotPointwise);
    }
    let omega_max = match omega_max {
        Some(w) if w > 0.0 => w,
        Some(w) => return Err(invalid(format!("omega_max must be > 0 (got {w})"))),
        None => lambda_quantile(density, DEFAULT_LAMBDA_FRACTION)?,
    };
    if 4 * m > CUMULATIVE_GRID {
        return Err(invalid(format!(
            "M = {m} exceeds the resolution of the {CUMULATIVE_GRID}-point cumulative grid"
        )));
    }
    let cum = Cumulative::new(density, omega_max)?;
    let total = cum.total();
    if !(total > 0.0) {
        return Err(invalid("spectral density has no weight below omega_max"));
    }
    let eps = total / m as f64;
    (1..=m)
        .map(|k| {
            let w = cum.invert((k as f64 - 0.5) * eps, 1e-13)?;
            let c = (2.0 / std::f64::consts::PI * eps).sqrt() * w;
            Ok((w, c))
        })
        .collect()
}

/// Two undamped modes per sample: γ = +ω with α = (c²/2ω)n_β(ω) and
/// γ = −ω with α = (c²/2ω)(1 + n_β(ω)). Each one's right-product
/// coefficient α̃ is the other's α.
pub fn discrete_modes(samples: &[(f64, f64)], beta: f64) -> Result<Vec<DecayMode>> {
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be > 0 (got {beta})")));
    }
    let mut out = Vec::with_capacity(2 * samples.len());
    for &(w, c) in samples {
        if !(w > 0.0) {
            return Err(invalid(format!("discrete mode frequency must be > 0 (got {w})")));
        }
        let amp = c * c / (2.0 * w);
        let n = if beta.is_infinite() {
            0.0
        } else {
            bose_occupancy(w, beta)?
        };
        let a1 = Complex64::new(amp * n, 0.0);
        let a2 = Complex64::new(amp * (1.0 + n), 0.0);
        out.push(DecayMode::new(a1, Complex64::new(w, 0.0), a2, ModeFamily::DiscretePos));
        out.push(DecayMode::new(a2, Complex64::new(-w, 0.0), a1, ModeFamily::DiscreteNeg));
    }
    Ok(out)
}

/// Broadened lines as Tannor–Meier terms. A line of strength c at ω_m
/// becomes (c²/2ω_m)Γ[1/((ω−ω_m)²+Γ²) − 1/((ω+ω_m)²+Γ²)], scaled by
/// (ω_m²+Γ²)/ω_m² so that it keeps the reorganization energy c²/(2ω_m²).
pub fn broaden_lvc_terms(modes: &[(f64, f64)], gamma: f64) -> Result<Vec<TannorMeierTerm>> {
    if modes.is_empty() {
        return Err(invalid("broadening needs at least one mode"));
    }
    if !(gamma > 0.0) {
        return Err(invalid(format!("broadening width must be > 0 (got {gamma})")));
    }
    modes
        .iter()
        .map(|&(w, c)| {
            if !(w > 0.0) {
                return Err(invalid(format!("mode frequency must be > 0 (got {w})")));
            }
            let p = 2.0 * gamma * c * c * (w * w + gamma * gamma) / (w * w);
            TannorMeierTerm::new(p, w, gamma)
        })
        .collect()
}

/// Lorentzian broadening of a discrete mode list, tabulated on [0, ω_top]
/// with ω_top = max ω_m + 200Γ and spacing Γ/10.
pub fn broaden_lvc(modes: &[(f64, f64)], gamma: f64) -> Result<SpectralDensity> {
    let terms = broaden_lvc_terms(modes, gamma)?;
    let top = modes.iter().map(|m| m.0).fold(0.0, f64::max) + 200.0 * gamma;
    let n = (top / (0.1 * gamma)).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| top * i as f64 / n as f64).collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&x| terms.iter().map(|t| t.eval(x)).sum())
        .collect();
    Ok(SpectralDensity::Tabulated(TabulatedDensity::new(grid, values)?))
}

/// One row of an LVC mode file: frequency and linear coupling κ to a
/// dimensionless normal coordinate, both in `unit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvcMode {
    pub omega: f64,
    pub kappa: f64,
}

impl LvcMode {
    /// (ω, c) in the mass-weighted convention: c = κ√ω, λ = κ²/(2ω).
    pub fn to_sample(self) -> (f64, f64) {
        (self.omega, self.kappa * self.omega.sqrt())
    }
}

/// Parses `omega,coupling,unit` CSV text; energies are converted to atomic
/// units. `expected` checks the number of modes.
pub fn parse_lvc_csv(text: &str, units: &UnitSystem, expected: Option<usize>) -> Result<Vec<LvcMode>> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty LVC file".into()))?;
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_ascii_lowercase()).collect();
    if cols != ["omega", "coupling", "unit"] {
        return Err(Error::Parse(format!(
            "LVC header must be 'omega,coupling,unit' (got '{header}')"
        )));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(Error::Parse(format!("LVC row {}: expected 3 fields", k + 1)));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("LVC row {}: bad number '{s}': {e}", k + 1)))
        };
        let unit: Unit = f[2].parse()?;
        let omega = units.energy_to_au(num(f[0])?, unit)?;
        let kappa = units.energy_to_au(num(f[1])?, unit)?;
        if !(omega > 0.0) {
            return Err(Error::Parse(format!("LVC row {}: omega must be > 0", k + 1)));
        }
        out.push(LvcMode { omega, kappa });
    }
    if let Some(n) = expected {
        if out.len() != n {
            return Err(Error::Parse(format!(
                "LVC file has {} modes, expected {n}",
                out.len()
            )));
        }
    }
    Ok(out)
}

pub fn load_lvc_csv(path: &Path, units: &UnitSystem, expected: Option<usize>) -> Result<Vec<LvcMode>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_lvc_csv(&text, units, expected)
}
