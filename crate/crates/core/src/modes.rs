//! Artificial decay modes: one term α e^{iγt} of the exponential expansion
//! of the bath correlation function.
//!
//! `alpha` multiplies e^{iγt} in C(t) and enters the left product S ρ of the
//! downward HEOM coupling; `alpha_tilde` multiplies e^{iγt} in the conjugate
//! function C̄(t) and enters the right product ρ S.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::oracles::CorrelationSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeFamily {
    LorentzPole,
    Matsubara,
    FittedExp,
    FreePole,
    DiscretePos,
    DiscreteNeg,
}

impl ModeFamily {
    pub fn is_discrete(self) -> bool {
        matches!(self, ModeFamily::DiscretePos | ModeFamily::DiscreteNeg)
    }

    /// Families that may share a bath in one hierarchy.
    pub fn group(self) -> FamilyGroup {
        match self {
            ModeFamily::LorentzPole | ModeFamily::Matsubara | ModeFamily::FittedExp => {
                FamilyGroup::TannorMeier
            }
            ModeFamily::FreePole => FamilyGroup::FreePole,
            ModeFamily::DiscretePos | ModeFamily::DiscreteNeg => FamilyGroup::Discrete,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeFamily::LorentzPole => "LorentzPole",
            ModeFamily::Matsubara => "Matsubara",
            ModeFamily::FittedExp => "FittedExp",
            ModeFamily::FreePole => "FreePole",
            ModeFamily::DiscretePos => "DiscretePos",
            ModeFamily::DiscreteNeg => "DiscreteNeg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyGroup {
    TannorMeier,
    FreePole,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayMode {
    pub alpha: Complex64,
    pub gamma: Complex64,
    pub alpha_tilde: Complex64,
    pub family: ModeFamily,
}

impl DecayMode {
    pub fn new(
        alpha: Complex64,
        gamma: Complex64,
        alpha_tilde: Complex64,
        family: ModeFamily,
    ) -> Self {
        Self {
            alpha,
            gamma,
            alpha_tilde,
            family,
        }
    }

    /// Contribution α e^{iγt} to C(t).
    pub fn eval(&self, t: f64) -> Complex64 {
        self.alpha * (Complex64::i() * self.gamma * t).exp()
    }

    /// Weight w used by the square-root scaled hierarchy: upward coupling
    /// carries √((m+1)w) and downward coupling 1/√w. For modes acting from
    /// one side only it is the single nonzero coefficient (with the sign
    /// that makes the scaled equations symmetric).
    pub fn scale_weight(&self) -> Complex64 {
        let a = self.alpha;
        let b = -self.alpha_tilde;
        if a.norm() >= b.norm() {
            a
        } else {
            b
        }
    }
}

pub fn check_decaying(modes: &[DecayMode]) -> Result<()> {
    for (index, m) in modes.iter().enumerate() {
        if m.gamma.im < 0.0 {
            return Err(Error::NonDecayingMode {
                index,
                family: m.family.name().to_string(),
                im_gamma: m.gamma.im,
            });
        }
    }
    Ok(())
}

/// C(t) = Σ_k α_k e^{iγ_k t} on `times`.
pub fn correlation_from_modes(modes: &[DecayMode], times: &[f64]) -> Result<CorrelationSeries> {
    if modes.is_empty() {
        return Err(invalid("correlation_from_modes needs at least one mode"));
    }
    check_decaying(modes)?;
    let values = times
        .iter()
        .map(|&t| modes.iter().map(|m| m.eval(t)).sum())
        .collect();
    CorrelationSeries::new(times.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_at_zero() {
        let m = DecayMode::new(
            Complex64::new(1.0, 0.0),
            Complex64::i(),
            Complex64::new(1.0, 0.0),
            ModeFamily::Matsubara,
        );
        let c = correlation_from_modes(&[m], &[0.0]).unwrap();
        assert_eq!(c.values[0], Complex64::new(1.0, 0.0));
        let empty = correlation_from_modes(&[m], &[]).unwrap();
        assert!(empty.times.is_empty() && empty.values.is_empty());
    }

    #[test]
    fn growing_mode_is_rejected() {
        let m = DecayMode::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(1.0, 0.0),
            ModeFamily::LorentzPole,
        );
        assert!(matches!(
            correlation_from_modes(&[m], &[0.0]),
            Err(Error::NonDecayingMode { index: 0, .. })
        ));
    }
}
