use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bose occupancy is singular at omega = 0; evaluate thermal density via its omega->0 limit instead")]
    ZeroFrequency,

    #[error("frequency {omega} lies outside the tabulated grid [{lo}, {hi}]")]
    OutsideGrid { omega: f64, lo: f64, hi: f64 },

    #[error("a discrete mode list has no pointwise spectral density value")]
    NotPointwise,

    #[error("quadrature did not converge after {panels} panels: estimate {estimate:e}, residual {residual:e}")]
    QuadratureFailed {
        estimate: f64,
        residual: f64,
        panels: usize,
    },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("mode {index} ({family}) has Im gamma = {im_gamma:e} < 0 and does not decay")]
    NonDecayingMode {
        index: usize,
        family: String,
        im_gamma: f64,
    },

    #[error("complex coth is singular for Tannor-Meier term {0}")]
    CothPole(usize),

    #[error("Matsubara frequency nu_{n} = {nu:e} coincides with a Lorentzian pole (double pole unsupported)")]
    DoublePole { n: usize, nu: f64 },

    #[error("Matsubara tail not converged at M_a = {m_a}: tail estimate {estimate:e} exceeds {bound:e}; increase M_a")]
    MatsubaraTail { m_a: usize, estimate: f64, bound: f64 },

    #[error("exponential fit failed: {0}")]
    FitFailed(String),

    #[error("aaa_fit: tolerance {tol:e} unreachable at max degree {max_degree} (best max relative error {best:e})")]
    AaaNotConverged {
        tol: f64,
        max_degree: usize,
        best: f64,
    },

    #[error("eigen-solver failure: {0}")]
    EigenFailure(String),

    #[error("pole {0} lies on the real axis (undamped free pole)")]
    RealAxisPole(String),

    #[error("hierarchy needs {elements} complex elements, above the memory budget of {budget}")]
    MemoryBudget { elements: u128, budget: u128 },

    #[error("scaling mismatch: {0}")]
    ScalingMismatch(String),

    #[error("propagation diverged at t = {t:e} a.u. (max ADO norm {max_norm:e}); lower dt or raise the hierarchy level")]
    Divergence { t: f64, max_norm: f64 },

    #[error("initial density matrix has trace {0}, expected 1")]
    BadTrace(f64),

    #[error("Lanczos breakdown after {achieved} of {requested} chain sites")]
    LanczosBreakdown { achieved: usize, requested: usize },

    #[error("dense chain needs {amplitudes} amplitudes, above the budget of {budget}: chain out of desk scale")]
    ChainTooLarge { amplitudes: u128, budget: u128 },

    #[error("state norm drifted by {0:e} during dense propagation")]
    NormDrift(f64),

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
