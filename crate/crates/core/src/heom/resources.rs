//! Storage-count arithmetic for the standard, tensor-train and chain
//! representations.

use serde::{Deserialize, Serialize};

use super::hierarchy::{count_ados, Truncation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceInput {
    /// System dimension.
    pub n: u64,
    /// Total number of artificial modes.
    pub k: u64,
    /// Hierarchy level.
    pub l: u64,
    /// Tensor-train rank.
    pub r: u64,
    /// Local dimension per mode in the tensor train.
    pub big_n: u64,
    /// Fock dimension per chain site.
    pub d: u64,
    /// Chain sites.
    pub n_ch: u64,
    /// Tensor-train rank used for the chain.
    pub r_chain: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    /// n²(L+K)!/(L!K!): all indices with Σm_k ≤ L.
    pub standard_total_depth: u128,
    /// n²(L+1)^K: every m_k ≤ L independently.
    pub standard_per_mode: u128,
    /// r²N(K−1) + r(n² + N).
    pub mps: u128,
    /// N_ch·d·r².
    pub tedopa: u128,
}

pub fn estimate_resources(input: &ResourceInput) -> ResourceEstimate {
    let n2 = (input.n as u128).pow(2);
    let k = input.k as u128;
    let r = input.r as u128;
    let big_n = input.big_n as u128;
    let standard_total_depth = if input.k == 0 {
        n2
    } else {
        n2 * count_ados(input.k as usize, Truncation::total_depth(input.l as usize))
    };
    let standard_per_mode = (input.l as u128 + 1)
        .checked_pow(input.k as u32)
        .and_then(|p| p.checked_mul(n2))
        .unwrap_or(u128::MAX);
    let mps = r * r * big_n * k.saturating_sub(1) + r * (n2 + big_n);
    let rc = input.r_chain as u128;
    let tedopa = input.n_ch as u128 * input.d as u128 * rc * rc;
    ResourceEstimate {
        standard_total_depth,
        standard_per_mode,
        mps,
        tedopa,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(n: u64, k: u64, l: u64, r: u64, big_n: u64) -> ResourceInput {
        ResourceInput {
            n,
            k,
            l,
            r,
            big_n,
            d: 0,
            n_ch: 0,
            r_chain: 0,
        }
    }

    #[test]
    fn pure_dephasing_counts() {
        assert_eq!(estimate_resources(&input(2, 20, 3, 0, 0)).standard_total_depth, 7_084);
        assert_eq!(estimate_resources(&input(2, 6, 3, 30, 4)).mps, 18_240);
        assert_eq!(estimate_resources(&input(2, 6, 3, 0, 0)).standard_total_depth, 336);
        assert_eq!(estimate_resources(&input(2, 6, 3, 0, 0)).standard_per_mode, 4 * 4u128.pow(6));
        let chain = ResourceInput {
            n_ch: 60,
            d: 4,
            r_chain: 3,
            ..input(2, 0, 0, 0, 0)
        };
        assert_eq!(estimate_resources(&chain).tedopa, 2_160);
    }

    #[test]
    fn two_bath_counts() {
        let tm = estimate_resources(&input(2, 16, 8, 60, 9));
        assert_eq!(tm.standard_total_depth, 2_941_884);
        assert_eq!(tm.mps, 486_780);
        let fp = estimate_resources(&input(2, 28, 8, 60, 9));
        assert_eq!(fp.standard_total_depth, 121_041_360);
        assert_eq!(fp.mps, 875_580);
    }
}
