//! Index sets of auxiliary density operators.
//!
//! Occupation vectors m with Σm_k ≤ L (and optionally m_k ≤ cap) are laid
//! out in lexicographic order, m_0 most significant. A rank table turns any
//! vector into its position, which gives the m_k ± 1 neighbour maps in O(K)
//! per ADO.

use crate::error::{invalid, Error, Result};

/// Sentinel for a neighbour outside the index set.
pub const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    /// Bound L on the total occupation.
    pub depth: usize,
    /// Optional bound on every single occupation.
    pub per_mode_cap: Option<usize>,
}

impl Truncation {
    pub fn total_depth(depth: usize) -> Self {
        Self {
            depth,
            per_mode_cap: None,
        }
    }

    fn cap(&self) -> usize {
        self.per_mode_cap.unwrap_or(self.depth).min(self.depth)
    }
}

/// count[j][r]: vectors over modes j..K with sum ≤ r and entries ≤ cap.
fn suffix_counts(k: usize, depth: usize, cap: usize) -> Vec<Vec<u128>> {
    let mut count = vec![vec![0u128; depth + 1]; k + 1];
    for r in 0..=depth {
        count[k][r] = 1;
    }
    for j in (0..k).rev() {
        for r in 0..=depth {
            count[j][r] = (0..=r.min(cap)).map(|v| count[j + 1][r - v]).sum();
        }
    }
    count
}

/// Number of ADOs for K modes, without building anything.
pub fn count_ados(k: usize, truncation: Truncation) -> u128 {
    suffix_counts(k, truncation.depth, truncation.cap())[0][truncation.depth]
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    k: usize,
    truncation: Truncation,
    occupations: Vec<u8>,
    levels: Vec<u8>,
    up: Vec<u32>,
    down: Vec<u32>,
}

/// Enumerates the index set for `k` modes and fills the neighbour tables.
/// `n` is the system dimension; the state would hold len·n² complex
/// numbers, which must not exceed `budget`.
pub fn build_hierarchy(k: usize, truncation: Truncation, n: usize, budget: u128) -> Result<Hierarchy> {
    if k == 0 {
        return Err(invalid("hierarchy needs at least one mode"));
    }
    let depth = truncation.depth;
    if depth > u8::MAX as usize {
        return Err(invalid(format!("hierarchy depth {depth} exceeds 255")));
    }
    let cap = truncation.cap();
    let count = suffix_counts(k, depth, cap);
    let total = count[0][depth];
    let elements = total * (n * n) as u128;
    if elements > budget {
        return Err(Error::MemoryBudget { elements, budget });
    }
    if total >= NONE as u128 {
        return Err(Error::MemoryBudget {
            elements,
            budget: NONE as u128,
        });
    }
    let len = total as usize;

    // prefix[j][r][v] = Σ_{u<v} count[j+1][r−u], the rank offset for
    // m_j = v with budget r left.
    let prefix: Vec<Vec<Vec<u128>>> = (0..k)
        .map(|j| {
            (0..=depth + 1)
                .map(|r| {
                    let mut acc = vec![0u128; cap + 2];
                    for v in 0..=cap {
                        let c = if v <= r && r <= depth { count[j + 1][r - v] } else { 0 };
                        acc[v + 1] = acc[v] + c;
                    }
                    acc
                })
                .collect()
        })
        .collect();

    let mut occupations = Vec::with_capacity(len * k);
    let mut levels = Vec::with_capacity(len);
    let mut m = vec![0usize; k];
    let mut sum = 0usize;
    loop {
        occupations.extend(m.iter().map(|&v| v as u8));
        levels.push(sum as u8);
        // Lexicographic successor.
        let mut j = k;
        loop {
            if j == 0 {
                break;
            }
            j -= 1;
            if sum < depth && m[j] < cap {
                m[j] += 1;
                sum += 1;
                break;
            }
            sum -= m[j];
            m[j] = 0;
            if j == 0 {
                j = usize::MAX;
                break;
            }
        }
        if j == usize::MAX {
            break;
        }
        // Lexicographic order means the increment touches the last
        // position that can grow, after zeroing everything behind it.
        for t in j + 1..k {
            debug_assert_eq!(m[t], 0);
        }
    }
    debug_assert_eq!(occupations.len(), len * k);

    let mut up = vec![NONE; len * k];
    let mut down = vec![NONE; len * k];
    let term = |j: usize, r: isize, v: usize| -> u128 {
        if r < 0 {
            0
        } else {
            prefix[j][r as usize][v]
        }
    };
    let mut budget_left = vec![0isize; k];
    let mut base = vec![0u128; k + 1];
    let mut shift_minus = vec![0u128; k + 1];
    let mut shift_plus = vec![0u128; k + 1];
    for i in 0..len {
        let occ = &occupations[i * k..(i + 1) * k];
        let mut r = depth as isize;
        for j in 0..k {
            budget_left[j] = r;
            r -= occ[j] as isize;
        }
        // Suffix sums of rank terms with the remaining budget shifted by
        // 0, −1 (after an increment) and +1 (after a decrement).
        base[k] = 0;
        shift_minus[k] = 0;
        shift_plus[k] = 0;
        for j in (0..k).rev() {
            let v = occ[j] as usize;
            base[j] = base[j + 1] + term(j, budget_left[j], v);
            shift_minus[j] = shift_minus[j + 1] + term(j, budget_left[j] - 1, v);
            shift_plus[j] = shift_plus[j + 1] + term(j, (budget_left[j] + 1).min(depth as isize + 1), v);
        }
        let level = levels[i] as usize;
        for j in 0..k {
            let v = occ[j] as usize;
            let head = base[0] - base[j];
            if level < depth && v < cap {
                let rank = head + term(j, budget_left[j], v + 1) + shift_minus[j + 1];
                up[i * k + j] = rank as u32;
            }
            if v > 0 {
                let rank = head + term(j, budget_left[j], v - 1) + shift_plus[j + 1];
                down[i * k + j] = rank as u32;
            }
        }
    }
    Ok(Hierarchy {
        k,
        truncation,
        occupations,
        levels,
        up,
        down,
    })
}

impl Hierarchy {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.k
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn occupations(&self, i: usize) -> &[u8] {
        &self.occupations[i * self.k..(i + 1) * self.k]
    }

    pub fn level(&self, i: usize) -> usize {
        self.levels[i] as usize
    }

    /// Position of m + e_k, or [`NONE`].
    pub fn up(&self, i: usize, k: usize) -> u32 {
        self.up[i * self.k + k]
    }

    /// Position of m − e_k, or [`NONE`].
    pub fn down(&self, i: usize, k: usize) -> u32 {
        self.down[i * self.k + k]
    }

    pub(crate) fn up_row(&self, i: usize) -> &[u32] {
        &self.up[i * self.k..(i + 1) * self.k]
    }

    pub(crate) fn down_row(&self, i: usize) -> &[u32] {
        &self.down[i * self.k..(i + 1) * self.k]
    }

    /// Linear search by binary search on the lexicographic layout.
    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        if occ.len() != self.k {
            return None;
        }
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.occupations(mid).cmp(occ) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binom(n: u128, k: u128) -> u128 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    fn brute(k: usize, depth: usize, cap: usize) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut m = vec![0u8; k];
        fn rec(j: usize, left: usize, cap: usize, m: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if j == m.len() {
                out.push(m.clone());
                return;
            }
            for v in 0..=left.min(cap) {
                m[j] = v as u8;
                rec(j + 1, left - v, cap, m, out);
            }
            m[j] = 0;
        }
        rec(0, depth, cap, &mut m, &mut out);
        out
    }

    #[test]
    fn small_simplex() {
        let h = build_hierarchy(3, Truncation::total_depth(2), 2, u128::MAX).unwrap();
        assert_eq!(h.len(), 10);
        assert_eq!(h.len() * 4, 40);
        let l0 = build_hierarchy(5, Truncation::total_depth(0), 2, u128::MAX).unwrap();
        assert_eq!(l0.len(), 1);
        assert_eq!(l0.up(0, 0), NONE);
    }

    #[test]
    fn table_counts() {
        assert_eq!(count_ados(16, Truncation::total_depth(8)) * 4, 2_941_884);
        assert_eq!(count_ados(28, Truncation::total_depth(8)) * 4, 121_041_360);
        assert_eq!(count_ados(20, Truncation::total_depth(3)) * 4, 7_084);
        let capped = Truncation {
            depth: 6,
            per_mode_cap: Some(1),
        };
        assert_eq!(count_ados(8, capped), (0..=6).map(|j| binom(8, j)).sum());
    }

    #[test]
    fn budget_is_enforced() {
        match build_hierarchy(16, Truncation::total_depth(8), 2, 1_000_000) {
            Err(Error::MemoryBudget { elements, .. }) => assert_eq!(elements, 2_941_884),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn layout_and_neighbours_match_enumeration(k in 1usize..7, depth in 0usize..6, cap in 0usize..6) {
            let t = Truncation { depth, per_mode_cap: Some(cap) };
            let h = build_hierarchy(k, t, 1, u128::MAX).unwrap();
            let all = brute(k, depth, cap.min(depth));
            prop_assert_eq!(h.len(), all.len());
            prop_assert_eq!(count_ados(k, t), all.len() as u128);
            for (i, m) in all.iter().enumerate() {
                prop_assert_eq!(h.occupations(i), &m[..]);
                prop_assert_eq!(h.level(i), m.iter().map(|&v| v as usize).sum::<usize>());
                for j in 0..k {
                    let mut p = m.clone();
                    p[j] += 1;
                    let expect_up = all.iter().position(|x| *x == p).map_or(NONE, |x| x as u32);
                    prop_assert_eq!(h.up(i, j), expect_up);
                    if m[j] > 0 {
                        let mut q = m.clone();
                        q[j] -= 1;
                        prop_assert_eq!(h.down(i, j) as usize, h.index_of(&q).unwrap());
                    } else {
                        prop_assert_eq!(h.down(i, j), NONE);
                    }
                }
            }
        }
    }
}
