//! Binomial coefficients and lexicographic k-subset enumeration, ranking and
//! unranking over the ground set `[1..n]`.
//!
//! Every set label used by the rest of the crate (reducers, batch labels,
//! segment labels) is a [`Subset`]; the canonical order of a family of equal
//! size subsets is the lexicographic order of their sorted member lists, which
//! is exactly the derived `Ord` on [`Subset`].

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombinError {
    #[error("binomial C({n}, {k}) does not fit in 64 bits")]
    Overflow { n: i64, k: i64 },
    #[error("subset size {k} is not in [1..{n}]")]
    InvalidSize { n: usize, k: usize },
    #[error("rank {rank} out of range for {k}-subsets of [1..{n}]")]
    RankOutOfRange { rank: u64, n: usize, k: usize },
    #[error("invalid subset {members:?} of [1..{n}]: members must be strictly increasing and in range")]
    InvalidMembers { members: Vec<usize>, n: usize },
}

/// Exact binomial coefficient, with `C(n, k) = 0` whenever `n < 0`, `k < 0`
/// or `n < k`.
pub fn binom(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 || n < k {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // acc * (n - i) is always divisible by (i + 1) at this point.
        acc = acc * BigUint::from((n - i) as u64) / BigUint::from((i + 1) as u64);
    }
    acc
}

/// Machine-word binomial; overflow is reported rather than wrapped.
pub fn binom_u64(n: i64, k: i64) -> Result<u64, CombinError> {
    binom(n, k).to_u64().ok_or(CombinError::Overflow { n, k })
}

pub(crate) fn binom_usize(n: usize, k: usize) -> usize {
    binom(n as i64, k as i64)
        .to_usize()
        .expect("binomial exceeds usize; parameters are far outside the simulated range")
}

/// A strictly increasing list of 1-based node indices.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subset(Vec<usize>);

impl Subset {
    /// Builds a subset from arbitrary members, sorting and deduplicating.
    pub fn from_unsorted(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Subset(members)
    }

    /// Builds a subset from members already in strictly increasing order,
    /// checking that each lies in `[1..n]`.
    pub fn new(members: Vec<usize>, n: usize) -> Result<Self, CombinError> {
        let increasing = members.windows(2).all(|w| w[0] < w[1]);
        let in_range = members.iter().all(|&m| m >= 1 && m <= n);
        if !increasing || !in_range {
            return Err(CombinError::InvalidMembers { members, n });
        }
        Ok(Subset(members))
    }

    /// The full ground set `[1..n]`.
    pub fn full(n: usize) -> Self {
        Subset((1..=n).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn union(&self, other: &Subset) -> Subset {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Subset(out)
    }

    pub fn difference(&self, other: &Subset) -> Subset {
        Subset(self.0.iter().copied().filter(|&x| !other.contains(x)).collect())
    }

    pub fn intersection(&self, other: &Subset) -> Subset {
        Subset(self.0.iter().copied().filter(|&x| other.contains(x)).collect())
    }

    pub fn is_disjoint(&self, other: &Subset) -> bool {
        self.0.iter().all(|&x| !other.contains(x))
    }

    /// Position of `x` in the sorted member list.
    pub fn position(&self, x: usize) -> Option<usize> {
        self.0.binary_search(&x).ok()
    }

    /// All `k`-subsets of this set in lexicographic order.
    pub fn k_subsets(&self, k: usize) -> Vec<Subset> {
        if k > self.len() {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(binom_usize(self.len(), k));
        for_each_combination(self.len(), k, |idx| {
            out.push(Subset(idx.iter().map(|&i| self.0[i]).collect()));
        });
        out
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A subset together with its lexicographic rank among subsets of the same
/// size of `[1..n]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubsetId {
    pub members: Subset,
    pub rank: u64,
}

/// Visits every `k`-combination of `0..n` (as sorted index lists) in
/// lexicographic order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // Rightmost position that can still advance.
        let Some(pos) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[pos] += 1;
        for i in pos + 1..k {
            idx[i] = idx[i - 1] + 1;
        }
    }
}

/// All `C(n, k)` subsets of `[1..n]` of size `k`, in lexicographic order, with
/// `rank` equal to list position.
pub fn k_subsets(n: usize, k: usize) -> Result<Vec<SubsetId>, CombinError> {
    if k == 0 || k > n {
        return Err(CombinError::InvalidSize { n, k });
    }
    Ok(Subset::full(n)
        .k_subsets(k)
        .into_iter()
        .enumerate()
        .map(|(rank, members)| SubsetId {
            members,
            rank: rank as u64,
        })
        .collect())
}

/// Lexicographic rank of `members` among the subsets of `[1..n]` of the same
/// size.
pub fn subset_rank(members: &Subset, n: usize) -> Result<u64, CombinError> {
    let m = members.members();
    if m.windows(2).any(|w| w[0] >= w[1]) || m.iter().any(|&x| x == 0 || x > n) {
        return Err(CombinError::InvalidMembers { members: m.to_vec(), n });
    }
    let k = m.len();
    let mut rank = 0u64;
    let mut prev = 0usize;
    for (i, &c) in m.iter().enumerate() {
        // Subsets sharing the first i members but with a smaller (i+1)-th one.
        for v in prev + 1..c {
            rank += binom_u64((n - v) as i64, (k - i - 1) as i64)?;
        }
        prev = c;
    }
    Ok(rank)
}

/// Inverse of [`subset_rank`].
pub fn subset_unrank(rank: u64, n: usize, k: usize) -> Result<SubsetId, CombinError> {
    if k == 0 || k > n {
        return Err(CombinError::InvalidSize { n, k });
    }
    let total = binom_u64(n as i64, k as i64)?;
    if rank >= total {
        return Err(CombinError::RankOutOfRange { rank, n, k });
    }
    let mut rest = rank;
    let mut members = Vec::with_capacity(k);
    let mut v = 1usize;
    for i in 0..k {
        loop {
            let block = binom_u64((n - v) as i64, (k - i - 1) as i64)?;
            if rest < block {
                break;
            }
            rest -= block;
            v += 1;
        }
        members.push(v);
        v += 1;
    }
    Ok(SubsetId {
        members: Subset(members),
        rank,
    })
}

/// Rank of `sub` among the `|sub|`-subsets of `ground`, where `sub ⊆ ground`,
/// in the lexicographic order of member lists.
pub fn relative_rank(sub: &Subset, ground: &Subset) -> Option<u64> {
    let positions = sub
        .members()
        .iter()
        .map(|&x| ground.position(x).map(|p| p + 1))
        .collect::<Option<Vec<_>>>()?;
    subset_rank(&Subset(positions), ground.len()).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn factorial(n: u64) -> BigUint {
        (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
    }

    fn ids(v: &[SubsetId]) -> Vec<Vec<usize>> {
        v.iter().map(|s| s.members.members().to_vec()).collect()
    }

    #[test]
    fn binom_examples() {
        assert_eq!(binom(4, 2), BigUint::from(6u32));
        assert_eq!(binom(3, 5), BigUint::zero());
        assert_eq!(binom(-1, 0), BigUint::zero());
        assert_eq!(binom(5, -1), BigUint::zero());
        assert_eq!(binom(0, 0), BigUint::one());
        // Factorial definition oracle.
        let oracle = factorial(10) / (factorial(3) * factorial(7));
        assert_eq!(oracle, BigUint::from(120u32));
        assert_eq!(binom(10, 3), oracle);
    }

    #[test]
    fn binom_matches_factorial_oracle() {
        for n in 0..=40u64 {
            for k in 0..=n {
                let oracle = factorial(n) / (factorial(k) * factorial(n - k));
                assert_eq!(binom(n as i64, k as i64), oracle, "C({n},{k})");
            }
        }
    }

    #[test]
    fn binom_u64_reports_overflow() {
        assert_eq!(binom_u64(66, 33), Ok(7219428434016265740));
        assert_eq!(binom_u64(68, 34), Err(CombinError::Overflow { n: 68, k: 34 }));
        // Arbitrary precision keeps going.
        assert!(binom(100, 50) > BigUint::from(u64::MAX));
    }

    #[test]
    fn pascal_identity() {
        for n in 1..=30i64 {
            for k in 1..=n {
                assert_eq!(binom(n, k), binom(n - 1, k - 1) + binom(n - 1, k));
            }
        }
    }

    #[test]
    fn vandermonde_partition() {
        for lambda in 0..=20i64 {
            for alpha in 0..=lambda {
                for j in 0..=lambda {
                    let lhs: BigUint = (0..=alpha)
                        .map(|i| binom(lambda - alpha, j - i) * binom(alpha, i))
                        .sum();
                    assert_eq!(lhs, binom(lambda, j), "Λ={lambda} α={alpha} j={j}");
                }
            }
        }
    }

    #[test]
    fn k_subsets_examples() {
        let s = k_subsets(4, 2).unwrap();
        assert_eq!(
            ids(&s),
            vec![vec![1, 2], vec![1, 3], vec![1, 4], vec![2, 3], vec![2, 4], vec![3, 4]]
        );
        assert!(s.iter().enumerate().all(|(i, id)| id.rank == i as u64));

        assert_eq!(ids(&k_subsets(3, 3).unwrap()), vec![vec![1, 2, 3]]);

        let five = k_subsets(5, 2).unwrap();
        assert_eq!(five.len(), 10);
        assert_eq!(five[0].members.members(), &[1, 2]);
        assert_eq!(five[9].members.members(), &[4, 5]);
    }

    #[test]
    fn k_subsets_matches_bitmask_oracle() {
        for n in 1..=9usize {
            for k in 1..=n {
                let mut oracle: Vec<Vec<usize>> = (0u32..1 << n)
                    .filter(|m| m.count_ones() as usize == k)
                    .map(|m| (1..=n).filter(|&i| m & (1 << (i - 1)) != 0).collect())
                    .collect();
                oracle.sort();
                assert_eq!(ids(&k_subsets(n, k).unwrap()), oracle);
            }
        }
    }

    #[test]
    fn k_subsets_rejects_bad_sizes() {
        assert_eq!(k_subsets(3, 0), Err(CombinError::InvalidSize { n: 3, k: 0 }));
        assert_eq!(k_subsets(3, 4), Err(CombinError::InvalidSize { n: 3, k: 4 }));
    }

    #[test]
    fn rank_unrank_examples() {
        assert_eq!(subset_rank(&Subset(vec![1, 2]), 4), Ok(0));
        assert_eq!(subset_unrank(5, 4, 2).unwrap().members.members(), &[3, 4]);
        assert_eq!(
            subset_unrank(6, 4, 2),
            Err(CombinError::RankOutOfRange { rank: 6, n: 4, k: 2 })
        );
        assert!(subset_rank(&Subset(vec![2, 1]), 4).is_err());
        assert!(subset_rank(&Subset(vec![1, 5]), 4).is_err());
    }

    #[test]
    fn rank_unrank_exhaustive() {
        for n in 1..=10usize {
            for k in 1..=n {
                for id in k_subsets(n, k).unwrap() {
                    assert_eq!(subset_rank(&id.members, n).unwrap(), id.rank);
                    assert_eq!(subset_unrank(id.rank, n, k).unwrap(), id);
                }
            }
        }
    }

    #[test]
    fn relative_rank_in_complement() {
        let ground = Subset(vec![2, 4, 5, 7]);
        let subs = ground.k_subsets(2);
        for (i, s) in subs.iter().enumerate() {
            assert_eq!(relative_rank(s, &ground), Some(i as u64));
        }
        assert_eq!(relative_rank(&Subset(vec![1]), &ground), None);
    }

    #[test]
    fn set_operations() {
        let a = Subset::from_unsorted(vec![3, 1, 2]);
        let b = Subset(vec![2, 5]);
        assert_eq!(a.union(&b).members(), &[1, 2, 3, 5]);
        assert_eq!(a.difference(&b).members(), &[1, 3]);
        assert_eq!(a.intersection(&b).members(), &[2]);
        assert!(!a.is_disjoint(&b));
        assert!(Subset::new(vec![2, 2], 3).is_err());
        assert_eq!(format!("{a}"), "{1,2,3}");
    }

    proptest! {
        #[test]
        fn unrank_then_rank_roundtrips(n in 1usize..=20, k_seed in 0usize..20, r_seed in any::<u64>()) {
            let k = 1 + k_seed % n;
            let total = binom_u64(n as i64, k as i64).unwrap();
            let rank = r_seed % total;
            let id = subset_unrank(rank, n, k).unwrap();
            prop_assert_eq!(id.members.len(), k);
            prop_assert_eq!(subset_rank(&id.members, n).unwrap(), rank);
        }
    }
}
