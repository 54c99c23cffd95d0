//! Property suites behind `madc verify`. Each suite counts the cases it
//! checked and stops at the first counterexample.

use std::collections::BTreeSet;
use std::fmt;

use madc::bounds::{self, converse_level_coeff, download_coeff, gap_bound};
use madc::engine::MulticastMessage;
use madc::model::build_instance;
use madc::report::{maxlink_instance, simulate};
use madc::{binom, Rational, Subset};
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checked: usize,
    pub counterexample: Option<String>,
    pub note: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<16} {} checked", self.name, self.checked)?;
        if let Some(note) = &self.note {
            write!(f, "; {note}")?;
        }
        if let Some(c) = &self.counterexample {
            write!(f, "; counterexample: {c}")?;
        }
        Ok(())
    }
}

fn q(n: u64, d: u64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn ratio_of(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Rational {
    Rational::new(num.into(), den.into())
}

fn b(n: usize, k: usize) -> BigInt {
    BigInt::from(binom(n as i64, k as i64))
}

fn bi(n: i64, k: i64) -> BigInt {
    BigInt::from(binom(n, k))
}

/// Runs `check` over `cases` in parallel; keeps the first failure in case
/// order.
fn run_cases<C, F>(name: &'static str, cases: Vec<C>, check: F) -> SuiteResult
where
    C: Send + Sync + fmt::Debug,
    F: Fn(&C) -> Result<(), String> + Send + Sync,
{
    let failure = cases
        .par_iter()
        .map(|c| check(c).err().map(|e| format!("{c:?}: {e}")))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .next();
    SuiteResult {
        name,
        checked: cases.len(),
        counterexample: failure,
        note: None,
    }
}

fn comm_triples(max_lambda: usize, min_lambda: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for lambda in min_lambda..=max_lambda {
        for alpha in 1..=lambda {
            for r in 1..=bounds::max_load(lambda, alpha) {
                out.push((lambda, alpha, r));
            }
        }
    }
    out
}

/// `(owner, batch)` pairs XORed into one entry.
pub type Entry = [(&'static str, &'static str); 2];

/// Entries of `X_U` in the worked example, segment always `U`.
pub const GOLDEN_MESSAGES: [(&str, [Entry; 2]); 6] = [
    ("12", [[("13", "2"), ("23", "1")], [("24", "1"), ("14", "2")]]),
    ("13", [[("12", "3"), ("23", "1")], [("14", "3"), ("34", "1")]]),
    ("14", [[("12", "4"), ("24", "1")], [("13", "4"), ("34", "1")]]),
    ("23", [[("12", "3"), ("13", "2")], [("24", "3"), ("34", "2")]]),
    ("24", [[("12", "4"), ("14", "2")], [("23", "4"), ("34", "2")]]),
    ("34", [[("13", "4"), ("14", "3")], [("23", "4"), ("24", "3")]]),
];

fn digits(s: &str) -> Subset {
    Subset::from_unsorted(s.chars().map(|c| c.to_digit(10).unwrap() as usize).collect())
}

/// Checks the message structure of a `Λ = 4, α = 2, r = 1` transcript.
pub fn check_golden_structure(messages: &[MulticastMessage], iv_bits: usize) -> Result<(), String> {
    if messages.len() != GOLDEN_MESSAGES.len() {
        return Err(format!("{} messages, expected 6", messages.len()));
    }
    for (msg, (sender, entries)) in messages.iter().zip(GOLDEN_MESSAGES) {
        let u = digits(sender);
        if msg.sender.members != u {
            return Err(format!("sender {} where {u} expected", msg.sender.members));
        }
        if msg.bits() != 4 * iv_bits {
            return Err(format!("X_{u} has {} bits, expected 4T = {}", msg.bits(), 4 * iv_bits));
        }
        if msg.entries.len() != entries.len() {
            return Err(format!("X_{u} has {} entries", msg.entries.len()));
        }
        for (entry, expected) in msg.entries.iter().zip(entries) {
            let got: BTreeSet<(Subset, Subset, Subset)> = entry
                .terms
                .iter()
                .map(|t| (t.owner.clone(), t.batch.clone(), t.segment.clone()))
                .collect();
            let want: BTreeSet<(Subset, Subset, Subset)> = expected
                .iter()
                .map(|(o, t)| (digits(o), digits(t), u.clone()))
                .collect();
            if got != want {
                return Err(format!(
                    "X_{u} entry {} has terms {got:?}, expected {want:?}",
                    entry.label
                ));
            }
        }
    }
    Ok(())
}

pub fn suite_golden() -> SuiteResult {
    let check = || -> Result<(), String> {
        let inst = build_instance(4, 2, 1, Some(8), Some(12), None, 0).map_err(|e| e.to_string())?;
        let t = inst.iv_bits;
        let (report, transcript) = simulate(inst, false).map_err(|e| e.to_string())?;
        check_golden_structure(&transcript.shuffle_messages, t)?;
        if report.comm_load != q(1, 4) {
            return Err(format!("L = {}, expected 1/4", report.comm_load));
        }
        Ok(())
    };
    SuiteResult {
        name: "golden",
        checked: 1,
        counterexample: check().err(),
        note: None,
    }
}

/// Measured shuffle load equals the corner formula, and every reducer decodes
/// bit-exactly.
pub fn suite_load_identity(max_lambda: usize) -> SuiteResult {
    run_cases("load-identity", comm_triples(max_lambda, 2), |&(lambda, alpha, r)| {
        let inst = build_instance(lambda, alpha, r, None, None, None, 0).map_err(|e| e.to_string())?;
        let (report, _) = simulate(inst, false).map_err(|e| e.to_string())?;
        let expected = ratio_of(
            bi(lambda as i64 - alpha as i64, r as i64),
            b(lambda, r) * (b(r + alpha, r) - 1),
        );
        if report.comm_load != expected {
            return Err(format!("measured {} vs formula {expected}", report.comm_load));
        }
        Ok(())
    })
}

/// Single-access topology reduces to the classic `(1 - r/Λ)/r`.
pub fn suite_cdc(max_lambda: usize) -> SuiteResult {
    let cases: Vec<(usize, usize)> = (1..=max_lambda).flat_map(|l| (1..=l).map(move |r| (l, r))).collect();
    run_cases("cdc-reduction", cases, |&(lambda, r)| {
        let ub: Rational = bounds::l_ub(lambda, 1, r).map_err(|e| e.to_string())?;
        let cdc = (Rational::one() - q(r as u64, lambda as u64)) / q(r as u64, 1);
        if ub != cdc {
            return Err(format!("l_ub = {ub}, expected {cdc}"));
        }
        Ok(())
    })
}

/// Converse below achievable, ratio at most 3/2 for `α >= 2`; reports the
/// largest ratio seen.
pub fn suite_gap(max_lambda: usize) -> SuiteResult {
    let cases = comm_triples(max_lambda, 1);
    let mut result = run_cases("comm-gap", cases.clone(), |&(lambda, alpha, r)| {
        let ub: Rational = bounds::l_ub(lambda, alpha, r).map_err(|e| e.to_string())?;
        let lb: Rational = bounds::l_lb(lambda, alpha, r).map_err(|e| e.to_string())?;
        if lb > ub {
            return Err(format!("l_lb = {lb} > l_ub = {ub}"));
        }
        if alpha >= 2 && !lb.is_zero() {
            let ratio = &ub / &lb;
            if ratio > q(3, 2) {
                return Err(format!("ratio {ratio} > 3/2"));
            }
            if ratio > gap_bound::<Rational>(alpha, r) {
                return Err(format!("ratio {ratio} above its per-point bound"));
            }
        }
        Ok(())
    });
    let mut best: Option<(Rational, (usize, usize, usize))> = None;
    for &(lambda, alpha, r) in cases.iter().filter(|c| c.1 >= 2) {
        if let Ok(g) = bounds::gap_comm::<Rational>(lambda, alpha, r) {
            if best.as_ref().is_none_or(|(m, _)| g > *m) {
                best = Some((g, (lambda, alpha, r)));
            }
        }
    }
    match best {
        Some((g, at)) => {
            result.note = Some(format!("max ratio {} at {at:?}", crate::fmt_rational(&g)));
            if g != q(3, 2) && result.counterexample.is_none() {
                result.counterexample = Some(format!("max ratio {g} never reaches 3/2"));
            }
        }
        None => result.note = Some("no alpha >= 2 points".into()),
    }
    result
}

/// `l_ub` strictly decreasing in `α` wherever both loads are defined.
pub fn suite_monotone(max_lambda: usize) -> SuiteResult {
    let mut cases = Vec::new();
    for lambda in 2..=max_lambda {
        for alpha in 1..lambda {
            for r in 1..=bounds::max_load(lambda, alpha + 1) {
                cases.push((lambda, alpha, r));
            }
        }
    }
    run_cases("monotone-alpha", cases, |&(lambda, alpha, r)| {
        let a: Rational = bounds::l_ub(lambda, alpha, r).map_err(|e| e.to_string())?;
        let b: Rational = bounds::l_ub(lambda, alpha + 1, r).map_err(|e| e.to_string())?;
        if b >= a {
            return Err(format!("l_ub(α+1) = {b} >= l_ub(α) = {a}"));
        }
        Ok(())
    })
}

/// Simulates the LP-optimal profile with delivery: max(L, J) must hit the
/// max-link upper bound, links must be equal, and UB/LB <= 4.
pub fn suite_maxlink(max_lambda: usize) -> SuiteResult {
    let mut cases = Vec::new();
    for lambda in 1..=max_lambda {
        for alpha in 1..=lambda {
            for r in 1..=lambda {
                cases.push((lambda, alpha, r));
            }
        }
    }
    run_cases("maxlink", cases, |&(lambda, alpha, r)| {
        let rr = Rational::from_integer(r.into());
        let ub: Rational = bounds::maxlink_ub(lambda, alpha, &rr).map_err(|e| e.to_string())?;
        let lb: Rational = bounds::maxlink_lb(lambda, alpha, &rr).map_err(|e| e.to_string())?;
        if lb > ub || &ub / &lb > q(4, 1) {
            return Err(format!("UB {ub} vs LB {lb}"));
        }
        let inst = maxlink_instance(lambda, alpha, r, None, None, 0).map_err(|e| e.to_string())?;
        let (report, _) = simulate(inst, true).map_err(|e| e.to_string())?;
        if report.equalized != Some(true) {
            return Err("per-link loads differ".into());
        }
        match &report.maxlink {
            Some(m) if *m == ub => Ok(()),
            m => Err(format!("measured max(L, J) {m:?} vs bound {ub}")),
        }
    })
}

/// The per-intersection download sum equals both closed forms.
pub fn suite_download_identity(max_lambda: usize) -> SuiteResult {
    let mut cases = Vec::new();
    for lambda in 1..=max_lambda {
        for alpha in 1..=lambda {
            for j in 1..=lambda {
                cases.push((lambda, alpha, j));
            }
        }
    }
    run_cases("download-sum", cases, |&(lambda, alpha, j)| {
        let (l, a, jj) = (lambda as i64, alpha as i64, j as i64);
        let mut sum = Rational::zero();
        for i in 1..=a {
            sum += ratio_of(bi(l - a, jj - i) * bi(a - 1, i - 1), BigInt::from(i) * bi(l, jj));
        }
        let by_level = ratio_of(bi(l, jj) - bi(l - a, jj), BigInt::from(a) * bi(l, jj));
        let by_reducer: Rational = download_coeff(lambda, alpha, j);
        if sum != by_level || sum != by_reducer {
            return Err(format!("sum {sum}, level form {by_level}, reducer form {by_reducer}"));
        }
        Ok(())
    })
}

/// Exact minimum of `½ Σ d_j k_j / steps` over integer `k` with `Σ k_j =
/// steps` and `Σ j k_j <= steps·r`, where `r = r_halves / 2`.
pub fn grid_lp_min(lambda: usize, alpha: usize, r_halves: usize, steps: usize) -> Rational {
    let d: Vec<Rational> = (1..=lambda).map(|j| converse_level_coeff(lambda, alpha, j)).collect();
    let scale = d
        .iter()
        .fold(BigInt::one(), |acc, x| num_integer::Integer::lcm(&acc, x.denom()));
    let w: Vec<i128> = d
        .iter()
        .map(|x| {
            (x.numer() * (&scale / x.denom()))
                .to_i128()
                .expect("grid weight fits i128")
        })
        .collect();
    let cap = steps * r_halves / 2;
    let width = steps * lambda + 1;
    let mut dp = vec![None::<i128>; (steps + 1) * width];
    dp[0] = Some(0);
    for c in 0..steps {
        for load in 0..width {
            let Some(cur) = dp[c * width + load] else { continue };
            for (idx, wj) in w.iter().enumerate() {
                let nl = load + idx + 1;
                if nl > cap {
                    break;
                }
                let slot = &mut dp[(c + 1) * width + nl];
                if slot.is_none_or(|s| cur + wj < s) {
                    *slot = Some(cur + wj);
                }
            }
        }
    }
    let best = (0..=cap.min(width - 1))
        .filter_map(|load| dp[steps * width + load])
        .min()
        .expect("all-level-1 point is on the grid");
    Rational::new(BigInt::from(best), scale * BigInt::from(2 * steps))
}

/// Vertex optimum never above the 1/64 grid optimum; equal when the optimum
/// lies on the grid.
pub fn suite_lp(max_lambda: usize) -> SuiteResult {
    const STEPS: usize = 64;
    let mut cases = Vec::new();
    for lambda in 1..=max_lambda {
        for alpha in 1..=lambda {
            for r_halves in 2..=2 * lambda {
                cases.push((lambda, alpha, r_halves));
            }
        }
    }
    run_cases("lp-grid", cases, |&(lambda, alpha, r_halves)| {
        let r = Rational::new(r_halves.into(), 2.into());
        let sol = bounds::lp_solve::<Rational>(lambda, alpha, &r).map_err(|e| e.to_string())?;
        let grid = grid_lp_min(lambda, alpha, r_halves, STEPS);
        if sol.objective > grid {
            return Err(format!("vertex {} above grid {grid}", sol.objective));
        }
        let steps = Rational::from_integer(STEPS.into());
        let on_grid = sol.x.iter().all(|x| (x * &steps).is_integer());
        if on_grid && sol.objective != grid {
            return Err(format!("on-grid vertex {} differs from grid {grid}", sol.objective));
        }
        Ok(())
    })
}

pub fn run_all(max_lambda: usize) -> Vec<SuiteResult> {
    vec![
        suite_golden(),
        suite_load_identity(max_lambda),
        suite_cdc(max_lambda),
        suite_gap(max_lambda),
        suite_monotone(max_lambda),
        suite_maxlink(max_lambda),
        suite_download_identity(max_lambda),
        suite_lp(max_lambda),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        for s in run_all(4) {
            assert!(s.passed(), "{s}");
            assert!(s.checked > 0);
        }
    }

    #[test]
    fn gap_note_reports_three_halves() {
        let s = suite_gap(5);
        assert!(s.note.unwrap().starts_with("max ratio 3/2"));
    }

    #[test]
    fn grid_min_on_known_point() {
        // Λ = 4, α = 2, r = 1: only level 1 is feasible.
        assert_eq!(grid_lp_min(4, 2, 2, 64), q(5, 24));
    }

    #[test]
    fn golden_checker_rejects_reordered_messages() {
        let inst = build_instance(4, 2, 1, Some(8), Some(12), None, 0).unwrap();
        let t = inst.iv_bits;
        let (_, transcript) = simulate(inst, false).unwrap();
        let mut msgs = transcript.shuffle_messages.clone();
        assert!(check_golden_structure(&msgs, t).is_ok());
        msgs.swap(0, 1);
        assert!(check_golden_structure(&msgs, t).is_err());
    }
}
