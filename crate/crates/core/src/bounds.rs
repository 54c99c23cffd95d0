//! Closed-form load expressions: the achievable and converse communication
//! loads, the single-access baseline, coding gains, the max-link linear
//! program and both max-link bounds.
//!
//! Everything is generic over [`Scalar`]; instantiate with
//! [`Rational`](crate::Rational) for exact values.

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combin::binom;
use crate::scalar::{max_of, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("invalid topology: need 1 <= alpha <= lambda (lambda = {lambda}, alpha = {alpha})")]
    InvalidTopology { lambda: usize, alpha: usize },
    #[error("computation load r = {r} outside the valid range [{min}..{max}]")]
    OutOfRange { r: String, min: usize, max: usize },
    #[error("linear program infeasible: computation load r = {r} is below 1")]
    Infeasible { r: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    Achievable,
    Converse,
    CdcBaseline,
    MaxlinkUb,
    MaxlinkLb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint<S> {
    pub r: S,
    pub value: S,
    pub kind: LoadKind,
}

/// A basic feasible solution of the max-link LP; `x[j - 1]` is the fraction
/// of files mapped by exactly `j` mappers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution<S> {
    pub x: Vec<S>,
    pub objective: S,
    pub active_levels: Vec<usize>,
}

fn check_topology(lambda: usize, alpha: usize) -> Result<(), BoundsError> {
    if lambda == 0 || alpha == 0 || alpha > lambda {
        return Err(BoundsError::InvalidTopology { lambda, alpha });
    }
    Ok(())
}

/// Largest meaningful integer computation load, `Λ - α + 1`.
pub fn max_load(lambda: usize, alpha: usize) -> usize {
    lambda - alpha + 1
}

fn check_integer_load(lambda: usize, alpha: usize, r: usize) -> Result<(), BoundsError> {
    check_topology(lambda, alpha)?;
    let max = max_load(lambda, alpha);
    if r < 1 || r > max {
        return Err(BoundsError::OutOfRange {
            r: r.to_string(),
            min: 1,
            max,
        });
    }
    Ok(())
}

fn b(n: usize, k: usize) -> BigUint {
    binom(n as i64, k as i64)
}

fn bi(n: i64, k: i64) -> BigUint {
    binom(n, k)
}

fn ratio<S: Scalar>(num: &BigUint, den: &BigUint) -> S {
    S::from_biguint(num) / S::from_biguint(den)
}

/// `C(r + α, r) - 1`, the number of reducers served by each coded
/// transmission.
pub fn coding_gain(alpha: usize, r: usize) -> BigUint {
    b(r + alpha, r) - BigUint::one()
}

/// Per-level shuffle coefficient `C(Λ-α, j) / (C(Λ, j) (C(j+α, j) - 1))`.
/// Zero for `j > Λ - α`.
pub fn shuffle_coeff<S: Scalar>(lambda: usize, alpha: usize, j: usize) -> S {
    let num = bi(lambda as i64 - alpha as i64, j as i64);
    if num == BigUint::default() {
        return S::zero();
    }
    ratio(&num, &(b(lambda, j) * coding_gain(alpha, j)))
}

/// Per-level converse coefficient `C(Λ, α+j) / (C(Λ, α) C(Λ, j))`.
pub fn converse_coeff<S: Scalar>(lambda: usize, alpha: usize, j: usize) -> S {
    ratio(&b(lambda, alpha + j), &(b(lambda, alpha) * b(lambda, j)))
}

/// Per-level download coefficient `(C(Λ, α) - C(Λ-j, α)) / (α C(Λ, α))`.
pub fn download_coeff<S: Scalar>(lambda: usize, alpha: usize, j: usize) -> S {
    let k = b(lambda, alpha);
    let num = &k - bi(lambda as i64 - j as i64, alpha as i64);
    ratio(&num, &(BigUint::from(alpha) * k))
}

/// `c_j`: shuffle plus download coefficient of level `j`.
pub fn achievable_level_coeff<S: Scalar>(lambda: usize, alpha: usize, j: usize) -> S {
    shuffle_coeff::<S>(lambda, alpha, j) + download_coeff::<S>(lambda, alpha, j)
}

/// `d_j`: converse plus download coefficient of level `j`; the LP objective
/// is `½ Σ d_j x_j`.
pub fn converse_level_coeff<S: Scalar>(lambda: usize, alpha: usize, j: usize) -> S {
    converse_coeff::<S>(lambda, alpha, j) + download_coeff::<S>(lambda, alpha, j)
}

/// Achievable communication load at an integer corner point.
pub fn l_ub<S: Scalar>(lambda: usize, alpha: usize, r: usize) -> Result<S, BoundsError> {
    check_integer_load(lambda, alpha, r)?;
    Ok(shuffle_coeff(lambda, alpha, r))
}

/// Converse communication load at an integer corner point.
pub fn l_lb<S: Scalar>(lambda: usize, alpha: usize, r: usize) -> Result<S, BoundsError> {
    check_integer_load(lambda, alpha, r)?;
    Ok(converse_coeff(lambda, alpha, r))
}

/// Uncoded-topology baseline `(1 - r/Λ) / r`.
pub fn cdc_load<S: Scalar>(lambda: usize, r: usize) -> Result<S, BoundsError> {
    if lambda == 0 || r < 1 || r > lambda {
        return Err(BoundsError::OutOfRange {
            r: r.to_string(),
            min: 1,
            max: lambda,
        });
    }
    let l = S::from_count(lambda);
    let rr = S::from_count(r);
    Ok((S::one() - rr.clone() / l) / rr)
}

fn fractional_range<S: Scalar>(lambda: usize, alpha: usize, r: &S) -> Result<usize, BoundsError> {
    check_topology(lambda, alpha)?;
    let max = max_load(lambda, alpha);
    if *r < S::one() || *r > S::from_count(max) {
        return Err(BoundsError::OutOfRange {
            r: format!("{r:?}"),
            min: 1,
            max,
        });
    }
    Ok(max)
}

/// Evaluates the piecewise-linear curve through `points` (sorted by x) at `x`.
fn interpolate<S: Scalar>(points: &[(S, S)], x: &S) -> S {
    for w in points.windows(2) {
        let (x0, y0) = &w[0];
        let (x1, y1) = &w[1];
        if x >= x0 && x <= x1 {
            let t = (x.clone() - x0.clone()) / (x1.clone() - x0.clone());
            return y0.clone() + t * (y1.clone() - y0.clone());
        }
    }
    points.last().map(|p| p.1.clone()).unwrap_or_else(S::zero)
}

/// Lower convex hull of points sorted by strictly increasing x.
fn lower_hull<S: Scalar>(points: Vec<(S, S)>) -> Vec<(S, S)> {
    let mut hull: Vec<(S, S)> = Vec::with_capacity(points.len());
    for p in points {
        while hull.len() >= 2 {
            let o = &hull[hull.len() - 2];
            let a = &hull[hull.len() - 1];
            let cross = (a.0.clone() - o.0.clone()) * (p.1.clone() - o.1.clone())
                - (a.1.clone() - o.1.clone()) * (p.0.clone() - o.0.clone());
            if cross <= S::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Achievable load at a fractional computation load: the lower convex
/// envelope of the integer corner points (memory sharing).
pub fn l_ub_fractional<S: Scalar>(lambda: usize, alpha: usize, r: &S) -> Result<S, BoundsError> {
    let max = fractional_range(lambda, alpha, r)?;
    let corners = (1..=max)
        .map(|k| (S::from_count(k), shuffle_coeff::<S>(lambda, alpha, k)))
        .collect();
    Ok(interpolate(&lower_hull(corners), r))
}

/// Converse load at a fractional computation load, by linear interpolation
/// of adjacent integer corner points.
pub fn l_lb_fractional<S: Scalar>(lambda: usize, alpha: usize, r: &S) -> Result<S, BoundsError> {
    let max = fractional_range(lambda, alpha, r)?;
    let corners: Vec<_> = (1..=max)
        .map(|k| (S::from_count(k), converse_coeff::<S>(lambda, alpha, k)))
        .collect();
    Ok(interpolate(&corners, r))
}

/// Ratio `l_ub / l_lb`; defined as 1 at the zero-load corner
/// `r = Λ - α + 1` where both vanish.
pub fn gap_comm<S: Scalar>(lambda: usize, alpha: usize, r: usize) -> Result<S, BoundsError> {
    let ub: S = l_ub(lambda, alpha, r)?;
    let lb: S = l_lb(lambda, alpha, r)?;
    if lb == S::zero() {
        return Ok(S::one());
    }
    Ok(ub / lb)
}

/// `C(r+α, r) / (C(r+α, r) - 1)`, the per-corner gap bound.
pub fn gap_bound<S: Scalar>(alpha: usize, r: usize) -> S {
    let g = b(r + alpha, r);
    ratio(&g, &(&g - BigUint::one()))
}

fn lp_candidate<S: Scalar>(lambda: usize, levels: &[(usize, S)], d: &[S]) -> LpSolution<S> {
    let mut x = vec![S::zero(); lambda];
    let mut objective = S::zero();
    for (j, xj) in levels {
        x[j - 1] = xj.clone();
        objective = objective + d[j - 1].clone() * xj.clone();
    }
    LpSolution {
        x,
        objective: objective * S::half(),
        active_levels: levels.iter().map(|(j, _)| *j).collect(),
    }
}

/// Solves the max-link LP
///
/// ```text
/// min ½ Σ_j d_j x_j   s.t.  x_j >= 0,  Σ_j x_j = 1,  Σ_j j x_j <= r
/// ```
///
/// by enumerating its basic feasible solutions: a single level `j <= r`, or a
/// pair `j1 < r < j2` with both constraints tight. Ties go to the
/// lexicographically smallest set of active levels.
pub fn lp_solve<S: Scalar>(lambda: usize, alpha: usize, r: &S) -> Result<LpSolution<S>, BoundsError> {
    check_topology(lambda, alpha)?;
    if *r < S::one() {
        return Err(BoundsError::Infeasible { r: format!("{r:?}") });
    }
    let d: Vec<S> = (1..=lambda).map(|j| converse_level_coeff(lambda, alpha, j)).collect();

    let mut best: Option<LpSolution<S>> = None;
    let mut consider = |cand: LpSolution<S>| {
        if best.as_ref().is_none_or(|b| cand.objective < b.objective) {
            best = Some(cand);
        }
    };
    // Lexicographic order of active level lists: [j1], [j1, j1+1], ..., [j1, Λ], [j1+1], ...
    for j1 in 1..=lambda {
        let s1 = S::from_count(j1);
        if s1 <= *r {
            consider(lp_candidate(lambda, &[(j1, S::one())], &d));
        }
        if s1 >= *r {
            continue;
        }
        for j2 in j1 + 1..=lambda {
            let s2 = S::from_count(j2);
            if s2 <= *r {
                continue;
            }
            let span = s2.clone() - s1.clone();
            let x1 = (s2 - r.clone()) / span.clone();
            let x2 = (r.clone() - s1.clone()) / span;
            consider(lp_candidate(lambda, &[(j1, x1), (j2, x2)], &d));
        }
    }
    Ok(best.expect("level 1 is always feasible for r >= 1"))
}

/// Shuffle and download loads `(L, J)` achieved by the profile `x`.
pub fn maxlink_terms<S: Scalar>(lambda: usize, alpha: usize, x: &[S]) -> (S, S) {
    let mut l = S::zero();
    let mut j_cost = S::zero();
    for (idx, xj) in x.iter().enumerate() {
        let j = idx + 1;
        l = l + shuffle_coeff::<S>(lambda, alpha, j) * xj.clone();
        j_cost = j_cost + download_coeff::<S>(lambda, alpha, j) * xj.clone();
    }
    (l, j_cost)
}

/// Achievable max-link load at the LP optimum.
pub fn maxlink_ub<S: Scalar>(lambda: usize, alpha: usize, r: &S) -> Result<S, BoundsError> {
    let sol = lp_solve(lambda, alpha, r)?;
    let (l, j) = maxlink_terms(lambda, alpha, &sol.x);
    Ok(max_of(l, j))
}

/// Converse max-link load: the LP optimum value.
pub fn maxlink_lb<S: Scalar>(lambda: usize, alpha: usize, r: &S) -> Result<S, BoundsError> {
    Ok(lp_solve(lambda, alpha, r)?.objective)
}

pub fn gap_maxlink<S: Scalar>(lambda: usize, alpha: usize, r: &S) -> Result<S, BoundsError> {
    Ok(maxlink_ub(lambda, alpha, r)? / maxlink_lb(lambda, alpha, r)?)
}

/// Integer corner points of one curve. For the max-link kinds `r` runs over
/// `[1..Λ]`; otherwise over the valid range of the kind.
pub fn load_curve<S: Scalar>(lambda: usize, alpha: usize, kind: LoadKind) -> Result<Vec<LoadPoint<S>>, BoundsError> {
    check_topology(lambda, alpha)?;
    let rs: Vec<usize> = match kind {
        LoadKind::Achievable | LoadKind::Converse => (1..=max_load(lambda, alpha)).collect(),
        _ => (1..=lambda).collect(),
    };
    rs.into_iter()
        .map(|r| {
            let rr = S::from_count(r);
            let value = match kind {
                LoadKind::Achievable => l_ub(lambda, alpha, r)?,
                LoadKind::Converse => l_lb(lambda, alpha, r)?,
                LoadKind::CdcBaseline => cdc_load(lambda, r)?,
                LoadKind::MaxlinkUb => maxlink_ub(lambda, alpha, &rr)?,
                LoadKind::MaxlinkLb => maxlink_lb(lambda, alpha, &rr)?,
            };
            Ok(LoadPoint { r: rr, value, kind })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn int(n: i64) -> Rational {
        q(n, 1)
    }

    #[test]
    fn l_ub_examples() {
        assert_eq!(l_ub::<Rational>(4, 2, 1).unwrap(), q(1, 4));
        assert_eq!(l_ub::<Rational>(4, 2, 3).unwrap(), q(0, 1));
        assert_eq!(l_ub::<Rational>(10, 2, 1).unwrap(), q(2, 5));
        assert!(matches!(l_ub::<Rational>(4, 2, 4), Err(BoundsError::OutOfRange { .. })));
        assert!(matches!(l_ub::<Rational>(4, 2, 0), Err(BoundsError::OutOfRange { .. })));
        assert!(matches!(
            l_ub::<Rational>(4, 5, 1),
            Err(BoundsError::InvalidTopology { .. })
        ));
    }

    #[test]
    fn l_lb_examples() {
        assert_eq!(l_lb::<Rational>(4, 2, 1).unwrap(), q(1, 6));
        assert_eq!(l_lb::<Rational>(7, 3, 5).unwrap(), q(0, 1));
        assert_eq!(l_lb::<Rational>(10, 2, 1).unwrap(), q(4, 15));
        assert_eq!(l_lb::<Rational>(10, 2, 1).unwrap(), q(120, 450));
    }

    #[test]
    fn cdc_examples() {
        assert_eq!(cdc_load::<Rational>(10, 1).unwrap(), q(9, 10));
        assert_eq!(cdc_load::<Rational>(6, 6).unwrap(), q(0, 1));
        assert!(cdc_load::<Rational>(6, 7).is_err());
        for lambda in 1..=10 {
            for r in 1..=lambda {
                assert_eq!(
                    l_ub::<Rational>(lambda, 1, r).unwrap(),
                    cdc_load::<Rational>(lambda, r).unwrap()
                );
            }
        }
    }

    #[test]
    fn coding_gain_examples() {
        for r in 1..10 {
            assert_eq!(coding_gain(1, r), BigUint::from(r));
        }
        assert_eq!(coding_gain(2, 2), BigUint::from(5u32));
        assert_eq!(coding_gain(3, 4), BigUint::from(34u32));
    }

    #[test]
    fn fractional_loads() {
        for r in 1..=9 {
            assert_eq!(
                l_ub_fractional(10, 2, &int(r as i64)).unwrap(),
                l_ub::<Rational>(10, 2, r).unwrap()
            );
            assert_eq!(
                l_lb_fractional(10, 2, &int(r as i64)).unwrap(),
                l_lb::<Rational>(10, 2, r).unwrap()
            );
        }
        // Envelope oracle: every corner lies on or above every chord of the
        // envelope, and the value at 1.5 is the minimum over all chords through
        // corner pairs bracketing 1.5.
        let corners: Vec<Rational> = (1..=9).map(|r| l_ub::<Rational>(10, 2, r).unwrap()).collect();
        let x = q(3, 2);
        let mut oracle: Option<Rational> = None;
        for a in 1..=9i64 {
            for bb in a + 1..=9 {
                if int(a) <= x && x <= int(bb) {
                    let t = (x.clone() - int(a)) / int(bb - a);
                    let v = corners[a as usize - 1].clone()
                        + t * (corners[bb as usize - 1].clone() - corners[a as usize - 1].clone());
                    oracle = Some(match oracle {
                        Some(o) if o <= v => o,
                        _ => v,
                    });
                }
            }
        }
        assert_eq!(l_ub_fractional(10, 2, &x).unwrap(), oracle.unwrap());
        // Midpoint of adjacent corners on the envelope.
        let mid = l_ub_fractional(10, 2, &q(3, 2)).unwrap();
        assert_eq!(mid, (corners[0].clone() + corners[1].clone()) / int(2));
        assert!(l_ub_fractional(10, 2, &q(1, 2)).is_err());
        assert!(l_ub_fractional(10, 2, &int(10)).is_err());
    }

    #[test]
    fn lp_golden_point() {
        let sol = lp_solve(4, 2, &int(1)).unwrap();
        assert_eq!(sol.x, vec![int(1), int(0), int(0), int(0)]);
        assert_eq!(sol.active_levels, vec![1]);
        assert_eq!(sol.objective, q(5, 24));
        assert_eq!(maxlink_ub(4, 2, &int(1)).unwrap(), q(1, 4));
        assert_eq!(maxlink_lb(4, 2, &int(1)).unwrap(), q(5, 24));
    }

    #[test]
    fn lp_rejects_infeasible_load() {
        assert!(matches!(lp_solve(4, 2, &q(1, 2)), Err(BoundsError::Infeasible { .. })));
    }

    #[test]
    fn lp_full_load_bounded_by_top_level() {
        for lambda in 1..=8 {
            for alpha in 1..=lambda {
                let sol = lp_solve(lambda, alpha, &int(lambda as i64)).unwrap();
                let top: Rational = converse_level_coeff(lambda, alpha, lambda);
                assert!(sol.objective <= top * q(1, 2));
            }
        }
    }

    #[test]
    fn lp_solution_is_basic_and_feasible() {
        for lambda in 1..=10 {
            for alpha in 1..=lambda {
                for r2 in 2..=2 * lambda {
                    let r = q(r2 as i64, 2);
                    let sol = lp_solve(lambda, alpha, &r).unwrap();
                    let total: Rational = sol.x.iter().cloned().sum();
                    let load: Rational = sol
                        .x
                        .iter()
                        .enumerate()
                        .map(|(i, x)| x.clone() * int(i as i64 + 1))
                        .sum();
                    assert_eq!(total, int(1));
                    assert!(load <= r);
                    assert!(sol.x.iter().all(|x| *x >= int(0)));
                    assert!(sol.active_levels.len() <= 2);
                }
            }
        }
    }

    #[test]
    fn maxlink_zero_shuffle_corner() {
        // At r = Λ the LP may put everything on a level with no shuffle at all.
        let (l, j) = maxlink_terms::<Rational>(5, 3, &[int(0), int(0), int(1), int(0), int(0)]);
        assert_eq!(l, int(0));
        assert!(j > int(0));
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap_comm::<Rational>(4, 2, 1).unwrap(), q(3, 2));
        assert_eq!(gap_comm::<Rational>(4, 2, 3).unwrap(), int(1));
        for alpha in 1..6 {
            for r in 1..8 {
                assert!(gap_bound::<Rational>(alpha, r + 1) < gap_bound::<Rational>(alpha, r));
            }
        }
    }

    #[test]
    fn c_equals_d_beyond_shuffle_range() {
        for lambda in 1..=12 {
            for alpha in 1..=lambda {
                for j in lambda - alpha + 1..=lambda {
                    assert_eq!(
                        achievable_level_coeff::<Rational>(lambda, alpha, j),
                        converse_level_coeff::<Rational>(lambda, alpha, j)
                    );
                }
            }
        }
    }

    #[test]
    fn float_route_tracks_exact_route() {
        for lambda in 2..=12 {
            for alpha in 1..=lambda {
                for r in 1..=max_load(lambda, alpha) {
                    let e: Rational = l_ub(lambda, alpha, r).unwrap();
                    let f: f64 = l_ub(lambda, alpha, r).unwrap();
                    assert!((e.to_f64_lossy() - f).abs() <= 1e-12);
                    let e: Rational = l_lb(lambda, alpha, r).unwrap();
                    let f: f64 = l_lb(lambda, alpha, r).unwrap();
                    assert!((e.to_f64_lossy() - f).abs() <= 1e-12);
                }
            }
        }
        let f: f32 = l_ub(4, 2, 1).unwrap();
        assert_eq!(f, 0.25);
    }

    #[test]
    fn load_curve_shapes() {
        let ub = load_curve::<Rational>(10, 2, LoadKind::Achievable).unwrap();
        assert_eq!(ub.len(), 9);
        assert_eq!(ub[0].value, q(2, 5));
        let cdc = load_curve::<Rational>(10, 2, LoadKind::CdcBaseline).unwrap();
        assert_eq!(cdc.len(), 10);
        let ml = load_curve::<Rational>(4, 2, LoadKind::MaxlinkLb).unwrap();
        assert_eq!(ml[0].value, q(5, 24));
    }
}
