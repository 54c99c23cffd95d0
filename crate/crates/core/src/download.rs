//! Mapper-to-reducer delivery with equal per-link load.
//!
//! For reducer `U` and mapper `λ ∈ U`, the values of level-`j` files whose
//! label meets `U` in exactly `I = {λ} ∪ S` form one group. The group is cut
//! into `|I|` equal parts and the members of `I`, in ascending order, each
//! send the part at their own position.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combin::{Subset, SubsetId};
use crate::engine::{Deployment, DownloadRecord, EngineError, IvView};
use crate::model::IvStore;
use crate::scalar::max_of;
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DownloadError {
    #[error(
        "level-{level} group {intersection} for reducer {reducer} has {bytes} bytes, not divisible into {parts} parts"
    )]
    Indivisible {
        level: usize,
        reducer: Subset,
        intersection: Subset,
        bytes: usize,
        parts: usize,
    },
    #[error("mapper {mapper} does not hold file {file}")]
    NotMapped { mapper: usize, file: usize },
    #[error("reducer {reducer} received v[{q},{n}] more than once")]
    Duplicate { reducer: Subset, q: usize, n: usize },
    #[error("reducer {reducer} view mismatch: {reason}")]
    Coverage { reducer: Subset, reason: String },
}

/// One part of one delivery group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentDescriptor {
    pub level: usize,
    /// `{λ} ∪ S`: mappers of `U` that hold the group's files.
    pub intersection: Subset,
    pub sender: usize,
    /// Position of the sender in `intersection`.
    pub part: usize,
    pub group_bytes: usize,
}

impl SegmentDescriptor {
    pub fn bytes(&self) -> usize {
        self.group_bytes / self.intersection.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkPlan {
    pub mapper: usize,
    pub reducer: SubsetId,
    pub segments: Vec<SegmentDescriptor>,
    /// `R^U_λ`.
    pub bits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryPlan {
    /// Ordered by reducer rank, then mapper.
    pub links: Vec<LinkPlan>,
}

impl DeliveryPlan {
    /// Per-link bit counts as CSV rows `mapper,reducer,bits`, reducer members
    /// space-separated.
    pub fn link_csv(&self) -> String {
        let mut out = String::from("mapper,reducer,bits\n");
        for l in &self.links {
            let members: Vec<String> = l.reducer.members.members().iter().map(|m| m.to_string()).collect();
            let _ = writeln!(out, "{},{},{}", l.mapper, members.join(" "), l.bits);
        }
        out
    }

    pub fn is_equalized(&self) -> bool {
        self.links.windows(2).all(|w| w[0].bits == w[1].bits)
    }
}

/// Files of `level` whose label meets `reducer` exactly in `intersection`.
fn group_files(dep: &Deployment, level: usize, reducer: &Subset, intersection: &Subset) -> Vec<usize> {
    let Some(lv) = dep.files.level(level) else {
        return Vec::new();
    };
    let mut files: Vec<usize> = lv
        .batches
        .iter()
        .filter(|b| b.label.members.intersection(reducer) == *intersection)
        .flat_map(|b| b.files.iter().copied())
        .collect();
    files.sort_unstable();
    files
}

pub fn plan_delivery(dep: &Deployment) -> Result<DeliveryPlan, DownloadError> {
    let q_total = dep.instance.num_functions;
    let iv_bytes = dep.instance.iv_bytes();
    let mut links = Vec::new();
    for u in &dep.topology.reducers {
        for &lambda in u.members.members() {
            let others = u.members.difference(&Subset::from_unsorted(vec![lambda]));
            let mut segments = Vec::new();
            for lv in &dep.files.levels {
                for i in 1..=u.members.len() {
                    for s in others.k_subsets(i - 1) {
                        let intersection = s.union(&Subset::from_unsorted(vec![lambda]));
                        let files = group_files(dep, lv.level, &u.members, &intersection);
                        if files.is_empty() {
                            continue;
                        }
                        let group_bytes = files.len() * q_total * iv_bytes;
                        if !group_bytes.is_multiple_of(i) {
                            return Err(DownloadError::Indivisible {
                                level: lv.level,
                                reducer: u.members.clone(),
                                intersection,
                                bytes: group_bytes,
                                parts: i,
                            });
                        }
                        let part = intersection.position(lambda).expect("sender in its own group");
                        segments.push(SegmentDescriptor {
                            level: lv.level,
                            intersection,
                            sender: lambda,
                            part,
                            group_bytes,
                        });
                    }
                }
            }
            let bits = segments.iter().map(|s| s.bytes() * 8).sum();
            links.push(LinkPlan {
                mapper: lambda,
                reducer: u.clone(),
                segments,
                bits,
            });
        }
    }
    Ok(DeliveryPlan { links })
}

/// Values a reducer holds after delivery.
#[derive(Debug, Clone)]
pub struct DeliveredView {
    reducer: Subset,
    values: HashMap<(usize, usize), Vec<u8>>,
}

impl DeliveredView {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl IvView for DeliveredView {
    fn reducer(&self) -> &Subset {
        &self.reducer
    }

    fn iv(&self, q: usize, n: usize) -> Result<&[u8], EngineError> {
        self.values
            .get(&(q, n))
            .map(Vec::as_slice)
            .ok_or_else(|| EngineError::MissingIv {
                reducer: self.reducer.clone(),
                q,
                n,
            })
    }
}

/// Group payload: files ascending, then functions ascending.
fn group_payload(store: &IvStore, files: &[usize]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(files.len() * store.num_functions() * store.iv_bytes());
    for &n in files {
        for q in 1..=store.num_functions() {
            buf.extend_from_slice(store.get(q, n));
        }
    }
    buf
}

/// Parts received by one reducer, keyed by `(level, intersection)`, then by
/// position.
type Inbox = BTreeMap<(usize, Subset), BTreeMap<usize, Vec<u8>>>;

/// Runs the plan: each mapper sends its parts, each reducer reassembles its
/// groups. Checks that reducers receive their full view exactly once.
pub fn execute_delivery(
    dep: &Deployment,
    plan: &DeliveryPlan,
    store: &IvStore,
) -> Result<(Vec<DownloadRecord>, Vec<DeliveredView>), DownloadError> {
    let mut records = Vec::new();
    let mut received: BTreeMap<u64, Inbox> = BTreeMap::new();
    for link in plan.links.iter() {
        let mine = dep.files.mapper_files(link.mapper);
        for seg in &link.segments {
            let files = group_files(dep, seg.level, &link.reducer.members, &seg.intersection);
            if let Some(&file) = files.iter().find(|f| mine.binary_search(f).is_err()) {
                return Err(DownloadError::NotMapped {
                    mapper: link.mapper,
                    file,
                });
            }
            let group = group_payload(store, &files);
            let len = seg.bytes();
            let payload = group[seg.part * len..(seg.part + 1) * len].to_vec();
            records.push(DownloadRecord {
                mapper: link.mapper,
                reducer: link.reducer.members.clone(),
                bits: payload.len() * 8,
                label: format!(
                    "level {} group {} part {}/{}",
                    seg.level,
                    seg.intersection,
                    seg.part + 1,
                    seg.intersection.len()
                ),
                payload: payload.clone(),
            });
            received
                .entry(link.reducer.rank)
                .or_default()
                .entry((seg.level, seg.intersection.clone()))
                .or_default()
                .insert(seg.part, payload);
        }
    }

    let q_total = dep.instance.num_functions;
    let mut views = Vec::with_capacity(dep.topology.reducers.len());
    for u in &dep.topology.reducers {
        let reducer = u.members.clone();
        let coverage = |reason: String| DownloadError::Coverage {
            reducer: reducer.clone(),
            reason,
        };
        let mut values = HashMap::new();
        for ((level, intersection), parts) in received.remove(&u.rank).unwrap_or_default() {
            if parts.len() != intersection.len() || parts.keys().enumerate().any(|(i, &p)| i != p) {
                return Err(coverage(format!("group {intersection} at level {level} incomplete")));
            }
            let group: Vec<u8> = parts.into_values().flatten().collect();
            let files = group_files(dep, level, &reducer, &intersection);
            let mut chunks = group.chunks_exact(dep.instance.iv_bytes());
            for &n in &files {
                for q in 1..=q_total {
                    let block = chunks
                        .next()
                        .ok_or_else(|| coverage(format!("group {intersection} truncated")))?;
                    if values.insert((q, n), block.to_vec()).is_some() {
                        return Err(DownloadError::Duplicate {
                            reducer: reducer.clone(),
                            q,
                            n,
                        });
                    }
                }
            }
        }
        let required = dep.files.reducer_files(&reducer);
        if values.len() != required.len() * q_total {
            return Err(coverage(format!(
                "received {} values, view has {}",
                values.len(),
                required.len() * q_total
            )));
        }
        for &n in &required {
            for q in 1..=q_total {
                match values.get(&(q, n)) {
                    Some(v) if v.as_slice() == store.get(q, n) => {}
                    _ => return Err(coverage(format!("v[{q},{n}] missing or corrupted"))),
                }
            }
        }
        views.push(DeliveredView { reducer, values });
    }
    Ok((records, views))
}

/// `J = max R^U_λ / (QNT)`.
pub fn measure_download_cost(plan: &DeliveryPlan, dep: &Deployment) -> Rational {
    let inst = &dep.instance;
    let max_bits = plan.links.iter().map(|l| l.bits).max().unwrap_or(0);
    Rational::new(
        BigInt::from(max_bits),
        BigInt::from(inst.num_functions * inst.num_files * inst.iv_bits),
    )
}

/// `max(L, J)`.
pub fn measure_maxlink(comm_load: &Rational, download_cost: &Rational) -> Rational {
    max_of(comm_load.clone(), download_cost.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{download_coeff, maxlink_terms};
    use crate::combin::binom;
    use crate::engine::run_map;
    use crate::model::{build_instance, build_multilevel_instance};
    use num_traits::Zero;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    /// Closed-form per-link bits, summed over levels and intersection sizes.
    fn link_bits_formula(dep: &Deployment) -> BigInt {
        let (lambda, alpha) = (dep.instance.num_mappers as i64, dep.instance.access_degree as i64);
        let qt = BigInt::from(dep.instance.num_functions * dep.instance.iv_bits);
        let mut total = Rational::zero();
        for lv in dep.instance.levels() {
            let j = lv.level as i64;
            for i in 1..=alpha {
                let num = BigInt::from(lv.files_per_batch)
                    * BigInt::from(binom(lambda - alpha, j - i))
                    * &qt
                    * BigInt::from(binom(alpha - 1, i - 1));
                total += Rational::new(num, BigInt::from(i));
            }
        }
        assert!(total.is_integer());
        total.to_integer()
    }

    #[test]
    fn single_level_r1_sends_own_batches() {
        let dep = Deployment::new(build_instance(4, 2, 1, Some(8), Some(12), None, 0).unwrap()).unwrap();
        let plan = plan_delivery(&dep).unwrap();
        assert_eq!(plan.links.len(), 12);
        for link in &plan.links {
            assert_eq!(link.segments.len(), 1);
            assert_eq!(link.segments[0].intersection.len(), 1);
            // One batch of 2 files, 12 functions.
            assert_eq!(link.bits, 2 * 12 * dep.instance.iv_bits);
        }
        assert!(plan.is_equalized());
        let j = measure_download_cost(&plan, &dep);
        assert_eq!(j, q(1, 4));
        assert_eq!(j, q(6 - 3, 2 * 6));
        assert_eq!(measure_maxlink(&q(1, 4), &j), q(1, 4));
    }

    #[test]
    fn pair_level_splits_shared_groups() {
        let dep =
            Deployment::new(build_multilevel_instance(4, 2, 2, vec![0, 6, 0, 0], None, None, 0).unwrap()).unwrap();
        let plan = plan_delivery(&dep).unwrap();
        let u12 = plan
            .links
            .iter()
            .find(|l| l.reducer.rank == 0 && l.mapper == 1)
            .unwrap();
        // Batches {1,3},{1,4} meet U = {1,2} in {1}; batch {1,2} is shared and split.
        let shared: Vec<_> = u12.segments.iter().filter(|s| s.intersection.len() == 2).collect();
        assert_eq!(shared.len(), 1);
        assert_eq!(shared[0].part, 0);
        let own: Vec<_> = u12.segments.iter().filter(|s| s.intersection.len() == 1).collect();
        assert_eq!(
            own[0].group_bytes,
            2 * dep.instance.num_functions * dep.instance.iv_bytes()
        );
        assert!(plan.is_equalized());
        assert_eq!(BigInt::from(u12.bits), link_bits_formula(&dep));
    }

    #[test]
    fn delivery_covers_views_exactly_once() {
        for (lambda, alpha, profile) in [
            (4, 2, vec![4, 6, 0, 0]),
            (5, 3, vec![0, 10, 10, 0, 0]),
            (6, 3, vec![0, 0, 20, 0, 0, 0]),
            (5, 5, vec![5, 0, 0, 0, 1]),
        ] {
            let r = lambda;
            let inst = build_multilevel_instance(lambda, alpha, r, profile, None, None, 9).unwrap();
            let dep = Deployment::new(inst).unwrap();
            let store = run_map(&dep.instance, &dep.files);
            let plan = plan_delivery(&dep).unwrap();
            assert!(plan.is_equalized());
            let (records, views) = execute_delivery(&dep, &plan, &store).unwrap();
            assert!(records.iter().all(|r| r.bits == r.payload.len() * 8));
            for (u, view) in dep.topology.reducers.iter().zip(&views) {
                assert_eq!(
                    view.len(),
                    dep.files.reducer_files(&u.members).len() * dep.instance.num_functions
                );
            }
            let link_bits = link_bits_formula(&dep);
            assert!(plan.links.iter().all(|l| BigInt::from(l.bits) == link_bits));

            let x: Vec<Rational> = dep
                .instance
                .profile()
                .iter()
                .map(|&a| Rational::new(a.into(), dep.instance.num_files.into()))
                .collect();
            let (_, j_formula) = maxlink_terms(lambda, alpha, &x);
            assert_eq!(measure_download_cost(&plan, &dep), j_formula);
        }
    }

    #[test]
    fn indivisible_groups_rejected() {
        // Level-2 groups shared by both mappers of U hold 1 file · 1 function ·
        // 1 byte, which cannot be halved.
        let inst = build_multilevel_instance(3, 2, 2, vec![0, 3, 0], Some(3), Some(8), 0).unwrap();
        let dep = Deployment::new(inst).unwrap();
        assert!(!dep.instance.download_divisible());
        assert!(matches!(
            plan_delivery(&dep),
            Err(DownloadError::Indivisible { parts: 2, .. })
        ));
    }

    #[test]
    fn tampered_plan_fails_coverage() {
        let dep = Deployment::new(build_instance(4, 2, 1, Some(8), Some(12), None, 0).unwrap()).unwrap();
        let store = run_map(&dep.instance, &dep.files);
        let mut plan = plan_delivery(&dep).unwrap();
        plan.links[0].segments.clear();
        assert!(matches!(
            execute_delivery(&dep, &plan, &store),
            Err(DownloadError::Coverage { .. })
        ));

        let mut plan = plan_delivery(&dep).unwrap();
        // Mapper 2 claims to send mapper 1's batch.
        plan.links[1].segments = plan.links[0].segments.clone();
        plan.links[1].segments[0].sender = 2;
        assert!(matches!(
            execute_delivery(&dep, &plan, &store),
            Err(DownloadError::NotMapped { .. })
        ));
    }

    #[test]
    fn download_coeff_matches_per_level_count() {
        for lambda in 1..=8usize {
            for alpha in 1..=lambda {
                for j in 1..=lambda {
                    let mut sum = Rational::zero();
                    for i in 1..=alpha as i64 {
                        let num = BigInt::from(binom((lambda - alpha) as i64, j as i64 - i))
                            * BigInt::from(binom(alpha as i64 - 1, i - 1));
                        let den = BigInt::from(i) * BigInt::from(binom(lambda as i64, j as i64));
                        sum += Rational::new(num, den);
                    }
                    assert_eq!(
                        sum,
                        download_coeff::<Rational>(lambda, alpha, j),
                        "Λ={lambda} α={alpha} j={j}"
                    );
                }
            }
        }
    }

    #[test]
    fn link_csv_rows() {
        let dep = Deployment::new(build_instance(3, 2, 1, None, None, None, 0).unwrap()).unwrap();
        let csv = plan_delivery(&dep).unwrap().link_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "mapper,reducer,bits");
        assert_eq!(lines.len(), 1 + 6);
        assert!(lines[1].starts_with("1,1 2,"));
    }
}
