//! End-to-end runs: map, shuffle, decode and (optionally) delivery, with the
//! measured loads paired against the closed-form targets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, lp_solve, maxlink_terms, BoundsError};
use crate::download::{execute_delivery, measure_download_cost, measure_maxlink, plan_delivery, DownloadError};
use crate::engine::{decode_all, measure_comm_load, run_map, run_shuffle, Deployment, EngineError, Transcript};
use crate::model::{build_multilevel_instance, realize_profile, ModelError, ProblemInstance};
use crate::Rational;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Download(#[from] DownloadError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// Loads measured from one run next to their formula values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub instance: ProblemInstance,
    pub num_messages: usize,
    pub shuffle_bits: usize,
    pub comm_load: Rational,
    pub comm_load_formula: Rational,
    pub download_cost: Option<Rational>,
    pub download_cost_formula: Option<Rational>,
    pub maxlink: Option<Rational>,
    pub maxlink_formula: Option<Rational>,
    pub equalized: Option<bool>,
    pub decoded: bool,
}

impl LoadReport {
    /// Every measured quantity equals its formula and decoding succeeded.
    pub fn passed(&self) -> bool {
        self.decoded
            && self.comm_load == self.comm_load_formula
            && self.download_cost == self.download_cost_formula
            && self.maxlink == self.maxlink_formula
            && self.equalized.unwrap_or(true)
    }
}

fn level_fractions(instance: &ProblemInstance) -> Vec<Rational> {
    instance
        .profile()
        .iter()
        .map(|&a| Rational::new(a.into(), instance.num_files.into()))
        .collect()
}

/// Runs map, shuffle and decode (every reducer checked against the oracle
/// store); with `with_download`, also plans and executes delivery.
pub fn simulate(instance: ProblemInstance, with_download: bool) -> Result<(LoadReport, Transcript), RunError> {
    let dep = Deployment::new(instance)?;
    let inst = &dep.instance;
    let store = run_map(inst, &dep.files);
    let mut transcript = run_shuffle(&dep, &store)?;
    decode_all(&dep, &store, &transcript)?;

    let x = level_fractions(inst);
    let (l_formula, j_formula) = maxlink_terms(inst.num_mappers, inst.access_degree, &x);
    let comm_load = measure_comm_load(&transcript, inst);

    let (download_cost, download_cost_formula, maxlink, maxlink_formula, equalized) = if with_download {
        let plan = plan_delivery(&dep)?;
        let (records, _) = execute_delivery(&dep, &plan, &store)?;
        transcript.download_records = records;
        let j = measure_download_cost(&plan, &dep);
        let ml = measure_maxlink(&comm_load, &j);
        let ml_formula = measure_maxlink(&l_formula, &j_formula);
        (
            Some(j),
            Some(j_formula),
            Some(ml),
            Some(ml_formula),
            Some(plan.is_equalized()),
        )
    } else {
        (None, None, None, None, None)
    };

    let report = LoadReport {
        instance: inst.clone(),
        num_messages: transcript.shuffle_messages.len(),
        shuffle_bits: transcript.shuffle_bits(),
        comm_load,
        comm_load_formula: l_formula,
        download_cost,
        download_cost_formula,
        maxlink,
        maxlink_formula,
        equalized,
        decoded: true,
    };
    Ok((report, transcript))
}

/// Instance whose file profile realizes the max-link LP optimum exactly, with
/// the smallest such file count.
pub fn maxlink_instance(
    lambda: usize,
    alpha: usize,
    r: usize,
    num_functions: Option<usize>,
    iv_bits: Option<usize>,
    seed: u64,
) -> Result<ProblemInstance, RunError> {
    let sol = lp_solve::<Rational>(lambda, alpha, &Rational::from_integer(r.into()))?;
    let profile = realize_profile(lambda, &sol.x)?;
    Ok(build_multilevel_instance(
        lambda,
        alpha,
        r,
        profile,
        num_functions,
        iv_bits,
        seed,
    )?)
}

/// Max-link upper bound for `(Λ, α, r)`.
pub fn maxlink_target(lambda: usize, alpha: usize, r: usize) -> Result<Rational, BoundsError> {
    bounds::maxlink_ub(lambda, alpha, &Rational::from_integer(r.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_instance;

    #[test]
    fn golden_run() {
        let inst = build_instance(4, 2, 1, Some(8), Some(12), None, 0).unwrap();
        let (report, t) = simulate(inst, true).unwrap();
        assert!(report.passed());
        assert_eq!(report.num_messages, 6);
        assert_eq!(report.comm_load, Rational::new(1.into(), 4.into()));
        assert_eq!(report.maxlink, Some(Rational::new(1.into(), 4.into())));
        assert_eq!(t.download_records.len(), 12);
    }

    #[test]
    fn maxlink_run_6_3_2() {
        let inst = maxlink_instance(6, 3, 2, None, None, 0).unwrap();
        let (report, _) = simulate(inst, true).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.maxlink.unwrap(), maxlink_target(6, 3, 2).unwrap());
    }
}
