//! One row of closed-form values per `(Λ, α, r)`.

use madc::bounds::{self, max_load, BoundsError};
use madc::{Rational, Scalar};
use serde::Serialize;

use crate::{fmt_rational, CliError, Mode};

/// Column layout shared by `bounds` and `sweep`. Undefined cells are empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsRow {
    pub lambda: usize,
    pub alpha: usize,
    pub r: usize,
    pub l_ub: Option<String>,
    pub l_ub_f64: Option<f64>,
    pub l_lb: Option<String>,
    pub l_lb_f64: Option<f64>,
    pub cdc: Option<String>,
    pub cdc_f64: Option<f64>,
    pub gain: String,
    pub maxlink_ub: Option<String>,
    pub maxlink_ub_f64: Option<f64>,
    pub maxlink_lb: Option<String>,
    pub maxlink_lb_f64: Option<f64>,
    pub gap: Option<String>,
    pub gap_f64: Option<f64>,
}

fn cell(x: Option<Rational>) -> (Option<String>, Option<f64>) {
    match x {
        Some(v) => (Some(fmt_rational(&v)), Some(v.to_f64_lossy())),
        None => (None, None),
    }
}

/// Largest `r` listed for `mode`.
pub fn r_max(lambda: usize, alpha: usize, mode: Mode) -> usize {
    match mode {
        Mode::Comm => max_load(lambda, alpha),
        Mode::Maxlink => lambda,
    }
}

pub fn check_topology(lambda: usize, alpha: usize) -> Result<(), CliError> {
    if lambda == 0 || alpha == 0 || alpha > lambda {
        return Err(BoundsError::InvalidTopology { lambda, alpha }.into());
    }
    Ok(())
}

pub fn bounds_row(lambda: usize, alpha: usize, r: usize, mode: Mode) -> Result<BoundsRow, CliError> {
    check_topology(lambda, alpha)?;
    let hi = r_max(lambda, alpha, mode);
    if r < 1 || r > hi {
        return Err(BoundsError::OutOfRange {
            r: r.to_string(),
            min: 1,
            max: hi,
        }
        .into());
    }
    let comm_valid = r <= max_load(lambda, alpha);
    let rr = Rational::from_integer(r.into());

    let ub = comm_valid
        .then(|| bounds::l_ub::<Rational>(lambda, alpha, r))
        .transpose()?;
    let lb = comm_valid
        .then(|| bounds::l_lb::<Rational>(lambda, alpha, r))
        .transpose()?;
    let cdc = bounds::cdc_load::<Rational>(lambda, r)?;
    let ml_ub = bounds::maxlink_ub::<Rational>(lambda, alpha, &rr)?;
    let ml_lb = bounds::maxlink_lb::<Rational>(lambda, alpha, &rr)?;
    let gap = match mode {
        Mode::Comm => bounds::gap_comm::<Rational>(lambda, alpha, r)?,
        Mode::Maxlink => &ml_ub / &ml_lb,
    };

    let (l_ub, l_ub_f64) = cell(ub);
    let (l_lb, l_lb_f64) = cell(lb);
    let (cdc, cdc_f64) = cell(Some(cdc));
    let (maxlink_ub, maxlink_ub_f64) = cell(Some(ml_ub));
    let (maxlink_lb, maxlink_lb_f64) = cell(Some(ml_lb));
    let (gap, gap_f64) = cell(Some(gap));
    Ok(BoundsRow {
        lambda,
        alpha,
        r,
        l_ub,
        l_ub_f64,
        l_lb,
        l_lb_f64,
        cdc,
        cdc_f64,
        gain: bounds::coding_gain(alpha, r).to_string(),
        maxlink_ub,
        maxlink_ub_f64,
        maxlink_lb,
        maxlink_lb_f64,
        gap,
        gap_f64,
    })
}

/// Rows for one topology: a single `r`, or every valid `r` for the mode.
pub fn bounds_table(lambda: usize, alpha: usize, r: Option<usize>, mode: Mode) -> Result<Vec<BoundsRow>, CliError> {
    check_topology(lambda, alpha)?;
    match r {
        Some(r) => Ok(vec![bounds_row(lambda, alpha, r, mode)?]),
        None => (1..=r_max(lambda, alpha, mode))
            .map(|r| bounds_row(lambda, alpha, r, mode))
            .collect(),
    }
}
