//! Library half of the `madc` binary: bounds tables, sweeps and the
//! verification suites, kept out of `main.rs` so tests can drive them.

pub mod sweep;
pub mod table;
pub mod verify;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use madc::bounds::BoundsError;
use madc::Rational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Shuffle load only; r in [1..Λ-α+1].
    Comm,
    /// Shuffle plus download; r in [1..Λ].
    Maxlink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("invalid selection {0:?}: expected `all`, `a..b`, or a comma-separated list")]
    Selection(String),
    #[error("{0}")]
    Usage(String),
    #[error("sweep grid is empty: no valid (lambda, alpha, r) triple")]
    EmptyGrid,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Integer selection from the command line: `all`, `a..b` (inclusive), or
/// `a,b,c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    All,
    Values(Vec<usize>),
}

impl Selection {
    /// Selected values inside `[lo..hi]`, ascending.
    pub fn within(&self, lo: usize, hi: usize) -> Vec<usize> {
        match self {
            Selection::All => (lo..=hi).collect(),
            Selection::Values(v) => v.iter().copied().filter(|x| (lo..=hi).contains(x)).collect(),
        }
    }
}

impl FromStr for Selection {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CliError::Selection(s.to_string());
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(Selection::All);
        }
        let mut values = if let Some((a, b)) = s.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            (a..=b).collect::<Vec<_>>()
        } else {
            s.split(',')
                .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()?
        };
        values.sort_unstable();
        values.dedup();
        if values.is_empty() {
            return Err(bad());
        }
        Ok(Selection::Values(values))
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::All => write!(f, "all"),
            Selection::Values(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// `p/q`, also for integers.
pub fn fmt_rational(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selections_parse() {
        assert_eq!("all".parse::<Selection>().unwrap(), Selection::All);
        assert_eq!("2..4".parse::<Selection>().unwrap(), Selection::Values(vec![2, 3, 4]));
        assert_eq!("2..=4".parse::<Selection>().unwrap(), Selection::Values(vec![2, 3, 4]));
        assert_eq!("3,1,3".parse::<Selection>().unwrap(), Selection::Values(vec![1, 3]));
        assert!("4..2".parse::<Selection>().is_err());
        assert!("x".parse::<Selection>().is_err());
        assert_eq!("1,2,7".parse::<Selection>().unwrap().within(1, 5), vec![1, 2]);
    }

    #[test]
    fn rationals_always_have_a_denominator() {
        assert_eq!(fmt_rational(&Rational::from_integer(3.into())), "3/1");
        assert_eq!(fmt_rational(&Rational::new(4.into(), 10.into())), "2/5");
    }
}
