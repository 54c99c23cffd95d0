use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::table::{bounds_row, r_max, BoundsRow};
use crate::{CliError, Format, Mode, Selection};

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub lambdas: Selection,
    pub alphas: Selection,
    pub rs: Selection,
    pub mode: Mode,
    pub output: PathBuf,
    pub format: Format,
}

/// Valid `(Λ, α, r)` triples of the sweep, ascending.
pub fn expand(spec: &SweepSpec) -> Result<Vec<(usize, usize, usize)>, CliError> {
    let lambdas = match &spec.lambdas {
        Selection::All => return Err(CliError::Usage("lambda range must be explicit".into())),
        Selection::Values(v) => v.iter().copied().filter(|&l| l >= 1).collect::<Vec<_>>(),
    };
    let mut grid = Vec::new();
    for lambda in lambdas {
        for alpha in spec.alphas.within(1, lambda) {
            for r in spec.rs.within(1, r_max(lambda, alpha, spec.mode)) {
                grid.push((lambda, alpha, r));
            }
        }
    }
    if grid.is_empty() {
        return Err(CliError::EmptyGrid);
    }
    Ok(grid)
}

/// Evaluates the grid in parallel; rows come back sorted by `(Λ, α, r)`.
pub fn sweep_rows(spec: &SweepSpec) -> Result<Vec<BoundsRow>, CliError> {
    let grid = expand(spec)?;
    let mut rows = grid
        .par_iter()
        .map(|&(l, a, r)| bounds_row(l, a, r, spec.mode))
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by_key(|row| (row.lambda, row.alpha, row.r));
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[BoundsRow], out: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_rows(rows: &[BoundsRow], path: &Path, format: Format) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(rows, &mut out).map_err(|source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        })?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows).map_err(|source| CliError::Json {
                path: path.to_path_buf(),
                source,
            })?;
            out.write_all(b"\n").map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Expands, evaluates and writes; nothing is written if the grid is empty.
pub fn run_sweep(spec: &SweepSpec) -> Result<usize, CliError> {
    let rows = sweep_rows(spec)?;
    write_rows(&rows, &spec.output, spec.format)?;
    Ok(rows.len())
}
