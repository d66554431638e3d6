//! CSV encoding of a [`ResultTable`].
//!
//! Reals are written with 17 significant digits (`{:.16e}`), which is
//! enough for `str::parse::<f64>` to recover every value bit for bit.
//! When runs failed, a trailing row with `experiment_id = summary` and
//! `solver_id = divergence_tally` carries the number of failed runs in the
//! `avg_mse` column and the number of trial evaluations in `trials`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::baselines::SolverId;
use crate::error::{Error, Result};
use crate::harness::experiment::{ResultRow, ResultTable};

pub const HEADER: &str = "experiment_id,solver_id,k,snr_db,epsilon,iteration,avg_mse,trials,crlb_nss,crlb_ass";

const SUMMARY_ID: &str = "summary";
const TALLY_SOLVER: &str = "divergence_tally";

pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Renders the table, header first, every line newline-terminated.
pub fn to_csv_string(table: &ResultTable) -> String {
    let mut out = String::with_capacity(64 * (table.rows.len() + 2));
    out.push_str(HEADER);
    out.push('\n');
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.experiment_id,
            r.solver_id,
            r.k,
            format_real(r.snr_db),
            format_real(r.epsilon),
            r.iteration,
            format_real(r.avg_mse),
            r.trials,
            format_real(r.crlb_nss),
            format_real(r.crlb_ass),
        ));
    }
    if table.divergent_runs > 0 {
        out.push_str(&format!(
            "{SUMMARY_ID},{TALLY_SOLVER},0,NaN,NaN,0,{},{},NaN,NaN\n",
            format_real(table.divergent_runs as f64),
            table.total_trials,
        ));
    }
    out
}

pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let io_err = |source| Error::File {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(to_csv_string(table).as_bytes()).map_err(io_err)?;
    file.flush().map_err(io_err)
}

/// Parses text written by [`to_csv_string`]. Run statistics that are not
/// part of the CSV (monotonicity count, failure messages) come back empty.
pub fn parse_csv(text: &str) -> Result<ResultTable> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => {
            return Err(Error::Config {
                line: 1,
                message: format!("expected header {HEADER:?}"),
            })
        }
    }
    let mut table = ResultTable::default();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let bad = |message: String| Error::Config { line: line_no, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(bad(format!("expected 10 fields, got {}", fields.len())));
        }
        let real = |i: usize| fields[i].parse::<f64>().map_err(|e| bad(format!("field {i}: {e}")));
        let int = |i: usize| fields[i].parse::<usize>().map_err(|e| bad(format!("field {i}: {e}")));
        if fields[0] == SUMMARY_ID && fields[1] == TALLY_SOLVER {
            table.divergent_runs = real(6)? as usize;
            table.total_trials = int(7)?;
            continue;
        }
        table.rows.push(ResultRow {
            experiment_id: fields[0].to_string(),
            solver_id: fields[1].parse::<SolverId>().map_err(bad)?,
            k: int(2)?,
            snr_db: real(3)?,
            epsilon: real(4)?,
            iteration: int(5)?,
            avg_mse: real(6)?,
            trials: int(7)?,
            crlb_nss: real(8)?,
            crlb_ass: real(9)?,
        });
    }
    Ok(table)
}

pub fn read_csv(path: &Path) -> Result<ResultTable> {
    let text = fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text)
}
