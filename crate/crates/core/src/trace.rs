//! Per-round regret traces and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 8] = [
    "t",
    "arm",
    "optimal_arm",
    "reward",
    "inst_regret",
    "cum_regret",
    "mle_converged",
    "stage",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub arm: usize,
    pub optimal_arm: usize,
    pub reward: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub mle_converged: bool,
    /// SupCB-GLM stage s_t; `None` for every other algorithm.
    pub stage: Option<usize>,
}

/// Decimal rendering with at most 12 significant digits, trailing zeros
/// trimmed. Non-finite values print as `NaN`, `inf`, `-inf`.
pub fn format_decimal(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("scientific literal");
    let exponent = rounded.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

fn record(row: &TraceRow) -> [String; 8] {
    [
        row.t.to_string(),
        row.arm.to_string(),
        row.optimal_arm.to_string(),
        format_decimal(row.reward),
        format_decimal(row.inst_regret),
        format_decimal(row.cum_regret),
        row.mle_converged.to_string(),
        row.stage.map(|s| s.to_string()).unwrap_or_default(),
    ]
}

pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()
}

pub fn emit_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(rows, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: msg.into(),
    }
}

/// Reads a trace written by [`write_trace`]. `origin` only labels errors.
pub fn read_trace<R: Read>(input: R, origin: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| parse_err(origin, e.to_string()))?;
    if header.iter().ne(TRACE_HEADER) {
        return Err(parse_err(origin, format!("unexpected trace header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(origin, e.to_string()))?;
        let field = |j: usize| -> Result<&str> {
            rec.get(j)
                .ok_or_else(|| parse_err(origin, format!("row {}: missing column {j}", i + 1)))
        };
        let bad = |j: usize| parse_err(origin, format!("row {}: bad {}", i + 1, TRACE_HEADER[j]));
        let int = |j: usize| -> Result<usize> { field(j)?.parse().map_err(|_| bad(j)) };
        let real = |j: usize| -> Result<f64> { field(j)?.parse().map_err(|_| bad(j)) };
        let stage = match field(7)? {
            "" => None,
            s => Some(s.parse().map_err(|_| bad(7))?),
        };
        rows.push(TraceRow {
            t: int(0)?,
            arm: int(1)?,
            optimal_arm: int(2)?,
            reward: real(3)?,
            inst_regret: real(4)?,
            cum_regret: real(5)?,
            mle_converged: field(6)?.parse().map_err(|_| bad(6))?,
            stage,
        });
    }
    Ok(rows)
}

pub fn parse_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(std::io::BufReader::new(file), path)
}
