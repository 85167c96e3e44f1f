use std::io::Write;
use std::path::Path;

use serde_json::json;

use super::{ExperimentResult, SummaryRow};
use crate::error::{Error, Result};
use crate::trace::{emit_trace, format_decimal};

pub const SUMMARY_HEADER: [&str; 7] = [
    "algorithm",
    "t",
    "mean_cum_regret",
    "std_cum_regret",
    "min",
    "max",
    "n_reps",
];

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.t.to_string(),
            format_decimal(r.mean_cum_regret),
            format_decimal(r.std_cum_regret),
            format_decimal(r.min),
            format_decimal(r.max),
            r.n_reps.to_string(),
        ])?;
    }
    w.flush()
}

/// File-name-safe form of a variant label.
fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-@=".contains(c) { c } else { '_' })
        .collect()
}

/// Writes `summary.csv`, one `trace_<label>_<rep>.csv` per replication and
/// `meta.json` into `dir`, creating it if needed.
pub fn emit_csv(result: &ExperimentResult, dir: &Path) -> Result<()> {
    if result.variants.iter().any(|v| v.traces.is_empty()) {
        return Err(Error::invalid("refusing to write a summary with zero replications"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let summary_path = dir.join("summary.csv");
    let rows: Vec<SummaryRow> = result
        .variants
        .iter()
        .flat_map(|v| v.summary.iter().cloned())
        .collect();
    let file = std::fs::File::create(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    write_summary(&rows, std::io::BufWriter::new(file)).map_err(|e| Error::io(&summary_path, e))?;

    for v in &result.variants {
        for (rep, trace) in v.traces.iter().enumerate() {
            let path = dir.join(format!("trace_{}_{rep}.csv", file_label(v.label())));
            emit_trace(&trace.rows, &path)?;
        }
    }

    let variants: Vec<_> = result
        .variants
        .iter()
        .map(|v| {
            json!({
                "tuning": v.tuning,
                "nonconverged_rounds": v.nonconverged_rounds(),
                "mean_final_regret": v.mean_final_regret(),
            })
        })
        .collect();
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": result.config,
        "variants": variants,
    });
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    std::fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))
}
