//! Trace CSV I/O.

use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use sdcam::TraceRow;

pub const HEADER: [&str; 14] = [
    "t",
    "mu_t",
    "beta_t",
    "step_norm",
    "scaled_step",
    "gap",
    "prev_gap",
    "residual",
    "fg_value",
    "h_at_y",
    "H_value",
    "Theta_value",
    "unsuccessful_this_iter",
    "rel_feas",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            fmt_f64(r.mu_t),
            fmt_f64(r.beta_t),
            fmt_f64(r.step_norm),
            fmt_f64(r.scaled_step),
            fmt_f64(r.gap),
            fmt_f64(r.prev_gap),
            fmt_f64(r.residual),
            fmt_f64(r.fg_value),
            fmt_f64(r.h_at_y),
            fmt_f64(r.h_value),
            fmt_opt(r.theta_value),
            r.unsuccessful_this_iter.to_string(),
            fmt_opt(r.rel_feas),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, rows: &[TraceRow]) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trace(std::io::BufWriter::new(file), rows)
}

/// Reads one numeric column of a trace CSV.
pub fn read_column(path: &Path, name: &str) -> anyhow::Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow!("{}: no column '{name}'", path.display()))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(idx).unwrap_or("");
        let v: f64 = field
            .parse()
            .with_context(|| format!("{}: row {}: bad {name} value '{field}'", path.display(), line + 1))?;
        out.push(v);
    }
    Ok(out)
}
