use std::io::Write;
use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use sdcam::diagnostics::select_subsequence_detailed;

use crate::error::{Classify, CmdResult, Failure};
use crate::trace::{fmt_f64, read_column};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Column {
    /// `|x^{t+1} - x^t|^2`.
    StepNormSq,
    /// `(|x^{t+1} - x^t| / mu_t)^2`.
    ScaledStepSq,
}

impl Column {
    fn source(self) -> &'static str {
        match self {
            Column::StepNormSq => "step_norm",
            Column::ScaledStepSq => "scaled_step",
        }
    }
}

pub fn cmd_subseq(trace: &Path, column: Column, out: Option<&Path>) -> CmdResult {
    let values = read_column(trace, column.source())
        .with_context(|| "valid columns are step_norm_sq (from step_norm) and scaled_step_sq (from scaled_step)")
        .usage()?;
    if values.is_empty() {
        return Err(Failure::usage(format!("{}: trace has no rows", trace.display())));
    }
    let a: Vec<f64> = values.iter().map(|v| v * v).collect();
    let picked = select_subsequence_detailed(&a);

    let mut text = String::from("T,a_T,b_prev\n");
    for e in &picked {
        text.push_str(&format!("{},{},{}\n", e.t, fmt_f64(e.a_t), fmt_f64(e.b_prev)));
    }
    match out {
        Some(path) => std::fs::write(path, &text)
            .with_context(|| format!("writing {}", path.display()))
            .usage()?,
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            r => r.usage()?,
        },
    }
    log::info!("selected {} of {} indices", picked.len(), a.len());
    Ok(())
}
