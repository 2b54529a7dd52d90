//! Deterministic CSV rendering: fixed 12-significant-digit scientific
//! notation, LF line endings, absent values as empty fields.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::sweep::SweepRecord;

pub const SWEEP_HEADER: &str =
    "delta,n_ss_rate,n_ss_master,q_rate,q_master,f_rate,f_master,converged_rate,converged_master";

/// 12 significant digits, byte-stable for identical inputs.
pub fn format_number(value: f64) -> String {
    format!("{value:.11e}")
}

fn format_optional(value: Option<f64>) -> String {
    value.map(format_number).unwrap_or_default()
}

fn format_flag(value: Option<bool>) -> String {
    match value {
        Some(true) => "true".into(),
        Some(false) => "false".into(),
        None => String::new(),
    }
}

/// Render records to the sweep CSV layout.
pub fn render_sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for record in records {
        out.push_str(&format_number(record.delta));
        for field in [
            record.n_ss_rate,
            record.n_ss_master,
            record.q_rate,
            record.q_master,
            record.f_rate,
            record.f_master,
        ] {
            out.push(',');
            out.push_str(&format_optional(field));
        }
        out.push(',');
        out.push_str(&format_flag(record.converged_rate));
        out.push(',');
        out.push_str(&format_flag(record.converged_master));
        out.push('\n');
    }
    out
}

/// Write rendered CSV to a file or stdout.
pub fn emit(content: &str, path: Option<&str>) -> io::Result<()> {
    match path {
        Some(path) => fs::write(Path::new(path), content),
        None => io::stdout().write_all(content.as_bytes()),
    }
}
