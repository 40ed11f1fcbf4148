//! CSV and text outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::selfsimilar::SelfSimilarSolution;

pub const CSV_HEADER: &str = "t,kinetic,thermal,thermal_sq,momentum,domain_size,etax_min,etax_max,log_identity_residual,h1_v,linf_vx,h1_theta,l2_vt,l2_thetat,h2_eta,h2_v,apriori_nsf";

pub const SIGMA_HEADER: &str = "t,sigma,dsigma";

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn format_record(r: &DiagnosticsRecord) -> String {
    [
        fmt_f64(r.t),
        fmt_f64(r.kinetic),
        opt(r.thermal),
        opt(r.thermal_sq),
        fmt_f64(r.momentum),
        fmt_f64(r.domain_size),
        fmt_f64(r.etax_min),
        fmt_f64(r.etax_max),
        opt(r.log_identity_residual),
        fmt_f64(r.h1_v),
        fmt_f64(r.linf_vx),
        opt(r.h1_theta),
        fmt_f64(r.l2_vt),
        opt(r.l2_thetat),
        fmt_f64(r.h2_eta),
        fmt_f64(r.h2_v),
        opt(r.apriori_nsf),
    ]
    .join(",")
}

pub fn trajectory_csv(records: &[DiagnosticsRecord]) -> String {
    let mut s = String::with_capacity(CSV_HEADER.len() + 400 * records.len());
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format_record(r));
        s.push('\n');
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

pub fn write_trajectory(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no records to write".into()));
    }
    write_text(path, &trajectory_csv(records))
}

pub fn sigma_csv(solution: &SelfSimilarSolution) -> String {
    let mut s = String::from(SIGMA_HEADER);
    s.push('\n');
    for &(t, sigma, dsigma) in &solution.samples {
        let _ = writeln!(s, "{},{},{}", fmt_f64(t), fmt_f64(sigma), fmt_f64(dsigma));
    }
    s
}
