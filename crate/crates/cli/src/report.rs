//! CSV rendering and atomic file output.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use optoweak_core::ScanRecord;

pub const HEADER: &str = "tau,theta,phi,probability,mean_x,mean_p,pop0,pop1";

/// Twelve significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn render_records(records: &[ScanRecord]) -> String {
    let mut out = String::with_capacity(128 * (records.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in records {
        let fields = [r.tau, r.theta, r.phi, r.probability, r.mean_x, r.mean_p, r.pop0, r.pop1];
        for (i, v) in fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

/// Two-column table with the given header.
pub fn render_pairs(header: &str, rows: impl IntoIterator<Item = (String, f64)>) -> String {
    let mut out = format!("{header}\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{}", num(v));
    }
    out
}

/// Writes through a temporary file in the target directory, then renames it
/// into place, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_csv(records: &[ScanRecord], path: &Path) -> io::Result<()> {
    write_atomic(path, &render_records(records))
}
