//! On-disk formats. Every output goes through [`publish`], which writes a
//! `.partial` file and renames it once complete, so an interrupted run never
//! leaves a truncated file under its final name.

mod dataset;
mod draws;
mod grid;
mod report;
mod summary;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use dataset::{parse_dataset, read_dataset, write_dataset};
pub use draws::{parse_draws, read_draws, write_draws, DrawsFile};
pub use grid::{parse_grid, read_grid};
pub use report::{audit_csv, ranking_csv, report_csv};
pub use summary::{comparison_csv, density_csv, dic_csv, p_gamma_csv, p_gamma_table_csv, summary_json, MethodOutput};

use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Write `bytes` to `path` via a staging file and an atomic rename.
pub fn publish(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut staged = path.as_os_str().to_owned();
    staged.push(".partial");
    let staged = PathBuf::from(staged);
    {
        let mut f = fs::File::create(&staged)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&staged, path)?;
    Ok(())
}

/// File-system-safe form of a method or parameter name:
/// `HG(a=4)` → `HG_a_4`, `gamma[3]` → `gamma_3`.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c == '_' && (out.is_empty() || out.ends_with('_')) {
            continue;
        }
        out.push(c);
    }
    out.trim_end_matches('_').to_string()
}

/// Render a CSV in memory.
fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    w.into_inner().map_err(|e| crate::error::CliError::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("HG(a=4)"), "HG_a_4");
        assert_eq!(slug("gamma[12]"), "gamma_12");
        assert_eq!(slug("CMG-S3-pow"), "CMG-S3-pow");
        assert_eq!(slug("u[2,3]"), "u_2_3");
    }

    #[test]
    fn publish_leaves_no_staging_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.csv");
        publish(&p, b"x\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"x\n");
        assert!(!dir.path().join("a/b.csv.partial").exists());
    }
}
