//! CSV emission. All files are UTF-8 with a header row, comma separators,
//! `\n` line endings, and floats printed with 17 significant digits so they
//! parse back bit-exactly.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::Path;

/// 17 significant digits: round-trip exact for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<P, R>(path: P, header: &[&str], rows: R) -> Result<()>
where
    P: AsRef<Path>,
    R: IntoIterator<Item = Vec<String>>,
{
    let path = path.as_ref();
    let mut out = Vec::new();
    out.extend_from_slice(header.join(",").as_bytes());
    out.push(b'\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.extend_from_slice(row.join(",").as_bytes());
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    file.write_all(&out)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
