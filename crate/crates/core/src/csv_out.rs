//! Numeric CSV tables: header row, comma separated, scientific notation
//! with 10 significant digits. Files are written to a temporary sibling
//! and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Formats `v` with 10 significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    format!("{v:.9e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `contents` to `path` via a temporary file and rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Renders a numeric table.
pub fn render_table<S: AsRef<str>>(header: &[S], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Invalid(format!("csv encoding failed: {e}"));
    w.write_record(header.iter().map(|h| h.as_ref()))
        .map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Shape {
                what: "csv row",
                expected: header.len(),
                actual: row.len(),
            });
        }
        w.write_record(row.iter().map(|&v| format_value(v)))
            .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Invalid(format!("csv encoding failed: {e}")))
}

pub fn write_table<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<f64>]) -> Result<()> {
    write_atomic(path, &render_table(header, rows)?)
}

/// `{dir}/{run_id}_{table}.csv`.
pub fn table_path(dir: &Path, run_id: &str, table: &str) -> PathBuf {
    dir.join(format!("{run_id}_{table}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(format_value(5.03e-3), "5.030000000e-3");
        assert_eq!(format_value(-1.0), "-1.000000000e0");
        assert_eq!(format_value(0.0), "0.000000000e0");
    }

    #[test]
    fn renders_header_and_rows() {
        let out = render_table(&["x", "y"], &[vec![1.0, 2.0]]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "x,y\n1.000000000e0,2.000000000e0\n"
        );
        assert!(render_table(&["x"], &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = table_path(dir.path(), "run", "t");
        write_table(&p, &["a"], &[vec![1.0]]).unwrap();
        assert!(p.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
