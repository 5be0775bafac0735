//! Tables, plain-text summaries and atomic artifact writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// A named table of preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn with_header(name: &str, header: Vec<String>) -> Self {
        Table { name: name.into(), header, rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Whitespace-separated columns with a commented header, for gnuplot.
    pub fn to_dat(&self) -> Vec<u8> {
        let mut out = format!("# {}\n", self.header.join(" "));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| if c.contains(char::is_whitespace) { format!("\"{c}\"") } else { c.clone() }).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out.into_bytes()
    }

    /// Aligned plain-text rendering.
    pub fn render(&self) -> String {
        let mut width: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.header);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

/// Shortest form that reads back to the same double; exponent notation
/// outside [1e-4, 1e16) and -0 printed as 0.
pub fn num(v: f64) -> String {
    let v = v + 0.0;
    if v != 0.0 && v.is_finite() && !(1e-4..1e16).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn short(v: f64) -> String {
    format!("{v:.6e}")
}

/// Writes via a temporary file in the same directory and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| e.error)?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("t", &["x", "label"]);
        t.push(vec![num(0.1), "a b".into()]);
        t.push(vec![num(-2.0), "c".into()]);
        t
    }

    #[test]
    fn csv_and_dat_layouts() {
        let t = sample();
        assert_eq!(String::from_utf8(t.to_csv()).unwrap(), "x,label\n0.1,a b\n-2,c\n");
        assert_eq!(String::from_utf8(t.to_dat()).unwrap(), "# x label\n0.1 \"a b\"\n-2 c\n");
    }

    #[test]
    fn numbers_round_trip() {
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(1.5e-13), "1.5e-13");
        assert_eq!(num(0.25), "0.25");
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.csv", b"one").unwrap();
        let p = write_atomic(dir.path(), "a.csv", b"two").unwrap();
        assert_eq!(fs::read(p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
