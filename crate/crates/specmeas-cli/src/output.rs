//! CSV with `#` metadata lines, and file/stdout emission.

use std::io::Write;
use std::path::Path;

use crate::CliError;

/// A CSV table. Numbers use Rust's shortest round-trip formatting, so equal
/// inputs give byte-identical files.
pub struct Csv {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<String>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { meta: Vec::new(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Numeric values are rewritten in scientific form when that is shorter.
    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let mut v = value.to_string();
        if let Ok(x) = v.parse::<f64>() {
            v = num(x);
        }
        self.meta.push((key.to_string(), v));
        self
    }

    pub fn row(&mut self, cells: &[f64]) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells.iter().map(|&v| num(v)).collect::<Vec<_>>().join(","));
    }

    /// A row whose leading cells are labels.
    pub fn row_labeled(&mut self, labels: &[&str], cells: &[f64]) {
        let mut parts: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        parts.extend(cells.iter().map(|&v| num(v)));
        self.rows.push(parts.join(","));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip text of `x`, in scientific form for tiny or huge values.
pub fn num(x: f64) -> String {
    let plain = x.to_string();
    let sci = format!("{x:e}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes to `out` when given, else to stdout.
pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                // A closed pipe (`| head`) is not an error for the caller.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io { path: "<stdout>".into(), source: e }),
                _ => Ok(()),
            }
        }
    }
}


pub fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}
