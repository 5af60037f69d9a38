//! CSV assembly with a metadata header block and optional companion gnuplot
//! scripts. Output is fully deterministic: no timestamps, fixed float
//! formatting at full double precision, rows appended in grid order only.

use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("non-finite value for column '{column}' in row {row}")]
    NonFinite { column: String, row: usize },
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Full double precision, 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// RFC-4180-style quoting: fields containing commas, quotes or newlines are
/// quoted, with embedded quotes doubled.
fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// One CSV document: `# key: value` metadata lines, a header row, data rows.
#[derive(Debug, Clone, Default)]
pub struct CsvDoc {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn new(columns: &[&str]) -> Self {
        CsvDoc {
            metadata: Vec::new(),
            header: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.push((key.to_string(), value.into()));
    }

    /// Append a row; every numeric cell must be finite.
    pub fn push_row(&mut self, cells: Vec<Cell>) -> Result<(), ReportError> {
        let row_idx = self.rows.len();
        let mut row = Vec::with_capacity(cells.len());
        for (i, cell) in cells.into_iter().enumerate() {
            match cell {
                Cell::Float(x) => {
                    if !x.is_finite() {
                        return Err(ReportError::NonFinite {
                            column: self
                                .header
                                .get(i)
                                .cloned()
                                .unwrap_or_else(|| format!("#{i}")),
                            row: row_idx,
                        });
                    }
                    row.push(fmt_f64(x));
                }
                Cell::Int(v) => row.push(v.to_string()),
                Cell::Str(s) => row.push(s),
                Cell::Empty => row.push(String::new()),
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(
            out,
            "{}",
            self.header
                .iter()
                .map(|h| quote(h))
                .collect::<Vec<_>>()
                .join(",")
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{}",
                row.iter().map(|f| quote(f)).collect::<Vec<_>>().join(",")
            );
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<(), ReportError> {
        std::fs::write(path, self.render()).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Typed cell so numeric output is validated and formatted uniformly.
#[derive(Debug, Clone)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Str(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

/// Companion gnuplot script next to a CSV; plotting is never required for
/// any result, this is a convenience only.
pub fn write_plot_script(
    csv_path: &Path,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    plots: &[(usize, usize, &str)],
) -> Result<(), ReportError> {
    let script_path = csv_path.with_extension("gnuplot");
    let csv_name = csv_path
        .file_name()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_default();
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    let _ = writeln!(s, "set grid");
    let plot_parts: Vec<String> = plots
        .iter()
        .map(|&(x, y, label)| format!("'{csv_name}' using {x}:{y} with linespoints title '{label}'"))
        .collect();
    let _ = writeln!(s, "plot {}", plot_parts.join(", \\\n     "));
    let _ = writeln!(s, "pause -1 'press enter to close'");
    std::fs::write(&script_path, s).map_err(|source| ReportError::Io {
        path: script_path.display().to_string(),
        source,
    })
}
