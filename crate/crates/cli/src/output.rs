//! CSV tables with `#` metadata lines before the header and after the rows.

use std::io::Write;
use std::path::Path;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // shortest round-trip form, exponent for very small or large values
            Cell::Num(v) => format!("{v:?}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub meta: Vec<String>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub footer: Vec<String>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Every numeric cell must be finite; footer values are checked by the
    /// caller before formatting.
    pub fn check_finite(&self) -> Result<(), CliError> {
        for (i, row) in self.rows.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if let Cell::Num(v) = c {
                    if !v.is_finite() {
                        return Err(CliError::Numerical(format!(
                            "non-finite value {v} in row {i}, column `{}`",
                            self.header[j]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_to(&self, w: &mut dyn Write) -> Result<(), CliError> {
        self.check_finite()?;
        let io = |e: std::io::Error| CliError::Io(e.to_string());
        for m in &self.meta {
            for line in m.lines() {
                writeln!(w, "# {line}").map_err(io)?;
            }
        }
        {
            let mut csv = csv::WriterBuilder::new().from_writer(&mut *w);
            let csv_err = |e: csv::Error| CliError::Io(e.to_string());
            csv.write_record(&self.header).map_err(csv_err)?;
            for row in &self.rows {
                csv.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
            }
            csv.flush().map_err(io)?;
        }
        for f in &self.footer {
            writeln!(w, "# {f}").map_err(io)?;
        }
        Ok(())
    }

    /// Writes to `path`, or standard output when `None`.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        self.check_finite()?;
        match path {
            Some(p) => {
                let mut buf = Vec::new();
                self.write_to(&mut buf)?;
                std::fs::write(p, buf).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
            }
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                self.write_to(&mut lock)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let mut t = Table::new(vec!["a", "b"]);
        t.meta.push("x = 1\ny = 2".into());
        t.push(vec![1.5.into(), "p,q".into()]);
        t.push(vec![Cell::Int(3), Cell::Empty]);
        t.footer.push("done".into());
        let mut out = Vec::new();
        t.write_to(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "# x = 1\n# y = 2\na,b\n1.5,\"p,q\"\n3,\n# done\n");
    }

    #[test]
    fn non_finite_rejected() {
        let mut t = Table::new(vec!["a"]);
        t.push(vec![f64::NAN.into()]);
        assert!(matches!(t.write_to(&mut Vec::new()), Err(CliError::Numerical(_))));
    }
}
