//! Deterministic report and CSV writers. Floats are written with the
//! shortest round-trip representation, so identical inputs give identical
//! bytes.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub struct Csv {
    buf: String,
}

impl Csv {
    /// Start a CSV with a `#`-prefixed header comment documenting columns.
    pub fn new(comment: &str, columns: &[&str]) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "# {comment}");
        let _ = writeln!(buf, "{}", columns.join(","));
        Csv { buf }
    }

    pub fn row(&mut self, values: &[f64]) {
        let mut first = true;
        for v in values {
            if !first {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{v}");
            first = false;
        }
        self.buf.push('\n');
    }

    pub fn row_mixed(&mut self, values: &[CsvValue<'_>]) {
        let mut first = true;
        for v in values {
            if !first {
                self.buf.push(',');
            }
            match v {
                CsvValue::Float(x) => {
                    let _ = write!(self.buf, "{x}");
                }
                CsvValue::Int(x) => {
                    let _ = write!(self.buf, "{x}");
                }
                CsvValue::Str(s) => {
                    let _ = write!(self.buf, "{s}");
                }
            }
            first = false;
        }
        self.buf.push('\n');
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.buf.as_bytes())
    }
}

pub enum CsvValue<'a> {
    Float(f64),
    Int(i64),
    Str(&'a str),
}

/// Key = value report block.
pub struct Report {
    buf: String,
}

impl Report {
    pub fn new(title: &str) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "# {title}");
        Report { buf }
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.buf, "{key} = {value}");
    }

    pub fn kv_f(&mut self, key: &str, value: f64) {
        let _ = writeln!(self.buf, "{key} = {value}");
    }

    pub fn section(&mut self, name: &str) {
        let _ = writeln!(self.buf, "\n[{name}]");
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.buf.as_bytes())
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }
}
