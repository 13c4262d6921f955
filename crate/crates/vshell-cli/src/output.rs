//! CSV writers with a reproducible metadata line.
//!
//! Every CSV starts with `# vshell <version> config=<hash> seed=<seed>`
//! followed by a header row. Floats are written in shortest round-trip form,
//! so reruns with the same config and seed are bit-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::CliError;

pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(
        path: &Path,
        config_hash: &str,
        seed: u64,
        header: &[&str],
    ) -> Result<Self, CliError> {
        let file = File::create(path)?;
        let mut out = BufWriter::new(file);
        writeln!(
            out,
            "# vshell {} config={} seed={}",
            env!("CARGO_PKG_VERSION"),
            config_hash,
            seed
        )?;
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, fields: &[CsvField]) -> Result<(), CliError> {
        let mut first = true;
        for f in fields {
            if !first {
                write!(self.out, ",")?;
            }
            first = false;
            match f {
                CsvField::F(v) => write!(self.out, "{v}")?,
                CsvField::I(v) => write!(self.out, "{v}")?,
                CsvField::S(v) => write!(self.out, "{v}")?,
            }
        }
        writeln!(self.out)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush()?;
        Ok(())
    }
}

pub enum CsvField {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for CsvField {
    fn from(v: f64) -> Self {
        CsvField::F(v)
    }
}

impl From<i64> for CsvField {
    fn from(v: i64) -> Self {
        CsvField::I(v)
    }
}

impl From<&str> for CsvField {
    fn from(v: &str) -> Self {
        CsvField::S(v.to_string())
    }
}

impl From<String> for CsvField {
    fn from(v: String) -> Self {
        CsvField::S(v)
    }
}
