//! Report emission: CSV files with a provenance header comment, and small
//! JSON documents. All numeric formatting goes through `Display`, whose
//! shortest-round-trip output is deterministic and parses back to the
//! identical f64.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use crate::config::RunConfig;
use crate::CliError;

pub struct ReportWriter {
    out_dir: PathBuf,
    header_comment: String,
}

impl ReportWriter {
    pub fn new(cfg: &RunConfig) -> Result<ReportWriter, CliError> {
        std::fs::create_dir_all(&cfg.out_dir)
            .map_err(|e| CliError::Data(format!("cannot create {:?}: {e}", cfg.out_dir)))?;
        Ok(ReportWriter {
            out_dir: cfg.out_dir.clone(),
            header_comment: format!(
                "# limithit {} config={:016x}",
                env!("CARGO_PKG_VERSION"),
                cfg.hash()
            ),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes a CSV: provenance comment, column header, then rows.
    pub fn csv<I: IntoIterator<Item = String>>(
        &self,
        name: &str,
        columns: &str,
        rows: I,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut w = BufWriter::new(
            File::create(&path).map_err(|e| CliError::Data(format!("cannot write {path:?}: {e}")))?,
        );
        let io = |e: std::io::Error| CliError::Data(format!("cannot write {path:?}: {e}"));
        writeln!(w, "{}", self.header_comment).map_err(io)?;
        writeln!(w, "{columns}").map_err(io)?;
        for row in rows {
            writeln!(w, "{row}").map_err(io)?;
        }
        w.flush().map_err(io)?;
        Ok(path)
    }

    /// Writes a JSON document (compact, stable field order from the type).
    pub fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let file = File::create(&path)
            .map_err(|e| CliError::Data(format!("cannot write {path:?}: {e}")))?;
        serde_json::to_writer_pretty(BufWriter::new(file), value)
            .map_err(|e| CliError::Data(format!("cannot write {path:?}: {e}")))?;
        Ok(path)
    }
}

/// Empty cell for absent values.
pub fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
