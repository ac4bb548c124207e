//! Versioned CSV artifacts. Numbers use Rust's shortest round-trip
//! formatting so repeated runs are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::CliError;

pub const SCHEMA_LINE: &str = "# stackgame-csv v1";

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub struct CsvFile {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvFile {
    pub fn create(dir: &Path, name: &str, header: &[String]) -> Result<Self, CliError> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{SCHEMA_LINE}").map_err(|e| CliError::io(&path, e))?;
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        Ok(self.writer.write_record(fields)?)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer
            .flush()
            .map_err(|e| CliError::io("csv output", e))
    }
}

/// `prefix_1, ..., prefix_n`.
pub fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}_{k}"))
}

pub fn strings<'a>(header: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    header.into_iter().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(70.0), "70");
        assert_eq!(num(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn writes_schema_line_first() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = CsvFile::create(dir.path(), "x.csv", &strings(["a", "b"])).unwrap();
        f.row(&[num(1.5), num(-2.0)]).unwrap();
        f.finish().unwrap();
        let text = std::fs::read_to_string(dir.path().join("x.csv")).unwrap();
        assert_eq!(text, "# stackgame-csv v1\na,b\n1.5,-2\n");
    }
}
