//! Column traces and their CSV form.
//!
//! Layout: optional `# key: value` metadata lines, a header row, then one
//! row per sample. Numbers are written with 17 significant digits so a
//! read after a write reproduces every bit; NaN is written as an empty cell.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowTrace {
    pub metadata: Vec<(String, String)>,
    columns: Vec<String>,
    data: Vec<Vec<f64>>,
}

impl FlowTrace {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            data: vec![Vec::new(); columns.len()],
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|i| self.data[i].as_slice())
    }

    /// Appends a row; a `t` column must stay strictly increasing.
    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch { expected: self.columns.len(), found: row.len() });
        }
        if let Some(ti) = self.columns.iter().position(|c| c == "t") {
            if let Some(&last) = self.data[ti].last() {
                if !(row[ti] > last) {
                    return Err(Error::domain(format!("t must increase strictly: {} after {last}", row[ti])));
                }
            }
        }
        for (col, v) in self.data.iter_mut().zip(row) {
            col.push(*v);
        }
        Ok(())
    }

    /// Exact comparison that treats NaN cells as equal.
    pub fn same_values(&self, other: &FlowTrace) -> bool {
        self.columns == other.columns
            && self.data.iter().zip(&other.data).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()))
            })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            if k.contains(['\n', ':']) || v.contains('\n') {
                return Err(Error::domain(format!("metadata entry {k:?} cannot be written")));
            }
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for i in 0..self.len() {
            w.write_record(self.data.iter().map(|c| format_cell(c[i]))).map_err(csv_err)?;
        }
        let body = w.into_inner().map_err(|e| Error::domain(e.to_string()))?;
        out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut skipped = 0;
        for line in text.lines() {
            let Some(rest) = line.strip_prefix('#') else { break };
            let (k, v) = rest
                .split_once(':')
                .ok_or_else(|| Error::Parse { line: skipped + 1, msg: "metadata line without ':'".into() })?;
            metadata.push((k.trim().to_string(), v.strip_prefix(' ').unwrap_or(v).to_string()));
            skipped += 1;
        }
        let body: String = text.lines().skip(skipped).map(|l| format!("{l}\n")).collect();
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let header = r.headers().map_err(|e| Error::Parse { line: skipped + 1, msg: e.to_string() })?;
        let columns: Vec<String> = header.iter().map(str::to_string).collect();
        if columns.is_empty() || columns.iter().all(String::is_empty) {
            return Err(Error::Parse { line: skipped + 1, msg: "missing header".into() });
        }
        let mut trace = FlowTrace { metadata, data: vec![Vec::new(); columns.len()], columns };
        for (i, rec) in r.records().enumerate() {
            let line = skipped + i + 2;
            let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            let row: Vec<f64> = rec
                .iter()
                .map(|cell| parse_cell(cell).map_err(|msg| Error::Parse { line, msg }))
                .collect::<Result<_>>()?;
            trace.push(&row).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        }
        Ok(trace)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::domain(format!("csv: {e}"))
}

fn format_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_cell(cell: &str) -> std::result::Result<f64, String> {
    if cell.is_empty() {
        return Ok(f64::NAN);
    }
    cell.parse::<f64>().map_err(|e| format!("bad number {cell:?}: {e}"))
}

/// Writes to a temporary file in the target directory, then renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_trace(trace: &FlowTrace, path: &Path) -> Result<()> {
    write_atomic(path, trace.to_csv()?.as_bytes())
}

pub fn read_trace(path: &Path) -> Result<FlowTrace> {
    FlowTrace::from_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        let t = FlowTrace::new(&["t", "u"]);
        assert_eq!(t.to_csv().unwrap(), "t,u\n");
        let back = FlowTrace::from_csv("t,u\n").unwrap();
        assert!(back.is_empty());
        assert_eq!(back.columns(), ["t", "u"]);
    }

    #[test]
    fn nan_is_an_empty_cell() {
        let mut t = FlowTrace::new(&["t", "psi"]);
        t.push(&[0.0, f64::NAN]).unwrap();
        t.push(&[0.5, 1.25]).unwrap();
        let s = t.to_csv().unwrap();
        assert_eq!(s.lines().nth(1).unwrap(), "0.0000000000000000e0,");
        let back = FlowTrace::from_csv(&s).unwrap();
        assert!(back.column("psi").unwrap()[0].is_nan());
        assert!(back.same_values(&t));
    }

    #[test]
    fn metadata_survives() {
        let mut t = FlowTrace::new(&["t"]).with_meta("label", "berger(1,2)").with_meta("note", "a: b");
        t.push(&[1.0]).unwrap();
        let back = FlowTrace::from_csv(&t.to_csv().unwrap()).unwrap();
        assert_eq!(back.meta("label"), Some("berger(1,2)"));
        assert_eq!(back.meta("note"), Some("a: b"));
    }

    #[test]
    fn rejects_bad_rows() {
        let mut t = FlowTrace::new(&["t", "u"]);
        assert!(t.push(&[0.0]).is_err());
        t.push(&[1.0, 0.0]).unwrap();
        assert!(t.push(&[1.0, 0.0]).is_err());
        match FlowTrace::from_csv("t,u\n0,1\n1,x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match FlowTrace::from_csv("# k: v\nt,u\n0,1\n0,2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn atomic_write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("trace.csv");
        let mut t = FlowTrace::new(&["t", "u"]).with_meta("k", 1);
        t.push(&[0.1, 1.0 / 3.0]).unwrap();
        write_trace(&t, &path).unwrap();
        let back = read_trace(&path).unwrap();
        assert!(back.same_values(&t));
        assert_eq!(back.metadata, t.metadata);
    }
}
