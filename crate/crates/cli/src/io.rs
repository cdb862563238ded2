//! CSV readers and writers; '.' decimals, '\n' line endings, header row.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ndarray::Array2;
use volmellin::{ReplicationRecord, SectionTrace, SelectionDiagnostics};

use crate::failure::Failure;

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, Failure> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(create(path)?))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), Failure> {
    w.flush().map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

/// Reads two columns of a headed CSV as positive observation pairs.
pub fn read_observations(path: &Path, columns: &[String; 2]) -> Result<Vec<[f64; 2]>, Failure> {
    let file = File::open(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 2];
    for (slot, name) in idx.iter_mut().zip(columns) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| {
            Failure::validation(format!("{}: no column '{name}' in header {:?}", path.display(), headers))
        })?;
    }
    let mut rows = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Failure::validation(format!("{}: row {}: {e}", path.display(), row + 1)))?;
        let mut pair = [0.0; 2];
        for (l, &i) in idx.iter().enumerate() {
            let field = record.get(i).unwrap_or("");
            pair[l] = field.parse().map_err(|_| {
                Failure::validation(format!("{}: row {}: '{field}' in column '{}' is not a number", path.display(), row + 1, columns[l]))
            })?;
        }
        rows.push(pair);
    }
    Ok(rows)
}

/// Columns `x,y` followed by one column per named surface; `x` varies slowest.
pub fn write_surface(path: &Path, xs: &[f64], ys: &[f64], surfaces: &[(&str, &Array2<f64>)]) -> Result<(), Failure> {
    let mut w = writer(path)?;
    let mut header = vec!["x", "y"];
    header.extend(surfaces.iter().map(|(name, _)| *name));
    w.write_record(&header)?;
    for (p, &x) in xs.iter().enumerate() {
        for (q, &y) in ys.iter().enumerate() {
            let mut rec = vec![fmt_f64(x), fmt_f64(y)];
            rec.extend(surfaces.iter().map(|(_, s)| fmt_f64(s[[p, q]])));
            w.write_record(&rec)?;
        }
    }
    finish(w, path)
}

pub fn write_diagnostics(path: &Path, diag: &SelectionDiagnostics) -> Result<(), Failure> {
    let mut w = writer(path)?;
    w.write_record(["k1", "k2", "norm_sq", "pen", "contrast", "chosen"])?;
    for (i, c) in diag.candidates.iter().enumerate() {
        w.write_record([
            fmt_f64(c.k.k1()),
            fmt_f64(c.k.k2()),
            fmt_f64(c.norm_sq),
            fmt_f64(c.penalty),
            fmt_f64(c.contrast),
            u8::from(i == diag.chosen).to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn write_summary(path: &Path, records: &[ReplicationRecord]) -> Result<(), Failure> {
    let mut w = writer(path)?;
    w.write_record(["replication", "k1_hat", "k2_hat", "ise_noisy", "ise_oracle"])?;
    for r in records {
        let k = r.noisy.cutoff;
        w.write_record([
            r.index.to_string(),
            fmt_f64(k.k1()),
            fmt_f64(k.k2()),
            fmt_f64(r.noisy.ise),
            r.oracle.as_ref().map(|o| fmt_f64(o.ise)).unwrap_or_default(),
        ])?;
    }
    finish(w, path)
}

pub fn write_section(path: &Path, estimate: &SectionTrace, truth: &SectionTrace) -> Result<(), Failure> {
    let mut w = writer(path)?;
    w.write_record(["coordinate", "estimate_median", "truth"])?;
    for ((c, e), t) in estimate.coordinates.iter().zip(&estimate.values).zip(&truth.values) {
        w.write_record([fmt_f64(*c), fmt_f64(*e), fmt_f64(*t)])?;
    }
    finish(w, path)
}
