//! CSV for reflection traces, sensitivity grids and plain tables.

use num_complex::Complex64;
use resolveq_core::sensitivity::SensitivityGrid;
use resolveq_core::spectral::ReflectionTrace;

use super::device::si_key;
use crate::error::{Error, Result};
use crate::report::cell;

const FREQ_COLUMNS: [(&str, f64); 2] = [("freq_hz", 1.0), ("freq_ghz", 1e9)];
const RE_COLUMNS: [&str; 2] = ["s11_re", "re"];
const IM_COLUMNS: [&str; 2] = ["s11_im", "im"];

fn find_column(source: &str, headers: &csv::StringRecord, names: &[&str]) -> Result<usize> {
    let found: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| names.contains(&h.trim()))
        .map(|(i, _)| i)
        .collect();
    match found.as_slice() {
        [i] => Ok(*i),
        [] => Err(Error::schema(
            source,
            "header",
            format!("missing column, expected one of {}", names.join(", ")),
        )),
        _ => Err(Error::schema(source, "header", format!("more than one of {}", names.join(", ")))),
    }
}

/// Reads a trace with a header naming the frequency column (`freq_hz` or
/// `freq_ghz`) and the real and imaginary parts (`s11_re`/`s11_im` or
/// `re`/`im`). Other columns are ignored.
pub fn trace_from_csv(source: &str, text: &str) -> Result<ReflectionTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::schema(source, "header", e.to_string()))?
        .clone();
    let names: Vec<&str> = FREQ_COLUMNS.iter().map(|(n, _)| *n).collect();
    let fcol = find_column(source, &headers, &names)?;
    let factor = FREQ_COLUMNS
        .iter()
        .find(|(n, _)| *n == headers[fcol].trim())
        .map(|(_, f)| *f)
        .expect("column was matched");
    let recol = find_column(source, &headers, &RE_COLUMNS)?;
    let imcol = find_column(source, &headers, &IM_COLUMNS)?;

    let mut freqs = Vec::new();
    let mut s11 = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::schema(source, format!("line {line}"), e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = |c: usize, name: &str| -> Result<f64> {
            let raw = rec
                .get(c)
                .ok_or_else(|| Error::schema(source, format!("line {line}"), format!("missing `{name}`")))?;
            raw.parse::<f64>()
                .map_err(|_| Error::schema(source, format!("line {line}, column {name}"), format!("`{raw}` is not a number")))
        };
        freqs.push(cell(fcol, &headers[fcol])? * factor);
        s11.push(Complex64::new(cell(recol, &headers[recol])?, cell(imcol, &headers[imcol])?));
    }
    ReflectionTrace::new(freqs, s11).map_err(|e| Error::schema(source, "$", e.to_string()))
}

pub fn trace_to_csv(trace: &ReflectionTrace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["freq_hz", "s11_re", "s11_im"]).expect("in-memory write");
    for (f, z) in trace.frequencies().iter().zip(trace.s11()) {
        w.write_record([cell(*f), cell(z.re), cell(z.im)])
            .expect("in-memory write");
    }
    into_string(w)
}

/// Long-format grid: one row per node with both axis coordinates and
/// `sigma/x` of the channel under test.
pub fn grid_to_csv(grid: &SensitivityGrid) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let a0 = si_key(grid.spec.axes[0].channel);
    let a1 = si_key(grid.spec.axes[1].channel);
    let v = format!("rel_sigma_{}", grid.spec.channel_under_test.name());
    w.write_record([a0, a1, v.as_str()]).expect("in-memory write");
    for (i, x0) in grid.axis_values[0].iter().enumerate() {
        for (j, x1) in grid.axis_values[1].iter().enumerate() {
            w.write_record([cell(*x0), cell(*x1), cell(grid.values[i][j])])
                .expect("in-memory write");
        }
    }
    into_string(w)
}

/// Points of the `sigma/x = 1` contour.
pub fn boundary_to_csv(grid: &SensitivityGrid) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([si_key(grid.spec.axes[0].channel), si_key(grid.spec.axes[1].channel)])
        .expect("in-memory write");
    for [x0, x1] in &grid.boundary {
        w.write_record([cell(*x0), cell(*x1)]).expect("in-memory write");
    }
    into_string(w)
}

/// A header and rows of preformatted cells.
pub fn table_to_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 cells")
}
