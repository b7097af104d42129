//! Reading and writing the tool's file formats.
//!
//! Inputs are named by a file path or by a `fixtures://NAME` URI that
//! addresses bundled reference data: the sixteen device records by id,
//! `P_FWGMR` and `P_ellip`, and `gap_table` (the synthetic
//! frequency-versus-gap table).

mod csv_io;
mod device;
mod reader;
mod tables;

use std::fs;
use std::path::{Path, PathBuf};

use resolveq_core::device::DeviceRecord;
use resolveq_core::fixtures;
use resolveq_core::gap::GapFrequencyTable;
use resolveq_core::spectral::ReflectionTrace;
use resolveq_core::MaterialLossVector;

pub use csv_io::{boundary_to_csv, grid_to_csv, table_to_csv, trace_from_csv, trace_to_csv};
pub use device::{device_from_json, device_to_json, device_to_value};
pub use tables::{
    frequencies_from_json, gap_table_from_json, gap_table_to_value, losses_from_json, losses_to_value,
    matrix_from_json, matrix_to_value, MatrixInput,
};

use crate::error::{Error, Result};

pub const FIXTURE_SCHEME: &str = "fixtures://";

pub const GAP_TABLE_FIXTURE: &str = "gap_table";

/// Bundled JSON files, by fixture name.
pub const BUNDLED: [(&str, &str); 18] = [
    ("F1", include_str!("../../fixtures/F1.json")),
    ("F1e", include_str!("../../fixtures/F1e.json")),
    ("F2", include_str!("../../fixtures/F2.json")),
    ("F2e", include_str!("../../fixtures/F2e.json")),
    ("F2ed", include_str!("../../fixtures/F2ed.json")),
    ("F5d", include_str!("../../fixtures/F5d.json")),
    ("F3", include_str!("../../fixtures/F3.json")),
    ("F3d", include_str!("../../fixtures/F3d.json")),
    ("F4", include_str!("../../fixtures/F4.json")),
    ("E1", include_str!("../../fixtures/E1.json")),
    ("E1e", include_str!("../../fixtures/E1e.json")),
    ("E2", include_str!("../../fixtures/E2.json")),
    ("E3eb", include_str!("../../fixtures/E3eb.json")),
    ("E4d", include_str!("../../fixtures/E4d.json")),
    ("E4eb", include_str!("../../fixtures/E4eb.json")),
    ("E4sp", include_str!("../../fixtures/E4sp.json")),
    ("P_FWGMR", include_str!("../../fixtures/P_FWGMR.json")),
    ("P_ellip", include_str!("../../fixtures/P_ellip.json")),
];

/// Where an input comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Input {
    Fixture(String),
    Path(PathBuf),
}

impl Input {
    pub fn parse(s: &str) -> Self {
        match s.strip_prefix(FIXTURE_SCHEME) {
            Some(name) => Input::Fixture(name.to_string()),
            None => Input::Path(PathBuf::from(s)),
        }
    }

    /// Name used in error messages and manifests.
    pub fn name(&self) -> String {
        match self {
            Input::Fixture(n) => format!("{FIXTURE_SCHEME}{n}"),
            Input::Path(p) => p.display().to_string(),
        }
    }

    /// Text of the input.
    pub fn read(&self) -> Result<String> {
        match self {
            Input::Fixture(n) => bundled(n)
                .map(str::to_string)
                .ok_or_else(|| unknown_fixture(n)),
            Input::Path(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e)),
        }
    }
}

impl std::fmt::Display for Input {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

fn unknown_fixture(name: &str) -> Error {
    let known: Vec<&str> = BUNDLED
        .iter()
        .map(|(n, _)| *n)
        .chain([GAP_TABLE_FIXTURE])
        .collect();
    Error::Usage(format!("unknown fixture `{name}`; known fixtures: {}", known.join(", ")))
}

pub fn load_device(input: &Input) -> Result<DeviceRecord> {
    device_from_json(&input.name(), &input.read()?)
}

pub fn save_device(path: &Path, record: &DeviceRecord) -> Result<()> {
    write_file(path, &device_to_json(record))
}

pub fn load_matrix(input: &Input) -> Result<MatrixInput> {
    matrix_from_json(&input.name(), &input.read()?)
}

pub fn load_losses(input: &Input) -> Result<MaterialLossVector> {
    losses_from_json(&input.name(), &input.read()?)
}

pub fn load_gap_table(input: &Input) -> Result<GapFrequencyTable> {
    match input {
        Input::Fixture(n) if n == GAP_TABLE_FIXTURE => Ok(fixtures::synthetic_gap_table()),
        _ => gap_table_from_json(&input.name(), &input.read()?),
    }
}

pub fn load_frequencies(input: &Input) -> Result<Vec<(String, f64)>> {
    frequencies_from_json(&input.name(), &input.read()?)
}

pub fn load_trace(input: &Input) -> Result<ReflectionTrace> {
    trace_from_csv(&input.name(), &input.read()?)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
