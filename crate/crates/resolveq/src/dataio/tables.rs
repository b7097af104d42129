//! Participation matrices, loss vectors, frequency-versus-gap tables and
//! measured mode frequencies in JSON.

use resolveq_core::fixtures::DEFAULT_EPS_Y;
use resolveq_core::gap::{GapCurve, GapFrequencyTable};
use resolveq_core::{Channel, MaterialLossVector, ParticipationMatrix};
use serde_json::{json, Map, Value};

use super::device::{device_from_value, located, participation, si_key, FREQ, GAP, LOSS_UNITS};
use super::reader::{parse, Obj};
use crate::error::{Error, Result};

/// A participation matrix with the per-mode relative loss-rate uncertainty
/// that accompanies it.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixInput {
    pub name: Option<String>,
    pub matrix: ParticipationMatrix,
    pub eps_y: Vec<f64>,
}

impl MatrixInput {
    pub fn new(name: Option<String>, matrix: ParticipationMatrix) -> Self {
        let eps_y = vec![DEFAULT_EPS_Y; matrix.len()];
        Self { name, matrix, eps_y }
    }

    /// Applies a global value and then per-mode overrides.
    pub fn with_eps_y(mut self, global: Option<f64>, per_mode: &[(String, f64)]) -> Result<Self> {
        if let Some(g) = global {
            self.eps_y.iter_mut().for_each(|e| *e = g);
        }
        for (label, v) in per_mode {
            let i = self
                .matrix
                .labels()
                .position(|l| l == label)
                .ok_or_else(|| Error::Usage(format!("--eps-y names unknown mode `{label}`")))?;
            self.eps_y[i] = *v;
        }
        Ok(self)
    }
}

/// Reads either a participation-matrix document or a device record.
pub fn matrix_from_json(source: &str, text: &str) -> Result<MatrixInput> {
    let value = parse(source, text)?;
    if value.get("device_id").is_some() {
        let device = device_from_value(source, &value)?;
        return Ok(MatrixInput {
            name: Some(device.device_id().to_string()),
            matrix: device.participation_matrix(),
            eps_y: device.measurements().iter().map(|m| m.q_int_rel_sigma()).collect(),
        });
    }
    let root = Obj::root(source, &value)?;
    let name = if root.has("name") {
        Some(root.str("name")?.to_string())
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut eps_y = Vec::new();
    for o in root.objects("modes")? {
        let label = o.str("label")?.to_string();
        rows.push((label, participation(&o, source)?));
        eps_y.push(o.opt_f64("eps_y")?.unwrap_or(DEFAULT_EPS_Y));
        o.finish()?;
    }
    let matrix = located(&root, source, ParticipationMatrix::new(rows))?;
    root.finish()?;
    Ok(MatrixInput { name, matrix, eps_y })
}

pub fn matrix_to_value(input: &MatrixInput) -> Value {
    let modes: Vec<Value> = input
        .matrix
        .rows()
        .iter()
        .zip(&input.eps_y)
        .map(|((label, row), eps)| {
            json!({
                "label": label,
                "inv_g_per_ohm": row.inv_g(),
                "p_ma": row.p_ma(),
                "y_seam_per_ohm_m": row.y_seam(),
                "eps_y": eps,
            })
        })
        .collect();
    let mut root = Map::new();
    if let Some(n) = &input.name {
        root.insert("name".into(), n.clone().into());
    }
    root.insert("modes".into(), modes.into());
    Value::Object(root)
}

/// Material losses, each channel under one of its unit-tagged names. Missing
/// channels are zero.
pub fn losses_from_json(source: &str, text: &str) -> Result<MaterialLossVector> {
    let value = parse(source, text)?;
    let root = Obj::root(source, &value)?;
    let mut v = [0.0; 3];
    for c in Channel::ALL {
        v[c.index()] = root.opt_quantity(c.name(), LOSS_UNITS[c.index()])?.unwrap_or(0.0);
    }
    let x = located(&root, source, MaterialLossVector::from_array(v))?;
    root.finish()?;
    Ok(x)
}

pub fn losses_to_value(x: &MaterialLossVector) -> Value {
    let mut root = Map::new();
    for c in Channel::ALL {
        root.insert(si_key(c).into(), x.get(c).into());
    }
    Value::Object(root)
}

pub fn gap_table_from_json(source: &str, text: &str) -> Result<GapFrequencyTable> {
    let value = parse(source, text)?;
    let root = Obj::root(source, &value)?;
    let mut curves = Vec::new();
    for c in root.objects("curves")? {
        let label = c.str("label")?;
        let mut samples = Vec::new();
        for s in c.objects("samples")? {
            samples.push((s.quantity("gap", GAP)?, s.quantity("frequency", FREQ)?));
            s.finish()?;
        }
        curves.push(located(&c, source, GapCurve::new(label, samples))?);
        c.finish()?;
    }
    let table = located(&root, source, GapFrequencyTable::new(curves))?;
    root.finish()?;
    Ok(table)
}

pub fn gap_table_to_value(table: &GapFrequencyTable) -> Value {
    let curves: Vec<Value> = table
        .curves()
        .iter()
        .map(|c| {
            let samples: Vec<Value> = c.samples().map(|(g, f)| json!({ "gap_m": g, "freq_hz": f })).collect();
            json!({ "label": c.label(), "samples": samples })
        })
        .collect();
    json!({ "curves": curves })
}

/// Measured frequency of each named mode.
pub fn frequencies_from_json(source: &str, text: &str) -> Result<Vec<(String, f64)>> {
    let value = parse(source, text)?;
    let root = Obj::root(source, &value)?;
    let mut out = Vec::new();
    for o in root.objects("modes")? {
        let label = o.str("label")?.to_string();
        let f = o.quantity("frequency", FREQ)?;
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::schema(source, o.path(), "frequency must be finite and positive"));
        }
        out.push((label, f));
        o.finish()?;
    }
    root.finish()?;
    Ok(out)
}
