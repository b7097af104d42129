//! Device records in JSON.
//!
//! Every numeric field carries its unit in its name. Loading accepts any of
//! the listed spellings; saving always writes SI so that a saved record loads
//! back bit-for-bit.

use resolveq_core::device::{DeviceMode, DeviceRecord, Geometry, Reported};
use resolveq_core::fixtures::DEFAULT_EPS_Y;
use resolveq_core::{Channel, ModeMeasurement, ParticipationRow};
use serde_json::{json, Map, Value};

use super::reader::{parse, Obj, Units};
use crate::error::{Error, Result};

pub(crate) const FREQ: Units<'static> = &[("freq_hz", 1.0), ("freq_ghz", 1e9)];
pub(crate) const Q_INT: Units<'static> = &[("q_int", 1.0), ("q_int_e6", 1e6)];
pub(crate) const Q_C: Units<'static> = &[("q_c", 1.0), ("q_c_e6", 1e6)];
pub(crate) const GAP: Units<'static> = &[("gap_m", 1.0), ("gap_um", 1e-6)];
pub(crate) const INV_G: Units<'static> = &[("inv_g_per_ohm", 1.0)];
pub(crate) const P_MA: Units<'static> = &[("p_ma", 1.0)];
pub(crate) const Y_SEAM: Units<'static> = &[("y_seam_per_ohm_m", 1.0)];

/// Unit spellings of each material-loss channel, SI first.
pub(crate) const LOSS_UNITS: [Units<'static>; 3] = [
    &[("r_s_ohm", 1.0), ("r_s_uohm", 1e-6), ("r_s_nohm", 1e-9)],
    &[("tan_delta", 1.0)],
    &[("r_seam_ohm_m", 1.0), ("r_seam_uohm_m", 1e-6), ("r_seam_nohm_m", 1e-9)],
];

pub(crate) fn si_key(channel: Channel) -> &'static str {
    LOSS_UNITS[channel.index()][0].0
}

/// Validation failures of the core types, located at `obj`.
pub(crate) fn located<T>(obj: &Obj<'_>, source: &str, r: resolveq_core::Result<T>) -> Result<T> {
    r.map_err(|e| Error::schema(source, obj.path(), e.to_string()))
}

pub(crate) fn participation(o: &Obj<'_>, source: &str) -> Result<ParticipationRow> {
    let row = ParticipationRow::new(
        o.quantity("inv_g", INV_G)?,
        o.quantity("p_ma", P_MA)?,
        o.quantity("y_seam", Y_SEAM)?,
    );
    located(o, source, row)
}

fn mode(o: &Obj<'_>, source: &str) -> Result<DeviceMode> {
    let label = o.str("label")?;
    let eps = o.opt_f64("eps_y")?.unwrap_or(DEFAULT_EPS_Y);
    let mut m = located(
        o,
        source,
        ModeMeasurement::new(label, o.quantity("frequency", FREQ)?, o.quantity("q_int", Q_INT)?, eps),
    )?;
    if let Some(qc) = o.opt_quantity("q_c", Q_C)? {
        m = located(o, source, m.with_coupling_q(qc))?;
    }
    if let Some(n) = o.opt_f64("photon_number")? {
        m = located(o, source, m.with_photon_number(n))?;
    }
    let participation = participation(o, source)?;
    Ok(DeviceMode {
        measurement: m,
        participation,
    })
}

fn reported(o: &Obj<'_>) -> Result<[Reported; 3]> {
    let mut out = [Reported::Bound(0.0); 3];
    for c in Channel::ALL {
        let units = LOSS_UNITS[c.index()];
        let present: Vec<_> = units.iter().filter(|(k, _)| o.has(k)).collect();
        let (key, factor) = match present.as_slice() {
            [one] => **one,
            [] => return Err(o.error(c.name(), "missing reported value for this channel")),
            _ => return Err(o.error(c.name(), "channel given in more than one unit")),
        };
        let entry = o.obj(key)?;
        out[c.index()] = if entry.has("bound") {
            Reported::Bound(entry.f64("bound")? * factor)
        } else {
            Reported::Resolved {
                value: entry.f64("value")? * factor,
                sigma: entry.f64("sigma")? * factor,
            }
        };
        entry.finish()?;
    }
    Ok(out)
}

pub(crate) fn device_from_value(source: &str, value: &Value) -> Result<DeviceRecord> {
    let root = Obj::root(source, value)?;
    let id = root.str("device_id")?;
    let geometry: Geometry = root
        .str("geometry")?
        .parse()
        .map_err(|e: resolveq_core::Error| root.error("geometry", e.to_string()))?;
    let materials = if root.has("materials") {
        root.strings("materials")?
    } else {
        Vec::new()
    };
    let gap = root.opt_quantity("gap", GAP)?;
    let modes = root
        .objects("modes")?
        .into_iter()
        .map(|o| {
            let m = mode(&o, source)?;
            o.finish()?;
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let reported = match root.opt_obj("reported")? {
        Some(o) => {
            let r = reported(&o)?;
            o.finish()?;
            Some(r)
        }
        None => None,
    };
    let record = DeviceRecord::new(id, geometry, materials, gap, modes, reported)
        .map_err(|e| Error::schema(source, "$", e.to_string()))?;
    root.finish()?;
    Ok(record)
}

/// Parses a device record from JSON text; `source` names the input in errors.
pub fn device_from_json(source: &str, text: &str) -> Result<DeviceRecord> {
    device_from_value(source, &parse(source, text)?)
}

/// SI JSON of a device record.
pub fn device_to_value(record: &DeviceRecord) -> Value {
    let mut root = Map::new();
    root.insert("device_id".into(), record.device_id().into());
    root.insert("geometry".into(), record.geometry().name().into());
    root.insert("materials".into(), record.materials().to_vec().into());
    if let Some(g) = record.gap() {
        root.insert("gap_m".into(), g.into());
    }
    let modes: Vec<Value> = record
        .modes()
        .iter()
        .map(|m| {
            let mm = &m.measurement;
            let mut o = Map::new();
            o.insert("label".into(), mm.label().into());
            o.insert("freq_hz".into(), mm.frequency().into());
            o.insert("q_int".into(), mm.q_int().into());
            if let Some(qc) = mm.q_c() {
                o.insert("q_c".into(), qc.into());
            }
            o.insert("eps_y".into(), mm.q_int_rel_sigma().into());
            if let Some(n) = mm.photon_number() {
                o.insert("photon_number".into(), n.into());
            }
            o.insert("inv_g_per_ohm".into(), m.participation.inv_g().into());
            o.insert("p_ma".into(), m.participation.p_ma().into());
            o.insert("y_seam_per_ohm_m".into(), m.participation.y_seam().into());
            Value::Object(o)
        })
        .collect();
    root.insert("modes".into(), modes.into());
    if let Some(rep) = record.reported() {
        let mut o = Map::new();
        for c in Channel::ALL {
            let v = match rep[c.index()] {
                Reported::Resolved { value, sigma } => json!({ "value": value, "sigma": sigma }),
                Reported::Bound(b) => json!({ "bound": b }),
            };
            o.insert(si_key(c).into(), v);
        }
        root.insert("reported".into(), Value::Object(o));
    }
    Value::Object(root)
}

pub fn device_to_json(record: &DeviceRecord) -> String {
    let mut s = serde_json::to_string_pretty(&device_to_value(record)).expect("JSON values serialize");
    s.push('\n');
    s
}
