//! A measured multi-mode device: its modes, their participation rows and,
//! optionally, previously reported loss factors.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::loss_model::{ModeMeasurement, ParticipationMatrix, ParticipationRow, CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// Forky whispering-gallery-mode resonator.
    Fwgmr,
    Ellipsoidal,
    Other,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::Fwgmr => "fwgmr",
            Geometry::Ellipsoidal => "ellipsoidal",
            Geometry::Other => "other",
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fwgmr" => Ok(Geometry::Fwgmr),
            "ellipsoidal" => Ok(Geometry::Ellipsoidal),
            "other" => Ok(Geometry::Other),
            _ => Err(Error::invalid("geometry", alloc::format!("unknown geometry `{s}`"))),
        }
    }
}

/// A previously reported loss factor, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reported {
    Resolved { value: f64, sigma: f64 },
    Bound(f64),
}

impl Reported {
    pub fn value(&self) -> f64 {
        match *self {
            Reported::Resolved { value, .. } | Reported::Bound(value) => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceMode {
    pub measurement: ModeMeasurement,
    pub participation: ParticipationRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRecord {
    device_id: String,
    geometry: Geometry,
    materials: Vec<String>,
    /// Planar-component gap in meters, when known.
    gap: Option<f64>,
    modes: Vec<DeviceMode>,
    reported: Option<[Reported; CHANNELS]>,
}

impl DeviceRecord {
    pub fn new(
        device_id: impl Into<String>,
        geometry: Geometry,
        materials: Vec<String>,
        gap: Option<f64>,
        modes: Vec<DeviceMode>,
        reported: Option<[Reported; CHANNELS]>,
    ) -> Result<Self> {
        let device_id = device_id.into();
        if device_id.is_empty() {
            return Err(Error::invalid("device_id", "must not be empty"));
        }
        if modes.is_empty() {
            return Err(Error::invalid("modes", "device has no modes"));
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i]
                .iter()
                .any(|o| o.measurement.label() == m.measurement.label())
            {
                return Err(Error::invalid(
                    alloc::format!("modes[{i}].label"),
                    alloc::format!("duplicate label `{}`", m.measurement.label()),
                ));
            }
        }
        if let Some(g) = gap {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::invalid("gap", "must be finite and positive"));
            }
        }
        Ok(Self {
            device_id,
            geometry,
            materials,
            gap,
            modes,
            reported,
        })
    }

    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn materials(&self) -> &[String] {
        &self.materials
    }

    pub fn gap(&self) -> Option<f64> {
        self.gap
    }

    pub fn modes(&self) -> &[DeviceMode] {
        &self.modes
    }

    pub fn reported(&self) -> Option<&[Reported; CHANNELS]> {
        self.reported.as_ref()
    }

    pub fn participation_matrix(&self) -> ParticipationMatrix {
        ParticipationMatrix::new(
            self.modes
                .iter()
                .map(|m| (String::from(m.measurement.label()), m.participation))
                .collect(),
        )
        .expect("labels validated at construction")
    }

    pub fn measurements(&self) -> Vec<ModeMeasurement> {
        self.modes.iter().map(|m| m.measurement.clone()).collect()
    }

    /// Replaces the relative loss-rate uncertainty of every mode, or of the
    /// modes named in `per_mode`.
    pub fn with_eps_y(&self, global: Option<f64>, per_mode: &[(String, f64)]) -> Result<Self> {
        for (label, _) in per_mode {
            if !self.modes.iter().any(|m| m.measurement.label() == label) {
                return Err(Error::invalid(
                    "eps_y",
                    alloc::format!("device {} has no mode `{label}`", self.device_id),
                ));
            }
        }
        let mut out = self.clone();
        for m in &mut out.modes {
            let eps = per_mode
                .iter()
                .find(|(l, _)| l == m.measurement.label())
                .map(|(_, e)| *e)
                .or(global);
            if let Some(eps) = eps {
                m.measurement = m.measurement.clone().with_rel_sigma(eps)?;
            }
        }
        Ok(out)
    }
}
