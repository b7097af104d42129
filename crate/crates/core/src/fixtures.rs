//! Bundled reference data: measured devices, the canonical three-mode
//! participation matrices and the per-geometry mode catalogs.
//!
//! Values are written at the precision they were published with, in table
//! units (GHz, units of 1e6 for quality factors, µΩ and µΩ·m for losses), and
//! converted to SI when the records are built.

use alloc::string::String;
use alloc::vec::Vec;

use crate::device::{DeviceMode, DeviceRecord, Geometry, Reported};
use crate::gap::{GapCurve, GapFrequencyTable};
use crate::loss_model::{ModeMeasurement, ParticipationMatrix, ParticipationRow};

/// Relative loss-rate uncertainty used unless a mode says otherwise.
pub const DEFAULT_EPS_Y: f64 = 0.05;

struct RawMode {
    label: &'static str,
    freq_ghz: f64,
    q_c_e6: f64,
    q_int_e6: f64,
    inv_g: f64,
    p_ma: f64,
    y_seam: f64,
    eps_y: f64,
}

/// Published loss factor in table units (µΩ, 1, µΩ·m).
#[derive(Clone, Copy)]
enum Raw {
    R(f64, f64),
    B(f64),
}

struct RawDevice {
    id: &'static str,
    geometry: Geometry,
    materials: &'static str,
    gap_um: Option<f64>,
    modes: [RawMode; 3],
    reported: [Raw; 3],
}

const fn m(
    label: &'static str,
    freq_ghz: f64,
    q_c_e6: f64,
    q_int_e6: f64,
    inv_g: f64,
    p_ma: f64,
    y_seam: f64,
) -> RawMode {
    RawMode {
        label,
        freq_ghz,
        q_c_e6,
        q_int_e6,
        inv_g,
        p_ma,
        y_seam,
        eps_y: DEFAULT_EPS_Y,
    }
}

const fn with_eps(mut mode: RawMode, eps_y: f64) -> RawMode {
    mode.eps_y = eps_y;
    mode
}

use Geometry::{Ellipsoidal, Fwgmr};
use Raw::{B, R};

const DEVICES: [RawDevice; 16] = [
    RawDevice {
        id: "F1",
        geometry: Fwgmr,
        materials: "5N5Al",
        gap_um: Some(65.0),
        modes: [
            m("DWGM-1", 5.590, 3.2, 0.047, 0.46, 6.4e-6, 2.4e-4),
            m("DFM-2", 7.997, 0.36, 0.43, 1.1e-2, 5.9e-6, 8.0e-5),
            m("CWGM-1", 10.862, 6.4, 1.74, 5.5e-3, 1.5e-7, 2.0e-3),
        ],
        reported: [R(41.8, 2.4), R(0.32, 0.02), R(153.0, 16.0)],
    },
    RawDevice {
        id: "F1e",
        geometry: Fwgmr,
        materials: "5N5Al etched",
        gap_um: Some(80.0),
        modes: [
            m("DWGM-1", 5.756, 7.0, 3.2, 0.37, 5.1e-6, 4.0e-4),
            m("DFWGM-1", 6.465, 1.5, 12.0, 6.9e-2, 1.8e-6, 2.2e-4),
            m("CWGM-1", 10.879, 12.0, 59.0, 5.6e-3, 1.6e-7, 8.0e-4),
        ],
        reported: [R(0.44, 0.11), R(0.029, 0.006), R(12.5, 1.3)],
    },
    RawDevice {
        id: "F2",
        geometry: Fwgmr,
        materials: "5N5Al",
        gap_um: Some(155.0),
        modes: [
            m("DWGM-1", 6.043, 0.44, 0.17, 0.16, 2.2e-6, 4.0e-4),
            m("DFM-1", 3.696, 1.6, 0.96, 4.5e-2, 1.5e-6, 6.3e-4),
            m("CWGM-1", 10.873, 5.7, 0.88, 5.4e-3, 2.0e-7, 1.8e-3),
        ],
        reported: [R(21.5, 1.1), B(0.22), R(512.0, 32.0)],
    },
    RawDevice {
        id: "F2e",
        geometry: Fwgmr,
        materials: "5N5Al etched",
        gap_um: Some(150.0),
        modes: [
            m("DWGM-1", 6.040, 4.1, 3.5, 0.17, 2.3e-6, 5.7e-4),
            m("DFM-2", 10.562, 1.1e2, 8.7, 7.0e-3, 1.9e-6, 1.2e-4),
            m("CAV-1", 8.698, 1.1e-2, 3.6e-2, 6.2e-3, 2.3e-7, 0.58),
        ],
        reported: [R(0.78, 0.10), R(0.055, 0.003), R(47.8, 2.4)],
    },
    RawDevice {
        id: "F2ed",
        geometry: Fwgmr,
        materials: "5N5Al etched DT25",
        gap_um: Some(68.0),
        modes: [
            m("DWGM-1", 5.790, 5.5, 6.0, 0.46, 6.2e-6, 4.7e-4),
            m("DFM-1", 3.208, 9.0, 13.0, 5.8e-2, 4.1e-6, 5.4e-4),
            m("CWGM-1", 10.881, 37.0, 19.0, 5.3e-3, 1.4e-7, 6.9e-4),
        ],
        reported: [R(0.20, 0.03), R(0.0065, 0.0013), R(72.8, 3.9)],
    },
    RawDevice {
        id: "F5d",
        geometry: Fwgmr,
        materials: "5N5Al DT150",
        gap_um: Some(88.0),
        modes: [
            m("DWGM-1", 5.734, 3.3, 2.1, 0.34, 4.6e-6, 1.4e-4),
            m("DFM-2", 3.281, 23.0, 5.0, 5.3e-2, 3.3e-6, 3.4e-4),
            m("CAV-1", 8.631, 7.8e-3, 2.4e-2, 6.1e-3, 2.4e-7, 0.28),
        ],
        reported: [R(0.95, 0.11), R(0.030, 0.004), R(152.0, 8.0)],
    },
    RawDevice {
        id: "F3",
        geometry: Fwgmr,
        materials: "6061Al",
        gap_um: Some(100.0),
        modes: [
            m("DWGM-1", 5.802, 7.3, 0.56, 0.28, 3.8e-6, 2.7e-4),
            m("DFM-1", 3.417, 15.0, 3.4, 5.1e-2, 2.7e-6, 6.4e-4),
            with_eps(m("CAV-2", 11.081, 2.1e-2, 6.5e-2, 3.8e-6, 8.2e-7, 1.0), 0.20),
        ],
        reported: [R(5.96, 0.21), B(0.023), R(15.4, 3.6)],
    },
    RawDevice {
        id: "F3d",
        geometry: Fwgmr,
        materials: "6061Al DT25",
        gap_um: Some(72.0),
        modes: [
            m("DWGM-1", 5.784, 0.86, 0.77, 0.42, 5.7e-6, 1.7e-4),
            m("DFM-1", 3.183, 3.0, 3.67, 5.7e-2, 4.2e-6, 5.7e-4),
            m("CWGM-1", 10.865, 26.0, 7.97, 5.8e-3, 1.6e-7, 6.6e-4),
        ],
        reported: [R(3.01, 0.17), B(0.010), R(162.0, 10.0)],
    },
    RawDevice {
        id: "F4",
        geometry: Fwgmr,
        materials: "6061Al",
        gap_um: Some(100.0),
        modes: [
            m("DWGM-1", 5.858, 1.6, 0.45, 0.28, 3.8e-6, 2.7e-4),
            m("DFM-2", 9.199, 14.0, 2.2, 8.9e-3, 3.5e-6, 7.1e-5),
            m("CWGM-1", 10.863, 5.7, 7.4, 5.5e-3, 1.5e-7, 2.1e-3),
        ],
        reported: [R(6.48, 0.43), R(0.11, 0.01), R(39.1, 3.5)],
    },
    RawDevice {
        id: "E1",
        geometry: Ellipsoidal,
        materials: "5N5Al",
        gap_um: None,
        modes: [
            m("TM310", 11.556, 0.12, 0.21, 3.0e-3, 4.3e-8, 0.10),
            m("TE111", 8.450, 46.0, 183.0, 2.8e-3, 0.8e-8, 1.5e-5),
            m("TE011", 10.723, 2.4e4, 195.0, 1.8e-3, 6.7e-10, 1.6e-5),
        ],
        reported: [R(1.93, 0.08), B(0.14), R(45.9, 2.3)],
    },
    RawDevice {
        id: "E1e",
        geometry: Ellipsoidal,
        materials: "5N5Al etched",
        gap_um: None,
        modes: [
            m("TM110", 7.225, 0.44, 0.43, 4.3e-3, 3.3e-8, 0.13),
            m("TE211", 10.216, 92.0, 644.0, 2.5e-3, 1.6e-8, 5.2e-5),
            m("TE011", 10.731, 7.0e3, 1.2e3, 1.8e-3, 6.7e-10, 1.6e-5),
        ],
        reported: [R(0.29, 0.02), B(0.014), R(18.0, 0.90)],
    },
    RawDevice {
        id: "E2",
        geometry: Ellipsoidal,
        materials: "6061Al",
        gap_um: None,
        modes: [
            m("TM020", 10.001, 0.1, 0.29, 3.3e-3, 3.9e-8, 0.12),
            m("TE111", 8.479, 37.0, 91.0, 2.8e-3, 0.8e-8, 1.5e-5),
            m("TE011", 10.756, 1.1e3, 150.0, 1.8e-3, 6.7e-10, 1.6e-5),
        ],
        reported: [R(3.32, 0.20), B(0.26), R(28.0, 1.4)],
    },
    RawDevice {
        id: "E3eb",
        geometry: Ellipsoidal,
        materials: "6061Al HP ebAl",
        gap_um: None,
        modes: [
            m("TM310", 11.588, 121.0, 108.0, 3.0e-3, 4.3e-8, 0.10),
            m("TE211", 10.267, 795.0, 600.0, 2.5e-3, 1.6e-8, 5.2e-5),
            m("TE011", 10.783, 4.7e3, 863.0, 1.8e-3, 6.7e-10, 1.6e-5),
        ],
        reported: [R(0.63, 0.028), B(0.015), R(0.070, 0.005)],
    },
    RawDevice {
        id: "E4d",
        geometry: Ellipsoidal,
        materials: "6061Al DT25",
        gap_um: None,
        modes: [
            m("TM010", 4.839, 4.4e-2, 0.25, 6.1e-3, 2.8e-8, 0.15),
            m("TE111", 8.482, 17.0, 32.0, 2.8e-3, 0.8e-8, 1.5e-5),
            m("TE011", 10.759, 51.0, 55.0, 1.8e-3, 6.7e-10, 1.6e-5),
        ],
        reported: [R(9.65, 0.56), B(0.73), R(26.9, 1.4)],
    },
    RawDevice {
        id: "E4eb",
        geometry: Ellipsoidal,
        materials: "6061Al DT25 ebAl",
        gap_um: None,
        modes: [
            m("TM310", 11.573, 3.8e3, 87.0, 3.0e-3, 4.3e-8, 0.10),
            m("TE311", 12.002, 3.6e4, 302.0, 2.4e-3, 2.5e-8, 7.0e-5),
            m("TE011", 10.759, 1.4e4, 249.0, 1.8e-3, 6.7e-10, 1.6e-5),
        ],
        reported: [R(1.62, 0.06), B(0.024), R(0.065, 0.006)],
    },
    RawDevice {
        id: "E4sp",
        geometry: Ellipsoidal,
        materials: "6061Al DT25 spAl",
        gap_um: None,
        modes: [
            m("TM210", 9.457, 2.6e3, 536.0, 3.6e-3, 3.9e-8, 0.11),
            m("TE311", 12.002, 2.9e3, 443.0, 2.4e-3, 2.5e-8, 7.0e-5),
            m("TE011", 10.758, 4.5e3, 424.0, 1.8e-3, 6.7e-10, 1.6e-5),
        ],
        reported: [B(0.52), B(0.048), B(0.017)],
    },
];

/// Table unit to SI for each channel.
const REPORTED_SCALE: [f64; 3] = [1e-6, 1.0, 1e-6];

fn build(raw: &RawDevice) -> DeviceRecord {
    let modes = raw
        .modes
        .iter()
        .map(|r| DeviceMode {
            measurement: ModeMeasurement::new(r.label, r.freq_ghz * 1e9, r.q_int_e6 * 1e6, r.eps_y)
                .and_then(|mm| mm.with_coupling_q(r.q_c_e6 * 1e6))
                .expect("bundled measurement is valid"),
            participation: ParticipationRow::new(r.inv_g, r.p_ma, r.y_seam)
                .expect("bundled participation row is valid"),
        })
        .collect();
    let reported = core::array::from_fn(|j| match raw.reported[j] {
        R(v, s) => Reported::Resolved {
            value: v * REPORTED_SCALE[j],
            sigma: s * REPORTED_SCALE[j],
        },
        B(v) => Reported::Bound(v * REPORTED_SCALE[j]),
    });
    DeviceRecord::new(
        raw.id,
        raw.geometry,
        raw.materials.split_whitespace().map(String::from).collect(),
        raw.gap_um.map(|g| g * 1e-6),
        modes,
        Some(reported),
    )
    .expect("bundled device is valid")
}

/// Every bundled device: nine FWGMRs followed by seven ellipsoidal cavities.
pub fn builtin_fixtures() -> Vec<DeviceRecord> {
    DEVICES.iter().map(build).collect()
}

pub fn device_ids() -> impl Iterator<Item = &'static str> {
    DEVICES.iter().map(|d| d.id)
}

pub fn device(id: &str) -> Option<DeviceRecord> {
    DEVICES.iter().find(|d| d.id == id).map(build)
}

/// DWGM, DFM and CWGM of an FWGMR with a 100 µm gap.
pub fn p_fwgmr() -> ParticipationMatrix {
    ParticipationMatrix::from_arrays([
        ("DWGM", [0.28, 3.8e-6, 2.7e-4]),
        ("DFM", [8.9e-3, 3.5e-6, 7.1e-5]),
        ("CWGM", [5.5e-3, 1.5e-7, 2.1e-3]),
    ])
    .expect("valid matrix")
}

/// Seam-sensitive, seam-insensitive and conductor-loss-sensitive modes of the
/// ellipsoidal cavity.
pub fn p_ellip() -> ParticipationMatrix {
    ParticipationMatrix::from_arrays([
        ("SEAM", [4.3e-3, 3.3e-8, 1.3e-1]),
        ("NON-SEAM", [2.5e-3, 1.6e-8, 5.2e-5]),
        ("COND", [1.8e-3, 6.7e-10, 1.6e-5]),
    ])
    .expect("valid matrix")
}

pub fn matrix(name: &str) -> Option<ParticipationMatrix> {
    match name {
        "P_FWGMR" => Some(p_fwgmr()),
        "P_ellip" => Some(p_ellip()),
        _ => None,
    }
}

/// A simulated mode of one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogMode {
    pub label: &'static str,
    pub frequency: f64,
    pub participation: ParticipationRow,
    /// Bulk dielectric participation of the assembly hardware, where known.
    pub p_diel: Option<f64>,
}

fn catalog_mode(label: &'static str, freq_ghz: f64, row: [f64; 3], p_diel: Option<f64>) -> CatalogMode {
    CatalogMode {
        label,
        frequency: freq_ghz * 1e9,
        participation: ParticipationRow::from_array(row).expect("valid row"),
        p_diel,
    }
}

/// Selected modes of an FWGMR with a 100 µm gap.
pub fn fwgmr_catalog() -> Vec<CatalogMode> {
    [
        ("DFM-1", 3.434, [5.1e-2, 2.7e-6, 6.4e-4], 1.7e-7),
        ("DFM-2", 9.094, [8.9e-3, 3.5e-6, 7.1e-5], 2.3e-8),
        ("DWGM-1", 5.816, [2.8e-1, 3.8e-6, 2.7e-4], 8.2e-8),
        ("DWGM-2", 11.506, [1.8e-1, 5.0e-6, 1.7e-4], 7.9e-6),
        ("DFWGM-1", 6.480, [6.7e-2, 1.6e-6, 2.0e-4], 3.2e-7),
        ("CWGM-1", 10.906, [5.5e-3, 1.5e-7, 2.1e-3], 5.3e-5),
        ("CAV-1", 8.621, [6.7e-3, 2.7e-7, 3.2e-1], 1.5e-3),
        ("CAV-2", 10.994, [2.1e-2, 8.2e-7, 1.0], 3.1e-1),
        ("DIEL-1", 2.986, [5.2e-1, 3.7e-6, 2.8e-2], 2.7e-1),
        ("DIEL-2", 3.779, [1.1e-1, 1.6e-6, 1.2e-2], 1.1e-1),
    ]
    .into_iter()
    .map(|(l, f, r, d)| catalog_mode(l, f, r, Some(d)))
    .collect()
}

/// Selected modes of the ellipsoidal cavity.
pub fn ellipsoidal_catalog() -> Vec<CatalogMode> {
    [
        ("TM010", 4.843, [6.1e-3, 2.8e-8, 1.5e-1]),
        ("TM110", 7.252, [4.6e-3, 3.5e-8, 1.3e-1]),
        ("TM210", 9.475, [3.6e-3, 3.9e-8, 1.1e-1]),
        ("TM020", 10.017, [3.3e-3, 3.9e-8, 1.2e-1]),
        ("TM011", 10.464, [2.8e-3, 2.7e-8, 6.3e-5]),
        ("TE111", 8.513, [2.8e-3, 0.8e-8, 1.5e-5]),
        ("TE211", 10.260, [2.5e-3, 1.6e-8, 5.2e-5]),
        ("TE011", 10.778, [1.8e-3, 6.7e-10, 1.6e-5]),
    ]
    .into_iter()
    .map(|(l, f, r)| catalog_mode(l, f, r, None))
    .collect()
}

/// SYNTHETIC frequency-versus-gap curves for an FWGMR, 50 µm to 200 µm in
/// 5 µm steps.
///
/// Not measured or simulated data: the fork modes follow `f ∝ 1/sqrt(g)`, the
/// DWGM drifts weakly as `g^(-0.05)` and the CWGM is flat, all anchored to the
/// catalog frequencies at 100 µm.
pub fn synthetic_gap_table() -> GapFrequencyTable {
    let gaps: Vec<f64> = (0..=30).map(|k| (50.0 + 5.0 * k as f64) * 1e-6).collect();
    let curve = |label: &str, f100_ghz: f64, exponent: f64| {
        GapCurve::new(
            label,
            gaps.iter()
                .map(|&g| (g, f100_ghz * 1e9 * libm::pow(g / 100e-6, exponent)))
                .collect(),
        )
        .expect("valid curve")
    };
    GapFrequencyTable::new(alloc::vec![
        curve("DFM-1", 3.434, -0.5),
        curve("DFM-2", 9.094, -0.5),
        curve("DWGM-1", 5.816, -0.05),
        curve("CWGM-1", 10.906, 0.0),
    ])
    .expect("valid table")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_model::CHANNELS;

    #[test]
    fn sixteen_devices() {
        let all = builtin_fixtures();
        assert_eq!(all.len(), 16);
        assert_eq!(all.iter().filter(|d| d.geometry() == Geometry::Fwgmr).count(), 9);
        assert_eq!(all.iter().filter(|d| d.geometry() == Geometry::Ellipsoidal).count(), 7);
    }

    #[test]
    fn f4_first_row() {
        let f4 = device("F4").unwrap();
        assert_eq!(f4.modes().len(), 3);
        assert_eq!(f4.modes()[0].participation.as_array(), [0.28, 3.8e-6, 2.7e-4]);
        assert!((f4.gap().unwrap() - 100e-6).abs() < 1e-18);
    }

    #[test]
    fn f3_cav2_has_larger_uncertainty() {
        let f3 = device("F3").unwrap();
        let cav = f3.modes().iter().find(|m| m.measurement.label() == "CAV-2").unwrap();
        assert_eq!(cav.measurement.q_int_rel_sigma(), 0.20);
        let others = f3.modes().iter().filter(|m| m.measurement.label() != "CAV-2");
        assert!(others.into_iter().all(|m| m.measurement.q_int_rel_sigma() == DEFAULT_EPS_Y));
    }

    #[test]
    fn table_values_in_si() {
        let e3 = device("E3eb").unwrap();
        assert_eq!(e3.modes()[2].measurement.q_int(), 863.0 * 1e6);
        let e4 = device("E4sp").unwrap();
        assert_eq!(e4.modes()[2].measurement.q_int(), 424.0 * 1e6);
        assert!(e4.reported().unwrap().iter().all(|r| matches!(r, Reported::Bound(_))));
        let f4 = device("F4").unwrap();
        let rep = f4.reported().unwrap();
        assert!((rep[0].value() - 6.48e-6).abs() < 1e-18);
        assert!((rep[2].value() - 39.1e-6).abs() < 1e-18);
    }

    #[test]
    fn every_fixture_is_full_rank() {
        for d in builtin_fixtures() {
            assert_eq!(d.participation_matrix().rank(1e-10), CHANNELS, "{}", d.device_id());
        }
        assert_eq!(p_fwgmr().rank(1e-10), CHANNELS);
        assert_eq!(p_ellip().rank(1e-10), CHANNELS);
    }

    #[test]
    fn catalogs() {
        assert_eq!(fwgmr_catalog().len(), 10);
        assert_eq!(ellipsoidal_catalog().len(), 8);
        let dfm2 = fwgmr_catalog().into_iter().find(|m| m.label == "DFM-2").unwrap();
        assert_eq!(dfm2.participation, p_fwgmr().row("DFM").copied().unwrap());
    }

    #[test]
    fn synthetic_table_is_anchored_at_100um() {
        let t = synthetic_gap_table();
        let dfm1 = t.curve("DFM-1").unwrap();
        assert!((dfm1.eval(100e-6).unwrap() - 3.434e9).abs() < 1.0);
    }
}
