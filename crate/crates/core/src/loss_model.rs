//! Domain types and the forward participation model.
//!
//! Each resonant mode `i` has an internal loss rate `y_i = 1/Q_int` that is a
//! linear combination of the material loss factors:
//!
//! ```text
//! y_i = (1/G)_i * R_s + p_MA,i * tan_delta + y_seam,i * r_seam
//! ```
//!
//! All quantities are SI (ohms, ohm-meters, hertz). Table-friendly units only
//! appear at the I/O boundary.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Number of loss channels in the model.
pub const CHANNELS: usize = 3;

/// A loss mechanism, in the column order of the participation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    /// Surface resistance of the superconductor (ohms).
    SurfaceResistance,
    /// Scaled loss tangent of the metal-air surface oxide (dimensionless).
    LossTangent,
    /// Seam resistance per unit length of the joint (ohm-meters).
    SeamResistance,
}

impl Channel {
    pub const ALL: [Channel; CHANNELS] = [
        Channel::SurfaceResistance,
        Channel::LossTangent,
        Channel::SeamResistance,
    ];

    pub fn index(self) -> usize {
        match self {
            Channel::SurfaceResistance => 0,
            Channel::LossTangent => 1,
            Channel::SeamResistance => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Channel> {
        Channel::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::SurfaceResistance => "r_s",
            Channel::LossTangent => "tan_delta",
            Channel::SeamResistance => "r_seam",
        }
    }

    pub fn si_unit(self) -> &'static str {
        match self {
            Channel::SurfaceResistance => "ohm",
            Channel::LossTangent => "1",
            Channel::SeamResistance => "ohm*m",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r_s" | "rs" | "surface_resistance" | "cond" => Ok(Channel::SurfaceResistance),
            "tan_delta" | "tand" | "tan_d" | "loss_tangent" | "ma" => Ok(Channel::LossTangent),
            "r_seam" | "rseam" | "seam" | "seam_resistance" => Ok(Channel::SeamResistance),
            _ => Err(Error::invalid("channel", alloc::format!("unknown channel `{s}`"))),
        }
    }
}

fn check_nonnegative(field: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::invalid(field, "must be finite"));
    }
    if value < 0.0 {
        return Err(Error::invalid(field, "must be non-negative"));
    }
    Ok(())
}

fn check_positive(field: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::invalid(field, "must be finite and positive"));
    }
    Ok(())
}

/// The unknown material loss factors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MaterialLossVector {
    r_s: f64,
    tan_delta: f64,
    r_seam: f64,
}

impl MaterialLossVector {
    /// `r_s` in ohms, `tan_delta` dimensionless, `r_seam` in ohm-meters.
    pub fn new(r_s: f64, tan_delta: f64, r_seam: f64) -> Result<Self> {
        check_nonnegative("r_s", r_s)?;
        check_nonnegative("tan_delta", tan_delta)?;
        check_nonnegative("r_seam", r_seam)?;
        Ok(Self {
            r_s,
            tan_delta,
            r_seam,
        })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_array(values: [f64; CHANNELS]) -> Result<Self> {
        Self::new(values[0], values[1], values[2])
    }

    pub fn r_s(&self) -> f64 {
        self.r_s
    }

    pub fn tan_delta(&self) -> f64 {
        self.tan_delta
    }

    pub fn r_seam(&self) -> f64 {
        self.r_seam
    }

    pub fn get(&self, channel: Channel) -> f64 {
        self.as_array()[channel.index()]
    }

    /// Returns a copy with one channel replaced.
    pub fn with(&self, channel: Channel, value: f64) -> Result<Self> {
        let mut values = self.as_array();
        values[channel.index()] = value;
        Self::from_array(values)
    }

    pub fn as_array(&self) -> [f64; CHANNELS] {
        [self.r_s, self.tan_delta, self.r_seam]
    }
}

/// Participation factors of one mode: how strongly it couples to each channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticipationRow {
    inv_g: f64,
    p_ma: f64,
    y_seam: f64,
}

impl ParticipationRow {
    /// `inv_g` in 1/ohm, `p_ma` dimensionless, `y_seam` in 1/(ohm*m).
    pub fn new(inv_g: f64, p_ma: f64, y_seam: f64) -> Result<Self> {
        check_nonnegative("inv_g", inv_g)?;
        check_nonnegative("p_ma", p_ma)?;
        check_nonnegative("y_seam", y_seam)?;
        if inv_g == 0.0 && p_ma == 0.0 && y_seam == 0.0 {
            return Err(Error::invalid(
                "participation row",
                "at least one participation factor must be positive",
            ));
        }
        Ok(Self {
            inv_g,
            p_ma,
            y_seam,
        })
    }

    pub fn from_array(values: [f64; CHANNELS]) -> Result<Self> {
        Self::new(values[0], values[1], values[2])
    }

    pub fn inv_g(&self) -> f64 {
        self.inv_g
    }

    pub fn p_ma(&self) -> f64 {
        self.p_ma
    }

    pub fn y_seam(&self) -> f64 {
        self.y_seam
    }

    pub fn as_array(&self) -> [f64; CHANNELS] {
        [self.inv_g, self.p_ma, self.y_seam]
    }

    /// Per-channel loss contributions `P_ij * x_j`.
    pub fn contributions(&self, x: &MaterialLossVector) -> [f64; CHANNELS] {
        let p = self.as_array();
        let x = x.as_array();
        [p[0] * x[0], p[1] * x[1], p[2] * x[2]]
    }

    /// Loss rate `1/Q_int` predicted for this mode.
    pub fn loss_rate(&self, x: &MaterialLossVector) -> f64 {
        self.contributions(x).iter().sum()
    }
}

/// Labelled participation rows, one per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationMatrix {
    rows: Vec<(String, ParticipationRow)>,
}

impl ParticipationMatrix {
    pub fn new(rows: Vec<(String, ParticipationRow)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("participation matrix", "needs at least one row"));
        }
        for (i, (label, _)) in rows.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::invalid("mode label", "must not be empty"));
            }
            if rows[..i].iter().any(|(other, _)| other == label) {
                return Err(Error::invalid(
                    "mode label",
                    alloc::format!("duplicate label `{label}`"),
                ));
            }
        }
        Ok(Self { rows })
    }

    /// Builds a matrix from `(label, [inv_g, p_ma, y_seam])` tuples.
    pub fn from_arrays<'a>(
        rows: impl IntoIterator<Item = (&'a str, [f64; CHANNELS])>,
    ) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|(label, values)| Ok((label.to_string(), ParticipationRow::from_array(values)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[(String, ParticipationRow)] {
        &self.rows
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|(label, _)| label.as_str())
    }

    pub fn row(&self, label: &str) -> Option<&ParticipationRow> {
        self.rows
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, row)| row)
    }

    pub fn as_arrays(&self) -> Vec<[f64; CHANNELS]> {
        self.rows.iter().map(|(_, row)| row.as_array()).collect()
    }

    /// Numerical rank of the column-normalized matrix, relative to its largest
    /// singular value.
    pub fn rank(&self, tolerance: f64) -> usize {
        let dense = crate::linalg::dense(&self.as_arrays());
        crate::linalg::numerical_rank(&dense, tolerance).rank
    }
}

/// One measured resonant mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMeasurement {
    label: String,
    frequency: f64,
    q_int: f64,
    q_int_rel_sigma: f64,
    q_c: Option<f64>,
    photon_number: Option<f64>,
}

impl ModeMeasurement {
    /// `rel_sigma` is the relative uncertainty of the loss rate `1/q_int`.
    pub fn new(label: impl Into<String>, frequency: f64, q_int: f64, rel_sigma: f64) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::invalid("mode label", "must not be empty"));
        }
        check_positive("frequency", frequency)?;
        check_positive("q_int", q_int)?;
        if !(rel_sigma > 0.0 && rel_sigma < 1.0) {
            return Err(Error::invalid(
                "q_int_rel_sigma",
                alloc::format!("must lie in (0, 1), got {rel_sigma}"),
            ));
        }
        Ok(Self {
            label,
            frequency,
            q_int,
            q_int_rel_sigma: rel_sigma,
            q_c: None,
            photon_number: None,
        })
    }

    pub fn with_coupling_q(mut self, q_c: f64) -> Result<Self> {
        check_positive("q_c", q_c)?;
        self.q_c = Some(q_c);
        Ok(self)
    }

    pub fn with_photon_number(mut self, n: f64) -> Result<Self> {
        check_nonnegative("photon_number", n)?;
        self.photon_number = Some(n);
        Ok(self)
    }

    pub fn with_rel_sigma(mut self, rel_sigma: f64) -> Result<Self> {
        let checked = Self::new(self.label.clone(), self.frequency, self.q_int, rel_sigma)?;
        self.q_int_rel_sigma = checked.q_int_rel_sigma;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn q_int(&self) -> f64 {
        self.q_int
    }

    pub fn q_int_rel_sigma(&self) -> f64 {
        self.q_int_rel_sigma
    }

    pub fn q_c(&self) -> Option<f64> {
        self.q_c
    }

    pub fn photon_number(&self) -> Option<f64> {
        self.photon_number
    }

    /// Measured loss rate `y = 1/Q_int`.
    pub fn loss_rate(&self) -> f64 {
        1.0 / self.q_int
    }

    /// Standard deviation of the loss rate, `eps_y * y`.
    pub fn loss_rate_sigma(&self) -> f64 {
        self.q_int_rel_sigma * self.loss_rate()
    }
}

/// Thickness and relative permittivity of the surface oxide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OxideAssumptions {
    thickness: f64,
    permittivity: f64,
}

impl OxideAssumptions {
    pub fn new(thickness: f64, permittivity: f64) -> Result<Self> {
        check_positive("oxide thickness", thickness)?;
        if !(permittivity.is_finite() && permittivity >= 1.0) {
            return Err(Error::invalid("oxide permittivity", "must be finite and >= 1"));
        }
        Ok(Self {
            thickness,
            permittivity,
        })
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn permittivity(&self) -> f64 {
        self.permittivity
    }
}

impl Default for OxideAssumptions {
    /// 3 nm of oxide with relative permittivity 10, the values the surface
    /// participations are computed with.
    fn default() -> Self {
        Self {
            thickness: 3e-9,
            permittivity: 10.0,
        }
    }
}

/// Predicted loss rate `1/Q_int` of every mode.
pub fn forward_loss_rates(p: &ParticipationMatrix, x: &MaterialLossVector) -> Vec<f64> {
    p.rows().iter().map(|(_, row)| row.loss_rate(x)).collect()
}

/// Predicted internal quality factor of every mode. A mode with zero predicted
/// loss gets `f64::INFINITY`.
pub fn predict_quality_factors(
    p: &ParticipationMatrix,
    x: &MaterialLossVector,
) -> Vec<(String, f64)> {
    p.rows()
        .iter()
        .map(|(label, row)| {
            let y = row.loss_rate(x);
            let q = if y > 0.0 { 1.0 / y } else { f64::INFINITY };
            (label.clone(), q)
        })
        .collect()
}

/// Fractional contribution of each loss channel to a mode's total loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBudget {
    pub conductor: f64,
    pub dielectric: f64,
    pub seam: f64,
}

impl LossBudget {
    pub fn as_array(&self) -> [f64; CHANNELS] {
        [self.conductor, self.dielectric, self.seam]
    }

    pub fn get(&self, channel: Channel) -> f64 {
        self.as_array()[channel.index()]
    }
}

pub fn loss_budget(row: &ParticipationRow, x: &MaterialLossVector) -> Result<LossBudget> {
    let parts = row.contributions(x);
    let total: f64 = parts.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroTotalLoss);
    }
    Ok(LossBudget {
        conductor: parts[0] / total,
        dielectric: parts[1] / total,
        seam: parts[2] / total,
    })
}

/// Converts an actual oxide loss tangent into the scaled loss tangent that
/// the participation model uses, given the actual oxide and the oxide the
/// surface participations were computed with.
pub fn scale_loss_tangent(
    actual_tan_delta: f64,
    actual: &OxideAssumptions,
    assumed: &OxideAssumptions,
) -> Result<f64> {
    check_nonnegative("tan_delta", actual_tan_delta)?;
    Ok(actual_tan_delta * scale_factor(actual, assumed))
}

/// Inverse of [`scale_loss_tangent`].
pub fn unscale_loss_tangent(
    scaled_tan_delta: f64,
    actual: &OxideAssumptions,
    assumed: &OxideAssumptions,
) -> Result<f64> {
    check_nonnegative("tan_delta", scaled_tan_delta)?;
    Ok(scaled_tan_delta / scale_factor(actual, assumed))
}

fn scale_factor(actual: &OxideAssumptions, assumed: &OxideAssumptions) -> f64 {
    (actual.thickness / assumed.thickness) * (assumed.permittivity / actual.permittivity)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f4() -> ParticipationMatrix {
        ParticipationMatrix::from_arrays([
            ("DWGM-1", [0.28, 3.8e-6, 2.7e-4]),
            ("DFM-2", [8.9e-3, 3.5e-6, 7.1e-5]),
            ("CWGM-1", [5.5e-3, 1.5e-7, 2.1e-3]),
        ])
        .unwrap()
    }

    fn f4_losses() -> MaterialLossVector {
        MaterialLossVector::new(6.48e-6, 0.11, 39.1e-6).unwrap()
    }

    #[test]
    fn forward_matches_measured_f4_dwgm() {
        let y = forward_loss_rates(&f4(), &f4_losses());
        let measured = 1.0 / 0.45e6;
        assert!((y[0] - measured).abs() / measured < 0.01, "{}", y[0]);
    }

    #[test]
    fn single_channel_projection() {
        let p = ParticipationMatrix::from_arrays([("a", [1.0, 0.0, 0.0])]).unwrap();
        let x = MaterialLossVector::new(3.5e-7, 0.2, 1e-5).unwrap();
        assert_eq!(forward_loss_rates(&p, &x), alloc::vec![3.5e-7]);
    }

    #[test]
    fn zero_losses_give_zero_rates_and_infinite_q() {
        let x = MaterialLossVector::zero();
        assert!(forward_loss_rates(&f4(), &x).iter().all(|&y| y == 0.0));
        assert!(predict_quality_factors(&f4(), &x)
            .iter()
            .all(|(_, q)| q.is_infinite()));
    }

    #[test]
    fn ellipsoidal_cond_row_prediction() {
        let p = ParticipationMatrix::from_arrays([("COND", [1.8e-3, 6.7e-10, 1.6e-5])]).unwrap();
        let x = MaterialLossVector::new(500e-9, 0.033, 26e-6).unwrap();
        let q = predict_quality_factors(&p, &x)[0].1;
        let expected = 1.0 / (1.8e-3 * 5e-7 + 6.7e-10 * 0.033 + 1.6e-5 * 2.6e-5);
        assert!((q - expected).abs() / expected < 1e-12);
        assert!((q - 7.4e8).abs() / 7.4e8 < 0.01, "{q}");
    }

    #[test]
    fn f4_predictions_within_five_percent() {
        let q = predict_quality_factors(&f4(), &f4_losses());
        for ((_, predicted), measured) in q.iter().zip([0.45e6, 2.2e6, 7.4e6]) {
            assert!((predicted - measured).abs() / measured < 0.05, "{predicted} vs {measured}");
        }
    }

    #[test]
    fn budget_examples() {
        let x = MaterialLossVector::new(500e-9, 0.033, 26e-6).unwrap();
        let dfm = ParticipationRow::new(8.9e-3, 3.5e-6, 7.1e-5).unwrap();
        assert!(loss_budget(&dfm, &x).unwrap().dielectric > 0.5);
        let dwgm = ParticipationRow::new(0.28, 3.8e-6, 2.7e-4).unwrap();
        assert!(loss_budget(&dwgm, &x).unwrap().seam < 0.2);

        let only_rs = MaterialLossVector::new(1e-6, 0.0, 0.0).unwrap();
        let b = loss_budget(&dwgm, &only_rs).unwrap();
        assert_eq!(b.as_array(), [1.0, 0.0, 0.0]);

        assert_eq!(
            loss_budget(&dwgm, &MaterialLossVector::zero()),
            Err(Error::ZeroTotalLoss)
        );
    }

    #[test]
    fn loss_tangent_scaling() {
        let assumed = OxideAssumptions::default();
        let thick = OxideAssumptions::new(8.82e-9, 10.0).unwrap();
        let actual = unscale_loss_tangent(0.32, &thick, &assumed).unwrap();
        assert!((actual - 0.109).abs() < 5e-4, "{actual}");

        let thin = OxideAssumptions::new(3e-9, 10.0).unwrap();
        assert_eq!(unscale_loss_tangent(0.055, &thin, &assumed).unwrap(), 0.055);
        assert_eq!(scale_loss_tangent(0.4, &assumed, &assumed).unwrap(), 0.4);

        assert!(OxideAssumptions::new(0.0, 10.0).is_err());
        assert!(OxideAssumptions::new(3e-9, 0.5).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(MaterialLossVector::new(-1e-9, 0.0, 0.0).is_err());
        assert!(MaterialLossVector::new(f64::NAN, 0.0, 0.0).is_err());
        assert!(ParticipationRow::new(0.0, 0.0, 0.0).is_err());
        assert!(ModeMeasurement::new("a", 5e9, 1e6, 1.0).is_err());
        assert!(ModeMeasurement::new("a", 5e9, 0.0, 0.05).is_err());
        assert!(ModeMeasurement::new("a", -1.0, 1e6, 0.05).is_err());
        assert!(ParticipationMatrix::from_arrays([("a", [1.0, 0.0, 0.0]), ("a", [0.0, 1.0, 0.0])]).is_err());
        assert!(ParticipationMatrix::new(Vec::new()).is_err());
    }

    #[test]
    fn channel_parsing() {
        assert_eq!("tan_delta".parse::<Channel>().unwrap(), Channel::LossTangent);
        assert_eq!("R_S".parse::<Channel>().unwrap(), Channel::SurfaceResistance);
        assert_eq!("r_seam".parse::<Channel>().unwrap(), Channel::SeamResistance);
        assert!("bulk".parse::<Channel>().is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn losses() -> impl Strategy<Value = MaterialLossVector> {
            (0.0..1e-5f64, 0.0..1.0f64, 0.0..1e-3f64)
                .prop_map(|(a, b, c)| MaterialLossVector::new(a, b, c).unwrap())
        }

        fn row() -> impl Strategy<Value = ParticipationRow> {
            (1e-4..1.0f64, 1e-10..1e-5f64, 1e-6..1.0f64)
                .prop_map(|(a, b, c)| ParticipationRow::new(a, b, c).unwrap())
        }

        proptest! {
            #[test]
            fn forward_is_linear(r in row(), x1 in losses(), x2 in losses(), a in 0.0..10.0f64, b in 0.0..10.0f64) {
                let combined = MaterialLossVector::from_array(
                    core::array::from_fn(|j| a * x1.as_array()[j] + b * x2.as_array()[j])).unwrap();
                let lhs = r.loss_rate(&combined);
                let rhs = a * r.loss_rate(&x1) + b * r.loss_rate(&x2);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(f64::MIN_POSITIVE));
            }

            #[test]
            fn forward_is_monotone(r in row(), x in losses(), ch in 0usize..3, bump in 0.0..1.0f64) {
                let channel = Channel::from_index(ch).unwrap();
                let bigger = x.with(channel, x.get(channel) + bump).unwrap();
                prop_assert!(r.loss_rate(&bigger) >= r.loss_rate(&x));
            }

            #[test]
            fn budget_fractions_are_normalized(r in row(), x in losses()) {
                prop_assume!(r.loss_rate(&x) > 0.0);
                let b = loss_budget(&r, &x).unwrap();
                let total = r.loss_rate(&x);
                prop_assert!((b.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (fraction, part) in b.as_array().iter().zip(r.contributions(&x)) {
                    prop_assert!((fraction - part / total).abs() < 1e-12);
                    prop_assert!(*fraction >= 0.0);
                }
            }

            #[test]
            fn scaling_round_trips(tan in 1e-6..1.0f64, t in 1e-10..1e-7f64, eps in 1.0..30.0f64) {
                let actual = OxideAssumptions::new(t, eps).unwrap();
                let assumed = OxideAssumptions::default();
                let scaled = scale_loss_tangent(tan, &actual, &assumed).unwrap();
                let back = unscale_loss_tangent(scaled, &actual, &assumed).unwrap();
                prop_assert!((back - tan).abs() <= 1e-14 * tan);
            }
        }
    }
}
