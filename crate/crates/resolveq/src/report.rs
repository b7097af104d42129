//! JSON and tabular renderings of results.

use resolveq_core::extraction::{Classification, ExtractionResult};
use resolveq_core::gap::GapEstimate;
use resolveq_core::loss_model::{loss_budget, predict_quality_factors, LossBudget};
use resolveq_core::spectral::ResonanceFit;
use resolveq_core::{Channel, MaterialLossVector, ParticipationMatrix, CHANNELS};
use serde_json::{json, Map, Value};

use crate::error::{CoreContext, Result};

const SI_KEYS: [&str; CHANNELS] = ["r_s_ohm", "tan_delta", "r_seam_ohm_m"];

/// A number, or `"inf"` / `"-inf"` / `"nan"` where JSON has no literal.
pub fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

/// Cell text for CSV: shortest round-trip form, scientific outside
/// `[1e-3, 1e7)`, with `inf` for infinities.
pub fn cell(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if v != 0.0 && !(1e-3..1e7).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn per_channel(v: &[f64; CHANNELS]) -> Value {
    let mut m = Map::new();
    for (k, x) in SI_KEYS.iter().zip(v) {
        m.insert((*k).into(), number(*x));
    }
    Value::Object(m)
}

fn classification(c: &Classification) -> Value {
    match *c {
        Classification::Resolved { value, sigma } => json!({
            "status": "resolved",
            "value": number(value),
            "sigma": number(sigma),
        }),
        Classification::UpperBound { value } => json!({
            "status": "upper_bound",
            "value": number(value),
        }),
    }
}

pub fn extraction_to_value(result: &ExtractionResult, subject: &str) -> Value {
    let mut classes = Map::new();
    for c in Channel::ALL {
        classes.insert(SI_KEYS[c.index()].into(), classification(&result.classification[c.index()]));
    }
    let mc = &result.mc;
    let histograms: Map<String, Value> = SI_KEYS
        .iter()
        .zip(&mc.histograms)
        .map(|(k, h)| ((*k).to_string(), json!({ "lo": number(h.lo), "hi": number(h.hi), "counts": h.counts })))
        .collect();
    json!({
        "subject": subject,
        "channels": SI_KEYS,
        "x_hat": per_channel(&result.x_hat.as_array()),
        "classification": classes,
        "unconstrained": {
            "x": per_channel(&result.unconstrained.x),
            "sigma": per_channel(&result.unconstrained.sigma()),
        },
        "covariance": result.covariance().iter().map(|r| r.iter().map(|v| number(*v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "monte_carlo": {
            "samples": mc.samples,
            "failed": mc.failed,
            "mean": per_channel(&mc.mean),
            "std": per_channel(&mc.std),
            "mass_at_zero": per_channel(&mc.mass_at_zero),
            "percentiles": mc.percentiles.iter().map(|(p, v)| json!({ "p": p, "values": per_channel(v) })).collect::<Vec<_>>(),
            "histograms": histograms,
        },
        "residuals": result.residuals.iter().map(|r| json!({
            "label": r.label,
            "measured_loss_rate": number(r.measured),
            "predicted_loss_rate": number(r.predicted),
            "relative_residual": number(r.relative()),
            "predicted_loss_rate_unconstrained": number(r.predicted_unconstrained),
            "relative_residual_unconstrained": number(r.relative_unconstrained()),
        })).collect::<Vec<_>>(),
    })
}

pub const RESIDUAL_HEADER: [&str; 6] = [
    "label",
    "measured_loss_rate",
    "predicted_loss_rate",
    "relative_residual",
    "predicted_loss_rate_unconstrained",
    "relative_residual_unconstrained",
];

pub fn residual_rows(result: &ExtractionResult) -> Vec<Vec<String>> {
    result
        .residuals
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                cell(r.measured),
                cell(r.predicted),
                cell(r.relative()),
                cell(r.predicted_unconstrained),
                cell(r.relative_unconstrained()),
            ]
        })
        .collect()
}

pub const PREDICT_HEADER: [&str; 3] = ["label", "loss_rate", "q_int"];

pub fn predict_rows(p: &ParticipationMatrix, x: &MaterialLossVector) -> Vec<Vec<String>> {
    predict_quality_factors(p, x)
        .into_iter()
        .zip(p.rows())
        .map(|((label, q), (_, row))| vec![label, cell(row.loss_rate(x)), cell(q)])
        .collect()
}

pub fn predict_to_value(p: &ParticipationMatrix, x: &MaterialLossVector) -> Value {
    let modes: Vec<Value> = predict_quality_factors(p, x)
        .into_iter()
        .zip(p.rows())
        .map(|((label, q), (_, row))| json!({ "label": label, "loss_rate": number(row.loss_rate(x)), "q_int": number(q) }))
        .collect();
    json!({ "modes": modes })
}

pub const BUDGET_HEADER: [&str; 5] = ["label", "loss_rate", "conductor", "dielectric", "seam"];

pub fn budgets(p: &ParticipationMatrix, x: &MaterialLossVector) -> Result<Vec<(String, f64, LossBudget)>> {
    p.rows()
        .iter()
        .map(|(label, row)| {
            let b = loss_budget(row, x).context(format!("loss budget of mode {label}"))?;
            Ok((label.clone(), row.loss_rate(x), b))
        })
        .collect()
}

pub fn budget_rows(budgets: &[(String, f64, LossBudget)]) -> Vec<Vec<String>> {
    budgets
        .iter()
        .map(|(l, y, b)| vec![l.clone(), cell(*y), cell(b.conductor), cell(b.dielectric), cell(b.seam)])
        .collect()
}

pub fn budget_to_value(budgets: &[(String, f64, LossBudget)]) -> Value {
    let modes: Vec<Value> = budgets
        .iter()
        .map(|(l, y, b)| {
            json!({
                "label": l,
                "loss_rate": number(*y),
                "conductor": number(b.conductor),
                "dielectric": number(b.dielectric),
                "seam": number(b.seam),
            })
        })
        .collect();
    json!({ "modes": modes })
}

pub fn fit_to_value(fit: &ResonanceFit, eps_y: f64) -> Value {
    let e = &fit.std_errors;
    json!({
        "freq_hz": number(fit.f0),
        "q_loaded": number(fit.q_loaded),
        "q_c": number(fit.q_c),
        "q_int": number(fit.q_int),
        "mismatch_phase_rad": number(fit.mismatch_phase),
        "std_errors": {
            "freq_hz": number(e.f0),
            "q_loaded": number(e.q_loaded),
            "q_c": number(e.q_c),
            "q_int": number(e.q_int),
            "mismatch_phase_rad": number(e.mismatch_phase),
        },
        "eps_y": number(eps_y),
        "circle_residual_rel": number(fit.residual_rms),
        "phase_residual_rms_rad": number(fit.phase_residual_rms),
        "environment": {
            "amplitude": number(fit.environment.amplitude),
            "phase_rad": number(fit.environment.phase),
            "delay_s": number(fit.environment.delay),
        },
        "canonical_circle": {
            "center_re": number(fit.canonical_circle.center.re),
            "center_im": number(fit.canonical_circle.center.im),
            "radius": number(fit.canonical_circle.radius),
        },
        "diagnostics": fit.diagnostics.iter().map(|d| d.name()).collect::<Vec<_>>(),
    })
}

pub fn gap_to_value(est: &GapEstimate) -> Value {
    json!({
        "gap_m": number(est.gap),
        "gap_um": number(est.gap * 1e6),
        "rms_mismatch": number(est.rms),
        "max_abs_mismatch": number(est.max_abs),
        "flagged": est.flagged,
        "residuals": est.residuals.iter().map(|(l, r)| json!({ "label": l, "fractional_mismatch": number(*r) })).collect::<Vec<_>>(),
    })
}
