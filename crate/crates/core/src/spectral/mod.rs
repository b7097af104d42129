//! Single-port reflection spectra: synthesis and circle fitting.
//!
//! The reflection of a resonator coupled to a port with an impedance mismatch
//! `phi` is
//!
//! ```text
//! S11(f) = a e^{i alpha} e^{-2 pi i f tau} [1 - (2 Ql / |Qc|) e^{i phi} / (1 + 2 i Ql (f - f0) / f0)]
//! ```
//!
//! with `1/Ql = 1/Qi + cos(phi) / |Qc|`. In the complex plane the bracket traces
//! a circle of diameter `2 Ql / |Qc|` through `1`.

mod circle;

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

pub use circle::{taubin_fit, Circle};

use crate::error::{Error, Result};
use crate::gap::golden_section;
use crate::loss_model::ModeMeasurement;

pub const MIN_TRACE_POINTS: usize = 32;

/// Relative circle residual above which a trace is rejected as non-circular.
pub const MAX_CIRCLE_RESIDUAL: f64 = 0.2;

/// Relative circle residual above which a fit is flagged as noisy.
pub const LOW_SNR_RESIDUAL: f64 = 0.05;

/// Canonical-frame diameter below which a fit is flagged as strongly
/// undercoupled.
pub const UNDERCOUPLED_DIAMETER: f64 = 0.05;

const DELAY_GRID: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionTrace {
    frequencies: Vec<f64>,
    s11: Vec<Complex64>,
    photon_number: Option<f64>,
}

impl ReflectionTrace {
    pub fn new(frequencies: Vec<f64>, s11: Vec<Complex64>) -> Result<Self> {
        if frequencies.len() != s11.len() {
            return Err(Error::DimensionMismatch {
                expected: frequencies.len(),
                found: s11.len(),
            });
        }
        if frequencies.len() < MIN_TRACE_POINTS {
            return Err(Error::invalid(
                "trace",
                alloc::format!("needs at least {MIN_TRACE_POINTS} points, got {}", frequencies.len()),
            ));
        }
        for (i, f) in frequencies.iter().enumerate() {
            if !(f.is_finite() && *f > 0.0) {
                return Err(Error::invalid(alloc::format!("trace frequency[{i}]"), "must be finite and positive"));
            }
            if i > 0 && *f <= frequencies[i - 1] {
                return Err(Error::invalid(alloc::format!("trace frequency[{i}]"), "frequencies must be strictly increasing"));
            }
        }
        if let Some(i) = s11.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid(alloc::format!("trace s11[{i}]"), "must be finite"));
        }
        Ok(Self {
            frequencies,
            s11,
            photon_number: None,
        })
    }

    pub fn with_photon_number(mut self, n: f64) -> Result<Self> {
        if !(n.is_finite() && n >= 0.0) {
            return Err(Error::invalid("photon_number", "must be finite and non-negative"));
        }
        self.photon_number = Some(n);
        Ok(self)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn s11(&self) -> &[Complex64] {
        &self.s11
    }

    pub fn photon_number(&self) -> Option<f64> {
        self.photon_number
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Every sample multiplied by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            s11: self.s11.iter().map(|z| z * factor).collect(),
            ..self.clone()
        }
    }
}

/// Resonance parameters of a reflection-coupled mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorParams {
    pub f0: f64,
    pub q_int: f64,
    /// Magnitude of the complex coupling quality factor; may be infinite.
    pub q_c: f64,
    /// Impedance-mismatch phase, radians.
    pub mismatch_phase: f64,
}

impl ResonatorParams {
    pub fn new(f0: f64, q_int: f64, q_c: f64, mismatch_phase: f64) -> Result<Self> {
        let p = Self {
            f0,
            q_int,
            q_c,
            mismatch_phase,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.f0.is_finite() && self.f0 > 0.0) {
            return Err(Error::invalid("f0", "must be finite and positive"));
        }
        if !(self.q_int.is_finite() && self.q_int > 0.0) {
            return Err(Error::invalid("q_int", "must be finite and positive"));
        }
        if !(self.q_c > 0.0) {
            return Err(Error::invalid("q_c", "must be positive"));
        }
        if !self.mismatch_phase.is_finite() {
            return Err(Error::invalid("mismatch_phase", "must be finite"));
        }
        if !(self.q_loaded() > 0.0 && self.q_loaded().is_finite()) {
            return Err(Error::invalid("mismatch_phase", "gives a non-positive loaded quality factor"));
        }
        Ok(())
    }

    pub fn q_loaded(&self) -> f64 {
        1.0 / (1.0 / self.q_int + libm::cos(self.mismatch_phase) / self.q_c)
    }
}

/// Amplitude, phase and cable delay of the measurement chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub amplitude: f64,
    pub phase: f64,
    /// seconds
    pub delay: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            phase: 0.0,
            delay: 0.0,
        }
    }
}

/// Noiseless reflection coefficient at `f`.
pub fn reflection(params: &ResonatorParams, env: &Environment, f: f64) -> Complex64 {
    let prefactor = Complex64::from_polar(env.amplitude, env.phase - TAU * f * env.delay);
    if params.q_c.is_infinite() {
        return prefactor;
    }
    let ql = params.q_loaded();
    let x = (f - params.f0) / params.f0;
    let num = Complex64::from_polar(2.0 * ql / params.q_c, params.mismatch_phase);
    prefactor * (Complex64::new(1.0, 0.0) - num / Complex64::new(1.0, 2.0 * ql * x))
}

/// `points` frequencies spanning `linewidths` loaded linewidths around `f0`.
pub fn frequency_grid(f0: f64, q_loaded: f64, linewidths: f64, points: usize) -> Vec<f64> {
    let half = 0.5 * linewidths * f0 / q_loaded;
    (0..points)
        .map(|k| f0 - half + 2.0 * half * k as f64 / (points - 1) as f64)
        .collect()
}

/// Samples the model on `frequencies` and adds independent normal noise of
/// standard deviation `noise_sigma` to each quadrature.
pub fn synthesize_reflection<R: RngCore + ?Sized>(
    params: &ResonatorParams,
    env: &Environment,
    noise_sigma: f64,
    frequencies: &[f64],
    rng: &mut R,
) -> Result<ReflectionTrace> {
    params.validate()?;
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::invalid("noise_sigma", "must be finite and non-negative"));
    }
    if !(env.amplitude.is_finite() && env.amplitude > 0.0 && env.phase.is_finite() && env.delay.is_finite()) {
        return Err(Error::invalid("environment", "amplitude must be positive, phase and delay finite"));
    }
    let s11 = frequencies
        .iter()
        .map(|&f| {
            let mut z = reflection(params, env, f);
            if noise_sigma > 0.0 {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                z += Complex64::new(re, im) * noise_sigma;
            }
            z
        })
        .collect();
    ReflectionTrace::new(frequencies.to_vec(), s11)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagnostic {
    /// The trace does not extend at least one linewidth to each side of the
    /// resonance.
    OffResonanceSpan,
    /// The canonical circle is very small; the coupling is much weaker than the
    /// internal loss.
    UndercoupledExtreme,
    /// The circle residual exceeds [`LOW_SNR_RESIDUAL`] of the radius.
    LowSnr,
}

impl Diagnostic {
    pub fn name(self) -> &'static str {
        match self {
            Diagnostic::OffResonanceSpan => "off_resonance_span",
            Diagnostic::UndercoupledExtreme => "undercoupled_extreme",
            Diagnostic::LowSnr => "low_snr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardErrors {
    pub f0: f64,
    pub q_loaded: f64,
    pub q_c: f64,
    pub mismatch_phase: f64,
    pub q_int: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceFit {
    pub f0: f64,
    pub q_loaded: f64,
    /// Magnitude of the complex coupling quality factor.
    pub q_c: f64,
    pub mismatch_phase: f64,
    pub q_int: f64,
    pub std_errors: StandardErrors,
    /// RMS radial residual of the circle fit, relative to its radius.
    pub residual_rms: f64,
    /// RMS residual of the phase fit, radians.
    pub phase_residual_rms: f64,
    pub environment: Environment,
    /// Circle in the frame where the off-resonant point is `1`.
    pub canonical_circle: Circle,
    pub diagnostics: Vec<Diagnostic>,
}

impl ResonanceFit {
    pub fn q_int_rel_error(&self) -> f64 {
        self.std_errors.q_int / self.q_int
    }
}

/// Circle fit of a reflection trace.
///
/// The cable delay is chosen to make the trace most circular; the circle
/// centre and radius come from a Taubin fit; `f0` and `Ql` from a
/// least-squares fit of the phase around the centre; `|Qc|` and `phi` from
/// the circle in the frame normalized by the off-resonant point. These seed a
/// least-squares fit of the full complex model, which also supplies the
/// standard errors.
pub fn circle_fit_resonance(trace: &ReflectionTrace) -> Result<ResonanceFit> {
    let f = trace.frequencies();
    let n = f.len();
    let f_ref = 0.5 * (f[0] + f[n - 1]);
    let span = f[n - 1] - f[0];

    let tau = find_delay(trace, f_ref);
    let mut z: Vec<Complex64> = trace
        .s11()
        .iter()
        .zip(f)
        .map(|(s, fk)| s * Complex64::from_polar(1.0, TAU * (fk - f_ref) * tau))
        .collect();
    let mut circle = taubin_fit(&z).ok_or_else(|| fit_failure("circle fit is degenerate"))?;
    let residual_rms = circle.rms_residual(&z) / circle.radius;
    if !(residual_rms <= MAX_CIRCLE_RESIDUAL) {
        return Err(fit_failure(alloc::format!(
            "trace is not circular (relative residual {residual_rms:.3})"
        )));
    }

    let mut theta = unwrapped_angles(&z, circle.center);
    // The model circulates clockwise; accept the opposite sign convention.
    let mirrored = theta[n - 1] > theta[0];
    if mirrored {
        for v in z.iter_mut() {
            *v = v.conj();
        }
        circle.center = circle.center.conj();
        theta = unwrapped_angles(&z, circle.center);
    }

    let phase = fit_phase(f, &theta)?;
    if !(phase.f0 >= f[0] && phase.f0 <= f[n - 1]) {
        return Err(fit_failure("resonance frequency lies outside the trace"));
    }
    let off = circle.center + Complex64::from_polar(circle.radius, phase.theta0 + PI);
    if off.norm() == 0.0 {
        return Err(fit_failure("off-resonant point is at the origin"));
    }
    let c_can = circle.center / off;
    let r_can = circle.radius / off.norm();
    if !(r_can > 1e-9) {
        return Err(fit_failure("no resonance circle"));
    }
    let seed = Model {
        a: off,
        k: Complex64::from_polar(2.0 * r_can, (Complex64::new(1.0, 0.0) - c_can).arg()),
        q_loaded: phase.q_loaded,
        f0: phase.f0,
        delay: 0.0,
    };
    let refined = refine_model(f, &z, f_ref, seed)?;
    let m = refined.model;
    if !(m.f0 >= f[0] && m.f0 <= f[n - 1]) {
        return Err(fit_failure("resonance frequency lies outside the trace"));
    }
    let q_int = m.q_int();
    if !(q_int > 0.0 && q_int.is_finite()) {
        return Err(fit_failure(alloc::format!(
            "internal quality factor is not positive after mismatch correction (Qi = {q_int:e})"
        )));
    }
    let r_can = 0.5 * m.k.norm();
    let (mut phi, mut alpha, mut c_can) = (m.k.arg(), m.a.arg(), Complex64::new(1.0, 0.0) - m.k * 0.5);
    let delay = if mirrored {
        phi = -phi;
        alpha = -alpha;
        c_can = c_can.conj();
        tau - m.delay
    } else {
        tau + m.delay
    };
    alpha = wrap_phase(alpha + TAU * f_ref * delay);

    let mut diagnostics = Vec::new();
    let linewidth = m.f0 / m.q_loaded;
    if m.f0 - f[0] < linewidth || f[n - 1] - m.f0 < linewidth || span < 2.0 * linewidth {
        diagnostics.push(Diagnostic::OffResonanceSpan);
    }
    if 2.0 * r_can < UNDERCOUPLED_DIAMETER {
        diagnostics.push(Diagnostic::UndercoupledExtreme);
    }
    if residual_rms > LOW_SNR_RESIDUAL {
        diagnostics.push(Diagnostic::LowSnr);
    }

    Ok(ResonanceFit {
        f0: m.f0,
        q_loaded: m.q_loaded,
        q_c: m.q_c(),
        mismatch_phase: phi,
        q_int,
        std_errors: refined.std_errors,
        residual_rms,
        phase_residual_rms: phase.rms,
        environment: Environment {
            amplitude: m.a.norm(),
            phase: alpha,
            delay,
        },
        canonical_circle: Circle {
            center: c_can,
            radius: r_can,
        },
        diagnostics,
    })
}

/// Complex model in the frame where the delay has been mostly removed.
#[derive(Debug, Clone, Copy)]
struct Model {
    a: Complex64,
    /// `(2 Ql / |Qc|) e^{i phi}`
    k: Complex64,
    q_loaded: f64,
    f0: f64,
    delay: f64,
}

impl Model {
    fn eval(&self, f: f64, f_ref: f64) -> Complex64 {
        let u = 2.0 * self.q_loaded * (f - self.f0) / self.f0;
        self.a
            * Complex64::from_polar(1.0, -TAU * (f - f_ref) * self.delay)
            * (Complex64::new(1.0, 0.0) - self.k / Complex64::new(1.0, u))
    }

    fn q_c(&self) -> f64 {
        2.0 * self.q_loaded / self.k.norm()
    }

    fn q_int(&self) -> f64 {
        2.0 * self.q_loaded / (2.0 - self.k.re)
    }
}

struct Refined {
    model: Model,
    std_errors: StandardErrors,
}

type Params = nalgebra::SVector<f64, 7>;
type ParamMatrix = nalgebra::SMatrix<f64, 7, 7>;

/// Levenberg-Marquardt fit of the complex model to every sample, starting
/// from the circle estimates. Parameters are scaled to order one: the
/// amplitude relative to the seed, the delay in units of the inverse span,
/// `Ql` relative to the seed, `f0` in seed linewidths and `k` relative to its
/// seed magnitude.
fn refine_model(f: &[f64], z: &[Complex64], f_ref: f64, seed: Model) -> Result<Refined> {
    let n = f.len();
    let span = f[n - 1] - f[0];
    let w0 = seed.f0 / seed.q_loaded;
    let ks = seed.k.norm();
    let unpack = |q: &Params| Model {
        a: seed.a * Complex64::new(q[0], q[1]),
        delay: q[2] / span,
        q_loaded: seed.q_loaded * q[3],
        f0: seed.f0 + q[4] * w0,
        k: Complex64::new(q[5], q[6]) * ks,
    };
    let residuals = |q: &Params| -> Vec<f64> {
        let m = unpack(q);
        let mut r = Vec::with_capacity(2 * n);
        for (fk, zk) in f.iter().zip(z) {
            let d = zk - m.eval(*fk, f_ref);
            r.push(d.re);
            r.push(d.im);
        }
        r
    };
    let jacobian = |q: &Params| -> Vec<[f64; 7]> {
        let mut j = alloc::vec![[0.0; 7]; 2 * n];
        for c in 0..7 {
            let h = 1e-6 * q[c].abs().max(1.0);
            let mut qp = *q;
            let mut qm = *q;
            qp[c] += h;
            qm[c] -= h;
            let rp = residuals(&qp);
            let rm = residuals(&qm);
            for (row, (a, b)) in j.iter_mut().zip(rp.iter().zip(&rm)) {
                row[c] = (a - b) / (2.0 * h);
            }
        }
        j
    };
    let normal = |j: &[[f64; 7]], r: &[f64]| -> (ParamMatrix, Params) {
        let mut jtj = ParamMatrix::zeros();
        let mut jtr = Params::zeros();
        for (row, rk) in j.iter().zip(r) {
            let v = Params::from(*row);
            jtj += v * v.transpose();
            jtr += v * *rk;
        }
        (jtj, jtr)
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut q = Params::from([1.0, 0.0, 0.0, 1.0, 0.0, seed.k.re / ks, seed.k.im / ks]);
    let mut r = residuals(&q);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    for _ in 0..100 {
        let j = jacobian(&q);
        let (jtj, jtr) = normal(&j, &r);
        let mut accepted = None;
        while lambda < 1e12 {
            let mut a = jtj;
            for d in 0..7 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-30);
            }
            match a.lu().solve(&(-jtr)) {
                Some(step) if q[3] + step[3] > 0.0 => {
                    let trial = q + step;
                    let r2 = residuals(&trial);
                    let c2 = cost(&r2);
                    if c2 <= c {
                        accepted = Some((trial, r2, c2, step.norm()));
                        break;
                    }
                }
                _ => {}
            }
            lambda *= 10.0;
        }
        let Some((trial, r2, c2, step)) = accepted else {
            break;
        };
        let small = c - c2 <= 1e-14 * c || step < 1e-13;
        q = trial;
        r = r2;
        c = c2;
        lambda = (lambda / 10.0).max(1e-12);
        if small {
            break;
        }
    }

    let j = jacobian(&q);
    let (jtj, _) = normal(&j, &r);
    let s2 = c / (2 * n - 7) as f64;
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| fit_failure("model refinement is singular"))?
        * s2;
    let model = unpack(&q);
    if !(model.q_loaded > 0.0 && model.q_loaded.is_finite() && model.k.norm() > 0.0) {
        return Err(fit_failure("model refinement diverged"));
    }
    let sigma = |g: &dyn Fn(&Model) -> f64| -> f64 {
        let mut grad = Params::zeros();
        for d in 0..7 {
            let h = 1e-6 * q[d].abs().max(1.0);
            let mut qp = q;
            let mut qm = q;
            qp[d] += h;
            qm[d] -= h;
            grad[d] = (g(&unpack(&qp)) - g(&unpack(&qm))) / (2.0 * h);
        }
        libm::sqrt((grad.transpose() * cov * grad)[(0, 0)].max(0.0))
    };
    let std_errors = StandardErrors {
        f0: sigma(&|m| m.f0),
        q_loaded: sigma(&|m| m.q_loaded),
        q_c: sigma(&|m| m.q_c()),
        mismatch_phase: sigma(&|m| m.k.arg()),
        q_int: sigma(&|m| m.q_int()),
    };
    Ok(Refined { model, std_errors })
}

/// Converts a fit into a mode measurement whose relative loss-rate
/// uncertainty is the larger of the fit's relative `Q_int` error and
/// `eps_floor`.
pub fn fit_to_measurement(fit: &ResonanceFit, label: impl Into<String>, eps_floor: f64) -> Result<ModeMeasurement> {
    if !(0.0..1.0).contains(&eps_floor) {
        return Err(Error::invalid("eps_floor", "must lie in [0, 1)"));
    }
    let eps = fit.q_int_rel_error().max(eps_floor);
    ModeMeasurement::new(label, fit.f0, fit.q_int, eps)?.with_coupling_q(fit.q_c)
}

/// Default floor on the relative loss-rate uncertainty.
pub const DEFAULT_EPS_FLOOR: f64 = 0.05;

fn fit_failure(reason: impl Into<String>) -> Error {
    Error::FitFailure { reason: reason.into() }
}

fn wrap_phase(a: f64) -> f64 {
    let w = libm::remainder(a, TAU);
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

fn unwrapped_angles(z: &[Complex64], center: Complex64) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    let mut prev = 0.0;
    for (k, v) in z.iter().enumerate() {
        let a = (v - center).arg();
        let a = if k == 0 { a } else { prev + wrap_phase(a - prev) };
        out.push(a);
        prev = a;
    }
    out
}

/// Circle residual after removing `tau`.
fn circularity(trace: &ReflectionTrace, f_ref: f64, tau: f64) -> f64 {
    let z: Vec<Complex64> = trace
        .s11()
        .iter()
        .zip(trace.frequencies())
        .map(|(s, f)| s * Complex64::from_polar(1.0, TAU * (f - f_ref) * tau))
        .collect();
    match taubin_fit(&z) {
        Some(c) if c.radius > 0.0 => c.rms_residual(&z),
        _ => f64::INFINITY,
    }
}

/// Delay guess from the phase slope at both trace edges, refined by a grid
/// search over one phase turn across the span and golden-section search.
fn find_delay(trace: &ReflectionTrace, f_ref: f64) -> f64 {
    let f = trace.frequencies();
    let n = f.len();
    let raw: Vec<f64> = unwrapped_angles(trace.s11(), Complex64::new(0.0, 0.0));
    let edge = (n / 10).max(3);
    let slope = 0.5 * (linear_slope(&f[..edge], &raw[..edge]) + linear_slope(&f[n - edge..], &raw[n - edge..]));
    let tau0 = -slope / TAU;
    let span = f[n - 1] - f[0];
    let step = 1.0 / span / (DELAY_GRID as f64 / 2.0);
    let objective = |tau: f64| circularity(trace, f_ref, tau);
    let grid: Vec<f64> = (0..=DELAY_GRID)
        .map(|k| tau0 + (k as f64 - (DELAY_GRID / 2) as f64) * step)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&t| objective(t)).collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("grid is not empty");
    let refined = golden_section(&objective, grid[best] - step, grid[best] + step, step * 1e-9);
    if objective(refined) <= values[best] {
        refined
    } else {
        grid[best]
    }
}

fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

struct PhaseFit {
    theta0: f64,
    q_loaded: f64,
    f0: f64,
    rms: f64,
}

/// Levenberg-Marquardt fit of `theta(f) = theta0 - 2 atan(2 Ql (f - f0) / f0)`.
///
/// Parameters are `theta0`, `Ql / Ql_guess` and the `f0` offset in units of the
/// initial linewidth.
fn fit_phase(f: &[f64], theta: &[f64]) -> Result<PhaseFit> {
    let n = f.len();
    // Initial guesses from the steepest phase change and the half-width points.
    let k_max = (0..n - 1)
        .max_by(|&a, &b| {
            let sa = (theta[a] - theta[a + 1]) / (f[a + 1] - f[a]);
            let sb = (theta[b] - theta[b + 1]) / (f[b + 1] - f[b]);
            sa.total_cmp(&sb)
        })
        .expect("trace has points");
    let f00 = 0.5 * (f[k_max] + f[k_max + 1]);
    let theta00 = 0.5 * (theta[k_max] + theta[k_max + 1]);
    let lower = (0..=k_max).rev().find(|&k| theta[k] >= theta00 + PI / 2.0);
    let upper = (k_max + 1..n).find(|&k| theta[k] <= theta00 - PI / 2.0);
    let ql0 = match (lower, upper) {
        (Some(a), Some(b)) if f[b] > f[a] => f00 / (f[b] - f[a]),
        _ => {
            let slope = (theta[k_max] - theta[k_max + 1]) / (f[k_max + 1] - f[k_max]);
            (slope * f00 / 4.0).max(1.0)
        }
    };
    let w0 = f00 / ql0;

    let residuals = |p: &Vector3<f64>| -> (Vec<f64>, Vec<[f64; 3]>) {
        let ql = p[1] * ql0;
        let f0 = f00 + p[2] * w0;
        let mut r = Vec::with_capacity(n);
        let mut j = Vec::with_capacity(n);
        for (fk, th) in f.iter().zip(theta) {
            let df = (fk - f00) - p[2] * w0;
            let u = 2.0 * ql * df / f0;
            let g = 2.0 / (1.0 + u * u);
            r.push(th - p[0] + 2.0 * libm::atan(u));
            j.push([-1.0, g * 2.0 * ql0 * df / f0, -g * 2.0 * ql * fk * w0 / (f0 * f0)]);
        }
        (r, j)
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut p = Vector3::new(theta00, 1.0, 0.0);
    let (mut r, mut jac) = residuals(&p);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (row, rk) in jac.iter().zip(&r) {
            let v = Vector3::from(*row);
            jtj += v * v.transpose();
            jtr += v * *rk;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for d in 0..3 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-30);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            if !(trial[1] > 0.0) {
                lambda *= 10.0;
                continue;
            }
            let (r2, j2) = residuals(&trial);
            let c2 = cost(&r2);
            if c2 <= c {
                let done = c - c2 <= 1e-15 * c.max(1e-300) && step.norm() < 1e-12;
                p = trial;
                r = r2;
                jac = j2;
                c = c2;
                lambda = (lambda / 10.0).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }

    let mut jtj = Matrix3::zeros();
    for row in &jac {
        let v = Vector3::from(*row);
        jtj += v * v.transpose();
    }
    let q_loaded = p[1] * ql0;
    if !(q_loaded.is_finite() && q_loaded > 0.0) {
        return Err(fit_failure("loaded quality factor is not positive"));
    }
    Ok(PhaseFit {
        theta0: p[0],
        q_loaded,
        f0: f00 + p[2] * w0,
        rms: libm::sqrt(c / n as f64),
    })
}
