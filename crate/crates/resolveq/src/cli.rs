//! Command-line front end.
//!
//! Exit status: 0 on success, 1 for invalid input or usage, 2 when a solver
//! fails, 3 for I/O errors. Errors are printed to stderr as JSON.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use resolveq_core::gap::infer_gap;
use resolveq_core::sensitivity::{
    default_fixed, default_search_range, minimum_resolvable, SensitivityGridSpec,
};
use resolveq_core::spectral::{circle_fit_resonance, fit_to_measurement};
use resolveq_core::{fixtures, Channel, Error as CoreError};
use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::dataio::{self, Input};
use crate::error::{CoreContext, Error, Result};
use crate::manifest::RunManifest;
use crate::parallel;
use crate::report::{self, number};

#[derive(Debug, Parser)]
#[command(name = "resolveq", version, about = "Separate material loss channels of multi-mode resonators")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Monte-Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of Monte-Carlo samples.
    #[arg(long, global = true)]
    pub mc_samples: Option<usize>,
    /// Relative loss-rate uncertainty: a number for every mode or MODE=VALUE.
    /// Repeatable.
    #[arg(long = "eps-y", global = true, value_name = "VALUE|MODE=VALUE")]
    pub eps_y: Vec<String>,
    /// sigma-crossing[:K] or mc-percentile[:P].
    #[arg(long, global = true)]
    pub bound_rule: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write artifacts and a manifest into this directory instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON file of run settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the effective settings and exit.
    #[arg(long, global = true)]
    pub show_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract material losses from a device record.
    Extract {
        /// Device JSON path or fixtures://ID.
        device: String,
    },
    /// Map sigma/x of one channel over a plane of loss space.
    Sensitivity {
        /// Participation matrix or device JSON, or fixtures://NAME.
        matrix: String,
        /// Channel under test.
        #[arg(long)]
        channel: String,
        /// The two swept channels, e.g. r_s,tan_delta.
        #[arg(long)]
        plane: Option<String>,
        /// CHANNEL=VALUE in SI units. Repeatable.
        #[arg(long)]
        fixed: Vec<String>,
        /// Grid points per axis.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Predicted internal quality factor of every mode.
    Predict { matrix: String, losses: String },
    /// Fraction of each mode's loss from each channel.
    Budget { matrix: String, losses: String },
    /// Circle fit of a reflection trace (CSV).
    FitSpectrum {
        trace: String,
        #[arg(long, default_value = "mode")]
        label: String,
        /// Floor on the relative uncertainty of the fitted Q_int.
        #[arg(long)]
        eps_floor: Option<f64>,
        #[arg(long)]
        photon_number: Option<f64>,
    },
    /// Assembly gap from measured mode frequencies.
    InferGap { table: String, frequencies: String },
    /// List bundled reference data, or print one entry.
    Fixtures { name: Option<String> },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Extract { .. } => "extract",
            Command::Sensitivity { .. } => "sensitivity",
            Command::Predict { .. } => "predict",
            Command::Budget { .. } => "budget",
            Command::FitSpectrum { .. } => "fit-spectrum",
            Command::InferGap { .. } => "infer-gap",
            Command::Fixtures { .. } => "fixtures",
        }
    }
}

enum Body {
    Json(Value),
    Csv(String),
}

struct Artifact {
    file: String,
    body: Body,
    /// Printed to stdout when no output directory is given and the format
    /// matches.
    stdout_for: &'static [Format],
}

const JSON: &[Format] = &[Format::Json];
const CSV: &[Format] = &[Format::Csv];
const ANY: &[Format] = &[Format::Json, Format::Csv];
const NONE: &[Format] = &[];

impl Artifact {
    fn json(file: &str, v: Value, stdout_for: &'static [Format]) -> Self {
        Self {
            file: file.into(),
            body: Body::Json(v),
            stdout_for,
        }
    }

    fn csv(file: &str, text: String, stdout_for: &'static [Format]) -> Self {
        Self {
            file: file.into(),
            body: Body::Csv(text),
            stdout_for,
        }
    }

    fn render(&self, hash: &str) -> String {
        match &self.body {
            Body::Json(v) => {
                let mut m = Map::new();
                m.insert("manifest_sha256".into(), hash.into());
                if let Value::Object(o) = v {
                    m.extend(o.clone());
                } else {
                    m.insert("data".into(), v.clone());
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("JSON values serialize");
                s.push('\n');
                s
            }
            Body::Csv(t) => format!("# manifest_sha256: {hash}\n{t}"),
        }
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report_error(&Error::Usage(e.render().to_string().trim_end().to_string()));
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.kind().exit_code())
}

/// Effective settings: defaults, then the config file, then flags.
pub fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            RunConfig::from_json(&p.display().to_string(), &text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(n) = g.mc_samples {
        c.mc_samples = n;
    }
    c.apply_eps_args(&g.eps_y)?;
    if let Some(r) = &g.bound_rule {
        c.bound_rule = r.clone();
    }
    if let Some(f) = g.format {
        c.format = f;
    }
    c.validate()?;
    Ok(c)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut config = resolve_config(&cli.global)?;
    if let Some(Command::FitSpectrum { eps_floor: Some(f), .. }) = &cli.command {
        config.eps_floor = *f;
    }
    if let Some(Command::Sensitivity { points: Some(n), .. }) = &cli.command {
        config.grid_points = *n;
    }
    config.validate()?;
    if cli.global.show_config {
        let mut s = serde_json::to_string_pretty(&config).expect("config serializes");
        s.push('\n');
        return write_stdout(out, &s);
    }
    let Some(command) = cli.command else {
        return Err(Error::Usage("no command given; see --help".into()));
    };
    let threads = parallel::threads_from_env()?;
    let mut manifest = RunManifest::new(command.name(), &config);
    let artifacts = match &command {
        Command::Extract { device } => extract(device, &config, threads, &mut manifest)?,
        Command::Sensitivity {
            matrix,
            channel,
            plane,
            fixed,
            ..
        } => sensitivity(matrix, channel, plane.as_deref(), fixed, &config, threads, &mut manifest)?,
        Command::Predict { matrix, losses } => predict(matrix, losses, &mut manifest)?,
        Command::Budget { matrix, losses } => budget(matrix, losses, &mut manifest)?,
        Command::FitSpectrum {
            trace,
            label,
            photon_number,
            ..
        } => fit_spectrum(trace, label, *photon_number, &config, &mut manifest)?,
        Command::InferGap { table, frequencies } => gap(table, frequencies, &mut manifest)?,
        Command::Fixtures { name } => fixture_listing(name.as_deref())?,
    };

    match &cli.global.out {
        Some(dir) => {
            manifest.outputs = artifacts
                .iter()
                .map(|a| dir.join(&a.file).display().to_string())
                .chain([dir.join("manifest.json").display().to_string()])
                .collect();
            let hash = manifest.hash();
            for a in &artifacts {
                dataio::write_file(&dir.join(&a.file), &a.render(&hash))?;
            }
            dataio::write_file(&dir.join("manifest.json"), &manifest.to_json())
        }
        None => {
            manifest.outputs = vec!["-".into()];
            let hash = manifest.hash();
            let a = artifacts
                .iter()
                .find(|a| a.stdout_for.contains(&config.format))
                .ok_or_else(|| Error::Usage(format!("{} has no {:?} output", command.name(), config.format)))?;
            write_stdout(out, &a.render(&hash))
        }
    }
}

fn write_stdout(out: &mut dyn Write, s: &str) -> Result<()> {
    match out.write_all(s.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(|e| Error::io("<stdout>", e)),
    }
}

fn read_input(arg: &str, manifest: &mut RunManifest) -> Result<(Input, String)> {
    let input = Input::parse(arg);
    let text = match &input {
        Input::Fixture(n) if n == dataio::GAP_TABLE_FIXTURE => {
            serde_json::to_string(&dataio::gap_table_to_value(&fixtures::synthetic_gap_table()))
                .expect("JSON values serialize")
        }
        _ => input.read()?,
    };
    manifest.input(input.name(), &text);
    Ok((input, text))
}

fn extract(
    arg: &str,
    config: &RunConfig,
    threads: Option<usize>,
    manifest: &mut RunManifest,
) -> Result<Vec<Artifact>> {
    let (input, text) = read_input(arg, manifest)?;
    let device = dataio::device_from_json(&input.name(), &text)?
        .with_eps_y(config.eps_y, &config.eps_overrides())
        .map_err(|e| Error::Usage(e.to_string()))?;
    let result = parallel::extract(
        &device.participation_matrix(),
        &device.measurements(),
        &config.extraction()?,
        threads,
    )?;
    let mut v = report::extraction_to_value(&result, device.device_id());
    v["eps_y"] = device
        .measurements()
        .iter()
        .map(|m| json!({ "label": m.label(), "eps_y": m.q_int_rel_sigma() }))
        .collect::<Vec<_>>()
        .into();
    if let Some(rep) = device.reported() {
        let mut m = Map::new();
        for c in Channel::ALL {
            let key = c.name().to_string();
            m.insert(
                key,
                match rep[c.index()] {
                    resolveq_core::device::Reported::Resolved { value, sigma } => {
                        json!({ "status": "resolved", "value": number(value), "sigma": number(sigma) })
                    }
                    resolveq_core::device::Reported::Bound(b) => json!({ "status": "upper_bound", "value": number(b) }),
                },
            );
        }
        v["reported"] = Value::Object(m);
    }
    let residuals = dataio::table_to_csv(&report::RESIDUAL_HEADER, &report::residual_rows(&result));
    Ok(vec![
        Artifact::json("extraction.json", v, JSON),
        Artifact::csv("residuals.csv", residuals, CSV),
    ])
}

fn parse_channel(s: &str) -> Result<Channel> {
    s.trim().parse().map_err(|e: CoreError| Error::Usage(e.to_string()))
}

fn parse_fixed(args: &[String]) -> Result<Vec<(Channel, f64)>> {
    args.iter()
        .map(|a| {
            let (c, v) = a
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("--fixed expects CHANNEL=VALUE, got `{a}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Usage(format!("--fixed {c}: `{v}` is not a number")))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Usage(format!("--fixed {c}: value must be finite and non-negative")));
            }
            Ok((parse_channel(c)?, v))
        })
        .collect()
}

fn sensitivity(
    arg: &str,
    channel: &str,
    plane: Option<&str>,
    fixed_args: &[String],
    config: &RunConfig,
    threads: Option<usize>,
    manifest: &mut RunManifest,
) -> Result<Vec<Artifact>> {
    let (input, text) = read_input(arg, manifest)?;
    let mi = dataio::matrix_from_json(&input.name(), &text)?.with_eps_y(config.eps_y, &config.eps_overrides())?;
    let cut = parse_channel(channel)?;
    let fixed = parse_fixed(fixed_args)?;
    manifest.argument("channel", cut.name());
    if let Some(p) = plane {
        manifest.argument("plane", p);
    }
    for a in fixed_args {
        manifest.argument("fixed", a);
    }

    let fixed_channel = match plane {
        Some(p) => {
            let swept = p.split(',').map(parse_channel).collect::<Result<Vec<_>>>()?;
            if swept.len() != 2 || swept[0] == swept[1] {
                return Err(Error::Usage(format!("--plane needs two different channels, got `{p}`")));
            }
            Channel::ALL
                .into_iter()
                .find(|c| !swept.contains(c))
                .expect("three channels")
        }
        None => match fixed.iter().filter(|(c, _)| *c != cut).collect::<Vec<_>>().as_slice() {
            [(c, _)] => *c,
            _ if cut == Channel::SeamResistance => Channel::LossTangent,
            _ => Channel::SeamResistance,
        },
    };

    let mut plateau = default_fixed(cut);
    for (c, v) in &fixed {
        if *c != cut {
            plateau = plateau.with(*c, *v).context("--fixed")?;
        }
    }
    let fixed_value = fixed
        .iter()
        .rev()
        .find(|(c, _)| *c == fixed_channel)
        .map(|(_, v)| *v)
        .unwrap_or_else(|| plateau.get(fixed_channel));
    if !(fixed_value > 0.0) {
        return Err(Error::Usage(format!(
            "give a positive value for the fixed channel with --fixed {}=VALUE",
            fixed_channel.name()
        )));
    }

    let mut spec = SensitivityGridSpec::plane(cut, fixed_channel, fixed_value, mi.matrix.len()).context("sensitivity")?;
    spec.eps_y = mi.eps_y.clone();
    for a in &mut spec.axes {
        a.points = config.grid_points;
    }
    let grid = parallel::sensitivity_grid(&mi.matrix, &spec, threads)?;

    let minimum = match minimum_resolvable(&mi.matrix, &mi.eps_y, cut, &plateau, default_search_range(cut)) {
        Ok(v) => json!({ "value": number(v) }),
        Err(CoreError::NoBoundary { lo, hi }) => {
            json!({ "value": Value::Null, "reason": format!("sigma/x does not reach 1 between {lo:e} and {hi:e}") })
        }
        Err(e) => return Err(Error::core("minimum resolvable value", e)),
    };
    let mut plateau_json = Map::new();
    for c in Channel::ALL.into_iter().filter(|c| *c != cut) {
        plateau_json.insert(c.name().into(), number(plateau.get(c)));
    }
    let summary = json!({
        "matrix": mi.name.clone().unwrap_or_else(|| input.name()),
        "channel": cut.name(),
        "plane": [spec.axes[0].channel.name(), spec.axes[1].channel.name()],
        "fixed": { fixed_channel.name(): number(fixed_value) },
        "eps_y": mi.matrix.labels().zip(&mi.eps_y).map(|(l, e)| json!({ "label": l, "eps_y": e })).collect::<Vec<_>>(),
        "points": config.grid_points,
        "minimum_resolvable": {
            "others": plateau_json,
            "search_range": [default_search_range(cut).0, default_search_range(cut).1],
            "result": minimum,
        },
        "boundary": grid.boundary.iter().map(|[a, b]| json!([a, b])).collect::<Vec<_>>(),
    });
    Ok(vec![
        Artifact::json("sensitivity.json", summary, JSON),
        Artifact::csv("grid.csv", dataio::grid_to_csv(&grid), CSV),
        Artifact::csv("boundary.csv", dataio::boundary_to_csv(&grid), NONE),
    ])
}

fn matrix_and_losses(
    matrix: &str,
    losses: &str,
    manifest: &mut RunManifest,
) -> Result<(dataio::MatrixInput, resolveq_core::MaterialLossVector)> {
    let (mi, mt) = read_input(matrix, manifest)?;
    let (li, lt) = read_input(losses, manifest)?;
    Ok((
        dataio::matrix_from_json(&mi.name(), &mt)?,
        dataio::losses_from_json(&li.name(), &lt)?,
    ))
}

fn predict(matrix: &str, losses: &str, manifest: &mut RunManifest) -> Result<Vec<Artifact>> {
    let (mi, x) = matrix_and_losses(matrix, losses, manifest)?;
    Ok(vec![
        Artifact::json("predict.json", report::predict_to_value(&mi.matrix, &x), JSON),
        Artifact::csv(
            "predict.csv",
            dataio::table_to_csv(&report::PREDICT_HEADER, &report::predict_rows(&mi.matrix, &x)),
            CSV,
        ),
    ])
}

fn budget(matrix: &str, losses: &str, manifest: &mut RunManifest) -> Result<Vec<Artifact>> {
    let (mi, x) = matrix_and_losses(matrix, losses, manifest)?;
    let b = report::budgets(&mi.matrix, &x)?;
    Ok(vec![
        Artifact::json("budget.json", report::budget_to_value(&b), JSON),
        Artifact::csv(
            "budget.csv",
            dataio::table_to_csv(&report::BUDGET_HEADER, &report::budget_rows(&b)),
            CSV,
        ),
    ])
}

fn fit_spectrum(
    arg: &str,
    label: &str,
    photon_number: Option<f64>,
    config: &RunConfig,
    manifest: &mut RunManifest,
) -> Result<Vec<Artifact>> {
    let (input, text) = read_input(arg, manifest)?;
    manifest.argument("label", label);
    let mut trace = dataio::trace_from_csv(&input.name(), &text)?;
    if let Some(n) = photon_number {
        manifest.argument("photon_number", n);
        trace = trace.with_photon_number(n).context("--photon-number")?;
    }
    let fit = circle_fit_resonance(&trace).context("circle fit")?;
    let mut m = fit_to_measurement(&fit, label, config.eps_floor).context("fit to measurement")?;
    if let Some(n) = trace.photon_number() {
        m = m.with_photon_number(n).context("fit to measurement")?;
    }
    let mut v = report::fit_to_value(&fit, m.q_int_rel_sigma());
    let mut mode = json!({
        "label": m.label(),
        "freq_hz": m.frequency(),
        "q_int": m.q_int(),
        "q_c": number(fit.q_c),
        "eps_y": m.q_int_rel_sigma(),
    });
    if let Some(n) = m.photon_number() {
        mode["photon_number"] = n.into();
    }
    v["measurement"] = mode;
    let row = vec![
        label.to_string(),
        report::cell(fit.f0),
        report::cell(fit.q_int),
        report::cell(fit.std_errors.q_int),
        report::cell(fit.q_c),
        report::cell(fit.std_errors.q_c),
        report::cell(fit.q_loaded),
        report::cell(fit.mismatch_phase),
        report::cell(m.q_int_rel_sigma()),
    ];
    let csv = dataio::table_to_csv(
        &["label", "freq_hz", "q_int", "q_int_sigma", "q_c", "q_c_sigma", "q_loaded", "mismatch_phase_rad", "eps_y"],
        &[row],
    );
    Ok(vec![
        Artifact::json("fit.json", v, JSON),
        Artifact::csv("fit.csv", csv, CSV),
    ])
}

fn gap(table: &str, freqs: &str, manifest: &mut RunManifest) -> Result<Vec<Artifact>> {
    let (ti, tt) = read_input(table, manifest)?;
    let (fi, ft) = read_input(freqs, manifest)?;
    let table = dataio::gap_table_from_json(&ti.name(), &tt)?;
    let measured = dataio::frequencies_from_json(&fi.name(), &ft)?;
    let est = infer_gap(&table, &measured).context("gap inference")?;
    let rows: Vec<Vec<String>> = est
        .residuals
        .iter()
        .map(|(l, r)| vec![report::cell(est.gap), l.clone(), report::cell(*r)])
        .collect();
    Ok(vec![
        Artifact::json("gap.json", report::gap_to_value(&est), JSON),
        Artifact::csv(
            "gap.csv",
            dataio::table_to_csv(&["gap_m", "label", "fractional_mismatch"], &rows),
            CSV,
        ),
    ])
}

fn fixture_listing(name: Option<&str>) -> Result<Vec<Artifact>> {
    let Some(name) = name else {
        let devices = fixtures::builtin_fixtures();
        let list: Vec<Value> = devices
            .iter()
            .map(|d| {
                json!({
                    "id": d.device_id(),
                    "uri": format!("{}{}", dataio::FIXTURE_SCHEME, d.device_id()),
                    "geometry": d.geometry().name(),
                    "materials": d.materials(),
                    "modes": d.modes().iter().map(|m| m.measurement.label()).collect::<Vec<_>>(),
                })
            })
            .collect();
        let rows: Vec<Vec<String>> = devices
            .iter()
            .map(|d| vec![d.device_id().to_string(), "device".into(), d.geometry().name().into()])
            .chain(["P_FWGMR", "P_ellip"].map(|n| vec![n.to_string(), "participation_matrix".into(), String::new()]))
            .chain([vec![dataio::GAP_TABLE_FIXTURE.to_string(), "gap_table".into(), String::new()]])
            .collect();
        return Ok(vec![
            Artifact::json(
                "fixtures.json",
                json!({
                    "devices": list,
                    "participation_matrices": ["P_FWGMR", "P_ellip"],
                    "gap_tables": [dataio::GAP_TABLE_FIXTURE],
                }),
                JSON,
            ),
            Artifact::csv("fixtures.csv", dataio::table_to_csv(&["name", "kind", "geometry"], &rows), CSV),
        ]);
    };
    let input = Input::Fixture(name.to_string());
    let value = if name == dataio::GAP_TABLE_FIXTURE {
        dataio::gap_table_to_value(&fixtures::synthetic_gap_table())
    } else if let Some(m) = fixtures::matrix(name) {
        dataio::matrix_to_value(&dataio::MatrixInput::new(Some(name.to_string()), m))
    } else {
        dataio::device_to_value(&dataio::load_device(&input)?)
    };
    Ok(vec![Artifact::json(&format!("{name}.json"), value, ANY)])
}
