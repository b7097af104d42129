//! Run settings. Precedence: command-line flags, then the `--config` file,
//! then built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use resolveq_core::extraction::{BoundRule, ExtractionConfig};
use resolveq_core::sensitivity::DEFAULT_GRID_POINTS;
use resolveq_core::spectral::DEFAULT_EPS_FLOOR;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Textual form of a [`BoundRule`]: `sigma-crossing[:K]` or
/// `mc-percentile[:P]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRuleSpec(pub BoundRule);

impl FromStr for BoundRuleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |default: f64| -> Result<f64> {
            arg.map_or(Ok(default), |a| {
                a.parse()
                    .map_err(|_| Error::Usage(format!("bound rule `{s}`: `{a}` is not a number")))
            })
        };
        let rule = match name {
            "sigma-crossing" => BoundRule::SigmaCrossing {
                sigma_multiple: number(2.0)?,
            },
            "mc-percentile" => BoundRule::McPercentile(number(0.95)?),
            _ => {
                return Err(Error::Usage(format!(
                    "unknown bound rule `{s}`; use sigma-crossing[:K] or mc-percentile[:P]"
                )))
            }
        };
        rule.validate()
            .map_err(|e| Error::Usage(format!("bound rule `{s}`: {e}")))?;
        Ok(BoundRuleSpec(rule))
    }
}

impl fmt::Display for BoundRuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            BoundRule::SigmaCrossing { sigma_multiple } => write!(f, "sigma-crossing:{sigma_multiple}"),
            BoundRule::McPercentile(p) => write!(f, "mc-percentile:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mc_samples: usize,
    /// Relative loss-rate uncertainty applied to every mode; `None` keeps the
    /// values carried by the input.
    pub eps_y: Option<f64>,
    /// Per-mode overrides of the relative loss-rate uncertainty.
    pub eps_y_modes: BTreeMap<String, f64>,
    pub bound_rule: String,
    pub format: Format,
    /// Floor on the relative uncertainty of a fitted `Q_int`.
    pub eps_floor: f64,
    pub grid_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = ExtractionConfig::default();
        Self {
            seed: e.seed,
            mc_samples: e.mc_samples,
            eps_y: None,
            eps_y_modes: BTreeMap::new(),
            bound_rule: BoundRuleSpec(e.bound_rule).to_string(),
            format: Format::Json,
            eps_floor: DEFAULT_EPS_FLOOR,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl RunConfig {
    pub fn from_json(source: &str, text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::schema(source, format!("line {} column {}", e.line(), e.column()), e.to_string())
        })
    }

    /// Applies `--eps-y` arguments: a bare number sets the global value,
    /// `MODE=VALUE` a per-mode one.
    pub fn apply_eps_args(&mut self, args: &[String]) -> Result<()> {
        for a in args {
            match a.split_once('=') {
                Some((mode, v)) => {
                    self.eps_y_modes.insert(mode.to_string(), parse_eps(v)?);
                }
                None => self.eps_y = Some(parse_eps(a)?),
            }
        }
        Ok(())
    }

    pub fn bound_rule(&self) -> Result<BoundRule> {
        Ok(self.bound_rule.parse::<BoundRuleSpec>()?.0)
    }

    pub fn extraction(&self) -> Result<ExtractionConfig> {
        Ok(ExtractionConfig {
            mc_samples: self.mc_samples,
            seed: self.seed,
            bound_rule: self.bound_rule()?,
            ..ExtractionConfig::default()
        })
    }

    pub fn eps_overrides(&self) -> Vec<(String, f64)> {
        self.eps_y_modes.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.bound_rule()?;
        if let Some(e) = self.eps_y {
            check_eps(e)?;
        }
        for e in self.eps_y_modes.values() {
            check_eps(*e)?;
        }
        if !(self.eps_floor >= 0.0 && self.eps_floor < 1.0) {
            return Err(Error::Usage("eps_floor must lie in [0, 1)".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::Usage("grid_points must be at least 2".into()));
        }
        Ok(())
    }
}

fn parse_eps(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("--eps-y: `{s}` is not a number")))?;
    check_eps(v)?;
    Ok(v)
}

fn check_eps(v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Usage(format!("eps_y must lie in (0, 1), got {v}")))
    }
}

