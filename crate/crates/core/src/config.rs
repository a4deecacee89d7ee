//! Experiment configuration read from a JSON document and overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::DEFAULT_DT;
use crate::model::{DriveProfile, DriveShape, LatticeSpec};
use crate::spectral::SweepParam;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SpectrumSweep,
    WorkDistribution,
    BetaSweep,
    Verify,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::SpectrumSweep => "spectrum_sweep",
            Experiment::WorkDistribution => "work_distribution",
            Experiment::BetaSweep => "beta_sweep",
            Experiment::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Deliberate corruptions of the closed form, used to check that the
/// verification suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    /// Flips the sign of the first site-basis entry of the propagator.
    NegateAmplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    /// Only the Hermitian-limit and Jarzynski checks.
    pub hermitian_only: bool,
    pub fixture: Option<Fixture>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub lattice: LatticeSpec,
    pub drive: DriveProfile,
    pub beta_grid: Vec<f64>,
    pub gamma_grid: Option<Vec<f64>>,
    pub delta_grid: Option<Vec<f64>>,
    /// When set, every point uses `delta = delta_ratio * gamma` and
    /// `delta_grid` is ignored.
    pub delta_ratio: Option<f64>,
    /// Axis of a spectrum sweep.
    pub sweep_param: SweepParam,
    pub dt: f64,
    pub merge_tol: f64,
    pub experiment: Experiment,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
    /// Emit the `#` metadata line (CSV) or object (JSON).
    pub metadata: bool,
    pub verify: VerifyOptions,
}

/// `n` points from `lo` to `hi`, evenly spaced in `log10`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|k| {
                    if k == 0 {
                        lo
                    } else if k == n - 1 {
                        hi
                    } else {
                        10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)
                    }
                })
                .collect()
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            lattice: LatticeSpec::default(),
            drive: DriveProfile::default(),
            beta_grid: log_space(0.1, 1000.0, 25),
            gamma_grid: Some(vec![1.9, 2.1]),
            delta_grid: None,
            delta_ratio: None,
            sweep_param: SweepParam::Gamma,
            dt: DEFAULT_DT,
            merge_tol: 1e-8,
            experiment: Experiment::BetaSweep,
            output_path: None,
            output_format: OutputFormat::Csv,
            metadata: true,
            verify: VerifyOptions::default(),
        }
    }
}

/// Values given on the command line; `None` keeps the config value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub output_path: Option<PathBuf>,
    pub output_format: Option<OutputFormat>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub sites: Option<usize>,
    pub t_total: Option<f64>,
    pub drive: Option<DriveShape>,
    pub rounds: Option<u32>,
    pub dt: Option<f64>,
    pub no_metadata: bool,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(name, "empty grid"));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::invalid(name, format!("non-finite value {x}")));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(name, "grid must be sorted ascending"));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a JSON document. Errors carry the line and
    /// column of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(e) = o.experiment {
            self.experiment = e;
        }
        if let Some(p) = &o.output_path {
            self.output_path = Some(p.clone());
        }
        if let Some(f) = o.output_format {
            self.output_format = f;
        }
        if let Some(g) = o.gamma {
            self.gamma_grid = Some(vec![g]);
        }
        if let Some(d) = o.delta {
            self.delta_grid = Some(vec![d]);
            self.delta_ratio = None;
        }
        if let Some(b) = o.beta {
            self.beta_grid = vec![b];
        }
        if let Some(n) = o.sites {
            self.lattice.sites = n;
        }
        if let Some(t) = o.t_total {
            self.drive.t_total = t;
        }
        if let Some(s) = o.drive {
            self.drive.shape = s;
        }
        if let Some(r) = o.rounds {
            self.drive.rounds = r;
        }
        if let Some(dt) = o.dt {
            self.dt = dt;
        }
        if o.no_metadata {
            self.metadata = false;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        self.drive.validate()?;
        check_grid("beta_grid", &self.beta_grid)?;
        if let Some(b) = self.beta_grid.iter().find(|b| **b < 0.0) {
            return Err(Error::invalid("beta_grid", format!("{b} must be >= 0")));
        }
        if let Some(g) = &self.gamma_grid {
            check_grid("gamma_grid", g)?;
        }
        if let Some(d) = &self.delta_grid {
            check_grid("delta_grid", d)?;
        }
        if let Some(r) = self.delta_ratio {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::invalid("delta_ratio", format!("{r} must be >= 0")));
            }
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("{} must be > 0", self.dt)));
        }
        if !(self.merge_tol.is_finite() && self.merge_tol >= 0.0) {
            return Err(Error::invalid("merge_tol", format!("{} must be >= 0", self.merge_tol)));
        }
        Ok(())
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.gamma_grid.clone().unwrap_or_else(|| vec![self.lattice.gamma])
    }

    /// Chains for every (gamma, delta) pair, gamma-major in grid order.
    pub fn parameter_points(&self) -> Vec<LatticeSpec> {
        let mut out = Vec::new();
        for g in self.gammas() {
            let base = SweepParam::Gamma.apply(&self.lattice, g);
            match (self.delta_ratio, &self.delta_grid) {
                (Some(r), _) => out.push(SweepParam::Delta.apply(&base, r * g)),
                (None, Some(ds)) => out.extend(ds.iter().map(|&d| SweepParam::Delta.apply(&base, d))),
                (None, None) => out.push(base),
            }
        }
        out
    }

    /// Values of the spectrum-sweep axis.
    pub fn sweep_grid(&self) -> Vec<f64> {
        match self.sweep_param {
            SweepParam::Gamma => self.gammas(),
            SweepParam::Delta => self.delta_grid.clone().unwrap_or_else(|| vec![self.lattice.delta]),
        }
    }
}
