//! Runners that turn an [`ExperimentConfig`] into a [`Table`].
//!
//! Parameter points run in parallel; rows are assembled in config order so
//! that identical configs give byte-identical output.

use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, Fixture};
use crate::error::Result;
use crate::evolve::{propagate, propagate_protocol, ScaledPropagator};
use crate::model::{DriveProfile, LatticeSpec};
use crate::oracle::{bath_tensor_with, dilate_kernels};
use crate::output::{Table, Value};
use crate::spectral::{sweep_spectrum_with, SweepParam};
use crate::thermal::EnergyBasis;
use crate::workstats::{
    hermitian_tpm_with, jarzynski_estimator, moments, system_energy_change_with, transition_table,
    work_distribution, TransitionTable, WorkDistribution,
};

/// Output of a run. `passed` is false only for a failed verification.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: Table,
    pub passed: bool,
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let (mut table, passed) = match config.experiment {
        Experiment::BetaSweep => (run_beta_sweep(config)?, true),
        Experiment::WorkDistribution => (run_work_distribution(config)?, true),
        Experiment::SpectrumSweep => (run_spectrum_sweep(config)?, true),
        Experiment::Verify => {
            let t = run_verify(config)?;
            let ok = verify_passed(&t);
            (t, ok)
        }
    };
    if config.metadata {
        table.metadata = Some(format!(
            "nhwork {} experiment={} config={}",
            env!("CARGO_PKG_VERSION"),
            config.experiment.as_str(),
            config.to_json()
        ));
    }
    Ok(RunOutput { table, passed })
}

struct PointResult {
    spec: LatticeSpec,
    per_beta: Vec<(f64, TransitionTable, WorkDistribution, f64)>,
}

/// One propagator per parameter point, shared across the beta grid.
fn evaluate_points(config: &ExperimentConfig) -> Result<Vec<PointResult>> {
    config
        .parameter_points()
        .into_par_iter()
        .map(|spec| {
            let basis = EnergyBasis::of_h0(&spec)?;
            let prop = propagate_protocol(&spec, &config.drive, config.dt)?;
            let per_beta = config
                .beta_grid
                .iter()
                .map(|&beta| {
                    let table = transition_table(&basis, &prop, beta)?;
                    let dist = work_distribution(&table, config.merge_tol)?;
                    let d_es = system_energy_change_with(&basis, &prop, beta)?;
                    Ok((beta, table, dist, d_es))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PointResult { spec, per_beta })
        })
        .collect()
}

fn key_cells(beta: f64, spec: &LatticeSpec, drive: &DriveProfile) -> Vec<Value> {
    vec![
        beta.into(),
        spec.gamma.into(),
        spec.delta.into(),
        drive.shape.as_str().into(),
        drive.rounds.into(),
    ]
}

pub fn run_beta_sweep(config: &ExperimentConfig) -> Result<Table> {
    let mut out = Table::new(&[
        "beta",
        "gamma",
        "delta",
        "drive",
        "rounds",
        "W_ave",
        "variance",
        "dEs",
        "jarzynski_estimator",
        "log_norm",
    ]);
    for point in evaluate_points(config)? {
        for (beta, table, dist, d_es) in &point.per_beta {
            let (w, var) = moments(dist);
            let mut row = key_cells(*beta, &point.spec, &config.drive);
            row.extend([
                w.into(),
                var.into(),
                (*d_es).into(),
                jarzynski_estimator(table).into(),
                table.log_norm.into(),
            ]);
            out.push(row);
        }
    }
    Ok(out)
}

/// Atom rows `(w, p)` per parameter point, each group closed by a summary
/// row with the moments.
pub fn run_work_distribution(config: &ExperimentConfig) -> Result<Table> {
    let mut out = Table::new(&[
        "record", "beta", "gamma", "delta", "drive", "rounds", "w", "p", "W_ave", "variance",
    ]);
    for point in evaluate_points(config)? {
        for (beta, _, dist, _) in &point.per_beta {
            for atom in &dist.atoms {
                let mut row = vec![Value::from("atom")];
                row.extend(key_cells(*beta, &point.spec, &config.drive));
                row.extend([atom.w.into(), atom.p.into(), Value::Null, Value::Null]);
                out.push(row);
            }
            let (w, var) = moments(dist);
            let mut row = vec![Value::from("summary")];
            row.extend(key_cells(*beta, &point.spec, &config.drive));
            row.extend([Value::Null, Value::Null, w.into(), var.into()]);
            out.push(row);
        }
    }
    Ok(out)
}

pub fn run_spectrum_sweep(config: &ExperimentConfig) -> Result<Table> {
    let grid = config.sweep_grid();
    let param = config.sweep_param;
    let ratio = config.delta_ratio;
    let points = sweep_spectrum_with(&grid, |v| {
        let spec = param.apply(&config.lattice, v);
        Ok(match (param, ratio) {
            (SweepParam::Gamma, Some(r)) => SweepParam::Delta.apply(&spec, r * v),
            _ => spec,
        })
    })?;
    let mut out = Table::new(&["param_value", "track_index", "re_E", "im_E", "biorth_condition", "pt_unbroken"]);
    for p in &points {
        for j in 0..p.tracks.len() {
            let e = p.track(j);
            out.push(vec![
                p.value.into(),
                j.into(),
                e.re.into(),
                e.im.into(),
                p.report.biorth_condition.into(),
                p.report.pt_unbroken.into(),
            ]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum CheckKind {
    BathTensor,
    Dilation { n_steps: usize },
    HermitianLimit,
    Jarzynski,
}

impl CheckKind {
    fn name(&self) -> &'static str {
        match self {
            CheckKind::BathTensor => "bath_tensor",
            CheckKind::Dilation { .. } => "dilation",
            CheckKind::HermitianLimit => "hermitian_limit",
            CheckKind::Jarzynski => "jarzynski",
        }
    }

    fn tolerance(&self) -> f64 {
        match self {
            CheckKind::BathTensor => 1e-10,
            CheckKind::Dilation { .. } => 1e-6,
            CheckKind::HermitianLimit => 1e-12,
            CheckKind::Jarzynski => 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Case {
    kind: CheckKind,
    sites: usize,
    gamma: f64,
    beta: f64,
    drive: DriveProfile,
}

fn verify_cases(config: &ExperimentConfig) -> Vec<Case> {
    let mut cases = Vec::new();
    let sudden = DriveProfile::sudden(1.0);
    let slow = DriveProfile::slow(2.0);
    if !config.verify.hermitian_only {
        for sites in [2, 4, 6] {
            for gamma in [0.5, 1.9, 2.1] {
                for beta in [0.0, 1.0, 100.0] {
                    for drive in [sudden, DriveProfile::sudden(10.0)] {
                        cases.push(Case {
                            kind: CheckKind::BathTensor,
                            sites,
                            gamma,
                            beta,
                            drive,
                        });
                    }
                }
            }
        }
        for sites in [2, 4] {
            for n_steps in [1, 2, 4] {
                for gamma in [1.0, 2.1] {
                    for drive in [sudden, slow] {
                        cases.push(Case {
                            kind: CheckKind::Dilation { n_steps },
                            sites,
                            gamma,
                            beta: 1.0,
                            drive,
                        });
                    }
                }
            }
        }
    }
    for sites in [2, 4, 6] {
        for drive in [sudden, slow] {
            for beta in [0.0, 1.0, 1000.0] {
                cases.push(Case {
                    kind: CheckKind::HermitianLimit,
                    sites,
                    gamma: 0.0,
                    beta,
                    drive,
                });
            }
            for beta in [0.1, 1.0, 10.0] {
                cases.push(Case {
                    kind: CheckKind::Jarzynski,
                    sites,
                    gamma: 0.0,
                    beta,
                    drive,
                });
            }
        }
    }
    cases
}

fn corrupt(prop: &ScaledPropagator, fixture: Option<Fixture>) -> ScaledPropagator {
    let mut out = prop.clone();
    if let Some(Fixture::NegateAmplitude) = fixture {
        out.matrix[(0, 0)] = -out.matrix[(0, 0)];
    }
    out
}

fn run_case(case: &Case, config: &ExperimentConfig) -> Result<f64> {
    let spec = LatticeSpec {
        sites: case.sites,
        g1: config.lattice.g1,
        g2: config.lattice.g2,
        ..LatticeSpec::default()
    }
    .with_gamma(case.gamma);
    let spec = if case.gamma == 0.0 { spec.hermitian() } else { spec };
    let basis = EnergyBasis::of_h0(&spec)?;
    let prop = propagate_protocol(&spec, &case.drive, config.dt)?;
    let closed = transition_table(&basis, &corrupt(&prop, config.verify.fixture), case.beta)?;
    Ok(match case.kind {
        CheckKind::BathTensor => closed.max_abs_diff(&bath_tensor_with(&basis, &prop, case.beta)?),
        CheckKind::Dilation { n_steps } => {
            let t_f = case.drive.t_final();
            let kernels = (0..n_steps)
                .map(|j| {
                    let t0 = t_f * j as f64 / n_steps as f64;
                    let t1 = if j + 1 == n_steps {
                        t_f
                    } else {
                        t_f * (j + 1) as f64 / n_steps as f64
                    };
                    propagate(&spec, &case.drive, t0, t1, config.dt)
                })
                .collect::<Result<Vec<_>>>()?;
            let report = dilate_kernels(&basis, &kernels, case.beta, &vec![0.0; n_steps])?;
            let defect = report.max_unitarity_defect;
            let diff = closed.max_abs_diff(&report.conditional_table);
            // a non-unitary step fails the check regardless of agreement
            if defect > 1e-10 {
                f64::INFINITY
            } else {
                diff
            }
        }
        CheckKind::HermitianLimit => closed.max_abs_diff(&hermitian_tpm_with(&basis, &prop.effective(), case.beta)?),
        CheckKind::Jarzynski => (jarzynski_estimator(&closed) - 1.0).abs(),
    })
}

/// Oracle and limit checks; one row per case with its max error.
pub fn run_verify(config: &ExperimentConfig) -> Result<Table> {
    let cases = verify_cases(config);
    let errors = cases
        .par_iter()
        .map(|c| run_case(c, config))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Table::new(&[
        "check",
        "sites",
        "gamma",
        "beta",
        "drive",
        "t_total",
        "n_steps",
        "max_error",
        "tolerance",
        "passed",
    ]);
    for (case, err) in cases.iter().zip(errors) {
        let n_steps = match case.kind {
            CheckKind::Dilation { n_steps } => Value::from(n_steps),
            _ => Value::Null,
        };
        let tol = case.kind.tolerance();
        out.push(vec![
            case.kind.name().into(),
            case.sites.into(),
            case.gamma.into(),
            case.beta.into(),
            case.drive.shape.as_str().into(),
            case.drive.t_total.into(),
            n_steps,
            err.into(),
            tol.into(),
            (err <= tol).into(),
        ]);
    }
    Ok(out)
}

/// True when every row of a verification table passed.
pub fn verify_passed(table: &Table) -> bool {
    table
        .column("passed")
        .is_some_and(|col| col.iter().all(|v| **v == Value::Bool(true)))
}
