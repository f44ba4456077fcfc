//! Experiment configs and the `contraflow` command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fmt_num, run_built, EnvelopeReport, ExperimentOutcome};
use crate::contraction::{certify_contraction, metric_matrix, CertifyConfig, ContractionCertificate, Metric, MetricRecord, METRIC_SIGN};
use crate::flows::{acconest_field, default_gamma, general_momentum_field, FlowField, FlowKind, MomentumParams, VectorField};
use crate::integrators::{
    acconest_optimal_step, default_acconest_step, field_lipschitz_bound, optimal_explicit_step, ImplicitSolver, Scheme,
    StepConfig, StepVariant,
};
use crate::objectives::ObjectiveSpec;
use crate::sampling::DEFAULT_RADIUS;
use crate::{Error, Result};

/// Environment variable that overrides the config seed.
pub const SEED_ENV: &str = "CONTRAFLOW_SEED";
pub const DEFAULT_OUTPUT_DIR: &str = "contraflow_out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    Quadratic {
        eigs: Vec<f64>,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Rotating {
        r: f64,
        omega: f64,
        eigs: Vec<f64>,
    },
    Logsumexp {
        /// Rows of the matrix `A`.
        #[serde(alias = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        ridge: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowConfig {
    #[default]
    Acconest,
    General {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        e: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepPolicy {
    Fixed {
        h: f64,
    },
    /// `None` picks the smaller of the two accelerated-flow forms.
    Optimal {
        #[serde(default)]
        variant: Option<StepVariant>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Accelerated,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySettings {
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub radius: Option<f64>,
}

/// One experiment, as read from a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub id: Option<String>,
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    pub scheme: Scheme,
    #[serde(default)]
    pub step: Option<StepPolicy>,
    pub steps: usize,
    #[serde(default)]
    pub metric_gamma: Option<f64>,
    #[serde(default)]
    pub metric_sign: Option<f64>,
    #[serde(default)]
    pub metric_kind: MetricKind,
    /// Required for general momentum flows, optional override otherwise.
    #[serde(default)]
    pub claimed_rate: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Initial state in the flow's own coordinates; defaults to `x1 = e₁`, `x2 = e₂`.
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub implicit_solver: Option<ImplicitSolver>,
    #[serde(default)]
    pub solver_tol: Option<f64>,
    #[serde(default)]
    pub solver_max_iter: Option<usize>,
    #[serde(default)]
    pub certify: Option<CertifySettings>,
}

/// A validated experiment with every derived quantity resolved.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub id: String,
    pub field: FlowField,
    pub metric: Metric,
    pub scheme: Scheme,
    pub h: f64,
    pub step_variant: Option<StepVariant>,
    pub steps: usize,
    pub rate: f64,
    pub lipschitz: Option<f64>,
    pub y0: DVector<f64>,
    pub step_config: StepConfig,
    pub certify: CertifyConfig,
    pub output_dir: Option<PathBuf>,
}

fn config_err(field: &str, message: impl std::fmt::Display) -> Error {
    Error::config(field, message.to_string())
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reads a config file and applies the seed override from the environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err("config_path", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        cfg.apply_env()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| config_err(SEED_ENV, format!("expected an unsigned integer, got {v:?}")))?;
        }
        Ok(())
    }

    pub fn build_objective(&self) -> Result<ObjectiveSpec> {
        let wrap = |field: &str, e: Error| config_err(field, e);
        match &self.objective {
            ObjectiveConfig::Quadratic { eigs, center } => {
                if eigs.is_empty() {
                    return Err(config_err("objective.eigs", "must not be empty"));
                }
                let c = match center {
                    Some(c) if c.len() != eigs.len() => {
                        return Err(config_err(
                            "objective.center",
                            format!("has length {} but eigs has length {}", c.len(), eigs.len()),
                        ))
                    }
                    Some(c) => DVector::from_column_slice(c),
                    None => DVector::zeros(eigs.len()),
                };
                ObjectiveSpec::diagonal_quadratic(eigs, c).map_err(|e| wrap("objective.eigs", e))
            }
            ObjectiveConfig::Rotating { r, omega, eigs } => {
                if eigs.len() != 2 {
                    return Err(config_err("objective.eigs", "rotating objectives need exactly two eigenvalues"));
                }
                ObjectiveSpec::rotating_quadratic(*r, *omega, DMatrix::from_diagonal(&DVector::from_column_slice(eigs)))
                    .map_err(|e| wrap("objective", e))
            }
            ObjectiveConfig::Logsumexp { a, b, ridge } => {
                let n = a.first().map_or(0, Vec::len);
                if n == 0 || a.iter().any(|row| row.len() != n) {
                    return Err(config_err("objective.a", "rows must be nonempty and of equal length"));
                }
                if b.len() != a.len() {
                    return Err(config_err("objective.b", format!("has length {} but A has {} rows", b.len(), a.len())));
                }
                let flat: Vec<f64> = a.iter().flatten().copied().collect();
                ObjectiveSpec::logsumexp_ridge(DMatrix::from_row_slice(a.len(), n, &flat), DVector::from_column_slice(b), *ridge)
                    .map_err(|e| wrap("objective", e))
            }
        }
    }

    /// Validates the config and resolves field, metric, step and initial state.
    pub fn build(&self) -> Result<Experiment> {
        if self.steps == 0 {
            return Err(config_err("steps", "must be at least 1"));
        }
        let obj = self.build_objective()?;
        let n = obj.dim();
        let kappa = obj.kappa();

        if let Some(g) = self.metric_gamma {
            if !(g > 1.0 && g <= 1.0 + 1.0 / kappa) {
                return Err(config_err(
                    "metric_gamma",
                    format!("must lie in (1, {}] for kappa = {kappa}, got {g}", 1.0 + 1.0 / kappa),
                ));
            }
        }
        let sign = self.metric_sign.unwrap_or(METRIC_SIGN);
        if sign != 1.0 && sign != -1.0 {
            return Err(config_err("metric_sign", format!("must be 1 or -1, got {sign}")));
        }

        let acconest = matches!(self.flow, FlowConfig::Acconest);
        let mut field = match &self.flow {
            FlowConfig::Acconest => acconest_field(&obj).map_err(|e| config_err("flow", e))?,
            FlowConfig::General { a, b, c, d, e } => {
                let p = MomentumParams::new(*a, *b, *c, *d, *e).map_err(|err| config_err("flow", err))?;
                if self.claimed_rate.is_none() {
                    return Err(config_err("claimed_rate", "general momentum flows need a claimed contraction rate"));
                }
                general_momentum_field(p, &obj).map_err(|err| config_err("flow", err))?
            }
        };
        if let Some(rate) = self.claimed_rate {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(config_err("claimed_rate", format!("must be positive, got {rate}")));
            }
            field = field.with_claimed_rate(rate);
        }
        let rate = field.claimed_rate().expect("every built field carries a rate");

        let metric = match (self.metric_kind, acconest) {
            (MetricKind::Accelerated, true) => metric_matrix(kappa, self.metric_gamma.unwrap_or(default_gamma(kappa)), sign, n)
                .map_err(|e| config_err("metric_gamma", e))?,
            _ => Metric::identity(n)?,
        };
        let lipschitz = if acconest {
            Some(field_lipschitz_bound(kappa, &metric))
        } else {
            field.lipschitz_hint()
        };

        if self.scheme == Scheme::Nesterov && !(acconest && !obj.is_time_varying()) {
            return Err(config_err("scheme", "nesterov needs the acconest flow and a time-invariant objective"));
        }

        let (h, step_variant) = match (&self.step, self.scheme) {
            (None, Scheme::Nesterov) => (1.0, None),
            (Some(StepPolicy::Fixed { h }), Scheme::Nesterov) if *h != 1.0 => {
                return Err(config_err("step.h", format!("the nesterov scheme uses h = 1, got {h}")))
            }
            (None, _) => return Err(config_err("step", "a step policy is required")),
            (Some(StepPolicy::Fixed { h }), _) => {
                if !(*h > 0.0 && h.is_finite()) {
                    return Err(config_err("step.h", format!("must be positive, got {h}")));
                }
                (*h, None)
            }
            (Some(StepPolicy::Optimal { variant }), _) => {
                if acconest {
                    match variant {
                        None => {
                            let (h, v) = default_acconest_step(kappa, &metric).map_err(|e| config_err("step", e))?;
                            (h, Some(v))
                        }
                        Some(v) => (acconest_optimal_step(kappa, &metric, *v).map_err(|e| config_err("step.variant", e))?, Some(*v)),
                    }
                } else {
                    if variant.is_some() {
                        return Err(config_err("step.variant", "step variants apply to the acconest flow only"));
                    }
                    let ell = lipschitz.ok_or_else(|| config_err("step", "no Lipschitz bound is available for this field"))?;
                    (optimal_explicit_step(rate, ell).map_err(|e| config_err("step", e))?, None)
                }
            }
        };

        let y0 = match &self.initial {
            Some(init) => {
                if init.x1.len() != n || init.x2.len() != n {
                    return Err(config_err(
                        "initial",
                        format!("x1 and x2 must have length {n}, got {} and {}", init.x1.len(), init.x2.len()),
                    ));
                }
                let mut y = DVector::zeros(2 * n);
                y.rows_mut(0, n).copy_from_slice(&init.x1);
                y.rows_mut(n, n).copy_from_slice(&init.x2);
                y
            }
            None => {
                let mut y = DVector::zeros(2 * n);
                y[0] = 1.0;
                if n > 1 {
                    y[n + 1] = 1.0;
                }
                y
            }
        };

        let mut experiment = Experiment {
            id: String::new(),
            field,
            metric,
            scheme: self.scheme,
            h,
            step_variant,
            steps: self.steps,
            rate,
            lipschitz,
            y0,
            step_config: StepConfig::new(h).map_err(|e| config_err("step.h", e))?,
            certify: CertifyConfig {
                count: self.certify.as_ref().and_then(|c| c.count).unwrap_or(10_000),
                radius: self.certify.as_ref().and_then(|c| c.radius).unwrap_or(DEFAULT_RADIUS),
                seed: self.seed,
                times: Vec::new(),
            },
            output_dir: self.output_dir.clone(),
        };
        if self.scheme == Scheme::Explicit && !experiment.nesterov_equivalent() {
            let ell = lipschitz.ok_or_else(|| config_err("step", "explicit Euler needs a Lipschitz bound for the field"))?;
            crate::analysis::check_window(h, rate, ell).map_err(|e| config_err("step.h", e))?;
        }
        if let Some(s) = self.implicit_solver {
            experiment.step_config.implicit_solver = s;
        }
        if let Some(t) = self.solver_tol {
            experiment.step_config.solver_tol = t;
        }
        if let Some(m) = self.solver_max_iter {
            experiment.step_config.solver_max_iter = m;
        }
        experiment.step_config.validate().map_err(|e| config_err("solver_tol", e))?;
        experiment.id = self
            .id
            .clone()
            .unwrap_or_else(|| format!("{}/{}", experiment.field.id(), scheme_name(self.scheme)));
        Ok(experiment)
    }
}

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Explicit => "explicit",
        Scheme::Implicit => "implicit",
        Scheme::Rk4Reference => "rk4_reference",
        Scheme::Nesterov => "nesterov",
    }
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub experiment_id: String,
    pub field_id: String,
    pub scheme: Scheme,
    pub h: f64,
    pub step_variant: Option<StepVariant>,
    pub steps: usize,
    pub rate: f64,
    pub lipschitz: Option<f64>,
    pub metric: MetricRecord,
    pub passed: bool,
    pub fitted_factor: Option<f64>,
    pub envelope: EnvelopeReport,
    pub f_gap: Option<EnvelopeReport>,
}

impl RunSummary {
    pub fn from_outcome(out: &ExperimentOutcome) -> Self {
        let e = &out.experiment;
        Self {
            experiment_id: e.id.clone(),
            field_id: e.field.id(),
            scheme: e.scheme,
            h: e.h,
            step_variant: e.step_variant,
            steps: e.steps,
            rate: e.rate,
            lipschitz: e.lipschitz,
            metric: e.metric.record(),
            passed: out.passed(),
            fitted_factor: out.fitted_factor,
            envelope: out.report.clone(),
            f_gap: out.f_gap.clone(),
        }
    }
}

pub fn trajectory_csv(out: &ExperimentOutcome) -> String {
    let n = out.experiment.field.n();
    let mut s = String::from("k,t");
    for i in 0..n {
        let _ = write!(s, ",x1_{i}");
    }
    for i in 0..n {
        let _ = write!(s, ",x2_{i}");
    }
    s.push_str(",dist_P_to_opt,solver_iters,residual\n");
    let traj = &out.trajectory;
    for k in 0..traj.len() {
        let _ = write!(s, "{k},{}", fmt_num(traj.times[k]));
        for v in traj.states[k].iter() {
            let _ = write!(s, ",{}", fmt_num(*v));
        }
        let d = traj.diag[k];
        let _ = writeln!(s, ",{},{},{}", fmt_num(out.distances[k]), d.iterations, fmt_num(d.residual));
    }
    s
}

/// Log-scale plot of the observed series against its bound.
pub fn convergence_svg(report: &EnvelopeReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 30.0;
    const BOTTOM: f64 = 45.0;
    let positive = report
        .bound_series
        .iter()
        .chain(&report.observed_series)
        .copied()
        .filter(|v| *v > 0.0 && v.is_finite());
    let (lo, hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (dlo, dhi) = if lo.is_finite() {
        let a = lo.log10().floor();
        let b = hi.log10().ceil();
        (a, if b > a { b } else { a + 1.0 })
    } else {
        (-1.0, 0.0)
    };
    let t0 = report.times.first().copied().unwrap_or(0.0);
    let t1 = report.times.last().copied().unwrap_or(1.0);
    let span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let px = |t: f64| LEFT + (t - t0) / span * (W - LEFT - RIGHT);
    let py = |v: f64| TOP + (dhi - v.log10()) / (dhi - dlo) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="18" text-anchor="middle">{}</text>"#,
        W / 2.0,
        xml_escape(&report.experiment_id)
    );
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, x1 - x0, y1 - y0);
    let step = ((dhi - dlo) / 10.0).ceil().max(1.0);
    let mut d = dlo;
    while d <= dhi {
        let y = py(10f64.powf(d));
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">1e{}</text>"#, x0 - 6.0, y + 4.0, d as i64);
        d += step;
    }
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let t = t0 + frac * span;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, px(t), y1 + 16.0, trim_num(t));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text>"#, (x0 + x1) / 2.0, H - 8.0);
    for (series, colour, label) in [
        (&report.bound_series, "#d62728", "bound"),
        (&report.observed_series, "#1f77b4", "observed"),
    ] {
        for run in polyline_runs(&report.times, series, &px, &py) {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{run}"/>"#);
        }
        let ly = if label == "bound" { TOP + 14.0 } else { TOP + 30.0 };
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/>"#, x1 - 110.0, x1 - 90.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{label}</text>"#, x1 - 84.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

fn polyline_runs(times: &[f64], series: &[f64], px: &dyn Fn(f64) -> f64, py: &dyn Fn(f64) -> f64) -> Vec<String> {
    let mut runs = Vec::new();
    let mut cur = String::new();
    for (t, v) in times.iter().zip(series) {
        if *v > 0.0 && v.is_finite() {
            if !cur.is_empty() {
                cur.push(' ');
            }
            let _ = write!(cur, "{:.2},{:.2}", px(*t), py(*v));
        } else if !cur.is_empty() {
            runs.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        runs.push(cur);
    }
    runs
}

fn trim_num(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn resolve_out(exp: &Experiment, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| exp.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Writes `trajectory.csv`, `envelope.csv`, `report.json` and `convergence.svg`.
pub fn write_run_outputs(out: &ExperimentOutcome, dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(dir)?;
    let summary = RunSummary::from_outcome(out);
    write_file(dir, "trajectory.csv", &trajectory_csv(out))?;
    write_file(dir, "envelope.csv", &out.report.to_csv())?;
    write_file(dir, "report.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    write_file(dir, "convergence.svg", &convergence_svg(&out.report))?;
    Ok(summary)
}

pub fn cmd_run(config_path: &Path, out: Option<&Path>) -> Result<RunSummary> {
    let exp = ExperimentConfig::load(config_path)?.build()?;
    let dir = resolve_out(&exp, out);
    let outcome = run_built(exp)?;
    write_run_outputs(&outcome, &dir)
}

pub fn certify_experiment(exp: &Experiment) -> Result<ContractionCertificate> {
    certify_contraction(&exp.field, &exp.metric, exp.rate, &exp.certify)
}

pub fn cmd_certify(config_path: &Path, out: Option<&Path>) -> Result<ContractionCertificate> {
    let exp = ExperimentConfig::load(config_path)?.build()?;
    let dir = resolve_out(&exp, out);
    let cert = certify_experiment(&exp)?;
    fs::create_dir_all(&dir)?;
    write_file(&dir, "certificate.json", &(serde_json::to_string_pretty(&cert)? + "\n"))?;
    Ok(cert)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    H,
    Kappa,
    Gamma,
    Omega,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::H => "h",
            SweepParam::Kappa => "kappa",
            SweepParam::Gamma => "gamma",
            SweepParam::Omega => "omega",
        }
    }
}

/// Copy of `cfg` with one parameter replaced.
pub fn with_param(cfg: &ExperimentConfig, param: SweepParam, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match param {
        SweepParam::H => c.step = Some(StepPolicy::Fixed { h: value }),
        SweepParam::Gamma => c.metric_gamma = Some(value),
        SweepParam::Kappa => {
            if !(value >= 1.0 && value.is_finite()) {
                return Err(config_err("param", format!("kappa must be >= 1, got {value}")));
            }
            match &mut c.objective {
                ObjectiveConfig::Quadratic { eigs, .. } | ObjectiveConfig::Rotating { eigs, .. } => {
                    let n = eigs.len();
                    if n < 2 && value != 1.0 {
                        return Err(config_err("param", "a one-dimensional quadratic has kappa = 1"));
                    }
                    *eigs = (0..n)
                        .map(|i| if n == 1 { 1.0 } else { 1.0 + (value - 1.0) * i as f64 / (n - 1) as f64 })
                        .collect();
                }
                ObjectiveConfig::Logsumexp { .. } => {
                    return Err(config_err("param", "kappa sweeps need a quadratic objective"));
                }
            }
        }
        SweepParam::Omega => match &mut c.objective {
            ObjectiveConfig::Rotating { omega, .. } => *omega = value,
            _ => return Err(config_err("param", "omega sweeps need a rotating objective")),
        },
    }
    Ok(c)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub fitted_rate: Option<f64>,
    pub passed: bool,
}

pub fn sweep_summary_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("value,fitted_rate,verdict\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_num(r.value),
            r.fitted_rate.map(fmt_num).unwrap_or_default(),
            if r.passed { "pass" } else { "fail" }
        );
    }
    s
}

pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|_| config_err("values", format!("not a number: {v:?}"))))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(config_err("values", "the value list is empty"));
    }
    Ok(values)
}

/// Runs one experiment per value in parallel. Every sub-config is validated before
/// anything is written.
pub fn cmd_sweep(config_path: &Path, param: SweepParam, values: &[f64], out: Option<&Path>) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(config_err("values", "the value list is empty"));
    }
    let base = ExperimentConfig::load(config_path)?;
    let exps = values
        .iter()
        .map(|v| {
            with_param(&base, param, *v)?
                .build()
                .map_err(|e| annotate(e, &format!("{}={}", param.name(), fmt_num(*v))))
        })
        .collect::<Result<Vec<_>>>()?;
    let dir = resolve_out(&exps[0], out);
    let outcomes = exps
        .into_par_iter()
        .zip(values.par_iter())
        .map(|(exp, v)| run_built(exp).map_err(|e| annotate(e, &format!("{}={}", param.name(), fmt_num(*v)))))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&dir)?;
    let mut rows = Vec::with_capacity(values.len());
    for (i, (o, v)) in outcomes.iter().zip(values).enumerate() {
        write_run_outputs(o, &dir.join(format!("{:03}_{}_{}", i, param.name(), fmt_num(*v))))?;
        rows.push(SweepRow {
            value: *v,
            fitted_rate: o.fitted_factor,
            passed: o.passed(),
        });
    }
    write_file(&dir, "sweep_summary.csv", &sweep_summary_csv(&rows))?;
    Ok(rows)
}

fn annotate(e: Error, context: &str) -> Error {
    match e {
        Error::Config { field, message } => Error::Config {
            field,
            message: format!("{message} ({context})"),
        },
        other => Error::Domain(format!("{context}: {other}")),
    }
}

/// 2 for anything wrong with the inputs, 1 for failures while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Json(_) => 2,
        _ => 1,
    }
}

#[derive(Parser, Debug)]
#[command(name = "contraflow", version, about = "Contraction certificates and discretization envelopes for accelerated optimization flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate an experiment and compare it against its envelope.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the one-sided Lipschitz constant of the configured flow.
    Certify {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat an experiment over a list of parameter values.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out.as_deref()).map(|s| {
            println!(
                "{}: {} (worst margin {})",
                s.experiment_id,
                if s.passed { "pass" } else { "fail" },
                fmt_num(s.envelope.worst_margin)
            );
            s.passed
        }),
        Command::Certify { config, out } => cmd_certify(&config, out.as_deref()).map(|c| {
            println!(
                "{}: {} (worst ratio {}, claimed rate {})",
                c.field_id,
                if c.verdict.passed() { "pass" } else { "fail" },
                fmt_num(c.worst_ratio),
                fmt_num(c.claimed_rate)
            );
            c.verdict.passed()
        }),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => parse_values(&values)
            .and_then(|vals| cmd_sweep(&config, param, &vals, out.as_deref()))
            .map(|rows| {
                print!("{}", sweep_summary_csv(&rows));
                rows.iter().all(|r| r.passed)
            }),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

impl Experiment {
    pub fn is_acconest(&self) -> bool {
        matches!(self.field.kind(), FlowKind::Acconest { .. })
    }
}
