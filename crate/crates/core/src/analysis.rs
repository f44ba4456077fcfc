//! Bound envelopes for the discretized and continuous flows, Lyapunov decrease
//! checks, empirical rate fitting and experiment orchestration.

use nalgebra::DVector;
use serde::Serialize;

use crate::cli::{Experiment, ExperimentConfig};
use crate::contraction::{Metric, MetricRecord, Verdict};
use crate::flows::{FlowField, FlowKind, VectorField};
use crate::integrators::{integrate, nesterov_trajectory, Scheme, Trajectory};
use crate::{Error, Result};

/// Pointwise slack allowed between an envelope and the observed series.
pub const ENVELOPE_TOL: f64 = 1e-8;
/// Slack allowed between a tail maximum and an asymptotic bound.
pub const LIMIT_TOL: f64 = 1e-6;
/// Fraction of a run treated as its tail for asymptotic checks.
pub const TAIL_FRACTION: f64 = 0.1;
/// Additive slack in the Lyapunov decrease test.
pub const LYAPUNOV_TOL: f64 = 1e-8;

fn check_rate(rate: f64, t: f64) -> Result<f64> {
    if rate > 0.0 && rate.is_finite() {
        Ok(rate)
    } else {
        Err(Error::Domain(format!("contraction rate must be positive, got {rate} at t = {t}")))
    }
}

/// `d0·∏_{m=1}^{k} (1 + h·rate(mh))⁻¹`.
pub fn implicit_envelope(k: usize, h: f64, rate_fn: &dyn Fn(f64) -> f64, d0: f64) -> Result<f64> {
    let mut out = d0;
    for m in 1..=k {
        let t = m as f64 * h;
        out /= 1.0 + h * check_rate(rate_fn(t), t)?;
    }
    Ok(out)
}

/// `d0·∏_{m=0}^{k−1} √(1 − 2h·rate(mh) + h²ℓ²)`; `h` must lie in `(0, 2·inf rate/ℓ²)`.
pub fn explicit_envelope(k: usize, h: f64, rate_fn: &dyn Fn(f64) -> f64, lipschitz: f64, d0: f64) -> Result<f64> {
    let mut out = d0;
    for m in 0..k {
        let t = m as f64 * h;
        let rate = check_rate(rate_fn(t), t)?;
        check_window(h, rate, lipschitz)?;
        out *= explicit_step_factor(h, rate, lipschitz);
    }
    Ok(out)
}

fn explicit_step_factor(h: f64, rate: f64, lipschitz: f64) -> f64 {
    (1.0 - 2.0 * h * rate + h * h * lipschitz * lipschitz).max(0.0).sqrt()
}

/// Fails unless `0 < h < 2·rate/ℓ²` and `rate ≤ ℓ`.
pub fn check_window(h: f64, rate: f64, lipschitz: f64) -> Result<()> {
    let window = 2.0 * rate / (lipschitz * lipschitz);
    if !(h > 0.0 && h < window) || rate > lipschitz {
        return Err(Error::WindowViolation { h, window });
    }
    Ok(())
}

/// Discrete tracking bound for implicit Euler toward a moving equilibrium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImplicitTracking {
    pub h: f64,
    pub rate: f64,
    pub rho: f64,
}

impl ImplicitTracking {
    pub fn new(h: f64, rate: f64, rho: f64) -> Result<Self> {
        if !(h > 0.0) || !(rate > 0.0) || !(rho >= 0.0) {
            return Err(Error::Domain(format!(
                "tracking bound needs h > 0, rate > 0, rho >= 0; got h = {h}, rate = {rate}, rho = {rho}"
            )));
        }
        Ok(Self { h, rate, rho })
    }

    /// `q^k·d0 + ρ·Σ_{m=1}^{k} q^m` with `q = (1 + h·rate)⁻¹`.
    pub fn at(&self, k: usize, d0: f64) -> f64 {
        let q = 1.0 / (1.0 + self.h * self.rate);
        let (mut qk, mut sum) = (1.0, 0.0);
        for _ in 0..k {
            qk *= q;
            sum += qk;
        }
        qk * d0 + self.rho * sum
    }

    /// `ρ/(h·rate)`.
    pub fn limit(&self) -> f64 {
        self.rho / (self.h * self.rate)
    }
}

pub fn tracking_envelope_implicit(k: usize, h: f64, rate: f64, rho: f64, d0: f64) -> Result<f64> {
    Ok(ImplicitTracking::new(h, rate, rho)?.at(k, d0))
}

/// Discrete tracking bound for explicit Euler toward a moving equilibrium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplicitTracking {
    pub h: f64,
    pub rate: f64,
    pub lipschitz: f64,
    pub rho: f64,
}

impl ExplicitTracking {
    pub fn new(h: f64, rate: f64, lipschitz: f64, rho: f64) -> Result<Self> {
        check_rate(rate, 0.0)?;
        check_window(h, rate, lipschitz)?;
        if !(rho >= 0.0) {
            return Err(Error::Domain(format!("rho must be nonnegative, got {rho}")));
        }
        Ok(Self { h, rate, lipschitz, rho })
    }

    pub fn factor(&self) -> f64 {
        explicit_step_factor(self.h, self.rate, self.lipschitz)
    }

    /// `q^k·d0 + ρ·Σ_{m=0}^{k−1} q^m` with `q = √(1 − 2h·rate + h²ℓ²)`.
    pub fn at(&self, k: usize, d0: f64) -> f64 {
        let q = self.factor();
        let (mut qk, mut sum) = (1.0, 0.0);
        for _ in 0..k {
            sum += qk;
            qk *= q;
        }
        qk * d0 + self.rho * sum
    }

    /// `ρ/(1 − q)`.
    pub fn limit(&self) -> f64 {
        self.rho / (1.0 - self.factor())
    }
}

pub fn tracking_envelope_explicit(k: usize, h: f64, rate: f64, lipschitz: f64, rho: f64, d0: f64) -> Result<f64> {
    Ok(ExplicitTracking::new(h, rate, lipschitz, rho)?.at(k, d0))
}

/// Continuous-time tracking bound `(d0 − B)e^{−rate·t} + B` for the accelerated flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuousTracking {
    pub rate: f64,
    pub lambda_max_p: f64,
    pub rho: f64,
    pub mu: f64,
}

impl ContinuousTracking {
    pub fn new(rate: f64, lambda_max_p: f64, rho: f64, mu: f64) -> Result<Self> {
        if !(rate > 0.0) || !(lambda_max_p > 0.0) || !(rho >= 0.0) || !(mu > 0.0) {
            return Err(Error::Domain(format!(
                "continuous tracking bound needs positive rate, lambda_max, mu and rho >= 0; got {rate}, {lambda_max_p}, {mu}, {rho}"
            )));
        }
        Ok(Self { rate, lambda_max_p, rho, mu })
    }

    /// `B = √(2λ_max(P))·(ρ/μ)·√(L/μ)`, using `√(L/μ) = 1/rate`.
    pub fn ultimate_bound(&self) -> f64 {
        (2.0 * self.lambda_max_p).sqrt() * (self.rho / self.mu) / self.rate
    }

    pub fn at(&self, t: f64, d0: f64) -> f64 {
        let b = self.ultimate_bound();
        (d0 - b) * (-self.rate * t).exp() + b
    }
}

pub fn tracking_envelope_continuous(t: f64, rate: f64, lambda_max_p: f64, rho: f64, mu: f64, d0: f64) -> Result<f64> {
    Ok(ContinuousTracking::new(rate, lambda_max_p, rho, mu)?.at(t, d0))
}

/// Per-step bound on the P-distance the equilibrium pair `(x*, x*)` moves during
/// one step, given the per-step gradient variation `rho`.
pub fn equilibrium_step_bound(metric: &Metric, rho: f64, mu: f64) -> f64 {
    (2.0 * metric.lambda_max()).sqrt() * rho / mu
}

/// `(1 + rate·h)⁻ᵏ ≤ e^{−rate·h·k}` for every `k` in `0..=steps`.
pub fn rate_matching_holds(rate: f64, h: f64, steps: usize) -> bool {
    rate_matching_violations(rate, h, steps).is_empty()
}

/// Indices `k` at which `(1 + rate·h)⁻ᵏ > e^{−rate·h·k}`.
pub fn rate_matching_violations(rate: f64, h: f64, steps: usize) -> Vec<usize> {
    (0..=steps)
        .filter(|&k| (1.0 + rate * h).powi(-(k as i32)) > (-rate * h * k as f64).exp())
        .collect()
}

/// Least-squares slope of `log(series)` over the last `tail_fraction` of the
/// series, returned as the per-step factor `e^{slope}`. The fit stops at the
/// first exact zero in the tail.
pub fn empirical_rate(series: &[f64], tail_fraction: f64) -> Result<f64> {
    if series.len() < 10 {
        return Err(Error::Domain(format!("rate fit needs at least 10 samples, got {}", series.len())));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Domain(format!("tail fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let take = ((series.len() as f64) * tail_fraction).ceil() as usize;
    let start = series.len() - take.clamp(1, series.len());
    let mut pts = Vec::new();
    for (i, &v) in series.iter().enumerate().skip(start) {
        if v == 0.0 {
            break;
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("rate fit needs a positive series, got {v} at index {i}")));
        }
        pts.push((i as f64, v.ln()));
    }
    if pts.len() < 3 {
        return Err(Error::Domain(format!("rate fit has only {} usable points", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok((sxy / sxx).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovKind {
    /// `V = ‖z − z*‖²_P`.
    Distance,
    /// `V = ‖F(z)‖²_P`.
    FieldNorm,
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovReport {
    pub kind: LyapunovKind,
    pub values: Vec<f64>,
    /// First sample index `j` at which `V(t_{j+1}) > V(t_j)·e^{−2·rate·Δt} + tol`.
    pub first_violation: Option<usize>,
    /// Continuous decay rate of `V` fitted over the whole run.
    pub fitted_decay: Option<f64>,
    pub verdict: Verdict,
}

/// Checks `V(t_{j+1}) ≤ V(t_j)·e^{−2·rate·(t_{j+1} − t_j)} + 10⁻⁸` along a
/// reference trajectory.
pub fn lyapunov_check(field: &FlowField, metric: &Metric, traj: &Trajectory, kind: LyapunovKind, rate: f64) -> Result<LyapunovReport> {
    if traj.scheme != Some(Scheme::Rk4Reference) {
        return Err(Error::Domain("Lyapunov checks need a reference (rk4_reference) trajectory".into()));
    }
    let mut values = Vec::with_capacity(traj.len());
    for (t, y) in traj.times.iter().zip(&traj.states) {
        let v = match kind {
            LyapunovKind::Distance => metric.norm_sq(&(y - field.equilibrium_stacked(*t)?))?,
            LyapunovKind::FieldNorm => metric.norm_sq(&field.eval(y, *t))?,
        };
        values.push(v);
    }
    let mut first_violation = None;
    for j in 0..values.len().saturating_sub(1) {
        let dt = traj.times[j + 1] - traj.times[j];
        if values[j + 1] > values[j] * (-2.0 * rate * dt).exp() + LYAPUNOV_TOL {
            first_violation = Some(j);
            break;
        }
    }
    let dt = if traj.len() > 1 { traj.times[1] - traj.times[0] } else { 1.0 };
    let fitted_decay = empirical_rate(&values, 1.0).ok().map(|f| -f.ln() / dt);
    Ok(LyapunovReport {
        kind,
        values,
        first_violation,
        fitted_decay,
        verdict: Verdict::from_bool(first_violation.is_none()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeScheme {
    Explicit,
    Implicit,
    Continuous,
}

impl EnvelopeScheme {
    pub fn for_scheme(s: Scheme) -> Self {
        match s {
            Scheme::Explicit | Scheme::Nesterov => Self::Explicit,
            Scheme::Implicit => Self::Implicit,
            Scheme::Rk4Reference => Self::Continuous,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `‖y_k − z*(t_k)‖_P`.
    PDistance,
    /// `f(y₁ᵏ) − f(x*)`.
    FGap,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeMeta {
    pub h: f64,
    pub rate: f64,
    pub lipschitz: Option<f64>,
    pub rho: Option<f64>,
    pub metric: MetricRecord,
    pub d0: f64,
    /// Asymptotic bound, checked against the maximum over the final tail.
    pub limit: Option<f64>,
    pub tail_max: Option<f64>,
}

/// A theoretical bound series paired with an observed series.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub experiment_id: String,
    pub scheme: EnvelopeScheme,
    pub quantity: Quantity,
    pub times: Vec<f64>,
    pub bound_series: Vec<f64>,
    pub observed_series: Vec<f64>,
    pub margin_series: Vec<f64>,
    pub worst_margin: f64,
    pub verdict: Verdict,
    pub metadata: EnvelopeMeta,
}

impl EnvelopeReport {
    /// Pairs the series and sets the verdict: every margin is at least `−10⁻⁸`
    /// and, when a limit is given, the tail maximum is within `10⁻⁶` of it.
    pub fn new(
        experiment_id: impl Into<String>,
        scheme: EnvelopeScheme,
        quantity: Quantity,
        times: Vec<f64>,
        bound_series: Vec<f64>,
        observed_series: Vec<f64>,
        mut metadata: EnvelopeMeta,
    ) -> Result<Self> {
        if bound_series.len() != observed_series.len() || times.len() != observed_series.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: bound_series.len().min(observed_series.len()),
            });
        }
        let margin_series: Vec<f64> = bound_series.iter().zip(&observed_series).map(|(b, o)| b - o).collect();
        let worst_margin = margin_series.iter().copied().fold(f64::INFINITY, f64::min);
        let mut ok = margin_series.iter().all(|m| *m >= -ENVELOPE_TOL);
        if let Some(limit) = metadata.limit {
            let tail = tail_max(&observed_series, TAIL_FRACTION);
            metadata.tail_max = Some(tail);
            ok &= tail <= limit + LIMIT_TOL;
        }
        Ok(Self {
            experiment_id: experiment_id.into(),
            scheme,
            quantity,
            times,
            bound_series,
            observed_series,
            margin_series,
            worst_margin,
            verdict: Verdict::from_bool(ok),
            metadata,
        })
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t,bound,observed,margin\n");
        for k in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                k,
                fmt_num(self.times[k]),
                fmt_num(self.bound_series[k]),
                fmt_num(self.observed_series[k]),
                fmt_num(self.margin_series[k])
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Maximum over the final `fraction` of the series (at least one sample).
pub fn tail_max(series: &[f64], fraction: f64) -> f64 {
    let take = ((series.len() as f64) * fraction).ceil().max(1.0) as usize;
    series[series.len().saturating_sub(take)..].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

/// Everything produced by one experiment.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub experiment: Experiment,
    pub trajectory: Trajectory,
    /// P-distance of every state to the equilibrium at its time.
    pub distances: Vec<f64>,
    pub report: EnvelopeReport,
    pub f_gap: Option<EnvelopeReport>,
    /// Per-step factor fitted to the observed series of the main report.
    pub fitted_factor: Option<f64>,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.report.passed() && self.f_gap.as_ref().is_none_or(|r| r.passed())
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_built(cfg.build()?)
}

/// Runs an already validated experiment.
pub fn run_built(exp: Experiment) -> Result<ExperimentOutcome> {
    let field = &exp.field;
    let obj = field.objective();
    let metric = &exp.metric;
    let n = field.n();
    let trajectory = match exp.scheme {
        Scheme::Nesterov => nesterov_trajectory(
            obj,
            exp.y0.rows(0, n).into_owned(),
            exp.y0.rows(n, n).into_owned(),
            exp.steps,
        )?,
        s => integrate(field, exp.y0.clone(), s, &exp.step_config, exp.steps)?,
    };
    let mut distances = Vec::with_capacity(trajectory.len());
    for (t, y) in trajectory.times.iter().zip(&trajectory.states) {
        distances.push(metric.weighted_norm(&(y - field.equilibrium_stacked(*t)?))?);
    }
    let d0 = distances[0];
    let h = exp.h;
    let rate = exp.rate;
    let ks = 0..trajectory.len();
    let mut meta = EnvelopeMeta {
        h,
        rate,
        lipschitz: exp.lipschitz,
        rho: None,
        metric: metric.record(),
        d0,
        limit: None,
        tail_max: None,
    };
    let env_scheme = EnvelopeScheme::for_scheme(exp.scheme);
    let time_varying = obj.is_time_varying();
    let nesterov_like = exp.nesterov_equivalent();

    if nesterov_like {
        let report = nesterov_gap_report(&exp, &trajectory, meta)?;
        let fitted_factor = empirical_rate(&report.observed_series, 1.0).ok();
        return Ok(ExperimentOutcome {
            experiment: exp,
            trajectory,
            distances,
            report,
            f_gap: None,
            fitted_factor,
        });
    }

    let bound: Vec<f64> = match exp.scheme {
        Scheme::Implicit => {
            let rho_step = equilibrium_step_bound(metric, obj.grad_step_variation(h), obj.mu());
            let tr = ImplicitTracking::new(h, rate, rho_step)?;
            if time_varying {
                meta.rho = Some(rho_step);
                meta.limit = Some(tr.limit());
            }
            ks.map(|k| tr.at(k, d0)).collect()
        }
        Scheme::Explicit => {
            let ell = exp.lipschitz.ok_or_else(|| Error::Domain("explicit envelope needs a Lipschitz bound".into()))?;
            let rho_step = equilibrium_step_bound(metric, obj.grad_step_variation(h), obj.mu());
            let tr = ExplicitTracking::new(h, rate, ell, rho_step)?;
            if time_varying {
                meta.rho = Some(rho_step);
                meta.limit = Some(tr.limit());
            }
            ks.map(|k| tr.at(k, d0)).collect()
        }
        Scheme::Rk4Reference => {
            let rho = obj.grad_time_rate().unwrap_or(0.0);
            let tr = ContinuousTracking::new(rate, metric.lambda_max(), rho, obj.mu())?;
            if time_varying {
                meta.rho = Some(rho);
                meta.limit = Some(tr.ultimate_bound());
            }
            trajectory.times.iter().map(|t| tr.at(*t, d0)).collect()
        }
        Scheme::Nesterov => unreachable!("handled above"),
    };
    let report = EnvelopeReport::new(
        exp.id.clone(),
        env_scheme,
        Quantity::PDistance,
        trajectory.times.clone(),
        bound,
        distances.clone(),
        meta.clone(),
    )?;
    let f_gap = if time_varying {
        None
    } else {
        Some(f_gap_report(&exp, &trajectory, meta)?)
    };
    let fitted_factor = empirical_rate(&distances, 1.0).ok();
    Ok(ExperimentOutcome {
        experiment: exp,
        trajectory,
        distances,
        report,
        f_gap,
        fitted_factor,
    })
}

fn f_gaps(field: &FlowField, traj: &Trajectory) -> Result<Vec<f64>> {
    let obj = field.objective();
    let n = field.n();
    let xstar = field.equilibrium(0.0)?.x1;
    let fstar = obj.value(&xstar, 0.0);
    Ok(traj
        .states
        .iter()
        .zip(&traj.times)
        .map(|(y, t)| obj.value(&y.rows(0, n).into_owned(), *t) - fstar)
        .collect())
}

/// `f(y₁ᵏ) − f* ≤ (L/(2λ_min(P)))·d0²·factorᵏ`, with the factor obtained by
/// squaring the per-step norm contraction.
fn f_gap_report(exp: &Experiment, traj: &Trajectory, mut meta: EnvelopeMeta) -> Result<EnvelopeReport> {
    let obj = exp.field.objective();
    let c = obj.lip() / (2.0 * exp.metric.lambda_min()) * meta.d0 * meta.d0;
    let (h, rate) = (exp.h, exp.rate);
    let bound: Vec<f64> = match exp.scheme {
        Scheme::Implicit => {
            let q = (1.0 + h * rate).powi(-2);
            (0..traj.len()).map(|k| c * q.powi(k as i32)).collect()
        }
        Scheme::Explicit => {
            let ell = exp.lipschitz.unwrap_or(f64::NAN);
            let q = 1.0 - 2.0 * h * rate + h * h * ell * ell;
            (0..traj.len()).map(|k| c * q.powi(k as i32)).collect()
        }
        _ => traj.times.iter().map(|t| c * (-2.0 * rate * t).exp()).collect(),
    };
    meta.limit = None;
    EnvelopeReport::new(
        exp.id.clone(),
        EnvelopeScheme::for_scheme(exp.scheme),
        Quantity::FGap,
        traj.times.clone(),
        bound,
        f_gaps(&exp.field, traj)?,
        meta,
    )
}

/// Initial value of the potential `f(y₁) − f* + (μ/2)‖(√κ+1)·y₂ − √κ·y₁ − x*‖²`,
/// which bounds the f-gap of Nesterov's iteration by `φ₀·(1 − 1/√κ)ᵏ`.
pub fn nesterov_potential(field: &FlowField, y1: &DVector<f64>, y2: &DVector<f64>) -> Result<f64> {
    let obj = field.objective();
    let xstar = field.equilibrium(0.0)?.x1;
    let sk = obj.kappa().sqrt();
    let v = y2 * (sk + 1.0) - y1 * sk - &xstar;
    Ok(obj.value(y1, 0.0) - obj.value(&xstar, 0.0) + 0.5 * obj.mu() * v.norm_squared())
}

fn nesterov_gap_report(exp: &Experiment, traj: &Trajectory, meta: EnvelopeMeta) -> Result<EnvelopeReport> {
    let n = exp.field.n();
    let y0 = &traj.states[0];
    let phi0 = nesterov_potential(&exp.field, &y0.rows(0, n).into_owned(), &y0.rows(n, n).into_owned())?;
    let q = 1.0 - exp.field.objective().kappa().sqrt().recip();
    let bound = (0..traj.len()).map(|k| phi0 * q.powi(k as i32)).collect();
    EnvelopeReport::new(
        exp.id.clone(),
        EnvelopeScheme::Explicit,
        Quantity::FGap,
        traj.times.clone(),
        bound,
        f_gaps(&exp.field, traj)?,
        meta,
    )
}

impl Experiment {
    /// Unit-step explicit Euler (or the Nesterov scheme itself) on a static
    /// accelerated flow.
    pub fn nesterov_equivalent(&self) -> bool {
        let acconest = matches!(self.field.kind(), FlowKind::Acconest { .. });
        let static_obj = !self.field.objective().is_time_varying();
        acconest && static_obj && (self.scheme == Scheme::Nesterov || (self.scheme == Scheme::Explicit && self.h == 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one(_: f64) -> f64 {
        1.0
    }

    #[test]
    fn implicit_envelope_examples() {
        assert_eq!(implicit_envelope(0, 1.0, &one, 2.5).unwrap(), 2.5);
        assert_eq!(implicit_envelope(3, 1.0, &one, 1.0).unwrap(), 0.125);
        let tv = implicit_envelope(2, 1.0, &|t| 1.0 + t, 1.0).unwrap();
        assert!((tv - 1.0 / 12.0).abs() < 1e-16);
        assert!(implicit_envelope(2, 1.0, &|_| 0.0, 1.0).is_err());
    }

    #[test]
    fn explicit_envelope_examples() {
        assert_eq!(explicit_envelope(0, 0.25, &one, 2.0, 1.0).unwrap(), 1.0);
        let v = explicit_envelope(2, 0.25, &one, 2.0, 1.0).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        assert!(matches!(
            explicit_envelope(1, 0.5, &one, 2.0, 1.0),
            Err(Error::WindowViolation { .. })
        ));
        // γ = ℓ = 1, h = 1 sits on the window edge; the factor is already zero below it
        let near = explicit_envelope(1, 1.0 - 1e-12, &one, 1.0, 1.0).unwrap();
        assert!(near < 1e-11);
    }

    #[test]
    fn tracking_reduces_without_drift() {
        for k in [0, 1, 5, 40] {
            let a = tracking_envelope_implicit(k, 0.3, 0.7, 0.0, 2.0).unwrap();
            let b = implicit_envelope(k, 0.3, &|_| 0.7, 2.0).unwrap();
            assert!((a - b).abs() <= 1e-15 * b.max(1.0));
            let c = tracking_envelope_explicit(k, 0.25, 1.0, 2.0, 0.0, 2.0).unwrap();
            let d = explicit_envelope(k, 0.25, &one, 2.0, 2.0).unwrap();
            assert!((c - d).abs() <= 1e-15 * d.max(1.0));
        }
        let ct = ContinuousTracking::new(0.5, 2.0, 0.0, 1.0).unwrap();
        assert!((ct.at(3.0, 2.0) - 2.0 * (-1.5f64).exp()).abs() < 1e-15);
        assert_eq!(ct.at(0.0, 2.0), 2.0);
    }

    #[test]
    fn tracking_limits() {
        let tr = ImplicitTracking::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(tr.limit(), 1.0);
        assert!((tr.at(200, 0.0) - 1.0).abs() < 1e-12);
        let ex = ExplicitTracking::new(1.0 - 1e-9, 1.0, 1.0, 0.3).unwrap();
        assert!((ex.limit() - 0.3).abs() < 1e-3);
        let ct = ContinuousTracking::new(1.0, 1.0, 0.1, 1.0).unwrap();
        assert!((ct.ultimate_bound() - 2f64.sqrt() * 0.1).abs() < 1e-15);
    }

    #[test]
    fn empirical_rate_examples() {
        let geo: Vec<f64> = (0..40).map(|k| 0.5f64.powi(k)).collect();
        assert!((empirical_rate(&geo, 1.0).unwrap() - 0.5).abs() < 1e-10);
        assert!((empirical_rate(&[3.0; 12], 0.5).unwrap() - 1.0).abs() < 1e-15);
        let mut trunc = geo.clone();
        trunc[20] = 0.0;
        assert!((empirical_rate(&trunc, 1.0).unwrap() - 0.5).abs() < 1e-10);
        assert!(empirical_rate(&geo[..9], 1.0).is_err());
        let mut early_zero = geo.clone();
        early_zero[2] = 0.0;
        assert!(empirical_rate(&early_zero, 1.0).is_err());
        assert!(empirical_rate(&geo, 0.0).is_err());
    }

    #[test]
    fn rate_matching_direction() {
        // 1 + x < eˣ for x > 0, so the discrete factor never sits under the exponential
        assert!(rate_matching_violations(0.5, 1.0, 0).is_empty());
        assert_eq!(rate_matching_violations(0.5, 1.0, 3), vec![1, 2, 3]);
    }

    #[test]
    fn report_margins_and_csv() {
        let meta = EnvelopeMeta {
            h: 1.0,
            rate: 0.5,
            lipschitz: None,
            rho: None,
            metric: Metric::identity(1).unwrap().record(),
            d0: 1.0,
            limit: None,
            tail_max: None,
        };
        let r = EnvelopeReport::new(
            "x",
            EnvelopeScheme::Implicit,
            Quantity::PDistance,
            vec![0.0, 1.0],
            vec![1.0, 0.5],
            vec![1.0, 0.5 + 5e-9],
            meta.clone(),
        )
        .unwrap();
        assert!(r.passed());
        assert_eq!(r.to_csv(), "k,t,bound,observed,margin\n0,0.0,1.0,1.0,0.0\n1,1.0,0.5,0.500000005,-4.999999969612645e-9\n");
        let bad = EnvelopeReport::new("x", EnvelopeScheme::Implicit, Quantity::PDistance, vec![0.0], vec![1.0], vec![1.1], meta.clone()).unwrap();
        assert!(!bad.passed());
        assert!(EnvelopeReport::new("x", EnvelopeScheme::Implicit, Quantity::PDistance, vec![0.0], vec![1.0, 2.0], vec![1.0], meta).is_err());
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.0, 12345.678] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    proptest! {
        #[test]
        fn tracking_monotone_in_rho(k in 0usize..200, h in 0.01f64..5.0, rate in 0.01f64..2.0, rho in 0.0f64..3.0, extra in 0.0f64..3.0, d0 in 0.0f64..10.0) {
            let a = tracking_envelope_implicit(k, h, rate, rho, d0).unwrap();
            let b = tracking_envelope_implicit(k, h, rate, rho + extra, d0).unwrap();
            prop_assert!(b >= a);
            let ell = 2.0 * rate.max(1.0);
            let hx = h.min(1.9 * rate / (ell * ell));
            let c = tracking_envelope_explicit(k, hx, rate, ell, rho, d0).unwrap();
            let d = tracking_envelope_explicit(k, hx, rate, ell, rho + extra, d0).unwrap();
            prop_assert!(d >= c);
            let e = tracking_envelope_continuous(k as f64 * h, rate, 1.5, rho, 0.7, d0).unwrap();
            let f = tracking_envelope_continuous(k as f64 * h, rate, 1.5, rho + extra, 0.7, d0).unwrap();
            prop_assert!(f >= e - 1e-12 * e.abs().max(1.0));
        }

        #[test]
        fn larger_rate_gives_smaller_envelope(k in 0usize..100, h in 0.01f64..2.0, rate in 0.01f64..1.0, bump in 0.0f64..1.0, d0 in 0.0f64..10.0, rho in 0.0f64..1.0) {
            let a = tracking_envelope_implicit(k, h, rate, rho, d0).unwrap();
            let b = tracking_envelope_implicit(k, h, rate + bump, rho, d0).unwrap();
            prop_assert!(b <= a);
            // explicit factor decreases in the rate while h stays in the window
            let ell = 4.0;
            let hx = h.min(1.9 * rate / (ell * ell));
            let c = tracking_envelope_explicit(k, hx, rate, ell, rho, d0).unwrap();
            let d = tracking_envelope_explicit(k, hx, (rate + bump).min(ell), ell, rho, d0).unwrap();
            prop_assert!(d <= c * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn implicit_envelope_nonincreasing_in_k(k in 0usize..100, h in 0.01f64..10.0, rate in 0.01f64..3.0) {
            let a = implicit_envelope(k, h, &|_| rate, 1.0).unwrap();
            let b = implicit_envelope(k + 1, h, &|_| rate, 1.0).unwrap();
            prop_assert!(b <= a);
        }
    }
}
