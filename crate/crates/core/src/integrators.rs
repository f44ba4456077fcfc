//! Euler discretizations, the RK4 reference integrator, Nesterov's iteration and
//! step-size policies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contraction::Metric;
use crate::flows::{acconest_beta, VectorField};
use crate::objectives::ObjectiveSpec;
use crate::{Error, Result};

pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;
pub const DEFAULT_SOLVER_MAX_ITER: usize = 200;
/// Default number of RK4 substeps per outer step.
pub const RK4_BASE_SUBSTEPS: usize = 64;
/// Agreement required between two successive RK4 refinements, per unit time.
pub const RK4_AGREEMENT: f64 = 1e-10;
const RK4_MAX_SUBSTEPS: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImplicitSolver {
    #[default]
    Newton,
    FixedPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub h: f64,
    pub implicit_solver: ImplicitSolver,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl StepConfig {
    pub fn new(h: f64) -> Result<Self> {
        let cfg = Self {
            h,
            implicit_solver: ImplicitSolver::Newton,
            solver_tol: DEFAULT_SOLVER_TOL,
            solver_max_iter: DEFAULT_SOLVER_MAX_ITER,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_solver(mut self, solver: ImplicitSolver) -> Self {
        self.implicit_solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Domain(format!("step size must be positive, got {}", self.h)));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::Domain(format!("solver tolerance must be positive, got {}", self.solver_tol)));
        }
        Ok(())
    }
}

/// Solver work spent on one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepDiag {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Explicit,
    Implicit,
    Rk4Reference,
    /// Nesterov's iteration in closed form; only meaningful for the accelerated flow.
    Nesterov,
}

/// Time-stamped states of one integration run.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// One entry per state; the initial state carries a zero entry.
    pub diag: Vec<StepDiag>,
    pub scheme: Option<Scheme>,
}

impl Trajectory {
    pub fn start(t0: f64, y0: DVector<f64>, scheme: Scheme) -> Self {
        Self {
            times: vec![t0],
            states: vec![y0],
            diag: vec![StepDiag::default()],
            scheme: Some(scheme),
        }
    }

    fn push(&mut self, t: f64, y: DVector<f64>, d: StepDiag) {
        self.times.push(t);
        self.states.push(y);
        self.diag.push(d);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// `y + h·F(y, t)`.
pub fn explicit_euler_step(field: &dyn VectorField, y: &DVector<f64>, t: f64, h: f64) -> DVector<f64> {
    y + field.eval(y, t) * h
}

fn residual(field: &dyn VectorField, y: &DVector<f64>, w: &DVector<f64>, t_next: f64, h: f64) -> DVector<f64> {
    w - y - field.eval(w, t_next) * h
}

fn finite_difference_jacobian(field: &dyn VectorField, w: &DVector<f64>, t: f64) -> DMatrix<f64> {
    let n = w.len();
    let eps = 1e-7 * (1.0 + w.norm());
    let f0 = field.eval(w, t);
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut wp = w.clone();
        wp[c] += eps;
        j.set_column(c, &((field.eval(&wp, t) - &f0) / eps));
    }
    j
}

/// Solves `y⁺ = y + h·F(y⁺, t_next)`.
///
/// Newton's method uses the analytic Jacobian when the field has one (for affine
/// fields the first iterate is the exact linear solve) and forward differences
/// otherwise. If Newton stalls, or when requested, a damped fixed-point iteration
/// `w ← w − ω·R(w)` with `ω = 1/(1 + hℓ)²` is used.
pub fn implicit_euler_step(field: &dyn VectorField, y: &DVector<f64>, t_next: f64, cfg: &StepConfig) -> Result<(DVector<f64>, StepDiag)> {
    cfg.validate()?;
    let h = cfg.h;
    let r0 = residual(field, y, y, t_next, h).norm();
    if r0 <= cfg.solver_tol {
        return Ok((
            y.clone(),
            StepDiag {
                iterations: 0,
                residual: r0,
            },
        ));
    }
    match cfg.implicit_solver {
        ImplicitSolver::Newton => match newton(field, y, t_next, cfg) {
            Ok(out) => Ok(out),
            Err(Error::Convergence { .. }) => fixed_point(field, y, t_next, cfg),
            Err(e) => Err(e),
        },
        ImplicitSolver::FixedPoint => fixed_point(field, y, t_next, cfg),
    }
}

fn newton(field: &dyn VectorField, y: &DVector<f64>, t_next: f64, cfg: &StepConfig) -> Result<(DVector<f64>, StepDiag)> {
    let h = cfg.h;
    let n = y.len();
    let mut w = y.clone();
    let mut r = residual(field, y, &w, t_next, h);
    let mut rn = r.norm();
    let mut best = rn;
    let mut stalled = 0;
    for it in 1..=cfg.solver_max_iter {
        let jf = field
            .jacobian(&w, t_next)
            .unwrap_or_else(|| finite_difference_jacobian(field, &w, t_next));
        let jr = DMatrix::<f64>::identity(n, n) - jf * h;
        let delta = jr.lu().solve(&r).ok_or(Error::Convergence {
            what: "newton (singular Jacobian)",
            iterations: it,
            residual: rn,
        })?;
        w -= delta;
        r = residual(field, y, &w, t_next, h);
        rn = r.norm();
        if rn <= cfg.solver_tol {
            return Ok((w, StepDiag { iterations: it, residual: rn }));
        }
        if rn < best * 0.5 {
            best = rn;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 3 {
                break;
            }
        }
    }
    Err(Error::Convergence {
        what: "newton",
        iterations: cfg.solver_max_iter,
        residual: rn,
    })
}

fn fixed_point(field: &dyn VectorField, y: &DVector<f64>, t_next: f64, cfg: &StepConfig) -> Result<(DVector<f64>, StepDiag)> {
    let h = cfg.h;
    let ell = field
        .lipschitz_hint()
        .unwrap_or_else(|| finite_difference_jacobian(field, y, t_next).norm());
    let omega = 1.0 / ((1.0 + h * ell) * (1.0 + h * ell));
    let mut w = y.clone();
    let mut rn = f64::INFINITY;
    for it in 1..=cfg.solver_max_iter {
        let r = residual(field, y, &w, t_next, h);
        rn = r.norm();
        if rn <= cfg.solver_tol {
            return Ok((w, StepDiag { iterations: it - 1, residual: rn }));
        }
        if !rn.is_finite() {
            break;
        }
        w -= r * omega;
    }
    let r = residual(field, y, &w, t_next, h).norm();
    if r <= cfg.solver_tol {
        return Ok((
            w,
            StepDiag {
                iterations: cfg.solver_max_iter,
                residual: r,
            },
        ));
    }
    Err(Error::Convergence {
        what: "damped fixed-point iteration",
        iterations: cfg.solver_max_iter,
        residual: rn.min(r),
    })
}

fn rk4_substeps(field: &dyn VectorField, y: &DVector<f64>, t: f64, h: f64, m: usize) -> DVector<f64> {
    let dt = h / m as f64;
    let mut w = y.clone();
    for i in 0..m {
        let s = t + i as f64 * dt;
        let k1 = field.eval(&w, s);
        let k2 = field.eval(&(&w + &k1 * (0.5 * dt)), s + 0.5 * dt);
        let k3 = field.eval(&(&w + &k2 * (0.5 * dt)), s + 0.5 * dt);
        let k4 = field.eval(&(&w + &k3 * dt), s + dt);
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    w
}

/// One outer step of the RK4 reference integrator: starts at `RK4_BASE_SUBSTEPS`
/// substeps and doubles until two successive refinements agree to
/// `RK4_AGREEMENT·h`.
pub fn rk4_reference_step(field: &dyn VectorField, y: &DVector<f64>, t: f64, h: f64) -> Result<(DVector<f64>, StepDiag)> {
    let mut m = RK4_BASE_SUBSTEPS;
    let mut coarse = rk4_substeps(field, y, t, h, m);
    loop {
        let fine = rk4_substeps(field, y, t, h, 2 * m);
        let diff = (&fine - &coarse).norm();
        if diff <= RK4_AGREEMENT * h {
            return Ok((
                fine,
                StepDiag {
                    iterations: 2 * m,
                    residual: diff,
                },
            ));
        }
        m *= 2;
        if m > RK4_MAX_SUBSTEPS {
            return Err(Error::Convergence {
                what: "rk4 refinement",
                iterations: m,
                residual: diff,
            });
        }
        coarse = fine;
    }
}

/// Integrates `steps` steps from `t = 0`, so `t_k = k·h`.
pub fn integrate(field: &dyn VectorField, y0: DVector<f64>, scheme: Scheme, cfg: &StepConfig, steps: usize) -> Result<Trajectory> {
    integrate_from(field, y0, 0.0, scheme, cfg, steps)
}

pub fn integrate_from(field: &dyn VectorField, y0: DVector<f64>, t0: f64, scheme: Scheme, cfg: &StepConfig, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Domain("integration needs at least one step".into()));
    }
    if y0.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: y0.len(),
        });
    }
    if scheme == Scheme::Nesterov {
        return Err(Error::Domain("the nesterov scheme runs through nesterov_trajectory".into()));
    }
    cfg.validate()?;
    let h = cfg.h;
    let mut traj = Trajectory::start(t0, y0, scheme);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let t_next = t0 + (k + 1) as f64 * h;
        let y = traj.last();
        let (next, diag) = match scheme {
            Scheme::Explicit => (explicit_euler_step(field, y, t, h), StepDiag::default()),
            Scheme::Nesterov => unreachable!("rejected above"),
            Scheme::Implicit => implicit_euler_step(field, y, t_next, cfg).map_err(|e| Error::StepFailed {
                step: k + 1,
                source: Box::new(e),
            })?,
            Scheme::Rk4Reference => rk4_reference_step(field, y, t, h).map_err(|e| Error::StepFailed {
                step: k + 1,
                source: Box::new(e),
            })?,
        };
        traj.push(t_next, next, diag);
    }
    Ok(traj)
}

/// One step of Nesterov's constant-momentum method:
///
/// ```text
/// y₁⁺ = y₂ − ∇f(y₂)/L
/// y₂⁺ = y₁⁺ + ((√L − √μ)/(√L + √μ))·(y₁⁺ − y₁)
/// ```
pub fn nesterov_step(obj: &ObjectiveSpec, y1: &DVector<f64>, y2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let (sl, sm) = (obj.lip().sqrt(), obj.mu().sqrt());
    let momentum = (sl - sm) / (sl + sm);
    let next1 = y2 - obj.grad(y2, 0.0) / obj.lip();
    let next2 = &next1 + (&next1 - y1) * momentum;
    (next1, next2)
}

/// Nesterov iterates as a stacked trajectory with `t_k = k`.
pub fn nesterov_trajectory(obj: &ObjectiveSpec, y1: DVector<f64>, y2: DVector<f64>, steps: usize) -> Result<Trajectory> {
    if obj.is_time_varying() {
        return Err(Error::Domain("nesterov iteration needs a time-invariant objective".into()));
    }
    if steps == 0 {
        return Err(Error::Domain("integration needs at least one step".into()));
    }
    let n = obj.dim();
    if y1.len() != n || y2.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y1.len().max(y2.len()),
        });
    }
    let stack = |a: &DVector<f64>, b: &DVector<f64>| {
        let mut y = DVector::zeros(2 * n);
        y.rows_mut(0, n).copy_from(a);
        y.rows_mut(n, n).copy_from(b);
        y
    };
    let mut traj = Trajectory::start(0.0, stack(&y1, &y2), Scheme::Nesterov);
    let (mut a, mut b) = (y1, y2);
    for k in 0..steps {
        let (na, nb) = nesterov_step(obj, &a, &b);
        traj.push((k + 1) as f64, stack(&na, &nb), StepDiag::default());
        a = na;
        b = nb;
    }
    Ok(traj)
}

/// `h* = γ/ℓ²`, the minimizer of `1 − 2hγ + h²ℓ²`.
pub fn optimal_explicit_step(rate: f64, lipschitz: f64) -> Result<f64> {
    if !(rate > 0.0 && rate < lipschitz) {
        return Err(Error::Domain(format!(
            "optimal explicit step needs 0 < rate < lipschitz, got rate = {rate}, lipschitz = {lipschitz}"
        )));
    }
    Ok(rate / (lipschitz * lipschitz))
}

/// Per-step contraction factor `√(1 − 2hγ + h²ℓ²)` of the explicit Euler bound.
pub fn explicit_factor(h: f64, rate: f64, lipschitz: f64) -> f64 {
    (1.0 - 2.0 * h * rate + h * h * lipschitz * lipschitz).max(0.0).sqrt()
}

/// Lipschitz bound of the ACCONEST field in the `P`-weighted norm:
/// `ℓ² = (λ_max(P)/λ_min(P))·(3 + 2β + 2β²)`.
pub fn field_lipschitz_bound(kappa: f64, metric: &Metric) -> f64 {
    let beta = acconest_beta(kappa);
    (metric.condition() * (3.0 + 2.0 * beta + 2.0 * beta * beta)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepVariant {
    /// `1/(√κ(3+2β+2β²))·√(λ_min/λ_max)`.
    Statement,
    /// `1/(√κ(3+2β+2β²))·(λ_min/λ_max)`, which equals `γ/ℓ²` for `γ = √(μ/L)`.
    Proof,
}

fn acconest_step_raw(kappa: f64, metric: &Metric, variant: StepVariant) -> f64 {
    let beta = acconest_beta(kappa);
    let base = 1.0 / (kappa.sqrt() * (3.0 + 2.0 * beta + 2.0 * beta * beta));
    let ratio = metric.lambda_min() / metric.lambda_max();
    match variant {
        StepVariant::Statement => base * ratio.sqrt(),
        StepVariant::Proof => base * ratio,
    }
}

/// Admissible explicit Euler window `(0, 2γ/ℓ²)` for the ACCONEST field.
pub fn acconest_step_window(kappa: f64, metric: &Metric) -> f64 {
    let ell = field_lipschitz_bound(kappa, metric);
    2.0 / kappa.sqrt() / (ell * ell)
}

/// Explicit Euler step for the ACCONEST flow in the requested form. Fails with
/// [`Error::WindowViolation`] when the value is not inside the admissible window.
pub fn acconest_optimal_step(kappa: f64, metric: &Metric, variant: StepVariant) -> Result<f64> {
    if !(kappa >= 1.0) {
        return Err(Error::Domain(format!("kappa must be >= 1, got {kappa}")));
    }
    let h = acconest_step_raw(kappa, metric, variant);
    let window = acconest_step_window(kappa, metric);
    if !(h > 0.0 && h < window) {
        return Err(Error::WindowViolation { h, window });
    }
    Ok(h)
}

/// The smaller of the two step forms, checked against the window.
pub fn default_acconest_step(kappa: f64, metric: &Metric) -> Result<(f64, StepVariant)> {
    let s = acconest_step_raw(kappa, metric, StepVariant::Statement);
    let p = acconest_step_raw(kappa, metric, StepVariant::Proof);
    let variant = if p <= s { StepVariant::Proof } else { StepVariant::Statement };
    Ok((acconest_optimal_step(kappa, metric, variant)?, variant))
}
