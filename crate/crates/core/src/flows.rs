//! Vector fields of the momentum optimization flows.
//!
//! The general family in original coordinates `(x₁, x₂)` (position, velocity)
//!
//! ```text
//! ẋ₁ = c·x₂ − e·∇f(x₁ + d·x₂)
//! ẋ₂ = −a·x₂ − b·∇f(x₁ + d·x₂)
//! ```
//!
//! contains the heavy-ball type flow (`d = e = 0`) and the displaced-gradient flow
//! (`e = 0`). With `(x̄₁, x̄₂) = (x₁, x₁ + d·x₂)` and the parameter choice
//! `a = 2/(√κ+1)`, `b = e = 1/L`, `c = d = β = (√κ−1)/(√κ+1)` it becomes the
//! ACCONEST flow in barred coordinates:
//!
//! ```text
//! dx̄₁/dt = x̄₂ − x̄₁ − ∇f(x̄₂, t)/L
//! dx̄₂/dt = β(x̄₂ − x̄₁) − (β+1)∇f(x̄₂, t)/L
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contraction::{metric_matrix, Metric, METRIC_SIGN};
use crate::objectives::ObjectiveSpec;
use crate::{Error, Result};

/// Gradient-norm tolerance of the equilibrium fallback.
pub const EQUILIBRIUM_GRAD_TOL: f64 = 1e-8;
/// Iteration budget of the equilibrium fallback.
pub const EQUILIBRIUM_MAX_ITER: usize = 1_000_000;

/// A (possibly time-dependent) vector field on a stacked state vector.
///
/// Integrators and certificates only see this trait, so the scalar test flows and
/// the optimization flows share every code path.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, y: &DVector<f64>, t: f64) -> DVector<f64>;

    /// Analytic Jacobian, when the field can provide one.
    fn jacobian(&self, _y: &DVector<f64>, _t: f64) -> Option<DMatrix<f64>> {
        None
    }

    /// `true` when the Jacobian does not depend on the state.
    fn is_affine(&self) -> bool {
        false
    }

    /// A Euclidean Lipschitz constant of `y ↦ eval(y, t)`, when known.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }
}

/// `ẏ = A·y + b`.
#[derive(Clone, Debug)]
pub struct LinearField {
    pub a: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl LinearField {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let n = a.nrows();
        Ok(Self {
            a,
            offset: DVector::zeros(n),
        })
    }

    /// The scalar decay `ẋ = −λx`.
    pub fn scalar_decay(rate: f64) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, -rate),
            offset: DVector::zeros(1),
        }
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&self, y: &DVector<f64>, _t: f64) -> DVector<f64> {
        &self.a * y + &self.offset
    }

    fn jacobian(&self, _y: &DVector<f64>, _t: f64) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }

    fn is_affine(&self) -> bool {
        true
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(self.a.norm())
    }
}

/// Plain gradient flow `ẋ = −∇f(x, t)`.
#[derive(Clone, Debug)]
pub struct GradientField {
    pub obj: ObjectiveSpec,
}

impl VectorField for GradientField {
    fn dim(&self) -> usize {
        self.obj.dim()
    }

    fn eval(&self, y: &DVector<f64>, t: f64) -> DVector<f64> {
        -self.obj.grad(y, t)
    }

    fn jacobian(&self, _y: &DVector<f64>, _t: f64) -> Option<DMatrix<f64>> {
        self.obj.hessian().map(|q| -q)
    }

    fn is_affine(&self) -> bool {
        self.obj.hessian().is_some()
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(self.obj.lip())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// `(x₁, x₂)` = (position, velocity).
    Original,
    /// `(x̄₁, x̄₂)` = (position, predicted position).
    Barred,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Original => "original",
            Frame::Barred => "barred",
        }
    }
}

/// State `(x₁, x₂) ∈ ℝⁿ × ℝⁿ` tagged with its coordinate frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub x1: DVector<f64>,
    pub x2: DVector<f64>,
    frame: Frame,
}

impl FlowState {
    pub fn new(x1: DVector<f64>, x2: DVector<f64>, frame: Frame) -> Result<Self> {
        if x1.is_empty() {
            return Err(Error::Construction("state dimension must be at least 1".into()));
        }
        if x1.len() != x2.len() {
            return Err(Error::DimensionMismatch {
                expected: x1.len(),
                got: x2.len(),
            });
        }
        Ok(Self { x1, x2, frame })
    }

    pub fn barred(x1: DVector<f64>, x2: DVector<f64>) -> Result<Self> {
        Self::new(x1, x2, Frame::Barred)
    }

    pub fn original(x1: DVector<f64>, x2: DVector<f64>) -> Result<Self> {
        Self::new(x1, x2, Frame::Original)
    }

    /// Splits a stacked `2n` vector into halves.
    pub fn from_stacked(y: &DVector<f64>, frame: Frame) -> Result<Self> {
        if y.len() < 2 || y.len() % 2 != 0 {
            return Err(Error::Construction(format!("stacked state must have even length >= 2, got {}", y.len())));
        }
        let n = y.len() / 2;
        Self::new(y.rows(0, n).into_owned(), y.rows(n, n).into_owned(), frame)
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Half dimension `n`.
    pub fn n(&self) -> usize {
        self.x1.len()
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.n();
        let mut y = DVector::zeros(2 * n);
        y.rows_mut(0, n).copy_from(&self.x1);
        y.rows_mut(n, n).copy_from(&self.x2);
        y
    }

    /// Componentwise difference; both states must share a frame.
    pub fn sub(&self, other: &FlowState) -> Result<FlowState> {
        self.check_frame(other.frame)?;
        FlowState::new(&self.x1 - &other.x1, &self.x2 - &other.x2, self.frame)
    }

    fn check_frame(&self, expected: Frame) -> Result<()> {
        if self.frame != expected {
            return Err(Error::FrameMismatch {
                expected: expected.name(),
                got: self.frame.name(),
            });
        }
        Ok(())
    }

    /// `(x₁, x₂) ↦ (x₁, x₁ + d·x₂)`. Applies equally to states and to derivatives.
    pub fn to_barred(&self, d: f64) -> Result<FlowState> {
        self.check_frame(Frame::Original)?;
        FlowState::barred(self.x1.clone(), &self.x1 + &self.x2 * d)
    }

    /// Inverse of [`to_barred`](Self::to_barred); requires `d > 0`.
    pub fn to_original(&self, d: f64) -> Result<FlowState> {
        self.check_frame(Frame::Barred)?;
        if !(d > 0.0) {
            return Err(Error::Domain(format!("change of variables needs d > 0, got {d}")));
        }
        FlowState::original(self.x1.clone(), (&self.x2 - &self.x1) / d)
    }
}

/// Coefficients `(a, b, c, d, e)` of the general momentum flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl MomentumParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(Error::Domain(format!("need a, b, c > 0, got ({a}, {b}, {c})")));
        }
        if !(d >= 0.0 && e >= 0.0) {
            return Err(Error::Domain(format!("need d, e >= 0, got ({d}, {e})")));
        }
        Ok(Self { a, b, c, d, e })
    }

    /// The assignment that turns the general flow into ACCONEST.
    ///
    /// For `κ = 1` this gives `c = d = 0`, which `new` would reject; the values are
    /// returned anyway since the field itself is still well defined.
    pub fn acconest(kappa: f64, lip: f64) -> Self {
        let beta = acconest_beta(kappa);
        Self {
            a: 2.0 / (kappa.sqrt() + 1.0),
            b: 1.0 / lip,
            c: beta,
            d: beta,
            e: 1.0 / lip,
        }
    }
}

/// `β = (√κ − 1)/(√κ + 1)`.
pub fn acconest_beta(kappa: f64) -> f64 {
    let s = kappa.sqrt();
    (s - 1.0) / (s + 1.0)
}

#[derive(Clone, Debug)]
pub enum FlowKind {
    Acconest { beta: f64 },
    Momentum(MomentumParams),
}

/// An optimization flow bound to an objective.
#[derive(Clone, Debug)]
pub struct FlowField {
    kind: FlowKind,
    obj: ObjectiveSpec,
    claimed_rate: Option<f64>,
    metric_hint: Option<Metric>,
}

/// General momentum flow in original coordinates.
pub fn general_momentum_field(params: MomentumParams, obj: &ObjectiveSpec) -> Result<FlowField> {
    if obj.is_time_varying() {
        return Err(Error::Domain("general momentum flows are defined for time-invariant objectives".into()));
    }
    Ok(FlowField {
        kind: FlowKind::Momentum(params),
        obj: obj.clone(),
        claimed_rate: None,
        metric_hint: None,
    })
}

/// ACCONEST flow in barred coordinates, time-varying whenever `obj` is.
///
/// Claims contraction rate `√(μ/L)` and carries the block metric at the midpoint
/// `γ = 1 + 1/(2κ)` as its metric hint.
pub fn acconest_field(obj: &ObjectiveSpec) -> Result<FlowField> {
    let kappa = obj.kappa();
    if !(obj.mu() > 0.0 && kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::Construction(format!(
            "objective constants invalid: mu = {}, lip = {}",
            obj.mu(),
            obj.lip()
        )));
    }
    let metric = metric_matrix(kappa, default_gamma(kappa), METRIC_SIGN, obj.dim())?;
    Ok(FlowField {
        kind: FlowKind::Acconest {
            beta: acconest_beta(kappa),
        },
        obj: obj.clone(),
        claimed_rate: Some((obj.mu() / obj.lip()).sqrt()),
        metric_hint: Some(metric),
    })
}

/// Midpoint of the admissible metric range `(1, 1 + 1/κ]`.
pub fn default_gamma(kappa: f64) -> f64 {
    1.0 + 1.0 / (2.0 * kappa)
}

impl FlowField {
    pub fn kind(&self) -> &FlowKind {
        &self.kind
    }

    pub fn objective(&self) -> &ObjectiveSpec {
        &self.obj
    }

    pub fn n(&self) -> usize {
        self.obj.dim()
    }

    pub fn frame(&self) -> Frame {
        match self.kind {
            FlowKind::Acconest { .. } => Frame::Barred,
            FlowKind::Momentum(_) => Frame::Original,
        }
    }

    pub fn claimed_rate(&self) -> Option<f64> {
        self.claimed_rate
    }

    pub fn metric_hint(&self) -> Option<&Metric> {
        self.metric_hint.as_ref()
    }

    pub fn with_claimed_rate(mut self, rate: f64) -> Self {
        self.claimed_rate = Some(rate);
        self
    }

    pub fn with_metric_hint(mut self, metric: Metric) -> Self {
        self.metric_hint = Some(metric);
        self
    }

    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            FlowKind::Acconest { beta } => Some(beta),
            FlowKind::Momentum(_) => None,
        }
    }

    pub fn id(&self) -> String {
        match &self.kind {
            FlowKind::Acconest { .. } => format!("acconest/{}/kappa={}", self.obj.kind_name(), self.obj.kappa()),
            FlowKind::Momentum(p) => format!(
                "momentum(a={},b={},c={},d={},e={})/{}",
                p.a,
                p.b,
                p.c,
                p.d,
                p.e,
                self.obj.kind_name()
            ),
        }
    }

    /// Derivative at a tagged state; the state must be in this field's frame.
    pub fn eval_state(&self, state: &FlowState, t: f64) -> Result<FlowState> {
        state.check_frame(self.frame())?;
        if state.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: state.n(),
            });
        }
        let (d1, d2) = self.eval_halves(&state.x1, &state.x2, t);
        FlowState::new(d1, d2, self.frame())
    }

    fn eval_halves(&self, x1: &DVector<f64>, x2: &DVector<f64>, t: f64) -> (DVector<f64>, DVector<f64>) {
        match &self.kind {
            FlowKind::Acconest { beta } => {
                let inv_l = 1.0 / self.obj.lip();
                let g = self.obj.grad(x2, t);
                let gap = x2 - x1;
                let d1 = &gap - &g * inv_l;
                let d2 = gap * *beta - g * ((beta + 1.0) * inv_l);
                (d1, d2)
            }
            FlowKind::Momentum(p) => {
                let g = self.obj.grad(&(x1 + x2 * p.d), t);
                let d1 = x2 * p.c - &g * p.e;
                let d2 = x2 * (-p.a) - g * p.b;
                (d1, d2)
            }
        }
    }

    /// Equilibrium `(x*(t), x*(t))` (barred) or `(x*(t), 0)` (original).
    ///
    /// Uses the declared minimizer when present and otherwise falls back to gradient
    /// descent with step `1/L`.
    pub fn equilibrium(&self, t: f64) -> Result<FlowState> {
        let xs = match self.obj.known_minimizer(t) {
            Some(x) => x,
            None => minimize_by_gradient_descent(&self.obj, t)?,
        };
        match self.frame() {
            Frame::Barred => FlowState::barred(xs.clone(), xs),
            Frame::Original => FlowState::original(xs, DVector::zeros(self.n())),
        }
    }

    /// Stacked equilibrium vector, convenient for integrator diagnostics.
    pub fn equilibrium_stacked(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.equilibrium(t)?.stacked())
    }
}

/// Gradient descent with step `1/L` until `‖∇f‖ ≤ EQUILIBRIUM_GRAD_TOL`.
pub fn minimize_by_gradient_descent(obj: &ObjectiveSpec, t: f64) -> Result<DVector<f64>> {
    let step = 1.0 / obj.lip();
    let mut x = DVector::zeros(obj.dim());
    let mut g = obj.grad(&x, t);
    for _ in 0..EQUILIBRIUM_MAX_ITER {
        if g.norm() <= EQUILIBRIUM_GRAD_TOL {
            return Ok(x);
        }
        x -= &g * step;
        g = obj.grad(&x, t);
    }
    if g.norm() <= EQUILIBRIUM_GRAD_TOL {
        return Ok(x);
    }
    Err(Error::Convergence {
        what: "equilibrium gradient descent",
        iterations: EQUILIBRIUM_MAX_ITER,
        residual: g.norm(),
    })
}

impl VectorField for FlowField {
    fn dim(&self) -> usize {
        2 * self.n()
    }

    fn eval(&self, y: &DVector<f64>, t: f64) -> DVector<f64> {
        let n = self.n();
        let x1 = y.rows(0, n).into_owned();
        let x2 = y.rows(n, n).into_owned();
        let (d1, d2) = self.eval_halves(&x1, &x2, t);
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&d1);
        out.rows_mut(n, n).copy_from(&d2);
        out
    }

    fn jacobian(&self, _y: &DVector<f64>, _t: f64) -> Option<DMatrix<f64>> {
        let q = self.obj.hessian()?;
        let n = self.n();
        let id = DMatrix::<f64>::identity(n, n);
        let (j11, j12, j21, j22) = match &self.kind {
            FlowKind::Acconest { beta } => {
                let ql = q / self.obj.lip();
                (-&id, &id - &ql, &id * (-beta), &id * *beta - ql * (beta + 1.0))
            }
            FlowKind::Momentum(p) => (q * (-p.e), &id * p.c - q * (p.e * p.d), q * (-p.b), &id * (-p.a) - q * (p.b * p.d)),
        };
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        j.view_mut((0, 0), (n, n)).copy_from(&j11);
        j.view_mut((0, n), (n, n)).copy_from(&j12);
        j.view_mut((n, 0), (n, n)).copy_from(&j21);
        j.view_mut((n, n), (n, n)).copy_from(&j22);
        Some(j)
    }

    fn is_affine(&self) -> bool {
        self.obj.hessian().is_some()
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        // Frobenius bound with ‖∇²f‖ ≤ L in every block
        let l = self.obj.lip();
        let n = self.n() as f64;
        let (c11, c12, c21, c22) = match &self.kind {
            FlowKind::Acconest { beta } => (1.0, 1.0 + 1.0, *beta, beta + (beta + 1.0)),
            FlowKind::Momentum(p) => (p.e * l, p.c + p.e * p.d * l, p.b * l, p.a + p.b * p.d * l),
        };
        Some(((c11 * c11 + c12 * c12 + c21 * c21 + c22 * c22) * n).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{rng_from_seed, uniform_in_ball};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn quad(eigs: &[f64], c: &[f64]) -> ObjectiveSpec {
        ObjectiveSpec::diagonal_quadratic(eigs, v(c)).unwrap()
    }

    #[test]
    fn heavy_ball_equilibrium_and_substitution() {
        let obj = quad(&[1.0, 1.0], &[0.0, 0.0]);
        let p = MomentumParams::new(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let f = general_momentum_field(p, &obj).unwrap();
        let eq = f.equilibrium(0.0).unwrap();
        let d = f.eval_state(&eq, 0.0).unwrap();
        assert_eq!(d.stacked().norm(), 0.0);

        let obj1 = quad(&[1.0], &[0.0]);
        let f1 = general_momentum_field(p, &obj1).unwrap();
        let s = FlowState::original(v(&[1.0]), v(&[0.0])).unwrap();
        let d = f1.eval_state(&s, 0.0).unwrap();
        assert_eq!((d.x1[0], d.x2[0]), (0.0, -1.0));
    }

    #[test]
    fn momentum_params_validation() {
        assert!(MomentumParams::new(0.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(MomentumParams::new(1.0, 1.0, 1.0, -0.1, 0.0).is_err());
        assert!(MomentumParams::new(1.0, 1.0, 1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn frame_mismatch_is_rejected() {
        let obj = quad(&[1.0, 4.0], &[0.0, 0.0]);
        let acc = acconest_field(&obj).unwrap();
        let orig = FlowState::original(v(&[1.0, 0.0]), v(&[0.0, 1.0])).unwrap();
        assert!(matches!(acc.eval_state(&orig, 0.0), Err(Error::FrameMismatch { .. })));
        let p = MomentumParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap();
        let gen = general_momentum_field(p, &obj).unwrap();
        let bar = FlowState::barred(v(&[1.0, 0.0]), v(&[0.0, 1.0])).unwrap();
        assert!(gen.eval_state(&bar, 0.0).is_err());
        assert!(bar.sub(&orig).is_err());
    }

    #[test]
    fn kappa_one_collapses_to_negative_identity() {
        let obj = quad(&[1.0, 1.0], &[0.0, 0.0]);
        let f = acconest_field(&obj).unwrap();
        assert_eq!(f.beta(), Some(0.0));
        let y = v(&[0.3, -1.2, 2.0, 0.7]);
        assert!((f.eval(&y, 0.0) + &y).amax() <= 1e-15);
        assert_eq!(f.jacobian(&y, 0.0).unwrap(), -DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn acconest_equilibrium_is_stationary() {
        for obj in [quad(&[1.0, 4.0], &[3.0, -2.0]), quad(&[2.0, 7.0, 11.0], &[1.0, 0.0, -1.0])] {
            let f = acconest_field(&obj).unwrap();
            let eq = f.equilibrium(0.0).unwrap();
            assert_eq!(eq.x1, obj.known_minimizer(0.0).unwrap());
            assert_eq!(eq.x1, eq.x2);
            assert!(f.eval_state(&eq, 0.0).unwrap().stacked().norm() <= 1e-12);
        }
    }

    #[test]
    fn acconest_second_row_coefficient_forms_agree() {
        for kappa in [1.0, 1.5, 4.0, 100.0, 12345.0] {
            let l = 3.0;
            let beta = acconest_beta(kappa);
            let s = kappa.sqrt();
            let direct = 2.0 * s / ((s + 1.0) * l);
            assert!(((beta + 1.0) / l - direct).abs() <= 1e-15 * direct);
        }
    }

    #[test]
    fn acconest_two_path_evaluation_at_fixed_state() {
        // direct substitution into the barred field vs. the general field + change of variables
        let obj = quad(&[1.0, 4.0], &[0.0, 0.0]);
        let acc = acconest_field(&obj).unwrap();
        let bar = FlowState::barred(v(&[1.0, 0.0]), v(&[0.0, 1.0])).unwrap();
        let direct = acc.eval_state(&bar, 0.0).unwrap();

        // hand substitution: β = 1/3, L = 4, ∇f(x̄₂) = (0, 4)
        let beta = 1.0 / 3.0;
        let g = v(&[0.0, 4.0]);
        let gap = v(&[-1.0, 1.0]);
        let hand1 = &gap - &g / 4.0;
        let hand2 = &gap * beta - &g * ((beta + 1.0) / 4.0);
        assert!((direct.x1.clone() - hand1).amax() <= 1e-15);
        assert!((direct.x2.clone() - hand2).amax() <= 1e-15);

        let p = MomentumParams::acconest(obj.kappa(), obj.lip());
        let gen = general_momentum_field(p, &obj).unwrap();
        let orig = bar.to_original(p.d).unwrap();
        let via = gen.eval_state(&orig, 0.0).unwrap().to_barred(p.d).unwrap();
        assert!((via.stacked() - direct.stacked()).amax() <= 1e-12);
    }

    #[test]
    fn change_of_variables_commutes_at_random_states() {
        let q = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.5]);
        let obj = ObjectiveSpec::quadratic(q, v(&[0.5, -1.0, 2.0])).unwrap();
        let p = MomentumParams::acconest(obj.kappa(), obj.lip());
        let gen = general_momentum_field(p, &obj).unwrap();
        let acc = acconest_field(&obj).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let x1 = uniform_in_ball(&mut rng, &DVector::zeros(3), 10.0);
            let x2 = uniform_in_ball(&mut rng, &DVector::zeros(3), 10.0);
            let orig = FlowState::original(x1, x2).unwrap();
            let lhs = gen.eval_state(&orig, 0.0).unwrap().to_barred(p.d).unwrap();
            let rhs = acc.eval_state(&orig.to_barred(p.d).unwrap(), 0.0).unwrap();
            let scale = rhs.stacked().amax().max(1.0);
            assert!((lhs.stacked() - rhs.stacked()).amax() <= 1e-12 * scale);
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let obj = quad(&[1.0, 4.0], &[0.5, -0.5]);
        let acc = acconest_field(&obj).unwrap();
        let gen = general_momentum_field(MomentumParams::new(0.7, 0.3, 0.9, 0.4, 0.2).unwrap(), &obj).unwrap();
        let y = v(&[0.3, -1.0, 2.0, 0.1]);
        for f in [&acc, &gen] {
            let j = f.jacobian(&y, 0.0).unwrap();
            let h = 1e-6;
            for col in 0..4 {
                let mut yp = y.clone();
                yp[col] += h;
                let fd = (f.eval(&yp, 0.0) - f.eval(&y, 0.0)) / h;
                assert!((fd - j.column(col)).amax() < 1e-7);
            }
            assert!(j.norm() <= f.lipschitz_hint().unwrap() + 1e-12);
        }
    }

    #[test]
    fn rotating_equilibrium_follows_circle() {
        let obj = ObjectiveSpec::rotating_quadratic(1.0, 0.1, DMatrix::identity(2, 2)).unwrap();
        let f = acconest_field(&obj).unwrap();
        for i in 0..10 {
            let t = i as f64 * 4.7;
            let eq = f.equilibrium(t).unwrap();
            let c = v(&[(0.1 * t).cos(), (0.1 * t).sin()]);
            assert_eq!(eq.x1, c);
            assert_eq!(eq.x2, c);
            assert!(f.eval_state(&eq, t).unwrap().stacked().norm() <= 1e-8);
        }
    }

    #[test]
    fn logsumexp_equilibrium_by_fallback() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        let obj = ObjectiveSpec::logsumexp_ridge(a, v(&[0.0, 0.0]), 1.0).unwrap();
        let f = acconest_field(&obj).unwrap();
        let eq = f.equilibrium(0.0).unwrap();
        assert!(eq.x1.norm() <= 1e-8);
        assert!(f.eval_state(&eq, 0.0).unwrap().stacked().norm() <= 1e-8);

        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 1.2, 0.7, -0.9]);
        let obj = ObjectiveSpec::logsumexp_ridge(a, v(&[0.2, 0.0, -0.1]), 0.5).unwrap();
        let f = acconest_field(&obj).unwrap();
        let eq = f.equilibrium(0.0).unwrap();
        assert!(f.eval_state(&eq, 0.0).unwrap().stacked().norm() <= 1e-8);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -1.0, 0.8]);
        let obj = ObjectiveSpec::logsumexp_ridge(a, v(&[0.1, 0.0]), 0.5).unwrap();
        let f = acconest_field(&obj).unwrap();
        let y = v(&[0.1, 0.2, -0.3, 0.4]);
        let first = f.eval(&y, 0.0);
        for _ in 0..10 {
            assert_eq!(f.eval(&y, 0.0), first);
        }
    }

    #[test]
    fn momentum_rejects_time_varying_objective() {
        let obj = ObjectiveSpec::rotating_quadratic(1.0, 0.1, DMatrix::identity(2, 2)).unwrap();
        let p = MomentumParams::new(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(general_momentum_field(p, &obj).is_err());
    }
}
