//! Objective oracles for the class of μ-strongly convex, L-smooth functions.
//!
//! Every oracle takes a time argument; time-invariant objectives ignore it so the
//! time-varying tracking path and the static path share one code path.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg::{is_symmetric, symmetric_eigen, SymmetricEigen};
use crate::sampling::PairSampler;
use crate::{Error, Result};

/// Relative tolerance used when checking sampled class inequalities.
pub const CLASS_TOL: f64 = 1e-9;
/// Absolute tolerance on the gradient at a declared minimizer.
pub const MINIMIZER_TOL: f64 = 1e-10;

type ValueFn = dyn Fn(&DVector<f64>, f64) -> f64 + Send + Sync;
type GradFn = dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync;
type MinimizerFn = dyn Fn(f64) -> DVector<f64> + Send + Sync;

#[derive(Clone)]
enum Kind {
    Quadratic {
        q: DMatrix<f64>,
        center: DVector<f64>,
    },
    Rotating {
        q: DMatrix<f64>,
        radius: f64,
        omega: f64,
    },
    LogSumExp {
        a: DMatrix<f64>,
        b: DVector<f64>,
        ridge: f64,
    },
    Custom {
        value: Arc<ValueFn>,
        grad: Arc<GradFn>,
        minimizer: Option<Arc<MinimizerFn>>,
    },
}

/// A member of the class 𝒮¹_{μ,L} (optionally parametrised by time) together with
/// its certified constants.
#[derive(Clone)]
pub struct ObjectiveSpec {
    dim: usize,
    mu: f64,
    lip: f64,
    time_varying: bool,
    grad_time_rate: Option<f64>,
    /// Eigenvalues of the constant Hessian, ascending, when the objective is quadratic.
    hessian_eigs: Option<SymmetricEigen>,
    kind: Kind,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("kind", &self.kind_name())
            .field("dim", &self.dim)
            .field("mu", &self.mu)
            .field("lip", &self.lip)
            .field("time_varying", &self.time_varying)
            .field("grad_time_rate", &self.grad_time_rate)
            .finish()
    }
}

fn spd_eigen(q: &DMatrix<f64>) -> Result<SymmetricEigen> {
    if !q.is_square() || q.nrows() == 0 {
        return Err(Error::Construction(format!(
            "Hessian must be a non-empty square matrix, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    if !is_symmetric(q, 1e-12) {
        return Err(Error::Construction("Hessian matrix is not symmetric".into()));
    }
    let eig = symmetric_eigen(q)?;
    if eig.min() <= 0.0 {
        return Err(Error::Construction(format!(
            "Hessian matrix is not positive definite (smallest eigenvalue {})",
            eig.min()
        )));
    }
    Ok(eig)
}

impl ObjectiveSpec {
    /// `f(x) = ½(x−c)ᵀQ(x−c)` with `μ = λ_min(Q)`, `L = λ_max(Q)` and minimizer `c`.
    pub fn quadratic(q: DMatrix<f64>, center: DVector<f64>) -> Result<Self> {
        let eig = spd_eigen(&q)?;
        if center.len() != q.nrows() {
            return Err(Error::DimensionMismatch {
                expected: q.nrows(),
                got: center.len(),
            });
        }
        Ok(Self {
            dim: q.nrows(),
            mu: eig.min(),
            lip: eig.max(),
            time_varying: false,
            grad_time_rate: None,
            hessian_eigs: Some(eig),
            kind: Kind::Quadratic { q, center },
        })
    }

    /// Diagonal quadratic with the given eigenvalues centered at `center`.
    pub fn diagonal_quadratic(eigs: &[f64], center: DVector<f64>) -> Result<Self> {
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(eigs));
        Self::quadratic(q, center)
    }

    /// Quadratic whose minimizer travels on a circle: `c(t) = r(cos ωt, sin ωt)`.
    ///
    /// The stored gradient time rate is the continuous-time bound `λ_max(Q)·r·|ω|`.
    pub fn rotating_quadratic(radius: f64, omega: f64, q: DMatrix<f64>) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Construction(format!("radius must be nonnegative, got {radius}")));
        }
        if !omega.is_finite() {
            return Err(Error::Construction("omega must be finite".into()));
        }
        if q.nrows() != 2 {
            return Err(Error::Construction(format!(
                "rotating quadratic is planar, Hessian must be 2x2 (got {}x{})",
                q.nrows(),
                q.ncols()
            )));
        }
        let eig = spd_eigen(&q)?;
        let rate = eig.max() * radius * omega.abs();
        Ok(Self {
            dim: 2,
            mu: eig.min(),
            lip: eig.max(),
            time_varying: radius * omega != 0.0,
            grad_time_rate: Some(rate),
            hessian_eigs: Some(eig),
            kind: Kind::Rotating { q, radius, omega },
        })
    }

    /// `f(x) = log Σᵢ exp(aᵢᵀx + bᵢ) + (λ/2)‖x‖²` with `μ = λ`, `L = λ + ‖A‖₂²`.
    pub fn logsumexp_ridge(a: DMatrix<f64>, b: DVector<f64>, ridge: f64) -> Result<Self> {
        if !(ridge > 0.0) || !ridge.is_finite() {
            return Err(Error::Construction(format!("ridge must be positive, got {ridge}")));
        }
        if a.nrows() == 0 || a.ncols() == 0 || a.iter().all(|v| *v == 0.0) {
            return Err(Error::Construction("matrix A must be nonzero".into()));
        }
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let gram = a.transpose() * &a;
        let op_norm_sq = symmetric_eigen(&gram)?.max();
        Ok(Self {
            dim: a.ncols(),
            mu: ridge,
            lip: ridge + op_norm_sq,
            time_varying: false,
            grad_time_rate: None,
            hessian_eigs: None,
            kind: Kind::LogSumExp { a, b, ridge },
        })
    }

    /// User-supplied oracles. The constants are trusted; use [`validate_class`] to check them.
    pub fn from_oracles<V, G>(dim: usize, mu: f64, lip: f64, value: V, grad: G) -> Result<Self>
    where
        V: Fn(&DVector<f64>, f64) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::Construction("dimension must be positive".into()));
        }
        if !(mu > 0.0 && lip >= mu) {
            return Err(Error::Construction(format!("need 0 < mu <= lip, got mu = {mu}, lip = {lip}")));
        }
        Ok(Self {
            dim,
            mu,
            lip,
            time_varying: false,
            grad_time_rate: None,
            hessian_eigs: None,
            kind: Kind::Custom {
                value: Arc::new(value),
                grad: Arc::new(grad),
                minimizer: None,
            },
        })
    }

    /// Attaches a known minimizer curve to a custom objective.
    pub fn with_minimizer<M>(mut self, minimizer: M) -> Self
    where
        M: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        if let Kind::Custom { minimizer: slot, .. } = &mut self.kind {
            *slot = Some(Arc::new(minimizer));
        }
        self
    }

    /// Marks a custom objective as time-varying with the given gradient time rate ρ.
    pub fn with_time_rate(mut self, rate: f64) -> Self {
        self.time_varying = true;
        self.grad_time_rate = Some(rate);
        self
    }

    /// Replaces the declared constants without re-deriving them. Intended for
    /// testing validators against deliberately mislabeled objectives.
    pub fn with_constants(mut self, mu: f64, lip: f64) -> Self {
        self.mu = mu;
        self.lip = lip;
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Quadratic { .. } => "quadratic",
            Kind::Rotating { .. } => "rotating_quadratic",
            Kind::LogSumExp { .. } => "logsumexp_ridge",
            Kind::Custom { .. } => "custom",
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn kappa(&self) -> f64 {
        self.lip / self.mu
    }

    pub fn is_time_varying(&self) -> bool {
        self.time_varying
    }

    /// Continuous-time bound ρ on `‖∂ₜ∇f(x, t)‖₂`, when declared.
    pub fn grad_time_rate(&self) -> Option<f64> {
        self.grad_time_rate
    }

    /// Per-step gradient variation `sup_x ‖∇f(x, kh) − ∇f(x, (k−1)h)‖₂` for step `h`.
    ///
    /// Exact for rotating quadratics (`λ_max(Q)·r·√(2 − 2cos ωh)`); otherwise the
    /// continuous rate times `h`. Zero for time-invariant objectives.
    pub fn grad_step_variation(&self, h: f64) -> f64 {
        match &self.kind {
            Kind::Rotating { radius, omega, .. } => {
                self.lip * radius * (2.0 - 2.0 * (omega * h).cos()).max(0.0).sqrt()
            }
            _ if !self.time_varying => 0.0,
            _ => self.grad_time_rate.unwrap_or(0.0) * h,
        }
    }

    pub fn value(&self, x: &DVector<f64>, t: f64) -> f64 {
        match &self.kind {
            Kind::Quadratic { q, center } => {
                let d = x - center;
                0.5 * d.dot(&(q * &d))
            }
            Kind::Rotating { q, .. } => {
                let d = x - self.rotating_center(t);
                0.5 * d.dot(&(q * &d))
            }
            Kind::LogSumExp { a, b, ridge } => {
                let z = a * x + b;
                let m = z.max();
                m + z.iter().map(|zi| (zi - m).exp()).sum::<f64>().ln() + 0.5 * ridge * x.norm_squared()
            }
            Kind::Custom { value, .. } => value(x, t),
        }
    }

    pub fn grad(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        match &self.kind {
            Kind::Quadratic { q, center } => q * (x - center),
            Kind::Rotating { q, .. } => q * (x - self.rotating_center(t)),
            Kind::LogSumExp { a, b, ridge } => {
                let z = a * x + b;
                let m = z.max();
                let w = z.map(|zi| (zi - m).exp());
                let p = &w / w.sum();
                a.transpose() * p + x * *ridge
            }
            Kind::Custom { grad, .. } => grad(x, t),
        }
    }

    /// Constant Hessian of quadratic objectives.
    pub fn hessian(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            Kind::Quadratic { q, .. } | Kind::Rotating { q, .. } => Some(q),
            _ => None,
        }
    }

    /// Eigen-decomposition of the constant Hessian of quadratic objectives.
    pub fn hessian_eigen(&self) -> Option<&SymmetricEigen> {
        self.hessian_eigs.as_ref()
    }

    pub fn known_minimizer(&self, t: f64) -> Option<DVector<f64>> {
        match &self.kind {
            Kind::Quadratic { center, .. } => Some(center.clone()),
            Kind::Rotating { .. } => Some(self.rotating_center(t)),
            Kind::LogSumExp { .. } => None,
            Kind::Custom { minimizer, .. } => minimizer.as_ref().map(|m| m(t)),
        }
    }

    pub fn has_known_minimizer(&self) -> bool {
        match &self.kind {
            Kind::Quadratic { .. } | Kind::Rotating { .. } => true,
            Kind::LogSumExp { .. } => false,
            Kind::Custom { minimizer, .. } => minimizer.is_some(),
        }
    }

    fn rotating_center(&self, t: f64) -> DVector<f64> {
        match &self.kind {
            Kind::Rotating { radius, omega, .. } => {
                DVector::from_vec(vec![radius * (omega * t).cos(), radius * (omega * t).sin()])
            }
            _ => unreachable!("rotating_center on non-rotating objective"),
        }
    }
}

/// Worst sampled ratios of the class inequalities.
#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub pairs: usize,
    /// `min (∇f(x)−∇f(y))ᵀ(x−y) / ‖x−y‖²`, must be ≥ μ.
    pub strong_convexity_ratio: f64,
    /// `max ‖∇f(x)−∇f(y)‖ / ‖x−y‖`, must be ≤ L.
    pub smoothness_ratio: f64,
    /// Largest `‖∇f(x*(s), s)‖` over the sampled times, if a minimizer is declared.
    pub minimizer_residual: Option<f64>,
    /// Largest `‖∇f(x, s+δ) − ∇f(x, s)‖ / δ`, if the objective is time-varying.
    pub time_rate_ratio: Option<f64>,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Spot-checks the declared `(μ, L)` (and minimizer, time rate) on sampled pairs.
///
/// `times` is cycled over the pairs; time-invariant objectives ignore it.
pub fn validate_class(obj: &ObjectiveSpec, sampler: &mut PairSampler, count: usize, times: &[f64]) -> Result<ClassReport> {
    if count == 0 {
        return Err(Error::Domain("validate_class needs count >= 1".into()));
    }
    if sampler.dim() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: sampler.dim(),
        });
    }
    let default_times = [0.0];
    let times = if times.is_empty() { &default_times[..] } else { times };

    let mut sc = f64::INFINITY;
    let mut sm: f64 = 0.0;
    let mut used = 0;
    let mut time_ratio: f64 = 0.0;
    const TIME_DELTA: f64 = 0.1;
    for i in 0..count {
        let t = times[i % times.len()];
        let (x, y) = sampler.next_pair();
        let d = &x - &y;
        let dd = d.norm_squared();
        if dd == 0.0 {
            continue;
        }
        let dg = obj.grad(&x, t) - obj.grad(&y, t);
        sc = sc.min(dg.dot(&d) / dd);
        sm = sm.max(dg.norm() / dd.sqrt());
        used += 1;
        if obj.is_time_varying() {
            let v = (obj.grad(&x, t + TIME_DELTA) - obj.grad(&x, t)).norm() / TIME_DELTA;
            time_ratio = time_ratio.max(v);
        }
    }
    if used == 0 {
        return Err(Error::Sampling("every sampled pair was coincident".into()));
    }

    let mut failures = Vec::new();
    if sc < obj.mu() * (1.0 - CLASS_TOL) {
        failures.push(format!("strong convexity ratio {sc} below declared mu {}", obj.mu()));
    }
    if sm > obj.lip() * (1.0 + CLASS_TOL) {
        failures.push(format!("smoothness ratio {sm} above declared lip {}", obj.lip()));
    }
    let minimizer_residual = if obj.has_known_minimizer() {
        let r = times
            .iter()
            .map(|&t| {
                let xs = obj.known_minimizer(t).expect("declared minimizer");
                obj.grad(&xs, t).norm()
            })
            .fold(0.0, f64::max);
        if r > MINIMIZER_TOL {
            failures.push(format!("gradient at declared minimizer is {r:e}"));
        }
        Some(r)
    } else {
        None
    };
    let time_rate_ratio = if obj.is_time_varying() {
        if let Some(rate) = obj.grad_time_rate() {
            if time_ratio > rate * (1.0 + CLASS_TOL) + f64::EPSILON {
                failures.push(format!("gradient time variation {time_ratio} above declared rate {rate}"));
            }
        }
        Some(time_ratio)
    } else {
        None
    };

    Ok(ClassReport {
        pairs: used,
        strong_convexity_ratio: sc,
        smoothness_ratio: sm,
        minimizer_residual,
        time_rate_ratio,
        passed: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{rng_from_seed, uniform_in_ball};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn central_difference(obj: &ObjectiveSpec, x: &DVector<f64>, t: f64) -> DVector<f64> {
        let h = 1e-5;
        DVector::from_fn(x.len(), |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (obj.value(&xp, t) - obj.value(&xm, t)) / (2.0 * h)
        })
    }

    #[test]
    fn identity_quadratic_constants() {
        let obj = ObjectiveSpec::quadratic(DMatrix::identity(2, 2), v(&[0.0, 0.0])).unwrap();
        assert_eq!((obj.mu(), obj.lip(), obj.kappa()), (1.0, 1.0, 1.0));
        assert_eq!(obj.known_minimizer(0.0).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn diagonal_quadratic_constants() {
        let obj = ObjectiveSpec::diagonal_quadratic(&[1.0, 4.0], v(&[0.0, 0.0])).unwrap();
        assert_eq!((obj.mu(), obj.lip(), obj.kappa()), (1.0, 4.0, 4.0));
    }

    #[test]
    fn gradient_at_origin_matches_hand_value_and_finite_differences() {
        let obj = ObjectiveSpec::diagonal_quadratic(&[1.0, 100.0], v(&[3.0, -2.0])).unwrap();
        let origin = v(&[0.0, 0.0]);
        let g = obj.grad(&origin, 0.0);
        assert_eq!(g, v(&[-3.0, 200.0]));
        let fd = central_difference(&obj, &origin, 0.0);
        assert!((fd - &g).norm() <= 1e-6 * g.norm());
        assert_eq!(obj.known_minimizer(0.0).unwrap(), v(&[3.0, -2.0]));
    }

    #[test]
    fn quadratic_rejects_bad_matrices() {
        let nonsym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            ObjectiveSpec::quadratic(nonsym, v(&[0.0, 0.0])),
            Err(Error::Construction(_))
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ObjectiveSpec::quadratic(indefinite, v(&[0.0, 0.0])).is_err());
        assert!(ObjectiveSpec::diagonal_quadratic(&[0.0, 1.0], v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn rotating_degenerate_cases() {
        let obj = ObjectiveSpec::rotating_quadratic(0.0, 3.0, DMatrix::identity(2, 2)).unwrap();
        assert_eq!(obj.grad_time_rate(), Some(0.0));
        assert!(!obj.is_time_varying());
        assert_eq!(obj.known_minimizer(5.0).unwrap(), v(&[0.0, 0.0]));

        let frozen = ObjectiveSpec::rotating_quadratic(1.0, 0.0, DMatrix::identity(2, 2)).unwrap();
        assert_eq!(frozen.grad_time_rate(), Some(0.0));
        assert_eq!(frozen.known_minimizer(7.0).unwrap(), v(&[1.0, 0.0]));

        assert!(ObjectiveSpec::rotating_quadratic(-1.0, 0.1, DMatrix::identity(2, 2)).is_err());
        assert!(ObjectiveSpec::rotating_quadratic(1.0, 0.1, DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn rotating_minimizer_speed() {
        let obj = ObjectiveSpec::rotating_quadratic(1.0, 0.1, DMatrix::identity(2, 2)).unwrap();
        assert!((obj.grad_time_rate().unwrap() - 0.1).abs() < 1e-15);
        // ‖ẋ*(t)‖ from central differences of the minimizer curve, against the analytic 0.1
        let h = 1e-5;
        for &t in &[0.0, 1.3, 17.0, 42.5] {
            let d = (obj.known_minimizer(t + h).unwrap() - obj.known_minimizer(t - h).unwrap()) / (2.0 * h);
            assert!((d.norm() - 0.1).abs() < 1e-8);
            // bound ρ/μ from the tracking analysis
            assert!(d.norm() <= obj.grad_time_rate().unwrap() / obj.mu() + 1e-8);
        }
    }

    #[test]
    fn rotating_step_variation_matches_chord() {
        let q = DMatrix::from_diagonal(&v(&[1.0, 4.0]));
        let obj = ObjectiveSpec::rotating_quadratic(2.0, 0.3, q).unwrap();
        let h = 0.7;
        let chord = (obj.known_minimizer(h).unwrap() - obj.known_minimizer(0.0).unwrap()).norm();
        assert!((obj.grad_step_variation(h) - 4.0 * chord).abs() < 1e-12);
        assert!(obj.grad_step_variation(h) <= obj.grad_time_rate().unwrap() * h + 1e-12);
    }

    #[test]
    fn logsumexp_single_row_gradient() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let obj = ObjectiveSpec::logsumexp_ridge(a, v(&[0.0]), 1.0).unwrap();
        assert_eq!(obj.grad(&v(&[0.0, 0.0]), 0.0), v(&[1.0, 0.0]));
        assert_eq!(obj.mu(), 1.0);
        assert_eq!(obj.lip(), 2.0);
    }

    #[test]
    fn logsumexp_symmetric_rows_have_zero_gradient_at_origin() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        let obj = ObjectiveSpec::logsumexp_ridge(a, v(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(obj.grad(&v(&[0.0, 0.0]), 0.0).norm(), 0.0);
        assert!(!obj.has_known_minimizer());
    }

    #[test]
    fn logsumexp_rejects_zero_matrix_and_bad_ridge() {
        let zero = DMatrix::zeros(1, 2);
        assert!(ObjectiveSpec::logsumexp_ridge(zero, v(&[0.0]), 1.0).is_err());
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(ObjectiveSpec::logsumexp_ridge(a.clone(), v(&[0.0]), 0.0).is_err());
        assert!(ObjectiveSpec::logsumexp_ridge(a, v(&[0.0]), -1.0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences_at_random_points() {
        let q = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let quad = ObjectiveSpec::quadratic(q, v(&[0.3, -1.0, 2.0])).unwrap();
        let a = DMatrix::from_row_slice(3, 3, &[1.0, -0.5, 0.2, 0.3, 0.8, -1.0, -0.7, 0.1, 0.4]);
        let lse = ObjectiveSpec::logsumexp_ridge(a, v(&[0.1, -0.2, 0.3]), 0.5).unwrap();
        let rot = ObjectiveSpec::rotating_quadratic(1.0, 0.1, DMatrix::from_diagonal(&v(&[1.0, 4.0]))).unwrap();
        let mut rng = rng_from_seed(11);
        for obj in [&quad, &lse] {
            for _ in 0..100 {
                let x = uniform_in_ball(&mut rng, &DVector::zeros(3), 3.0);
                let g = obj.grad(&x, 0.0);
                let fd = central_difference(obj, &x, 0.0);
                assert!((fd - &g).norm() <= 1e-6 * g.norm().max(1.0), "{}", obj.kind_name());
            }
        }
        for i in 0..100 {
            let x = uniform_in_ball(&mut rng, &DVector::zeros(2), 3.0);
            let t = i as f64 * 0.37;
            let g = rot.grad(&x, t);
            let fd = central_difference(&rot, &x, t);
            assert!((fd - &g).norm() <= 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn validate_class_on_quadratic_and_mislabeled() {
        let obj = ObjectiveSpec::diagonal_quadratic(&[1.0, 4.0], v(&[0.0, 0.0])).unwrap();
        let mut s = PairSampler::new(DVector::zeros(2), 10.0, 1);
        let rep = validate_class(&obj, &mut s, 2000, &[]).unwrap();
        assert!(rep.passed, "{:?}", rep.failures);
        assert!(rep.strong_convexity_ratio >= 1.0 - 1e-12 && rep.smoothness_ratio <= 4.0 + 1e-12);

        let wrong = obj.clone().with_constants(5.0, 4.0);
        let mut s = PairSampler::new(DVector::zeros(2), 10.0, 1);
        let rep = validate_class(&wrong, &mut s, 100, &[]).unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn validate_class_logsumexp_brute_force() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 1.2, 0.7, -0.9]);
        let obj = ObjectiveSpec::logsumexp_ridge(a, v(&[0.2, 0.0, -0.1]), 1.0).unwrap();
        let mut s = PairSampler::new(DVector::zeros(2), 1.0, 3);
        let rep = validate_class(&obj, &mut s, 10_000, &[]).unwrap();
        assert!(rep.strong_convexity_ratio >= 1.0 - 1e-9);
        assert!(rep.passed, "{:?}", rep.failures);
    }

    #[test]
    fn validate_class_rotating_checks_time_rate_and_minimizer() {
        let obj = ObjectiveSpec::rotating_quadratic(1.0, 0.1, DMatrix::from_diagonal(&v(&[1.0, 4.0]))).unwrap();
        let mut s = PairSampler::new(DVector::zeros(2), 10.0, 5);
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 3.1).collect();
        let rep = validate_class(&obj, &mut s, 500, &times).unwrap();
        assert!(rep.passed, "{:?}", rep.failures);
        assert!(rep.minimizer_residual.unwrap() <= MINIMIZER_TOL);
        assert!(rep.time_rate_ratio.unwrap() <= 0.4 + 1e-12);
    }

    #[test]
    fn validate_class_rejects_zero_count() {
        let obj = ObjectiveSpec::diagonal_quadratic(&[1.0], v(&[0.0])).unwrap();
        let mut s = PairSampler::new(DVector::zeros(1), 1.0, 0);
        assert!(validate_class(&obj, &mut s, 0, &[]).is_err());
    }
}
