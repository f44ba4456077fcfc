//! Weighted norms `‖v‖_{2,P^{1/2}} = √(vᵀPv)` for block metrics `P = B ⊗ Iₙ`,
//! their matrix measures, and sampled one-sided Lipschitz certificates.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::flows::{FlowField, FlowKind, VectorField};
use crate::linalg::{lambda_max_sym_part, lambda_max_sym_part2, spd_sqrt2, sym2_eigenvalues};
use crate::sampling::{PairSampler, DEFAULT_RADIUS};
use crate::{Error, Result};

/// Off-diagonal sign of the ACCONEST metric block.
///
/// The two published forms of the block differ only in this sign. With `-1` the
/// block certifies a negative matrix measure for the ACCONEST Jacobian on
/// quadratics with moderate κ; with `+1` the measure is already positive at κ = 4.
pub const METRIC_SIGN: f64 = -1.0;

/// Slack allowed between a sampled ratio and the claimed rate.
pub const CERTIFICATE_TOL: f64 = 1e-7;

/// `P = B ⊗ Iₙ` with `B = [[p_a, p_b], [p_b, p_c]]` symmetric positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    block: Matrix2<f64>,
    sqrt_block: Matrix2<f64>,
    n: usize,
}

impl Metric {
    pub fn new(p_a: f64, p_b: f64, p_c: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Construction("metric replication count must be positive".into()));
        }
        if !(p_a > 0.0 && p_a * p_c - p_b * p_b > 0.0) {
            return Err(Error::Construction(format!(
                "metric block is not positive definite: [[{p_a}, {p_b}], [{p_b}, {p_c}]]"
            )));
        }
        let block = Matrix2::new(p_a, p_b, p_b, p_c);
        let sqrt_block = spd_sqrt2(&block)?;
        Ok(Self { block, sqrt_block, n })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(1.0, 0.0, 1.0, n)
    }

    pub fn block(&self) -> &Matrix2<f64> {
        &self.block
    }

    pub fn sqrt_block(&self) -> &Matrix2<f64> {
        &self.sqrt_block
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn entries(&self) -> (f64, f64, f64) {
        (self.block[(0, 0)], self.block[(0, 1)], self.block[(1, 1)])
    }

    /// `λ_min(P)`; the Kronecker factor `Iₙ` does not change the spectrum.
    pub fn lambda_min(&self) -> f64 {
        sym2_eigenvalues(&self.block).0
    }

    pub fn lambda_max(&self) -> f64 {
        sym2_eigenvalues(&self.block).1
    }

    /// `λ_max(P) / λ_min(P)`.
    pub fn condition(&self) -> f64 {
        self.lambda_max() / self.lambda_min()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// `uᵀPv`.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        self.check_dim(u.len())?;
        self.check_dim(v.len())?;
        let n = self.n;
        let (u1, u2) = (u.rows(0, n), u.rows(n, n));
        let (v1, v2) = (v.rows(0, n), v.rows(n, n));
        let (a, b, c) = self.entries();
        Ok(a * u1.dot(&v1) + b * (u1.dot(&v2) + u2.dot(&v1)) + c * u2.dot(&v2))
    }

    pub fn norm_sq(&self, v: &DVector<f64>) -> Result<f64> {
        Ok(self.inner(v, v)?.max(0.0))
    }

    /// `‖v‖_{2,P^{1/2}} = √(vᵀPv)`.
    pub fn weighted_norm(&self, v: &DVector<f64>) -> Result<f64> {
        Ok(self.norm_sq(v)?.sqrt())
    }

    fn kron(m: &Matrix2<f64>, n: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            out[(i, i)] = m[(0, 0)];
            out[(i, n + i)] = m[(0, 1)];
            out[(n + i, i)] = m[(1, 0)];
            out[(n + i, n + i)] = m[(1, 1)];
        }
        out
    }

    /// Dense `P`.
    pub fn full(&self) -> DMatrix<f64> {
        Self::kron(&self.block, self.n)
    }

    /// Dense `P^{1/2}`.
    pub fn sqrt_full(&self) -> DMatrix<f64> {
        Self::kron(&self.sqrt_block, self.n)
    }

    /// Dense `P^{-1/2}`.
    pub fn inv_sqrt_full(&self) -> DMatrix<f64> {
        let inv = self.sqrt_block.try_inverse().expect("sqrt of an SPD block is invertible");
        Self::kron(&inv, self.n)
    }

    /// `μ_{2,P^{1/2}}(A) = λ_max(½(B + Bᵀ))` with `B = P^{1/2} A P^{-1/2}`.
    pub fn matrix_measure(&self, a: &DMatrix<f64>) -> Result<f64> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        self.check_dim(a.nrows())?;
        let b = self.sqrt_full() * a * self.inv_sqrt_full();
        lambda_max_sym_part(&b)
    }

    /// Measure of a 2×2 block under the block metric (`n = 1`).
    pub fn block_measure(&self, a: &Matrix2<f64>) -> f64 {
        let inv = self.sqrt_block.try_inverse().expect("sqrt of an SPD block is invertible");
        lambda_max_sym_part2(&(self.sqrt_block * a * inv))
    }
}

impl Metric {
    pub fn record(&self) -> MetricRecord {
        let (p_a, p_b, p_c) = self.entries();
        MetricRecord { p_a, p_b, p_c, n: self.n }
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.record().serialize(s)
    }
}

/// Plain-data form of a [`Metric`] used in JSON outputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub p_a: f64,
    pub p_b: f64,
    pub p_c: f64,
    pub n: usize,
}

/// The ACCONEST metric block `[[γ√κ/(√κ+1), s], [s, (√κ+1)/√κ]] ⊗ Iₙ`.
///
/// Its determinant is `γ − 1` for either sign `s = ±1`; `γ` must lie in `(1, 1 + 1/κ]`.
pub fn metric_matrix(kappa: f64, gamma: f64, sign: f64, n: usize) -> Result<Metric> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("kappa must be >= 1, got {kappa}")));
    }
    if !(gamma > 1.0 && gamma <= 1.0 + 1.0 / kappa) {
        return Err(Error::Domain(format!(
            "gamma must lie in (1, {}] for kappa = {kappa}, got {gamma}",
            1.0 + 1.0 / kappa
        )));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::Domain(format!("metric sign must be +1 or -1, got {sign}")));
    }
    let s = kappa.sqrt();
    Metric::new(gamma * s / (s + 1.0), sign, (s + 1.0) / s, n)
}

/// 2×2 Jacobian block of a flow on a quadratic, restricted to a Hessian eigenvector
/// with eigenvalue `q`.
pub fn curvature_block(field: &FlowField, q: f64) -> Matrix2<f64> {
    match field.kind() {
        FlowKind::Acconest { beta } => {
            let l = field.objective().lip();
            Matrix2::new(-1.0, 1.0 - q / l, -beta, beta - (beta + 1.0) * q / l)
        }
        FlowKind::Momentum(p) => Matrix2::new(-p.e * q, p.c - p.e * p.d * q, -p.b * q, -p.a - p.b * p.d * q),
    }
}

/// Exact matrix measure of a flow's Jacobian on a quadratic objective.
///
/// The Jacobian is a 2×2 block matrix whose blocks are polynomials in the Hessian,
/// so in the Hessian eigenbasis it splits into one 2×2 block per eigenvalue and the
/// measure is the largest block measure. `None` for non-quadratic objectives.
pub fn quadratic_jacobian_measure(field: &FlowField, metric: &Metric) -> Option<f64> {
    let eig = field.objective().hessian_eigen()?;
    Some(
        eig.values
            .iter()
            .map(|&q| metric.block_measure(&curvature_block(field, q)))
            .fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Result of [`one_sided_lipschitz_estimate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OneSidedEstimate {
    /// `max (F(x,t) − F(z,t))ᵀP(x − z) / ‖x − z‖²_P` over the sampled pairs.
    pub worst_ratio: f64,
    pub used: usize,
    /// Coincident pairs that were skipped.
    pub skipped: usize,
}

/// Empirical upper estimate of `−γ̄` in the one-sided Lipschitz condition.
///
/// `times` is cycled over the pairs (an empty list means `t = 0`).
pub fn one_sided_lipschitz_estimate(
    field: &dyn VectorField,
    metric: &Metric,
    sampler: &mut PairSampler,
    count: usize,
    times: &[f64],
) -> Result<OneSidedEstimate> {
    if count == 0 {
        return Err(Error::Domain("one-sided Lipschitz estimate needs count >= 1".into()));
    }
    if field.dim() != metric.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            got: field.dim(),
        });
    }
    if sampler.dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: sampler.dim(),
        });
    }
    let default_times = [0.0];
    let times = if times.is_empty() { &default_times[..] } else { times };
    let mut worst = f64::NEG_INFINITY;
    let mut used = 0;
    let mut skipped = 0;
    for i in 0..count {
        let t = times[i % times.len()];
        let (x, z) = sampler.next_pair();
        let d = &x - &z;
        let dd = metric.norm_sq(&d)?;
        if dd == 0.0 {
            skipped += 1;
            continue;
        }
        let df = field.eval(&x, t) - field.eval(&z, t);
        worst = worst.max(metric.inner(&df, &d)? / dd);
        used += 1;
    }
    if used == 0 {
        return Err(Error::Sampling(format!("all {count} sampled pairs were coincident")));
    }
    Ok(OneSidedEstimate {
        worst_ratio: worst,
        used,
        skipped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionCertificate {
    pub field_id: String,
    pub metric: Metric,
    pub claimed_rate: f64,
    pub worst_ratio: f64,
    /// Exact Jacobian measure, present for quadratic objectives.
    pub worst_measure: Option<f64>,
    pub sample_count: usize,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct CertifyConfig {
    pub count: usize,
    pub radius: f64,
    pub seed: u64,
    pub times: Vec<f64>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            count: 10_000,
            radius: DEFAULT_RADIUS,
            seed: 0,
            times: Vec::new(),
        }
    }
}

/// Verdict rule shared by every certificate.
pub fn certificate_passes(worst_ratio: f64, worst_measure: Option<f64>, rate: f64) -> bool {
    let bound = -rate + CERTIFICATE_TOL;
    worst_ratio <= bound && worst_measure.map_or(true, |m| m <= bound)
}

/// Samples the one-sided Lipschitz ratio of `field` around its equilibrium at `t = 0`
/// and, for quadratic objectives, computes the exact Jacobian measure.
pub fn certify_contraction(field: &FlowField, metric: &Metric, rate: f64, cfg: &CertifyConfig) -> Result<ContractionCertificate> {
    if field.dim() != metric.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            got: field.dim(),
        });
    }
    let center = field.equilibrium_stacked(cfg.times.first().copied().unwrap_or(0.0))?;
    let mut sampler = PairSampler::new(center, cfg.radius, cfg.seed);
    let est = one_sided_lipschitz_estimate(field, metric, &mut sampler, cfg.count, &cfg.times)?;
    let measure = quadratic_jacobian_measure(field, metric);
    Ok(ContractionCertificate {
        field_id: field.id(),
        metric: metric.clone(),
        claimed_rate: rate,
        worst_ratio: est.worst_ratio,
        worst_measure: measure,
        sample_count: est.used,
        verdict: Verdict::from_bool(certificate_passes(est.worst_ratio, measure, rate)),
    })
}

/// Certificate for an arbitrary vector field sampled around `center`.
///
/// When the field exposes a constant Jacobian its exact measure is included.
pub fn certify_vector_field(
    field: &dyn VectorField,
    field_id: &str,
    center: DVector<f64>,
    metric: &Metric,
    rate: f64,
    cfg: &CertifyConfig,
) -> Result<ContractionCertificate> {
    let mut sampler = PairSampler::new(center.clone(), cfg.radius, cfg.seed);
    let est = one_sided_lipschitz_estimate(field, metric, &mut sampler, cfg.count, &cfg.times)?;
    let measure = if field.is_affine() {
        match field.jacobian(&center, 0.0) {
            Some(j) => Some(metric.matrix_measure(&j)?),
            None => None,
        }
    } else {
        None
    };
    Ok(ContractionCertificate {
        field_id: field_id.to_string(),
        metric: metric.clone(),
        claimed_rate: rate,
        worst_ratio: est.worst_ratio,
        worst_measure: measure,
        sample_count: est.used,
        verdict: Verdict::from_bool(certificate_passes(est.worst_ratio, measure, rate)),
    })
}
