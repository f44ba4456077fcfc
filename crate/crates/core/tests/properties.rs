use contraflow::analysis::{empirical_rate, rate_matching_holds};
use contraflow::contraction::{metric_matrix, Metric, METRIC_SIGN};
use contraflow::flows::{acconest_field, default_gamma, FlowField, VectorField};
use contraflow::integrators::{
    explicit_euler_step, field_lipschitz_bound, implicit_euler_step, integrate, nesterov_step, Scheme, StepConfig,
};
use contraflow::objectives::{validate_class, ObjectiveSpec};
use contraflow::sampling::PairSampler;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn quadratic(eigs: &[f64], center: &[f64]) -> ObjectiveSpec {
    ObjectiveSpec::diagonal_quadratic(eigs, DVector::from_column_slice(center)).unwrap()
}

fn setup(kappa: f64) -> (FlowField, Metric) {
    let obj = quadratic(&[1.0, kappa], &[0.5, -1.0]);
    let field = acconest_field(&obj).unwrap();
    let metric = metric_matrix(kappa, default_gamma(kappa), METRIC_SIGN, 2).unwrap();
    (field, metric)
}

fn dist(field: &FlowField, metric: &Metric, y: &DVector<f64>, t: f64) -> f64 {
    metric.weighted_norm(&(y - field.equilibrium_stacked(t).unwrap())).unwrap()
}

fn state() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_finite_differences(eigs in prop::collection::vec(0.5f64..50.0, 3), c in prop::collection::vec(-5.0f64..5.0, 3), x in prop::collection::vec(-5.0f64..5.0, 3)) {
        let obj = quadratic(&eigs, &c);
        let x = DVector::from_vec(x);
        let g = obj.grad(&x, 0.0);
        let eps = 1e-5;
        for i in 0..3 {
            let mut p = x.clone();
            let mut m = x.clone();
            p[i] += eps;
            m[i] -= eps;
            let fd = (obj.value(&p, 0.0) - obj.value(&m, 0.0)) / (2.0 * eps);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn rotating_minimizer_chord_within_arc(r in 0.0f64..5.0, omega in -2.0f64..2.0, t in 0.0f64..100.0, s in 0.0f64..100.0) {
        let obj = ObjectiveSpec::rotating_quadratic(r, omega, DMatrix::identity(2, 2)).unwrap();
        let d = (obj.known_minimizer(t).unwrap() - obj.known_minimizer(s).unwrap()).norm();
        prop_assert!(d <= r * omega.abs() * (t - s).abs() + 1e-12);
    }

    #[test]
    fn quadratic_benchmarks_pass_class_validation(eigs in prop::collection::vec(0.5f64..100.0, 2..5), seed in any::<u64>()) {
        let obj = quadratic(&eigs, &vec![1.0; eigs.len()]);
        let mut sampler = PairSampler::new(DVector::from_element(eigs.len(), 1.0), 10.0, seed);
        prop_assert!(validate_class(&obj, &mut sampler, 200, &[0.0]).unwrap().passed);
    }

    #[test]
    fn metric_determinant_is_gamma_minus_one(kappa in 1.0f64..1000.0, frac in 0.001f64..1.0, sign in prop::sample::select(vec![-1.0, 1.0])) {
        let gamma = 1.0 + frac / kappa;
        let m = metric_matrix(kappa, gamma, sign, 1).unwrap();
        prop_assert!((m.block().determinant() - (gamma - 1.0)).abs() <= 1e-12 * kappa.max(1.0));
        prop_assert!(m.lambda_min() > 0.0);
    }

    #[test]
    fn nesterov_equivalence_over_200_steps(eigs in prop::collection::vec(1.0f64..100.0, 3), c in prop::collection::vec(-3.0f64..3.0, 3), y in prop::collection::vec(-10.0f64..10.0, 3)) {
        let obj = quadratic(&eigs, &c);
        let field = acconest_field(&obj).unwrap();
        let y0 = DVector::from_vec(y);
        let (mut a, mut b) = (y0.clone(), y0.clone());
        let mut z = DVector::zeros(6);
        z.rows_mut(0, 3).copy_from(&y0);
        z.rows_mut(3, 3).copy_from(&y0);
        for k in 0..200 {
            let (na, nb) = nesterov_step(&obj, &a, &b);
            z = explicit_euler_step(&field, &z, k as f64, 1.0);
            for j in 0..3 {
                for (p, q) in [(z[j], na[j]), (z[3 + j], nb[j])] {
                    // absolute floor for components that settle on a zero of the center
                    prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(q.abs()).max(1e-3));
                }
            }
            a = na;
            b = nb;
        }
    }

    #[test]
    fn implicit_step_contracts_at_the_flow_rate(kappa in 1.0f64..100.0, h in 0.01f64..10.0, y in state()) {
        let (field, metric) = setup(kappa);
        let y = DVector::from_vec(y);
        let (next, _) = implicit_euler_step(&field, &y, h, &StepConfig::new(h).unwrap()).unwrap();
        let rate = kappa.sqrt().recip();
        let before = dist(&field, &metric, &y, 0.0);
        prop_assert!(dist(&field, &metric, &next, h) <= before / (1.0 + h * rate) + 1e-8, "kappa {kappa}, h {h}");
    }

    #[test]
    fn explicit_step_within_window_contracts(kappa in 1.0f64..100.0, frac in 0.01f64..0.99, y in state()) {
        let (field, metric) = setup(kappa);
        let rate = kappa.sqrt().recip();
        let ell = field_lipschitz_bound(kappa, &metric);
        let h = frac * 2.0 * rate / (ell * ell);
        let y = DVector::from_vec(y);
        let next = explicit_euler_step(&field, &y, 0.0, h);
        let factor = (1.0 - 2.0 * h * rate + h * h * ell * ell).sqrt();
        prop_assert!(dist(&field, &metric, &next, h) <= factor * dist(&field, &metric, &y, 0.0) + 1e-8, "kappa {kappa}, h {h}");
    }

    #[test]
    fn field_lipschitz_bound_holds_on_pairs(kappa in 1.0f64..100.0, x in state(), z in state()) {
        let (field, metric) = setup(kappa);
        let (x, z) = (DVector::from_vec(x), DVector::from_vec(z));
        let num = metric.weighted_norm(&(field.eval(&x, 0.0) - field.eval(&z, 0.0))).unwrap();
        let den = metric.weighted_norm(&(&x - &z)).unwrap();
        prop_assume!(den > 1e-9);
        prop_assert!(num / den <= field_lipschitz_bound(kappa, &metric) * (1.0 + 1e-12));
    }

    #[test]
    fn rate_matching_for_implicit_factors(rate in 0.01f64..2.0, h in 0.01f64..10.0, k in 1usize..200) {
        prop_assert!(rate_matching_holds(rate, h, k));
    }

    #[test]
    fn field_vanishes_at_equilibrium(kappa in 1.0f64..100.0, t in 0.0f64..50.0) {
        let obj = ObjectiveSpec::rotating_quadratic(1.0, 0.3, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, kappa]))).unwrap();
        let field = acconest_field(&obj).unwrap();
        let eq = field.equilibrium_stacked(t).unwrap();
        prop_assert!(field.eval(&eq, t).norm() <= 1e-8);
    }
}

#[test]
fn reference_trajectory_decays_at_the_flow_rate() {
    for kappa in [1.5, 4.0, 100.0] {
        let (field, metric) = setup(kappa);
        let rate = kappa.sqrt().recip();
        let h = 0.5;
        // long enough for the tail fit, short enough to stay clear of round-off
        let steps = (20.0 / rate / h) as usize;
        let traj = integrate(&field, DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]), Scheme::Rk4Reference, &StepConfig::new(h).unwrap(), steps).unwrap();
        let d: Vec<f64> = traj.times.iter().zip(&traj.states).map(|(t, y)| dist(&field, &metric, y, *t)).collect();
        let fitted = -empirical_rate(&d, 0.1).unwrap().ln() / h;
        assert!(fitted >= rate - 1e-3, "kappa {kappa}: fitted rate {fitted} < {rate}");
    }
}
