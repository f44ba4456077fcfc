//! Seeded samplers used by class validation and contraction certificates.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const DEFAULT_RADIUS: f64 = 10.0;
/// Distance between the two points of a near-coincident pair.
pub const NEAR_PAIR_DISTANCE: f64 = 1e-3;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Uniform sample from the Euclidean ball of `radius` around `center`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let dim = center.len();
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / dim as f64);
    center + unit_direction(rng, dim) * r
}

/// Draws point pairs uniformly from a ball, mixing in a fraction of near-coincident
/// pairs to probe the local (Jacobian) regime.
#[derive(Clone, Debug)]
pub struct PairSampler {
    center: DVector<f64>,
    radius: f64,
    near_fraction: f64,
    rng: ChaCha8Rng,
}

impl PairSampler {
    pub fn new(center: DVector<f64>, radius: f64, seed: u64) -> Self {
        Self {
            center,
            radius,
            near_fraction: 0.1,
            rng: rng_from_seed(seed),
        }
    }

    pub fn with_near_fraction(mut self, fraction: f64) -> Self {
        self.near_fraction = fraction.clamp(0.0, 1.0);
        self
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn next_pair(&mut self) -> (DVector<f64>, DVector<f64>) {
        let x = uniform_in_ball(&mut self.rng, &self.center, self.radius);
        let near: f64 = self.rng.random();
        let z = if near < self.near_fraction {
            let dir = unit_direction(&mut self.rng, self.center.len());
            &x + dir * NEAR_PAIR_DISTANCE
        } else {
            uniform_in_ball(&mut self.rng, &self.center, self.radius)
        };
        (x, z)
    }

    pub fn next_point(&mut self) -> DVector<f64> {
        uniform_in_ball(&mut self.rng, &self.center, self.radius)
    }
}

impl Iterator for PairSampler {
    type Item = (DVector<f64>, DVector<f64>);

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_pair())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_stay_in_ball_and_are_reproducible() {
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a: Vec<_> = PairSampler::new(c.clone(), 3.0, 7).take(200).collect();
        let b: Vec<_> = PairSampler::new(c.clone(), 3.0, 7).take(200).collect();
        assert_eq!(a, b);
        for (x, z) in &a {
            assert!((x - &c).norm() <= 3.0 + 1e-12);
            assert!((z - &c).norm() <= 3.0 + 1e-3 + 1e-12);
        }
        assert!(a.iter().any(|(x, z)| ((x - z).norm() - NEAR_PAIR_DISTANCE).abs() < 1e-12));
    }
}
