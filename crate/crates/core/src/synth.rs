//! Synthetic instances: the two-classifier angle construction and random
//! high-dimensional linear mixtures.
//!
//! Every instance is centered at the origin with label `-1`; a classifier at
//! distance `r` with unit normal `n` is stored as `f(x) = n . x - r`, so it is
//! fooled exactly on the half-space `n . x >= r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, norm_l2};
use crate::model::{LabeledPoint, LinearClassifier, Mixture};

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent child seed for `index` under `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(base ^ mix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleInstance {
    /// Distance of both boundaries from `x`.
    pub r: f64,
    /// Angle between the two normals, in `(0, pi)`.
    pub theta: f64,
    pub weights: [f64; 2],
}

impl AngleInstance {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidConfig(format!("r must be positive, got {r}")));
        }
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(Error::InvalidConfig(format!("theta must lie in (0, pi), got {theta}")));
        }
        Ok(Self { r, theta, weights: [0.5, 0.5] })
    }

    pub fn build(&self) -> Result<(Mixture<LinearClassifier>, LabeledPoint)> {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let h1 = LinearClassifier::new(vec![c, s], -self.r)?;
        let h2 = LinearClassifier::new(vec![c, -s], -self.r)?;
        Ok((Mixture::new(vec![h1, h2], self.weights.to_vec())?, LabeledPoint::new(vec![0.0, 0.0], -1)))
    }

    /// L2 distance from `x` to the common vulnerability region.
    pub fn common_region_distance(&self) -> f64 {
        self.r / (self.theta / 2.0).cos()
    }
}

/// Two unit-normal classifiers at distance `r`, normals at `+-theta/2`
/// around the first axis, uniform weights.
pub fn make_angle_instance(r: f64, theta: f64) -> Result<(Mixture<LinearClassifier>, LabeledPoint)> {
    AngleInstance::new(r, theta)?.build()
}

/// Largest angle at which both classifiers can still be fooled together
/// within an L2 budget `epsilon`; `None` when `r >= epsilon`.
pub fn critical_angle(r: f64, epsilon: f64) -> Option<f64> {
    (r < epsilon).then(|| 2.0 * (r / epsilon).acos())
}

/// Budget the canonical two-classifier configurations are designed for.
pub const CANONICAL_EPSILON: f64 = 0.8;

/// The four canonical two-classifier configurations around `x = 0`,
/// `y = -1`, meant for an L2 budget of [`CANONICAL_EPSILON`]:
///
/// * `a`: both classifiers out of reach;
/// * `b`: only the heavier classifier is reachable;
/// * `c`: both reachable, but on opposite sides (disjoint regions);
/// * `d`: both reachable with a common region.
pub fn canonical_config(name: char) -> Result<(Mixture<LinearClassifier>, LabeledPoint)> {
    let lin = |t: [f64; 2], b: f64| LinearClassifier::new(t.to_vec(), b);
    let (hs, q) = match name.to_ascii_lowercase() {
        'a' => (vec![lin([1.0, 0.0], -2.0)?, lin([0.0, 1.0], -2.0)?], [0.6, 0.4]),
        'b' => (vec![lin([1.0, 0.0], -2.0)?, lin([0.0, 1.0], -0.5)?], [0.4, 0.6]),
        'c' => (vec![lin([1.0, 0.0], -0.5)?, lin([-1.0, 0.0], -0.5)?], [0.6, 0.4]),
        'd' => (vec![lin([1.0, 0.0], -0.5)?, lin([0.0, 1.0], -0.5)?], [0.6, 0.4]),
        other => {
            return Err(Error::InvalidConfig(format!("unknown configuration '{other}', expected one of a, b, c, d")))
        }
    };
    Ok((Mixture::new(hs, q.to_vec())?, LabeledPoint::new(vec![0.0, 0.0], -1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomMixtureSpec {
    pub d: usize,
    pub m: usize,
    pub bias_mean: f64,
    pub bias_std: f64,
    pub weight_temperature: f64,
    pub seed: u64,
}

impl RandomMixtureSpec {
    pub fn new(d: usize, m: usize, bias_mean: f64, bias_std: f64, seed: u64) -> Self {
        Self { d, m, bias_mean, bias_std, weight_temperature: 10.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::InvalidConfig("d and m must be at least 1".into()));
        }
        if !(self.bias_std.is_finite() && self.bias_std >= 0.0) || !self.bias_mean.is_finite() {
            return Err(Error::InvalidConfig("bias distribution must be finite".into()));
        }
        if self.bias_std == 0.0 && self.bias_mean <= 0.0 {
            return Err(Error::InvalidConfig("degenerate bias distribution has no positive mass".into()));
        }
        if !(self.weight_temperature.is_finite() && self.weight_temperature > 0.0) {
            return Err(Error::InvalidConfig("weight temperature must be positive".into()));
        }
        Ok(())
    }
}

/// `softmax(z / temperature)`
pub fn softmax_weights(z: &[f64], temperature: f64) -> Vec<f64> {
    let top = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = z.iter().map(|v| ((v - top) / temperature).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mixture weights from i.i.d. standard normal logits.
pub fn sample_weights<R: Rng>(rng: &mut R, m: usize, temperature: f64) -> Vec<f64> {
    let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    softmax_weights(&z, temperature)
}

/// Uniform point on the unit sphere.
pub fn sample_unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm_l2(&g);
        if n > 1e-12 {
            return linalg::scale(&g, 1.0 / n);
        }
    }
}

/// Random mixture around the origin. Bias draws that would misclassify the
/// origin (nonpositive) are redrawn.
pub fn sample_random_mixture(spec: &RandomMixtureSpec) -> Result<(Mixture<LinearClassifier>, LabeledPoint)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bias = Normal::new(spec.bias_mean, spec.bias_std)
        .map_err(|e| Error::InvalidConfig(format!("bias distribution: {e}")))?;
    let mut classifiers = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let normal = sample_unit_vector(&mut rng, spec.d);
        let distance = loop {
            let b: f64 = bias.sample(&mut rng);
            if b > 0.0 {
                break b;
            }
        };
        classifiers.push(LinearClassifier::new(normal, -distance)?);
    }
    let weights = sample_weights(&mut rng, spec.m, spec.weight_temperature);
    Ok((Mixture::new(classifiers, weights)?, LabeledPoint::new(vec![0.0; spec.d], -1)))
}

/// The four bias distributions used for random-mixture benchmarks, as
/// `(mean, std)`.
pub const BIAS_SETTINGS: [(f64, f64); 4] = [(0.5, 0.5), (0.2, 0.005), (0.2, 0.25), (0.8, 0.25)];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Classifier;

    #[test]
    fn angle_instance_geometry() {
        let (mix, p) = make_angle_instance(0.9, 0.5).unwrap();
        for h in mix.classifiers() {
            assert!((h.margin(&p.x, p.y) - 0.9).abs() < 1e-15);
            assert!((norm_l2(h.theta()) - 1.0).abs() < 1e-15);
        }
        let inst = AngleInstance::new(0.9, 0.5).unwrap();
        let dist = inst.common_region_distance();
        assert!((dist - 0.9 / 0.25f64.cos()).abs() < 1e-15);
        // The nearest common point lies on the bisector and touches both boundaries.
        let q = [dist, 0.0];
        for h in mix.classifiers() {
            assert!(h.score(&q).abs() < 1e-12);
        }
        assert!(dist < 1.0);
        assert!(AngleInstance::new(0.9, 1.2).unwrap().common_region_distance() > 1.0);
    }

    #[test]
    fn angle_instance_validation() {
        assert!(make_angle_instance(0.9, 4.0).is_err());
        assert!(make_angle_instance(0.9, 0.0).is_err());
        assert!(make_angle_instance(-1.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_angle_makes_coincident_classifiers() {
        let (mix, _) = make_angle_instance(0.5, 1e-12).unwrap();
        let pt = [0.6, 0.0];
        assert!(mix.classifiers().iter().all(|h| h.misclassifies(&pt, -1)));
    }

    #[test]
    fn critical_angle_value() {
        let t = critical_angle(0.9, 1.0).unwrap();
        assert!((t - 0.902_053_6).abs() < 1e-6);
        assert!(critical_angle(1.0, 1.0).is_none());
    }

    #[test]
    fn softmax_of_constant_is_uniform() {
        let w = softmax_weights(&[0.0; 5], 10.0);
        assert!(w.iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn single_classifier_distance_is_its_bias() {
        let spec = RandomMixtureSpec::new(256, 1, 0.5, 0.5, 3);
        let (mix, p) = sample_random_mixture(&spec).unwrap();
        let h = &mix.classifiers()[0];
        assert!((norm_l2(h.theta()) - 1.0).abs() < 1e-12);
        assert!((h.margin(&p.x, p.y) - (-h.bias())).abs() < 1e-15);
        assert!(h.bias() < 0.0);
        assert_eq!(mix.weights(), &[1.0]);
    }

    #[test]
    fn same_seed_same_mixture() {
        let spec = RandomMixtureSpec::new(16, 5, 0.5, 0.5, 42);
        let a = sample_random_mixture(&spec).unwrap();
        let b = sample_random_mixture(&spec).unwrap();
        assert_eq!(a, b);
        let c = sample_random_mixture(&RandomMixtureSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
