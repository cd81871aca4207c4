//! Projected gradient descent shared by every attack, plus the SRH
//! intersection finder built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, norm_l2};
use crate::model::{
    check_binary_label, check_dim, project_to_ball, reverse_hinge, AttackBudget, LabeledPoint, LinearClassifier,
    Mixture, Norm, NUMERIC_ZERO,
};

/// Objective values at or below this count as having reached the floor.
pub const EXACT_ZERO: f64 = 1e-12;

/// Length of the nudge applied to witnesses that sit on a decision boundary.
pub const BOUNDARY_NUDGE: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    /// Raw (sub)gradient.
    Vanilla,
    /// Gradient divided by its L2 norm.
    NormalizedL2,
    /// Componentwise sign of the gradient.
    SignLinf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub steps: usize,
    pub step_size: f64,
    pub step_rule: StepRule,
    pub momentum: f64,
    /// Extra runs after the first one.
    pub restarts: usize,
    /// Restarts draw their start uniformly from a ball instead of reusing
    /// the initial perturbation.
    pub random_init: bool,
    /// Radius of the random-start ball; `None` means the whole budget.
    #[serde(default)]
    pub init_radius: Option<f64>,
    /// Halve the step size from iteration `floor(halve_at * steps)` on.
    pub halve_at: Option<f64>,
}

impl PgdConfig {
    pub fn validate(&self, budget: &AttackBudget) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("PGD needs at least one step".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!("step size {} must be positive", self.step_size)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if let Some(h) = self.halve_at {
            if !(h > 0.0 && h <= 1.0) {
                return Err(Error::InvalidConfig(format!("halve_at {h} outside (0, 1]")));
            }
        }
        if let Some(r) = self.init_radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidConfig(format!("init radius {r} must be positive")));
            }
        }
        match (self.step_rule, budget.norm()) {
            (StepRule::SignLinf, Norm::L2) => Err(Error::InvalidConfig("sign steps require an Linf budget".into())),
            (StepRule::NormalizedL2, Norm::Linf) => {
                Err(Error::InvalidConfig("normalized L2 steps require an L2 budget".into()))
            }
            _ => Ok(()),
        }
    }

    /// The steepest-descent step rule matching the budget's norm.
    pub fn steepest_rule(budget: &AttackBudget) -> StepRule {
        match budget.norm() {
            Norm::L2 => StepRule::NormalizedL2,
            Norm::Linf => StepRule::SignLinf,
        }
    }

    /// Expected-loss PGD baseline: 100 steps of size `epsilon / 4`, momentum
    /// 0.9, five runs in total, step halving at 90% of the steps. Random
    /// starts are drawn within one step of `x`.
    pub fn apgd_default(budget: &AttackBudget) -> Self {
        let eta = budget.epsilon() / 4.0;
        Self {
            steps: 100,
            step_size: eta,
            step_rule: Self::steepest_rule(budget),
            momentum: 0.9,
            restarts: 4,
            random_init: true,
            init_radius: Some(eta),
            halve_at: Some(0.9),
        }
    }

    /// LCA inner PGD for deep/multi-class models: 100 steps of size
    /// `epsilon / 4`, one run, step halving at 90% of the steps.
    pub fn lca_default(budget: &AttackBudget) -> Self {
        Self {
            steps: 100,
            step_size: budget.epsilon() / 4.0,
            step_rule: Self::steepest_rule(budget),
            momentum: 0.0,
            restarts: 0,
            random_init: false,
            init_radius: None,
            halve_at: Some(0.9),
        }
    }

    /// Inner PGD used for the two-classifier angle sweep: 100 vanilla steps
    /// of size `epsilon / 20`.
    pub fn angle_sweep_lca(budget: &AttackBudget) -> Self {
        Self {
            steps: 100,
            step_size: budget.epsilon() / 20.0,
            step_rule: StepRule::Vanilla,
            momentum: 0.0,
            restarts: 0,
            random_init: false,
            init_radius: None,
            halve_at: None,
        }
    }

    /// Inner PGD used for random high-dimensional mixtures: 200 steps of
    /// length `epsilon / 200`, steepest-descent direction.
    pub fn random_mixture_lca(budget: &AttackBudget) -> Self {
        Self {
            steps: 200,
            step_size: budget.epsilon() / 200.0,
            step_rule: Self::steepest_rule(budget),
            momentum: 0.0,
            restarts: 0,
            random_init: false,
            init_radius: None,
            halve_at: None,
        }
    }
}

/// Vanilla PGD with `T = ceil(eps^2 m^2) + 1` steps of size `eps / sqrt(T)`.
pub fn lemma1_params(m: usize, budget: &AttackBudget) -> PgdConfig {
    let eps = budget.epsilon();
    let steps = (eps * eps * (m * m) as f64).ceil() as usize + 1;
    PgdConfig {
        steps,
        step_size: eps / (steps as f64).sqrt(),
        step_rule: StepRule::Vanilla,
        momentum: 0.0,
        restarts: 0,
        random_init: false,
        init_radius: None,
        halve_at: None,
    }
}

/// A differentiable scalar function of the perturbation.
pub trait Objective {
    fn value(&self, delta: &[f64]) -> f64;

    fn gradient(&self, delta: &[f64]) -> Vec<f64>;

    /// Known lower bound; reaching it ends the search. Defaults to `0`.
    fn floor(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Wraps a pair of closures as an [`Objective`].
pub struct FnObjective<F, G> {
    pub value: F,
    pub gradient: G,
    pub floor: Option<f64>,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, delta: &[f64]) -> f64 {
        (self.value)(delta)
    }

    fn gradient(&self, delta: &[f64]) -> Vec<f64> {
        (self.gradient)(delta)
    }

    fn floor(&self) -> Option<f64> {
        self.floor
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgdOutcome {
    pub best_delta: Vec<f64>,
    pub best_value: f64,
    /// Gradient evaluations.
    pub iterations: usize,
}

/// Uniform sample from the ball of the budget's norm with the given radius.
pub fn sample_in_ball<R: Rng>(rng: &mut R, dim: usize, norm: Norm, radius: f64) -> Vec<f64> {
    match norm {
        Norm::L2 => {
            let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm_l2(&g);
            if n == 0.0 {
                return vec![0.0; dim];
            }
            let u: f64 = rng.random();
            linalg::scale(&g, radius * u.powf(1.0 / dim as f64) / n)
        }
        Norm::Linf => (0..dim).map(|_| rng.random_range(-radius..=radius)).collect(),
    }
}

fn apply_step_rule(rule: StepRule, v: &[f64]) -> Vec<f64> {
    match rule {
        StepRule::Vanilla => v.to_vec(),
        StepRule::NormalizedL2 => {
            let n = norm_l2(v);
            if n == 0.0 {
                vec![0.0; v.len()]
            } else {
                linalg::scale(v, 1.0 / n)
            }
        }
        StepRule::SignLinf => v.iter().map(|&x| linalg::sign(x)).collect(),
    }
}

/// Minimizes `objective` over the budget ball around `init_delta`'s ball
/// center, keeping the best iterate seen across every run.
pub fn pgd_minimize(
    objective: &dyn Objective,
    budget: &AttackBudget,
    cfg: &PgdConfig,
    init_delta: &[f64],
    seed: u64,
) -> Result<PgdOutcome> {
    cfg.validate(budget)?;
    if !budget.contains(init_delta) {
        return Err(Error::ContractViolation("initial perturbation lies outside the budget ball".into()));
    }
    let dim = init_delta.len();
    let floor = objective.floor();
    let reached = |v: f64| floor.is_some_and(|f| v <= f + EXACT_ZERO);
    let halve_from = cfg.halve_at.map(|h| (h * cfg.steps as f64).floor() as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best_delta = init_delta.to_vec();
    let mut best_value = f64::INFINITY;
    let mut iterations = 0usize;

    for run in 0..=cfg.restarts {
        let mut delta = if run > 0 && cfg.random_init {
            let r = cfg.init_radius.unwrap_or(budget.epsilon()).min(budget.epsilon());
            project_to_ball(&sample_in_ball(&mut rng, dim, budget.norm(), r), budget)
        } else {
            init_delta.to_vec()
        };
        let value = objective.value(&delta);
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "objective", iteration: iterations });
        }
        if value < best_value {
            best_value = value;
            best_delta.clone_from(&delta);
        }
        if reached(value) {
            break;
        }

        let mut velocity = vec![0.0; dim];
        for t in 0..cfg.steps {
            let grad = objective.gradient(&delta);
            iterations += 1;
            if grad.len() != dim || !linalg::all_finite(&grad) {
                return Err(Error::NonFinite { what: "gradient", iteration: iterations });
            }
            for (v, g) in velocity.iter_mut().zip(&grad) {
                *v = cfg.momentum * *v + g;
            }
            if velocity.iter().all(|&v| v == 0.0) {
                // Stationary: nothing below will change.
                break;
            }
            let step = apply_step_rule(cfg.step_rule, &velocity);
            let eta = match halve_from {
                Some(h) if t >= h => cfg.step_size * 0.5,
                _ => cfg.step_size,
            };
            let mut next = delta.clone();
            linalg::axpy(-eta, &step, &mut next);
            delta = project_to_ball(&next, budget);
            debug_assert!(budget.contains(&delta));

            let value = objective.value(&delta);
            if !value.is_finite() {
                return Err(Error::NonFinite { what: "objective", iteration: iterations });
            }
            if value < best_value {
                best_value = value;
                best_delta.clone_from(&delta);
            }
            if reached(value) {
                break;
            }
        }
        if reached(best_value) {
            break;
        }
    }
    Ok(PgdOutcome { best_delta, best_value, iterations })
}

/// SRH over a pool of linear classifiers rescaled to unit normals, so the
/// objective is 1-Lipschitz in the L2 norm.
pub struct SrhObjective<'a> {
    normals: Vec<LinearClassifier>,
    point: &'a LabeledPoint,
}

impl<'a> SrhObjective<'a> {
    pub fn new(mix: &Mixture<LinearClassifier>, point: &'a LabeledPoint, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::ContractViolation("SRH of an empty index set".into()));
        }
        check_binary_label(point.y)?;
        check_dim(mix.dim(), point.dim())?;
        let normals = indices
            .iter()
            .map(|&i| {
                mix.classifiers()
                    .get(i)
                    .map(LinearClassifier::unit_normalized)
                    .ok_or_else(|| Error::ContractViolation(format!("index {i} out of range")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { normals, point })
    }

    /// Unit-normal margins `y * f_i(x + delta) / ||theta_i||`.
    pub fn margins(&self, delta: &[f64]) -> Vec<f64> {
        let xp = self.point.shifted(delta);
        self.normals.iter().map(|h| h.margin(&xp, self.point.y)).collect()
    }

    /// Every pooled classifier strictly fooled (margin below `-1e-9`).
    pub fn strictly_fooled(&self, delta: &[f64]) -> bool {
        self.margins(delta).iter().all(|&m| m < -NUMERIC_ZERO)
    }
}

impl Objective for SrhObjective<'_> {
    fn value(&self, delta: &[f64]) -> f64 {
        let total: f64 = self.margins(delta).into_iter().map(reverse_hinge).sum();
        total / self.normals.len() as f64
    }

    fn gradient(&self, delta: &[f64]) -> Vec<f64> {
        let y = self.point.y as f64;
        let scale = y / self.normals.len() as f64;
        let mut g = vec![0.0; delta.len()];
        for (h, m) in self.normals.iter().zip(self.margins(delta)) {
            if m > 0.0 {
                linalg::axpy(scale, h.theta(), &mut g);
            }
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intersection {
    /// A perturbation strictly fooling the whole pool, when one was found.
    pub witness: Option<Vec<f64>>,
    /// Lowest SRH value reached.
    pub best_value: f64,
    pub best_delta: Vec<f64>,
    pub iterations: usize,
}

/// Runs PGD on SRH over `indices`, then checks that the pool is strictly
/// fooled. A minimizer sitting on a boundary is pushed `1e-7` further along
/// the descent direction of the classifiers it touches before the check.
pub fn find_intersection(
    mix: &Mixture<LinearClassifier>,
    point: &LabeledPoint,
    indices: &[usize],
    budget: &AttackBudget,
    cfg: &PgdConfig,
    init_delta: &[f64],
    seed: u64,
) -> Result<Intersection> {
    check_dim(mix.dim(), init_delta.len())?;
    if indices.is_empty() {
        return Ok(Intersection {
            witness: Some(init_delta.to_vec()),
            best_value: 0.0,
            best_delta: init_delta.to_vec(),
            iterations: 0,
        });
    }
    let objective = SrhObjective::new(mix, point, indices)?;
    let run = pgd_minimize(&objective, budget, cfg, init_delta, seed)?;
    let witness = if run.best_value > EXACT_ZERO {
        None
    } else if objective.strictly_fooled(&run.best_delta) {
        Some(run.best_delta.clone())
    } else {
        nudge_off_boundary(&objective, budget, &run.best_delta)
    };
    Ok(Intersection { witness, best_value: run.best_value, best_delta: run.best_delta, iterations: run.iterations })
}

fn nudge_off_boundary(objective: &SrhObjective<'_>, budget: &AttackBudget, delta: &[f64]) -> Option<Vec<f64>> {
    let y = objective.point.y as f64;
    let mut dir = vec![0.0; delta.len()];
    for (h, m) in objective.normals.iter().zip(objective.margins(delta)) {
        if m >= -NUMERIC_ZERO {
            linalg::axpy(-y, h.theta(), &mut dir);
        }
    }
    let step = match budget.norm() {
        Norm::L2 => apply_step_rule(StepRule::NormalizedL2, &dir),
        Norm::Linf => apply_step_rule(StepRule::SignLinf, &dir),
    };
    let mut next = delta.to_vec();
    linalg::axpy(BOUNDARY_NUDGE, &step, &mut next);
    let next = project_to_ball(&next, budget);
    objective.strictly_fooled(&next).then_some(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(theta: &[f64], b: f64) -> LinearClassifier {
        LinearClassifier::new(theta.to_vec(), b).unwrap()
    }

    #[test]
    fn lemma1_params_examples() {
        let c = lemma1_params(2, &AttackBudget::l2(1.0).unwrap());
        assert_eq!(c.steps, 5);
        assert!((c.step_size - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.step_rule, StepRule::Vanilla);
        assert_eq!((c.momentum, c.restarts, c.halve_at), (0.0, 0, None));

        let c = lemma1_params(1, &AttackBudget::l2(0.5).unwrap());
        assert_eq!(c.steps, 2);
        assert!((c.step_size - 0.5 / 2f64.sqrt()).abs() < 1e-15);

        assert_eq!(lemma1_params(16, &AttackBudget::l2(1.0).unwrap()).steps, 257);
    }

    #[test]
    fn step_rule_must_match_norm() {
        let l2 = AttackBudget::l2(1.0).unwrap();
        let linf = AttackBudget::linf(1.0).unwrap();
        let mut c = PgdConfig::lca_default(&l2);
        assert!(c.validate(&l2).is_ok());
        assert!(c.validate(&linf).is_err());
        c.step_rule = StepRule::SignLinf;
        assert!(c.validate(&l2).is_err());
        assert!(c.validate(&linf).is_ok());
        c.step_rule = StepRule::Vanilla;
        assert!(c.validate(&l2).is_ok() && c.validate(&linf).is_ok());
        c.momentum = 1.0;
        assert!(c.validate(&l2).is_err());
    }

    #[test]
    fn constant_zero_objective_exits_immediately() {
        let obj = FnObjective { value: |_: &[f64]| 0.0, gradient: |d: &[f64]| vec![1.0; d.len()], floor: Some(0.0) };
        let budget = AttackBudget::l2(1.0).unwrap();
        let out = pgd_minimize(&obj, &budget, &lemma1_params(3, &budget), &[0.2, -0.1], 0).unwrap();
        assert_eq!(out.best_delta, vec![0.2, -0.1]);
        assert_eq!(out.best_value, 0.0);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let obj =
            FnObjective { value: |_: &[f64]| 1.0, gradient: |d: &[f64]| vec![f64::NAN; d.len()], floor: Some(0.0) };
        let budget = AttackBudget::l2(1.0).unwrap();
        let err = pgd_minimize(&obj, &budget, &lemma1_params(2, &budget), &[0.0], 0).unwrap_err();
        assert!(matches!(err, Error::NonFinite { what: "gradient", iteration: 1 }));
    }

    #[test]
    fn rejects_start_outside_ball() {
        let obj = FnObjective { value: |_: &[f64]| 1.0, gradient: |d: &[f64]| vec![0.0; d.len()], floor: None };
        let budget = AttackBudget::l2(1.0).unwrap();
        assert!(pgd_minimize(&obj, &budget, &lemma1_params(2, &budget), &[2.0], 0).is_err());
    }

    #[test]
    fn single_vulnerable_classifier_reaches_zero() {
        let budget = AttackBudget::l2(1.0).unwrap();
        let point = LabeledPoint::new(vec![0.0, 0.0], -1);
        let mix = Mixture::uniform(vec![lin(&[3.0, 4.0], -4.0)]).unwrap(); // distance 0.8
        let obj = SrhObjective::new(&mix, &point, &[0]).unwrap();
        let out = pgd_minimize(&obj, &budget, &lemma1_params(1, &budget), &[0.0, 0.0], 0).unwrap();
        assert_eq!(out.best_value, 0.0);
        assert!(obj.strictly_fooled(&out.best_delta));
    }

    #[test]
    fn disjoint_half_spaces_stay_positive() {
        let budget = AttackBudget::l2(0.8).unwrap();
        let point = LabeledPoint::new(vec![0.0, 0.0], -1);
        let mix = Mixture::uniform(vec![lin(&[1.0, 0.0], -0.5), lin(&[-1.0, 0.0], -0.5)]).unwrap();
        let hit =
            find_intersection(&mix, &point, &[0, 1], &budget, &lemma1_params(2, &budget), &[0.0, 0.0], 1).unwrap();
        assert!(hit.best_value > 0.0);
        assert!(hit.witness.is_none());
    }

    #[test]
    fn boundary_minimizer_gets_nudged() {
        let budget = AttackBudget::l2(1.0).unwrap();
        let point = LabeledPoint::new(vec![0.0], -1);
        let mix = Mixture::uniform(vec![lin(&[1.0], -0.5)]).unwrap();
        // Starting exactly on the boundary: SRH is already 0 but the margin is not strict.
        let hit = find_intersection(&mix, &point, &[0], &budget, &lemma1_params(1, &budget), &[0.5], 0).unwrap();
        let w = hit.witness.expect("nudged witness");
        assert!((w[0] - (0.5 + BOUNDARY_NUDGE)).abs() < 1e-15);
    }

    #[test]
    fn random_starts_respect_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let v = sample_in_ball(&mut rng, 5, Norm::L2, 0.3);
            assert!(norm_l2(&v) <= 0.3 + 1e-15);
            let w = sample_in_ball(&mut rng, 5, Norm::Linf, 0.3);
            assert!(linalg::norm_linf(&w) <= 0.3);
        }
    }
}
