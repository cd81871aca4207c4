//! Attacks on mixtures: the lattice climber (binary-linear and multi-class
//! variants) and the APGD and ARC baselines.

use serde::{Deserialize, Serialize};

use crate::diff::{
    binary_label, class_index, class_of_binary_label, select_target, DifferentiableClassifier, MulticlassModel,
    SoftmaxLinearClassifier,
};
use crate::error::{Error, Result};
use crate::linalg::{self, norm_l1, norm_l2};
use crate::model::{
    check_binary_label, check_dim, fooled_set, linear_margin_and_direction, outcome_from_delta, project_to_ball,
    zero_one_loss_mixture, AttackBudget, AttackOutcome, Classifier, Label, LabeledPoint, LinearClassifier, Mixture,
    Norm, TraceStep,
};
use crate::optim::{self, find_intersection, pgd_minimize, Objective, PgdConfig};
use crate::synth::derive_seed;

/// Overshoot added to closed-form boundary steps.
pub const ARC_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackKind {
    LcaBinaryLinear,
    LcaMulticlass,
    Apgd,
    Arc,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] =
        [AttackKind::LcaBinaryLinear, AttackKind::LcaMulticlass, AttackKind::Apgd, AttackKind::Arc];

    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::LcaBinaryLinear => "lca",
            AttackKind::LcaMulticlass => "lca-multiclass",
            AttackKind::Apgd => "apgd",
            AttackKind::Arc => "arc",
        }
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lca" | "lca-binary" => Ok(AttackKind::LcaBinaryLinear),
            "lca-multiclass" | "lca-mc" => Ok(AttackKind::LcaMulticlass),
            "apgd" => Ok(AttackKind::Apgd),
            "arc" => Ok(AttackKind::Arc),
            other => Err(Error::Parse(format!("unknown attack `{other}` (expected lca, lca-multiclass, apgd or arc)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierOrder {
    /// Highest weight first, ties by index.
    #[default]
    DecreasingWeight,
    GivenOrder,
}

impl ClassifierOrder {
    pub fn apply<C: Classifier>(&self, mix: &Mixture<C>) -> Vec<usize> {
        match self {
            ClassifierOrder::DecreasingWeight => mix.decreasing_weight_order(),
            ClassifierOrder::GivenOrder => (0..mix.len()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub pgd: PgdConfig,
    pub ordering: ClassifierOrder,
    pub seed: u64,
}

impl AttackSpec {
    /// Default parameters per attack: oracle-grade PGD for the binary-linear
    /// climber, the deep-model schedules for the others.
    pub fn with_defaults(kind: AttackKind, m: usize, budget: &AttackBudget, seed: u64) -> Self {
        let pgd = match kind {
            AttackKind::LcaBinaryLinear => optim::lemma1_params(m, budget),
            AttackKind::LcaMulticlass | AttackKind::Arc => PgdConfig::lca_default(budget),
            AttackKind::Apgd => PgdConfig::apgd_default(budget),
        };
        Self { kind, pgd, ordering: ClassifierOrder::DecreasingWeight, seed }
    }

    pub fn with_pgd(mut self, pgd: PgdConfig) -> Self {
        self.pgd = pgd;
        self
    }
}

/// Surrogate margins and boundary steps needed by APGD and ARC.
pub trait Attackable: Classifier {
    fn check_label(&self, y: Label) -> Result<()>;

    /// Positive while correctly classified.
    fn surrogate_margin(&self, x: &[f64], y: Label) -> f64;

    fn surrogate_gradient(&self, x: &[f64], y: Label) -> Vec<f64>;

    /// Distance (in the budget norm) to the nearest, possibly linearized,
    /// decision boundary and the unit step direction reaching it.
    fn boundary_step(&self, x: &[f64], y: Label, budget: &AttackBudget) -> Option<(f64, Vec<f64>)>;
}

impl Attackable for LinearClassifier {
    fn check_label(&self, y: Label) -> Result<()> {
        check_binary_label(y)
    }

    fn surrogate_margin(&self, x: &[f64], y: Label) -> f64 {
        self.margin(x, y)
    }

    fn surrogate_gradient(&self, _x: &[f64], y: Label) -> Vec<f64> {
        linalg::scale(self.theta(), y as f64)
    }

    fn boundary_step(&self, x: &[f64], y: Label, budget: &AttackBudget) -> Option<(f64, Vec<f64>)> {
        let (dist, dir) = linear_margin_and_direction(self, &LabeledPoint::new(x.to_vec(), y), budget);
        (dist > 0.0).then_some((dist, dir))
    }
}

fn strongest_other(logits: &[f64], y: usize) -> usize {
    let mut best = if y == 0 { 1 } else { 0 };
    for j in 0..logits.len() {
        if j != y && logits[j] > logits[best] {
            best = j;
        }
    }
    best
}

impl<T: DifferentiableClassifier> Attackable for T {
    fn check_label(&self, y: Label) -> Result<()> {
        class_index(y, self.num_classes()).map(|_| ())
    }

    fn surrogate_margin(&self, x: &[f64], y: Label) -> f64 {
        let l = self.logits(x);
        let y = y as usize;
        l[y] - l[strongest_other(&l, y)]
    }

    fn surrogate_gradient(&self, x: &[f64], y: Label) -> Vec<f64> {
        let y = y as usize;
        let other = strongest_other(&self.logits(x), y);
        self.logit_difference_gradient(x, y, other)
    }

    fn boundary_step(&self, x: &[f64], y: Label, budget: &AttackBudget) -> Option<(f64, Vec<f64>)> {
        // Linearize logit_y - logit_j for every wrong class and step across
        // the closest linearized boundary.
        let y = y as usize;
        let l = self.logits(x);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for j in (0..l.len()).filter(|&j| j != y) {
            let gap = l[y] - l[j];
            if gap <= 0.0 {
                continue;
            }
            let g = self.logit_difference_gradient(x, y, j);
            let (dual, dir) = match budget.norm() {
                Norm::L2 => {
                    let n = norm_l2(&g);
                    (n, linalg::scale(&g, -1.0 / n))
                }
                Norm::Linf => (norm_l1(&g), g.iter().map(|&v| -linalg::sign(v)).collect()),
            };
            if dual == 0.0 || !dual.is_finite() {
                continue;
            }
            let dist = gap / dual;
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, dir));
            }
        }
        best
    }
}

fn check_instance<C: Classifier>(mix: &Mixture<C>, point: &LabeledPoint) -> Result<()> {
    check_dim(mix.dim(), point.dim())
}

/// Everything is already misclassified: nothing to gain.
fn already_lost<C: Classifier>(mix: &Mixture<C>, point: &LabeledPoint) -> Result<bool> {
    Ok(fooled_set(mix, point, &vec![0.0; mix.dim()])?.len() == mix.len())
}

/// Lattice climber for binary linear mixtures.
///
/// Classifiers are visited in `spec.ordering`. Each one is tentatively added
/// to the pool and PGD on the pool's SRH is started from the incumbent
/// perturbation; the classifier stays iff the whole pool ends strictly
/// fooled. With [`optim::lemma1_params`] the returned fooled set is a
/// maximal vulnerability region whenever the inner PGD behaves as an exact
/// intersection finder.
pub fn lca_binary_linear(
    mix: &Mixture<LinearClassifier>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    spec: &AttackSpec,
) -> Result<AttackOutcome> {
    check_instance(mix, point)?;
    check_binary_label(point.y)?;
    spec.pgd.validate(budget)?;
    let dim = mix.dim();
    if already_lost(mix, point)? {
        return outcome_from_delta(mix, point, budget, vec![0.0; dim], 0, Vec::new());
    }

    let mut delta = vec![0.0; dim];
    let mut pool: Vec<usize> = Vec::new();
    let mut iterations = 0;
    let mut trace = Vec::with_capacity(mix.len());
    for (step, k) in spec.ordering.apply(mix).into_iter().enumerate() {
        pool.push(k);
        let hit = find_intersection(mix, point, &pool, budget, &spec.pgd, &delta, derive_seed(spec.seed, step as u64))?;
        iterations += hit.iterations;
        let accepted = match hit.witness {
            Some(w) => {
                delta = w;
                true
            }
            None => {
                pool.pop();
                false
            }
        };
        let mut sorted = pool.clone();
        sorted.sort_unstable();
        trace.push(TraceStep {
            outer_step: step,
            candidate: Some(k),
            pool: sorted,
            objective: Some(hit.best_value),
            score: zero_one_loss_mixture(mix, point, &delta)?,
            accepted,
        });
    }
    outcome_from_delta(mix, point, budget, delta, iterations, trace)
}

/// Mean targeted reverse-hinge margin over a pool of multi-class models.
/// Margin the multi-class SRH asks for beyond the decision boundary, so that
/// a zero objective means a strict misclassification rather than a tie.
pub const MULTICLASS_SLACK: f64 = 1e-6;

/// Averaged reverse hinge on logit margins against fixed target classes.
pub(crate) struct MulticlassSrh<'a, C> {
    pub(crate) members: Vec<(&'a C, usize)>,
    pub(crate) x: &'a [f64],
    pub(crate) y: usize,
}

impl<C: DifferentiableClassifier> Objective for MulticlassSrh<'_, C> {
    fn value(&self, delta: &[f64]) -> f64 {
        let xp = linalg::add(self.x, delta);
        let total: f64 = self
            .members
            .iter()
            .map(|(h, t)| {
                let l = h.logits(&xp);
                (l[self.y] - l[*t] + MULTICLASS_SLACK).max(0.0)
            })
            .sum();
        total / self.members.len() as f64
    }

    fn gradient(&self, delta: &[f64]) -> Vec<f64> {
        let xp = linalg::add(self.x, delta);
        let w = 1.0 / self.members.len() as f64;
        let mut g = vec![0.0; delta.len()];
        for (h, t) in &self.members {
            let l = h.logits(&xp);
            if l[self.y] - l[*t] + MULTICLASS_SLACK > 0.0 {
                linalg::axpy(w, &h.logit_difference_gradient(&xp, self.y, *t), &mut g);
            }
        }
        g
    }
}

/// Lattice climber for multi-class differentiable mixtures.
///
/// Same loop as the binary climber, but a candidate perturbation replaces
/// the incumbent only when it strictly increases the mixture 0-1 loss, and
/// the pool is then reset to the exact set of fooled classifiers. Targets
/// are the largest non-true logits at the incumbent, refreshed each step.
pub fn lca_multiclass<C: DifferentiableClassifier>(
    mix: &Mixture<C>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    spec: &AttackSpec,
) -> Result<AttackOutcome> {
    check_instance(mix, point)?;
    spec.pgd.validate(budget)?;
    let mut y = 0;
    for h in mix.classifiers() {
        y = class_index(point.y, h.num_classes())?;
    }
    let dim = mix.dim();
    if already_lost(mix, point)? {
        return outcome_from_delta(mix, point, budget, vec![0.0; dim], 0, Vec::new());
    }

    let mut delta = vec![0.0; dim];
    let mut score = zero_one_loss_mixture(mix, point, &delta)?;
    let mut pool: Vec<usize> = Vec::new();
    let mut iterations = 0;
    let mut trace = Vec::with_capacity(mix.len());
    for (step, k) in spec.ordering.apply(mix).into_iter().enumerate() {
        if !pool.contains(&k) {
            pool.push(k);
        }
        let xp = point.shifted(&delta);
        let members = pool
            .iter()
            .map(|&i| {
                let h = &mix.classifiers()[i];
                select_target(h, &xp, y).map(|t| (h, t))
            })
            .collect::<Result<Vec<_>>>()?;
        let objective = MulticlassSrh { members, x: &point.x, y };
        let run = pgd_minimize(&objective, budget, &spec.pgd, &delta, derive_seed(spec.seed, step as u64))?;
        iterations += run.iterations;

        let candidate_score = zero_one_loss_mixture(mix, point, &run.best_delta)?;
        let accepted = candidate_score > score;
        if accepted {
            delta = run.best_delta;
            score = candidate_score;
        }
        pool = fooled_set(mix, point, &delta)?;
        trace.push(TraceStep {
            outer_step: step,
            candidate: Some(k),
            pool: pool.clone(),
            objective: Some(run.best_value),
            score,
            accepted,
        });
    }
    outcome_from_delta(mix, point, budget, delta, iterations, trace)
}

/// PGD on the weighted expected surrogate margin of the whole mixture.
///
/// Every classifier contributes at every step, fooled or not. The best
/// outcome by mixture 0-1 loss across runs is returned.
pub fn apgd<C: Attackable>(
    mix: &Mixture<C>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    spec: &AttackSpec,
) -> Result<AttackOutcome> {
    check_instance(mix, point)?;
    spec.pgd.validate(budget)?;
    for h in mix.classifiers() {
        h.check_label(point.y)?;
    }
    let dim = mix.dim();
    if already_lost(mix, point)? {
        return outcome_from_delta(mix, point, budget, vec![0.0; dim], 0, Vec::new());
    }

    let objective = ExpectedMargin { mix, point };
    let single_run = PgdConfig { restarts: 0, ..spec.pgd.clone() };
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(spec.seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut trace = Vec::new();
    for run in 0..=spec.pgd.restarts {
        let init = if run > 0 && spec.pgd.random_init {
            let r = spec.pgd.init_radius.unwrap_or(budget.epsilon()).min(budget.epsilon());
            project_to_ball(&optim::sample_in_ball(&mut rng, dim, budget.norm(), r), budget)
        } else {
            vec![0.0; dim]
        };
        let out = pgd_minimize(&objective, budget, &single_run, &init, derive_seed(spec.seed, run as u64))?;
        iterations += out.iterations;
        let score = zero_one_loss_mixture(mix, point, &out.best_delta)?;
        let accepted = best.as_ref().is_none_or(|(s, _)| score > *s);
        if accepted {
            best = Some((score, out.best_delta));
        }
        trace.push(TraceStep {
            outer_step: run,
            candidate: None,
            pool: fooled_set(mix, point, &best.as_ref().expect("set above").1)?,
            objective: Some(out.best_value),
            score: best.as_ref().expect("set above").0,
            accepted,
        });
    }
    let (_, delta) = best.expect("at least one run");
    outcome_from_delta(mix, point, budget, delta, iterations, trace)
}

struct ExpectedMargin<'a, C> {
    mix: &'a Mixture<C>,
    point: &'a LabeledPoint,
}

impl<C: Attackable> Objective for ExpectedMargin<'_, C> {
    fn value(&self, delta: &[f64]) -> f64 {
        let xp = self.point.shifted(delta);
        self.mix
            .classifiers()
            .iter()
            .zip(self.mix.weights())
            .map(|(h, q)| q * h.surrogate_margin(&xp, self.point.y))
            .sum()
    }

    fn gradient(&self, delta: &[f64]) -> Vec<f64> {
        let xp = self.point.shifted(delta);
        let mut g = vec![0.0; delta.len()];
        for (h, q) in self.mix.classifiers().iter().zip(self.mix.weights()) {
            linalg::axpy(*q, &h.surrogate_gradient(&xp, self.point.y), &mut g);
        }
        g
    }

    fn floor(&self) -> Option<f64> {
        None
    }
}

/// Greedy closed-form attack: one boundary step per classifier, never
/// lowering the mixture loss and never accepting a step that fools nothing.
pub fn arc<C: Attackable>(
    mix: &Mixture<C>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    spec: &AttackSpec,
) -> Result<AttackOutcome> {
    check_instance(mix, point)?;
    for h in mix.classifiers() {
        h.check_label(point.y)?;
    }
    let dim = mix.dim();
    if already_lost(mix, point)? {
        return outcome_from_delta(mix, point, budget, vec![0.0; dim], 0, Vec::new());
    }

    let mut delta = vec![0.0; dim];
    let mut score = zero_one_loss_mixture(mix, point, &delta)?;
    let mut iterations = 0;
    let mut trace = Vec::with_capacity(mix.len());
    for (step, k) in spec.ordering.apply(mix).into_iter().enumerate() {
        let h = &mix.classifiers()[k];
        let xp = point.shifted(&delta);
        iterations += 1;
        if h.misclassifies(&xp, point.y) {
            continue;
        }
        let Some((dist, dir)) = h.boundary_step(&xp, point.y, budget) else {
            continue;
        };
        let mut candidate = delta.clone();
        linalg::axpy(dist + ARC_SLACK, &dir, &mut candidate);
        let candidate = project_to_ball(&candidate, budget);
        let fooled = fooled_set(mix, point, &candidate)?;
        let candidate_score = mix.weight_of(&fooled);
        let accepted = !fooled.is_empty() && candidate_score >= score;
        if accepted {
            delta = candidate;
            score = candidate_score;
        }
        trace.push(TraceStep {
            outer_step: step,
            candidate: Some(k),
            pool: fooled_set(mix, point, &delta)?,
            objective: None,
            score,
            accepted,
        });
    }
    outcome_from_delta(mix, point, budget, delta, iterations, trace)
}

/// Runs any attack against a binary linear mixture. The multi-class climber
/// sees each classifier as its equivalent two-class softmax model.
pub fn run_attack_linear(
    mix: &Mixture<LinearClassifier>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    spec: &AttackSpec,
) -> Result<AttackOutcome> {
    match spec.kind {
        AttackKind::LcaBinaryLinear => lca_binary_linear(mix, point, budget, spec),
        AttackKind::Apgd => apgd(mix, point, budget, spec),
        AttackKind::Arc => arc(mix, point, budget, spec),
        AttackKind::LcaMulticlass => {
            check_binary_label(point.y)?;
            let lifted = mix.map(SoftmaxLinearClassifier::from_binary);
            let class_point = LabeledPoint::new(point.x.clone(), class_of_binary_label(point.y) as Label);
            debug_assert_eq!(binary_label(class_point.y as usize), point.y);
            let out = lca_multiclass(&lifted, &class_point, budget, spec)?;
            outcome_from_delta(mix, point, budget, out.delta, out.iterations_used, out.trace)
        }
    }
}

/// Runs any attack accepting multi-class mixtures.
pub fn run_attack_multiclass(
    mix: &Mixture<MulticlassModel>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    spec: &AttackSpec,
) -> Result<AttackOutcome> {
    match spec.kind {
        AttackKind::LcaBinaryLinear => Err(Error::ContractViolation(
            "the binary-linear climber needs a mixture of binary linear classifiers".into(),
        )),
        AttackKind::LcaMulticlass => lca_multiclass(mix, point, budget, spec),
        AttackKind::Apgd => apgd(mix, point, budget, spec),
        AttackKind::Arc => arc(mix, point, budget, spec),
    }
}
