//! Domain types shared by every attack, and the mixture losses.
//!
//! Conventions used throughout the crate:
//! - classifier indices are 0-based positions in [`Mixture::classifiers`];
//! - binary labels are `-1` / `+1`, and a linear classifier predicts `+1`
//!   iff `theta . x + bias >= 0`;
//! - a binary classifier is *fooled* at `x` iff its prediction differs from
//!   `y`, which means `y * f(x) < 0` for `y = +1` and `y * f(x) <= 0` for
//!   `y = -1`. The attacks themselves only accept strictly negative margins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm_l1, norm_l2};

/// Global numeric zero.
pub const NUMERIC_ZERO: f64 = 1e-9;

/// Tolerance on `sum(q) = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Class label. Binary problems use `-1` / `+1`; multi-class problems use
/// `0..k`.
pub type Label = i64;

pub(crate) fn check_binary_label(y: Label) -> Result<()> {
    if y == 1 || y == -1 {
        Ok(())
    } else {
        Err(Error::InvalidLabel { label: y, reason: "binary labels must be -1 or +1" })
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Anything that can be asked whether it misclassifies a labeled input.
pub trait Classifier {
    fn input_dim(&self) -> usize;

    /// `true` when the prediction at `x` differs from `y`.
    fn misclassifies(&self, x: &[f64], y: Label) -> bool;

    /// Feeds every parameter into `fp`, used to tie oracle reports to
    /// attack outcomes.
    fn fingerprint_into(&self, fp: &mut Fingerprint);
}

/// Affine binary classifier `h(x) = sign(theta . x + bias)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLinear", into = "RawLinear")]
pub struct LinearClassifier {
    theta: Vec<f64>,
    bias: f64,
}

#[derive(Serialize, Deserialize)]
struct RawLinear {
    theta: Vec<f64>,
    bias: f64,
}

impl TryFrom<RawLinear> for LinearClassifier {
    type Error = Error;

    fn try_from(raw: RawLinear) -> Result<Self> {
        LinearClassifier::new(raw.theta, raw.bias)
    }
}

impl From<LinearClassifier> for RawLinear {
    fn from(h: LinearClassifier) -> Self {
        RawLinear { theta: h.theta, bias: h.bias }
    }
}

impl LinearClassifier {
    pub fn new(theta: Vec<f64>, bias: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::DegenerateClassifier("input dimension must be at least 1".into()));
        }
        if !linalg::all_finite(&theta) || !bias.is_finite() {
            return Err(Error::DegenerateClassifier("parameters must be finite".into()));
        }
        if theta.iter().all(|&t| t == 0.0) {
            return Err(Error::DegenerateClassifier("theta is the zero vector".into()));
        }
        Ok(Self { theta, bias })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `theta . x + bias`
    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.theta, x) + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.score(x) >= 0.0 {
            1
        } else {
            -1
        }
    }

    /// Signed margin `y * f(x)`; positive means correctly classified.
    #[inline]
    pub fn margin(&self, x: &[f64], y: Label) -> f64 {
        y as f64 * self.score(x)
    }

    /// Same decision boundary, rescaled so that `||theta||_2 = 1`.
    pub fn unit_normalized(&self) -> LinearClassifier {
        let n = norm_l2(&self.theta);
        LinearClassifier { theta: linalg::scale(&self.theta, 1.0 / n), bias: self.bias / n }
    }
}

impl Classifier for LinearClassifier {
    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn misclassifies(&self, x: &[f64], y: Label) -> bool {
        self.predict(x) != y
    }

    fn fingerprint_into(&self, fp: &mut Fingerprint) {
        fp.push_str("linear");
        fp.push_slice(&self.theta);
        fp.push_f64(self.bias);
    }
}

/// A probability distribution over base classifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture<C> {
    classifiers: Vec<C>,
    weights: Vec<f64>,
}

impl<C: Classifier> Mixture<C> {
    /// Validates (never renormalizes) the weights.
    pub fn new(classifiers: Vec<C>, weights: Vec<f64>) -> Result<Self> {
        if classifiers.is_empty() {
            return Err(Error::InvalidWeights("a mixture needs at least one classifier".into()));
        }
        if weights.len() != classifiers.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} classifiers",
                weights.len(),
                classifiers.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("weight {w} is outside [0, 1]")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        let d = classifiers[0].input_dim();
        for h in &classifiers[1..] {
            check_dim(d, h.input_dim())?;
        }
        Ok(Self { classifiers, weights })
    }

    pub fn uniform(classifiers: Vec<C>) -> Result<Self> {
        let m = classifiers.len().max(1);
        let w = vec![1.0 / m as f64; classifiers.len()];
        Self::new(classifiers, w)
    }

    pub fn len(&self) -> usize {
        self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classifiers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.classifiers[0].input_dim()
    }

    pub fn classifiers(&self) -> &[C] {
        &self.classifiers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Indices sorted by decreasing weight, ties broken by index.
    pub fn decreasing_weight_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        order
    }

    /// Sum of weights over `indices`.
    pub fn weight_of(&self, indices: &[usize]) -> f64 {
        indices.iter().fold(0.0, |acc, &i| acc + self.weights[i])
    }

    pub fn map<D: Classifier>(&self, f: impl FnMut(&C) -> D) -> Mixture<D> {
        Mixture { classifiers: self.classifiers.iter().map(f).collect(), weights: self.weights.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    Linf,
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        })
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Norm::L2),
            "linf" | "l-inf" | "inf" => Ok(Norm::Linf),
            other => Err(Error::Parse(format!("unknown norm `{other}` (expected l2 or linf)"))),
        }
    }
}

/// The threat model: perturbations with `||delta|| <= epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackBudget {
    norm: Norm,
    epsilon: f64,
}

impl AttackBudget {
    pub fn new(norm: Norm, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidBudget(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { norm, epsilon })
    }

    pub fn l2(epsilon: f64) -> Result<Self> {
        Self::new(Norm::L2, epsilon)
    }

    pub fn linf(epsilon: f64) -> Result<Self> {
        Self::new(Norm::Linf, epsilon)
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn measure(&self, v: &[f64]) -> f64 {
        match self.norm {
            Norm::L2 => norm_l2(v),
            Norm::Linf => linalg::norm_linf(v),
        }
    }

    /// Ball membership with the crate-wide slack.
    pub fn contains(&self, delta: &[f64]) -> bool {
        self.measure(delta) <= self.epsilon + NUMERIC_ZERO
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: Vec<f64>,
    pub y: Label,
}

impl LabeledPoint {
    pub fn new(x: Vec<f64>, y: Label) -> Self {
        Self { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `x + delta`
    pub fn shifted(&self, delta: &[f64]) -> Vec<f64> {
        linalg::add(&self.x, delta)
    }
}

/// One outer-loop step of an attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub outer_step: usize,
    /// Classifier considered at this step, if the attack works one at a time.
    pub candidate: Option<usize>,
    /// Pool after the step.
    pub pool: Vec<usize>,
    /// Final inner objective (SRH for LCA), if any.
    pub objective: Option<f64>,
    /// Incumbent mixture 0-1 loss after the step.
    pub score: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub delta: Vec<f64>,
    /// Sorted indices of classifiers that misclassify `x + delta`.
    pub fooled: Vec<usize>,
    pub score: f64,
    /// Gradient (or closed-form margin) evaluations spent.
    pub iterations_used: usize,
    pub fingerprint: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceStep>,
}

/// Indices of the classifiers misclassifying `x + delta`.
pub fn fooled_set<C: Classifier>(mix: &Mixture<C>, point: &LabeledPoint, delta: &[f64]) -> Result<Vec<usize>> {
    check_dim(mix.dim(), point.dim())?;
    check_dim(mix.dim(), delta.len())?;
    let xp = point.shifted(delta);
    Ok(mix.classifiers().iter().enumerate().filter(|(_, h)| h.misclassifies(&xp, point.y)).map(|(i, _)| i).collect())
}

/// Mixture 0-1 loss at `x + delta`: total weight of the fooled classifiers.
pub fn zero_one_loss_mixture<C: Classifier>(mix: &Mixture<C>, point: &LabeledPoint, delta: &[f64]) -> Result<f64> {
    let fooled = fooled_set(mix, point, delta)?;
    Ok(mix.weight_of(&fooled))
}

/// Euclidean projection onto the L2 ball, or coordinate clamp for Linf.
pub fn project_to_ball(delta: &[f64], budget: &AttackBudget) -> Vec<f64> {
    let eps = budget.epsilon();
    match budget.norm() {
        Norm::L2 => {
            let n = norm_l2(delta);
            if n <= eps {
                delta.to_vec()
            } else {
                linalg::scale(delta, eps / n)
            }
        }
        Norm::Linf => delta.iter().map(|v| v.clamp(-eps, eps)).collect(),
    }
}

#[inline]
pub fn reverse_hinge(margin: f64) -> f64 {
    margin.max(0.0)
}

/// Averaged sum of reverse hinge losses of the classifiers in `indices`,
/// evaluated at `x + delta`.
pub fn srh(indices: &[usize], mix: &Mixture<LinearClassifier>, point: &LabeledPoint, delta: &[f64]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::ContractViolation("SRH of an empty index set".into()));
    }
    check_binary_label(point.y)?;
    check_dim(mix.dim(), point.dim())?;
    check_dim(mix.dim(), delta.len())?;
    if let Some(&i) = indices.iter().find(|&&i| i >= mix.len()) {
        return Err(Error::ContractViolation(format!("index {i} out of range for m = {}", mix.len())));
    }
    let xp = point.shifted(delta);
    let total: f64 = indices.iter().map(|&i| reverse_hinge(mix.classifiers()[i].margin(&xp, point.y))).sum();
    Ok(total / indices.len() as f64)
}

/// Distance from `x` to the decision boundary of `h` in the budget's norm,
/// and the unit step (in that norm) that reaches it.
///
/// Returns `(0, 0)` when `h` already misclassifies the point.
pub fn linear_margin_and_direction(
    h: &LinearClassifier,
    point: &LabeledPoint,
    budget: &AttackBudget,
) -> (f64, Vec<f64>) {
    let y = point.y as f64;
    let margin = h.margin(&point.x, point.y);
    if margin <= 0.0 {
        return (0.0, vec![0.0; h.dim()]);
    }
    match budget.norm() {
        Norm::L2 => {
            let n = norm_l2(h.theta());
            (margin / n, h.theta().iter().map(|t| -y * t / n).collect())
        }
        Norm::Linf => {
            let n = norm_l1(h.theta());
            (margin / n, h.theta().iter().map(|&t| -y * linalg::sign(t)).collect())
        }
    }
}

/// Stable FNV-1a hash of an attack instance.
#[derive(Clone, Debug)]
pub struct Fingerprint(u64);

impl Default for Fingerprint {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Fingerprint {
    fn push_bytes(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub fn push_f64(&mut self, v: f64) {
        self.push_bytes(&v.to_bits().to_le_bytes());
    }

    pub fn push_u64(&mut self, v: u64) {
        self.push_bytes(&v.to_le_bytes());
    }

    pub fn push_slice(&mut self, v: &[f64]) {
        self.push_u64(v.len() as u64);
        for x in v {
            self.push_f64(*x);
        }
    }

    pub fn push_str(&mut self, s: &str) {
        self.push_bytes(s.as_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// Identifies `(mixture, point, budget)`.
pub fn instance_fingerprint<C: Classifier>(mix: &Mixture<C>, point: &LabeledPoint, budget: &AttackBudget) -> u64 {
    let mut fp = Fingerprint::default();
    for h in mix.classifiers() {
        h.fingerprint_into(&mut fp);
    }
    fp.push_slice(mix.weights());
    fp.push_slice(&point.x);
    fp.push_u64(point.y as u64);
    fp.push_str(&budget.norm().to_string());
    fp.push_f64(budget.epsilon());
    fp.finish()
}

/// Assembles an [`AttackOutcome`] from a final perturbation.
pub(crate) fn outcome_from_delta<C: Classifier>(
    mix: &Mixture<C>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    delta: Vec<f64>,
    iterations_used: usize,
    trace: Vec<TraceStep>,
) -> Result<AttackOutcome> {
    let fooled = fooled_set(mix, point, &delta)?;
    let score = mix.weight_of(&fooled);
    Ok(AttackOutcome {
        delta,
        fooled,
        score,
        iterations_used,
        fingerprint: instance_fingerprint(mix, point, budget),
        trace,
    })
}
