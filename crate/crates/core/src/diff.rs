//! Multi-class differentiable classifiers and the targeted logit margin.
//!
//! Margins are taken on logits. For a true class `y` and a target `t`, the
//! attacked quantity is `max(logit_y - logit_t, 0)`, whose input gradient is
//! `grad(logit_y - logit_t)` while positive and zero otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot};
use crate::model::{check_dim, Classifier, Fingerprint, Label, LinearClassifier};

pub trait DifferentiableClassifier: Classifier {
    fn num_classes(&self) -> usize;

    fn logits(&self, x: &[f64]) -> Vec<f64>;

    /// Gradient of `logit_plus - logit_minus` with respect to the input.
    fn logit_difference_gradient(&self, x: &[f64], plus: usize, minus: usize) -> Vec<f64>;
}

/// Argmax with ties broken toward the lowest index.
pub fn predicted_class(logits: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = j;
        }
    }
    best
}

pub(crate) fn class_index(y: Label, k: usize) -> Result<usize> {
    if y >= 0 && (y as usize) < k {
        Ok(y as usize)
    } else {
        Err(Error::InvalidLabel { label: y, reason: "class label outside 0..k" })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetSelection {
    #[default]
    LargestOtherLogit,
}

/// Largest logit among the classes other than `y`, lowest index on ties.
pub fn select_target<H: DifferentiableClassifier + ?Sized>(h: &H, x: &[f64], y: usize) -> Result<usize> {
    let k = h.num_classes();
    if y >= k {
        return Err(Error::InvalidLabel { label: y as i64, reason: "class label outside 0..k" });
    }
    check_dim(h.input_dim(), x.len())?;
    let logits = h.logits(x);
    let mut best: Option<usize> = None;
    for j in (0..k).filter(|&j| j != y) {
        match best {
            Some(b) if logits[j] <= logits[b] => {}
            _ => best = Some(j),
        }
    }
    Ok(best.expect("k >= 2"))
}

fn check_target(k: usize, y: usize, y_adv: usize) -> Result<()> {
    if y == y_adv {
        return Err(Error::ContractViolation("target class equals the true class".into()));
    }
    if y >= k || y_adv >= k {
        return Err(Error::ContractViolation(format!("class index out of range for k = {k}")));
    }
    Ok(())
}

/// `max(logit_y - logit_{y_adv}, 0)`
pub fn multiclass_rev_margin<H: DifferentiableClassifier + ?Sized>(
    h: &H,
    x: &[f64],
    y: usize,
    y_adv: usize,
) -> Result<f64> {
    check_target(h.num_classes(), y, y_adv)?;
    check_dim(h.input_dim(), x.len())?;
    let l = h.logits(x);
    Ok((l[y] - l[y_adv]).max(0.0))
}

/// Input gradient of [`multiclass_rev_margin`]; the zero vector once the
/// margin is nonpositive.
pub fn input_gradient<H: DifferentiableClassifier + ?Sized>(
    h: &H,
    x: &[f64],
    y: usize,
    y_adv: usize,
) -> Result<Vec<f64>> {
    check_target(h.num_classes(), y, y_adv)?;
    check_dim(h.input_dim(), x.len())?;
    let l = h.logits(x);
    if l[y] - l[y_adv] <= 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    Ok(h.logit_difference_gradient(x, y, y_adv))
}

fn validate_matrix(rows: &[Vec<f64>], cols: usize, name: &str) -> Result<()> {
    for r in rows {
        check_dim(cols, r.len())?;
        if !linalg::all_finite(r) {
            return Err(Error::DegenerateClassifier(format!("{name} has non-finite entries")));
        }
    }
    Ok(())
}

/// `logits(x) = W x + c` with `W` of shape `k x d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSoftmax", into = "RawSoftmax")]
pub struct SoftmaxLinearClassifier {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSoftmax {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    c: Vec<f64>,
}

impl TryFrom<RawSoftmax> for SoftmaxLinearClassifier {
    type Error = Error;

    fn try_from(raw: RawSoftmax) -> Result<Self> {
        SoftmaxLinearClassifier::new(raw.w, raw.c)
    }
}

impl From<SoftmaxLinearClassifier> for RawSoftmax {
    fn from(h: SoftmaxLinearClassifier) -> Self {
        RawSoftmax { w: h.weights, c: h.bias }
    }
}

impl SoftmaxLinearClassifier {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k < 2 {
            return Err(Error::DegenerateClassifier("need at least 2 classes".into()));
        }
        let d = weights[0].len();
        if d == 0 {
            return Err(Error::DegenerateClassifier("input dimension must be at least 1".into()));
        }
        validate_matrix(&weights, d, "W")?;
        check_dim(k, bias.len())?;
        if !linalg::all_finite(&bias) {
            return Err(Error::DegenerateClassifier("c has non-finite entries".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// The equivalent binary classifier of a 2-class model:
    /// `theta = W_0 - W_1`, `b = c_0 - c_1`. Class 0 maps to label `+1`
    /// and class 1 to `-1` (see [`binary_label`]).
    pub fn to_binary(&self) -> Result<LinearClassifier> {
        if self.weights.len() != 2 {
            return Err(Error::ContractViolation(format!(
                "binary reduction needs k = 2, got k = {}",
                self.weights.len()
            )));
        }
        let theta = self.weights[0].iter().zip(&self.weights[1]).map(|(a, b)| a - b).collect();
        LinearClassifier::new(theta, self.bias[0] - self.bias[1])
    }

    /// Two-class model whose decisions coincide with `h`.
    pub fn from_binary(h: &LinearClassifier) -> Self {
        Self { weights: vec![h.theta().to_vec(), vec![0.0; h.dim()]], bias: vec![h.bias(), 0.0] }
    }
}

/// Binary label of a class index under the `k = 2` reduction.
pub fn binary_label(class: usize) -> Label {
    if class == 0 {
        1
    } else {
        -1
    }
}

/// Class index of a binary label under the `k = 2` reduction.
pub fn class_of_binary_label(y: Label) -> usize {
    if y >= 0 {
        0
    } else {
        1
    }
}

impl Classifier for SoftmaxLinearClassifier {
    fn input_dim(&self) -> usize {
        self.weights[0].len()
    }

    fn misclassifies(&self, x: &[f64], y: Label) -> bool {
        predicted_class(&self.logits(x)) as Label != y
    }

    fn fingerprint_into(&self, fp: &mut Fingerprint) {
        fp.push_str("softmax");
        for row in &self.weights {
            fp.push_slice(row);
        }
        fp.push_slice(&self.bias);
    }
}

impl DifferentiableClassifier for SoftmaxLinearClassifier {
    fn num_classes(&self) -> usize {
        self.weights.len()
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights.iter().zip(&self.bias).map(|(w, c)| dot(w, x) + c).collect()
    }

    fn logit_difference_gradient(&self, _x: &[f64], plus: usize, minus: usize) -> Vec<f64> {
        self.weights[plus].iter().zip(&self.weights[minus]).map(|(a, b)| a - b).collect()
    }
}

/// One hidden layer with `tanh`: `logits(x) = W2 tanh(W1 x + b1) + b2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMlp", into = "RawMlp")]
pub struct MlpClassifier {
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMlp {
    #[serde(rename = "W1")]
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

impl TryFrom<RawMlp> for MlpClassifier {
    type Error = Error;

    fn try_from(raw: RawMlp) -> Result<Self> {
        MlpClassifier::new(raw.w1, raw.b1, raw.w2, raw.b2)
    }
}

impl From<MlpClassifier> for RawMlp {
    fn from(h: MlpClassifier) -> Self {
        RawMlp { w1: h.w1, b1: h.b1, w2: h.w2, b2: h.b2 }
    }
}

impl MlpClassifier {
    /// `w1` is `p x d`, `w2` is `k x p`.
    pub fn new(w1: Vec<Vec<f64>>, b1: Vec<f64>, w2: Vec<Vec<f64>>, b2: Vec<f64>) -> Result<Self> {
        let p = w1.len();
        if p == 0 {
            return Err(Error::DegenerateClassifier("hidden width must be at least 1".into()));
        }
        let d = w1[0].len();
        if d == 0 {
            return Err(Error::DegenerateClassifier("input dimension must be at least 1".into()));
        }
        validate_matrix(&w1, d, "w1")?;
        check_dim(p, b1.len())?;
        let k = w2.len();
        if k < 2 {
            return Err(Error::DegenerateClassifier("need at least 2 classes".into()));
        }
        validate_matrix(&w2, p, "w2")?;
        check_dim(k, b2.len())?;
        if !linalg::all_finite(&b1) || !linalg::all_finite(&b2) {
            return Err(Error::DegenerateClassifier("biases have non-finite entries".into()));
        }
        Ok(Self { w1, b1, w2, b2 })
    }

    pub fn hidden_width(&self) -> usize {
        self.w1.len()
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1.iter().zip(&self.b1).map(|(w, b)| (dot(w, x) + b).tanh()).collect()
    }
}

impl Classifier for MlpClassifier {
    fn input_dim(&self) -> usize {
        self.w1[0].len()
    }

    fn misclassifies(&self, x: &[f64], y: Label) -> bool {
        predicted_class(&self.logits(x)) as Label != y
    }

    fn fingerprint_into(&self, fp: &mut Fingerprint) {
        fp.push_str("mlp");
        for row in self.w1.iter().chain(&self.w2) {
            fp.push_slice(row);
        }
        fp.push_slice(&self.b1);
        fp.push_slice(&self.b2);
    }
}

impl DifferentiableClassifier for MlpClassifier {
    fn num_classes(&self) -> usize {
        self.w2.len()
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        let h = self.hidden(x);
        self.w2.iter().zip(&self.b2).map(|(w, b)| dot(w, &h) + b).collect()
    }

    fn logit_difference_gradient(&self, x: &[f64], plus: usize, minus: usize) -> Vec<f64> {
        // d/dx = W1^T [ (1 - h^2) * (W2_plus - W2_minus) ]
        let h = self.hidden(x);
        let mut g = vec![0.0; x.len()];
        for (j, hj) in h.iter().enumerate() {
            let back = (1.0 - hj * hj) * (self.w2[plus][j] - self.w2[minus][j]);
            linalg::axpy(back, &self.w1[j], &mut g);
        }
        g
    }
}

/// A multi-class model of either supported architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MulticlassModel {
    SoftmaxLinear(SoftmaxLinearClassifier),
    Mlp(MlpClassifier),
}

impl MulticlassModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MulticlassModel::SoftmaxLinear(_) => "softmax",
            MulticlassModel::Mlp(_) => "mlp",
        }
    }
}

impl Classifier for MulticlassModel {
    fn input_dim(&self) -> usize {
        match self {
            MulticlassModel::SoftmaxLinear(h) => h.input_dim(),
            MulticlassModel::Mlp(h) => h.input_dim(),
        }
    }

    fn misclassifies(&self, x: &[f64], y: Label) -> bool {
        match self {
            MulticlassModel::SoftmaxLinear(h) => h.misclassifies(x, y),
            MulticlassModel::Mlp(h) => h.misclassifies(x, y),
        }
    }

    fn fingerprint_into(&self, fp: &mut Fingerprint) {
        match self {
            MulticlassModel::SoftmaxLinear(h) => h.fingerprint_into(fp),
            MulticlassModel::Mlp(h) => h.fingerprint_into(fp),
        }
    }
}

impl DifferentiableClassifier for MulticlassModel {
    fn num_classes(&self) -> usize {
        match self {
            MulticlassModel::SoftmaxLinear(h) => h.num_classes(),
            MulticlassModel::Mlp(h) => h.num_classes(),
        }
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MulticlassModel::SoftmaxLinear(h) => h.logits(x),
            MulticlassModel::Mlp(h) => h.logits(x),
        }
    }

    fn logit_difference_gradient(&self, x: &[f64], plus: usize, minus: usize) -> Vec<f64> {
        match self {
            MulticlassModel::SoftmaxLinear(h) => h.logit_difference_gradient(x, plus, minus),
            MulticlassModel::Mlp(h) => h.logit_difference_gradient(x, plus, minus),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity2() -> SoftmaxLinearClassifier {
        SoftmaxLinearClassifier::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap()
    }

    /// Fixed logits regardless of input.
    fn constant(logits: &[f64]) -> SoftmaxLinearClassifier {
        SoftmaxLinearClassifier::new(vec![vec![0.0]; logits.len()], logits.to_vec()).unwrap()
    }

    #[test]
    fn identity_logits_and_prediction() {
        let h = identity2();
        let l = h.logits(&[0.1, 0.9]);
        assert_eq!(l, vec![0.1, 0.9]);
        assert_eq!(predicted_class(&l), 1);
        assert_eq!(predicted_class(&[0.5, 0.5]), 0);
    }

    #[test]
    fn mlp_with_zero_output_layer_is_constant() {
        let h = MlpClassifier::new(
            vec![vec![1.0, -2.0], vec![0.5, 0.5], vec![3.0, 1.0]],
            vec![0.1, 0.2, 0.3],
            vec![vec![0.0; 3]; 2],
            vec![0.7, -0.4],
        )
        .unwrap();
        for x in [[0.0, 0.0], [5.0, -3.0], [-1.0, 2.0]] {
            assert_eq!(h.logits(&x), vec![0.7, -0.4]);
        }
    }

    #[test]
    fn target_selection() {
        let h = constant(&[5.0, 1.0, 3.0]);
        assert_eq!(select_target(&h, &[0.0], 0).unwrap(), 2);
        assert_eq!(select_target(&h, &[0.0], 2).unwrap(), 0);
        let two = constant(&[1.0, 9.0]);
        assert_eq!(select_target(&two, &[0.0], 0).unwrap(), 1);
        assert_eq!(select_target(&two, &[0.0], 1).unwrap(), 0);
        let tie = constant(&[0.0, 2.0, 2.0]);
        assert_eq!(select_target(&tie, &[0.0], 0).unwrap(), 1);
    }

    #[test]
    fn rev_margin_cases() {
        let h = constant(&[2.0, 0.5, 0.5]);
        assert_eq!(multiclass_rev_margin(&h, &[0.0], 0, 1).unwrap(), 1.5);
        assert_eq!(multiclass_rev_margin(&h, &[0.0], 1, 2).unwrap(), 0.0);
        assert_eq!(multiclass_rev_margin(&h, &[0.0], 1, 0).unwrap(), 0.0);
        assert!(multiclass_rev_margin(&h, &[0.0], 1, 1).is_err());
    }

    #[test]
    fn softmax_gradient_is_row_difference() {
        let h =
            SoftmaxLinearClassifier::new(vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 3.0]], vec![10.0, 0.0, 0.0])
                .unwrap();
        assert_eq!(input_gradient(&h, &[0.0, 0.0], 0, 2).unwrap(), vec![1.0, -1.0]);
        // logit_1 - logit_0 = -12 at the origin: flat region.
        assert_eq!(input_gradient(&h, &[0.0, 0.0], 1, 0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn binary_reduction_round_trip() {
        let h = SoftmaxLinearClassifier::new(vec![vec![1.0, 2.0], vec![0.5, -1.0]], vec![0.3, 0.1]).unwrap();
        let b = h.to_binary().unwrap();
        assert_eq!(b.theta(), &[0.5, 3.0]);
        assert!((b.bias() - 0.2).abs() < 1e-15);
        let back = SoftmaxLinearClassifier::from_binary(&b);
        for x in [[0.0, 0.0], [1.0, -1.0], [-3.0, 0.2]] {
            for class in 0..2 {
                assert_eq!(back.misclassifies(&x, class as Label), b.misclassifies(&x, binary_label(class)));
            }
        }
        let three = constant(&[0.0, 1.0, 2.0]);
        assert!(three.to_binary().is_err());
    }

    #[test]
    fn rejects_malformed_models() {
        assert!(SoftmaxLinearClassifier::new(vec![vec![1.0]], vec![0.0]).is_err());
        assert!(SoftmaxLinearClassifier::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0.0, 0.0]).is_err());
        assert!(MlpClassifier::new(vec![], vec![], vec![], vec![]).is_err());
        assert!(MlpClassifier::new(vec![vec![1.0]], vec![0.0], vec![vec![1.0]], vec![0.0]).is_err());
    }
}
