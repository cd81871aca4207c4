//! JSON instance files: a mixture plus the labeled point under attack.
//!
//! ```json
//! {"kind": "binary-linear", "d": 2, "k": 2,
//!  "classifiers": [{"theta": [1.0, 0.0], "bias": -0.5}],
//!  "weights": [1.0],
//!  "point": {"x": [0.0, 0.0], "y": -1}}
//! ```
//!
//! Multi-class files use `"kind": "multiclass"` with classifiers given either
//! as softmax-linear `{"W": [[..]], "c": [..]}` or one-hidden-layer networks
//! `{"W1", "b1", "W2", "b2"}`. Reals are written in shortest round-trip form,
//! so reading a file back reproduces every value bit for bit.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diff::{DifferentiableClassifier, MulticlassModel};
use crate::error::{Error, Result};
use crate::model::{instance_fingerprint, AttackBudget, LabeledPoint, LinearClassifier, Mixture};
use crate::oracle::LatticeReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    BinaryLinear,
    Multiclass,
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstanceKind::BinaryLinear => "binary-linear",
            InstanceKind::Multiclass => "multiclass",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnyMixture {
    Linear(Mixture<LinearClassifier>),
    Multiclass(Mixture<MulticlassModel>),
}

impl AnyMixture {
    pub fn kind(&self) -> InstanceKind {
        match self {
            AnyMixture::Linear(_) => InstanceKind::BinaryLinear,
            AnyMixture::Multiclass(_) => InstanceKind::Multiclass,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyMixture::Linear(m) => m.len(),
            AnyMixture::Multiclass(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyMixture::Linear(m) => m.dim(),
            AnyMixture::Multiclass(m) => m.dim(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            AnyMixture::Linear(m) => m.weights(),
            AnyMixture::Multiclass(m) => m.weights(),
        }
    }

    /// Number of classes (2 for binary mixtures).
    pub fn num_classes(&self) -> usize {
        match self {
            AnyMixture::Linear(_) => 2,
            AnyMixture::Multiclass(m) => m.classifiers()[0].num_classes(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub mixture: AnyMixture,
    pub point: LabeledPoint,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    kind: InstanceKind,
    d: usize,
    k: usize,
    classifiers: serde_json::Value,
    weights: Vec<f64>,
    point: LabeledPoint,
}

impl Instance {
    pub fn linear(mixture: Mixture<LinearClassifier>, point: LabeledPoint) -> Self {
        Self { mixture: AnyMixture::Linear(mixture), point }
    }

    pub fn multiclass(mixture: Mixture<MulticlassModel>, point: LabeledPoint) -> Self {
        Self { mixture: AnyMixture::Multiclass(mixture), point }
    }

    pub fn fingerprint(&self, budget: &AttackBudget) -> u64 {
        match &self.mixture {
            AnyMixture::Linear(m) => instance_fingerprint(m, &self.point, budget),
            AnyMixture::Multiclass(m) => instance_fingerprint(m, &self.point, budget),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.point.dim() != self.mixture.dim() {
            return Err(Error::DimensionMismatch { expected: self.mixture.dim(), got: self.point.dim() });
        }
        if !self.point.x.iter().all(|v| v.is_finite()) {
            return Err(Error::Parse("point contains non-finite coordinates".into()));
        }
        if let AnyMixture::Multiclass(m) = &self.mixture {
            let k = m.classifiers()[0].num_classes();
            if let Some(h) = m.classifiers().iter().find(|h| h.num_classes() != k) {
                return Err(Error::Parse(format!("classifiers disagree on class count: {k} vs {}", h.num_classes())));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let classifiers = match &self.mixture {
            AnyMixture::Linear(m) => serde_json::to_value(m.classifiers()),
            AnyMixture::Multiclass(m) => serde_json::to_value(m.classifiers()),
        }
        .expect("classifiers serialize");
        let file = InstanceFile {
            kind: self.mixture.kind(),
            d: self.mixture.dim(),
            k: self.mixture.num_classes(),
            classifiers,
            weights: self.mixture.weights().to_vec(),
            point: self.point.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        text.parse().map_err(|e: Error| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => Error::Parse(format!("{}: {other}", path.display())),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| io_error(path, e))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn located(e: serde_json::Error) -> Error {
    // serde_json appends its own " at line L column C"; lead with it instead.
    let msg = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    let msg = msg.strip_suffix(&suffix).unwrap_or(&msg);
    Error::Parse(format!("line {} column {}: {msg}", e.line(), e.column()))
}

impl FromStr for Instance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s).map_err(located)?;
        let mixture = match file.kind {
            InstanceKind::BinaryLinear => {
                let hs: Vec<LinearClassifier> =
                    serde_json::from_value(file.classifiers).map_err(|e| Error::Parse(format!("classifiers: {e}")))?;
                AnyMixture::Linear(Mixture::new(hs, file.weights)?)
            }
            InstanceKind::Multiclass => {
                let hs: Vec<MulticlassModel> =
                    serde_json::from_value(file.classifiers).map_err(|e| Error::Parse(format!("classifiers: {e}")))?;
                AnyMixture::Multiclass(Mixture::new(hs, file.weights)?)
            }
        };
        let instance = Instance { mixture, point: file.point };
        instance.validate()?;
        if file.d != instance.mixture.dim() {
            return Err(Error::Parse(format!(
                "header says d = {} but classifiers have d = {}",
                file.d,
                instance.mixture.dim()
            )));
        }
        if file.k != instance.mixture.num_classes() {
            return Err(Error::Parse(format!(
                "header says k = {} but classifiers have k = {}",
                file.k,
                instance.mixture.num_classes()
            )));
        }
        Ok(instance)
    }
}

pub fn report_to_json(report: &LatticeReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn report_from_json(s: &str) -> Result<LatticeReport> {
    serde_json::from_str(s).map_err(located)
}

/// Borrows the binary linear mixture of an instance, or refuses.
pub fn expect_linear(instance: &Instance) -> Result<(&Mixture<LinearClassifier>, &LabeledPoint)> {
    match &instance.mixture {
        AnyMixture::Linear(m) => Ok((m, &instance.point)),
        AnyMixture::Multiclass(_) => {
            Err(Error::ContractViolation("this operation needs a binary linear mixture".into()))
        }
    }
}
