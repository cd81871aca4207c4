//! Attacks on randomized mixtures of classifiers.
//!
//! A mixture draws one of `m` classifiers at random for each query, so an
//! adversary can fool it only in expectation. This crate provides
//!
//! * the lattice climber (binary linear and differentiable multi-class
//!   variants), which grows the set of simultaneously fooled classifiers one
//!   member at a time;
//! * expected-margin PGD and per-classifier boundary stepping baselines;
//! * a brute-force lattice enumerator that certifies attack outcomes on small
//!   instances;
//! * synthetic instance generators, JSON/CSV formats and experiment drivers.

pub mod attacks;
pub mod diff;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod synth;

pub use attacks::{
    apgd, arc, lca_binary_linear, lca_multiclass, run_attack_linear, run_attack_multiclass, AttackKind, AttackSpec,
    Attackable, ClassifierOrder,
};
pub use diff::{DifferentiableClassifier, MlpClassifier, MulticlassModel, SoftmaxLinearClassifier};
pub use error::{Error, Result};
pub use model::{
    fooled_set, project_to_ball, srh, zero_one_loss_mixture, AttackBudget, AttackOutcome, Classifier, LabeledPoint,
    LinearClassifier, Mixture, Norm, TraceStep,
};
pub use optim::{lemma1_params, pgd_minimize, PgdConfig, StepRule};
pub use oracle::{certify, enumerate_lattice, Certificate, LatticeReport, RegionStatus};
