//! Experiment drivers: the two-classifier angle sweep and the random-mixture
//! benchmark. Both are deterministic given their base seed; the benchmark
//! runs trials in parallel when the `parallel` feature is enabled.

use serde::{Deserialize, Serialize};

use crate::attacks::{run_attack_linear, AttackKind, AttackSpec};
use crate::error::{Error, Result};
use crate::model::AttackBudget;
use crate::optim::PgdConfig;
use crate::synth::{critical_angle, derive_seed, make_angle_instance, sample_random_mixture, RandomMixtureSpec};

/// `n` angles evenly spaced strictly inside `(0, pi)`: `pi * i / (n + 1)`.
pub fn angle_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| std::f64::consts::PI * i as f64 / (n + 1) as f64).collect()
}

/// Attack configuration used by the angle sweep.
pub fn angle_sweep_spec(kind: AttackKind, budget: &AttackBudget, seed: u64) -> AttackSpec {
    let spec = AttackSpec::with_defaults(kind, 2, budget, seed);
    match kind {
        AttackKind::LcaBinaryLinear | AttackKind::LcaMulticlass => spec.with_pgd(PgdConfig::angle_sweep_lca(budget)),
        _ => spec,
    }
}

/// Attack configuration used by the random-mixture benchmark.
pub fn bench_spec(kind: AttackKind, m: usize, budget: &AttackBudget, seed: u64) -> AttackSpec {
    let spec = AttackSpec::with_defaults(kind, m, budget, seed);
    match kind {
        AttackKind::LcaBinaryLinear | AttackKind::LcaMulticlass => spec.with_pgd(PgdConfig::random_mixture_lca(budget)),
        _ => spec,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleRow {
    pub theta: f64,
    pub attack: AttackKind,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSweep {
    pub r: f64,
    pub epsilon: f64,
    /// Analytic angle beyond which no common vulnerability region exists.
    pub critical_angle: Option<f64>,
    /// One row per `(theta, attack)`, in grid order then attack order.
    pub rows: Vec<AngleRow>,
}

impl AngleSweep {
    pub fn scores(&self, attack: AttackKind) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.attack == attack).map(|r| (r.theta, r.score)).collect()
    }

    /// Smallest grid angle at which `attack` no longer fools both classifiers.
    pub fn transition_angle(&self, attack: AttackKind) -> Option<f64> {
        self.scores(attack).into_iter().find(|&(_, s)| s < 1.0 - 1e-12).map(|(t, _)| t)
    }
}

/// Runs every attack on the angle instance at every grid angle.
pub fn sweep_angle(
    r: f64,
    thetas: &[f64],
    attacks: &[AttackKind],
    budget: &AttackBudget,
    seed: u64,
) -> Result<AngleSweep> {
    if thetas.is_empty() {
        return Err(Error::InvalidConfig("the angle grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(thetas.len() * attacks.len());
    for (i, &theta) in thetas.iter().enumerate() {
        let (mix, point) = make_angle_instance(r, theta)?;
        for &attack in attacks {
            let spec = angle_sweep_spec(attack, budget, derive_seed(seed, i as u64));
            let out = run_attack_linear(&mix, &point, budget, &spec)?;
            rows.push(AngleRow { theta, attack, score: out.score });
        }
    }
    let critical = match budget.norm() {
        crate::model::Norm::L2 => critical_angle(r, budget.epsilon()),
        crate::model::Norm::Linf => None,
    };
    Ok(AngleSweep { r, epsilon: budget.epsilon(), critical_angle: critical, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub d: usize,
    pub ms: Vec<usize>,
    pub bias_mean: f64,
    pub bias_std: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub attacks: Vec<AttackKind>,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.ms.is_empty() || self.ms.contains(&0) {
            return Err(Error::InvalidConfig("the m grid must be nonempty and positive".into()));
        }
        if self.attacks.is_empty() {
            return Err(Error::InvalidConfig("no attacks requested".into()));
        }
        RandomMixtureSpec::new(self.d, 1, self.bias_mean, self.bias_std, 0).validate()
    }

    /// Seed of the mixture sampled for `(m, trial)`.
    pub fn instance_seed(&self, m: usize, trial: usize) -> u64 {
        derive_seed(derive_seed(self.base_seed, m as u64), trial as u64)
    }

    /// Seed handed to `attack` on the `(m, trial)` instance.
    pub fn attack_seed(&self, m: usize, trial: usize, attack: AttackKind) -> u64 {
        derive_seed(self.instance_seed(m, trial), attack as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchTrial {
    pub m: usize,
    pub attack: AttackKind,
    pub trial: usize,
    pub instance_seed: u64,
    pub attack_seed: u64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub m: usize,
    pub attack: AttackKind,
    pub mean: f64,
    /// Population standard deviation over trials.
    pub std: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    /// Sorted by `(m, attack, trial)`.
    pub trials: Vec<BenchTrial>,
    /// Sorted by `(m, attack)`.
    pub rows: Vec<BenchRow>,
}

impl BenchResult {
    pub fn mean(&self, m: usize, attack: AttackKind) -> Option<f64> {
        self.rows.iter().find(|r| r.m == m && r.attack == attack).map(|r| r.mean)
    }
}

/// Runs (or replays) one benchmark trial from its derived seeds.
pub fn run_trial(
    cfg: &BenchConfig,
    m: usize,
    trial: usize,
    attack: AttackKind,
    budget: &AttackBudget,
) -> Result<BenchTrial> {
    let instance_seed = cfg.instance_seed(m, trial);
    let attack_seed = cfg.attack_seed(m, trial, attack);
    let spec = RandomMixtureSpec::new(cfg.d, m, cfg.bias_mean, cfg.bias_std, instance_seed);
    let (mix, point) = sample_random_mixture(&spec)?;
    let out = run_attack_linear(&mix, &point, budget, &bench_spec(attack, m, budget, attack_seed))?;
    Ok(BenchTrial { m, attack, trial, instance_seed, attack_seed, score: out.score })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs the benchmark under the given budget.
pub fn bench_random(cfg: &BenchConfig, budget: &AttackBudget) -> Result<BenchResult> {
    cfg.validate()?;
    let jobs: Vec<(usize, AttackKind, usize)> = cfg
        .ms
        .iter()
        .flat_map(|&m| cfg.attacks.iter().flat_map(move |&a| (0..cfg.trials).map(move |t| (m, a, t))))
        .collect();

    #[cfg(feature = "parallel")]
    let results: Vec<Result<BenchTrial>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(|&(m, a, t)| run_trial(cfg, m, t, a, budget)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<BenchTrial>> = jobs.iter().map(|&(m, a, t)| run_trial(cfg, m, t, a, budget)).collect();

    let mut trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    trials.sort_by_key(|t| (t.m, t.attack, t.trial));

    let mut rows: Vec<BenchRow> = Vec::new();
    for chunk in trials.chunk_by(|a, b| a.m == b.m && a.attack == b.attack) {
        let scores: Vec<f64> = chunk.iter().map(|t| t.score).collect();
        let (mean, std) = mean_std(&scores);
        rows.push(BenchRow { m: chunk[0].m, attack: chunk[0].attack, mean, std, trials: scores.len() });
    }
    Ok(BenchResult { trials, rows })
}
