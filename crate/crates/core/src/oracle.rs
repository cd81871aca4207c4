//! Desk-scale ground truth: membership tests for vulnerability regions,
//! Apriori-style enumeration of the adversarial lattice, and certifiers for
//! attack outcomes.
//!
//! Index sets are handled internally as bitmasks over `m <= 31` classifiers.
//! A region is feasible when some witness in the budget ball strictly fools
//! every member (margin below `-1e-9`); regions that are only nonempty on a
//! boundary count as infeasible.

use serde::{Deserialize, Serialize};

use crate::attacks::MulticlassSrh;
use crate::diff::{class_index, select_target, DifferentiableClassifier};
use crate::error::{Error, Result};
use crate::model::{
    check_binary_label, check_dim, instance_fingerprint, AttackBudget, AttackOutcome, LabeledPoint, LinearClassifier,
    Mixture, Norm, NUMERIC_ZERO,
};
use crate::optim::{find_intersection, lemma1_params, pgd_minimize, PgdConfig, EXACT_ZERO};
use crate::synth::derive_seed;

pub const DEFAULT_MAX_M: usize = 16;

/// Tolerance when comparing scores.
pub const SCORE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionStatus {
    pub indices: Vec<usize>,
    pub feasible: bool,
    pub witness: Option<Vec<f64>>,
    /// `false` when the status was inferred by pruning rather than tested.
    pub tested: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    pub m: usize,
    pub weights: Vec<f64>,
    /// All `2^m` subsets, ordered by cardinality then lexicographically.
    pub statuses: Vec<RegionStatus>,
    /// Nonempty feasible sets with no feasible one-element extension.
    pub maximal_regions: Vec<Vec<usize>>,
    pub optimal_score: f64,
    pub optimal_witness: Vec<f64>,
    pub fingerprint: u64,
    /// `false` for multi-class mixtures, where membership is best effort.
    pub certified: bool,
}

impl LatticeReport {
    pub fn status(&self, indices: &[usize]) -> Option<&RegionStatus> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        self.statuses.iter().find(|s| s.indices == sorted)
    }

    pub fn is_feasible(&self, indices: &[usize]) -> bool {
        self.status(indices).is_some_and(|s| s.feasible)
    }

    /// Some nonempty region is feasible.
    pub fn anything_vulnerable(&self) -> bool {
        self.statuses.iter().any(|s| s.feasible && !s.indices.is_empty())
    }

    /// Supersets of infeasible sets that are marked feasible.
    pub fn downward_closure_violations(&self) -> usize {
        let feasible: Vec<u32> = self.statuses.iter().filter(|s| s.feasible).map(|s| mask_of(&s.indices)).collect();
        let infeasible: Vec<u32> = self.statuses.iter().filter(|s| !s.feasible).map(|s| mask_of(&s.indices)).collect();
        feasible.iter().filter(|&&f| infeasible.iter().any(|&i| i & !f == 0)).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub effective: bool,
    /// `None` when the report is not certified (multi-class mixtures).
    pub maximal: Option<bool>,
    pub optimal: Option<bool>,
}

pub(crate) fn mask_of(indices: &[usize]) -> u32 {
    indices.iter().fold(0, |m, &i| m | (1 << i))
}

fn indices_of(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

/// All masks over `m` bits ordered by (cardinality, lexicographic indices).
fn canonical_order(m: usize) -> Vec<u32> {
    let mut masks: Vec<u32> = (0..(1u32 << m)).collect();
    masks.sort_by(|a, b| a.count_ones().cmp(&b.count_ones()).then_with(|| indices_of(*a).cmp(&indices_of(*b))));
    masks
}

/// Membership test for `V(indices)`: `lemma1_params` PGD from `x`, followed by
/// longer `lemma1_params` schedules when it falls short.
pub fn membership(
    indices: &[usize],
    mix: &Mixture<LinearClassifier>,
    point: &LabeledPoint,
    budget: &AttackBudget,
) -> Result<RegionStatus> {
    check_binary_label(point.y)?;
    check_dim(mix.dim(), point.dim())?;
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let witness =
        search_linear(mix, point, budget, &sorted, &[vec![0.0; mix.dim()]], OracleConfig::default().refinements)?;
    Ok(RegionStatus { indices: sorted, feasible: witness.is_some(), witness, tested: true })
}

/// Witness per subset mask, `None` when infeasible or untested.
type Witnesses = Vec<Option<Vec<f64>>>;

struct Enumerator<'a, F, S> {
    m: usize,
    dim: usize,
    /// Runs the intersection finder on `mask` from the given starts.
    search: F,
    /// Whether a perturbation strictly fools every member of `mask`.
    fools: S,
    weights: &'a [f64],
}

impl<F, S> Enumerator<'_, F, S>
where
    F: FnMut(u32, &[Vec<f64>]) -> Result<Option<Vec<f64>>>,
    S: Fn(u32, &[f64]) -> bool,
{
    /// Explores subsets level by level. A set is tested only when all of its
    /// immediate subsets are feasible. Known witnesses are tried first, then
    /// PGD from `x`, then PGD warm-started at each immediate subset's witness.
    fn run(mut self) -> Result<(Witnesses, Vec<bool>)> {
        let n = 1usize << self.m;
        let mut witness: Vec<Option<Vec<f64>>> = vec![None; n];
        let mut tested = vec![false; n];
        witness[0] = Some(vec![0.0; self.dim]);
        tested[0] = true;
        let mut found: Vec<u32> = vec![0];

        for mask in canonical_order(self.m).into_iter().skip(1) {
            let subsets: Vec<u32> = indices_of(mask).into_iter().map(|i| mask & !(1u32 << i)).collect();
            if subsets.iter().any(|&s| witness[s as usize].is_none()) {
                continue;
            }
            tested[mask as usize] = true;
            if let Some(w) = found
                .iter()
                .filter(|&&f| f & mask == mask)
                .find_map(|&f| witness[f as usize].as_ref().filter(|w| (self.fools)(mask, w)))
            {
                witness[mask as usize] = Some(w.clone());
                continue;
            }
            let zero = vec![0.0; self.dim];
            let mut starts: Vec<&[f64]> = vec![&zero];
            for &s in &subsets {
                if s != 0 {
                    starts.push(witness[s as usize].as_deref().expect("checked above"));
                }
            }
            let starts: Vec<Vec<f64>> = starts.into_iter().map(<[f64]>::to_vec).collect();
            if let Some(w) = (self.search)(mask, &starts)? {
                witness[mask as usize] = Some(w);
                found.push(mask);
            }
        }
        Ok((witness, tested))
    }

    fn report(self, fingerprint: u64, certified: bool) -> Result<LatticeReport> {
        let m = self.m;
        let weights = self.weights.to_vec();
        let (witness, tested) = self.run()?;
        let mut statuses = Vec::with_capacity(witness.len());
        let mut maximal_regions = Vec::new();
        let mut optimal = (0.0, 0u32);
        for mask in canonical_order(m) {
            let feasible = witness[mask as usize].is_some();
            let indices = indices_of(mask);
            if feasible && mask != 0 {
                let extendable =
                    (0..m).filter(|j| mask & (1 << j) == 0).any(|j| witness[(mask | (1 << j)) as usize].is_some());
                if !extendable {
                    maximal_regions.push(indices.clone());
                }
                let score = indices.iter().fold(0.0, |acc, &i| acc + weights[i]);
                if score > optimal.0 + SCORE_TOLERANCE {
                    optimal = (score, mask);
                }
            }
            statuses.push(RegionStatus {
                indices,
                feasible,
                witness: witness[mask as usize].clone(),
                tested: tested[mask as usize],
            });
        }
        let optimal_witness = witness[optimal.1 as usize].clone().expect("optimum is feasible");
        Ok(LatticeReport {
            m,
            weights,
            statuses,
            maximal_regions,
            optimal_score: optimal.0,
            optimal_witness,
            fingerprint,
            certified,
        })
    }
}

fn check_cap(m: usize, max_m: usize) -> Result<()> {
    if m > max_m || m > 31 {
        return Err(Error::SizeCap { m, max_m: max_m.min(31) });
    }
    Ok(())
}

fn unit_margins(mix: &Mixture<LinearClassifier>, point: &LabeledPoint) -> Vec<LinearClassifier> {
    let _ = point;
    mix.classifiers().iter().map(LinearClassifier::unit_normalized).collect()
}

/// `lemma1_params` with `4^level` times the steps (and so half the step
/// size per level).
fn refined(base: &PgdConfig, level: u32) -> PgdConfig {
    PgdConfig { steps: base.steps << (2 * level), step_size: base.step_size / f64::from(1u32 << level), ..base.clone() }
}

/// Intersection search used by the enumerator: `lemma1_params` PGD from every start,
/// then progressively longer `lemma1_params` schedules continued from the lowest
/// SRH point seen.
fn search_linear(
    mix: &Mixture<LinearClassifier>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    indices: &[usize],
    starts: &[Vec<f64>],
    refinements: u32,
) -> Result<Option<Vec<f64>>> {
    let base = lemma1_params(mix.len(), budget);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts {
        let hit = find_intersection(mix, point, indices, budget, &base, start, 0)?;
        if hit.witness.is_some() {
            return Ok(hit.witness);
        }
        if best.as_ref().is_none_or(|(v, _)| hit.best_value < *v) {
            best = Some((hit.best_value, hit.best_delta));
        }
    }
    let Some((_, mut from)) = best else { return Ok(None) };
    for level in 1..=refinements {
        let hit = find_intersection(mix, point, indices, budget, &refined(&base, level), &from, 0)?;
        if hit.witness.is_some() {
            return Ok(hit.witness);
        }
        from = hit.best_delta;
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Largest mixture the enumerator accepts.
    pub max_m: usize,
    /// Number of 4x-longer schedules tried after plain `lemma1_params` PGD fails.
    pub refinements: u32,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { max_m: DEFAULT_MAX_M, refinements: 6 }
    }
}

/// Enumerates the adversarial lattice of a binary linear mixture.
pub fn enumerate_lattice(
    mix: &Mixture<LinearClassifier>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    max_m: usize,
) -> Result<LatticeReport> {
    enumerate_lattice_with(mix, point, budget, &OracleConfig { max_m, ..OracleConfig::default() })
}

pub fn enumerate_lattice_with(
    mix: &Mixture<LinearClassifier>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    config: &OracleConfig,
) -> Result<LatticeReport> {
    check_cap(mix.len(), config.max_m)?;
    check_binary_label(point.y)?;
    check_dim(mix.dim(), point.dim())?;
    let units = unit_margins(mix, point);
    let fools = |mask: u32, w: &[f64]| {
        let xp = point.shifted(w);
        budget.contains(w) && indices_of(mask).iter().all(|&i| units[i].margin(&xp, point.y) < -NUMERIC_ZERO)
    };
    let search = |mask: u32, starts: &[Vec<f64>]| {
        search_linear(mix, point, budget, &indices_of(mask), starts, config.refinements)
    };
    Enumerator { m: mix.len(), dim: mix.dim(), search, fools, weights: mix.weights() }
        .report(instance_fingerprint(mix, point, budget), true)
}

/// Best-effort lattice for multi-class mixtures: PGD on the targeted SRH
/// with the given configuration. The report is marked uncertified.
pub fn enumerate_lattice_multiclass<C: DifferentiableClassifier>(
    mix: &Mixture<C>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    max_m: usize,
    cfg: &PgdConfig,
) -> Result<LatticeReport> {
    check_cap(mix.len(), max_m)?;
    check_dim(mix.dim(), point.dim())?;
    let mut y = 0;
    for h in mix.classifiers() {
        y = class_index(point.y, h.num_classes())?;
    }
    let fools = |mask: u32, w: &[f64]| {
        let xp = point.shifted(w);
        budget.contains(w) && indices_of(mask).iter().all(|&i| mix.classifiers()[i].misclassifies(&xp, point.y))
    };
    let search = |mask: u32, starts: &[Vec<f64>]| -> Result<Option<Vec<f64>>> {
        for (k, start) in starts.iter().enumerate() {
            let xp = point.shifted(start);
            let members = indices_of(mask)
                .into_iter()
                .map(|i| select_target(&mix.classifiers()[i], &xp, y).map(|t| (&mix.classifiers()[i], t)))
                .collect::<Result<Vec<_>>>()?;
            let objective = MulticlassSrh { members, x: &point.x, y };
            let run = pgd_minimize(&objective, budget, cfg, start, derive_seed(u64::from(mask), k as u64))?;
            if run.best_value <= EXACT_ZERO && fools(mask, &run.best_delta) {
                return Ok(Some(run.best_delta));
            }
        }
        Ok(None)
    };
    Enumerator { m: mix.len(), dim: mix.dim(), search, fools, weights: mix.weights() }
        .report(instance_fingerprint(mix, point, budget), false)
}

impl LatticeReport {
    /// Folds in an externally found perturbation. If `delta` lies in the
    /// ball and strictly fools the set `S`, every subset of `S` is proven
    /// feasible and gets `delta` as witness; maximal regions and the optimum
    /// are then recomputed. Returns whether the report changed.
    pub fn absorb_witness<F>(&mut self, delta: &[f64], strictly_fooled: F) -> bool
    where
        F: Fn(usize, &[f64]) -> bool,
    {
        let fooled = (0..self.m).filter(|&i| strictly_fooled(i, delta)).fold(0u32, |a, i| a | (1 << i));
        let mut changed = false;
        for s in &mut self.statuses {
            let mask = mask_of(&s.indices);
            if !s.feasible && mask & fooled == mask {
                s.feasible = true;
                s.witness = Some(delta.to_vec());
                changed = true;
            }
        }
        if changed {
            self.refresh_summary();
        }
        changed
    }

    fn refresh_summary(&mut self) {
        let feasible: std::collections::HashSet<u32> =
            self.statuses.iter().filter(|s| s.feasible).map(|s| mask_of(&s.indices)).collect();
        self.maximal_regions.clear();
        self.optimal_score = 0.0;
        let mut best = 0usize;
        for (k, s) in self.statuses.iter().enumerate() {
            let mask = mask_of(&s.indices);
            if !s.feasible || mask == 0 {
                continue;
            }
            if !(0..self.m).any(|j| mask & (1 << j) == 0 && feasible.contains(&(mask | (1 << j)))) {
                self.maximal_regions.push(s.indices.clone());
            }
            let score = s.indices.iter().fold(0.0, |acc, &i| acc + self.weights[i]);
            if score > self.optimal_score + SCORE_TOLERANCE {
                self.optimal_score = score;
                best = k;
            }
        }
        self.optimal_witness = self.statuses[best].witness.clone().expect("feasible");
    }
}

/// Effectiveness, maximality and optimality of `outcome` against `report`.
///
/// The outcome's own perturbation is evidence too: for binary linear
/// mixtures it is verified and folded into a copy of the report first, so a
/// region the enumerator missed but the attack demonstrably reached is not
/// held against the attack.
pub fn certify(outcome: &AttackOutcome, report: &LatticeReport) -> Result<Certificate> {
    certify_with(outcome, report, |_, _| false)
}

/// [`certify`] for a binary linear mixture, folding in the outcome's witness.
pub fn certify_linear(
    outcome: &AttackOutcome,
    report: &LatticeReport,
    mix: &Mixture<LinearClassifier>,
    point: &LabeledPoint,
    budget: &AttackBudget,
) -> Result<Certificate> {
    if outcome.fingerprint != instance_fingerprint(mix, point, budget) {
        return Err(Error::ContractViolation("outcome does not belong to this instance".into()));
    }
    let units: Vec<LinearClassifier> = mix.classifiers().iter().map(LinearClassifier::unit_normalized).collect();
    let in_ball = budget.contains(&outcome.delta);
    certify_with(outcome, report, |i, d| in_ball && units[i].margin(&point.shifted(d), point.y) < -NUMERIC_ZERO)
}

fn certify_with<F>(outcome: &AttackOutcome, report: &LatticeReport, strictly_fooled: F) -> Result<Certificate>
where
    F: Fn(usize, &[f64]) -> bool,
{
    if outcome.fingerprint != report.fingerprint {
        return Err(Error::ContractViolation("outcome and lattice report describe different instances".into()));
    }
    let mut merged;
    let report = if report.certified {
        merged = report.clone();
        merged.absorb_witness(&outcome.delta, strictly_fooled);
        &merged
    } else {
        report
    };
    let vulnerable = report.anything_vulnerable();
    let effective = !vulnerable || !outcome.fooled.is_empty();
    if !report.certified {
        return Ok(Certificate { effective, maximal: None, optimal: None });
    }
    let maximal = !vulnerable || report.maximal_regions.contains(&outcome.fooled);
    let optimal = (outcome.score - report.optimal_score).abs() <= SCORE_TOLERANCE;
    Ok(Certificate { effective, maximal: Some(maximal), optimal: Some(optimal) })
}

/// Dense grid search over the budget ball of a 2-D binary linear mixture.
/// Returns, for every mask, whether some grid point strictly fools all of
/// its members. The grid spacing is `epsilon / steps_per_radius`.
pub fn grid_feasibility(
    mix: &Mixture<LinearClassifier>,
    point: &LabeledPoint,
    budget: &AttackBudget,
    steps_per_radius: usize,
) -> Result<Vec<bool>> {
    if mix.dim() != 2 {
        return Err(Error::ContractViolation(format!("grid search needs d = 2, got d = {}", mix.dim())));
    }
    check_cap(mix.len(), 20)?;
    check_binary_label(point.y)?;
    check_dim(2, point.dim())?;
    let m = mix.len();
    let units = unit_margins(mix, point);
    let h = budget.epsilon() / steps_per_radius as f64;
    let n = steps_per_radius as i64;
    let mut seen = vec![false; 1 << m];
    let y = point.y as f64;
    // Precompute the margin as an affine function of the grid offsets.
    let coeffs: Vec<(f64, f64, f64)> =
        units.iter().map(|u| (y * u.theta()[0] * h, y * u.theta()[1] * h, u.margin(&point.x, point.y))).collect();
    for i in -n..=n {
        for j in -n..=n {
            if budget.norm() == Norm::L2 && i * i + j * j > n * n {
                continue;
            }
            let (fi, fj) = (i as f64, j as f64);
            let mut mask = 0usize;
            for (k, (a, b, c)) in coeffs.iter().enumerate() {
                if a * fi + b * fj + c < -NUMERIC_ZERO {
                    mask |= 1 << k;
                }
            }
            seen[mask] = true;
        }
    }
    // Close under subsets.
    for mask in (0..(1usize << m)).rev() {
        if seen[mask] {
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    seen[mask & !(1 << k)] = true;
                }
            }
        }
    }
    Ok(seen)
}

/// Masks on which the lattice report and the grid disagree.
pub fn grid_disagreements(report: &LatticeReport, grid: &[bool]) -> Vec<Vec<usize>> {
    report
        .statuses
        .iter()
        .filter(|s| s.feasible != grid[mask_of(&s.indices) as usize])
        .map(|s| s.indices.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fooled_set, zero_one_loss_mixture};

    fn lin(theta: &[f64], b: f64) -> LinearClassifier {
        LinearClassifier::new(theta.to_vec(), b).unwrap()
    }

    fn origin() -> LabeledPoint {
        LabeledPoint::new(vec![0.0, 0.0], -1)
    }

    fn config_c() -> Mixture<LinearClassifier> {
        Mixture::new(vec![lin(&[1.0, 0.0], -0.5), lin(&[-1.0, 0.0], -0.5)], vec![0.6, 0.4]).unwrap()
    }

    fn config_d() -> Mixture<LinearClassifier> {
        Mixture::new(vec![lin(&[1.0, 0.0], -0.5), lin(&[0.0, 1.0], -0.5)], vec![0.6, 0.4]).unwrap()
    }

    #[test]
    fn empty_set_is_the_whole_ball() {
        let b = AttackBudget::l2(0.8).unwrap();
        let s = membership(&[], &config_c(), &origin(), &b).unwrap();
        assert!(s.feasible);
        assert_eq!(s.witness, Some(vec![0.0, 0.0]));
    }

    #[test]
    fn disjoint_pair_is_infeasible() {
        let b = AttackBudget::l2(0.8).unwrap();
        assert!(!membership(&[0, 1], &config_c(), &origin(), &b).unwrap().feasible);
        assert!(membership(&[1], &config_c(), &origin(), &b).unwrap().feasible);
    }

    #[test]
    fn intersecting_pair_has_valid_witness() {
        let b = AttackBudget::l2(0.8).unwrap();
        let s = membership(&[1, 0], &config_d(), &origin(), &b).unwrap();
        assert_eq!(s.indices, vec![0, 1]);
        let w = s.witness.unwrap();
        assert!(b.contains(&w));
        assert_eq!(fooled_set(&config_d(), &origin(), &w).unwrap(), vec![0, 1]);
        assert!(w[0] > 0.5 && w[1] > 0.5 && w[0] < 0.5 + 0.1 && w[1] < 0.5 + 0.1);
    }

    #[test]
    fn lattice_examples() {
        let b = AttackBudget::l2(0.8).unwrap();
        let rc = enumerate_lattice(&config_c(), &origin(), &b, DEFAULT_MAX_M).unwrap();
        assert_eq!(rc.maximal_regions, vec![vec![0], vec![1]]);
        assert_eq!(rc.optimal_score, 0.6);
        assert_eq!(rc.statuses.len(), 4);
        assert_eq!(zero_one_loss_mixture(&config_c(), &origin(), &rc.optimal_witness).unwrap(), 0.6);

        let rd = enumerate_lattice(&config_d(), &origin(), &b, DEFAULT_MAX_M).unwrap();
        assert_eq!(rd.maximal_regions, vec![vec![0, 1]]);
        assert_eq!(rd.optimal_score, 1.0);

        let robust = Mixture::uniform(vec![lin(&[1.0, 0.0], -2.0), lin(&[0.0, 1.0], -2.0)]).unwrap();
        let ra = enumerate_lattice(&robust, &origin(), &AttackBudget::l2(1.0).unwrap(), DEFAULT_MAX_M).unwrap();
        assert!(ra.maximal_regions.is_empty());
        assert_eq!(ra.optimal_score, 0.0);
        assert!(!ra.anything_vulnerable());
        // {0,1} was pruned, never tested.
        assert!(!ra.status(&[0, 1]).unwrap().tested);
    }

    #[test]
    fn statuses_are_in_canonical_order() {
        let hs = (0..3).map(|i| lin(&[1.0, i as f64], -0.3)).collect();
        let mix = Mixture::uniform(hs).unwrap();
        let r = enumerate_lattice(&mix, &origin(), &AttackBudget::l2(1.0).unwrap(), 16).unwrap();
        let order: Vec<Vec<usize>> = r.statuses.iter().map(|s| s.indices.clone()).collect();
        assert_eq!(order, vec![vec![], vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 1, 2]]);
    }

    #[test]
    fn cap_is_enforced() {
        let hs: Vec<_> = (0..20).map(|i| lin(&[1.0, i as f64], -0.3)).collect();
        let mix = Mixture::uniform(hs).unwrap();
        let err = enumerate_lattice(&mix, &origin(), &AttackBudget::l2(1.0).unwrap(), DEFAULT_MAX_M).unwrap_err();
        assert!(matches!(err, Error::SizeCap { m: 20, max_m: 16 }));
    }

    #[test]
    fn certify_checks_fingerprint() {
        let b = AttackBudget::l2(0.8).unwrap();
        let r = enumerate_lattice(&config_d(), &origin(), &b, 16).unwrap();
        let out = AttackOutcome {
            delta: vec![0.0, 0.0],
            fooled: vec![],
            score: 0.0,
            iterations_used: 0,
            fingerprint: r.fingerprint ^ 1,
            trace: vec![],
        };
        assert!(certify(&out, &r).is_err());
        let ok = AttackOutcome { fingerprint: r.fingerprint, ..out };
        let c = certify(&ok, &r).unwrap();
        assert_eq!(c, Certificate { effective: false, maximal: Some(false), optimal: Some(false) });
    }

    #[test]
    fn grid_agrees_on_canonical_configs() {
        let b = AttackBudget::l2(0.8).unwrap();
        for mix in [config_c(), config_d()] {
            let r = enumerate_lattice(&mix, &origin(), &b, 16).unwrap();
            let g = grid_feasibility(&mix, &origin(), &b, 200).unwrap();
            assert!(grid_disagreements(&r, &g).is_empty());
        }
    }
}
