//! Browser front end for two-dimensional linear mixtures around the origin.
//!
//! A mixture is passed as a flat list `[t1, t2, b, t1, t2, b, ...]` of
//! classifier normals and biases plus one weight per classifier; the point
//! under attack is always `x = 0` with label `-1`. Every export returns a
//! JSON string for the page to parse.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use latclimb::experiments::{angle_grid, sweep_angle};
use latclimb::oracle::enumerate_lattice;
use latclimb::synth::{canonical_config, make_angle_instance, CANONICAL_EPSILON};
use latclimb::{
    run_attack_linear, AttackBudget, AttackKind, AttackSpec, Error, LabeledPoint, LinearClassifier, Mixture, Result,
};

/// Largest mixture the page may submit; keeps the lattice small.
pub const MAX_CLASSIFIERS: usize = 8;

const ATTACKS: [AttackKind; 4] =
    [AttackKind::LcaBinaryLinear, AttackKind::LcaMulticlass, AttackKind::Apgd, AttackKind::Arc];

#[derive(Debug, Serialize)]
pub struct Plane {
    /// `[t1, t2, b]` per classifier.
    pub classifiers: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Serialize)]
pub struct AttackRow {
    pub attack: String,
    pub delta: Vec<f64>,
    pub fooled: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Serialize)]
pub struct Regions {
    pub feasible: Vec<Vec<usize>>,
    pub maximal: Vec<Vec<usize>>,
    pub optimal_score: f64,
    pub optimal_witness: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub attack: String,
    pub score: f64,
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub critical_angle: Option<f64>,
    pub points: Vec<SweepPoint>,
}

fn plane_of(mix: &Mixture<LinearClassifier>, epsilon: f64) -> Plane {
    let classifiers = mix.classifiers().iter().map(|h| [h.theta()[0], h.theta()[1], h.bias()]).collect();
    Plane { classifiers, weights: mix.weights().to_vec(), epsilon }
}

fn build(flat: &[f64], weights: &[f64]) -> Result<(Mixture<LinearClassifier>, LabeledPoint)> {
    if !flat.len().is_multiple_of(3) || flat.len() / 3 != weights.len() {
        return Err(Error::InvalidConfig(format!(
            "expected 3 numbers per classifier and one weight each, got {} numbers and {} weights",
            flat.len(),
            weights.len()
        )));
    }
    if weights.len() > MAX_CLASSIFIERS {
        return Err(Error::InvalidConfig(format!("at most {MAX_CLASSIFIERS} classifiers, got {}", weights.len())));
    }
    let hs = flat.chunks_exact(3).map(|c| LinearClassifier::new(vec![c[0], c[1]], c[2])).collect::<Result<Vec<_>>>()?;
    let total: f64 = weights.iter().sum();
    let q = weights.iter().map(|w| w / total).collect();
    Ok((Mixture::new(hs, q)?, LabeledPoint::new(vec![0.0, 0.0], -1)))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo payloads serialize")
}

/// A named starting configuration: `a`-`d` for the canonical pairs,
/// `angle` for two boundaries at distance 0.9 crossing at 60 degrees.
pub fn preset_json(name: &str) -> Result<String> {
    let plane = match name {
        "angle" => plane_of(&make_angle_instance(0.9, std::f64::consts::FRAC_PI_3)?.0, 1.0),
        _ => {
            let mut chars = name.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => plane_of(&canonical_config(c)?.0, CANONICAL_EPSILON),
                _ => return Err(Error::InvalidConfig(format!("unknown preset '{name}'"))),
            }
        }
    };
    Ok(to_json(&plane))
}

/// Runs every attack with its default parameters.
pub fn attack_json(flat: &[f64], weights: &[f64], epsilon: f64, seed: u32) -> Result<String> {
    let (mix, point) = build(flat, weights)?;
    let budget = AttackBudget::l2(epsilon)?;
    let rows = ATTACKS
        .iter()
        .map(|&kind| {
            let spec = AttackSpec::with_defaults(kind, mix.len(), &budget, u64::from(seed));
            let out = run_attack_linear(&mix, &point, &budget, &spec)?;
            Ok(AttackRow { attack: kind.name().to_string(), delta: out.delta, fooled: out.fooled, score: out.score })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(to_json(&rows))
}

/// Every jointly attackable set of classifiers and the best achievable score.
pub fn regions_json(flat: &[f64], weights: &[f64], epsilon: f64) -> Result<String> {
    let (mix, point) = build(flat, weights)?;
    let budget = AttackBudget::l2(epsilon)?;
    let report = enumerate_lattice(&mix, &point, &budget, MAX_CLASSIFIERS)?;
    let feasible =
        report.statuses.iter().filter(|s| s.feasible && !s.indices.is_empty()).map(|s| s.indices.clone()).collect();
    Ok(to_json(&Regions {
        feasible,
        maximal: report.maximal_regions,
        optimal_score: report.optimal_score,
        optimal_witness: report.optimal_witness,
    }))
}

/// Scores of the climber and boundary stepping on two boundaries at
/// distance `r` as the angle between them opens up.
pub fn sweep_json(r: f64, epsilon: f64, points: u32) -> Result<String> {
    if !(2..=200).contains(&points) {
        return Err(Error::InvalidConfig(format!("points must lie in 2..=200, got {points}")));
    }
    let budget = AttackBudget::l2(epsilon)?;
    let sweep =
        sweep_angle(r, &angle_grid(points as usize), &[AttackKind::LcaBinaryLinear, AttackKind::Arc], &budget, 0)?;
    let points = sweep
        .rows
        .into_iter()
        .map(|row| SweepPoint { theta: row.theta, attack: row.attack.name().to_string(), score: row.score })
        .collect();
    Ok(to_json(&Sweep { critical_angle: sweep.critical_angle, points }))
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn preset(name: &str) -> std::result::Result<String, JsError> {
    js(preset_json(name))
}

#[wasm_bindgen]
pub fn attack(flat: &[f64], weights: &[f64], epsilon: f64, seed: u32) -> std::result::Result<String, JsError> {
    js(attack_json(flat, weights, epsilon, seed))
}

#[wasm_bindgen]
pub fn regions(flat: &[f64], weights: &[f64], epsilon: f64) -> std::result::Result<String, JsError> {
    js(regions_json(flat, weights, epsilon))
}

#[wasm_bindgen]
pub fn sweep(r: f64, epsilon: f64, points: u32) -> std::result::Result<String, JsError> {
    js(sweep_json(r, epsilon, points))
}
