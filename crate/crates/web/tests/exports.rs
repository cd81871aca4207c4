use latclimb_web::{attack_json, preset_json, regions_json, sweep_json, MAX_CLASSIFIERS};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn flat_and_weights(plane: &Value) -> (Vec<f64>, Vec<f64>, f64) {
    let flat = plane["classifiers"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|c| c.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()))
        .collect();
    let weights = plane["weights"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    (flat, weights, plane["epsilon"].as_f64().unwrap())
}

#[test]
fn presets_round_trip_through_attacks() {
    let plane = parse(&preset_json("d").unwrap());
    let (flat, weights, eps) = flat_and_weights(&plane);
    assert_eq!((flat.len(), weights.len(), eps), (6, 2, 0.8));
    let rows = parse(&attack_json(&flat, &weights, eps, 0).unwrap());
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let lca = rows.iter().find(|r| r["attack"] == "lca").unwrap();
    assert_eq!(lca["score"], 1.0);
    assert_eq!(lca["fooled"], serde_json::json!([0, 1]));
    for r in rows {
        let d: Vec<f64> = r["delta"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert!(d.iter().map(|v| v * v).sum::<f64>().sqrt() <= eps + 1e-12);
    }
}

#[test]
fn regions_of_disjoint_pair() {
    let (flat, weights, eps) = flat_and_weights(&parse(&preset_json("c").unwrap()));
    let r = parse(&regions_json(&flat, &weights, eps).unwrap());
    assert_eq!(r["feasible"], serde_json::json!([[0], [1]]));
    assert_eq!(r["maximal"], serde_json::json!([[0], [1]]));
    assert_eq!(r["optimal_score"], 0.6);
}

#[test]
fn weights_are_normalized() {
    let r = parse(&regions_json(&[1.0, 0.0, -0.5, 0.0, 1.0, -0.5], &[3.0, 1.0], 0.8).unwrap());
    assert_eq!(r["optimal_score"], 1.0);
    let rows = parse(&attack_json(&[1.0, 0.0, -0.5, -1.0, 0.0, -0.5], &[3.0, 1.0], 0.8, 1).unwrap());
    assert_eq!(rows[0]["score"], 0.75);
}

#[test]
fn sweep_reports_critical_angle() {
    let s = parse(&sweep_json(0.9, 1.0, 10).unwrap());
    assert!((s["critical_angle"].as_f64().unwrap() - 2.0 * 0.9f64.acos()).abs() < 1e-12);
    assert_eq!(s["points"].as_array().unwrap().len(), 20);
}

#[test]
fn bad_input_is_rejected() {
    assert!(preset_json("z").is_err());
    assert!(preset_json("ab").is_err());
    assert!(attack_json(&[1.0, 0.0], &[1.0], 1.0, 0).is_err());
    assert!(attack_json(&[0.0, 0.0, -1.0], &[1.0], 1.0, 0).is_err());
    assert!(attack_json(&[1.0, 0.0, -1.0], &[1.0], -1.0, 0).is_err());
    let n = MAX_CLASSIFIERS + 1;
    assert!(regions_json(&vec![1.0; 3 * n], &vec![1.0; n], 1.0).is_err());
    assert!(sweep_json(0.9, 1.0, 1).is_err());
}
