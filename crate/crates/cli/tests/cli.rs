use std::path::Path;
use std::process::{Command, Output};

use latclimb::io::Instance;

fn latclimb(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latclimb")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_angle_writes_two_uniform_classifiers() {
    let dir = tempfile::tempdir().unwrap();
    let o = latclimb(&["gen", "--kind", "angle", "--r", "0.9", "--theta", "0.8", "-o", "a.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let inst = Instance::read(dir.path().join("a.json")).unwrap();
    assert_eq!(inst.mixture.len(), 2);
    assert_eq!(inst.mixture.weights(), &[0.5, 0.5]);
}

#[test]
fn gen_random_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["r1.json", "r2.json"] {
        let o = latclimb(&["gen", "--kind", "random", "--d", "256", "--m", "8", "--seed", "42", "-o", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("r1.json")).unwrap();
    let b = std::fs::read(dir.path().join("r2.json")).unwrap();
    assert_eq!(a, b);
    let inst: Instance = String::from_utf8(a).unwrap().parse().unwrap();
    assert_eq!(inst.mixture.dim(), 256);
    assert_eq!(inst.mixture.len(), 8);
}

#[test]
fn gen_rejects_out_of_range_theta() {
    let dir = tempfile::tempdir().unwrap();
    let o = latclimb(&["gen", "--kind", "angle", "--theta", "4.0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(0, pi)"), "{}", stderr(&o));
}

fn canonical(dir: &Path, name: &str) -> String {
    let file = format!("{name}.json");
    let o = latclimb(&["gen", "--kind", "canonical", "--name", name, "-o", &file], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    file
}

#[test]
fn attack_on_common_region_config_scores_one_and_appends_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = canonical(dir.path(), "d");
    for _ in 0..2 {
        let o = latclimb(&["attack", &file, "--attack", "lca", "--epsilon", "0.8", "--csv", "rows.csv"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("score       1\n"), "{}", stdout(&o));
    }
    let mut reader = csv::Reader::from_path(dir.path().join("rows.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let score = headers.iter().position(|h| h == "score").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| &r[score] == "1.0"));
}

#[test]
fn every_attack_scores_zero_when_nothing_is_reachable() {
    let dir = tempfile::tempdir().unwrap();
    let file = canonical(dir.path(), "a");
    for attack in ["lca", "lca-multiclass", "apgd", "arc"] {
        let o = latclimb(&["attack", &file, "--attack", attack, "--epsilon", "0.8"], dir.path());
        assert!(o.status.success(), "{attack}: {}", stderr(&o));
        assert!(stdout(&o).contains("score       0\n"), "{attack}: {}", stdout(&o));
    }
}

#[test]
fn unknown_attack_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = canonical(dir.path(), "d");
    let o = latclimb(&["attack", &file, "--attack", "fgsm"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_instance_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"kind\": \"binary-linear\",\n  \"d\": ]\n}\n").unwrap();
    let o = latclimb(&["attack", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.json") && stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn oracle_reports_regions_of_canonical_configs() {
    let dir = tempfile::tempdir().unwrap();
    let c = canonical(dir.path(), "c");
    let o = latclimb(&["oracle", &c, "--epsilon", "0.8", "-o", "c-report.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("maximal regions  {0} {1}"), "{}", stdout(&o));
    assert!(stdout(&o).contains("optimal score    0.6"));
    let report =
        latclimb::io::report_from_json(&std::fs::read_to_string(dir.path().join("c-report.json")).unwrap()).unwrap();
    assert_eq!(report.statuses.len(), 4);

    let d = canonical(dir.path(), "d");
    let o = latclimb(&["oracle", &d, "--epsilon", "0.8"], dir.path());
    assert!(stdout(&o).contains("maximal regions  {0,1}"), "{}", stdout(&o));
    assert!(stdout(&o).contains("optimal score    1\n"));
}

#[test]
fn oracle_refuses_oversized_mixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = latclimb(&["gen", "--kind", "random", "--d", "4", "--m", "20", "-o", "big.json"], dir.path());
    assert!(o.status.success());
    let o = latclimb(&["oracle", "big.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("2^m"), "{}", stderr(&o));
}

#[test]
fn sweep_with_single_angle_gives_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = latclimb(&["sweep-angle", "--theta", "0.5", "--attacks", "lca"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines, vec!["theta,attack,score", "0.5,lca,1.0"]);
    assert!(text.starts_with("# r = 0.9, epsilon = 1, critical_angle = 0.902"));
}

#[test]
fn bench_output_is_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["bench-random", "--d", "16", "--ms", "1,3", "--trials", "4", "--seed", "7", "--attacks", "arc,lca"];
    let a = latclimb(&[&args[..], &["-o", "a.csv", "--raw", "raw.csv"]].concat(), dir.path());
    let b = latclimb(&[&args[..], &["-o", "b.csv"]].concat(), dir.path());
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    let agg = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(agg, std::fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert_eq!(agg.lines().count(), 1 + 2 * 2);
    assert!(agg.starts_with("m,attack,mean_score,std,trials\n1,lca,"), "{agg}");

    // Replay one raw row through the library.
    let mut reader = csv::Reader::from_path(dir.path().join("raw.csv")).unwrap();
    let rec = reader.records().nth(5).unwrap().unwrap();
    let (m, trial): (usize, usize) = (rec[0].parse().unwrap(), rec[2].parse().unwrap());
    let attack: latclimb::AttackKind = rec[1].parse().unwrap();
    let cfg = latclimb::experiments::BenchConfig {
        d: 16,
        ms: vec![1, 3],
        bias_mean: 0.5,
        bias_std: 0.5,
        trials: 4,
        base_seed: 7,
        attacks: vec![latclimb::AttackKind::Arc, latclimb::AttackKind::LcaBinaryLinear],
    };
    let budget = latclimb::AttackBudget::l2(1.0).unwrap();
    let replay = latclimb::experiments::run_trial(&cfg, m, trial, attack, &budget).unwrap();
    assert_eq!(replay.score, rec[5].parse::<f64>().unwrap());
    assert_eq!(replay.instance_seed, rec[3].parse::<u64>().unwrap());
}
