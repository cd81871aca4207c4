//! `latclimb`: generate instances, run attacks, sweep angles, benchmark
//! random mixtures and enumerate vulnerability lattices.
//!
//! Exit codes: 0 success, 1 internal or numeric failure, 2 usage error,
//! 3 refusal because the lattice would be too large to enumerate.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use latclimb::experiments::{angle_grid, bench_random, sweep_angle, BenchConfig};
use latclimb::io::{report_to_json, AnyMixture, Instance};
use latclimb::oracle::{enumerate_lattice, enumerate_lattice_multiclass, DEFAULT_MAX_M};
use latclimb::synth::{canonical_config, make_angle_instance, sample_random_mixture, RandomMixtureSpec};
use latclimb::{
    linalg, run_attack_linear, run_attack_multiclass, AttackBudget, AttackKind, AttackSpec, Error, Norm, PgdConfig,
};

#[derive(Parser)]
#[command(name = "latclimb", version, about = "Attacks on randomized mixtures of classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance file.
    Gen(GenArgs),
    /// Attack the point of an instance file.
    Attack(AttackArgs),
    /// Score attacks on the two-classifier angle instance over a grid of angles.
    SweepAngle(SweepArgs),
    /// Benchmark attacks on random high-dimensional linear mixtures.
    BenchRandom(BenchArgs),
    /// Enumerate the vulnerability lattice of an instance.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Angle,
    Random,
    Canonical,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Boundary distance for `angle` instances.
    #[arg(long, default_value_t = 0.9)]
    r: f64,
    /// Angle between the normals for `angle` instances, in (0, pi).
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 256)]
    d: usize,
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = 0.5)]
    bias_mean: f64,
    #[arg(long, default_value_t = 0.5)]
    bias_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Configuration name (a, b, c or d) for `canonical` instances.
    #[arg(long)]
    name: Option<char>,
    /// Output path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct BudgetArgs {
    #[arg(long, default_value = "l2")]
    norm: Norm,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
}

impl BudgetArgs {
    fn budget(&self) -> Result<AttackBudget, Error> {
        AttackBudget::new(self.norm, self.epsilon)
    }
}

#[derive(Args)]
struct AttackArgs {
    /// Instance file.
    instance: PathBuf,
    /// lca, lca-multiclass, apgd or arc.
    #[arg(long, default_value = "lca")]
    attack: AttackKind,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Give the binary climber the `lemma1_params` schedule (many small
    /// vanilla steps) instead of the practical one.
    #[arg(long)]
    lemma1: bool,
    /// Append a result row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 0.9)]
    r: f64,
    /// Number of evenly spaced angles in (0, pi).
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Explicit comma-separated angles; overrides `--points`.
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "lca,arc")]
    attacks: Vec<AttackKind>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 256)]
    d: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    ms: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    bias_mean: f64,
    #[arg(long, default_value_t = 0.5)]
    bias_std: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "lca,arc")]
    attacks: Vec<AttackKind>,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Aggregate CSV output; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Per-trial CSV output.
    #[arg(long)]
    raw: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = DEFAULT_MAX_M)]
    max_m: usize,
    /// Lattice report (JSON) output.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Errors with the exit code they map to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SizeCap { .. } => 3,
            Error::NonFinite { .. } | Error::Io { .. } => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: 1, message: format!("{}: {e}", path.display()) }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Attack(a) => attack(a),
        Command::SweepAngle(a) => sweep(a),
        Command::BenchRandom(a) => bench(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    let (mix, point) = match a.kind {
        GenKind::Angle => {
            let theta = a
                .theta
                .ok_or_else(|| Failure { code: 2, message: "--theta is required for angle instances".into() })?;
            make_angle_instance(a.r, theta)?
        }
        GenKind::Random => sample_random_mixture(&RandomMixtureSpec::new(a.d, a.m, a.bias_mean, a.bias_std, a.seed))?,
        GenKind::Canonical => {
            let name = a
                .name
                .ok_or_else(|| Failure { code: 2, message: "--name is required for canonical instances".into() })?;
            canonical_config(name)?
        }
    };
    emit(a.out.as_deref(), &Instance::linear(mix, point).to_json())
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    }
    let bytes = w.into_inner().map_err(|e| Failure { code: 1, message: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Serialize)]
struct AttackRow<'a> {
    instance: &'a str,
    attack: &'a str,
    norm: String,
    epsilon: f64,
    seed: u64,
    score: f64,
    fooled: String,
    delta_norm: f64,
    iterations: usize,
    seconds: f64,
}

fn attack(a: AttackArgs) -> Result<(), Failure> {
    let instance = Instance::read(&a.instance)?;
    let budget = a.budget.budget()?;
    let m = instance.mixture.len();
    let mut spec = AttackSpec::with_defaults(a.attack, m, &budget, a.seed);
    if a.attack == AttackKind::LcaBinaryLinear && !a.lemma1 {
        spec = spec.with_pgd(PgdConfig::lca_default(&budget));
    }
    let start = Instant::now();
    let out = match &instance.mixture {
        AnyMixture::Linear(mix) => run_attack_linear(mix, &instance.point, &budget, &spec)?,
        AnyMixture::Multiclass(mix) => run_attack_multiclass(mix, &instance.point, &budget, &spec)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    let delta_norm = match budget.norm() {
        Norm::L2 => linalg::norm_l2(&out.delta),
        Norm::Linf => linalg::norm_linf(&out.delta),
    };
    let fooled = out.fooled.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    println!("attack      {}", a.attack);
    println!("score       {}", out.score);
    println!("fooled      [{fooled}]");
    println!("delta norm  {delta_norm}");
    println!("wall time   {seconds:.6} s");

    if let Some(path) = &a.csv {
        let row = AttackRow {
            instance: &a.instance.to_string_lossy(),
            attack: a.attack.name(),
            norm: budget.norm().to_string(),
            epsilon: budget.epsilon(),
            seed: a.seed,
            score: out.score,
            fooled,
            delta_norm,
            iterations: out.iterations_used,
            seconds,
        };
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_failure(path, e))?;
        let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        w.serialize(row).map_err(|e| io_failure(path, e))?;
        w.flush().map_err(|e| io_failure(path, e))?;
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let budget = a.budget.budget()?;
    let thetas = if a.theta.is_empty() { angle_grid(a.points) } else { a.theta.clone() };
    let result = sweep_angle(a.r, &thetas, &a.attacks, &budget, a.seed)?;
    #[derive(Serialize)]
    struct Row {
        theta: f64,
        attack: &'static str,
        score: f64,
    }
    let rows: Vec<Row> =
        result.rows.iter().map(|r| Row { theta: r.theta, attack: r.attack.name(), score: r.score }).collect();
    let critical = result.critical_angle.map_or_else(|| "none".to_string(), |t| t.to_string());
    eprintln!("critical angle: {critical}");
    let mut text = format!("# r = {}, epsilon = {}, critical_angle = {critical}\n", a.r, budget.epsilon());
    text.push_str(&to_csv(&rows)?);
    emit(a.out.as_deref(), &text)
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let budget = a.budget.budget()?;
    let cfg = BenchConfig {
        d: a.d,
        ms: a.ms.clone(),
        bias_mean: a.bias_mean,
        bias_std: a.bias_std,
        trials: a.trials,
        base_seed: a.seed,
        attacks: a.attacks.clone(),
    };
    let result = bench_random(&cfg, &budget)?;
    #[derive(Serialize)]
    struct Aggregate {
        m: usize,
        attack: &'static str,
        mean_score: f64,
        std: f64,
        trials: usize,
    }
    #[derive(Serialize)]
    struct Raw {
        m: usize,
        attack: &'static str,
        trial: usize,
        instance_seed: u64,
        attack_seed: u64,
        score: f64,
    }
    let rows: Vec<Aggregate> = result
        .rows
        .iter()
        .map(|r| Aggregate { m: r.m, attack: r.attack.name(), mean_score: r.mean, std: r.std, trials: r.trials })
        .collect();
    if let Some(path) = &a.raw {
        let raw: Vec<Raw> = result
            .trials
            .iter()
            .map(|t| Raw {
                m: t.m,
                attack: t.attack.name(),
                trial: t.trial,
                instance_seed: t.instance_seed,
                attack_seed: t.attack_seed,
                score: t.score,
            })
            .collect();
        emit(Some(path), &to_csv(&raw)?)?;
    }
    emit(a.out.as_deref(), &to_csv(&rows)?)
}

fn oracle(a: OracleArgs) -> Result<(), Failure> {
    let instance = Instance::read(&a.instance)?;
    let budget = a.budget.budget()?;
    let report = match &instance.mixture {
        AnyMixture::Linear(mix) => enumerate_lattice(mix, &instance.point, &budget, a.max_m)?,
        AnyMixture::Multiclass(mix) => {
            let cfg = PgdConfig::lca_default(&budget);
            enumerate_lattice_multiclass(mix, &instance.point, &budget, a.max_m, &cfg)?
        }
    };
    let fmt_set = |s: &[usize]| format!("{{{}}}", s.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    let regions: Vec<String> = report.maximal_regions.iter().map(|r| fmt_set(r)).collect();
    println!("maximal regions  {}", if regions.is_empty() { "none".to_string() } else { regions.join(" ") });
    println!("optimal score    {}", report.optimal_score);
    if !report.certified {
        println!("note             multi-class membership is best effort; results are not certified");
    }
    if let Some(path) = &a.out {
        emit(Some(path), &report_to_json(&report))?;
    }
    Ok(())
}
