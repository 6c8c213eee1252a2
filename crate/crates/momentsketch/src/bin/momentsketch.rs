//! Batch experiment front-end for the moment-sketch library.
//!
//! Subcommands cover the full pipeline: `gen-data` (synthetic corpora),
//! `learn` (activation sums, GMM / MLR density ratios), `cluster`, `sample`
//! (rejection sampling from a learned density), `eval` (Monte-Carlo metrics
//! against ground-truth parameters), `bench` (convergence CSV), and
//! `selftest`.  All outputs are JSON (CSV for `bench`) and byte-identical
//! for a fixed seed regardless of `--threads`; `--no-timestamp` suppresses
//! the only non-deterministic field.
//!
//! Exit codes: 0 success; 1 usage error (bad flags, malformed input files,
//! schema violations — the offending path is named); 2 runtime failure with
//! a JSON diagnostic on standard error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use momentsketch::circuit::{CircuitBuilder, CircuitInput, Value};
use momentsketch::learners::{
    cluster_gmm, hypothesis_eval_batch, learn_activation_sum, learn_gmm_density,
    learn_mlr_density, rejection_sample, ClusterModel, DensityModel, Hypothesis, LearnerConfig,
};
use momentsketch::models::{
    gmm_true_ratio, mlr_true_ratio, sample_activation_examples, sample_gmm, sample_mlr,
    ModelParams,
};
use momentsketch::oracle::{dense_ext_hermite, exact_query};
use momentsketch::rng::{derive_seed, rng_from};
use momentsketch::sketch::{
    build_sketch, required_orders, sketch_reconstruct_dense, MomentStream,
};
use momentsketch::tensor::outer_power;

#[derive(Parser)]
#[command(name = "momentsketch", disable_help_subcommand = true)]
#[command(about = "Implicit moment-tensor sketching and its learners")]
struct Cli {
    /// Worker threads for parallel reductions (results are identical for
    /// any value).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit the timestamp field from outputs (used by determinism tests).
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from ground-truth parameters.
    GenData {
        #[arg(long, value_enum)]
        model: ModelKind,
        /// Ground-truth parameter JSON ({"model": "gmm" | "mlr" | "activation", ...}).
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model to a dataset.
    Learn {
        #[arg(long, value_enum)]
        task: TaskKind,
        #[arg(long)]
        data: PathBuf,
        /// Run configuration JSON; missing fields take documented defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster spherical-mixture samples.
    Cluster {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: usize,
        /// Minimum component mean separation.
        #[arg(long)]
        s: f64,
        #[arg(long)]
        wmin: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rejection-sample points from a learned density model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo metrics of a fitted model against ground truth.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricKind,
        /// Monte-Carlo evaluation points.
        #[arg(long, default_value_t = 2000)]
        mc: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark suites (CSV output).
    Bench {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// In-process correctness checks.
    Selftest {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Gmm,
    Mlr,
    Activation,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskKind {
    Activations,
    GmmDensity,
    MlrDensity,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricKind {
    L1Ratio,
    L2Function,
    ClusterAccuracy,
}

/// All scientific knobs in one place; every field has a default and the
/// whole record is embedded verbatim in output files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    /// Draws averaged per sketch stage.
    n_draws: usize,
    /// Component count k.
    k: usize,
    /// Target accuracy ε.
    eps: f64,
    /// Activation-coefficient floor δ.
    delta: f64,
    /// Activation truncation-degree cap.
    n_cap: usize,
    /// Activation spec for `learn --task activations`.
    activation: momentsketch::models::Activation,
    /// MLR label-noise σ.
    sigma: f64,
    /// Optional MLR regression-norm bound B.
    b_bound: Option<f64>,
    /// Optional GMM mean-norm bound R.
    r_bound: Option<f64>,
    /// Optional clustering statistic order t (even).
    t_order: Option<usize>,
    /// Library-level constants (bank sizes, truncation constants, caps).
    learner: LearnerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_draws: 100_000,
            k: 2,
            eps: 0.2,
            delta: 1e-8,
            n_cap: 8,
            activation: momentsketch::models::Activation::Relu,
            sigma: 0.5,
            b_bound: None,
            r_bound: None,
            t_order: None,
            learner: LearnerConfig::default(),
        }
    }
}

/// Dataset container written by `gen-data`: unlabeled rows for GMM, rows
/// with the label appended as the last column for MLR/activation.
#[derive(Serialize, Deserialize)]
struct Dataset {
    kind: String,
    dim: usize,
    seed: u64,
    samples: Vec<Vec<f64>>,
}

enum Failure {
    /// Bad flags or malformed/ill-typed input files → exit 1.
    Usage(String),
    /// Computation failed → exit 2 with a JSON diagnostic.
    Runtime(String),
}

impl From<momentsketch::Error> for Failure {
    fn from(e: momentsketch::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("malformed JSON in {}: {e}", path.display())))
}

fn write_output(path: &Path, mut value: serde_json::Value, no_timestamp: bool) -> Result<(), Failure> {
    if !no_timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        if let Some(map) = value.as_object_mut() {
            map.insert("timestamp_unix".into(), json!(now));
        }
    }
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| Failure::Runtime(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => read_json(p),
        None => Ok(RunConfig::default()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are success; anything else is usage.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("{}", json!({"error": format!("thread pool: {e}")}));
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("{}", json!({ "error": msg }));
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::GenData { model, params, n, seed, out } => {
            cmd_gen_data(*model, params, *n, *seed, out, cli.no_timestamp)
        }
        Command::Learn { task, data, config, seed, out } => {
            cmd_learn(*task, data, config, *seed, out, cli.no_timestamp)
        }
        Command::Cluster { data, k, s, wmin, alpha, config, seed, out } => {
            cmd_cluster(data, *k, *s, *wmin, *alpha, config, *seed, out, cli.no_timestamp)
        }
        Command::Sample { model, n, seed, out } => {
            cmd_sample(model, *n, *seed, out, cli.no_timestamp)
        }
        Command::Eval { model, truth, metric, mc, seed, out } => {
            cmd_eval(model, truth, *metric, *mc, *seed, out, cli.no_timestamp)
        }
        Command::Bench { suite, out } => cmd_bench(suite, out),
        Command::Selftest { suite } => cmd_selftest(suite),
    }
}

fn cmd_gen_data(
    model: ModelKind,
    params_path: &Path,
    n: usize,
    seed: u64,
    out: &Path,
    no_timestamp: bool,
) -> Result<(), Failure> {
    let params: ModelParams = read_json(params_path)?;
    let (kind, dim, samples) = match (&params, model) {
        (ModelParams::Gmm(p), ModelKind::Gmm) => {
            p.validate()?;
            ("gmm", p.dim(), sample_gmm(p, n, seed))
        }
        (ModelParams::Mlr(p), ModelKind::Mlr) => {
            p.validate()?;
            let rows = sample_mlr(p, n, seed)
                .into_iter()
                .map(|(mut x, y)| {
                    x.push(y);
                    x
                })
                .collect();
            ("mlr", p.dim(), rows)
        }
        (ModelParams::Activation(p), ModelKind::Activation) => {
            p.validate()?;
            let rows = sample_activation_examples(p, n, seed)
                .into_iter()
                .map(|(mut x, y)| {
                    x.push(y);
                    x
                })
                .collect();
            ("activation", p.dim(), rows)
        }
        _ => {
            return Err(Failure::Usage(format!(
                "--model does not match the \"model\" tag in {}",
                params_path.display()
            )))
        }
    };
    let ds = Dataset { kind: kind.into(), dim, seed, samples };
    write_output(out, serde_json::to_value(&ds).unwrap(), no_timestamp)
}

fn split_labeled(ds: &Dataset, what: &str) -> Result<Vec<(Vec<f64>, f64)>, Failure> {
    if ds.samples.iter().any(|r| r.len() != ds.dim + 1) {
        return Err(Failure::Usage(format!(
            "{what} data rows must have dim + 1 = {} columns (covariates then label)",
            ds.dim + 1
        )));
    }
    Ok(ds
        .samples
        .iter()
        .map(|r| (r[..ds.dim].to_vec(), r[ds.dim]))
        .collect())
}

fn cmd_learn(
    task: TaskKind,
    data_path: &Path,
    config_path: &Option<PathBuf>,
    seed: u64,
    out: &Path,
    no_timestamp: bool,
) -> Result<(), Failure> {
    let ds: Dataset = read_json(data_path)?;
    let cfg = load_config(config_path)?;
    let mut value = match task {
        TaskKind::Activations => {
            let examples = split_labeled(&ds, "activation")?;
            let h = learn_activation_sum(
                &examples,
                &cfg.activation,
                cfg.k,
                cfg.eps,
                cfg.delta,
                cfg.n_cap,
                cfg.n_draws,
                seed,
                &cfg.learner,
            )?;
            serde_json::to_value(&h).unwrap()
        }
        TaskKind::GmmDensity => {
            let dm = learn_gmm_density(
                &ds.samples,
                cfg.k,
                cfg.eps,
                cfg.n_draws,
                seed,
                cfg.r_bound,
                &cfg.learner,
            )?;
            serde_json::to_value(&dm).unwrap()
        }
        TaskKind::MlrDensity => {
            if !(cfg.sigma > 0.0) {
                return Err(Failure::Usage(format!(
                    "mlr-density requires sigma > 0 (the model class excludes σ = 0); got {}",
                    cfg.sigma
                )));
            }
            let examples = split_labeled(&ds, "mlr")?;
            let dm = learn_mlr_density(
                &examples,
                cfg.k,
                cfg.sigma,
                cfg.eps,
                cfg.n_draws,
                seed,
                cfg.b_bound,
                &cfg.learner,
            )?;
            serde_json::to_value(&dm).unwrap()
        }
    };
    value
        .as_object_mut()
        .unwrap()
        .insert("run_config".into(), serde_json::to_value(&cfg).unwrap());
    write_output(out, value, no_timestamp)
}

#[allow(clippy::too_many_arguments)]
fn cmd_cluster(
    data_path: &Path,
    k: usize,
    s: f64,
    wmin: f64,
    alpha: f64,
    config_path: &Option<PathBuf>,
    seed: u64,
    out: &Path,
    no_timestamp: bool,
) -> Result<(), Failure> {
    let ds: Dataset = read_json(data_path)?;
    let cfg = load_config(config_path)?;
    let cm = cluster_gmm(
        &ds.samples,
        k,
        s,
        wmin,
        alpha,
        cfg.t_order,
        cfg.n_draws,
        seed,
        &cfg.learner,
    )?;
    let mut value = serde_json::to_value(&cm).unwrap();
    {
        let map = value.as_object_mut().unwrap();
        // The documented clusters.json schema names t plainly.
        map.insert("t".into(), json!(cm.t_order));
        map.insert("run_config".into(), serde_json::to_value(&cfg).unwrap());
    }
    write_output(out, value, no_timestamp)
}

fn cmd_sample(
    model_path: &Path,
    n: usize,
    seed: u64,
    out: &Path,
    no_timestamp: bool,
) -> Result<(), Failure> {
    let dm: DensityModel = read_json(model_path)?;
    let cfg = LearnerConfig::default();
    let samples = rejection_sample(&dm, n, seed, &cfg)?;
    write_output(
        out,
        json!({"task": dm.task, "dim": dm.ambient_dim, "seed": seed, "samples": samples}),
        no_timestamp,
    )
}

fn cmd_eval(
    model_path: &Path,
    truth_path: &Path,
    metric: MetricKind,
    mc: usize,
    seed: u64,
    out: &Path,
    no_timestamp: bool,
) -> Result<(), Failure> {
    let truth: ModelParams = read_json(truth_path)?;
    let report = match metric {
        MetricKind::L1Ratio => {
            let dm: DensityModel = read_json(model_path)?;
            let mut rng = rng_from(seed);
            let points: Vec<Vec<f64>> = (0..mc)
                .map(|_| (0..dm.ambient_dim).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            let est = dm.eval_batch(&points)?;
            let mut total = 0.0;
            for (p, r) in points.iter().zip(&est) {
                let truth_r = match &truth {
                    ModelParams::Gmm(g) => gmm_true_ratio(g, p),
                    ModelParams::Mlr(m) => mlr_true_ratio(m, p)?,
                    ModelParams::Activation(_) => {
                        return Err(Failure::Usage(
                            "l1-ratio needs gmm or mlr ground truth".into(),
                        ))
                    }
                };
                total += (r - truth_r).abs();
            }
            json!({"metric": "l1-ratio", "l1_ratio": total / mc as f64, "mc": mc, "seed": seed})
        }
        MetricKind::L2Function => {
            let h: Hypothesis = read_json(model_path)?;
            let p = match &truth {
                ModelParams::Activation(p) => p,
                _ => {
                    return Err(Failure::Usage(
                        "l2-function needs activation ground truth".into(),
                    ))
                }
            };
            p.validate()?;
            let mut rng = rng_from(seed);
            let points: Vec<Vec<f64>> = (0..mc)
                .map(|_| (0..h.ambient_dim).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            let est = hypothesis_eval_batch(&h, &points)?;
            let mse = points
                .iter()
                .zip(&est)
                .map(|(x, v)| {
                    let f = p.eval(x);
                    (v - f) * (v - f)
                })
                .sum::<f64>()
                / mc as f64;
            json!({"metric": "l2-function", "l2_error": mse.sqrt(), "mc": mc, "seed": seed})
        }
        MetricKind::ClusterAccuracy => {
            let cm: ClusterModel = read_json(model_path)?;
            let p = match &truth {
                ModelParams::Gmm(p) => p,
                _ => {
                    return Err(Failure::Usage(
                        "cluster-accuracy needs gmm ground truth".into(),
                    ))
                }
            };
            p.validate()?;
            if p.means.len() != cm.means.len() {
                return Err(Failure::Usage(format!(
                    "truth has {} components, model has {}",
                    p.means.len(),
                    cm.means.len()
                )));
            }
            let (max_mean_err, max_weight_err) = match_clusters(p, &cm);
            json!({
                "metric": "cluster-accuracy",
                "max_mean_error": max_mean_err,
                "max_weight_error": max_weight_err,
                "seed": seed
            })
        }
    };
    write_output(out, report, no_timestamp)
}

/// Best component matching over all permutations (k is small), returning
/// (max mean distance, max weight error).
fn match_clusters(truth: &momentsketch::models::GmmParams, cm: &ClusterModel) -> (f64, f64) {
    let k = truth.means.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = (f64::INFINITY, f64::INFINITY);
    permute(&mut perm, 0, &mut |perm| {
        let mut mean_err: f64 = 0.0;
        let mut w_err: f64 = 0.0;
        for (i, &j) in perm.iter().enumerate() {
            let dist: f64 = truth.means[i]
                .iter()
                .zip(&cm.means[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            mean_err = mean_err.max(dist);
            w_err = w_err.max((truth.weights[i] - cm.weights[j]).abs());
        }
        if mean_err < best.0 {
            best = (mean_err, w_err);
        }
    });
    best
}

fn permute(perm: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == perm.len() {
        f(perm);
        return;
    }
    for j in i..perm.len() {
        perm.swap(i, j);
        permute(perm, i + 1, f);
        perm.swap(i, j);
    }
}

/// Convergence bench: a rank-2 order-3 moment tensor with unit-variance
/// noisy streams; one rank-1 query per (N, seed) cell.
fn cmd_bench(suite: &str, out: &Path) -> Result<(), Failure> {
    if suite != "sketch-convergence" {
        return Err(Failure::Usage(format!("unknown bench suite '{suite}'")));
    }
    let d = 4;
    let m = 3;
    let weights = vec![0.6, 0.4];
    let vectors = vec![vec![0.9, 0.1, 0.3, 0.1], vec![0.1, 0.8, 0.0, 0.5]];
    let u = vec![0.5, 0.5, 0.5, 0.5];
    let exact = exact_query(&weights, &vectors, m, &outer_power(&u, m).unwrap())?;

    let mut csv = String::from("N,seed,abs_error,wall_ms\n");
    for &n in &[1_000usize, 10_000, 100_000] {
        for seed in 0..5u64 {
            let start = std::time::Instant::now();
            let streams = noisy_streams(&weights, &vectors, m, 1.0);
            let sketch = build_sketch(&streams, 2, m, d, n, derive_seed(seed, 99))?;
            let recon = sketch_reconstruct_dense(&sketch)?;
            let est: f64 = recon
                .entries()
                .iter()
                .zip(outer_power(&u, m).unwrap().entries())
                .map(|(a, b)| a * b)
                .sum();
            let err = (est - exact).abs();
            let ms = start.elapsed().as_millis();
            csv.push_str(&format!("{n},{seed},{err},{ms}\n"));
        }
    }
    std::fs::write(out, csv)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", out.display())))?;
    Ok(())
}

/// Streams computing `Σ_i w_i v_i^⊗t + ε·g_1⊗…⊗g_t` with fresh standard
/// Gaussians per draw (unit-variance entrywise noise at ε = 1).
fn noisy_streams(
    weights: &[f64],
    vectors: &[Vec<f64>],
    m: usize,
    eps: f64,
) -> BTreeMap<usize, MomentStream> {
    let d = vectors[0].len();
    required_orders(m)
        .into_iter()
        .map(|t| {
            let mut b = CircuitBuilder::new();
            let comp_slots: Vec<usize> = vectors.iter().map(|_| b.vector_input()).collect();
            let noise_slots: Vec<usize> = (0..t).map(|_| b.vector_input()).collect();
            let mut total = None;
            for (i, &slot) in comp_slots.iter().enumerate() {
                let mut node = b.constant(weights[i]);
                for _ in 0..t {
                    node = b.append(node, slot);
                }
                total = Some(match total {
                    None => node,
                    Some(acc) => b.add(acc, node),
                });
            }
            let total = total.expect("at least one component");
            let mut noise = b.constant(eps);
            for &g in &noise_slots {
                noise = b.append(noise, g);
            }
            let out = b.add(total, noise);
            let circuit = b.finish(out);
            let vectors = vectors.to_vec();
            let stream = MomentStream::new(circuit, move |_, rng| {
                let mut values: Vec<Value> =
                    vectors.iter().cloned().map(Value::Vector).collect();
                for _ in 0..t {
                    values.push(Value::Vector(
                        (0..d).map(|_| StandardNormal.sample(rng)).collect(),
                    ));
                }
                CircuitInput::new(values)
            });
            (t, stream)
        })
        .collect()
}

fn cmd_selftest(suite: &str) -> Result<(), Failure> {
    let run_core = matches!(suite, "core" | "all");
    let run_oracle = matches!(suite, "oracle" | "all");
    let run_learners = matches!(suite, "learners" | "all");
    if !(run_core || run_oracle || run_learners) {
        return Err(Failure::Usage(format!(
            "unknown selftest suite '{suite}' (expected core|oracle|learners|all)"
        )));
    }
    let check = |name: &str, ok: bool| -> Result<(), Failure> {
        if ok {
            println!("ok   {name}");
            Ok(())
        } else {
            Err(Failure::Runtime(format!("selftest failed: {name}")))
        }
    };

    if run_core {
        // Exact streams reproduce a small moment tensor end to end.
        let weights = vec![1.0, 1.0];
        let vectors = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let streams = noisy_streams(&weights, &vectors, 3, 0.0);
        let s = build_sketch(&streams, 2, 3, 3, 4, 7)?;
        let recon = sketch_reconstruct_dense(&s)?;
        let exact = momentsketch::oracle::exact_moment_tensor(&weights, &vectors, 3)?;
        let diff: f64 = recon
            .entries()
            .iter()
            .zip(exact.entries())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        check("core: exact-stream sketch reconstructs M₃ ≤ 1e-8", diff <= 1e-8)?;
    }

    if run_oracle {
        let x = vec![0.3, -0.5];
        let y = vec![0.7, 0.2];
        // Dual-path agreement is self-asserted inside the oracle.
        let h = dense_ext_hermite(3, &x, &y)?;
        check("oracle: dense extended Hermite dual path", h.entries().len() == 8)?;
        let u = vec![0.2, 0.9];
        let q = exact_query(&[1.0], &[vec![0.6, 0.8]], 2, &outer_power(&u, 2).unwrap())?;
        let direct = (0.6 * 0.2 + 0.8 * 0.9f64).powi(2);
        check("oracle: rank-1 exact query", (q - direct).abs() <= 1e-12)?;
    }

    if run_learners {
        let p = momentsketch::models::GmmParams {
            means: vec![vec![0.0; 3]],
            weights: vec![1.0],
        };
        let samples = sample_gmm(&p, 30_000, 5);
        let mut cfg = LearnerConfig::default();
        cfg.n_query = 100;
        cfg.cap_calibration_draws = 2_000;
        let dm = learn_gmm_density(&samples, 1, 0.3, 5_000, 11, None, &cfg)?;
        let mut rng = rng_from(3);
        let pts: Vec<Vec<f64>> = (0..500)
            .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let vals = dm.eval_batch(&pts)?;
        let l1 = vals.iter().map(|v| (v - 1.0).abs()).sum::<f64>() / vals.len() as f64;
        check("learners: standard-Gaussian ratio ≈ 1 (L1 ≤ 0.1)", l1 <= 0.1)?;
    }

    println!("selftest '{suite}' passed");
    Ok(())
}
