//! Learning applications built on moment sketches.
//!
//! Three learners reduce to sketch builds plus sketch queries:
//!
//! * [`learn_activation_sum`] — PAC-learns `F(x) = Σ_i w_i σ(v_i·x)` from
//!   labeled examples by sketching the Hermite-coefficient tensors
//!   `M_t = E[F(x)·H_t(x,y)]/c_{σ,t}` and truncating the expansion where the
//!   coefficient tail is below `ε²/4`.
//! * [`learn_gmm_density`] / [`cluster_gmm`] — estimate the density ratio
//!   `F/G` of a spherical Gaussian mixture against the standard Gaussian,
//!   and cluster samples by a pairwise same-component statistic over a
//!   sketch of the pair-difference distribution.
//! * [`learn_mlr_density`] — estimate `F/G` for a mixture of linear
//!   regressions on `ℝ^{d+1}` via a Taylor expansion whose terms pair
//!   contracted Hermite circuits with shared sketches of `Σ_i w_i β_i^⊗m`.
//!
//! Density models support clamped evaluation and rejection sampling from a
//! calibrated acceptance cap.  Everything is deterministic in the seed: data
//! blocks, `Y` banks, and reduction trees are all derived, never ambient.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    contracted_ext_hermite_nodes, ext_hermite_circuit, ext_hermite_nodes, CircuitBuilder,
    CircuitInput, TensorCircuit, Value,
};
use crate::models::{activation_coeff, gaussian_vector, numeric_coeff, Activation};
use crate::projection::top_k_subspace;
use crate::rng::{derive_seed, rng_from};
use crate::sketch::{
    build_sketch, required_orders, MomentSketch, MomentStream, QueryEvaluator, QueryStream,
};
use crate::tensor::{ln_double_factorial, ln_factorial};
use crate::Error;

/// Coefficients smaller than this are treated as exactly zero (no sketch is
/// built, no term stored).
const COEFF_ZERO: f64 = 1e-14;

/// Tunable constants shared by the learners.  The defaults are calibrated on
/// the desk-scale harnesses; every analysis-driven "sufficiently large
/// constant" lives here rather than in code.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// `Y`-bank size `N′` used by query streams.
    pub n_query: usize,
    /// GMM truncation constant: `n₀ = ceil(c₀·ln(max(k,2)/ε))`.
    pub gmm_c0: f64,
    /// MLR truncation constant: `n₀ = smallest even ≥ c₁·σ⁻²·ln(1/ε)`.
    pub mlr_c1: f64,
    /// Gaussian draws used to calibrate the acceptance cap quantile.
    pub cap_calibration_draws: usize,
    /// Rejection sampling gives up after `budget·cap` proposals per point.
    pub rejection_budget_per_unit_cap: usize,
    /// Optional override for the clustering pair-test threshold θ.
    pub cluster_threshold_override: Option<f64>,
    /// Extra sketch rank beyond the component count: top-(k+buffer) stage
    /// subspaces retain the signal even when stage averages are noisy.
    pub rank_buffer: usize,
    /// Internal `Y` draws averaged per data sample inside each stream
    /// circuit.  The extended-Hermite noise from a single `Y` dominates the
    /// stage-average variance, so averaging several draws per sample sharpens
    /// the stage subspaces without consuming extra data.
    pub y_repeats: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            n_query: 300,
            gmm_c0: 3.0,
            mlr_c1: 2.0,
            cap_calibration_draws: 10_000,
            rejection_budget_per_unit_cap: 10_000,
            cluster_threshold_override: None,
            rank_buffer: 2,
            y_repeats: 2,
        }
    }
}

// ---------------------------------------------------------------------------
// Hypothesis terms
// ---------------------------------------------------------------------------

/// How a stored degree rebuilds its query circuit and maps an evaluation
/// point onto the circuit's `X` slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TermMeta {
    /// Activation-sum degree: query `H_m(x, Y)`; the Hermite coefficient is
    /// the term's external `coeff`.
    Activation,
    /// GMM degree: query `(ρ^m/√m!)·H_m(x, Y)` for rescale `ρ`.
    Gmm {
        /// Component rescale baked into the sketch.
        rho: f64,
    },
    /// MLR Taylor term `(a, b, c)` of even total degree `n`: contracted
    /// Hermite circuit of retained order `a` tensored with `b` random
    /// `g_j ⊗ g_j` identity surrogates; query order `m = a + 2b`.
    Mlr {
        /// Total Hermite degree (even).
        n: usize,
        /// Modes retained on the covariate block.
        a: usize,
        /// Identity-surrogate pairs.
        b: usize,
        /// `(σ²−1)` powers.
        c: usize,
    },
}

/// One degree of a hypothesis: a sketch, the external coefficient its query
/// result is multiplied by, and the data to rebuild its query stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeTerm {
    /// Sketch (and query circuit) order.
    pub m: usize,
    /// External multiplier applied to the query result.
    pub coeff: f64,
    /// The compressed moment estimate.
    pub sketch: MomentSketch,
    /// Seed of this term's frozen `Y` bank.
    pub y_bank_seed: u64,
    /// Bank size `N′`.
    pub n_query: usize,
    /// Query-circuit recipe.
    pub meta: TermMeta,
}

impl DegreeTerm {
    /// Rebuild this term's query stream from its metadata.
    pub fn query_stream(&self) -> Result<QueryStream, Error> {
        let d = self.sketch.d;
        match &self.meta {
            TermMeta::Activation => Ok(QueryStream {
                circuit: ext_hermite_circuit(self.m, 1.0),
                x_slots: 1,
                y_sampler: Box::new(move |rng| vec![Value::Vector(gaussian_vector(rng, d))]),
                n_query: self.n_query,
                y_bank_seed: self.y_bank_seed,
            }),
            TermMeta::Gmm { rho } => {
                let scale = (self.m as f64 * rho.ln() - 0.5 * ln_factorial(self.m)).exp();
                Ok(QueryStream {
                    circuit: ext_hermite_circuit(self.m, scale),
                    x_slots: 1,
                    y_sampler: Box::new(move |rng| vec![Value::Vector(gaussian_vector(rng, d))]),
                    n_query: self.n_query,
                    y_bank_seed: self.y_bank_seed,
                })
            }
            TermMeta::Mlr { n, a, b, .. } => {
                if a + 2 * b != self.m {
                    return Err(Error::InvalidParameter(format!(
                        "mlr term order {} inconsistent with a + 2b = {}",
                        self.m,
                        a + 2 * b
                    )));
                }
                let circuit = mlr_query_circuit(*n, *a, *b)?;
                let b_count = *b;
                Ok(QueryStream {
                    circuit,
                    x_slots: 2,
                    y_sampler: Box::new(move |rng| {
                        let mut vals = Vec::with_capacity(2 + b_count);
                        vals.push(Value::Scalar(StandardNormal.sample(rng)));
                        vals.push(Value::Vector(gaussian_vector(rng, d)));
                        for _ in 0..b_count {
                            vals.push(Value::Vector(gaussian_vector(rng, d)));
                        }
                        vals
                    }),
                    n_query: self.n_query,
                    y_bank_seed: self.y_bank_seed,
                })
            }
        }
    }

    /// Map an evaluation point onto the stream's `X` slots.
    fn x_values(&self, point: &[f64]) -> Vec<Value> {
        match &self.meta {
            TermMeta::Activation | TermMeta::Gmm { .. } => {
                vec![Value::Vector(point.to_vec())]
            }
            TermMeta::Mlr { .. } => {
                let d = point.len() - 1;
                vec![Value::Scalar(point[d]), Value::Vector(point[..d].to_vec())]
            }
        }
    }
}

/// The MLR query circuit for term `(n, a, b)`: real part of the contracted
/// extended Hermite tensor, then each surrogate `g_j` appended twice.
/// Slot order: `u_re` (X), `x'` (X), `u_im` (Y), `y'` (Y), `g_1..g_b` (Y).
fn mlr_query_circuit(n: usize, a: usize, b_count: usize) -> Result<TensorCircuit, Error> {
    if a + 2 * (b_count) > n + 2 * b_count || a > n {
        return Err(Error::InvalidParameter(format!(
            "contracted circuit retains order {a} > total order {n}"
        )));
    }
    let mut b = CircuitBuilder::new();
    let u_re = b.scalar_input();
    let xp = b.vector_input();
    let u_im = b.scalar_input();
    let yp = b.vector_input();
    let gs: Vec<usize> = (0..b_count).map(|_| b.vector_input()).collect();
    let (re, _) = contracted_ext_hermite_nodes(&mut b, u_re, u_im, xp, yp, n, a);
    let mut node = re;
    for g in gs {
        node = b.append(node, g);
        node = b.append(node, g);
    }
    Ok(b.finish(node))
}

/// Evaluate `Σ_terms coeff·query(x)` for a batch of points.  Terms are
/// independent and evaluated in parallel; the final sum runs in term order,
/// so results do not depend on thread count.
pub fn eval_degree_terms(terms: &[DegreeTerm], points: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
    let per_term: Vec<Vec<f64>> = terms
        .par_iter()
        .map(|term| -> Result<Vec<f64>, Error> {
            let stream = term.query_stream()?;
            let mut session = QueryEvaluator::new(&term.sketch, &stream)?;
            points
                .iter()
                .map(|p| Ok(term.coeff * session.query(&term.x_values(p))?))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![0.0; points.len()];
    for contrib in &per_term {
        for (o, v) in out.iter_mut().zip(contrib) {
            *o += v;
        }
    }
    Ok(out)
}

/// A truncated-Hermite-expansion hypothesis `H̃(x) = Σ_m coeff_m·⟨T_m-sketch,
/// query_m(x)⟩`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Task tag (`"activation-sum"`).
    pub task: String,
    /// Dimension of evaluation points.
    pub ambient_dim: usize,
    /// Truncation degree `n`.
    pub max_degree: usize,
    /// Stored degrees (zero-coefficient degrees are absent).
    pub degrees: Vec<DegreeTerm>,
}

/// Evaluate the hypothesis at one point.
pub fn hypothesis_eval(h: &Hypothesis, x: &[f64]) -> Result<f64, Error> {
    Ok(hypothesis_eval_batch(h, std::slice::from_ref(&x.to_vec()))?[0])
}

/// Batch evaluation (banks and buffers are reused across points).
pub fn hypothesis_eval_batch(h: &Hypothesis, points: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
    for p in points {
        if p.len() != h.ambient_dim {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "hypothesis over ℝ^{} evaluated at a point of dim {}",
                    h.ambient_dim,
                    p.len()
                ),
            });
        }
    }
    eval_degree_terms(&h.degrees, points)
}

// ---------------------------------------------------------------------------
// Finite-data plumbing
// ---------------------------------------------------------------------------

/// Base index into the dataset for each stream order of an order-`m` build:
/// consecutive disjoint regions of `n` draws per consuming stage (`2n` when
/// the final averaging pass reuses an even order `m`).
fn data_regions(m: usize, n: usize) -> BTreeMap<usize, u64> {
    let mut base = BTreeMap::new();
    let mut acc = 0u64;
    for t in required_orders(m) {
        let uses: u64 = if m >= 1 && t == m && m % 2 == 0 { 2 } else { 1 };
        base.insert(t, acc);
        acc += uses * n as u64;
    }
    base
}

/// Number of disjoint batches an order-`m` build consumes (one per stage
/// input, two for the doubly-consumed even order `m`).
fn degree_batches(m: usize) -> usize {
    required_orders(m)
        .into_iter()
        .map(|t| if m >= 1 && t == m && m % 2 == 0 { 2 } else { 1 })
        .sum()
}

/// Per-stage batch size for an order-`m` build over a shared example budget:
/// every degree splits the whole budget into its own disjoint blocks, so
/// low-order sketches get proportionally larger batches than the top degree.
fn degree_batch_len(m: usize, budget: usize) -> usize {
    (budget / degree_batches(m)).max(1)
}

/// Order-dependent internal `Y` repeat count.  `Y` noise dominates the
/// stream variance at low orders, where the circuits are also cheapest,
/// while data noise dominates at high orders; the repeat count therefore
/// decays geometrically with the stream order.
fn repeats_for(t: usize, base: usize) -> usize {
    ((base * 16) >> (t / 2)).clamp(4, 64)
}

// ---------------------------------------------------------------------------
// Activation-sum learner
// ---------------------------------------------------------------------------

/// Learn a positive sum of `k` activations from labeled examples
/// `(x, F(x))` with Gaussian covariates.
///
/// Picks the truncation degree `n` as the smallest degree whose coefficient
/// tail `E[σ(G)²] − Σ_{t≤n} c_t²` drops below `ε²/4` (capped at `n_cap`),
/// verifies every required even stream order has `|c_t| ≥ delta`, then
/// builds one sketch per degree with nonzero coefficient from streams
/// `F(x)·H_t(x,y)/c_t`.  Stage batches take disjoint example blocks.
pub fn learn_activation_sum(
    examples: &[(Vec<f64>, f64)],
    activation: &Activation,
    k: usize,
    eps: f64,
    delta: f64,
    n_cap: usize,
    n: usize,
    seed: u64,
    cfg: &LearnerConfig,
) -> Result<Hypothesis, Error> {
    if examples.is_empty() {
        return Err(Error::InsufficientSamples { required: n, available: 0 });
    }
    let d = examples[0].0.len();
    if !(eps > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidParameter(
            "activation learner needs eps > 0 and delta > 0".into(),
        ));
    }

    // Coefficients up to the largest possible stream order.
    let coeffs: Vec<f64> = (0..=2 * n_cap).map(|t| activation_coeff(activation, t)).collect();
    let second_moment = {
        let act = activation.clone();
        numeric_coeff(&move |x| act.eval(x) * act.eval(x), 0)
    };

    // Truncation degree: smallest n with tail < eps²/4, capped.
    let mut partial = 0.0;
    let mut degree = n_cap;
    for t in 0..=n_cap {
        partial += coeffs[t] * coeffs[t];
        if second_moment - partial < eps * eps / 4.0 {
            degree = t;
            break;
        }
    }

    // Every even stream order t ≤ 2·degree divides by c_t: demand margin.
    for t in (2..=2 * degree).step_by(2) {
        if coeffs[t].abs() < delta {
            return Err(Error::CoefficientTooSmall {
                order: t,
                value: coeffs[t],
                floor: delta,
            });
        }
    }

    let required = (degree + 2) * n;
    if examples.len() < required {
        return Err(Error::InsufficientSamples { required, available: examples.len() });
    }

    // Flat storage (d covariates then the label per row) keeps the learner's
    // working copy compact at multi-million-example scale.
    let mut flat = Vec::with_capacity(examples.len() * (d + 1));
    for (x, label) in examples {
        flat.extend_from_slice(x);
        flat.push(*label);
    }
    let data: Arc<Vec<f64>> = Arc::new(flat);
    let mut degrees = Vec::new();
    for m in 0..=degree {
        if coeffs[m].abs() < COEFF_ZERO {
            continue;
        }
        let n_m = degree_batch_len(m, required);
        let regions = data_regions(m, n_m);
        let streams: BTreeMap<usize, MomentStream> = required_orders(m)
            .into_iter()
            .map(|t| {
                let reps = repeats_for(t, cfg.y_repeats);
                let circuit = activation_stream_circuit(t, coeffs[t], reps);
                let base = regions[&t];
                let data = Arc::clone(&data);
                let stream = MomentStream::new(circuit, move |idx, rng| {
                    let row = &data[(base + idx) as usize * (d + 1)..][..d + 1];
                    let mut vals = Vec::with_capacity(2 + reps);
                    vals.push(Value::Scalar(row[d]));
                    vals.push(Value::Vector(row[..d].to_vec()));
                    for _ in 0..reps {
                        vals.push(Value::Vector(gaussian_vector(rng, d)));
                    }
                    CircuitInput::new(vals)
                });
                (t, stream)
            })
            .collect();
        let rank = k + cfg.rank_buffer;
        let sketch = build_sketch(&streams, rank, m, d, n_m, derive_seed(seed, 1_000 + m as u64))?;
        degrees.push(DegreeTerm {
            m,
            coeff: coeffs[m],
            sketch,
            y_bank_seed: derive_seed(seed, 2_000 + m as u64),
            n_query: cfg.n_query,
            meta: TermMeta::Activation,
        });
    }

    Ok(Hypothesis {
        task: "activation-sum".into(),
        ambient_dim: d,
        max_degree: degree,
        degrees,
    })
}

/// Mean of `repeats` extended-Hermite real parts `H_t(x, y_i)`, scaled by
/// `scale`.  Declares the `y` vector slots on `b` in order; `x` must already
/// be declared.  Averaging several internal draws per data sample cuts the
/// `Y`-noise of the stream without touching its expectation.
fn averaged_ext_hermite_re(
    b: &mut CircuitBuilder,
    x: usize,
    t: usize,
    scale: f64,
    repeats: usize,
) -> usize {
    let mut acc: Option<usize> = None;
    for _ in 0..repeats {
        let y = b.vector_input();
        let (re, _) = ext_hermite_nodes(b, x, y, t);
        acc = Some(match acc {
            None => re,
            Some(a) => b.add(a, re),
        });
    }
    let c = b.constant(scale / repeats as f64);
    b.smul(c, acc.expect("repeats must be positive"))
}

/// Stream circuit `F(x)·mean_i H_t(x,y_i)/c_t`.  Slots: label (scalar), `x`,
/// then `repeats` internal `y` vectors.
fn activation_stream_circuit(t: usize, c_t: f64, repeats: usize) -> TensorCircuit {
    let mut b = CircuitBuilder::new();
    let label = b.scalar_input();
    let x = b.vector_input();
    let re = averaged_ext_hermite_re(&mut b, x, t, 1.0, repeats);
    let inv = b.constant(1.0 / c_t);
    let scaled_label = b.smul(inv, label);
    let out = b.smul(scaled_label, re);
    b.finish(out)
}

/// Stream circuit `scale·mean_i H_t(x,y_i)`.  Slots: `x`, then `repeats`
/// internal `y` vectors.
fn averaged_hermite_circuit(t: usize, scale: f64, repeats: usize) -> TensorCircuit {
    let mut b = CircuitBuilder::new();
    let x = b.vector_input();
    let out = averaged_ext_hermite_re(&mut b, x, t, scale, repeats);
    b.finish(out)
}

// ---------------------------------------------------------------------------
// Density models
// ---------------------------------------------------------------------------

/// Input preprocessing recorded with a density model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preprocess {
    /// The label coordinate was divided by this before learning (MLR only;
    /// `1.0` otherwise).  Rejection sampling multiplies it back.
    pub y_scale: f64,
    /// Free-text notes (estimated bounds, halving count, warnings).
    pub notes: String,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self { y_scale: 1.0, notes: String::new() }
    }
}

/// A learned density-ratio model `R′(x) ≈ clamp((F/G)(x), 0, cap)` with a
/// calibrated acceptance cap for rejection sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityModel {
    /// Task tag (`"gmm-density"` or `"mlr-density"`).
    pub task: String,
    /// Point dimension (`d`, or `d+1` for MLR).
    pub ambient_dim: usize,
    /// Hermite-expansion terms.
    pub degrees: Vec<DegreeTerm>,
    /// Acceptance ceiling (≥ 1).
    pub cap: f64,
    /// Recorded preprocessing.
    pub preprocess: Preprocess,
}

impl DensityModel {
    /// Clamped ratio estimate `R′` at a batch of (unscaled) points.
    pub fn eval_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
        let scaled = self.scale_points(points)?;
        let raw = eval_degree_terms(&self.degrees, &scaled)?;
        Ok(raw.into_iter().map(|r| r.clamp(0.0, self.cap)).collect())
    }

    /// Clamped ratio estimate at one point.
    pub fn eval(&self, point: &[f64]) -> Result<f64, Error> {
        Ok(self.eval_batch(std::slice::from_ref(&point.to_vec()))?[0])
    }

    /// Unclamped expansion value (diagnostics and cap calibration).
    pub fn eval_raw_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>, Error> {
        let scaled = self.scale_points(points)?;
        eval_degree_terms(&self.degrees, &scaled)
    }

    fn scale_points(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, Error> {
        let mut out = Vec::with_capacity(points.len());
        for p in points {
            if p.len() != self.ambient_dim {
                return Err(Error::ShapeMismatch {
                    context: format!(
                        "density model over ℝ^{} evaluated at dim {}",
                        self.ambient_dim,
                        p.len()
                    ),
                });
            }
            let mut q = p.clone();
            if self.preprocess.y_scale != 1.0 {
                let last = q.len() - 1;
                q[last] /= self.preprocess.y_scale;
            }
            out.push(q);
        }
        Ok(out)
    }
}

/// Calibrate the acceptance cap: the empirical `(1 − eps/4)` quantile of the
/// raw expansion over fresh standard-Gaussian draws, floored at 1.
fn calibrate_cap(
    degrees: &[DegreeTerm],
    ambient_dim: usize,
    eps: f64,
    draws: usize,
    seed: u64,
) -> Result<f64, Error> {
    let mut rng = rng_from(seed);
    let points: Vec<Vec<f64>> = (0..draws).map(|_| gaussian_vector(&mut rng, ambient_dim)).collect();
    let mut values = eval_degree_terms(degrees, &points)?;
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = (1.0 - eps / 4.0).clamp(0.0, 1.0);
    let idx = ((values.len() as f64 - 1.0) * q).round() as usize;
    Ok(values[idx].max(1.0))
}

// ---------------------------------------------------------------------------
// GMM density estimation
// ---------------------------------------------------------------------------

/// Learn the density ratio `F/G` of a spherical Gaussian mixture with `k`
/// components from samples.
///
/// Truncates the Hermite expansion at `n₀ = ceil(c₀·ln(max(k,2)/ε))`,
/// sketching each `M_n = Σ_i w_i (μ_i/ρ)^⊗n` (rescale `ρ = max(1, R)` with
/// mean-norm bound `R`, default `2√ln(max(k,2))`) from streams
/// `(√n!/ρⁿ)·H_n(X, Y)`; queries undo the rescale.  The acceptance cap is
/// the empirical `(1 − ε/4)` Gaussian quantile of the expansion.
pub fn learn_gmm_density(
    samples: &[Vec<f64>],
    k: usize,
    eps: f64,
    n: usize,
    seed: u64,
    r_bound: Option<f64>,
    cfg: &LearnerConfig,
) -> Result<DensityModel, Error> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { required: n, available: 0 });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("gmm eps must be in (0, 1), got {eps}")));
    }
    let d = samples[0].len();
    let kf = (k.max(2)) as f64;
    let n0 = (cfg.gmm_c0 * (kf / eps).ln()).ceil() as usize;
    let r = r_bound.unwrap_or_else(|| 2.0 * kf.ln().sqrt());
    let rho = r.max(1.0);

    let required = (n0 + 2) * n;
    if samples.len() < required {
        return Err(Error::InsufficientSamples { required, available: samples.len() });
    }

    let mut flat = Vec::with_capacity(samples.len() * d);
    for x in samples {
        flat.extend_from_slice(x);
    }
    let data: Arc<Vec<f64>> = Arc::new(flat);
    let mut degrees = Vec::new();
    for m in 0..=n0 {
        let n_m = degree_batch_len(m, required);
        let regions = data_regions(m, n_m);
        let streams: BTreeMap<usize, MomentStream> = required_orders(m)
            .into_iter()
            .map(|t| {
                // (√t!/ρᵗ)·H_t(X, Y), with the scale folded in log space.
                let scale = (0.5 * ln_factorial(t) - t as f64 * rho.ln()).exp();
                let reps = repeats_for(t, cfg.y_repeats);
                let circuit = averaged_hermite_circuit(t, scale, reps);
                let base = regions[&t];
                let data = Arc::clone(&data);
                let stream = MomentStream::new(circuit, move |idx, rng| {
                    let row = &data[(base + idx) as usize * d..][..d];
                    let mut vals = Vec::with_capacity(1 + reps);
                    vals.push(Value::Vector(row.to_vec()));
                    for _ in 0..reps {
                        vals.push(Value::Vector(gaussian_vector(rng, d)));
                    }
                    CircuitInput::new(vals)
                });
                (t, stream)
            })
            .collect();
        let rank = k + cfg.rank_buffer;
        let mut sketch = build_sketch(&streams, rank, m, d, n_m, derive_seed(seed, 1_000 + m as u64))?;
        sketch.scale_note = format!("components rescaled by 1/ρ with ρ = {rho}");
        degrees.push(DegreeTerm {
            m,
            coeff: 1.0,
            sketch,
            y_bank_seed: derive_seed(seed, 2_000 + m as u64),
            n_query: cfg.n_query,
            meta: TermMeta::Gmm { rho },
        });
    }

    let cap = calibrate_cap(
        &degrees,
        d,
        eps,
        cfg.cap_calibration_draws,
        derive_seed(seed, 3_000),
    )?;
    Ok(DensityModel {
        task: "gmm-density".into(),
        ambient_dim: d,
        degrees,
        cap,
        preprocess: Preprocess::default(),
    })
}

// ---------------------------------------------------------------------------
// Rejection sampling
// ---------------------------------------------------------------------------

/// Draw `count` samples from the learned density by rejection against the
/// standard Gaussian: propose `z ∼ N(0, I)`, accept with probability
/// `R′(z)/cap`.  Any recorded `y` rescaling is undone on output.  Fails if
/// one point consumes more than `budget·cap` proposals.
pub fn rejection_sample(
    dm: &DensityModel,
    count: usize,
    seed: u64,
    cfg: &LearnerConfig,
) -> Result<Vec<Vec<f64>>, Error> {
    if !(dm.cap > 0.0) {
        return Err(Error::InvalidParameter(format!("cap must be positive, got {}", dm.cap)));
    }
    let budget = (cfg.rejection_budget_per_unit_cap as f64 * dm.cap).ceil() as u64;
    let mut rng = rng_from(seed);
    let mut out = Vec::with_capacity(count);
    let mut since_accept: u64 = 0;
    const BATCH: usize = 512;
    while out.len() < count {
        // Proposals and acceptance coins are drawn together per batch so the
        // stream of random numbers is independent of evaluation internals.
        let proposals: Vec<Vec<f64>> =
            (0..BATCH).map(|_| gaussian_vector(&mut rng, dm.ambient_dim)).collect();
        let coins: Vec<f64> = (0..BATCH).map(|_| rng.gen_range(0.0..1.0)).collect();
        let values = dm.eval_batch(&proposals)?;
        for ((z, u), r) in proposals.into_iter().zip(coins).zip(values) {
            since_accept += 1;
            if u * dm.cap < r {
                let mut z = z;
                if dm.preprocess.y_scale != 1.0 {
                    let last = z.len() - 1;
                    z[last] *= dm.preprocess.y_scale;
                }
                out.push(z);
                since_accept = 0;
                if out.len() == count {
                    break;
                }
            } else if since_accept > budget {
                return Err(Error::RejectionBudgetExhausted {
                    cap_iterations: budget,
                    cap: dm.cap,
                });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// GMM clustering
// ---------------------------------------------------------------------------

/// A fitted clustering of spherical-mixture samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    /// Orthonormal `k×d` PCA basis rows.
    pub basis: Vec<Vec<f64>>,
    /// Mean component orthogonal to the basis, in `ℝ^d`.
    pub offset: Vec<f64>,
    /// Sketch of the pair-difference moment tensor `M_t` (over `ℝ^k`).
    pub pair_sketch: MomentSketch,
    /// Even statistic order `t`.
    pub t_order: usize,
    /// Pair-test threshold θ.
    pub threshold: f64,
    /// Set when the calibrated regime is not guaranteed (`L ≤ U`).
    pub threshold_warning: Option<String>,
    /// Estimated component means (ambient coordinates).
    pub means: Vec<Vec<f64>>,
    /// Estimated component weights.
    pub weights: Vec<f64>,
    /// Cluster index per input sample.
    pub assignments: Vec<usize>,
    /// Frozen `Y`-bank seed for pair tests.
    pub y_bank_seed: u64,
    /// Pair-test bank size.
    pub n_query: usize,
}

impl ClusterModel {
    /// Project an ambient point to reduced coordinates.
    pub fn reduce(&self, x: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn query_stream(&self) -> QueryStream {
        let k = self.pair_sketch.d;
        QueryStream {
            circuit: ext_hermite_circuit(self.t_order, 1.0),
            x_slots: 1,
            y_sampler: Box::new(move |rng| vec![Value::Vector(gaussian_vector(rng, k))]),
            n_query: self.n_query,
            y_bank_seed: self.y_bank_seed,
        }
    }
}

/// Pair-test threshold: the geometric mean `θ = √(U·L)` of the same-pair
/// ceiling `U = (e·s²/t)^t` and the different-pair floor
/// `L = w_min²·(s²/(4√t))^t`, evaluated in log space.  Returns a warning
/// when `L ≤ U` (the regime where the test has no guarantee).
pub fn calibrate_threshold(s: f64, w_min: f64, t: usize) -> (f64, Option<String>) {
    assert!(s > 0.0 && t > 0, "separation and order must be positive");
    let tf = t as f64;
    let ln_u = tf * (1.0 + (s * s / tf).ln());
    let ln_l = 2.0 * w_min.ln() + tf * (s * s / (4.0 * tf.sqrt())).ln();
    let theta = (0.5 * (ln_u + ln_l)).exp();
    let warning = (ln_l <= ln_u).then(|| {
        format!(
            "separation floor L = exp({ln_l:.3}) does not exceed same-pair ceiling U = exp({ln_u:.3}); the pair test is outside its guaranteed regime"
        )
    });
    (theta, warning)
}

/// Same-component test for two ambient points (reduced internally): the statistic
/// `P̂_t = ⟨H_t((x−x′)/√2), M_t-sketch⟩`; "different" iff it exceeds θ.
/// Returns `(same, statistic)`.
pub fn pair_test(cm: &ClusterModel, x: &[f64], xp: &[f64]) -> Result<(bool, f64), Error> {
    let stream = cm.query_stream();
    let mut session = QueryEvaluator::new(&cm.pair_sketch, &stream)?;
    let stat = pair_statistic(&mut session, &cm.reduce(x), &cm.reduce(xp))?;
    Ok((stat <= cm.threshold, stat))
}

fn pair_statistic(
    session: &mut QueryEvaluator<'_>,
    x: &[f64],
    xp: &[f64],
) -> Result<f64, Error> {
    let q: Vec<f64> = x
        .iter()
        .zip(xp)
        .map(|(a, b)| (a - b) / std::f64::consts::SQRT_2)
        .collect();
    session.query(&[Value::Vector(q)])
}

/// Cluster samples from a spherical mixture with `k` components, minimum
/// mean separation `s`, and minimum weight `w_min`.
///
/// PCA-reduces to `ℝ^k`, sketches the moment tensor of pair differences
/// `(z − z′)/√2`, and groups a seed subsample by the pairwise statistic
/// `P̂_t` against a threshold calibrated at the reduced-space separation
/// `s/√2`; remaining samples join the cluster whose representative tests
/// "same" (ties broken by the nearest representative).
#[allow(clippy::too_many_arguments)]
pub fn cluster_gmm(
    samples: &[Vec<f64>],
    k: usize,
    s: f64,
    w_min: f64,
    alpha: f64,
    t_order: Option<usize>,
    n: usize,
    seed: u64,
    cfg: &LearnerConfig,
) -> Result<ClusterModel, Error> {
    if samples.len() < 4 {
        return Err(Error::InsufficientSamples { required: 4, available: samples.len() });
    }
    if !(s > 0.0 && w_min > 0.0 && alpha > 0.0) {
        return Err(Error::InvalidParameter(
            "clustering needs s > 0, w_min > 0, alpha > 0".into(),
        ));
    }
    let d = samples[0].len();
    let t = match t_order {
        Some(t) => t,
        None => {
            let target = 4.0 * (1.0 / (alpha * w_min)).max(2.0).ln();
            let mut t = target.ceil() as usize;
            t += t % 2;
            t.max(2)
        }
    };
    if t % 2 == 1 {
        return Err(Error::InvalidParameter(format!("statistic order t = {t} must be even")));
    }

    // PCA: top-k eigenspace of the uncentered second moment (its top
    // eigenvectors span the component means even when the mixture mean is
    // far from the origin), plus the orthogonal mean component as offset.
    let n_samples = samples.len();
    let mut second = DMatrix::zeros(d, d);
    let mut mean = vec![0.0; d];
    for x in samples {
        for i in 0..d {
            mean[i] += x[i] / n_samples as f64;
            for j in 0..d {
                second[(i, j)] += x[i] * x[j] / n_samples as f64;
            }
        }
    }
    let v = top_k_subspace(&second, k.min(d))?;
    let basis: Vec<Vec<f64>> = {
        let m = v.matrix();
        (0..m.nrows()).map(|r| m.row(r).iter().cloned().collect()).collect()
    };
    let reduce = |x: &[f64]| -> Vec<f64> {
        basis
            .iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    };
    let mean_reduced = reduce(&mean);
    let mut offset = mean.clone();
    for (row, &mr) in basis.iter().zip(&mean_reduced) {
        for (o, &b) in offset.iter_mut().zip(row) {
            *o -= mr * b;
        }
    }

    let reduced: Vec<Vec<f64>> = samples.iter().map(|x| reduce(x)).collect();
    let kr = basis.len();

    // Pair differences from disjoint consecutive pairs.
    let diffs: Arc<Vec<Vec<f64>>> = Arc::new(
        (0..n_samples / 2)
            .map(|j| {
                reduced[2 * j]
                    .iter()
                    .zip(&reduced[2 * j + 1])
                    .map(|(a, b)| (a - b) / std::f64::consts::SQRT_2)
                    .collect()
            })
            .collect(),
    );

    // Sketch of M_t = √t!·E[H_t(x′, Y)] over ℝ^k; the difference
    // distribution has up to k(k−1) distinct mean directions plus zero.
    let k_sketch = k * k.saturating_sub(1) + 1;
    let streams: BTreeMap<usize, MomentStream> = required_orders(t)
        .into_iter()
        .map(|tp| {
            let scale = (0.5 * ln_factorial(tp)).exp();
            let reps = repeats_for(tp, cfg.y_repeats);
            let circuit = averaged_hermite_circuit(tp, scale, reps);
            let diffs = Arc::clone(&diffs);
            let stream = MomentStream::new(circuit, move |_, rng| {
                let pick = rng.gen_range(0..diffs.len());
                let mut vals = Vec::with_capacity(1 + reps);
                vals.push(Value::Vector(diffs[pick].clone()));
                for _ in 0..reps {
                    vals.push(Value::Vector(gaussian_vector(rng, diffs[pick].len())));
                }
                CircuitInput::new(vals)
            });
            (tp, stream)
        })
        .collect();
    let pair_sketch = build_sketch(&streams, k_sketch, t, kr, n, derive_seed(seed, 10))?;

    // Threshold at the reduced-difference separation s/√2.
    let (theta, warning) = calibrate_threshold(s / std::f64::consts::SQRT_2, w_min, t);
    let threshold = cfg.cluster_threshold_override.unwrap_or(theta);

    let model_stub = ClusterModel {
        basis,
        offset,
        pair_sketch,
        t_order: t,
        threshold,
        threshold_warning: warning,
        means: Vec::new(),
        weights: Vec::new(),
        assignments: Vec::new(),
        y_bank_seed: derive_seed(seed, 11),
        n_query: cfg.n_query,
    };
    let stream = model_stub.query_stream();
    let mut session = QueryEvaluator::new(&model_stub.pair_sketch, &stream)?;

    // Seed subsample and pairwise union-find.
    let n_sub = ((8.0 * (k.max(2) as f64).ln() / w_min).ceil() as usize).min(n_samples);
    let mut parent: Vec<usize> = (0..n_sub).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut i = i;
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n_sub {
        for j in (i + 1)..n_sub {
            let stat = pair_statistic(&mut session, &reduced[i], &reduced[j])?;
            if stat <= threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj.max(ri)] = rj.min(ri);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n_sub {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    if groups.len() < k {
        return Err(Error::InvalidParameter(format!(
            "found only {} clusters among the {} seed points (need {k}); increase the subsample, N, or separation",
            groups.len(),
            n_sub
        )));
    }
    // Keep the k largest groups; ties break toward the earlier root.
    let mut ranked: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
    ranked.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked.sort_by_key(|(root, _)| *root);
    let reps: Vec<usize> = ranked.iter().map(|(_, members)| members[0]).collect();
    let mut sub_cluster: BTreeMap<usize, usize> = BTreeMap::new();
    for (c, (_, members)) in ranked.iter().enumerate() {
        for &m in members {
            sub_cluster.insert(m, c);
        }
    }

    // Assign every sample: seed points keep their group; the rest join the
    // representative that tests "same" (nearest representative on ties or
    // when none passes).
    let mut assignments = vec![0usize; n_samples];
    for (i, z) in reduced.iter().enumerate() {
        if let Some(&c) = sub_cluster.get(&i) {
            assignments[i] = c;
            continue;
        }
        let mut passing: Vec<usize> = Vec::new();
        for (c, &rep) in reps.iter().enumerate() {
            let stat = pair_statistic(&mut session, z, &reduced[rep])?;
            if stat <= threshold {
                passing.push(c);
            }
        }
        let all: Vec<usize> = (0..k).collect();
        let candidates: &[usize] = if passing.is_empty() { &all } else { &passing };
        let nearest = candidates
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da: f64 = z
                    .iter()
                    .zip(&reduced[reps[a]])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                let db: f64 = z
                    .iter()
                    .zip(&reduced[reps[b]])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assignments[i] = nearest;
    }

    // Means (lifted back to ambient coordinates) and weights.
    let mut means = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    let mut means_reduced = vec![vec![0.0; kr]; k];
    for (i, z) in reduced.iter().enumerate() {
        let c = assignments[i];
        counts[c] += 1;
        for (m, &v) in means_reduced[c].iter_mut().zip(z) {
            *m += v;
        }
    }
    let mut weights = vec![0.0; k];
    for c in 0..k {
        if counts[c] > 0 {
            for m in means_reduced[c].iter_mut() {
                *m /= counts[c] as f64;
            }
        }
        weights[c] = counts[c] as f64 / n_samples as f64;
        for (j, mu) in means[c].iter_mut().enumerate() {
            *mu = model_stub.offset[j]
                + model_stub
                    .basis
                    .iter()
                    .zip(&means_reduced[c])
                    .map(|(row, &m)| row[j] * m)
                    .sum::<f64>();
        }
    }

    Ok(ClusterModel {
        means,
        weights,
        assignments,
        ..model_stub
    })
}

// ---------------------------------------------------------------------------
// MLR density estimation
// ---------------------------------------------------------------------------

/// Learn the density ratio `F/G` on `ℝ^{d+1}` for a mixture of `k` linear
/// regressions with noise level `sigma`.
///
/// After halving the labels until both `σ` and the regression-norm bound
/// `B` are at most `1/2`, truncates at `n₀ = ` smallest even
/// `≥ c₁·σ⁻²·ln(1/ε)`, builds one sketch of `M′_m = Σ_i w_i β_i^⊗m` per
/// order from streams `(yᵗ/√t!)·H_t(X, Y)`, and expands each even Hermite
/// degree `n` into terms `(a, b, c)` with coefficient
/// `((n−1)!!/√n!)·multinomial(n/2; a,b,c)·2^a·(σ²−1)^c` paired with a
/// contracted Hermite query of order `a + 2b`.
pub fn learn_mlr_density(
    samples: &[(Vec<f64>, f64)],
    k: usize,
    sigma: f64,
    eps: f64,
    n: usize,
    seed: u64,
    b_bound: Option<f64>,
    cfg: &LearnerConfig,
) -> Result<DensityModel, Error> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { required: n, available: 0 });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mlr noise sigma must be strictly positive, got {sigma}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("mlr eps must be in (0, 1), got {eps}")));
    }
    let d = samples[0].0.len();

    // Estimate B from the label scale when not provided: Var[y] = Σw‖β‖² + σ².
    let mean_y2 = samples.iter().map(|(_, y)| y * y).sum::<f64>() / samples.len() as f64;
    let b0 = b_bound.unwrap_or_else(|| (mean_y2 - sigma * sigma).max(0.0).sqrt() * 1.5);

    // Halve labels until σ and B are both ≤ 1/2.
    let mut y_scale = 1.0;
    let mut sigma_s = sigma;
    let mut b_s = b0;
    while sigma_s > 0.5 || b_s > 0.5 {
        y_scale *= 2.0;
        sigma_s /= 2.0;
        b_s /= 2.0;
    }

    let mut n0 = (cfg.mlr_c1 / (sigma_s * sigma_s) * (1.0 / eps).ln()).ceil() as usize;
    n0 += n0 % 2;
    n0 = n0.max(2);

    let required = (n0 + 2) * n;
    if samples.len() < required {
        return Err(Error::InsufficientSamples { required, available: samples.len() });
    }

    let mut flat = Vec::with_capacity(samples.len() * (d + 1));
    for (x, y) in samples {
        flat.extend_from_slice(x);
        flat.push(y / y_scale);
    }
    let data: Arc<Vec<f64>> = Arc::new(flat);

    // One sketch of M′_m per needed order (shared across Taylor terms).
    let mut sketches: BTreeMap<usize, MomentSketch> = BTreeMap::new();
    for m in 0..=n0 {
        let n_m = degree_batch_len(m, required);
        let regions = data_regions(m, n_m);
        let streams: BTreeMap<usize, MomentStream> = required_orders(m)
            .into_iter()
            .map(|t| {
                let reps = repeats_for(t, cfg.y_repeats);
                let circuit = mlr_stream_circuit(t, reps);
                let base = regions[&t];
                let data = Arc::clone(&data);
                let stream = MomentStream::new(circuit, move |idx, rng| {
                    let row = &data[(base + idx) as usize * (d + 1)..][..d + 1];
                    let mut vals = Vec::with_capacity(2 + reps);
                    vals.push(Value::Scalar(row[d]));
                    vals.push(Value::Vector(row[..d].to_vec()));
                    for _ in 0..reps {
                        vals.push(Value::Vector(gaussian_vector(rng, d)));
                    }
                    CircuitInput::new(vals)
                });
                (t, stream)
            })
            .collect();
        let rank = k + cfg.rank_buffer;
        let mut sketch = build_sketch(&streams, rank, m, d, n_m, derive_seed(seed, 1_000 + m as u64))?;
        sketch.scale_note = format!("labels divided by {y_scale}");
        sketches.insert(m, sketch);
    }

    // Taylor terms over even degrees.
    let mut degrees = Vec::new();
    let mut term_idx: u64 = 0;
    for deg in (0..=n0).step_by(2) {
        let half = deg / 2;
        for a in 0..=half {
            for b in 0..=(half - a) {
                let c = half - a - b;
                let ln_mag = ln_double_factorial(deg as i64 - 1) - 0.5 * ln_factorial(deg)
                    + ln_factorial(half)
                    - ln_factorial(a)
                    - ln_factorial(b)
                    - ln_factorial(c)
                    + a as f64 * 2.0f64.ln()
                    + c as f64 * (1.0 - sigma_s * sigma_s).ln();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                let coeff = sign * ln_mag.exp();
                if coeff.abs() < COEFF_ZERO {
                    continue;
                }
                let m = a + 2 * b;
                degrees.push(DegreeTerm {
                    m,
                    coeff,
                    sketch: sketches[&m].clone(),
                    y_bank_seed: derive_seed(seed, 5_000 + term_idx),
                    n_query: cfg.n_query,
                    meta: TermMeta::Mlr { n: deg, a, b, c },
                });
                term_idx += 1;
            }
        }
    }

    let cap = calibrate_cap(
        &degrees,
        d + 1,
        eps,
        cfg.cap_calibration_draws,
        derive_seed(seed, 3_000),
    )?;
    Ok(DensityModel {
        task: "mlr-density".into(),
        ambient_dim: d + 1,
        degrees,
        cap,
        preprocess: Preprocess {
            y_scale,
            notes: format!(
                "sigma scaled to {sigma_s}, beta bound estimate {b0} scaled to {b_s}, truncation degree {n0}"
            ),
        },
    })
}

/// Stream circuit `(yᵗ/√t!)·H_t(x, Y)`.  Slots: label `y` (scalar), `x`, `Y`.
fn mlr_stream_circuit(t: usize, repeats: usize) -> TensorCircuit {
    let mut b = CircuitBuilder::new();
    let y = b.scalar_input();
    let x = b.vector_input();
    let re = averaged_ext_hermite_re(&mut b, x, t, 1.0, repeats);
    let mut pow = b.constant((-0.5 * ln_factorial(t)).exp());
    for _ in 0..t {
        pow = b.smul(pow, y);
    }
    let out = b.smul(pow, re);
    b.finish(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        relu_coeff, sample_activation_examples, sample_gmm, sample_mlr, Activation,
        ActivationSumParams, GmmParams, MlrParams,
    };
    use crate::rng::rng_from;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_from(seed);
        (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn threshold_geometric_mean_and_warning() {
        // L/U = w_min²·(√t/4)^t·e^{−t} does not depend on s, so the
        // guaranteed regime (L > U) needs a large statistic order.
        let s = 10.0 / std::f64::consts::SQRT_2;
        let t = 200;
        let (theta, warn) = calibrate_threshold(s, 0.5, t);
        assert!(warn.is_none());
        let tf = t as f64;
        let ln_u = tf * (1.0 + (s * s / tf).ln());
        let ln_l = 2.0 * 0.5f64.ln() + tf * (s * s / (4.0 * tf.sqrt())).ln();
        assert!(ln_l > ln_u);
        let ln_theta = theta.ln();
        assert!(ln_theta > ln_u && ln_theta < ln_l, "ln θ = {ln_theta} outside ({ln_u}, {ln_l})");
        assert!((ln_theta - 0.5 * (ln_u + ln_l)).abs() < 1e-9);
        // Moderate order: outside the guaranteed regime, warning set, θ still
        // the log-space geometric mean.
        let (theta8, warn8) = calibrate_threshold(s, 1.0 / 3.0, 8);
        assert!(warn8.is_some());
        let ln_u8 = 8.0 * (1.0 + (s * s / 8.0).ln());
        let ln_l8 = 2.0 * (1.0f64 / 3.0).ln() + 8.0 * (s * s / (4.0 * 8.0f64.sqrt())).ln();
        assert!((theta8.ln() - 0.5 * (ln_u8 + ln_l8)).abs() < 1e-9);
    }

    #[test]
    fn activation_learner_rejects_degenerate_even_coefficients() {
        // A purely linear activation has c_2 = 0, so the order-2 stream that
        // every rank-reduction stage needs is unusable.
        let act = Activation::Custom(std::sync::Arc::new(|x: f64| 2.0 * x));
        let p = ActivationSumParams {
            directions: vec![vec![1.0, 0.0, 0.0]],
            weights: vec![1.0],
            activation: act.clone(),
        };
        let examples = sample_activation_examples(&p, 4000, 5);
        let err = learn_activation_sum(
            &examples,
            &act,
            1,
            0.5,
            1e-8,
            4,
            1000,
            7,
            &LearnerConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::CoefficientTooSmall { .. }), "got {err:?}");
    }

    #[test]
    fn activation_learner_recovers_single_relu() {
        let p = ActivationSumParams {
            directions: vec![vec![1.0, 0.0, 0.0]],
            weights: vec![1.0],
            activation: Activation::Relu,
        };
        let n = 20_000;
        let examples = sample_activation_examples(&p, 5 * n, 11);
        let mut cfg = LearnerConfig::default();
        cfg.n_query = 200;
        // eps chosen so the coefficient tail rule truncates at degree 2.
        let h = learn_activation_sum(&examples, &Activation::Relu, 1, 0.25, 1e-8, 2, n, 3, &cfg)
            .unwrap();
        assert_eq!(h.max_degree, 2);
        assert_eq!(h.ambient_dim, 3);
        // Degrees 0, 1, 2 all carry nonzero ReLU coefficients.
        let degrees: Vec<usize> = h.degrees.iter().map(|t| t.m).collect();
        assert_eq!(degrees, vec![0, 1, 2]);
        for term in &h.degrees {
            assert!((term.coeff - relu_coeff(term.m)).abs() < 1e-12);
        }
        // Monte-Carlo L2 against the target, dominated by the degree-2
        // truncation (~0.10) plus estimation noise.
        let pts = gaussian_points(500, 3, 99);
        let approx = hypothesis_eval_batch(&h, &pts).unwrap();
        let mse: f64 = pts
            .iter()
            .zip(&approx)
            .map(|(x, a)| {
                let f = x[0].max(0.0);
                (a - f) * (a - f)
            })
            .sum::<f64>()
            / pts.len() as f64;
        assert!(mse.sqrt() < 0.2, "L2 error {} too large", mse.sqrt());
    }

    #[test]
    fn gmm_identity_ratio_and_rejection_moments() {
        // F = G (single zero-mean component): the learned ratio should stay
        // near 1 and rejection sampling should reproduce N(0, I).
        let d = 2;
        let p = GmmParams { means: vec![vec![0.0; d]], weights: vec![1.0] };
        let samples = sample_gmm(&p, 12_000, 21);
        let mut cfg = LearnerConfig::default();
        cfg.n_query = 150;
        cfg.cap_calibration_draws = 2000;
        let dm = learn_gmm_density(&samples, 1, 0.5, 1500, 9, None, &cfg).unwrap();
        assert!(dm.cap >= 1.0);
        // E_G[R'] within 3·eps of 1.
        let pts = gaussian_points(1500, d, 55);
        let vals = dm.eval_batch(&pts).unwrap();
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((mean - 1.0).abs() < 3.0 * 0.5, "E_G[R'] = {mean}");
        // Rejection output moments: mean ~ 0, second moment ~ 1 (5 SE).
        let out = rejection_sample(&dm, 1500, 77, &cfg).unwrap();
        let nf = out.len() as f64;
        for c in 0..d {
            let m1: f64 = out.iter().map(|z| z[c]).sum::<f64>() / nf;
            let m2: f64 = out.iter().map(|z| z[c] * z[c]).sum::<f64>() / nf;
            assert!(m1.abs() < 5.0 / nf.sqrt() + 0.1, "coord {c} mean {m1}");
            assert!((m2 - 1.0).abs() < 5.0 * 2f64.sqrt() / nf.sqrt() + 0.15, "coord {c} m2 {m2}");
        }
    }

    #[test]
    fn mlr_degree_two_taylor_coefficients() {
        // At n = 2 the three Taylor terms have closed forms: (a,b,c) =
        // (1,0,0) → 2/√2 = √2, (0,1,0) → 1/√2, (0,0,1) → (σ²−1)/√2.
        let sigma = 0.5;
        let p = MlrParams {
            betas: vec![vec![0.2, 0.0]],
            weights: vec![1.0],
            sigma,
            b_bound: Some(0.3),
        };
        let samples = sample_mlr(&p, 2000, 31);
        let mut cfg = LearnerConfig::default();
        cfg.n_query = 100;
        cfg.cap_calibration_draws = 500;
        let dm =
            learn_mlr_density(&samples, 1, sigma, 0.78, 400, 13, Some(0.3), &cfg).unwrap();
        assert_eq!(dm.preprocess.y_scale, 1.0);
        let mut found = 0;
        for term in &dm.degrees {
            if let TermMeta::Mlr { n, a, b, c } = term.meta {
                if n != 2 {
                    continue;
                }
                let expect = match (a, b, c) {
                    (1, 0, 0) => std::f64::consts::SQRT_2,
                    (0, 1, 0) => 1.0 / std::f64::consts::SQRT_2,
                    (0, 0, 1) => (sigma * sigma - 1.0) / std::f64::consts::SQRT_2,
                    _ => panic!("unexpected n=2 term ({a},{b},{c})"),
                };
                assert!(
                    (term.coeff - expect).abs() < 1e-12,
                    "term ({a},{b},{c}): {} vs {expect}",
                    term.coeff
                );
                found += 1;
            }
        }
        assert_eq!(found, 3);
    }

    #[test]
    fn clustering_separated_pair_smoke() {
        // Two far-apart spherical components: weights, means, and pair
        // assignments should all come out essentially exact.
        let d = 6;
        let mut means = vec![vec![0.0; d], vec![0.0; d]];
        means[1][0] = 10.0;
        let p = GmmParams { means: means.clone(), weights: vec![0.5, 0.5] };
        let n_samples = 800;
        let samples = sample_gmm(&p, n_samples, 41);
        let mut cfg = LearnerConfig::default();
        cfg.n_query = 150;
        let cm =
            cluster_gmm(&samples, 2, 10.0, 0.4, 0.05, Some(6), 4000, 17, &cfg).unwrap();
        assert_eq!(cm.assignments.len(), n_samples);
        assert_eq!(cm.weights.len(), 2);
        for w in &cm.weights {
            assert!((w - 0.5).abs() < 0.1, "weight {w}");
        }
        // Match estimated means to the truth by nearest assignment.
        for mu in &means {
            let best = cm
                .means
                .iter()
                .map(|m| {
                    m.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.5, "mean error {best}");
        }
        // Pair test agrees with ground-truth component labels.
        let i0 = 0usize;
        let mut correct = 0;
        let mut total = 0;
        for j in 1..40 {
            let (same, _) = pair_test(&cm, &samples[i0], &samples[j]).unwrap();
            let truth = (samples[i0][0] > 5.0) == (samples[j][0] > 5.0);
            total += 1;
            if same == truth {
                correct += 1;
            }
        }
        assert!(correct * 10 >= total * 9, "pair accuracy {correct}/{total}");
    }
}
