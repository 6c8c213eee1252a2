//! Moment-sketch construction and querying.
//!
//! The central object is a [`MomentSketch`] of the order-`m` moment tensor
//! `M_m = Σ_i w_i v_i^⊗m`: a recursive pseudo-projection chain `Φ_m` learned
//! stage by stage from unbiased estimator streams, plus the compressed
//! average `a_vec = Φ_m(M_m)` (up to sampling noise).  Queries contract the
//! sketch against any estimator of a query tensor `T(x)` expressed as a
//! circuit over an `(X, Y)`-partitioned input, using a frozen seeded `Y`
//! bank so the resulting function of `x` is deterministic.
//!
//! Build cost is `O(stages · N · circuit size · k²d²)` with nothing of size
//! `d^m` ever allocated; per-stage batches use disjoint derived seeds and
//! fixed-size blocks reduced by pairwise summation, so results are
//! bit-identical regardless of thread count.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitInput, ProjectedEvaluator, TensorCircuit, Value};
use crate::projection::{
    rpp_apply_transpose_dense, rpp_extend, rpp_tensor_product, top_k_subspace,
    RecursivePseudoProjection,
};
use crate::rng::{derive_seed, pairwise_sum, pairwise_sum_scalar, rng_from, Rng};
use crate::tensor::Tensor;
use crate::{checked_dense_len, Error};

/// Number of draws evaluated per parallel work unit.  Fixed (not tuned per
/// machine) because the reduction tree shape is part of the determinism
/// contract.
pub const BLOCK_SIZE: usize = 1024;

/// Type of the per-draw samplers: called with the global draw index and a
/// block-local RNG, returns one circuit input.
pub type StreamSampler = Box<dyn Fn(u64, &mut Rng) -> CircuitInput + Send + Sync>;

/// An unbiased estimator stream for one tensor order: a circuit `𝒮_t`
/// together with a sampler for its input distribution `𝒟_t`.
pub struct MomentStream {
    /// The estimator circuit; its declared order is the stream order `t`.
    pub circuit: TensorCircuit,
    /// Fresh-input callback.  The draw index is global per order so that
    /// samplers backed by a finite dataset consume disjoint blocks across
    /// the stages that share an order.
    pub sampler: StreamSampler,
}

impl MomentStream {
    /// Bundle a circuit with its input sampler.
    pub fn new(
        circuit: TensorCircuit,
        sampler: impl Fn(u64, &mut Rng) -> CircuitInput + Send + Sync + 'static,
    ) -> Self {
        Self { circuit, sampler: Box::new(sampler) }
    }

    /// The stream order `t`.
    pub fn order(&self) -> usize {
        self.circuit.order()
    }
}

/// A compressed estimate of an order-`m` moment tensor over `ℝ^d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentSketch {
    /// Target rank (stage ranks are additionally clamped to the available
    /// dimension, so early stages may be narrower).
    pub k: usize,
    /// Tensor order.
    pub m: usize,
    /// Ambient dimension.
    pub d: usize,
    /// The learned pseudo-projection chain `Φ_m`.
    pub phi: RecursivePseudoProjection,
    /// The compressed moment `A = Φ_m(M_m)` estimate.
    pub a_vec: Vec<f64>,
    /// Draws averaged per stage.
    pub n_samples: usize,
    /// Master seed of the build.
    pub seed: u64,
    /// Free-text record of any rescaling baked into the streams (e.g. a
    /// radius normalization of the component vectors).
    pub scale_note: String,
}

/// A query-side estimator: a circuit over an input partitioned into a
/// caller-supplied `X` part (the first `x_slots` slots) and a random `Y`
/// part drawn from a frozen bank.
pub struct QueryStream {
    /// The query circuit `ℱ_m(x, y)`; order must match the sketch.
    pub circuit: TensorCircuit,
    /// How many leading slots the caller fills per query.
    pub x_slots: usize,
    /// Draws the `Y`-part values (`slots.len() − x_slots` of them).
    pub y_sampler: Box<dyn Fn(&mut Rng) -> Vec<Value> + Send + Sync>,
    /// Bank size `N′`.
    pub n_query: usize,
    /// Seed of the frozen bank.
    pub y_bank_seed: u64,
}

impl QueryStream {
    /// Materialize the frozen `Y` bank (entry `j` from seed
    /// `derive_seed(y_bank_seed, j)`).
    pub fn bank(&self) -> Vec<Vec<Value>> {
        (0..self.n_query)
            .map(|j| {
                let mut rng = rng_from(derive_seed(self.y_bank_seed, j as u64));
                (self.y_sampler)(&mut rng)
            })
            .collect()
    }
}

/// The stream orders `build_sketch` requires for order `m`: every even
/// order in `{2, …, 2m}` plus `m` itself (`{0}` for the degenerate `m = 0`).
pub fn required_orders(m: usize) -> Vec<usize> {
    if m == 0 {
        return vec![0];
    }
    let mut orders: Vec<usize> = (1..=m).map(|r| 2 * r).collect();
    if m % 2 == 1 {
        orders.push(m);
    }
    orders.sort_unstable();
    orders
}

/// Average `n` projected evaluations of `stream` under `phi`, drawing with
/// global indices `offset..offset + n`.  Blocks of [`BLOCK_SIZE`] draws get
/// independent derived seeds and are reduced pairwise in order, so the
/// result does not depend on how blocks are scheduled across threads.
fn stage_average(
    stream: &MomentStream,
    phi: &RecursivePseudoProjection,
    n: usize,
    offset: u64,
    stage_seed: u64,
) -> Result<Vec<f64>, Error> {
    let n_blocks = n.div_ceil(BLOCK_SIZE);
    let block_sums: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| -> Result<Vec<f64>, Error> {
            let lo = b * BLOCK_SIZE;
            let hi = n.min(lo + BLOCK_SIZE);
            let mut rng = rng_from(derive_seed(stage_seed, b as u64));
            let mut eval = ProjectedEvaluator::new(&stream.circuit, phi)?;
            let mut draws = Vec::with_capacity(hi - lo);
            for i in lo..hi {
                let input = (stream.sampler)(offset + i as u64, &mut rng);
                draws.push(eval.eval(&input)?.to_vec());
            }
            Ok(pairwise_sum(draws))
        })
        .collect::<Result<_, _>>()?;
    let mut total = pairwise_sum(block_sums);
    for v in &mut total {
        *v /= n as f64;
    }
    Ok(total)
}

/// Build a [`MomentSketch`] of order `m` over `ℝ^d` with target rank `k`,
/// averaging `n` stream draws per stage.
///
/// Stage 1 averages the order-2 stream densely as a `d×d` matrix and takes
/// its top-`k` eigenspace as `φ_1`.  Stage `r+1` averages the order-`2r+2`
/// stream under `Φ_r ⊗ I_d ⊗ Φ_r ⊗ I_d`, reshapes to `(n_r·d) × (n_r·d)`,
/// and extends the chain by that matrix's top-`k` eigenspace.  Finally
/// `a_vec` averages the order-`m` stream under the finished chain.  Every
/// stage draws from an independent derived seed; when one order feeds two
/// stages, draw indices continue so dataset-backed samplers stay disjoint.
pub fn build_sketch(
    streams: &BTreeMap<usize, MomentStream>,
    k: usize,
    m: usize,
    d: usize,
    n: usize,
    seed: u64,
) -> Result<MomentSketch, Error> {
    if d < 1 || k < 1 || n < 1 {
        return Err(Error::InvalidParameter(format!(
            "sketch build needs d ≥ 1, k ≥ 1, n ≥ 1 (got d = {d}, k = {k}, n = {n})"
        )));
    }
    for t in required_orders(m) {
        let s = streams.get(&t).ok_or(Error::MissingStream {
            order: t,
            sketch_order: m,
            max_even: 2 * m,
        })?;
        if s.order() != t {
            return Err(Error::ShapeMismatch {
                context: format!("stream registered at order {t} has circuit order {}", s.order()),
            });
        }
    }

    // Global draw offset per order, advanced as stages consume draws.
    let mut offsets: BTreeMap<usize, u64> = BTreeMap::new();
    let mut take = |order: usize| -> u64 {
        let slot = offsets.entry(order).or_insert(0);
        let off = *slot;
        *slot += n as u64;
        off
    };

    if m == 0 {
        let phi = RecursivePseudoProjection::empty(d)?;
        let a_vec = stage_average(&streams[&0], &phi, n, take(0), derive_seed(seed, 0))?;
        return Ok(MomentSketch {
            k,
            m,
            d,
            phi,
            a_vec,
            n_samples: n,
            seed,
            scale_note: String::new(),
        });
    }

    // Stage 1: dense d×d average of the order-2 stream.
    let id2 = RecursivePseudoProjection::identity(d, 2)?;
    let a1 = stage_average(&streams[&2], &id2, n, take(2), derive_seed(seed, 1))?;
    let phi1 = top_k_subspace(&DMatrix::from_row_slice(d, d, &a1), k.min(d))?;
    let mut chain = RecursivePseudoProjection::new(d, vec![phi1])?;

    // Stages 2..m: grow the chain one order at a time.
    let id1 = RecursivePseudoProjection::identity(d, 1)?;
    for r in 1..m {
        let phi_rid = rpp_tensor_product(&chain, &id1)?;
        let phi_prime = rpp_tensor_product(&rpp_tensor_product(&phi_rid, &chain)?, &id1)?;
        let t = 2 * r + 2;
        let avg = stage_average(&streams[&t], &phi_prime, n, take(t), derive_seed(seed, (r + 1) as u64))?;
        let side = chain.target_dim() * d;
        debug_assert_eq!(avg.len(), side * side);
        let next = top_k_subspace(&DMatrix::from_row_slice(side, side, &avg), k.min(side))?;
        chain = rpp_extend(&chain, next)?;
    }

    // Final compression of the order-m stream.
    let a_vec = stage_average(
        &streams[&m],
        &chain,
        n,
        take(m),
        derive_seed(seed, (m + 1) as u64),
    )?;

    Ok(MomentSketch {
        k,
        m,
        d,
        phi: chain,
        a_vec,
        n_samples: n,
        seed,
        scale_note: String::new(),
    })
}

/// A query session holding the frozen `Y` bank and reusable evaluation
/// buffers for one `(sketch, stream)` pair.
pub struct QueryEvaluator<'a> {
    sketch: &'a MomentSketch,
    stream: &'a QueryStream,
    bank: Vec<Vec<Value>>,
    eval: ProjectedEvaluator<'a>,
}

impl<'a> QueryEvaluator<'a> {
    /// Validate shapes, build the bank, preallocate buffers.
    pub fn new(sketch: &'a MomentSketch, stream: &'a QueryStream) -> Result<Self, Error> {
        if stream.circuit.order() != sketch.m {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "query circuit order {} vs sketch order {}",
                    stream.circuit.order(),
                    sketch.m
                ),
            });
        }
        if stream.x_slots > stream.circuit.slots().len() {
            return Err(Error::InvalidParameter(format!(
                "x_slots = {} exceeds the circuit's {} slots",
                stream.x_slots,
                stream.circuit.slots().len()
            )));
        }
        if stream.n_query == 0 {
            return Err(Error::InvalidParameter("query bank size must be ≥ 1".into()));
        }
        let eval = ProjectedEvaluator::new(&stream.circuit, &sketch.phi)?;
        Ok(Self { sketch, stream, bank: stream.bank(), eval })
    }

    /// `⟨a_vec, B(x)⟩` with `B(x)` the bank average of the projected query
    /// circuit at `x`.  Pure and deterministic in `(sketch, bank, x)`.
    pub fn query(&mut self, x: &[Value]) -> Result<f64, Error> {
        if x.len() != self.stream.x_slots {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "query expects {} X-part values, got {}",
                    self.stream.x_slots,
                    x.len()
                ),
            });
        }
        let mut per_draw = Vec::with_capacity(self.bank.len());
        let mut values = Vec::with_capacity(self.stream.circuit.slots().len());
        for y in &self.bank {
            values.clear();
            values.extend_from_slice(x);
            values.extend_from_slice(y);
            let input = CircuitInput { values: std::mem::take(&mut values) };
            let proj = self.eval.eval(&input)?;
            let dot: f64 = proj.iter().zip(&self.sketch.a_vec).map(|(a, b)| a * b).sum();
            per_draw.push(dot);
            values = input.values;
        }
        Ok(pairwise_sum_scalar(&per_draw) / self.bank.len() as f64)
    }
}

/// One-shot query: build a session and evaluate at a single `x`.
pub fn query_sketch(s: &MomentSketch, q: &QueryStream, x: &[Value]) -> Result<f64, Error> {
    QueryEvaluator::new(s, q)?.query(x)
}

/// Decompress the sketch to the dense order-`m` tensor `Φ_mᵀ(a_vec)` — the
/// implied estimate of `M_m`.  Desk-scale only (`d^m` must fit the cap).
pub fn sketch_reconstruct_dense(s: &MomentSketch) -> Result<Tensor, Error> {
    checked_dense_len(s.d, s.m)?;
    let entries = rpp_apply_transpose_dense(&s.phi, &s.a_vec)?;
    Tensor::new(s.m, s.d, entries)
}
