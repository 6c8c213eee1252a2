//! Succinct sketches of high-order moment tensors.
//!
//! The moment tensor of a weighted vector family `{(w_i, v_i)}` at order `t`
//! is `M_t = Σ_i w_i · v_i^⊗t`, an object with `d^t` entries.  This crate
//! estimates inner products `⟨M_t, Q⟩` against low-rank query tensors without
//! ever materializing `M_t`:
//!
//! * [`circuit`] — *sequential tensor computations*: arithmetic circuits whose
//!   only tensor-forming operation appends a vector in the last mode.  Such
//!   circuits admit an evaluation rule that carries `k`-dimensional images of
//!   every intermediate tensor instead of the tensors themselves.
//! * [`projection`] — *recursive pseudo-projections*: chains of maps
//!   `ℝ^{n_{i−1}} ⊗ ℝ^d → ℝ^{n_i}` with orthonormal rows, the structure that
//!   makes the projected evaluation rule exact.
//! * [`sketch`] — the multi-stage estimator that learns a good projection
//!   chain from sample streams and compresses `M_t` to a `k`-vector.
//! * [`models`] — synthetic data models (Gaussian mixtures, mixtures of
//!   linear regressions, positive sums of activations) and the Hermite
//!   coefficients the learners need.
//! * [`learners`] — the end-to-end applications: density estimation for
//!   Gaussian mixtures and regression mixtures, parameter-free clustering of
//!   separated mixtures, and agnostic learning of positive activation sums.
//! * [`oracle`] — slow, dense reference implementations used to validate the
//!   fast paths in tests; every oracle either cross-checks two independent
//!   derivations or reports a Monte-Carlo standard error.
//!
//! Determinism contract: every randomized routine takes an explicit 64-bit
//! seed, derives per-block seeds with a counter construction, and reduces
//! sums with a fixed pairwise tree, so results are byte-identical regardless
//! of thread count.

pub mod circuit;
pub mod error;
pub mod learners;
pub mod models;
pub mod oracle;
pub mod projection;
pub mod rng;
pub mod sketch;
pub mod tensor;

pub use error::Error;

/// Default cap on the number of entries a dense tensor operation may touch.
pub const DEFAULT_DENSE_CAP: u64 = 10_000_000;

/// Entry cap for dense tensor materialization.
///
/// Reads the `MOMENTSKETCH_DENSE_CAP` environment variable once; falls back
/// to [`DEFAULT_DENSE_CAP`] when unset or unparsable.
pub fn dense_cap() -> u64 {
    use std::sync::OnceLock;
    static CAP: OnceLock<u64> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("MOMENTSKETCH_DENSE_CAP")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(DEFAULT_DENSE_CAP)
    })
}

/// Number of entries of an order-`order` tensor over `ℝ^dim`, checked against
/// [`dense_cap`].
pub(crate) fn checked_dense_len(dim: usize, order: usize) -> Result<usize, Error> {
    let cap = dense_cap();
    let mut len: u64 = 1;
    for _ in 0..order {
        len = len.saturating_mul(dim as u64);
        if len > cap {
            return Err(Error::DenseCapExceeded { dim, order, cap });
        }
    }
    Ok(len as usize)
}
