//! Dense tensor algebra and scalar Hermite polynomials.
//!
//! All tensors here share one mode dimension `d` and are stored flat,
//! row-major by mode: the entry at multi-index `(i_1, …, i_t)` lives at flat
//! position `((i_1·d + i_2)·d + …)·d + i_t`.  Order 0 is a scalar (length-1
//! array), order 1 a vector.  Dense tensors appear only at desk scale — the
//! point of the crate is to avoid them — so storage is deliberately naive.

use serde::{Deserialize, Serialize};

use crate::{checked_dense_len, Error};

/// Maximum order accepted by [`symmetrize`]; the permutation sum is `order!`
/// terms per entry.
pub const SYMMETRIZE_ORDER_CAP: usize = 8;

/// A dense order-`order` tensor over `ℝ^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    order: usize,
    dim: usize,
    entries: Vec<f64>,
}

impl Tensor {
    /// Construct from a flat row-major entry array.
    pub fn new(order: usize, dim: usize, entries: Vec<f64>) -> Result<Self, Error> {
        if dim == 0 {
            return Err(Error::InvalidParameter("tensor dim must be positive".into()));
        }
        let expect = checked_dense_len(dim, order)?;
        if entries.len() != expect {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "order-{order} tensor over dim {dim} needs {expect} entries, got {}",
                    entries.len()
                ),
            });
        }
        Ok(Self { order, dim, entries })
    }

    /// The all-zero tensor.
    pub fn zeros(order: usize, dim: usize) -> Result<Self, Error> {
        let len = checked_dense_len(dim.max(1), order)?;
        Self::new(order, dim, vec![0.0; len])
    }

    /// An order-0 tensor holding one value.  `dim` still matters for shape
    /// compatibility with other tensors.
    pub fn scalar(dim: usize, value: f64) -> Self {
        Self { order: 0, dim, entries: vec![value] }
    }

    /// An order-1 tensor.
    pub fn from_vector(v: &[f64]) -> Result<Self, Error> {
        Self::new(1, v.len(), v.to_vec())
    }

    /// Tensor order (number of modes).
    pub fn order(&self) -> usize {
        self.order
    }

    /// Shared mode dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Flat row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Mutable flat entries (shape is fixed).
    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    /// Entry at a multi-index.
    pub fn get(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.order, "multi-index arity mismatch");
        let mut flat = 0usize;
        for &i in index {
            debug_assert!(i < self.dim);
            flat = flat * self.dim + i;
        }
        self.entries[flat]
    }

    /// Euclidean (Frobenius) norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// Scale every entry in place.
    pub fn scale(&mut self, c: f64) {
        for e in &mut self.entries {
            *e *= c;
        }
    }

    /// Entry-wise sum; shapes must match.
    pub fn add(&self, other: &Tensor) -> Result<Tensor, Error> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "add of order {}/dim {} with order {}/dim {}",
                    self.order, self.dim, other.order, other.dim
                ),
            });
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor { order: self.order, dim: self.dim, entries })
    }

    /// The order-(t+1) tensor `self ⊗ v` (new mode last).
    pub fn append_vector(&self, v: &[f64]) -> Result<Tensor, Error> {
        if v.len() != self.dim {
            return Err(Error::ShapeMismatch {
                context: format!("append of {}-vector to dim-{} tensor", v.len(), self.dim),
            });
        }
        checked_dense_len(self.dim, self.order + 1)?;
        let mut entries = Vec::with_capacity(self.entries.len() * self.dim);
        for &a in &self.entries {
            for &b in v {
                entries.push(a * b);
            }
        }
        Ok(Tensor { order: self.order + 1, dim: self.dim, entries })
    }
}

/// Entry-wise inner product `Σ_α a_α b_α` of two same-shape tensors.
pub fn tensor_inner(a: &Tensor, b: &Tensor) -> Result<f64, Error> {
    if a.order != b.order || a.dim != b.dim {
        return Err(Error::ShapeMismatch {
            context: format!(
                "inner product of order {}/dim {} with order {}/dim {}",
                a.order, a.dim, b.order, b.dim
            ),
        });
    }
    Ok(a.entries.iter().zip(&b.entries).map(|(x, y)| x * y).sum())
}

/// The order-`n` tensor power `v^⊗n`; `n = 0` gives the scalar 1.
pub fn outer_power(v: &[f64], n: usize) -> Result<Tensor, Error> {
    let d = v.len().max(1);
    let mut t = Tensor::scalar(v.len(), 1.0);
    t.dim = d;
    for _ in 0..n {
        t = t.append_vector(v)?;
    }
    t.dim = v.len();
    Ok(t)
}

/// Average of a tensor over all permutations of its modes.
///
/// Orders above [`SYMMETRIZE_ORDER_CAP`] are rejected (the sum has `order!`
/// terms per entry).
pub fn symmetrize(a: &Tensor) -> Result<Tensor, Error> {
    if a.order > SYMMETRIZE_ORDER_CAP {
        return Err(Error::InvalidParameter(format!(
            "symmetrize of order {} exceeds cap {SYMMETRIZE_ORDER_CAP}",
            a.order
        )));
    }
    if a.order < 2 {
        return Ok(a.clone());
    }
    let mut perm: Vec<usize> = (0..a.order).collect();
    let mut perms = Vec::new();
    permutations(&mut perm, 0, &mut perms);
    let count = perms.len() as f64;

    let mut out = Tensor::zeros(a.order, a.dim)?;
    let mut index = vec![0usize; a.order];
    let mut permuted = vec![0usize; a.order];
    for flat in 0..a.entries.len() {
        unflatten(flat, a.dim, &mut index);
        let mut acc = 0.0;
        for p in &perms {
            for (slot, &src) in p.iter().enumerate() {
                permuted[slot] = index[src];
            }
            acc += a.get(&permuted);
        }
        out.entries[flat] = acc / count;
    }
    Ok(out)
}

/// Normalized probabilists' Hermite polynomial `h_t(x) = He_t(x)/√t!`.
///
/// Uses the normalized three-term recurrence
/// `h_{n+1}(x) = (x·h_n(x) − √n·h_{n−1}(x))/√(n+1)`, which keeps every
/// intermediate bounded by a polynomial in `x` (no factorial overflow).
pub fn hermite_poly(t: usize, x: f64) -> f64 {
    match t {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0; // h_0
            let mut cur = x; // h_1
            for n in 1..t {
                let next = (x * cur - (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `ln n!`, by direct summation (exact enough for every order in scope).
pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

/// `ln n!!` (product of same-parity integers down to 1); `ln 0!! = ln(−1)!! = 0`.
pub(crate) fn ln_double_factorial(n: i64) -> f64 {
    let mut acc = 0.0;
    let mut j = n;
    while j >= 2 {
        acc += (j as f64).ln();
        j -= 2;
    }
    acc
}

/// `ln C(n, k)`.
pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Write the multi-index of `flat` (row-major over `dim`) into `index`.
pub(crate) fn unflatten(mut flat: usize, dim: usize, index: &mut [usize]) {
    for slot in (0..index.len()).rev() {
        index[slot] = flat % dim;
        flat /= dim;
    }
}

fn permutations(perm: &mut Vec<usize>, at: usize, out: &mut Vec<Vec<usize>>) {
    if at == perm.len() {
        out.push(perm.clone());
        return;
    }
    for i in at..perm.len() {
        perm.swap(at, i);
        permutations(perm, at + 1, out);
        perm.swap(at, i);
    }
}
