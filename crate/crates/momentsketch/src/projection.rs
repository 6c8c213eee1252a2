//! Pseudo-projections and recursive pseudo-projections.
//!
//! A *pseudo-projection* is a matrix `A` with orthonormal rows
//! (`A·Aᵀ = I`): an orthogonal projection onto its row space composed with an
//! isometry down to coordinates.  A *recursive pseudo-projection* (RPP) is a
//! chain of stage maps `φ_i : ℝ^{n_{i−1}} ⊗ ℝ^d → ℝ^{n_i}` with `n_0 = 1`;
//! applied to an order-`t` tensor stage by stage (each stage contracting the
//! first two remaining modes), the chain induces a pseudo-projection
//! `(ℝ^d)^⊗t → ℝ^{n_t}`.  Compositions and tensor products of such chains
//! are again chains of the same form, which is what lets the sketch build
//! nested projections without ever materializing them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::Error;

/// Per-entry tolerance for the `A·Aᵀ = I` row-orthonormality invariant.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// A matrix with orthonormal rows, stored in a shape-aware representation.
///
/// The sketch algorithm produces two special shapes in bulk — identities and
/// `I_n ⊗ θ` blocks — and applying them densely would dominate runtime, so
/// they keep their structure.  [`PseudoProjection::matrix`] materializes the
/// dense form on demand.
#[derive(Debug, Clone)]
pub struct PseudoProjection {
    rows: usize,
    cols: usize,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense(DMatrix<f64>),
    Identity,
    /// `I_n ⊗ inner`: the input splits into `n` chunks, `inner` applied to each.
    KronIdentity { n: usize, inner: Box<PseudoProjection> },
}

impl PseudoProjection {
    /// Build from a dense matrix, checking row orthonormality.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self, Error> {
        let (rows, cols) = m.shape();
        if rows > cols {
            return Err(Error::InvalidProjection(format!(
                "{rows}×{cols} matrix has more rows than columns"
            )));
        }
        let gram = &m * m.transpose();
        for i in 0..rows {
            for j in 0..rows {
                let target = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - target).abs() > ORTHONORMALITY_TOL {
                    return Err(Error::InvalidProjection(format!(
                        "rows are not orthonormal: (A·Aᵀ)[{i},{j}] = {}",
                        gram[(i, j)]
                    )));
                }
            }
        }
        Ok(Self { rows, cols, repr: Repr::Dense(m) })
    }

    /// The `n×n` identity.
    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, repr: Repr::Identity }
    }

    /// The block map `I_n ⊗ inner`.
    pub fn kron_identity(n: usize, inner: PseudoProjection) -> Self {
        Self {
            rows: n * inner.rows,
            cols: n * inner.cols,
            repr: Repr::KronIdentity { n, inner: Box::new(inner) },
        }
    }

    /// Target dimension.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Source dimension.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Apply to a flat vector: `out = A·x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        match &self.repr {
            Repr::Identity => out.copy_from_slice(x),
            Repr::Dense(m) => {
                for (r, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (c, &v) in x.iter().enumerate() {
                        acc += m[(r, c)] * v;
                    }
                    *o = acc;
                }
            }
            Repr::KronIdentity { n, inner } => {
                for b in 0..*n {
                    inner.apply(
                        &x[b * inner.cols..(b + 1) * inner.cols],
                        &mut out[b * inner.rows..(b + 1) * inner.rows],
                    );
                }
            }
        }
    }

    /// Apply the transpose: `out = Aᵀ·y` (used for dense reconstruction).
    pub fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        match &self.repr {
            Repr::Identity => out.copy_from_slice(y),
            Repr::Dense(m) => {
                for o in out.iter_mut() {
                    *o = 0.0;
                }
                for (r, &v) in y.iter().enumerate() {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += m[(r, c)] * v;
                    }
                }
            }
            Repr::KronIdentity { n, inner } => {
                for b in 0..*n {
                    inner.apply_transpose(
                        &y[b * inner.rows..(b + 1) * inner.rows],
                        &mut out[b * inner.cols..(b + 1) * inner.cols],
                    );
                }
            }
        }
    }

    /// Materialize the dense matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Identity => DMatrix::identity(self.rows, self.cols),
            Repr::KronIdentity { n, inner } => {
                let im = inner.matrix();
                let mut out = DMatrix::zeros(self.rows, self.cols);
                for b in 0..*n {
                    out.view_mut((b * inner.rows, b * inner.cols), (inner.rows, inner.cols))
                        .copy_from(&im);
                }
                out
            }
        }
    }
}

impl Serialize for PseudoProjection {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let m = self.matrix();
        let rows: Vec<Vec<f64>> =
            (0..self.rows).map(|r| (0..self.cols).map(|c| m[(r, c)]).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PseudoProjection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged projection matrix"));
        }
        let m = DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]);
        PseudoProjection::from_matrix(m).map_err(serde::de::Error::custom)
    }
}

/// A chain of stage maps `φ_1, …, φ_t` with `n_0 = 1` over base dimension `d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecursivePseudoProjection {
    base_dim: usize,
    stages: Vec<PseudoProjection>,
}

impl RecursivePseudoProjection {
    /// The empty chain (order 0, target dimension 1).
    pub fn empty(base_dim: usize) -> Result<Self, Error> {
        if base_dim == 0 {
            return Err(Error::InvalidProjection("base_dim must be positive".into()));
        }
        Ok(Self { base_dim, stages: Vec::new() })
    }

    /// Build from stage maps, checking the dimension chain
    /// `cols(φ_i) = n_{i−1}·d`.
    pub fn new(base_dim: usize, stages: Vec<PseudoProjection>) -> Result<Self, Error> {
        let mut rpp = Self::empty(base_dim)?;
        for stage in stages {
            rpp = rpp_extend(&rpp, stage)?;
        }
        Ok(rpp)
    }

    /// The order-`t` identity chain over `ℝ^d` (every stage `I`).
    pub fn identity(base_dim: usize, order: usize) -> Result<Self, Error> {
        let mut stages = Vec::with_capacity(order);
        let mut n = 1usize;
        for _ in 0..order {
            stages.push(PseudoProjection::identity(n * base_dim));
            n *= base_dim;
        }
        Self::new(base_dim, stages)
    }

    /// Base dimension `d`.
    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    /// Number of stages `t`.
    pub fn order(&self) -> usize {
        self.stages.len()
    }

    /// Final dimension `n_t` (1 for the empty chain).
    pub fn target_dim(&self) -> usize {
        self.stages.last().map_or(1, PseudoProjection::rows)
    }

    /// Stage maps in application order.
    pub fn stages(&self) -> &[PseudoProjection] {
        &self.stages
    }

    /// Intermediate dimensions `n_0, …, n_t`.
    pub fn dims(&self) -> Vec<usize> {
        let mut out = vec![1];
        out.extend(self.stages.iter().map(PseudoProjection::rows));
        out
    }
}

/// Append one stage to a chain.
pub fn rpp_extend(
    phi: &RecursivePseudoProjection,
    next: PseudoProjection,
) -> Result<RecursivePseudoProjection, Error> {
    let need = phi.target_dim() * phi.base_dim;
    if next.cols() != need {
        return Err(Error::InvalidProjection(format!(
            "stage {} must have {need} columns (n_{}·d = {}·{}), got {}",
            phi.order() + 1,
            phi.order(),
            phi.target_dim(),
            phi.base_dim,
            next.cols()
        )));
    }
    let mut stages = phi.stages.clone();
    stages.push(next);
    Ok(RecursivePseudoProjection { base_dim: phi.base_dim, stages })
}

/// The tensor-product chain `Φ ⊗ Θ`.
///
/// Its stages are `φ_1, …, φ_t` followed by `I_n ⊗ θ_1, …, I_n ⊗ θ_s` with
/// `n` the target dimension of `Φ`; the induced map sends `A ⊗ B` to
/// `Φ(A) ⊗ Θ(B)`.
pub fn rpp_tensor_product(
    phi: &RecursivePseudoProjection,
    theta: &RecursivePseudoProjection,
) -> Result<RecursivePseudoProjection, Error> {
    if phi.base_dim != theta.base_dim {
        return Err(Error::InvalidProjection(format!(
            "tensor product of chains over different base dims {} and {}",
            phi.base_dim, theta.base_dim
        )));
    }
    let n = phi.target_dim();
    let mut stages = phi.stages.clone();
    for th in &theta.stages {
        stages.push(PseudoProjection::kron_identity(n, th.clone()));
    }
    Ok(RecursivePseudoProjection { base_dim: phi.base_dim, stages })
}

/// Literal stage-by-stage application to a dense tensor (reference semantics
/// for the circuit module's projected evaluator).
pub fn rpp_apply_dense(
    phi: &RecursivePseudoProjection,
    t: &Tensor,
) -> Result<Vec<f64>, Error> {
    if t.order() != phi.order() || t.dim() != phi.base_dim {
        return Err(Error::ShapeMismatch {
            context: format!(
                "projection chain of order {}/base {} applied to tensor of order {}/dim {}",
                phi.order(),
                phi.base_dim,
                t.order(),
                t.dim()
            ),
        });
    }
    let d = phi.base_dim;
    // `cur` holds an (n_i × d^{t−i}) array, row-major; stage i+1 contracts the
    // leading n_i·d block of each column group.
    let mut cur = t.entries().to_vec();
    let mut rest = cur.len(); // trailing multi-index size, initially d^t (n_0 = 1)
    let mut n_prev = 1usize;
    for stage in &phi.stages {
        rest /= d; // remaining trailing multi-index size, d^{t-i}
        let src_lead = n_prev * d;
        let dst_lead = stage.rows();
        let mut next = vec![0.0; dst_lead * rest];
        // Gather each trailing column, apply the stage, scatter back.
        let mut col_in = vec![0.0; src_lead];
        let mut col_out = vec![0.0; dst_lead];
        for r in 0..rest {
            for l in 0..src_lead {
                col_in[l] = cur[l * rest + r];
            }
            stage.apply(&col_in, &mut col_out);
            for l in 0..dst_lead {
                next[l * rest + r] = col_out[l];
            }
        }
        cur = next;
        n_prev = dst_lead;
    }
    Ok(cur)
}

/// Stage-by-stage application of the chain's transpose: maps a compressed
/// vector in `ℝ^{n_t}` back to the dense order-`t` tensor `Φᵀ(y)`.
pub fn rpp_apply_transpose_dense(
    phi: &RecursivePseudoProjection,
    y: &[f64],
) -> Result<Vec<f64>, Error> {
    if y.len() != phi.target_dim() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "chain transpose expects a length-{} vector, got {}",
                phi.target_dim(),
                y.len()
            ),
        });
    }
    let d = phi.base_dim;
    // Reverse of `rpp_apply_dense`: undo stage i+1 by expanding the leading
    // n_{i+1} block of each trailing column group to n_i·d.
    let mut cur = y.to_vec();
    let mut rest = 1usize; // trailing multi-index size, d^{t-i-1} at stage i+1
    for stage in phi.stages.iter().rev() {
        let src_lead = stage.rows();
        let dst_lead = stage.cols(); // n_i · d
        let mut next = vec![0.0; dst_lead * rest];
        let mut col_in = vec![0.0; src_lead];
        let mut col_out = vec![0.0; dst_lead];
        for r in 0..rest {
            for l in 0..src_lead {
                col_in[l] = cur[l * rest + r];
            }
            stage.apply_transpose(&col_in, &mut col_out);
            for l in 0..dst_lead {
                next[l * rest + r] = col_out[l];
            }
        }
        cur = next;
        rest *= d;
    }
    Ok(cur)
}

/// Projection onto the span of the top-`k` eigenvectors of `(m + mᵀ)/2`.
///
/// Eigenvectors are ranked by absolute eigenvalue; ties break by descending
/// signed eigenvalue, then by position in the decomposition.  Each row's sign
/// is fixed so its first coordinate of non-negligible magnitude is positive,
/// making the result deterministic.
pub fn top_k_subspace(m: &DMatrix<f64>, k: usize) -> Result<PseudoProjection, Error> {
    let (p, q) = m.shape();
    if p != q {
        return Err(Error::InvalidProjection(format!("matrix is {p}×{q}, not square")));
    }
    if p < k {
        return Err(Error::InvalidProjection(format!(
            "cannot take top-{k} subspace of a {p}×{p} matrix"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        lb.abs()
            .partial_cmp(&la.abs())
            .unwrap()
            .then(lb.partial_cmp(&la).unwrap())
            .then(a.cmp(&b))
    });
    let mut rows = DMatrix::zeros(k, p);
    for (r, &idx) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(idx);
        let flip = col
            .iter()
            .find(|v| v.abs() > 1e-12)
            .map_or(1.0, |v| if *v < 0.0 { -1.0 } else { 1.0 });
        for c in 0..p {
            rows[(r, c)] = flip * col[c];
        }
    }
    PseudoProjection::from_matrix(rows)
}

/// A seeded random stage with orthonormal rows (QR of a Gaussian matrix);
/// harness and benchmark utility.
pub fn random_stage(rows: usize, cols: usize, seed: u64) -> PseudoProjection {
    use rand::Rng as _;
    let mut rng = crate::rng::rng_from(seed);
    let g = DMatrix::from_fn(cols, rows, |_, _| rng.gen_range(-1.0..1.0f64));
    let qr = g.qr();
    let q = qr.q();
    PseudoProjection::from_matrix(q.columns(0, rows).transpose().into_owned()).unwrap()
}

/// A seeded random chain of the given order with target dims capped at `k`;
/// harness and benchmark utility.
pub fn random_chain(d: usize, order: usize, k: usize, seed: u64) -> RecursivePseudoProjection {
    let mut rpp = RecursivePseudoProjection::empty(d).unwrap();
    for i in 0..order {
        let cols = rpp.target_dim() * d;
        let rows = k.min(cols);
        rpp = rpp_extend(&rpp, random_stage(rows, cols, crate::rng::derive_seed(seed, i as u64)))
            .unwrap();
    }
    rpp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::outer_power;
    use rand::Rng as _;

    use super::random_stage as random_pp;
    use super::random_chain as random_rpp;

    #[test]
    fn top_k_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let pp = top_k_subspace(&m, 2).unwrap();
        let a = pp.matrix();
        // Rows span e1, e2.
        assert!((a[(0, 0)].abs() - 1.0).abs() < 1e-12 && a[(0, 2)].abs() < 1e-12);
        assert!((a[(1, 1)].abs() - 1.0).abs() < 1e-12 && a[(1, 2)].abs() < 1e-12);
        // Sign convention: leading entries positive.
        assert!(a[(0, 0)] > 0.0 && a[(1, 1)] > 0.0);
    }

    #[test]
    fn top_k_rank_one() {
        let v = nalgebra::DVector::from_vec(vec![0.6, -0.8, 0.0]);
        let m = &v * v.transpose();
        let pp = top_k_subspace(&m, 1).unwrap();
        let a = pp.matrix();
        let dot: f64 = (0..3).map(|i| a[(0, i)] * v[i]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-10);
        assert!(a[(0, 0)] > 0.0, "sign convention: first nonzero coordinate positive");
    }

    #[test]
    fn top_k_recovers_component_span_under_small_noise() {
        let mut rng = crate::rng::rng_from(5);
        let d = 6;
        let xs: Vec<nalgebra::DVector<f64>> = (0..3)
            .map(|_| nalgebra::DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0f64)))
            .collect();
        let mut m = DMatrix::zeros(d, d);
        for x in &xs {
            m += x * x.transpose();
        }
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += rng.gen_range(-1e-6..1e-6);
            }
        }
        let pp = top_k_subspace(&m, 3).unwrap();
        let a = pp.matrix();
        let proj = a.transpose() * &a;
        for x in &xs {
            let residual = (x - &proj * x).norm();
            assert!(residual <= 1e-4, "residual {residual}");
        }
    }

    #[test]
    fn top_k_ignores_asymmetric_perturbation() {
        let mut rng = crate::rng::rng_from(9);
        let d = 5;
        let base = DMatrix::from_fn(d, d, |i, j| ((i * d + j) as f64).sin());
        let sym = (&base + base.transpose()) * 0.5;
        let mut skew = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..i {
                let v = rng.gen_range(-1.0..1.0);
                skew[(i, j)] = v;
                skew[(j, i)] = -v;
            }
        }
        let a = top_k_subspace(&sym, 3).unwrap().matrix();
        let b = top_k_subspace(&(&sym + skew), 3).unwrap().matrix();
        let pa = a.transpose() * a;
        let pb = b.transpose() * b;
        assert!((pa - pb).amax() < 1e-8);
    }

    #[test]
    fn chain_dimension_mismatch_rejected() {
        let rpp = RecursivePseudoProjection::empty(3).unwrap();
        // Stage 1 needs 3 columns.
        assert!(rpp_extend(&rpp, PseudoProjection::identity(4)).is_err());
    }

    #[test]
    fn induced_map_is_a_pseudo_projection() {
        // Dense matrix of the induced map (ℝ^d)^⊗t → ℝ^{n_t}, via basis tensors.
        let d = 3;
        let order = 3;
        let rpp = random_rpp(d, order, 2, 42);
        let total = d.pow(order as u32);
        let mut induced = DMatrix::zeros(rpp.target_dim(), total);
        for flat in 0..total {
            let mut entries = vec![0.0; total];
            entries[flat] = 1.0;
            let t = Tensor::new(order, d, entries).unwrap();
            let img = rpp_apply_dense(&rpp, &t).unwrap();
            for (r, v) in img.iter().enumerate() {
                induced[(r, flat)] = *v;
            }
        }
        PseudoProjection::from_matrix(induced).expect("composition of stages is a pseudo-projection");
    }

    #[test]
    fn identity_chain_flattens() {
        let d = 2;
        let t = outer_power(&[1.0, -2.0], 3).unwrap();
        let rpp = RecursivePseudoProjection::identity(d, 3).unwrap();
        assert_eq!(rpp_apply_dense(&rpp, &t).unwrap(), t.entries());
    }

    #[test]
    fn norm_contraction_and_in_subspace_preservation() {
        let mut rng = crate::rng::rng_from(17);
        let d = 3;
        let order = 3;
        for trial in 0..100 {
            let rpp = random_rpp(d, order, 2, trial);
            let len = d.pow(order as u32);
            let t = Tensor::new(order, d, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let img = rpp_apply_dense(&rpp, &t).unwrap();
            let img_norm = img.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(img_norm <= t.norm() + 1e-10, "‖Φ(T)‖ must not exceed ‖T‖");
        }
        // Identity stages preserve norm exactly (T trivially in row space).
        let t = outer_power(&[0.3, 0.4, -1.0], 3).unwrap();
        let rpp = RecursivePseudoProjection::identity(3, 3).unwrap();
        let img = rpp_apply_dense(&rpp, &t).unwrap();
        let img_norm = img.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((img_norm - t.norm()).abs() < 1e-8);
    }

    #[test]
    fn tensor_product_matches_kronecker_at_order_one() {
        let d = 3;
        let phi = RecursivePseudoProjection::new(d, vec![random_pp(2, d, 1)]).unwrap();
        let theta = RecursivePseudoProjection::new(d, vec![random_pp(2, d, 2)]).unwrap();
        let prod = rpp_tensor_product(&phi, &theta).unwrap();
        assert_eq!(prod.order(), 2);
        assert_eq!(prod.target_dim(), 4);
        // Induced action on u⊗w equals (Φu)⊗(Θw).
        let u = [0.5, -1.0, 2.0];
        let w = [1.5, 0.25, -0.75];
        let t = outer_power(&u, 1).unwrap().append_vector(&w).unwrap();
        let got = rpp_apply_dense(&prod, &t).unwrap();
        let mut pu = vec![0.0; 2];
        let mut tw = vec![0.0; 2];
        phi.stages()[0].apply(&u, &mut pu);
        theta.stages()[0].apply(&w, &mut tw);
        for i in 0..2 {
            for j in 0..2 {
                assert!((got[i * 2 + j] - pu[i] * tw[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn nested_tensor_product_has_the_algorithm_shape() {
        // Φ' = Φ ⊗ I_d ⊗ Φ ⊗ I_d with Φ of order r, target k: target k²d².
        let d = 3;
        let k = 2;
        let phi = random_rpp(d, 2, k, 7);
        let eye = RecursivePseudoProjection::identity(d, 1).unwrap();
        let p1 = rpp_tensor_product(&phi, &eye).unwrap();
        let p2 = rpp_tensor_product(&p1, &phi).unwrap();
        let p3 = rpp_tensor_product(&p2, &eye).unwrap();
        assert_eq!(p3.order(), 2 * phi.order() + 2);
        assert_eq!(p3.target_dim(), k * d * k * d);
    }

    #[test]
    fn serde_roundtrip_preserves_action() {
        let rpp = random_rpp(3, 2, 2, 99);
        let json = serde_json::to_string(&rpp).unwrap();
        let back: RecursivePseudoProjection = serde_json::from_str(&json).unwrap();
        let t = outer_power(&[0.1, 0.7, -0.3], 2).unwrap();
        let a = rpp_apply_dense(&rpp, &t).unwrap();
        let b = rpp_apply_dense(&back, &t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
