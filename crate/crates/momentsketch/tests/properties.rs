//! Randomized structural invariants of the tensor/projection/sketch layers.

use std::collections::BTreeMap;

use momentsketch::circuit::{eval_full, eval_projected, CircuitBuilder, CircuitInput, Value};
use momentsketch::projection::{random_chain, rpp_apply_dense, top_k_subspace};
use momentsketch::rng::{rng_from, Rng};
use momentsketch::sketch::{build_sketch, required_orders, sketch_reconstruct_dense, MomentStream};
use momentsketch::tensor::{outer_power, tensor_inner, Tensor};
use proptest::prelude::*;
use rand::Rng as _;

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// ⟨a ⊗ v, b ⊗ w⟩ = ⟨a, b⟩·⟨v, w⟩: appending a last mode factors out of
    /// the inner product.
    #[test]
    fn append_factors_inner_products(
        d in 1usize..4,
        order in 0usize..4,
        seed in any::<u64>(),
    ) {
        let mut rng = rng_from(seed);
        let len = d.pow(order as u32);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let a = Tensor::new(order, d, draw(len)).unwrap();
        let b = Tensor::new(order, d, draw(len)).unwrap();
        let v = draw(d);
        let w = draw(d);
        let av = a.append_vector(&v).unwrap();
        let bw = b.append_vector(&w).unwrap();
        let lhs = tensor_inner(&av, &bw).unwrap();
        let dot: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum();
        let rhs = tensor_inner(&a, &b).unwrap() * dot;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    /// Projected evaluation of a rank-1 append chain equals projecting the
    /// dense rank-1 tensor.
    #[test]
    fn projected_chain_matches_dense_projection(
        d in 1usize..5,
        order in 1usize..5,
        k in 1usize..4,
        seed in any::<u64>(),
        v in vec_strategy(4),
    ) {
        let v = v[..d].to_vec();
        let phi = random_chain(d, order, k, seed);
        let mut b = CircuitBuilder::new();
        let sv = b.vector_input();
        let mut node = b.constant(1.0);
        for _ in 0..order {
            node = b.append(node, sv);
        }
        let c = b.finish(node);
        let input = CircuitInput::new(vec![Value::Vector(v.clone())]);
        let fast = eval_projected(&c, &input, &phi).unwrap();
        let dense = rpp_apply_dense(&phi, &eval_full(&c, &input).unwrap()).unwrap();
        for (x, y) in fast.iter().zip(&dense) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    /// Query results are linear in the circuit output: evaluating
    /// α·F + β·G matches α·eval(F) + β·eval(G) under any projection chain.
    #[test]
    fn projected_evaluation_is_linear(
        d in 1usize..4,
        order in 1usize..4,
        alpha in -2.0..2.0f64,
        beta in -2.0..2.0f64,
        seed in any::<u64>(),
    ) {
        let mut rng = rng_from(seed);
        let phi = random_chain(d, order, 2, seed);
        let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let build = |coeffs: Option<(f64, f64)>| {
            let mut b = CircuitBuilder::new();
            let su = b.vector_input();
            let sw = b.vector_input();
            let mut f = b.constant(1.0);
            let mut g = b.constant(1.0);
            for _ in 0..order {
                f = b.append(f, su);
                g = b.append(g, sw);
            }
            let out = match coeffs {
                Some((a, c)) => {
                    let ca = b.constant(a);
                    let cc = b.constant(c);
                    let fa = b.smul(ca, f);
                    let gc = b.smul(cc, g);
                    b.add(fa, gc)
                }
                None => f,
            };
            b.finish(out)
        };
        let input = CircuitInput::new(vec![Value::Vector(u.clone()), Value::Vector(w.clone())]);
        let combined = eval_projected(&build(Some((alpha, beta))), &input, &phi).unwrap();
        // Separate single-chain circuits (same slot layout, different output).
        let f_only = eval_projected(&build(Some((1.0, 0.0))), &input, &phi).unwrap();
        let g_only = eval_projected(&build(Some((0.0, 1.0))), &input, &phi).unwrap();
        for ((c, f), g) in combined.iter().zip(&f_only).zip(&g_only) {
            prop_assert!((c - (alpha * f + beta * g)).abs() <= 1e-9);
        }
    }

    /// The dominant-subspace stage always has orthonormal rows.
    #[test]
    fn top_k_stage_is_orthonormal(
        side in 2usize..7,
        k in 1usize..4,
        seed in any::<u64>(),
    ) {
        let mut rng = rng_from(seed);
        let mat = nalgebra::DMatrix::from_fn(side, side, |_, _| rng.gen_range(-1.0..1.0f64));
        let stage = top_k_subspace(&mat, k.min(side)).unwrap();
        let m = stage.matrix();
        let gram = &m * m.transpose();
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[(i, j)] - expect).abs() <= 1e-9);
            }
        }
    }

    /// Exact (noise-free) rank-1 streams reconstruct the exact moment tensor
    /// for any unit component vector.
    #[test]
    fn exact_rank1_sketch_reconstructs(
        d in 2usize..4,
        m in 1usize..4,
        v in vec_strategy(3),
        seed in any::<u64>(),
    ) {
        let mut v = v[..d].to_vec();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 0.2);
        v.iter_mut().for_each(|x| *x /= norm);
        let streams: BTreeMap<usize, MomentStream> = required_orders(m)
            .into_iter()
            .map(|t| {
                let v = v.clone();
                let mut b = CircuitBuilder::new();
                let sv = b.vector_input();
                let mut node = b.constant(1.0);
                for _ in 0..t {
                    node = b.append(node, sv);
                }
                let c = b.finish(node);
                let stream = MomentStream::new(c, move |_, _: &mut Rng| {
                    CircuitInput::new(vec![Value::Vector(v.clone())])
                });
                (t, stream)
            })
            .collect();
        let sketch = build_sketch(&streams, 1, m, d, 8, seed).unwrap();
        let recon = sketch_reconstruct_dense(&sketch).unwrap();
        let exact = outer_power(&v, m).unwrap();
        for (a, b) in recon.entries().iter().zip(exact.entries()) {
            prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }
}
