//! Brute-force reference implementations at desk scale.
//!
//! Everything here is intentionally naive and dense: partition sums, full
//! outer powers, plain Monte-Carlo averages.  These are the ground truth the
//! fast paths are tested against.  Operations with two independent
//! derivations (`dense_ext_hermite`, `exact_query`) compute both and *panic*
//! on disagreement — an inconsistency is a construction bug, never something
//! to absorb into a tolerance.

use crate::circuit::{eval_full, CircuitInput, TensorCircuit};
use crate::rng::{derive_seed, rng_from, Rng};
use crate::tensor::{ln_factorial, outer_power, unflatten, Tensor};
use crate::{checked_dense_len, Error};

/// Dense normalized Hermite tensor `H_n(x)`.
///
/// Literal partition sum: over all partitions of the `n` modes into
/// singletons and pairs, singletons contribute `x`, pairs contribute `−I`,
/// everything scaled by `1/√n!`.
pub fn dense_hermite_tensor(n: usize, x: &[f64]) -> Result<Tensor, Error> {
    let d = x.len();
    let len = checked_dense_len(d, n)?;
    let parts = singleton_pair_partitions(n);
    let inv_sqrt_fact = (-0.5 * ln_factorial(n)).exp();
    let mut out = Tensor::zeros(n, d)?;
    let mut index = vec![0usize; n];
    for flat in 0..len {
        unflatten(flat, d, &mut index);
        let mut acc = 0.0;
        'part: for (pairs, singles) in &parts {
            let mut term = 1.0;
            for &(a, b) in pairs {
                if index[a] != index[b] {
                    continue 'part; // δ_{i_a i_b} vanishes
                }
                term = -term;
            }
            for &c in singles {
                term *= x[index[c]];
            }
            acc += term;
        }
        out.entries_mut()[flat] = acc * inv_sqrt_fact;
    }
    Ok(out)
}

/// Dense extended Hermite tensor `H_n(x, y) = Re((x+iy)^⊗n)/√n!`.
///
/// Computed two independent ways — a signed subset sum (y-modes chosen in
/// even-sized sets with sign `(−1)^{|S|/2}`) and the real part of the complex
/// outer power — and asserted equal within 1e-12 before returning.
pub fn dense_ext_hermite(n: usize, x: &[f64], y: &[f64]) -> Result<Tensor, Error> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            context: format!("H_n(x,y) with dim(x) = {} but dim(y) = {}", x.len(), y.len()),
        });
    }
    let d = x.len();
    let len = checked_dense_len(d, n)?;
    let inv_sqrt_fact = (-0.5 * ln_factorial(n)).exp();

    // Path 1: signed subset sum.
    let mut subset_path = Tensor::zeros(n, d)?;
    let mut index = vec![0usize; n];
    for flat in 0..len {
        unflatten(flat, d, &mut index);
        let mut acc = 0.0;
        for mask in 0u64..(1u64 << n) {
            let pop = mask.count_ones() as usize;
            if pop % 2 != 0 {
                continue;
            }
            let sign = if pop % 4 == 0 { 1.0 } else { -1.0 };
            let mut term = sign;
            for (mode, &i) in index.iter().enumerate() {
                term *= if mask >> mode & 1 == 1 { y[i] } else { x[i] };
            }
            acc += term;
        }
        subset_path.entries_mut()[flat] = acc * inv_sqrt_fact;
    }

    // Path 2: real part of the complex outer power.
    let mut complex_path = Tensor::zeros(n, d)?;
    for flat in 0..len {
        unflatten(flat, d, &mut index);
        let (mut re, mut im) = (1.0, 0.0);
        for &i in &index {
            let (nr, ni) = (re * x[i] - im * y[i], re * y[i] + im * x[i]);
            re = nr;
            im = ni;
        }
        complex_path.entries_mut()[flat] = re * inv_sqrt_fact;
    }

    for (a, b) in subset_path.entries().iter().zip(complex_path.entries()) {
        assert!(
            (a - b).abs() <= 1e-12 * (1.0 + a.abs()),
            "dense_ext_hermite internal disagreement: {a} vs {b} — construction bug"
        );
    }
    Ok(subset_path)
}

/// The dense moment tensor `M_m = Σ_i w_i v_i^⊗m`.
pub fn exact_moment_tensor(
    weights: &[f64],
    vectors: &[Vec<f64>],
    m: usize,
) -> Result<Tensor, Error> {
    if weights.len() != vectors.len() {
        return Err(Error::ShapeMismatch {
            context: format!("{} weights for {} vectors", weights.len(), vectors.len()),
        });
    }
    let d = vectors.first().map_or(1, Vec::len);
    let mut out = Tensor::zeros(m, d)?;
    for (w, v) in weights.iter().zip(vectors) {
        let mut p = outer_power(v, m)?;
        p.scale(*w);
        out = out.add(&p)?;
    }
    Ok(out)
}

/// The exact query value `⟨t, M_m⟩`, computed both through the dense moment
/// tensor and through per-component contractions `Σ_i w_i ⟨t, v_i^⊗m⟩`;
/// panics on internal disagreement.
pub fn exact_query(
    weights: &[f64],
    vectors: &[Vec<f64>],
    m: usize,
    t: &Tensor,
) -> Result<f64, Error> {
    let dense = crate::tensor::tensor_inner(t, &exact_moment_tensor(weights, vectors, m)?)?;

    let d = t.dim();
    let mut by_component = 0.0;
    let mut index = vec![0usize; m];
    for (w, v) in weights.iter().zip(vectors) {
        if v.len() != d {
            return Err(Error::ShapeMismatch {
                context: format!("query tensor dim {d} vs component dim {}", v.len()),
            });
        }
        let mut acc = 0.0;
        for (flat, &e) in t.entries().iter().enumerate() {
            unflatten(flat, d, &mut index);
            let mut prod = e;
            for &i in &index {
                prod *= v[i];
            }
            acc += prod;
        }
        by_component += w * acc;
    }
    assert!(
        (dense - by_component).abs() <= 1e-10 * (1.0 + dense.abs()),
        "exact_query internal disagreement: {dense} vs {by_component} — construction bug"
    );
    Ok(dense)
}

/// Dense Monte-Carlo average of a circuit with per-entry standard errors.
///
/// Returns `(mean, se)`; `se` entries are `√(sample_var / n)`.
pub fn mc_average(
    c: &TensorCircuit,
    mut sampler: impl FnMut(&mut Rng) -> CircuitInput,
    n: usize,
    seed: u64,
) -> Result<(Tensor, Tensor), Error> {
    assert!(n > 0, "mc_average needs at least one draw");
    let mut rng = rng_from(derive_seed(seed, 0));
    let first = eval_full(c, &sampler(&mut rng))?;
    let mut sum = first.clone();
    let mut sumsq = first.clone();
    for e in sumsq.entries_mut() {
        *e *= *e;
    }
    for _ in 1..n {
        let t = eval_full(c, &sampler(&mut rng))?;
        for ((s, q), &v) in sum
            .entries_mut()
            .iter_mut()
            .zip(sumsq.entries_mut())
            .zip(t.entries())
        {
            *s += v;
            *q += v * v;
        }
    }
    let nf = n as f64;
    let mut mean = sum;
    mean.scale(1.0 / nf);
    let mut se = sumsq;
    for (q, &m) in se.entries_mut().iter_mut().zip(mean.entries()) {
        let var = (*q / nf - m * m).max(0.0);
        *q = (var / nf).sqrt();
    }
    Ok((mean, se))
}

/// All partitions of `{0, …, n−1}` into pairs and singletons.
fn singleton_pair_partitions(n: usize) -> Vec<(Vec<(usize, usize)>, Vec<usize>)> {
    let mut out = Vec::new();
    let items: Vec<usize> = (0..n).collect();
    recurse(&items, &mut Vec::new(), &mut Vec::new(), &mut out);
    return out;

    fn recurse(
        rest: &[usize],
        pairs: &mut Vec<(usize, usize)>,
        singles: &mut Vec<usize>,
        out: &mut Vec<(Vec<(usize, usize)>, Vec<usize>)>,
    ) {
        let Some((&first, tail)) = rest.split_first() else {
            out.push((pairs.clone(), singles.clone()));
            return;
        };
        singles.push(first);
        recurse(tail, pairs, singles, out);
        singles.pop();
        for (j, &other) in tail.iter().enumerate() {
            let mut remaining = tail.to_vec();
            remaining.remove(j);
            pairs.push((first, other));
            recurse(&remaining, pairs, singles, out);
            pairs.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ext_hermite_circuit, Value};
    use crate::tensor::{hermite_poly, symmetrize, tensor_inner};
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_vec(rng: &mut Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn hermite_tensor_order_one_is_x() {
        let x = [0.4, -1.3];
        let h = dense_hermite_tensor(1, &x).unwrap();
        assert_eq!(h.entries(), &x);
    }

    #[test]
    fn hermite_tensor_order_two_by_hand() {
        // H_2(x) = (x⊗x − I)/√2.
        let x = [1.0, 0.0];
        let h = dense_hermite_tensor(2, &x).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        let want = [0.0, 0.0, 0.0, -s];
        for (a, b) in h.entries().iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn hermite_tensor_pairs_with_rank_one_as_scalar_hermite() {
        let mut rng = rng_from(21);
        for n in 0..=5usize {
            let d = 3;
            let x = gaussian_vec(&mut rng, d);
            let mut v = gaussian_vec(&mut rng, d);
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            for a in &mut v {
                *a /= norm;
            }
            let h = dense_hermite_tensor(n, &x).unwrap();
            let q = outer_power(&v, n).unwrap();
            let dot: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
            let lhs = tensor_inner(&h, &q).unwrap();
            assert!(
                (lhs - hermite_poly(n, dot)).abs() < 1e-10,
                "n = {n}: {lhs} vs {}",
                hermite_poly(n, dot)
            );
        }
    }

    #[test]
    fn ext_hermite_reduces_to_power_at_y_zero() {
        let x = [0.9, -0.1, 0.5];
        let h = dense_ext_hermite(3, &x, &[0.0; 3]).unwrap();
        let mut want = outer_power(&x, 3).unwrap();
        want.scale(1.0 / 6.0f64.sqrt());
        for (a, b) in h.entries().iter().zip(want.entries()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn ext_hermite_order_two_identity() {
        // H_2(x, y) = (x⊗x − y⊗y)/√2.
        let mut rng = rng_from(5);
        let x = gaussian_vec(&mut rng, 2);
        let y = gaussian_vec(&mut rng, 2);
        let h = dense_ext_hermite(2, &x, &y).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = (x[i] * x[j] - y[i] * y[j]) / 2.0f64.sqrt();
                assert!((h.get(&[i, j]) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn ext_hermite_is_unbiased_for_hermite() {
        // E_Y[H_n(x, Y)] = H_n(x) within 5 SE, via the circuit.
        let n = 3;
        let d = 3;
        let mut rng = rng_from(100);
        let x = gaussian_vec(&mut rng, d);
        let circuit = ext_hermite_circuit(n, 1.0);
        let xc = x.clone();
        let (mean, se) = mc_average(
            &circuit,
            move |r| {
                CircuitInput::new(vec![
                    Value::Vector(xc.clone()),
                    Value::Vector(gaussian_vec(r, d)),
                ])
            },
            200_000,
            7,
        )
        .unwrap();
        let want = dense_hermite_tensor(n, &x).unwrap();
        for ((m, s), w) in mean.entries().iter().zip(se.entries()).zip(want.entries()) {
            assert!(
                (m - w).abs() <= 5.0 * s + 1e-9,
                "entry off by {} with se {s}",
                (m - w).abs()
            );
        }
    }

    #[test]
    fn moment_tensor_basics() {
        let m = exact_moment_tensor(&[1.0], &[vec![1.0, 0.0]], 3).unwrap();
        assert_eq!(m.entries()[0], 1.0);
        assert_eq!(m.entries().iter().filter(|&&e| e != 0.0).count(), 1);
        let s = exact_moment_tensor(&[0.3, 0.5], &[vec![1.0], vec![2.0]], 0).unwrap();
        assert!((s.entries()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn moment_tensor_is_symmetric() {
        let mut rng = rng_from(3);
        let vectors = vec![gaussian_vec(&mut rng, 3), gaussian_vec(&mut rng, 3)];
        let m = exact_moment_tensor(&[0.4, 0.6], &vectors, 3).unwrap();
        let sym = symmetrize(&m).unwrap();
        for (a, b) in m.entries().iter().zip(sym.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_query_rank_one() {
        let mut rng = rng_from(8);
        let vectors = vec![gaussian_vec(&mut rng, 3), gaussian_vec(&mut rng, 3)];
        let weights = [0.7, 0.3];
        let u = gaussian_vec(&mut rng, 3);
        let q = outer_power(&u, 3).unwrap();
        let got = exact_query(&weights, &vectors, 3, &q).unwrap();
        let want: f64 = weights
            .iter()
            .zip(&vectors)
            .map(|(w, v)| {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                w * dot.powi(3)
            })
            .sum();
        assert!((got - want).abs() < 1e-10);
        let zero = Tensor::zeros(3, 3).unwrap();
        assert_eq!(exact_query(&weights, &vectors, 3, &zero).unwrap(), 0.0);
    }

    #[test]
    fn mc_average_of_constant_has_zero_se() {
        let c = ext_hermite_circuit(0, 2.5);
        let (mean, se) = mc_average(
            &c,
            |r| {
                let v: f64 = r.gen_range(-1.0..1.0);
                CircuitInput::new(vec![Value::Vector(vec![v]), Value::Vector(vec![v])])
            },
            1000,
            1,
        )
        .unwrap();
        assert_eq!(mean.entries()[0], 2.5);
        assert_eq!(se.entries()[0], 0.0);
    }

    #[test]
    fn mc_average_se_shrinks_with_n() {
        // Quadrupling n should roughly halve the SE (within 20% on medians).
        let c = ext_hermite_circuit(2, 1.0);
        let sampler = |r: &mut Rng| {
            CircuitInput::new(vec![
                Value::Vector(gaussian_vec(r, 2)),
                Value::Vector(gaussian_vec(r, 2)),
            ])
        };
        let med = |n: usize, seed: u64| {
            let (_, se) = mc_average(&c, sampler, n, seed).unwrap();
            let mut es: Vec<f64> = se.entries().to_vec();
            es.sort_by(|a, b| a.partial_cmp(b).unwrap());
            es[es.len() / 2]
        };
        let a = med(4000, 9);
        let b = med(16000, 9);
        let ratio = a / b;
        assert!((ratio - 2.0).abs() <= 0.4, "SE ratio {ratio}");
    }
}
