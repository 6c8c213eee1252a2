//! Ground-truth generative models and their Hermite coefficients.
//!
//! Three synthetic families drive the learners: spherical Gaussian mixtures,
//! mixtures of linear regressions, and positive sums of a one-dimensional
//! activation applied along unit directions.  This module owns their
//! parameter records, seeded samplers, exact density-ratio utilities (for
//! evaluating learned models), and the activation Hermite coefficients
//! `c_{σ,t} = E[σ(G)·h_t(G)]` in closed form (ReLU, cosine) and by
//! Gauss–Hermite quadrature (anything else).

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{rng_from, Rng};
use crate::tensor::{ln_binomial, ln_factorial};
use crate::Error;

/// A spherical Gaussian mixture `Σ_i w_i · N(μ_i, I_d)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmParams {
    /// Component means.
    pub means: Vec<Vec<f64>>,
    /// Mixing weights (a probability simplex).
    pub weights: Vec<f64>,
}

/// A mixture of linear regressions: `x ∼ N(0, I_d)`, component `i` drawn
/// with probability `w_i`, `y = β_i·x + N(0, σ²)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlrParams {
    /// Regression vectors.
    pub betas: Vec<Vec<f64>>,
    /// Mixing weights.
    pub weights: Vec<f64>,
    /// Label noise standard deviation (strictly positive).
    pub sigma: f64,
    /// Upper bound on `max_i ‖β_i‖₂`; defaults to the max norm itself.
    #[serde(default)]
    pub b_bound: Option<f64>,
}

/// A positive combination of activations: `F(x) = Σ_i w_i σ(v_i · x)` with
/// unit directions `v_i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivationSumParams {
    /// Unit direction vectors.
    pub directions: Vec<Vec<f64>>,
    /// Non-negative weights summing to 1.
    pub weights: Vec<f64>,
    /// The shared scalar activation.
    pub activation: Activation,
}

/// A scalar activation function.
#[derive(Clone)]
pub enum Activation {
    /// `max(0, x)`.
    Relu,
    /// `cos(γ·x)` with `γ > 0`.
    Cos {
        /// Frequency.
        gamma: f64,
    },
    /// Arbitrary callback; not serializable (library use only).
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Activation::Relu => write!(f, "Relu"),
            Activation::Cos { gamma } => write!(f, "Cos {{ gamma: {gamma} }}"),
            Activation::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Activation {
    /// Evaluate the activation at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Cos { gamma } => (gamma * x).cos(),
            Activation::Custom(f) => f(x),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ActivationWire {
    Relu,
    Cos { gamma: f64 },
}

impl Serialize for Activation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Activation::Relu => ActivationWire::Relu.serialize(s),
            Activation::Cos { gamma } => ActivationWire::Cos { gamma: *gamma }.serialize(s),
            Activation::Custom(_) => Err(serde::ser::Error::custom(
                "custom activations have no serialized form",
            )),
        }
    }
}

impl<'de> Deserialize<'de> for Activation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match ActivationWire::deserialize(d)? {
            ActivationWire::Relu => Activation::Relu,
            ActivationWire::Cos { gamma } => Activation::Cos { gamma },
        })
    }
}

/// Any of the three model families, as stored in `params.json`
/// (`{"model": "gmm" | "mlr" | "activation", ...}`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams {
    /// Gaussian mixture.
    Gmm(GmmParams),
    /// Mixture of linear regressions.
    Mlr(MlrParams),
    /// Positive activation sum.
    Activation(ActivationSumParams),
}

fn check_simplex(weights: &[f64]) -> Result<(), Error> {
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidParameter("weights must be non-negative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

fn check_shared_dim(vectors: &[Vec<f64>]) -> Result<usize, Error> {
    let d = vectors.first().map_or(0, Vec::len);
    if d == 0 || vectors.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidParameter("component vectors must share one positive dim".into()));
    }
    Ok(d)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl GmmParams {
    /// Validate invariants (simplex weights, shared dimension).
    pub fn validate(&self) -> Result<(), Error> {
        if self.means.len() != self.weights.len() {
            return Err(Error::InvalidParameter("means/weights length mismatch".into()));
        }
        check_shared_dim(&self.means)?;
        check_simplex(&self.weights)
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }
}

impl MlrParams {
    /// Validate invariants; `σ > 0` and `‖β_i‖ ≤ B`.
    pub fn validate(&self) -> Result<(), Error> {
        if self.betas.len() != self.weights.len() {
            return Err(Error::InvalidParameter("betas/weights length mismatch".into()));
        }
        check_shared_dim(&self.betas)?;
        check_simplex(&self.weights)?;
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mlr noise sigma must be strictly positive, got {}",
                self.sigma
            )));
        }
        let b = self.beta_bound();
        if self.betas.iter().any(|v| norm(v) > b + 1e-12) {
            return Err(Error::InvalidParameter("a ‖β_i‖ exceeds the declared bound B".into()));
        }
        Ok(())
    }

    /// `B`: the declared norm bound, or the max norm when undeclared.
    pub fn beta_bound(&self) -> f64 {
        self.b_bound
            .unwrap_or_else(|| self.betas.iter().map(|v| norm(v)).fold(0.0, f64::max))
    }

    /// Covariate dimension `d` (samples live in `ℝ^{d+1}`).
    pub fn dim(&self) -> usize {
        self.betas.first().map_or(0, Vec::len)
    }
}

impl ActivationSumParams {
    /// Validate invariants (unit directions, simplex weights, γ > 0).
    pub fn validate(&self) -> Result<(), Error> {
        if self.directions.len() != self.weights.len() {
            return Err(Error::InvalidParameter("directions/weights length mismatch".into()));
        }
        check_shared_dim(&self.directions)?;
        check_simplex(&self.weights)?;
        for v in &self.directions {
            if (norm(v) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "direction norm {} is not 1",
                    norm(v)
                )));
            }
        }
        if let Activation::Cos { gamma } = self.activation {
            if !(gamma > 0.0) {
                return Err(Error::InvalidParameter("cosine frequency γ must be positive".into()));
            }
        }
        Ok(())
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.directions.first().map_or(0, Vec::len)
    }

    /// `F(x) = Σ_i w_i σ(v_i·x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| {
                let dot: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
                w * self.activation.eval(dot)
            })
            .sum()
    }
}

/// A standard-normal vector.
pub fn gaussian_vector(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Draw a component index with probability proportional to `weights`.
fn pick_component(rng: &mut Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// `n` i.i.d. mixture draws.
pub fn sample_gmm(p: &GmmParams, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from(seed);
    let d = p.dim();
    (0..n)
        .map(|_| {
            let i = pick_component(&mut rng, &p.weights);
            let mut x = gaussian_vector(&mut rng, d);
            for (a, m) in x.iter_mut().zip(&p.means[i]) {
                *a += m;
            }
            x
        })
        .collect()
}

/// Like [`sample_gmm`], also returning the latent component labels
/// (harness use: accuracy evaluations need ground truth).
pub fn sample_gmm_labeled(p: &GmmParams, n: usize, seed: u64) -> Vec<(Vec<f64>, usize)> {
    let mut rng = rng_from(seed);
    let d = p.dim();
    (0..n)
        .map(|_| {
            let i = pick_component(&mut rng, &p.weights);
            let mut x = gaussian_vector(&mut rng, d);
            for (a, m) in x.iter_mut().zip(&p.means[i]) {
                *a += m;
            }
            (x, i)
        })
        .collect()
}

/// `n` i.i.d. regression-mixture draws `(x, y)`.
pub fn sample_mlr(p: &MlrParams, n: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = rng_from(seed);
    let d = p.dim();
    (0..n)
        .map(|_| {
            let x = gaussian_vector(&mut rng, d);
            let i = pick_component(&mut rng, &p.weights);
            let dot: f64 = p.betas[i].iter().zip(&x).map(|(a, b)| a * b).sum();
            let g: f64 = StandardNormal.sample(&mut rng);
            (x, dot + p.sigma * g)
        })
        .collect()
}

/// `n` labeled examples `(x, F(x))` with Gaussian covariates.
pub fn sample_activation_examples(
    p: &ActivationSumParams,
    n: usize,
    seed: u64,
) -> Vec<(Vec<f64>, f64)> {
    let mut rng = rng_from(seed);
    let d = p.dim();
    (0..n)
        .map(|_| {
            let x = gaussian_vector(&mut rng, d);
            let y = p.eval(&x);
            (x, y)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Hermite coefficients
// ---------------------------------------------------------------------------

/// Node count used by [`numeric_coeff`] for degree `t`.
pub fn quadrature_nodes_for(t: usize) -> usize {
    4 * t + 64
}

/// `c_{σ,t} = E_{G∼N(0,1)}[σ(G)·h_t(G)]` by composite Gauss–Legendre
/// quadrature against the explicit Gaussian weight, using at least `4t + 64`
/// nodes in total.
///
/// The integration range `[−L, L]` grows with `t` so the oscillatory support
/// of `h_t` is covered, and the panel grid always places a breakpoint at the
/// origin.  A single Gauss–Hermite rule of this size cannot reach high
/// accuracy for activations with a kink (e.g. ReLU); panels that never
/// straddle the origin restore spectral convergence for activations that are
/// smooth away from 0, giving ≲1e-12 error for `t ≤ 40`.
pub fn numeric_coeff(sigma: &dyn Fn(f64) -> f64, t: usize) -> f64 {
    const PER_PANEL: usize = 24;
    let half_range = 2.0 * ((t + 1) as f64).sqrt() + 10.0;
    let panels_per_side = ((half_range / 0.5).ceil() as usize)
        .max(quadrature_nodes_for(t).div_ceil(2 * PER_PANEL));
    let width = half_range / panels_per_side as f64;
    let (xi, wi) = gauss_legendre(PER_PANEL);
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = 0.0;
    for p in -(panels_per_side as i64)..panels_per_side as i64 {
        let a = p as f64 * width;
        let mid = a + width / 2.0;
        let half = width / 2.0;
        let mut panel = 0.0;
        for (&u, &w) in xi.iter().zip(&wi) {
            let x = mid + half * u;
            panel += w * sigma(x) * crate::tensor::hermite_poly(t, x) * (-0.5 * x * x).exp();
        }
        total += panel * half * norm;
    }
    total
}

/// Hermite coefficient of ReLU.
///
/// Odd `t > 1` vanish by symmetry; `c_0 = 1/√(2π)`, `c_1 = 1/2`.  For even
/// `t ≥ 2` the magnitude has the closed form
/// `√C(t−2, (t−2)/2) / √(2π·t·(t−1)) · (1/4)^{(t−2)/4}` (evaluated in log
/// space); the sign alternates with period 4 in `t` and is pinned by a
/// quadrature cross-check computed once and cached (the fractional exponent
/// `(−1/4)^{(t−2)/4}` leaves it ambiguous when `t ≡ 0 mod 4`).
pub fn relu_coeff(t: usize) -> f64 {
    match t {
        0 => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
        1 => 0.5,
        _ if t % 2 == 1 => 0.0,
        _ => {
            let tf = t as f64;
            let ln_mag = 0.5 * ln_binomial(t - 2, (t - 2) / 2)
                - 0.5 * (2.0 * std::f64::consts::PI * tf * (tf - 1.0)).ln()
                - (t as f64 - 2.0) / 4.0 * 4.0f64.ln();
            relu_sign(t) * ln_mag.exp()
        }
    }
}

/// Sign of the even-degree ReLU coefficient, from a cached quadrature table.
fn relu_sign(t: usize) -> f64 {
    use std::sync::OnceLock;
    static SIGNS: OnceLock<Vec<f64>> = OnceLock::new();
    let table = SIGNS.get_or_init(|| {
        (0..=64)
            .map(|k| {
                if k % 2 == 1 {
                    0.0
                } else {
                    numeric_coeff(&|x: f64| x.max(0.0), k).signum()
                }
            })
            .collect()
    });
    match table.get(t) {
        Some(&s) => s,
        None => numeric_coeff(&|x: f64| x.max(0.0), t).signum(),
    }
}

/// Hermite coefficient of `cos(γ·x)`: zero at odd `t`, and
/// `e^{−γ²/2}·γ^t·(−1)^{t/2}/√t!` at even `t` (log-space evaluation).
pub fn cos_coeff(t: usize, gamma: f64) -> Result<f64, Error> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cosine frequency must be positive, got {gamma}"
        )));
    }
    if t % 2 == 1 {
        return Ok(0.0);
    }
    let sign = if t % 4 == 0 { 1.0 } else { -1.0 };
    let ln_mag = -gamma * gamma / 2.0 + t as f64 * gamma.ln() - 0.5 * ln_factorial(t);
    Ok(sign * ln_mag.exp())
}

/// Coefficient dispatch over the [`Activation`] variants.
pub fn activation_coeff(act: &Activation, t: usize) -> f64 {
    match act {
        Activation::Relu => relu_coeff(t),
        Activation::Cos { gamma } => {
            cos_coeff(t, *gamma).expect("γ > 0 enforced at construction")
        }
        Activation::Custom(f) => numeric_coeff(&**f, t),
    }
}

/// Gauss–Hermite nodes and weights for the probabilists' weight
/// `e^{−x²/2}/√(2π)` (so `Σ w_i = 1`), via the Golub–Welsch eigenproblem of
/// the Jacobi matrix with off-diagonals `√j`.
pub fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut j = DMatrix::zeros(m, m);
    for i in 1..m {
        let v = (i as f64).sqrt();
        j[(i - 1, i)] = v;
        j[(i, i - 1)] = v;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = eig.eigenvectors[(0, i)].powi(2);
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// `m`-point Gauss–Legendre rule on `[-1, 1]` (weights sum to 2), via the
/// Golub–Welsch eigenvalue construction on the Jacobi matrix.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut j = DMatrix::zeros(m, m);
    for i in 1..m {
        let fi = i as f64;
        let v = fi / (4.0 * fi * fi - 1.0).sqrt();
        j[(i - 1, i)] = v;
        j[(i, i - 1)] = v;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = 2.0 * eig.eigenvectors[(0, i)].powi(2);
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

// ---------------------------------------------------------------------------
// True density ratios (evaluation utilities)
// ---------------------------------------------------------------------------

/// Numerically stable `ln Σ exp(term_i)` over finite terms; `-∞` entries
/// (zero weights) are skipped.
pub(crate) fn logsumexp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// The exact ratio `(F/G)(x)` of a spherical mixture `F` to the standard
/// Gaussian `G`: `Σ_i w_i·exp(μ_i·x − ‖μ_i‖²/2)`.
pub fn gmm_true_ratio(p: &GmmParams, x: &[f64]) -> f64 {
    let terms: Vec<f64> = p
        .means
        .iter()
        .zip(&p.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(mu, &w)| {
            let dot: f64 = mu.iter().zip(x).map(|(a, b)| a * b).sum();
            let nsq: f64 = mu.iter().map(|a| a * a).sum();
            w.ln() + dot - 0.5 * nsq
        })
        .collect();
    logsumexp(&terms).exp()
}

/// The exact ratio `(F/G)(z)` of a regression mixture to the standard
/// Gaussian on `ℝ^{d+1}`, via the conditional factorization
/// `y | x ∼ N(β_i·x, σ²)`.
pub fn mlr_true_ratio(p: &MlrParams, z: &[f64]) -> Result<f64, Error> {
    if !(p.sigma > 0.0) {
        return Err(Error::InvalidParameter(
            "density ratio undefined at σ = 0".into(),
        ));
    }
    let d = p.dim();
    if z.len() != d + 1 {
        return Err(Error::ShapeMismatch {
            context: format!("mlr ratio point has dim {}, expected {}", z.len(), d + 1),
        });
    }
    let (x, y) = (&z[..d], z[d]);
    let terms: Vec<f64> = p
        .betas
        .iter()
        .zip(&p.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(beta, &w)| {
            let dot: f64 = beta.iter().zip(x).map(|(a, b)| a * b).sum();
            let r = y - dot;
            w.ln() - p.sigma.ln() - r * r / (2.0 * p.sigma * p.sigma) + y * y / 2.0
        })
        .collect();
    Ok(logsumexp(&terms).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmm_sampler_respects_weights_and_means() {
        let p = GmmParams {
            means: vec![vec![5.0, 0.0], vec![-5.0, 0.0]],
            weights: vec![0.7, 0.3],
        };
        p.validate().unwrap();
        let n = 100_000;
        let xs = sample_gmm(&p, n, 42);
        let frac_pos = xs.iter().filter(|x| x[0] > 0.0).count() as f64 / n as f64;
        let se = (0.7f64 * 0.3 / n as f64).sqrt();
        assert!((frac_pos - 0.7).abs() <= 5.0 * se, "frac {frac_pos}");
        // Degenerate weight: second component never drawn.
        let p1 = GmmParams { means: p.means.clone(), weights: vec![1.0, 0.0] };
        assert!(sample_gmm(&p1, 10_000, 7).iter().all(|x| x[0] > 0.0));
    }

    #[test]
    fn gmm_single_component_mean_concentrates() {
        let d = 4;
        let p = GmmParams { means: vec![vec![0.0; d]], weights: vec![1.0] };
        let n = 100_000;
        let xs = sample_gmm(&p, n, 1);
        let mut mean = vec![0.0; d];
        for x in &xs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n as f64;
            }
        }
        let nm = norm(&mean);
        assert!(nm <= 5.0 * (d as f64 / n as f64).sqrt(), "‖mean‖ = {nm}");
    }

    #[test]
    fn mlr_sampler_total_variance() {
        let p = MlrParams {
            betas: vec![vec![0.5, 0.0], vec![0.0, -0.5]],
            weights: vec![0.5, 0.5],
            sigma: 0.5,
            b_bound: None,
        };
        p.validate().unwrap();
        let n = 100_000;
        let data = sample_mlr(&p, n, 9);
        let var: f64 = data.iter().map(|(_, y)| y * y).sum::<f64>() / n as f64;
        let want = 0.25 + 0.25; // Σw‖β‖² + σ²
        // SE of the mean of y² (y is a Gaussian scale mixture, E[y⁴] = 3·want² here).
        let se = (2.0 * want * want / n as f64).sqrt();
        assert!((var - want).abs() <= 5.0 * se, "var {var}");
        // Near-noiseless: y tracks β·x.
        let p0 = MlrParams {
            betas: vec![vec![1.0, 2.0]],
            weights: vec![1.0],
            sigma: 1e-12,
            b_bound: None,
        };
        for (x, y) in sample_mlr(&p0, 100, 3) {
            assert!((y - (x[0] + 2.0 * x[1])).abs() < 1e-10);
        }
    }

    #[test]
    fn activation_examples_are_exact_labels() {
        let p = ActivationSumParams {
            directions: vec![vec![1.0, 0.0]],
            weights: vec![1.0],
            activation: Activation::Relu,
        };
        p.validate().unwrap();
        for (x, y) in sample_activation_examples(&p, 200, 5) {
            assert_eq!(y, x[0].max(0.0));
        }
        let mean: f64 = sample_activation_examples(&p, 100_000, 6)
            .iter()
            .map(|(_, y)| y)
            .sum::<f64>()
            / 1e5;
        // E[F] = c_{relu,0}·Σw.
        assert!((mean - relu_coeff(0)).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        let (nodes, weights) = gauss_hermite(20);
        let total: f64 = weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // E[G²] = 1, E[G⁴] = 3, E[G⁶] = 15.
        for (p, want) in [(2, 1.0), (4, 3.0), (6, 15.0)] {
            let got: f64 = nodes.iter().zip(&weights).map(|(&x, &w)| w * x.powi(p)).sum();
            assert!((got - want).abs() < 1e-10, "E[G^{p}] = {got}");
        }
    }

    #[test]
    fn numeric_coeff_identities() {
        assert!((numeric_coeff(&|x| x, 1) - 1.0).abs() < 1e-12);
        assert!((numeric_coeff(&|_| 1.0, 0) - 1.0).abs() < 1e-12);
        for t in 1..=6 {
            assert!(numeric_coeff(&|_| 1.0, t).abs() < 1e-12);
        }
    }

    #[test]
    fn relu_coeff_matches_quadrature() {
        let relu = |x: f64| x.max(0.0);
        assert!((relu_coeff(1) - 0.5).abs() < 1e-12);
        assert!((relu_coeff(0) - numeric_coeff(&relu, 0)).abs() < 1e-10);
        assert!((relu_coeff(2) - 1.0 / (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-9);
        for t in (2..=20).step_by(2) {
            let closed = relu_coeff(t);
            let quad = numeric_coeff(&relu, t);
            assert!(
                (closed - quad).abs() < 1e-8,
                "t = {t}: closed {closed} vs quadrature {quad}"
            );
        }
        for t in (3..=21).step_by(2) {
            assert_eq!(relu_coeff(t), 0.0);
        }
    }

    #[test]
    fn cos_coeff_matches_quadrature() {
        let gamma = 1.0;
        assert!((cos_coeff(0, gamma).unwrap() - (-0.5f64).exp()).abs() < 1e-12);
        assert!(
            (cos_coeff(2, gamma).unwrap() + (-0.5f64).exp() / 2.0f64.sqrt()).abs() < 1e-12
        );
        for t in 0..=20 {
            let closed = cos_coeff(t, gamma).unwrap();
            let quad = numeric_coeff(&|x: f64| (gamma * x).cos(), t);
            assert!(
                (closed - quad).abs() < 1e-8,
                "t = {t}: closed {closed} vs quadrature {quad}"
            );
        }
        assert!(cos_coeff(2, 0.0).is_err());
    }

    #[test]
    fn gmm_ratio_utilities() {
        let d = 3;
        let p0 = GmmParams { means: vec![vec![0.0; d]], weights: vec![1.0] };
        assert!((gmm_true_ratio(&p0, &[0.3, -0.2, 1.0]) - 1.0).abs() < 1e-12);
        let mu = vec![1.0, 2.0, -1.0];
        let p1 = GmmParams { means: vec![mu.clone()], weights: vec![1.0] };
        let nsq: f64 = mu.iter().map(|a| a * a).sum();
        assert!((gmm_true_ratio(&p1, &mu) - (nsq / 2.0).exp()).abs() / (nsq / 2.0).exp() < 1e-12);
        // Normalization: E_G[F/G] = 1.
        let p = GmmParams {
            means: vec![vec![1.5, 0.0, 0.0], vec![-1.5, 0.0, 0.0]],
            weights: vec![0.5, 0.5],
        };
        let mut rng = rng_from(11);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = gaussian_vector(&mut rng, d);
            let r = gmm_true_ratio(&p, &x);
            sum += r;
            sumsq += r * r;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        assert!((mean - 1.0).abs() <= 5.0 * se, "E[F/G] = {mean} ± {se}");
    }

    #[test]
    fn mlr_ratio_utilities() {
        let p_triv = MlrParams {
            betas: vec![vec![0.0, 0.0]],
            weights: vec![1.0],
            sigma: 1.0,
            b_bound: None,
        };
        assert!((mlr_true_ratio(&p_triv, &[0.4, -0.4, 2.0]).unwrap() - 1.0).abs() < 1e-12);

        let p = MlrParams {
            betas: vec![vec![0.4, -0.3]],
            weights: vec![1.0],
            sigma: 0.5,
            b_bound: None,
        };
        // On-line points beat off-line points.
        let x = [1.0, 1.0];
        let on = [x[0], x[1], 0.1];
        let off = [x[0], x[1], 0.1 + 3.0 * p.sigma];
        assert!(mlr_true_ratio(&p, &on).unwrap() > mlr_true_ratio(&p, &off).unwrap());

        // Normalization under G on ℝ^{d+1}.
        let mut rng = rng_from(13);
        let n = 100_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let z = gaussian_vector(&mut rng, 3);
            let r = mlr_true_ratio(&p, &z).unwrap();
            sum += r;
            sumsq += r * r;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        assert!((mean - 1.0).abs() <= 5.0 * se, "E[F/G] = {mean} ± {se}");
    }

    #[test]
    fn params_json_schemas() {
        let gmm: ModelParams = serde_json::from_str(
            r#"{"model":"gmm","means":[[0.0,1.0]],"weights":[1.0]}"#,
        )
        .unwrap();
        assert!(matches!(gmm, ModelParams::Gmm(_)));
        let mlr: ModelParams = serde_json::from_str(
            r#"{"model":"mlr","betas":[[0.5]],"weights":[1.0],"sigma":0.5}"#,
        )
        .unwrap();
        assert!(matches!(mlr, ModelParams::Mlr(_)));
        let act: ModelParams = serde_json::from_str(
            r#"{"model":"activation","directions":[[1.0,0.0]],"weights":[1.0],
                "activation":{"kind":"cos","gamma":1.0}}"#,
        )
        .unwrap();
        if let ModelParams::Activation(a) = &act {
            assert!(matches!(a.activation, Activation::Cos { .. }));
        } else {
            panic!("wrong variant");
        }
    }
}
