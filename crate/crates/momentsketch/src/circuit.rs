//! Sequential tensor computations (STCs) and their two evaluators.
//!
//! An STC is a circuit over scalars, vectors, and tensors whose only
//! operations are (i) multiplication by a scalar node, (ii) addition of
//! same-shape nodes, and (iii) the tensor product of a node with a *vector*
//! in the last mode.  The restriction buys a powerful evaluation rule: under
//! a recursive pseudo-projection `Φ = φ_1 ∘ … ∘ φ_t`, every wire of order
//! `s` can carry the `n_s`-dimensional image of its value under the first
//! `s` stages instead of the `d^s`-entry value itself — appending a vector
//! `v` to a stored image `a` becomes `φ_{s+1}(a ⊗ v)`.  The projected result
//! equals `Φ` applied to the dense result, at cost polynomial in the circuit
//! size and the stage dimensions.
//!
//! The module also provides the circuit builders used by every estimator in
//! the crate: the extended Hermite tensor `H_n(x,y) = Re((x+iy)^⊗n)/√n!`
//! realized in `O(n)` nodes by carrying a real/imaginary pair, and its
//! partially contracted variant.

use serde::{Deserialize, Serialize};

use crate::projection::RecursivePseudoProjection;
use crate::tensor::Tensor;
use crate::{checked_dense_len, Error};

/// Kind of a circuit input slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    /// A single real number.
    Scalar,
    /// A vector in `ℝ^d`; all vector slots of one circuit share `d`.
    Vector,
}

/// A concrete value bound to an input slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    /// Scalar input.
    Scalar(f64),
    /// Vector input.
    Vector(Vec<f64>),
}

/// Input bundle for one circuit evaluation; kinds and arity must match the
/// circuit's slot declaration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitInput {
    /// Slot values in declaration order.
    pub values: Vec<Value>,
}

impl CircuitInput {
    /// Convenience constructor.
    pub fn new(values: Vec<Value>) -> Self {
        Self { values }
    }
}

/// One circuit node; references index earlier nodes only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum NodeOp {
    /// Read an input slot.
    Input {
        /// Slot index.
        slot: usize,
    },
    /// A scalar constant (constants are nodes, not inputs, so that
    /// [`CircuitInput`] is purely the random sample).
    Const {
        /// The constant.
        value: f64,
    },
    /// `a · b` where node `a` must be order 0.  Scalar×scalar is admitted —
    /// operation (i) covers multiplying a scalar by a scalar — and is what
    /// the complex power chains rely on.
    Smul {
        /// Scalar operand (order 0).
        a: usize,
        /// Arbitrary-order operand.
        b: usize,
    },
    /// Same-shape addition.
    Add {
        /// Left operand.
        a: usize,
        /// Right operand (same order).
        b: usize,
    },
    /// Tensor product with a vector in the last mode: order `s` → `s+1`.
    Append {
        /// Tensor operand (any order, including scalar).
        tensor: usize,
        /// Vector operand (order 1).
        vector: usize,
    },
}

/// A validated sequential tensor computation.
///
/// Construct through [`CircuitBuilder`] or [`validate_circuit`]; both enforce
/// the STC invariants node by node.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCircuit {
    slots: Vec<SlotKind>,
    nodes: Vec<NodeOp>,
    orders: Vec<usize>,
    output: usize,
    declared_order: usize,
}

/// Unchecked circuit description; the JSON wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawCircuit {
    /// Input slot kinds.
    pub slots: Vec<SlotKind>,
    /// Node list in topological order.
    pub nodes: Vec<NodeOp>,
    /// Output node index.
    pub output: usize,
    /// Declared output order.
    pub order: usize,
}

impl Serialize for TensorCircuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawCircuit {
            slots: self.slots.clone(),
            nodes: self.nodes.clone(),
            output: self.output,
            order: self.declared_order,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TensorCircuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawCircuit::deserialize(d)?;
        validate_circuit(&raw).map_err(serde::de::Error::custom)
    }
}

/// Check a raw description and return the validated circuit.
///
/// The diagnostic names the first offending node.
pub fn validate_circuit(raw: &RawCircuit) -> Result<TensorCircuit, Error> {
    let mut orders = Vec::with_capacity(raw.nodes.len());
    for (i, node) in raw.nodes.iter().enumerate() {
        let order = match node {
            NodeOp::Input { slot } => match raw.slots.get(*slot) {
                Some(SlotKind::Scalar) => 0,
                Some(SlotKind::Vector) => 1,
                None => {
                    return Err(Error::InvalidCircuit(format!(
                        "node {i}: input references slot {slot}, but only {} slots declared",
                        raw.slots.len()
                    )))
                }
            },
            NodeOp::Const { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidCircuit(format!(
                        "node {i}: non-finite constant {value}"
                    )));
                }
                0
            }
            NodeOp::Smul { a, b } => {
                let oa = ref_order(&orders, i, *a)?;
                let ob = ref_order(&orders, i, *b)?;
                if oa != 0 {
                    return Err(Error::InvalidCircuit(format!(
                        "node {i}: smul scalar operand {a} has order {oa}, not 0 \
                         (tensor×tensor products are not an STC operation)"
                    )));
                }
                ob
            }
            NodeOp::Add { a, b } => {
                let oa = ref_order(&orders, i, *a)?;
                let ob = ref_order(&orders, i, *b)?;
                if oa != ob {
                    return Err(Error::InvalidCircuit(format!(
                        "node {i}: add of order-{oa} node {a} and order-{ob} node {b}"
                    )));
                }
                oa
            }
            NodeOp::Append { tensor, vector } => {
                let ot = ref_order(&orders, i, *tensor)?;
                let ov = ref_order(&orders, i, *vector)?;
                if ov != 1 {
                    return Err(Error::InvalidCircuit(format!(
                        "node {i}: append vector operand {vector} has order {ov}, not 1"
                    )));
                }
                ot + 1
            }
        };
        orders.push(order);
    }
    if raw.output >= raw.nodes.len() {
        return Err(Error::InvalidCircuit(format!(
            "output references node {}, but only {} nodes exist",
            raw.output,
            raw.nodes.len()
        )));
    }
    if orders[raw.output] != raw.order {
        return Err(Error::InvalidCircuit(format!(
            "output node has order {}, declared order is {}",
            orders[raw.output], raw.order
        )));
    }
    Ok(TensorCircuit {
        slots: raw.slots.clone(),
        nodes: raw.nodes.clone(),
        orders,
        output: raw.output,
        declared_order: raw.order,
    })
}

/// Forward references are cycles by construction; reject them with a
/// dedicated message.
fn ref_order(orders: &[usize], node: usize, target: usize) -> Result<usize, Error> {
    orders.get(target).copied().ok_or_else(|| {
        Error::InvalidCircuit(format!(
            "node {node}: references node {target}, which is not an earlier node \
             (the DAG must be topologically ordered)"
        ))
    })
}

impl TensorCircuit {
    /// Node count.
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// Declared output order.
    pub fn order(&self) -> usize {
        self.declared_order
    }

    /// Input slot declaration.
    pub fn slots(&self) -> &[SlotKind] {
        &self.slots
    }

    /// Validated order of every node.
    pub fn node_orders(&self) -> &[usize] {
        &self.orders
    }

    /// Check an input bundle against the slot declaration and infer the
    /// shared vector dimension (`None` when the circuit has no vector slot).
    fn check_input(&self, input: &CircuitInput) -> Result<Option<usize>, Error> {
        if input.values.len() != self.slots.len() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "circuit has {} slots, input has {} values",
                    self.slots.len(),
                    input.values.len()
                ),
            });
        }
        let mut dim = None;
        for (i, (kind, value)) in self.slots.iter().zip(&input.values).enumerate() {
            match (kind, value) {
                (SlotKind::Scalar, Value::Scalar(_)) => {}
                (SlotKind::Vector, Value::Vector(v)) => match dim {
                    None => dim = Some(v.len()),
                    Some(d) if d == v.len() => {}
                    Some(d) => {
                        return Err(Error::ShapeMismatch {
                            context: format!(
                                "slot {i}: vector of dim {}, other inputs have dim {d}",
                                v.len()
                            ),
                        })
                    }
                },
                _ => {
                    return Err(Error::ShapeMismatch {
                        context: format!("slot {i}: value kind does not match declaration"),
                    })
                }
            }
        }
        Ok(dim)
    }
}

/// Dense evaluation in topological order.
///
/// Every intermediate is materialized, so node orders are capped by the
/// dense entry limit (`dim^order ≤` [`crate::dense_cap`]).
pub fn eval_full(c: &TensorCircuit, input: &CircuitInput) -> Result<Tensor, Error> {
    let dim = c.check_input(input)?.unwrap_or(1);
    for &order in &c.orders {
        checked_dense_len(dim, order)?;
    }
    let mut values: Vec<Tensor> = Vec::with_capacity(c.nodes.len());
    for node in &c.nodes {
        let t = match node {
            NodeOp::Input { slot } => match &input.values[*slot] {
                Value::Scalar(v) => Tensor::scalar(dim, *v),
                Value::Vector(v) => Tensor::from_vector(v)?,
            },
            NodeOp::Const { value } => Tensor::scalar(dim, *value),
            NodeOp::Smul { a, b } => {
                let s = values[*a].entries()[0];
                let mut t = values[*b].clone();
                t.scale(s);
                t
            }
            NodeOp::Add { a, b } => values[*a].add(&values[*b])?,
            NodeOp::Append { tensor, vector } => {
                let v = values[*vector].entries().to_vec();
                values[*tensor].append_vector(&v)?
            }
        };
        values.push(t);
    }
    Ok(values.swap_remove(c.output))
}

/// Reusable projected evaluator: one allocation per circuit, not per draw.
///
/// For each node of order `s` it stores the image of the node's value under
/// the first `s` stages of the chain.  Nodes of order ≤ 1 additionally keep
/// their raw value, because order-0 nodes feed `Smul` and order-1 nodes feed
/// `Append` — both of which need the unprojected operand.
pub struct ProjectedEvaluator<'a> {
    circuit: &'a TensorCircuit,
    phi: &'a RecursivePseudoProjection,
    /// `n_0, …, n_t` of the chain.
    dims: Vec<usize>,
    /// Projected image per node.
    proj: Vec<Vec<f64>>,
    /// Raw value of order-0 nodes.
    raw_scalar: Vec<f64>,
    /// Raw value of order-1 nodes.
    raw_vec: Vec<Vec<f64>>,
    /// Nodes the output actually depends on; dead nodes are skipped and may
    /// exceed the chain order (they are never projected).
    live: Vec<bool>,
    /// Scratch for `a ⊗ v` before a stage application.
    kron: Vec<f64>,
}

impl<'a> ProjectedEvaluator<'a> {
    /// Prepare buffers; rejects circuits whose wires outgrow the chain.
    pub fn new(
        circuit: &'a TensorCircuit,
        phi: &'a RecursivePseudoProjection,
    ) -> Result<Self, Error> {
        if circuit.declared_order != phi.order() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "circuit order {} vs projection chain order {}",
                    circuit.declared_order,
                    phi.order()
                ),
            });
        }
        let dims = phi.dims();
        let d = phi.base_dim();
        // Only nodes the output depends on are evaluated; dead nodes (e.g.
        // unused vector slots in an order-0 circuit) impose no constraint.
        let mut live = vec![false; circuit.nodes.len()];
        live[circuit.output] = true;
        for i in (0..circuit.nodes.len()).rev() {
            if !live[i] {
                continue;
            }
            match &circuit.nodes[i] {
                NodeOp::Input { .. } | NodeOp::Const { .. } => {}
                NodeOp::Smul { a, b } | NodeOp::Add { a, b } => {
                    live[*a] = true;
                    live[*b] = true;
                }
                NodeOp::Append { tensor, vector } => {
                    live[*tensor] = true;
                    live[*vector] = true;
                }
            }
        }
        let mut max_kron = 1;
        let mut proj = Vec::with_capacity(circuit.nodes.len());
        for (i, &order) in circuit.orders.iter().enumerate() {
            if !live[i] {
                proj.push(Vec::new());
                continue;
            }
            if order > phi.order() {
                return Err(Error::ShapeMismatch {
                    context: format!(
                        "circuit output depends on an order-{order} wire, beyond the chain order {}",
                        phi.order()
                    ),
                });
            }
            proj.push(vec![0.0; dims[order]]);
            if order < phi.order() {
                max_kron = max_kron.max(dims[order] * d);
            }
        }
        Ok(Self {
            circuit,
            phi,
            dims,
            proj,
            raw_scalar: vec![0.0; circuit.nodes.len()],
            raw_vec: vec![Vec::new(); circuit.nodes.len()],
            live,
            kron: vec![0.0; max_kron],
        })
    }

    /// Evaluate; the returned slice is `Φ(eval_full(circuit, input))`.
    pub fn eval(&mut self, input: &CircuitInput) -> Result<&[f64], Error> {
        let d = self.phi.base_dim();
        if let Some(din) = self.circuit.check_input(input)? {
            if din != d {
                return Err(Error::ShapeMismatch {
                    context: format!("input vectors have dim {din}, chain base dim is {d}"),
                });
            }
        }
        let stages = self.phi.stages();
        for i in 0..self.circuit.nodes.len() {
            if !self.live[i] {
                continue;
            }
            let order = self.circuit.orders[i];
            match &self.circuit.nodes[i] {
                NodeOp::Input { slot } => match &input.values[*slot] {
                    Value::Scalar(v) => {
                        self.raw_scalar[i] = *v;
                        self.proj[i][0] = *v;
                    }
                    Value::Vector(v) => {
                        self.raw_vec[i].clear();
                        self.raw_vec[i].extend_from_slice(v);
                        let (head, tail) = self.proj.split_at_mut(i);
                        let _ = head;
                        stages[0].apply(v, &mut tail[0]);
                    }
                },
                NodeOp::Const { value } => {
                    self.raw_scalar[i] = *value;
                    self.proj[i][0] = *value;
                }
                NodeOp::Smul { a, b } => {
                    let (a, b) = (*a, *b);
                    let s = self.raw_scalar[a];
                    let (src, dst) = pick_two(&mut self.proj, b, i);
                    for (o, v) in dst.iter_mut().zip(src.iter()) {
                        *o = s * v;
                    }
                    if order == 0 {
                        self.raw_scalar[i] = s * self.raw_scalar[b];
                    } else if order == 1 {
                        let (src, dst) = pick_two(&mut self.raw_vec, b, i);
                        dst.clear();
                        dst.extend(src.iter().map(|v| s * v));
                    }
                }
                NodeOp::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    {
                        let (src, dst) = pick_two(&mut self.proj, a, i);
                        dst.copy_from_slice(src);
                    }
                    let (src, dst) = pick_two(&mut self.proj, b, i);
                    for (o, v) in dst.iter_mut().zip(src.iter()) {
                        *o += v;
                    }
                    if order == 0 {
                        self.raw_scalar[i] = self.raw_scalar[a] + self.raw_scalar[b];
                    } else if order == 1 {
                        {
                            let (src, dst) = pick_two(&mut self.raw_vec, a, i);
                            dst.clear();
                            dst.extend_from_slice(src);
                        }
                        let (src, dst) = pick_two(&mut self.raw_vec, b, i);
                        for (o, v) in dst.iter_mut().zip(src.iter()) {
                            *o += v;
                        }
                    }
                }
                NodeOp::Append { tensor, vector } => {
                    let (t, v) = (*tensor, *vector);
                    let s = self.circuit.orders[t];
                    let n_s = self.dims[s];
                    {
                        let a = &self.proj[t];
                        let vraw = &self.raw_vec[v];
                        for (p, &av) in a.iter().enumerate() {
                            for (q, &vv) in vraw.iter().enumerate() {
                                self.kron[p * d + q] = av * vv;
                            }
                        }
                    }
                    stages[s].apply(&self.kron[..n_s * d], &mut self.proj[i]);
                    if order == 1 {
                        // Appending to a scalar yields an order-1 wire whose
                        // raw value later appends may consume.
                        let sc = self.raw_scalar[t];
                        let (src, dst) = pick_two(&mut self.raw_vec, v, i);
                        dst.clear();
                        dst.extend(src.iter().map(|x| sc * x));
                    }
                }
            }
        }
        Ok(&self.proj[self.circuit.output])
    }
}

/// Disjoint (src, dst) borrows of one buffer table; `src < dst` always holds
/// because nodes only reference earlier nodes.
fn pick_two<T>(table: &mut [T], src: usize, dst: usize) -> (&T, &mut T) {
    debug_assert!(src < dst);
    let (head, tail) = table.split_at_mut(dst);
    (&head[src], &mut tail[0])
}

/// One-shot projected evaluation: `Φ(eval_full(c, input))` without
/// materializing any tensor of order above 1.
pub fn eval_projected(
    c: &TensorCircuit,
    input: &CircuitInput,
    phi: &RecursivePseudoProjection,
) -> Result<Vec<f64>, Error> {
    let mut ev = ProjectedEvaluator::new(c, phi)?;
    Ok(ev.eval(input)?.to_vec())
}

/// Incremental circuit construction with validation at each step.
#[derive(Debug, Clone, Default)]
pub struct CircuitBuilder {
    slots: Vec<SlotKind>,
    nodes: Vec<NodeOp>,
    orders: Vec<usize>,
}

impl CircuitBuilder {
    /// Empty builder.
    pub fn new() -> Self {
        Self::default()
    }

    /// Declare a scalar input slot and return its input node.
    pub fn scalar_input(&mut self) -> usize {
        self.slots.push(SlotKind::Scalar);
        self.push(NodeOp::Input { slot: self.slots.len() - 1 }, 0)
    }

    /// Declare a vector input slot and return its input node.
    pub fn vector_input(&mut self) -> usize {
        self.slots.push(SlotKind::Vector);
        self.push(NodeOp::Input { slot: self.slots.len() - 1 }, 1)
    }

    /// A constant node.
    pub fn constant(&mut self, value: f64) -> usize {
        self.push(NodeOp::Const { value }, 0)
    }

    /// `a · b`; panics if `a` is not order 0 (builder misuse, not data error).
    pub fn smul(&mut self, a: usize, b: usize) -> usize {
        assert_eq!(self.orders[a], 0, "smul scalar operand must be order 0");
        let order = self.orders[b];
        self.push(NodeOp::Smul { a, b }, order)
    }

    /// `a + b`; panics on order mismatch.
    pub fn add(&mut self, a: usize, b: usize) -> usize {
        assert_eq!(self.orders[a], self.orders[b], "add operands must share order");
        let order = self.orders[a];
        self.push(NodeOp::Add { a, b }, order)
    }

    /// `tensor ⊗ vector`; panics if `vector` is not order 1.
    pub fn append(&mut self, tensor: usize, vector: usize) -> usize {
        assert_eq!(self.orders[vector], 1, "append vector operand must be order 1");
        let order = self.orders[tensor] + 1;
        self.push(NodeOp::Append { tensor, vector }, order)
    }

    /// Finish with the given output node.
    pub fn finish(self, output: usize) -> TensorCircuit {
        let raw = RawCircuit {
            slots: self.slots,
            output,
            order: self.orders[output],
            nodes: self.nodes,
        };
        validate_circuit(&raw).expect("builder-constructed circuits are valid by construction")
    }

    fn push(&mut self, node: NodeOp, order: usize) -> usize {
        self.nodes.push(node);
        self.orders.push(order);
        self.nodes.len() - 1
    }
}

/// Emit the real/imaginary node pair of `(x + iy)^⊗n / √n!` into a builder.
///
/// Stage `j` multiplies by `1/√j`, so the pair after stage `n` already
/// carries the full `1/√n!` and every intermediate stays bounded.
pub fn ext_hermite_nodes(
    b: &mut CircuitBuilder,
    x: usize,
    y: usize,
    n: usize,
) -> (usize, usize) {
    let mut p_re = b.constant(1.0);
    let mut p_im = b.constant(0.0);
    if n == 0 {
        return (p_re, p_im);
    }
    let neg1 = b.constant(-1.0);
    for j in 1..=n {
        let inv = b.constant(1.0 / (j as f64).sqrt());
        let rx = b.append(p_re, x);
        let ry = b.append(p_re, y);
        let ix = b.append(p_im, x);
        let iy = b.append(p_im, y);
        let neg_iy = b.smul(neg1, iy);
        let re_sum = b.add(rx, neg_iy);
        let im_sum = b.add(ry, ix);
        p_re = b.smul(inv, re_sum);
        p_im = b.smul(inv, im_sum);
    }
    (p_re, p_im)
}

/// STC computing `scale · H_n(x, y)` with `H_n(x,y) = Re((x+iy)^⊗n)/√n!`.
///
/// Inputs: vector slots `x`, `y` in that order.  Size is linear in `n`.
pub fn ext_hermite_circuit(n: usize, scale: f64) -> TensorCircuit {
    let mut b = CircuitBuilder::new();
    let x = b.vector_input();
    let y = b.vector_input();
    let (re, _) = ext_hermite_nodes(&mut b, x, y, n);
    let c = b.constant(scale);
    let out = b.smul(c, re);
    b.finish(out)
}

/// Emit the order-`a` real part of `(u_re + i·u_im)^{n−a} · (x' + iy')^⊗a`,
/// with the full `1/√n!` folded across all `n` stages (scalar stages first).
pub fn contracted_ext_hermite_nodes(
    b: &mut CircuitBuilder,
    u_re: usize,
    u_im: usize,
    xp: usize,
    yp: usize,
    n: usize,
    a: usize,
) -> (usize, usize) {
    assert!(a <= n, "retained order {a} exceeds circuit order {n}");
    let mut s_re = b.constant(1.0);
    let mut s_im = b.constant(0.0);
    let neg1 = b.constant(-1.0);
    // Complex scalar power (u_re + i·u_im)^{n−a}, with 1/√j at stage j.
    for j in 1..=(n - a) {
        let inv = b.constant(1.0 / (j as f64).sqrt());
        let rr = b.smul(u_re, s_re);
        let ii = b.smul(u_im, s_im);
        let ri = b.smul(u_im, s_re);
        let ir = b.smul(u_re, s_im);
        let neg_ii = b.smul(neg1, ii);
        let re_sum = b.add(rr, neg_ii);
        let im_sum = b.add(ri, ir);
        s_re = b.smul(inv, re_sum);
        s_im = b.smul(inv, im_sum);
    }
    // Tensor stages appending x' and y', with 1/√(n−a+j) at stage j.
    let mut p_re = s_re;
    let mut p_im = s_im;
    for j in 1..=a {
        let inv = b.constant(1.0 / ((n - a + j) as f64).sqrt());
        let rx = b.append(p_re, xp);
        let ry = b.append(p_re, yp);
        let ix = b.append(p_im, xp);
        let iy = b.append(p_im, yp);
        let neg_iy = b.smul(neg1, iy);
        let re_sum = b.add(rx, neg_iy);
        let im_sum = b.add(ry, ix);
        p_re = b.smul(inv, re_sum);
        p_im = b.smul(inv, im_sum);
    }
    (p_re, p_im)
}

/// STC computing the contraction of `scale · H_n` over its last `n−a` modes
/// with a fixed unit vector `e`, restricted to the first-block coordinates.
///
/// Inputs, in order: scalar `u_re = x·e`, scalar `u_im = y·e`, vector `x'`,
/// vector `y'` (the coordinates of `x`, `y` complementary to `e`).  The dot
/// products are computed by the sampler and fed as scalar inputs, keeping
/// contraction out of the operation set.
pub fn contracted_ext_hermite_circuit(n: usize, a: usize, scale: f64) -> Result<TensorCircuit, Error> {
    if a > n {
        return Err(Error::InvalidParameter(format!(
            "contracted circuit retains order {a} > total order {n}"
        )));
    }
    let mut b = CircuitBuilder::new();
    let u_re = b.scalar_input();
    let u_im = b.scalar_input();
    let xp = b.vector_input();
    let yp = b.vector_input();
    let (re, _) = contracted_ext_hermite_nodes(&mut b, u_re, u_im, xp, yp, n, a);
    let c = b.constant(scale);
    let out = b.smul(c, re);
    Ok(b.finish(out))
}
