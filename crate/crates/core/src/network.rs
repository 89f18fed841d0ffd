//! Small fully connected networks.
//!
//! Parameters are vectorized layer by layer; within a layer the weight matrix
//! comes first (row-major, `out × in`) followed by the bias. Every gradient,
//! Jacobian row and JSON document in this crate uses that order.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub(crate) fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Relu => {
                if z.value() > 0.0 {
                    z
                } else {
                    S::cst(0.0)
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a = act(z)`.
    /// ReLU uses subgradient 0 at the origin.
    pub(crate) fn derivative<S: Scalar>(self, z: S, a: S) -> S {
        match self {
            Activation::Relu => S::cst(if z.value() > 0.0 { 1.0 } else { 0.0 }),
            Activation::Tanh => S::cst(1.0) - a * a,
            Activation::Identity => S::cst(1.0),
        }
    }
}

/// Dense layer followed by an elementwise activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Vec<f64>, bias: Vec<f64>, inputs: usize, activation: Activation) -> Result<Self> {
        let outputs = bias.len();
        if outputs == 0 || inputs == 0 || weights.len() != outputs * inputs {
            return Err(Error::Shape(format!(
                "dense layer {outputs}x{inputs} with {} weights",
                weights.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(DenseLayer { inputs, outputs, weights, bias, activation })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub(crate) fn weight(&self, o: usize, i: usize) -> f64 {
        self.weights[o * self.inputs + i]
    }
}

/// Pre- and post-activation values of one layer.
pub(crate) struct LayerTrace<S> {
    pub pre: Vec<S>,
    pub post: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDoc", into = "NetworkDoc")]
pub struct Network {
    layers: Vec<DenseLayer>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Shape(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].outputs,
                    i + 1,
                    pair[1].inputs
                )));
            }
        }
        Ok(Network { layers })
    }

    /// Seeded network with weights and biases uniform in ±1/√fan_in.
    ///
    /// `dims` lists the widths from input to output; `activations` has one
    /// entry per layer (`dims.len() - 1`).
    pub fn random(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(activations.len());
        for (w, &act) in dims.windows(2).zip(activations) {
            let (fan_in, fan_out) = (w[0], w[1]);
            if fan_in == 0 || fan_out == 0 {
                return Err(Error::InvalidArgument("layer widths must be positive".into()));
            }
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
            let bias = (0..fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
            layers.push(DenseLayer::new(weights, bias, fan_in, act)?);
        }
        Network::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Flattened parameter vector in the documented order.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "network has {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Runs the first `depth` layers, keeping every intermediate value.
    pub(crate) fn trace<S: Scalar>(&self, x: &[S], depth: usize) -> Vec<LayerTrace<S>> {
        let mut traces: Vec<LayerTrace<S>> = Vec::with_capacity(depth);
        for l in &self.layers[..depth] {
            let input: &[S] = traces.last().map_or(x, |t| &t.post);
            let mut pre = Vec::with_capacity(l.outputs);
            for o in 0..l.outputs {
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                let mut acc = S::cst(l.bias[o]);
                for (&w, &xi) in row.iter().zip(input) {
                    acc += xi * w;
                }
                pre.push(acc);
            }
            let post = pre.iter().map(|&z| l.activation.apply(z)).collect();
            traces.push(LayerTrace { pre, post });
        }
        traces
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        Ok(self.trace(x, self.layers.len()).pop().map(|t| t.post).unwrap_or_default())
    }

    pub(crate) fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {len}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    version: u32,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    #[serde(rename = "type")]
    kind: String,
    /// `[outputs, inputs]`
    dims: [usize; 2],
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl From<Network> for NetworkDoc {
    fn from(net: Network) -> Self {
        NetworkDoc {
            version: 1,
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerDoc {
                    kind: "dense".into(),
                    dims: [l.outputs, l.inputs],
                    weights: l.weights,
                    bias: l.bias,
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkDoc> for Network {
    type Error = Error;

    fn try_from(doc: NetworkDoc) -> Result<Self> {
        if doc.version != 1 {
            return Err(Error::Config(format!("unsupported network document version {}", doc.version)));
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        for (i, l) in doc.layers.into_iter().enumerate() {
            if l.kind != "dense" {
                return Err(Error::Config(format!("layer {i}: unsupported type {:?}", l.kind)));
            }
            if l.bias.len() != l.dims[0] {
                return Err(Error::Config(format!("layer {i}: bias length does not match dims")));
            }
            layers.push(DenseLayer::new(l.weights, l.bias, l.dims[1], l.activation)?);
        }
        Network::new(layers)
    }
}

/// Numeric type the network code is generic over: plain `f64` for values,
/// [`Dual`] for forward-mode derivatives through the same code path.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

/// First-order dual number `v + d·ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn new(v: f64, d: f64) -> Self {
        Dual { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}

impl AddAssign for Dual {
    fn add_assign(&mut self, o: Dual) {
        self.v += o.v;
        self.d += o.d;
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.d * o.v + self.v * o.d)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, c: f64) -> Dual {
        Dual::new(self.v * c, self.d * c)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual::new(self.v / o.v, (self.d * o.v - self.v * o.d) / (o.v * o.v))
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}

impl Scalar for Dual {
    fn cst(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        Dual::new(t, self.d * (1.0 - t * t))
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual::new(e, self.d * e)
    }
    fn ln(self) -> Self {
        Dual::new(self.v.ln(), self.d / self.v)
    }
}
