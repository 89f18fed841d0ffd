//! The maps an honest-but-curious server observes: the parameter gradient a
//! horizontal-FL client uploads, or the cut-layer embedding a vertical-FL
//! client sends. Both come with exact input Jacobians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{Dual, Network, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `½‖out − target‖²`
    SquaredError,
    /// `−log softmax(out)[label]`
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Class(usize),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MapMode {
    HflGradient { loss: Loss, label: Target },
    VflEmbedding { cut: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Hfl,
    Vfl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedMapSpec {
    pub network: Network,
    #[serde(flatten)]
    pub mode: MapMode,
}

/// `p × m` Jacobian of a shared map at one input.
#[derive(Debug, Clone)]
pub struct Jacobian {
    pub g: Matrix,
    pub kind: MapKind,
    /// FNV-1a hash of the input bits the Jacobian was evaluated at.
    pub fingerprint: u64,
}

impl Jacobian {
    /// Wraps an arbitrary matrix, e.g. a linear map `F(x) = Gx`.
    pub fn from_matrix(g: Matrix, kind: MapKind) -> Result<Self> {
        if !g.is_finite() {
            return Err(Error::NonFinite("Jacobian".into()));
        }
        Ok(Jacobian { g, kind, fingerprint: 0 })
    }

    pub fn p(&self) -> usize {
        self.g.rows()
    }

    pub fn m(&self) -> usize {
        self.g.cols()
    }
}

impl SharedMapSpec {
    pub fn hfl(network: Network, loss: Loss, label: Target) -> Result<Self> {
        let spec = SharedMapSpec { network, mode: MapMode::HflGradient { loss, label } };
        spec.validate()?;
        Ok(spec)
    }

    pub fn vfl(network: Network, cut: usize) -> Result<Self> {
        let spec = SharedMapSpec { network, mode: MapMode::VflEmbedding { cut } };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let out = self.network.output_dim();
        match &self.mode {
            MapMode::VflEmbedding { cut } => {
                if *cut == 0 || *cut > self.network.layers().len() {
                    return Err(Error::Config(format!(
                        "cut {cut} outside 1..={}",
                        self.network.layers().len()
                    )));
                }
            }
            MapMode::HflGradient { loss, label } => match (loss, label) {
                (_, Target::Class(c)) if *c >= out => {
                    return Err(Error::InvalidArgument(format!("label {c} out of range for {out} outputs")))
                }
                (Loss::CrossEntropy, Target::Vector(_)) => {
                    return Err(Error::Config("cross_entropy needs a class label".into()))
                }
                (Loss::SquaredError, Target::Vector(t)) if t.len() != out => {
                    return Err(Error::Shape(format!("target has {} entries, network emits {out}", t.len())))
                }
                _ => {}
            },
        }
        Ok(())
    }

    pub fn kind(&self) -> MapKind {
        match self.mode {
            MapMode::HflGradient { .. } => MapKind::Hfl,
            MapMode::VflEmbedding { .. } => MapKind::Vfl,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.network.input_dim()
    }

    /// Length of the shared vector.
    pub fn output_dim(&self) -> usize {
        match &self.mode {
            MapMode::HflGradient { .. } => self.network.param_count(),
            MapMode::VflEmbedding { cut } => self.network.layers()[cut - 1].outputs(),
        }
    }

    /// Same network and loss with a different label (no-op for VFL).
    pub fn with_label(&self, label: Target) -> Result<Self> {
        let mut spec = self.clone();
        if let MapMode::HflGradient { label: l, .. } = &mut spec.mode {
            *l = label;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        match &self.mode {
            MapMode::VflEmbedding { cut } => self.network.trace(x, *cut).pop().map(|t| t.post).unwrap_or_default(),
            MapMode::HflGradient { loss, label } => param_gradient(&self.network, x, *loss, label),
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        self.validate()?;
        self.network.check_input(x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("shared-map input".into()));
        }
        Ok(())
    }

    /// Shared vector `F(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.eval(x))
    }

    /// Training loss at `x` (HFL only).
    pub fn loss_value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        match &self.mode {
            MapMode::HflGradient { loss, label } => {
                let out = self.network.forward(x)?;
                Ok(loss_value(&out, *loss, label))
            }
            MapMode::VflEmbedding { .. } => Err(Error::InvalidArgument("embedding maps carry no loss".into())),
        }
    }

    /// Analytic Jacobian `∂F/∂x` (p × m).
    ///
    /// VFL multiplies the layer Jacobians; HFL pushes one forward-mode tangent
    /// per input coordinate through the analytic parameter gradient.
    pub fn jacobian(&self, x: &[f64]) -> Result<Jacobian> {
        self.check(x)?;
        let g = match &self.mode {
            MapMode::VflEmbedding { cut } => self.embedding_jacobian(x, *cut)?,
            MapMode::HflGradient { .. } => {
                let (m, p) = (x.len(), self.output_dim());
                let mut g = Matrix::zeros(p, m);
                let mut xd: Vec<Dual> = x.iter().map(|&v| Dual::cst(v)).collect();
                for j in 0..m {
                    xd[j].d = 1.0;
                    let col = self.eval(&xd);
                    xd[j].d = 0.0;
                    for (i, c) in col.iter().enumerate() {
                        g[(i, j)] = c.d;
                    }
                }
                g
            }
        };
        if !g.is_finite() {
            return Err(Error::NonFinite("Jacobian".into()));
        }
        Ok(Jacobian { g, kind: self.kind(), fingerprint: fingerprint(x) })
    }

    fn embedding_jacobian(&self, x: &[f64], cut: usize) -> Result<Matrix> {
        let layers = &self.network.layers()[..cut];
        let traces = self.network.trace(x, cut);
        let mut jac = Matrix::identity(x.len());
        for (l, t) in layers.iter().zip(&traces) {
            let mut next = Matrix::zeros(l.outputs(), x.len());
            for o in 0..l.outputs() {
                let scale = l.activation().derivative(t.pre[o], t.post[o]);
                if scale == 0.0 {
                    continue;
                }
                let row = next.row_mut(o);
                for i in 0..l.inputs() {
                    let w = l.weight(o, i) * scale;
                    if w == 0.0 {
                        continue;
                    }
                    for (r, &a) in row.iter_mut().zip(jac.row(i)) {
                        *r += w * a;
                    }
                }
            }
            jac = next;
        }
        Ok(jac)
    }

    /// Vector-Jacobian product `G_xᵀ · cotangent`.
    pub fn vjp(&self, x: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        if cotangent.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "cotangent has {} entries, shared map emits {}",
                cotangent.len(),
                self.output_dim()
            )));
        }
        match &self.mode {
            MapMode::HflGradient { .. } => self.jacobian(x)?.g.tr_matvec(cotangent),
            MapMode::VflEmbedding { cut } => {
                let layers = &self.network.layers()[..*cut];
                let traces = self.network.trace(x, *cut);
                let mut upstream = cotangent.to_vec();
                for (l, t) in layers.iter().zip(&traces).rev() {
                    let delta: Vec<f64> = (0..l.outputs())
                        .map(|o| upstream[o] * l.activation().derivative(t.pre[o], t.post[o]))
                        .collect();
                    let mut down = vec![0.0; l.inputs()];
                    for (o, &d) in delta.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        for (i, v) in down.iter_mut().enumerate() {
                            *v += l.weight(o, i) * d;
                        }
                    }
                    upstream = down;
                }
                Ok(upstream)
            }
        }
    }
}

/// Central-difference Jacobian, column by column.
pub fn jacobian_fd(spec: &SharedMapSpec, x: &[f64], h: f64) -> Result<Jacobian> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    spec.check(x)?;
    let (m, p) = (x.len(), spec.output_dim());
    let mut g = Matrix::zeros(p, m);
    let mut probe = x.to_vec();
    for j in 0..m {
        probe[j] = x[j] + h;
        let plus = spec.eval(&probe);
        probe[j] = x[j] - h;
        let minus = spec.eval(&probe);
        probe[j] = x[j];
        for i in 0..p {
            g[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(Jacobian { g, kind: spec.kind(), fingerprint: fingerprint(x) })
}

/// Elementwise mean of the Jacobians at each center.
pub fn class_center_jacobian(spec: &SharedMapSpec, centers: &[Vec<f64>]) -> Result<Jacobian> {
    let Some(first) = centers.first() else {
        return Err(Error::InvalidArgument("no class centers".into()));
    };
    let mut acc = spec.jacobian(first)?;
    let mut fp = acc.fingerprint;
    for c in &centers[1..] {
        let j = spec.jacobian(c)?;
        fp = fp.rotate_left(5) ^ j.fingerprint;
        acc.g = Matrix::from_vec(
            acc.g.rows(),
            acc.g.cols(),
            acc.g.as_slice().iter().zip(j.g.as_slice()).map(|(a, b)| a + b).collect(),
        )?;
    }
    acc.g = acc.g.scale(1.0 / centers.len() as f64);
    acc.fingerprint = fp;
    Ok(acc)
}

/// Analytic `∇_θ L(θ; x, label)` in the network's parameter order.
fn param_gradient<S: Scalar>(net: &Network, x: &[S], loss: Loss, label: &Target) -> Vec<S> {
    let layers = net.layers();
    let traces = net.trace(x, layers.len());
    let out = &traces[layers.len() - 1].post;

    let mut upstream: Vec<S> = match (loss, label) {
        (Loss::SquaredError, Target::Vector(t)) => out.iter().zip(t).map(|(&o, &ti)| o - S::cst(ti)).collect(),
        (Loss::SquaredError, Target::Class(c)) => out
            .iter()
            .enumerate()
            .map(|(i, &o)| o - S::cst(if i == *c { 1.0 } else { 0.0 }))
            .collect(),
        (Loss::CrossEntropy, target) => {
            let c = match target {
                Target::Class(c) => *c,
                Target::Vector(_) => unreachable!("validated"),
            };
            let probs = softmax(out);
            probs
                .into_iter()
                .enumerate()
                .map(|(i, p)| if i == c { p - S::cst(1.0) } else { p })
                .collect()
        }
    };

    let mut per_layer: Vec<Vec<S>> = vec![Vec::new(); layers.len()];
    for li in (0..layers.len()).rev() {
        let l = &layers[li];
        let t = &traces[li];
        let delta: Vec<S> = (0..l.outputs())
            .map(|o| upstream[o] * l.activation().derivative(t.pre[o], t.post[o]))
            .collect();
        let input: &[S] = if li == 0 { x } else { &traces[li - 1].post };
        let mut grad = Vec::with_capacity(l.param_count());
        for &d in &delta {
            for &a in input {
                grad.push(d * a);
            }
        }
        grad.extend_from_slice(&delta);
        per_layer[li] = grad;
        if li > 0 {
            let mut down = vec![S::cst(0.0); l.inputs()];
            for (o, &d) in delta.iter().enumerate() {
                for (i, v) in down.iter_mut().enumerate() {
                    *v += d * l.weight(o, i);
                }
            }
            upstream = down;
        }
    }
    per_layer.concat()
}

fn softmax<S: Scalar>(z: &[S]) -> Vec<S> {
    let max = z.iter().map(|v| v.value()).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<S> = z.iter().map(|&v| (v - S::cst(max)).exp()).collect();
    let mut total = S::cst(0.0);
    for &v in &e {
        total += v;
    }
    e.into_iter().map(|v| v / total).collect()
}

fn loss_value(out: &[f64], loss: Loss, label: &Target) -> f64 {
    match (loss, label) {
        (Loss::SquaredError, Target::Vector(t)) => 0.5 * out.iter().zip(t).map(|(o, t)| (o - t).powi(2)).sum::<f64>(),
        (Loss::SquaredError, Target::Class(c)) => {
            0.5 * out
                .iter()
                .enumerate()
                .map(|(i, o)| (o - if i == *c { 1.0 } else { 0.0 }).powi(2))
                .sum::<f64>()
        }
        (Loss::CrossEntropy, Target::Class(c)) => -softmax(out)[*c].ln(),
        (Loss::CrossEntropy, Target::Vector(_)) => f64::NAN,
    }
}

/// A few epochs of plain SGD on labelled inputs, enough to move a freshly
/// initialized network away from its symmetric starting point.
pub fn light_training(
    network: &mut Network,
    data: &[(Vec<f64>, Target)],
    loss: Loss,
    learning_rate: f64,
    epochs: usize,
) -> Result<()> {
    for _ in 0..epochs {
        for (x, label) in data {
            let spec = SharedMapSpec::hfl(network.clone(), loss, label.clone())?;
            let grad = spec.forward(x)?;
            let params: Vec<f64> = network.params().iter().zip(&grad).map(|(p, g)| p - learning_rate * g).collect();
            network.set_params(&params)?;
        }
    }
    if network.params().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("training diverged".into()));
    }
    Ok(())
}

pub(crate) fn fingerprint(x: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in x {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}
