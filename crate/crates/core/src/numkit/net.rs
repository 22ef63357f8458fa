use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{self, Domain};

pub const NET_FORMAT: &str = "cflens-net-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One affine layer `y = act(W x + b)`, `W` row-major with shape `rows x cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub act: Activation,
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(cols: usize, rows: usize, act: Activation) -> Self {
        Self {
            act,
            rows,
            cols,
            w: vec![0.0; rows * cols],
            b: vec![0.0; rows],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.cols
    }

    pub fn out_dim(&self) -> usize {
        self.rows
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid(format!(
                "layer {index} has a zero dimension"
            )));
        }
        if self.w.len() != self.rows * self.cols || self.b.len() != self.rows {
            return Err(Error::invalid(format!(
                "layer {index}: weight/bias lengths do not match {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.w
                .chunks_exact(self.cols)
                .zip(&self.b)
                .map(|(row, b)| dot2(row, x, *b)),
        );
    }
}

/// `bias + row . x` accumulated with error-free transformations, as
/// accurate as twice the working precision. The product errors are exact,
/// so the hardware and portable paths agree bit for bit.
fn dot2(row: &[f64], x: &[f64], bias: f64) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("fma") && std::is_x86_feature_detected!("avx2") {
            // SAFETY: both features were detected at runtime.
            return unsafe { dot2_fma(row, x, bias) };
        }
    }
    dot2_with(row, x, bias, |w, v, p| {
        let (wh, wl) = split(w);
        let (vh, vl) = split(v);
        wl * vl - (((p - wh * vh) - wl * vh) - wh * vl)
    })
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot2_fma(row: &[f64], x: &[f64], bias: f64) -> f64 {
    dot2_with(row, x, bias, |w, v, p| w.mul_add(v, -p))
}

#[inline(always)]
fn dot2_with(
    row: &[f64],
    x: &[f64],
    bias: f64,
    product_error: impl Fn(f64, f64, f64) -> f64,
) -> f64 {
    const LANES: usize = 4;
    let mut s = [0.0; LANES];
    let mut c = [0.0; LANES];
    s[0] = bias;
    let mut add = |lane: usize, w: f64, v: f64| {
        let p = w * v;
        let (t, e) = two_sum(s[lane], p);
        c[lane] += product_error(w, v, p) + e;
        s[lane] = t;
    };
    let body = row.len() / LANES * LANES;
    for (ws, vs) in row[..body]
        .chunks_exact(LANES)
        .zip(x[..body].chunks_exact(LANES))
    {
        for lane in 0..LANES {
            add(lane, ws[lane], vs[lane]);
        }
    }
    for (k, (&w, &v)) in row[body..].iter().zip(&x[body..]).enumerate() {
        add(k, w, v);
    }
    let (mut total, mut err) = (s[0], c.iter().sum::<f64>());
    for &lane in &s[1..] {
        let (t, e) = two_sum(total, lane);
        total = t;
        err += e;
    }
    total + err
}

#[inline(always)]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let t = a + b;
    let z = t - a;
    (t, (a - (t - z)) + (b - z))
}

#[inline(always)]
fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

/// Network output and the final layer's pre-activation.
pub type OutputWithPre = (Vec<f64>, Vec<f64>);

/// Activations recorded by [`DenseNet::forward`].
///
/// `inputs[k]` is the input of layer `k`; `pre[k]` and `post[k]` its
/// pre- and post-activation values.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Gradients with the same shapes as the owning [`DenseNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<LayerGrad>,
    pub input: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    w: vec![0.0; l.w.len()],
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
            input: vec![0.0; net.in_dim()],
        }
    }

    /// `self += other`, element by element.
    pub fn accumulate(&mut self, other: &GradientBundle) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.iter_mut().zip(&b.w).for_each(|(x, y)| *x += y);
            a.b.iter_mut().zip(&b.b).for_each(|(x, y)| *x += y);
        }
        self.input
            .iter_mut()
            .zip(&other.input)
            .for_each(|(x, y)| *x += y);
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|x| *x *= factor);
            l.b.iter_mut().for_each(|x| *x *= factor);
        }
        self.input.iter_mut().for_each(|x| *x *= factor);
    }

    /// Index of the first layer holding a NaN or infinite gradient.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.w.iter().chain(&l.b).any(|v| !v.is_finite()))
    }

    /// Parameter gradients flattened in [`DenseNet::params`] order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(&l.b).copied())
            .collect()
    }
}

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetFile", into = "NetFile")]
pub struct DenseNet {
    seed: u64,
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    format: String,
    seed: u64,
    layers: Vec<Layer>,
}

impl TryFrom<NetFile> for DenseNet {
    type Error = Error;

    fn try_from(file: NetFile) -> Result<Self> {
        if file.format != NET_FORMAT {
            return Err(Error::Format {
                expected: NET_FORMAT,
                found: file.format,
            });
        }
        DenseNet::from_layers(file.seed, file.layers)
    }
}

impl From<DenseNet> for NetFile {
    fn from(net: DenseNet) -> Self {
        NetFile {
            format: NET_FORMAT.to_owned(),
            seed: net.seed,
            layers: net.layers,
        }
    }
}

impl DenseNet {
    /// Glorot-uniform weights, zero biases, drawn from the `Init` stream of `seed`.
    ///
    /// `dims` lists every width from input to output, so `dims.len()` must be
    /// `acts.len() + 1`.
    pub fn new(seed: u64, dims: &[usize], acts: &[Activation]) -> Result<Self> {
        if dims.len() < 2 || dims.len() != acts.len() + 1 {
            return Err(Error::invalid(format!(
                "need one activation per layer: {} dims, {} activations",
                dims.len(),
                acts.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(acts)
            .enumerate()
            .map(|(k, (pair, &act))| {
                let (cols, rows) = (pair[0], pair[1]);
                let mut layer = Layer::zeros(cols, rows, act);
                let limit = (6.0 / (cols + rows) as f64).sqrt();
                let mut rng = rng::stream(Domain::Init, seed, k as u64);
                for w in &mut layer.w {
                    *w = rng.random_range(-limit..limit);
                }
                layer
            })
            .collect();
        Self::from_layers(seed, layers)
    }

    pub fn from_layers(seed: u64, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        for (k, layer) in layers.iter().enumerate() {
            layer.validate(k)?;
            if layer.w.iter().chain(&layer.b).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "layer {k} holds non-finite weights"
                )));
            }
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].rows != pair[1].cols {
                return Err(Error::invalid(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].rows,
                    k + 1,
                    pair[1].cols
                )));
            }
        }
        Ok(Self { seed, layers })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Zeroes the weights and biases of the final layer.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("non-empty by construction");
        last.w.iter_mut().for_each(|w| *w = 0.0);
        last.b.iter_mut().for_each(|b| *b = 0.0);
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(&l.b).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim("set_params", self.param_count(), params.len())?;
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Calls `visit(k, up, down)` for every flat parameter `k` (in
    /// `params()` order) with the output and final pre-activation after
    /// moving that parameter by `+eps` and `-eps`. Work ahead of the moved
    /// unit is shared between calls.
    pub fn visit_param_perturbations(
        &self,
        x: &[f64],
        eps: f64,
        visit: &mut dyn FnMut(usize, OutputWithPre, OutputWithPre) -> Result<()>,
    ) -> Result<()> {
        let (_, tape) = self.forward(x)?;
        let mut k = 0;
        let mut row = Vec::new();
        for (at, layer) in self.layers.iter().enumerate() {
            let input = &tape.inputs[at];
            for r in 0..layer.rows {
                let base_row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                for c in 0..=layer.cols {
                    let shifted = [eps, -eps].map(|e| {
                        row.clear();
                        row.extend_from_slice(base_row);
                        let mut bias = layer.b[r];
                        if c < layer.cols {
                            row[c] += e;
                        } else {
                            bias += e;
                        }
                        let mut pre = tape.pre[at].clone();
                        pre[r] = dot2(&row, input, bias);
                        let mut post = tape.post[at].clone();
                        post[r] = layer.act.apply(pre[r]);
                        self.finish_from(at + 1, pre, post)
                    });
                    let [up, down] = shifted;
                    // weights come first in the flat order, then biases
                    let index = if c < layer.cols {
                        k + r * layer.cols + c
                    } else {
                        k + layer.w.len() + r
                    };
                    visit(index, up, down)?;
                }
            }
            k += layer.w.len() + layer.b.len();
        }
        Ok(())
    }

    fn finish_from(&self, start: usize, mut pre: Vec<f64>, mut cur: Vec<f64>) -> OutputWithPre {
        for layer in &self.layers[start..] {
            layer.affine(&cur, &mut pre);
            cur = pre.iter().map(|&v| layer.act.apply(v)).collect();
        }
        (cur, pre)
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Output only, no tape.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("net input", self.in_dim(), x.len())?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.affine(&cur, &mut next);
            next.iter_mut().for_each(|v| *v = layer.act.apply(*v));
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Output and the final layer's pre-activation.
    pub fn eval_with_pre(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim("net input", self.in_dim(), x.len())?;
        let mut cur = x.to_vec();
        let mut pre = Vec::new();
        for layer in &self.layers {
            layer.affine(&cur, &mut pre);
            cur = pre.iter().map(|&v| layer.act.apply(v)).collect();
        }
        Ok((cur, pre))
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Tape)> {
        check_dim("net input", self.in_dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("network input is not finite"));
        }
        let mut tape = Tape::default();
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut pre = Vec::with_capacity(layer.rows);
            layer.affine(&cur, &mut pre);
            let post: Vec<f64> = pre.iter().map(|&v| layer.act.apply(v)).collect();
            tape.inputs.push(std::mem::replace(&mut cur, post.clone()));
            tape.pre.push(pre);
            tape.post.push(post);
        }
        Ok((cur, tape))
    }

    fn check_tape(&self, tape: &Tape, grad_out: &[f64]) -> Result<()> {
        check_dim("backward grad_out", self.out_dim(), grad_out.len())?;
        let consistent = tape.inputs.len() == self.layers.len()
            && tape.pre.len() == self.layers.len()
            && tape.post.len() == self.layers.len()
            && self.layers.iter().enumerate().all(|(k, l)| {
                tape.inputs[k].len() == l.cols
                    && tape.pre[k].len() == l.rows
                    && tape.post[k].len() == l.rows
            });
        if consistent {
            Ok(())
        } else {
            Err(Error::invalid("tape does not belong to this network"))
        }
    }

    /// Reverse-mode derivatives of `grad_out . output` w.r.t. every parameter
    /// and the input.
    pub fn backward(&self, tape: &Tape, grad_out: &[f64]) -> Result<GradientBundle> {
        self.check_tape(tape, grad_out)?;
        let mut grads = GradientBundle::zeros_like(self);
        grads.input = self.backprop(tape, grad_out, Some(&mut grads.layers));
        Ok(grads)
    }

    /// Input gradient only; skips the parameter gradients of a frozen net.
    pub fn input_gradient(&self, tape: &Tape, grad_out: &[f64]) -> Result<Vec<f64>> {
        self.check_tape(tape, grad_out)?;
        Ok(self.backprop(tape, grad_out, None))
    }

    fn backprop(
        &self,
        tape: &Tape,
        grad_out: &[f64],
        mut param_grads: Option<&mut Vec<LayerGrad>>,
    ) -> Vec<f64> {
        let mut delta = grad_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            delta
                .iter_mut()
                .zip(tape.pre[k].iter().zip(&tape.post[k]))
                .for_each(|(d, (&x, &y))| *d *= layer.act.derivative(x, y));
            let input = &tape.inputs[k];
            if let Some(grads) = param_grads.as_deref_mut() {
                let g = &mut grads[k];
                for (r, &d) in delta.iter().enumerate() {
                    g.b[r] += d;
                    if d != 0.0 {
                        g.w[r * layer.cols..(r + 1) * layer.cols]
                            .iter_mut()
                            .zip(input)
                            .for_each(|(gw, x)| *gw += d * x);
                    }
                }
            }
            let mut next = vec![0.0; layer.cols];
            for (row, &d) in layer.w.chunks_exact(layer.cols).zip(&delta) {
                if d != 0.0 {
                    next.iter_mut().zip(row).for_each(|(n, w)| *n += d * w);
                }
            }
            delta = next;
        }
        delta
    }
}
