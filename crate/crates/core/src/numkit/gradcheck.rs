use super::net::{Activation, DenseNet};
use crate::error::{check_dim, Error, Result};

/// Model output, optionally with the final pre-activation that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub y: Vec<f64>,
    pub last: Option<(Vec<f64>, Activation)>,
}

impl Evaluated {
    /// `self.y - other.y`. For saturating outputs the difference is taken
    /// through the pre-activations, which keeps precision near 1.
    pub fn minus(&self, other: &Evaluated) -> Result<Vec<f64>> {
        check_dim("output difference", self.y.len(), other.y.len())?;
        let plain = |i: usize| self.y[i] - other.y[i];
        let (Some((a, act)), Some((b, other_act))) = (&self.last, &other.last) else {
            return Ok((0..self.y.len()).map(plain).collect());
        };
        if act != other_act || a.len() != self.y.len() || b.len() != self.y.len() {
            return Ok((0..self.y.len()).map(plain).collect());
        }
        Ok((0..self.y.len())
            .map(|i| {
                // tanh u - tanh v = sinh(u - v) / (cosh u cosh v)
                let exact = match act {
                    Activation::Tanh => (a[i] - b[i]).sinh() / (a[i].cosh() * b[i].cosh()),
                    Activation::Sigmoid => {
                        0.5 * ((a[i] - b[i]) / 2.0).sinh()
                            / ((a[i] / 2.0).cosh() * (b[i] / 2.0).cosh())
                    }
                    _ => plain(i),
                };
                if exact.is_finite() {
                    exact
                } else {
                    plain(i)
                }
            })
            .collect())
    }
}

/// A model with flat parameters and an exact vector-Jacobian product.
pub trait Differentiable {
    fn input_dim(&self) -> usize;

    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, params: &[f64]) -> Result<()>;

    fn value(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn evaluate(&self, x: &[f64]) -> Result<Evaluated> {
        Ok(Evaluated {
            y: self.value(x)?,
            last: None,
        })
    }

    /// Calls `visit(k, up, down)` for every parameter `k` with the model
    /// evaluated at `x` after moving that parameter by `+eps` and `-eps`.
    fn visit_param_perturbations(
        &self,
        x: &[f64],
        eps: f64,
        visit: &mut dyn FnMut(usize, Evaluated, Evaluated) -> Result<()>,
    ) -> Result<()>
    where
        Self: Clone,
    {
        let base = self.params();
        let mut shifted = base.clone();
        let mut probe = self.clone();
        for k in 0..base.len() {
            shifted[k] = base[k] + eps;
            probe.set_params(&shifted)?;
            let up = probe.evaluate(x)?;
            shifted[k] = base[k] - eps;
            probe.set_params(&shifted)?;
            let down = probe.evaluate(x)?;
            shifted[k] = base[k];
            visit(k, up, down)?;
        }
        Ok(())
    }

    /// Gradients of `grad_out . value(x)` w.r.t. the flat parameters and `x`.
    fn gradients(&self, x: &[f64], grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
}

impl Differentiable for DenseNet {
    fn input_dim(&self) -> usize {
        self.in_dim()
    }

    fn params(&self) -> Vec<f64> {
        DenseNet::params(self)
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        DenseNet::set_params(self, params)
    }

    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval(x)
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluated> {
        let (y, pre) = self.eval_with_pre(x)?;
        let act = self.layers().last().map_or(Activation::Linear, |l| l.act);
        Ok(Evaluated {
            y,
            last: Some((pre, act)),
        })
    }

    fn visit_param_perturbations(
        &self,
        x: &[f64],
        eps: f64,
        visit: &mut dyn FnMut(usize, Evaluated, Evaluated) -> Result<()>,
    ) -> Result<()> {
        let act = self.layers().last().map_or(Activation::Linear, |l| l.act);
        let wrap = |(y, pre): (Vec<f64>, Vec<f64>)| Evaluated {
            y,
            last: Some((pre, act)),
        };
        DenseNet::visit_param_perturbations(self, x, eps, &mut |k, up, down| {
            visit(k, wrap(up), wrap(down))
        })
    }

    fn gradients(&self, x: &[f64], grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (_, tape) = self.forward(x)?;
        let g = self.backward(&tape, grad_out)?;
        Ok((g.flat_params(), g.input))
    }
}

/// Scalar head applied to a model output before differentiating.
#[derive(Debug, Clone, PartialEq)]
pub enum Reduction {
    Sum,
    /// `w . y`
    Dot(Vec<f64>),
    /// `0.5 * |y|^2`
    HalfSquaredNorm,
}

impl Reduction {
    pub fn apply(&self, y: &[f64]) -> Result<f64> {
        Ok(match self {
            Reduction::Sum => y.iter().sum(),
            Reduction::Dot(w) => {
                check_dim("reduction weights", w.len(), y.len())?;
                w.iter().zip(y).map(|(a, b)| a * b).sum()
            }
            Reduction::HalfSquaredNorm => 0.5 * y.iter().map(|v| v * v).sum::<f64>(),
        })
    }

    /// `apply(up) - apply(down)`, accumulated per output so large heads do
    /// not cancel catastrophically.
    pub fn difference(&self, up: &[f64], down: &[f64]) -> Result<f64> {
        check_dim("reduction difference", up.len(), down.len())?;
        let delta: Vec<f64> = up.iter().zip(down).map(|(a, b)| a - b).collect();
        self.difference_from(&delta, up, down)
    }

    /// As [`Reduction::difference`] with `up - down` supplied as `delta`.
    pub fn difference_from(&self, delta: &[f64], up: &[f64], down: &[f64]) -> Result<f64> {
        check_dim("reduction difference", up.len(), down.len())?;
        check_dim("reduction difference", up.len(), delta.len())?;
        Ok(match self {
            Reduction::Sum => delta.iter().sum(),
            Reduction::Dot(w) => {
                check_dim("reduction weights", w.len(), up.len())?;
                w.iter().zip(delta).map(|(w, d)| w * d).sum()
            }
            Reduction::HalfSquaredNorm => {
                0.5 * delta
                    .iter()
                    .zip(up.iter().zip(down))
                    .map(|(d, (a, b))| d * (a + b))
                    .sum::<f64>()
            }
        })
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Reduction::Sum => vec![1.0; y.len()],
            Reduction::Dot(w) => w.clone(),
            Reduction::HalfSquaredNorm => y.to_vec(),
        }
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Largest relative disagreement between analytic gradients and central
/// differences, over every parameter and every input coordinate.
///
/// Any failure to evaluate the model (or `eps` outside `(0, 1e-2]`) is
/// reported as `f64::INFINITY`.
pub fn finite_diff_check<M>(model: &M, x: &[f64], head: &Reduction, eps: f64) -> f64
where
    M: Differentiable + Clone,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return f64::INFINITY;
    }
    check(model, x, head, eps).unwrap_or(f64::INFINITY)
}

fn check<M: Differentiable + Clone>(
    model: &M,
    x: &[f64],
    head: &Reduction,
    eps: f64,
) -> Result<f64> {
    let y = model.value(x)?;
    let (param_grads, input_grads) = model.gradients(x, &head.gradient(&y))?;
    let central = |up: Evaluated, down: Evaluated| -> Result<f64> {
        let delta = up.minus(&down)?;
        Ok(head.difference_from(&delta, &up.y, &down.y)? / (2.0 * eps))
    };

    let mut worst: f64 = 0.0;
    let mut visited = 0;
    model.visit_param_perturbations(x, eps, &mut |k, up, down| {
        let analytic = *param_grads.get(k).ok_or_else(|| {
            Error::invalid(format!("gradient check: parameter {k} has no gradient"))
        })?;
        worst = worst.max(relative_error(analytic, central(up, down)?));
        visited += 1;
        Ok(())
    })?;
    check_dim("gradient check parameters", param_grads.len(), visited)?;

    check_dim("gradient check input", x.len(), input_grads.len())?;
    let mut xs = x.to_vec();
    for (k, &analytic) in input_grads.iter().enumerate() {
        xs[k] = x[k] + eps;
        let up = model.evaluate(&xs)?;
        xs[k] = x[k] - eps;
        let down = model.evaluate(&xs)?;
        xs[k] = x[k];
        worst = worst.max(relative_error(analytic, central(up, down)?));
    }
    Ok(worst)
}
