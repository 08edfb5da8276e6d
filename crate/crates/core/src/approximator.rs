//! Small differentiable heads: rectified critics and a softmax policy.
//!
//! A [`Head`] is either linear (`hidden == 0`) or has one hidden layer of
//! tanh units. Parameters live in one flat vector so that updates, gradient
//! checks and snapshots all work on the same layout:
//!
//! ```text
//! hidden > 0:  W1 (hidden x inputs) | b1 (hidden) | W2 (outputs x hidden) | b2 (outputs)
//! hidden = 0:  W  (outputs x inputs) | b  (outputs)
//! ```

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Observation features fed to every head. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    /// One-hot encoding of `index` over `len` slots.
    pub fn one_hot(index: usize, len: usize) -> Self {
        assert!(index < len, "one-hot index {index} out of range {len}");
        let mut values = vec![0.0; len];
        values[index] = 1.0;
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadShape {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

impl HeadShape {
    pub fn n_params(&self) -> usize {
        if self.hidden == 0 {
            self.outputs * self.inputs + self.outputs
        } else {
            self.hidden * self.inputs + self.hidden + self.outputs * self.hidden + self.outputs
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    shape: HeadShape,
    params: Vec<f64>,
}

impl Head {
    pub fn zeros(shape: HeadShape) -> Self {
        assert!(shape.inputs > 0 && shape.outputs > 0, "degenerate head shape {shape:?}");
        Self {
            params: vec![0.0; shape.n_params()],
            shape,
        }
    }

    /// Uniform `[-scale, scale]` weights and hidden biases; output biases start at 0.
    pub fn random<R: Rng + ?Sized>(shape: HeadShape, scale: f64, rng: &mut R) -> Self {
        let mut head = Self::zeros(shape);
        if scale > 0.0 {
            let n_out_bias = shape.outputs;
            let n = head.params.len() - n_out_bias;
            for p in &mut head.params[..n] {
                *p = rng.gen_range(-scale..=scale);
            }
        }
        head
    }

    pub fn from_params(shape: HeadShape, params: Vec<f64>) -> Result<Self> {
        if params.len() != shape.n_params() {
            return Err(Error::Config(format!(
                "head {shape:?} needs {} parameters, got {}",
                shape.n_params(),
                params.len()
            )));
        }
        Ok(Self { shape, params })
    }

    pub fn shape(&self) -> HeadShape {
        self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.shape.inputs {
            return Err(Error::Config(format!(
                "head expects {} features, got {}",
                self.shape.inputs,
                x.len()
            )));
        }
        Ok(())
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let HeadShape { inputs, hidden, .. } = self.shape;
        let (w1, rest) = self.params.split_at(hidden * inputs);
        let b1 = &rest[..hidden];
        (0..hidden)
            .map(|j| {
                let row = &w1[j * inputs..(j + 1) * inputs];
                let z: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b1[j];
                z.tanh()
            })
            .collect()
    }

    fn output_layer(&self) -> (&[f64], &[f64]) {
        let HeadShape {
            inputs,
            hidden,
            outputs,
        } = self.shape;
        let width = if hidden == 0 { inputs } else { hidden };
        let start = if hidden == 0 { 0 } else { hidden * inputs + hidden };
        let (w, b) = self.params[start..].split_at(outputs * width);
        (w, b)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let h;
        let layer_in = if self.shape.hidden == 0 {
            x
        } else {
            h = self.hidden_activations(x);
            &h
        };
        let (w, b) = self.output_layer();
        let width = layer_in.len();
        Ok((0..self.shape.outputs)
            .map(|o| {
                let row = &w[o * width..(o + 1) * width];
                row.iter().zip(layer_in).map(|(w, a)| w * a).sum::<f64>() + b[o]
            })
            .collect())
    }

    /// Gradient of `Σ_o coeffs[o] · y_o` with respect to the flat parameter vector.
    pub fn gradient(&self, x: &[f64], coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let HeadShape {
            inputs,
            hidden,
            outputs,
        } = self.shape;
        if coeffs.len() != outputs {
            return Err(Error::Config(format!(
                "expected {outputs} output coefficients, got {}",
                coeffs.len()
            )));
        }
        let mut grad = vec![0.0; self.params.len()];

        if hidden == 0 {
            let (gw, gb) = grad.split_at_mut(outputs * inputs);
            for o in 0..outputs {
                for i in 0..inputs {
                    gw[o * inputs + i] = coeffs[o] * x[i];
                }
                gb[o] = coeffs[o];
            }
            return Ok(grad);
        }

        let h = self.hidden_activations(x);
        let (w2, _) = self.output_layer();
        let (g1, g2) = grad.split_at_mut(hidden * inputs + hidden);
        let (gw1, gb1) = g1.split_at_mut(hidden * inputs);
        let (gw2, gb2) = g2.split_at_mut(outputs * hidden);

        for o in 0..outputs {
            for j in 0..hidden {
                gw2[o * hidden + j] = coeffs[o] * h[j];
            }
            gb2[o] = coeffs[o];
        }
        for j in 0..hidden {
            let back: f64 = (0..outputs).map(|o| coeffs[o] * w2[o * hidden + j]).sum();
            let dz = back * (1.0 - h[j] * h[j]);
            for i in 0..inputs {
                gw1[j * inputs + i] = dz * x[i];
            }
            gb1[j] = dz;
        }
        Ok(grad)
    }

    pub(crate) fn add_scaled(&mut self, direction: &[f64], scale: f64) {
        debug_assert_eq!(direction.len(), self.params.len());
        for (p, d) in self.params.iter_mut().zip(direction) {
            *p += scale * d;
        }
    }

    /// Text snapshot: a small header followed by one parameter per line,
    /// printed with round-trip precision.
    pub fn export_text(&self, name: &str) -> String {
        assert!(
            !name.is_empty() && !name.contains(char::is_whitespace),
            "head name must be a single non-empty token"
        );
        let HeadShape {
            inputs,
            hidden,
            outputs,
        } = self.shape;
        let mut out = String::new();
        let _ = writeln!(out, "hdrl-head v1");
        let _ = writeln!(out, "name {name}");
        let _ = writeln!(out, "shape {inputs} {hidden} {outputs}");
        let _ = writeln!(out, "params {}", self.params.len());
        for p in &self.params {
            let _ = writeln!(out, "{p:?}");
        }
        out
    }

    pub fn import_text(text: &str) -> Result<(String, Head)> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("snapshot truncated before {what}")))
        };

        if next("magic")? != "hdrl-head v1" {
            return Err(Error::Parse("not an hdrl-head v1 snapshot".into()));
        }
        let name = next("name")?
            .strip_prefix("name ")
            .ok_or_else(|| Error::Parse("missing name line".into()))?
            .to_string();
        let dims: Vec<usize> = next("shape")?
            .strip_prefix("shape ")
            .ok_or_else(|| Error::Parse("missing shape line".into()))?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|e| Error::Parse(format!("bad shape entry {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let [inputs, hidden, outputs] = dims[..] else {
            return Err(Error::Parse(format!("shape needs 3 entries, got {}", dims.len())));
        };
        let count: usize = next("params")?
            .strip_prefix("params ")
            .ok_or_else(|| Error::Parse("missing params line".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad parameter count: {e}")))?;
        let params = (0..count)
            .map(|i| {
                let tok = next("parameter")?;
                let v: f64 = tok
                    .parse()
                    .map_err(|e| Error::Parse(format!("parameter {i} ({tok:?}): {e}")))?;
                ensure_finite("parameter", v)
            })
            .collect::<Result<Vec<_>>>()?;
        if next("end").is_ok() {
            return Err(Error::Parse("trailing data after parameters".into()));
        }
        let shape = HeadShape {
            inputs,
            hidden,
            outputs,
        };
        Ok((name, Head::from_params(shape, params)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticOutput {
    /// Unrectified network output `y`.
    pub raw: f64,
    /// `max(0, y)`.
    pub value: f64,
}

/// A non-negative value head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub head: Head,
}

impl Critic {
    pub fn new(head: Head) -> Self {
        assert_eq!(head.shape().outputs, 1, "a critic has exactly one output");
        Self { head }
    }

    pub fn forward(&self, features: &FeatureVector) -> Result<CriticOutput> {
        let raw = self.head.forward(features.as_slice())?[0];
        Ok(CriticOutput {
            raw,
            value: raw.max(0.0),
        })
    }

    /// Subgradient of the rectified value: the raw gradient where `y >= 0`, zero otherwise.
    pub fn value_gradient(&self, features: &FeatureVector) -> Result<Vec<f64>> {
        let out = self.forward(features)?;
        if out.raw < 0.0 {
            Ok(vec![0.0; self.head.params().len()])
        } else {
            self.head.gradient(features.as_slice(), &[1.0])
        }
    }

    /// Semi-gradient TD step `θ += lr · δ · ∇V(s)`.
    pub fn update(&mut self, features: &FeatureVector, delta: f64, lr: f64) -> Result<()> {
        ensure_finite("delta", delta)?;
        ensure_positive("lr", lr)?;
        let grad = self.value_gradient(features)?;
        self.head.add_scaled(&grad, lr * delta);
        Ok(())
    }
}

/// Softmax over raw scores with max-subtraction.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub head: Head,
}

impl Policy {
    pub fn new(head: Head) -> Self {
        Self { head }
    }

    pub fn n_actions(&self) -> usize {
        self.head.shape().outputs
    }

    pub fn probabilities(&self, features: &FeatureVector) -> Result<Vec<f64>> {
        Ok(softmax(&self.head.forward(features.as_slice())?))
    }

    pub fn log_prob(&self, features: &FeatureVector, action: usize) -> Result<f64> {
        self.check_action(action)?;
        let scores = self.head.forward(features.as_slice())?;
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        Ok(scores[action] - log_z)
    }

    /// `∇ log π(action | s)`: score gradients weighted by `1[b = action] - π(b)`.
    pub fn log_prob_gradient(&self, features: &FeatureVector, action: usize) -> Result<Vec<f64>> {
        self.check_action(action)?;
        let probs = self.probabilities(features)?;
        let coeffs: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(b, p)| if b == action { 1.0 - p } else { -p })
            .collect();
        self.head.gradient(features.as_slice(), &coeffs)
    }

    pub fn update(&mut self, features: &FeatureVector, action: usize, advantage: f64, lr: f64) -> Result<()> {
        ensure_finite("advantage", advantage)?;
        ensure_positive("lr", lr)?;
        let grad = self.log_prob_gradient(features, action)?;
        self.head.add_scaled(&grad, lr * advantage);
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.n_actions() {
            return Err(Error::InvalidInput(format!(
                "action {action} out of range for {} actions",
                self.n_actions()
            )));
        }
        Ok(())
    }
}

fn ensure_positive(name: &str, value: f64) -> Result<f64> {
    ensure_finite(name, value)?;
    if value <= 0.0 {
        return Err(Error::InvalidInput(format!("{name} must be > 0, got {value}")));
    }
    Ok(value)
}

/// Magnitude below which gradient coordinates are compared absolutely.
const GRAD_SCALE_FLOOR: f64 = 1e-6;

/// Largest `|a - n| / max(|a|, |n|, 1e-6)` over all coordinates.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(GRAD_SCALE_FLOOR))
        .fold(0.0, f64::max)
}

fn central_differences<F>(params: &[f64], eps: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let up = f(&probe);
            probe[i] = orig - eps;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

fn check_eps(eps: f64) {
    assert!(
        (1e-7..=1e-3).contains(&eps),
        "finite-difference step must lie in [1e-7, 1e-3], got {eps}"
    );
}

/// Compares `∇ Σ coeffs·y` against central differences on a copy of `head`.
pub fn finite_diff_check(head: &Head, features: &FeatureVector, coeffs: &[f64], eps: f64) -> Result<f64> {
    check_eps(eps);
    let analytic = head.gradient(features.as_slice(), coeffs)?;
    let shape = head.shape();
    let numeric = central_differences(head.params(), eps, |p| {
        let probe = Head::from_params(shape, p.to_vec()).expect("same shape");
        let y = probe.forward(features.as_slice()).expect("checked input");
        y.iter().zip(coeffs).map(|(y, c)| y * c).sum()
    });
    Ok(max_relative_error(&analytic, &numeric))
}

/// Gradient check of the rectified critic value. Returns `None` when the
/// evaluation point is within `10·eps` of the rectifier kink.
pub fn critic_gradient_check(critic: &Critic, features: &FeatureVector, eps: f64) -> Result<Option<f64>> {
    check_eps(eps);
    let out = critic.forward(features)?;
    if out.raw.abs() <= 10.0 * eps {
        return Ok(None);
    }
    let analytic = critic.value_gradient(features)?;
    let shape = critic.head.shape();
    let numeric = central_differences(critic.head.params(), eps, |p| {
        let probe = Critic::new(Head::from_params(shape, p.to_vec()).expect("same shape"));
        probe.forward(features).expect("checked input").value
    });
    Ok(Some(max_relative_error(&analytic, &numeric)))
}

/// Gradient check of `log π(action | features)`.
pub fn policy_gradient_check(policy: &Policy, features: &FeatureVector, action: usize, eps: f64) -> Result<f64> {
    check_eps(eps);
    let analytic = policy.log_prob_gradient(features, action)?;
    let shape = policy.head.shape();
    let numeric = central_differences(policy.head.params(), eps, |p| {
        let probe = Policy::new(Head::from_params(shape, p.to_vec()).expect("same shape"));
        probe.log_prob(features, action).expect("checked input")
    });
    Ok(max_relative_error(&analytic, &numeric))
}
