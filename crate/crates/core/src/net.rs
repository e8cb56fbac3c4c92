//! Two-layer sigmoid networks trained by plain online backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest and highest training target a sigmoid unit is asked to reach.
pub const TARGET_FLOOR: f64 = 0.001;
pub const TARGET_CEIL: f64 = 0.999;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed network record: {0}")]
    Format(String),
}

/// Which parameter bundle a network uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NetKind {
    /// Q-value networks.
    Q,
    /// Reward networks.
    R,
    /// Predecessor networks.
    P,
    /// Gates; same bundle as predecessor networks, one output.
    G,
}

/// Training loss on the output layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Loss {
    /// `½‖out − target‖²`.
    #[default]
    Squared,
    /// Logistic cross-entropy; the output delta loses the `o(1−o)` factor,
    /// so saturated units near 0/1 targets keep learning.
    CrossEntropy,
}

impl Loss {
    /// Squared error asks for no more than the sigmoid can reach; the
    /// logistic loss stays bounded at 0 and 1, so only the range is enforced.
    pub fn clamp_target(self, t: f64) -> f64 {
        match self {
            Loss::Squared => t.clamp(TARGET_FLOOR, TARGET_CEIL),
            Loss::CrossEntropy => t.clamp(0.0, 1.0),
        }
    }
}

/// Hidden size, init bound, learning rate, slopes and loss of one network kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub hidden: usize,
    pub init_bound: f64,
    pub learning_rate: f64,
    pub hidden_slope: f64,
    pub output_slope: f64,
    pub loss: Loss,
}

impl NetKind {
    pub fn default_params(self) -> NetParams {
        match self {
            NetKind::Q => NetParams {
                hidden: 10,
                init_bound: 0.05,
                learning_rate: 0.5,
                hidden_slope: 1.0,
                output_slope: 0.4,
                loss: Loss::Squared,
            },
            NetKind::R => NetParams {
                hidden: 16,
                init_bound: 0.0045,
                learning_rate: 0.1,
                hidden_slope: 1.0,
                output_slope: 0.4,
                loss: Loss::CrossEntropy,
            },
            NetKind::P | NetKind::G => NetParams {
                hidden: 26,
                init_bound: 0.1,
                learning_rate: 0.1,
                hidden_slope: 0.9,
                output_slope: 0.5,
                loss: Loss::CrossEntropy,
            },
        }
    }
}

#[inline]
fn sigmoid(slope: f64, x: f64) -> f64 {
    1.0 / (1.0 + (-slope * x).exp())
}

/// A fully connected input -> hidden -> output network with slope-scaled
/// logistic units on both layers.
///
/// Parameters live in one flat vector laid out as `[w1 | b1 | w2 | b2]`,
/// weights row-major (one row per unit of the receiving layer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredNet {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    hidden_slope: f64,
    output_slope: f64,
    learning_rate: f64,
    #[serde(default)]
    loss: Loss,
    params: Vec<f64>,
}

impl LayeredNet {
    /// Weights uniform in `±init_bound`, biases zero.
    pub fn new<R: Rng + ?Sized>(params: NetParams, input_dim: usize, output_dim: usize, rng: &mut R) -> LayeredNet {
        assert!(input_dim > 0 && output_dim > 0 && params.hidden > 0, "network dimensions must be positive");
        let mut net = LayeredNet::zeros(params, input_dim, output_dim);
        let b = params.init_bound;
        let (w1, w2) = (net.w1_range(), net.w2_range());
        for i in w1.chain(w2) {
            net.params[i] = if b > 0.0 { rng.gen_range(-b..=b) } else { 0.0 };
        }
        net
    }

    pub fn zeros(params: NetParams, input_dim: usize, output_dim: usize) -> LayeredNet {
        let h = params.hidden;
        let count = h * input_dim + h + output_dim * h + output_dim;
        LayeredNet {
            input_dim,
            hidden_dim: h,
            output_dim,
            hidden_slope: params.hidden_slope,
            output_slope: params.output_slope,
            learning_rate: params.learning_rate,
            loss: params.loss,
            params: vec![0.0; count],
        }
    }

    pub fn of_kind<R: Rng + ?Sized>(kind: NetKind, input_dim: usize, output_dim: usize, rng: &mut R) -> LayeredNet {
        LayeredNet::new(kind.default_params(), input_dim, output_dim, rng)
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden_dim * self.input_dim
    }

    fn b1_offset(&self) -> usize {
        self.hidden_dim * self.input_dim
    }

    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.hidden_dim
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        self.w2_offset()..self.w2_offset() + self.output_dim * self.hidden_dim
    }

    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.output_dim * self.hidden_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn hidden_slope(&self) -> f64 {
        self.hidden_slope
    }

    pub fn output_slope(&self) -> f64 {
        self.output_slope
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NetError> {
        if input.len() != self.input_dim {
            return Err(NetError::DimensionMismatch { expected: self.input_dim, got: input.len() });
        }
        Ok(())
    }

    fn hidden_activations(&self, input: &[f64]) -> Vec<f64> {
        let n = self.input_dim;
        let b1 = self.b1_offset();
        (0..self.hidden_dim)
            .map(|j| {
                let row = &self.params[j * n..(j + 1) * n];
                let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.params[b1 + j];
                sigmoid(self.hidden_slope, z)
            })
            .collect()
    }

    fn output_from_hidden(&self, hidden: &[f64]) -> Vec<f64> {
        let h = self.hidden_dim;
        let w2 = self.w2_offset();
        let b2 = self.b2_offset();
        (0..self.output_dim)
            .map(|k| {
                let row = &self.params[w2 + k * h..w2 + (k + 1) * h];
                let z: f64 = row.iter().zip(hidden).map(|(w, y)| w * y).sum::<f64>() + self.params[b2 + k];
                sigmoid(self.output_slope, z)
            })
            .collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(input)?;
        Ok(self.output_from_hidden(&self.hidden_activations(input)))
    }

    /// Single-output convenience; panics on dimension mismatch.
    pub fn value(&self, input: &[f64]) -> f64 {
        self.forward(input).expect("input dimension")[0]
    }

    /// Derivative of the loss w.r.t. an output unit's pre-activation.
    #[inline]
    fn output_delta(&self, o: f64, t: f64) -> f64 {
        match self.loss {
            Loss::Squared => (o - t) * self.output_slope * o * (1.0 - o),
            Loss::CrossEntropy => (o - t) * self.output_slope,
        }
    }

    /// Gradient of the training loss w.r.t. every parameter, same layout
    /// as [`LayeredNet::params`]. Targets are used as given.
    pub fn gradient(&self, input: &[f64], target: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(input)?;
        if target.len() != self.output_dim {
            return Err(NetError::DimensionMismatch { expected: self.output_dim, got: target.len() });
        }
        let hidden = self.hidden_activations(input);
        let out = self.output_from_hidden(&hidden);
        let (n, h) = (self.input_dim, self.hidden_dim);
        let (b1, w2, b2) = (self.b1_offset(), self.w2_offset(), self.b2_offset());
        let mut grad = vec![0.0; self.params.len()];

        let out_delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(&o, &t)| self.output_delta(o, t))
            .collect();
        let mut hid_delta = vec![0.0; h];
        for (k, &d) in out_delta.iter().enumerate() {
            for j in 0..h {
                grad[w2 + k * h + j] = d * hidden[j];
                hid_delta[j] += d * self.params[w2 + k * h + j];
            }
            grad[b2 + k] = d;
        }
        for j in 0..h {
            let d = hid_delta[j] * self.hidden_slope * hidden[j] * (1.0 - hidden[j]);
            for i in 0..n {
                grad[j * n + i] = d * input[i];
            }
            grad[b1 + j] = d;
        }
        Ok(grad)
    }

    /// One SGD step towards `target`, clamped into the sigmoid's reach.
    pub fn backprop(&mut self, input: &[f64], target: &[f64]) -> Result<(), NetError> {
        self.check_input(input)?;
        if target.len() != self.output_dim {
            return Err(NetError::DimensionMismatch { expected: self.output_dim, got: target.len() });
        }
        let hidden = self.hidden_activations(input);
        let out = self.output_from_hidden(&hidden);
        let (n, h) = (self.input_dim, self.hidden_dim);
        let (b1, w2, b2) = (self.b1_offset(), self.w2_offset(), self.b2_offset());
        let lr = self.learning_rate;

        let mut hid_delta = vec![0.0; h];
        for (k, (&o, &t)) in out.iter().zip(target).enumerate() {
            let t = self.loss.clamp_target(t);
            let d = self.output_delta(o, t);
            if d == 0.0 {
                continue;
            }
            let row = &mut self.params[w2 + k * h..w2 + (k + 1) * h];
            for j in 0..h {
                hid_delta[j] += d * row[j];
                row[j] -= lr * d * hidden[j];
            }
            self.params[b2 + k] -= lr * d;
        }
        for j in 0..h {
            let d = hid_delta[j] * self.hidden_slope * hidden[j] * (1.0 - hidden[j]);
            if d == 0.0 {
                continue;
            }
            for (w, x) in self.params[j * n..(j + 1) * n].iter_mut().zip(input) {
                *w -= lr * d * x;
            }
            self.params[b1 + j] -= lr * d;
        }
        Ok(())
    }

    pub fn l1_error(&self, input: &[f64], target: &[f64]) -> Result<f64, NetError> {
        let out = self.forward(input)?;
        if target.len() != out.len() {
            return Err(NetError::DimensionMismatch { expected: out.len(), got: target.len() });
        }
        Ok(out.iter().zip(target).map(|(o, t)| (o - t).abs()).sum())
    }

    /// Training loss on one sample; [`LayeredNet::gradient`] differentiates this.
    pub fn loss_value(&self, input: &[f64], target: &[f64]) -> Result<f64, NetError> {
        let out = self.forward(input)?;
        if target.len() != out.len() {
            return Err(NetError::DimensionMismatch { expected: out.len(), got: target.len() });
        }
        Ok(out
            .iter()
            .zip(target)
            .map(|(&o, &t)| match self.loss {
                Loss::Squared => 0.5 * (o - t) * (o - t),
                Loss::CrossEntropy => -(t * o.ln() + (1.0 - t) * (1.0 - o).ln()),
            })
            .sum())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// One-line JSON record (dims, slopes, learning rate, flat parameters).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn from_json_line(line: &str) -> Result<LayeredNet, NetError> {
        let net: LayeredNet = serde_json::from_str(line).map_err(|e| NetError::Format(e.to_string()))?;
        let expected = net.hidden_dim * net.input_dim + net.hidden_dim + net.output_dim * net.hidden_dim + net.output_dim;
        if net.params.len() != expected {
            return Err(NetError::Format(format!("{} parameters, expected {expected}", net.params.len())));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kind_bundles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = LayeredNet::of_kind(NetKind::Q, 34, 1, &mut rng);
        assert_eq!((q.hidden_dim(), q.learning_rate(), q.hidden_slope(), q.output_slope()), (10, 0.5, 1.0, 0.4));
        assert!(q.params()[q.w1_range()].iter().all(|w| w.abs() <= 0.05));
        let p = LayeredNet::of_kind(NetKind::P, 34, 34, &mut rng);
        assert_eq!((p.hidden_dim(), p.learning_rate(), p.hidden_slope(), p.output_slope()), (26, 0.1, 0.9, 0.5));
        assert!(p.params().iter().all(|w| w.abs() <= 0.1));
        let r = LayeredNet::of_kind(NetKind::R, 34, 1, &mut rng);
        assert_eq!((r.hidden_dim(), r.learning_rate()), (16, 0.1));
        assert!(r.params().iter().all(|w| w.abs() <= 0.0045));
        // biases start at zero
        assert!(r.params()[r.b2_offset()..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn same_seed_same_weights() {
        let a = LayeredNet::of_kind(NetKind::P, 5, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let b = LayeredNet::of_kind(NetKind::P, 5, 3, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_net_outputs_half() {
        let net = LayeredNet::zeros(NetKind::P.default_params(), 4, 3);
        assert_eq!(net.forward(&[0.3, -1.0, 2.0, 0.0]).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn steep_slope_saturates() {
        let mut net = LayeredNet::zeros(
            NetParams { hidden: 1, init_bound: 0.0, learning_rate: 0.1, hidden_slope: 1.0, output_slope: 200.0, loss: Loss::Squared },
            1,
            1,
        );
        let b2 = net.b2_offset();
        net.params_mut()[b2] = 1.0;
        assert!(net.value(&[0.0]) > 1.0 - 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let net = LayeredNet::zeros(NetKind::Q.default_params(), 4, 1);
        assert_eq!(net.forward(&[0.0; 3]), Err(NetError::DimensionMismatch { expected: 4, got: 3 }));
        assert!(net.l1_error(&[0.0; 4], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn zero_gradient_at_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = LayeredNet::of_kind(NetKind::P, 4, 2, &mut rng);
        let x = [0.1, 0.9, 0.2, 0.4];
        let out = net.forward(&x).unwrap();
        let before = net.clone();
        net.backprop(&x, &out).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn l1_examples() {
        let net = LayeredNet::zeros(NetKind::P.default_params(), 2, 2);
        assert!((net.l1_error(&[0.0, 0.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(net.l1_error(&[0.0, 0.0], &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let net = LayeredNet::of_kind(NetKind::R, 6, 1, &mut ChaCha8Rng::seed_from_u64(4));
        let back = LayeredNet::from_json_line(&net.to_json_line()).unwrap();
        assert_eq!(net, back);
        assert!(LayeredNet::from_json_line("{\"bogus\":1}").is_err());
    }
}
