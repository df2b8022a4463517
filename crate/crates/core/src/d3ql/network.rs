//! Dense dueling Q-network with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::D3qlError;

/// Layer sizes of a dueling network: `input -> hidden... -> {value(1), advantage(actions)}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub actions: usize,
}

impl Architecture {
    pub fn new(input: usize, hidden: Vec<usize>, actions: usize) -> Self {
        Self {
            input,
            hidden,
            actions,
        }
    }

    /// `(fan_out, fan_in)` of every dense layer in storage order:
    /// trunk layers, then the value head, then the advantage head.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden.len() + 2);
        let mut fan_in = self.input;
        for &h in &self.hidden {
            shapes.push((h, fan_in));
            fan_in = h;
        }
        shapes.push((1, fan_in));
        shapes.push((self.actions, fan_in));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|&(o, i)| o * i + o).sum()
    }

    fn trunk_width(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input)
    }

    pub(crate) fn validate(&self) -> Result<(), D3qlError> {
        if self.input == 0 || self.actions == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(D3qlError::InvalidArchitecture(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Fully connected layer; `weights` is `out x in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub(crate) out: usize,
    pub(crate) inp: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl Dense {
    fn zeros(out: usize, inp: usize) -> Self {
        Self {
            out,
            inp,
            weights: vec![0.0; out * inp],
            bias: vec![0.0; out],
        }
    }

    fn init<R: Rng + ?Sized>(out: usize, inp: usize, rng: &mut R) -> Self {
        // He-uniform for rectified inputs.
        let limit = (6.0 / inp as f64).sqrt();
        let weights = (0..out * inp).map(|_| rng.gen_range(-limit..limit)).collect();
        Self {
            out,
            inp,
            weights,
            bias: vec![0.0; out],
        }
    }

    fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        for (o, y_o) in y.iter_mut().enumerate() {
            let row = &self.weights[o * self.inp..(o + 1) * self.inp];
            *y_o = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients for upstream `dy` and writes `dx`.
    fn backward_into(&self, x: &[f64], dy: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.bias[o] += d;
            let g_row = &mut grad.weights[o * self.inp..(o + 1) * self.inp];
            for (g, v) in g_row.iter_mut().zip(x) {
                *g += d * v;
            }
        }
        if let Some(dx) = dx {
            dx.iter_mut().for_each(|v| *v = 0.0);
            for (o, &d) in dy.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &self.weights[o * self.inp..(o + 1) * self.inp];
                for (g, w) in dx.iter_mut().zip(row) {
                    *g += d * w;
                }
            }
        }
    }
}

/// Intermediate activations of one forward pass, kept for backprop.
#[derive(Debug, Clone)]
struct Trace {
    /// `acts[0]` is the input; `acts[i + 1]` the rectified output of trunk layer `i`.
    acts: Vec<Vec<f64>>,
    value: f64,
    advantage: Vec<f64>,
}

/// Dueling Q-network: rectified trunk, scalar value head and per-action
/// advantage head, combined as `q = V + A - mean(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    arch: Architecture,
    pub(crate) trunk: Vec<Dense>,
    pub(crate) value: Dense,
    pub(crate) advantage: Dense,
}

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self, D3qlError> {
        arch.validate()?;
        let shapes = arch.layer_shapes();
        let n = shapes.len();
        let trunk = shapes[..n - 2]
            .iter()
            .map(|&(o, i)| Dense::init(o, i, rng))
            .collect();
        let value = Dense::init(shapes[n - 2].0, shapes[n - 2].1, rng);
        let advantage = Dense::init(shapes[n - 1].0, shapes[n - 1].1, rng);
        Ok(Self {
            arch,
            trunk,
            value,
            advantage,
        })
    }

    /// Network with every parameter zero.
    pub fn zeros(arch: Architecture) -> Result<Self, D3qlError> {
        arch.validate()?;
        let params = vec![0.0; arch.param_count()];
        Self::from_params(arch, &params)
    }

    /// Builds a network from a flat parameter vector laid out as in [`Self::params`].
    pub fn from_params(arch: Architecture, params: &[f64]) -> Result<Self, D3qlError> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(D3qlError::DimensionMismatch {
                expected: arch.param_count(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(D3qlError::NonFinite);
        }
        let shapes = arch.layer_shapes();
        let mut layers: Vec<Dense> = shapes.iter().map(|&(o, i)| Dense::zeros(o, i)).collect();
        let mut offset = 0;
        for layer in &mut layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        let advantage = layers.pop().expect("advantage head");
        let value = layers.pop().expect("value head");
        Ok(Self {
            arch,
            trunk: layers,
            value,
            advantage,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.trunk.iter().chain([&self.value, &self.advantage])
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.trunk
            .iter_mut()
            .chain([&mut self.value, &mut self.advantage])
    }

    /// Flat parameters: for each layer in storage order, weights (row-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.arch.param_count());
        for layer in self.layers() {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub(crate) fn apply_flat<F: FnMut(usize, &mut f64)>(&mut self, mut f: F) {
        let mut idx = 0;
        for layer in self.layers_mut() {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                f(idx, w);
                idx += 1;
            }
        }
    }

    fn check_input(&self, state: &[f64]) -> Result<(), D3qlError> {
        if state.len() != self.arch.input {
            return Err(D3qlError::DimensionMismatch {
                expected: self.arch.input,
                got: state.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, state: &[f64]) -> Trace {
        let mut acts = Vec::with_capacity(self.trunk.len() + 1);
        acts.push(state.to_vec());
        for layer in &self.trunk {
            let mut y = vec![0.0; layer.out];
            layer.forward_into(acts.last().expect("input"), &mut y);
            y.iter_mut().for_each(|v| *v = v.max(0.0));
            acts.push(y);
        }
        let h = acts.last().expect("trunk output");
        let mut v = [0.0];
        self.value.forward_into(h, &mut v);
        let mut advantage = vec![0.0; self.arch.actions];
        self.advantage.forward_into(h, &mut advantage);
        Trace {
            acts,
            value: v[0],
            advantage,
        }
    }

    fn combine(value: f64, advantage: &[f64]) -> Vec<f64> {
        let mean = advantage.iter().sum::<f64>() / advantage.len() as f64;
        advantage.iter().map(|a| value + a - mean).collect()
    }

    /// Q-values for every action.
    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>, D3qlError> {
        self.check_input(state)?;
        Ok(self.forward_unchecked(state))
    }

    pub(crate) fn forward_unchecked(&self, state: &[f64]) -> Vec<f64> {
        let t = self.trace(state);
        Self::combine(t.value, &t.advantage)
    }

    /// Value and advantage heads before aggregation.
    pub fn heads(&self, state: &[f64]) -> Result<(f64, Vec<f64>), D3qlError> {
        self.check_input(state)?;
        let t = self.trace(state);
        Ok((t.value, t.advantage))
    }

    /// Mean squared error `mean_i (q(s_i)[a_i] - y_i)^2` and its gradient with
    /// respect to the flat parameter vector.
    pub fn loss_gradient(
        &self,
        states: &[&[f64]],
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Vec<f64>), D3qlError> {
        let mut grad = Self::zeros(self.arch.clone())?;
        let loss = self.accumulate_gradient(states, actions, targets, &mut grad)?;
        Ok((loss, grad.params()))
    }

    /// Adds the loss gradient into `grad` (a zero-initialized network of the same shape).
    pub(crate) fn accumulate_gradient(
        &self,
        states: &[&[f64]],
        actions: &[usize],
        targets: &[f64],
        grad: &mut QNetwork,
    ) -> Result<f64, D3qlError> {
        let n = states.len();
        if n == 0 || actions.len() != n || targets.len() != n {
            return Err(D3qlError::DimensionMismatch {
                expected: n,
                got: actions.len().min(targets.len()),
            });
        }
        let n_actions = self.arch.actions;
        let inv_n = 1.0 / n as f64;
        let mut loss = 0.0;
        let width = self.arch.trunk_width();
        let mut d_adv = vec![0.0; n_actions];
        let mut dh = vec![0.0; width];
        let mut dh_adv = vec![0.0; width];
        for ((state, &action), &target) in states.iter().zip(actions).zip(targets) {
            self.check_input(state)?;
            if action >= n_actions {
                return Err(D3qlError::ActionOutOfRange(action));
            }
            let t = self.trace(state);
            let q = Self::combine(t.value, &t.advantage)[action];
            let err = q - target;
            loss += err * err * inv_n;
            let dq = 2.0 * err * inv_n;

            // dq[a]/dV = 1, dq[a]/dA[j] = [j == a] - 1/|A|
            let h = t.acts.last().expect("trunk output");
            for (j, d) in d_adv.iter_mut().enumerate() {
                let ind = if j == action { 1.0 } else { 0.0 };
                *d = dq * (ind - 1.0 / n_actions as f64);
            }
            self.value.backward_into(h, &[dq], &mut grad.value, Some(&mut dh));
            self.advantage
                .backward_into(h, &d_adv, &mut grad.advantage, Some(&mut dh_adv));
            for (a, b) in dh.iter_mut().zip(&dh_adv) {
                *a += b;
            }

            let mut upstream = dh.clone();
            for (i, layer) in self.trunk.iter().enumerate().rev() {
                let out = &t.acts[i + 1];
                for (d, &o) in upstream.iter_mut().zip(out) {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                }
                if i == 0 {
                    layer.backward_into(&t.acts[i], &upstream, &mut grad.trunk[i], None);
                } else {
                    let mut dx = vec![0.0; layer.inp];
                    layer.backward_into(&t.acts[i], &upstream, &mut grad.trunk[i], Some(&mut dx));
                    upstream = dx;
                }
            }
        }
        Ok(loss)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn contrived(value: f64, adv: &[f64]) -> QNetwork {
        let arch = Architecture::new(2, vec![3], adv.len());
        let mut net = QNetwork::zeros(arch).unwrap();
        net.value.bias[0] = value;
        net.advantage.bias.copy_from_slice(adv);
        net
    }

    #[test]
    fn mean_subtraction_identity() {
        let net = contrived(2.0, &[1.0, -1.0]);
        assert_eq!(net.forward(&[0.3, -0.7]).unwrap(), vec![3.0, 1.0]);
    }

    #[test]
    fn constant_advantage_cancels() {
        let net = contrived(-0.5, &[4.0, 4.0, 4.0]);
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![-0.5; 3]);
    }

    #[test]
    fn rejects_wrong_input_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = QNetwork::new(Architecture::new(4, vec![8, 8], 3), &mut rng).unwrap();
        assert!(matches!(
            net.forward(&[0.0; 3]),
            Err(D3qlError::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = QNetwork::new(Architecture::new(5, vec![7, 4], 3), &mut rng).unwrap();
        let again = QNetwork::from_params(net.architecture().clone(), &net.params()).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
