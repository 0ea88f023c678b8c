//! Per-agent Q-network: an LSTM encoder over the observation window, a ReLU
//! dense trunk and dueling value/advantage heads, with hand-written reverse
//! mode gradients and an Adam optimizer. All math is `f64`.
//!
//! Parameter layout (one flat vector, in this order):
//!
//! | block            | shape                          |
//! |------------------|--------------------------------|
//! | LSTM weights     | `4U x (I + U)` row-major       |
//! | LSTM bias        | `4U`                           |
//! | dense `k` weights| `out_k x in_k` row-major       |
//! | dense `k` bias   | `out_k`                        |
//! | value weights    | `1 x last`                     |
//! | value bias       | `1`                            |
//! | advantage weights| `A x last`                     |
//! | advantage bias   | `A`                            |
//!
//! LSTM rows are grouped by gate: input, forget, candidate, output. Each row
//! multiplies the concatenation `[x_t; h_{t-1}]`.

mod adam;
pub mod gradcheck;
mod io;

use rand::Rng;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use io::{load_params, save_params, PARAM_FILE_VERSION};

use crate::env::Observation;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NetworkSpec {
    pub input_width: usize,
    pub recurrent_units: usize,
    pub dense_widths: Vec<usize>,
    pub num_actions: usize,
}

impl NetworkSpec {
    /// LSTM(64) followed by dense layers of 128 and 64 units.
    pub fn standard(input_width: usize, num_actions: usize) -> Self {
        Self {
            input_width,
            recurrent_units: 64,
            dense_widths: vec![128, 64],
            num_actions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0
            || self.recurrent_units == 0
            || self.num_actions == 0
            || self.dense_widths.iter().any(|&w| w == 0)
        {
            return Err(Error::Shape(format!(
                "all network widths must be >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        Layout::new(self).total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    w: usize,
    b: usize,
    inputs: usize,
    outputs: usize,
}

/// Offsets of every block in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    lstm_w: usize,
    lstm_b: usize,
    dense: Vec<Dense>,
    value: Dense,
    advantage: Dense,
    total: usize,
}

impl Layout {
    fn new(spec: &NetworkSpec) -> Self {
        let u = spec.recurrent_units;
        let xh = spec.input_width + u;
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let lstm_w = take(4 * u * xh);
        let lstm_b = take(4 * u);
        let mut dense = Vec::with_capacity(spec.dense_widths.len());
        let mut inputs = u;
        for &outputs in &spec.dense_widths {
            let w = take(outputs * inputs);
            let b = take(outputs);
            dense.push(Dense {
                w,
                b,
                inputs,
                outputs,
            });
            inputs = outputs;
        }
        let value = Dense {
            w: take(inputs),
            b: take(1),
            inputs,
            outputs: 1,
        };
        let advantage = Dense {
            w: take(spec.num_actions * inputs),
            b: take(spec.num_actions),
            inputs,
            outputs: spec.num_actions,
        };
        Self {
            lstm_w,
            lstm_b,
            dense,
            value,
            advantage,
            total: at,
        }
    }
}

/// Named parameter blocks, for gradient checks and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    LstmInput,
    LstmRecurrent,
    LstmBias,
    DenseWeight,
    DenseBias,
    Value,
    Advantage,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 7] = [
        ParamGroup::LstmInput,
        ParamGroup::LstmRecurrent,
        ParamGroup::LstmBias,
        ParamGroup::DenseWeight,
        ParamGroup::DenseBias,
        ParamGroup::Value,
        ParamGroup::Advantage,
    ];
}

/// Flat parameter (or gradient) vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Deep copy of a parameter vector (used for target-network syncs).
pub fn clone_params(params: &ParamVector) -> ParamVector {
    params.clone()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intermediate values of one forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<f64>,
    steps: usize,
    /// Per step: `[x; h_prev]` (I + U).
    xh: Vec<f64>,
    /// Per step: activated gates i, f, g, o (4U).
    gates: Vec<f64>,
    /// Per step: previous cell state (U).
    c_prev: Vec<f64>,
    /// Per step: tanh of the new cell state (U).
    tanh_c: Vec<f64>,
    /// Trunk activations; `acts[0]` is the final hidden state.
    acts: Vec<Vec<f64>>,
    /// Dense pre-activations, one per dense layer.
    pre: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

impl ForwardTrace {
    /// Sign pattern of all ReLU inputs; differs across a kink.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.pre.iter().flatten().map(|&z| z > 0.0).collect()
    }

    pub fn input(&self) -> &[f64] {
        &self.inputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layout: Layout,
    params: ParamVector,
}

impl Network {
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        let params = ParamVector::zeros(layout.total);
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    /// Glorot-uniform weights, zero biases, forget-gate bias 1.
    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        let u = net.spec.recurrent_units;
        let xh = net.spec.input_width + u;
        let mut fill = |p: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in p {
                *w = rng.gen_range(-limit..limit);
            }
        };
        let l = net.layout.clone();
        let p = &mut net.params.0;
        fill(&mut p[l.lstm_w..l.lstm_w + 4 * u * xh], xh, u);
        for d in l.dense.iter().chain([&l.value, &l.advantage]) {
            fill(&mut p[d.w..d.w + d.inputs * d.outputs], d.inputs, d.outputs);
        }
        for b in &mut p[l.lstm_b + u..l.lstm_b + 2 * u] {
            *b = 1.0;
        }
        Ok(net)
    }

    pub fn from_params(spec: NetworkSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        if params.len() != layout.total {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &ParamVector) {
        assert_eq!(params.len(), self.params.len(), "parameter length mismatch");
        self.params.0.copy_from_slice(&params.0);
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    /// Index range of a parameter group. Dense groups span all dense layers.
    pub fn group_ranges(&self, group: ParamGroup) -> Vec<std::ops::Range<usize>> {
        let l = &self.layout;
        let u = self.spec.recurrent_units;
        let (i, xh) = (self.spec.input_width, self.spec.input_width + u);
        match group {
            ParamGroup::LstmInput => (0..4 * u)
                .map(|r| l.lstm_w + r * xh..l.lstm_w + r * xh + i)
                .collect(),
            ParamGroup::LstmRecurrent => (0..4 * u)
                .map(|r| l.lstm_w + r * xh + i..l.lstm_w + (r + 1) * xh)
                .collect(),
            ParamGroup::LstmBias => vec![l.lstm_b..l.lstm_b + 4 * u],
            ParamGroup::DenseWeight => l
                .dense
                .iter()
                .map(|d| d.w..d.w + d.inputs * d.outputs)
                .collect(),
            ParamGroup::DenseBias => l.dense.iter().map(|d| d.b..d.b + d.outputs).collect(),
            ParamGroup::Value => vec![l.value.w..l.value.b + 1],
            ParamGroup::Advantage => vec![l.advantage.w..l.advantage.b + l.advantage.outputs],
        }
    }

    fn check_input(&self, obs: &Observation) -> Result<()> {
        if obs.width() != self.spec.input_width {
            return Err(Error::Shape(format!(
                "observation frame width {} != network input width {}",
                obs.width(),
                self.spec.input_width
            )));
        }
        Ok(())
    }

    /// Q-values for every action.
    pub fn forward(&self, obs: &Observation) -> Result<Vec<f64>> {
        Ok(self.forward_trace(obs)?.q)
    }

    pub fn forward_trace(&self, obs: &Observation) -> Result<ForwardTrace> {
        self.check_input(obs)?;
        let p = &self.params.0;
        let l = &self.layout;
        let u = self.spec.recurrent_units;
        let iw = self.spec.input_width;
        let xh_len = iw + u;
        let steps = obs.history();

        let mut tr = ForwardTrace {
            inputs: obs.as_slice().to_vec(),
            steps,
            xh: Vec::with_capacity(steps * xh_len),
            gates: Vec::with_capacity(steps * 4 * u),
            c_prev: Vec::with_capacity(steps * u),
            tanh_c: Vec::with_capacity(steps * u),
            acts: Vec::with_capacity(l.dense.len() + 1),
            pre: Vec::with_capacity(l.dense.len()),
            q: Vec::new(),
        };

        let mut h = vec![0.0; u];
        let mut c = vec![0.0; u];
        let mut xh = vec![0.0; xh_len];
        let mut z = vec![0.0; 4 * u];
        for frame in obs.frames() {
            xh[..iw].copy_from_slice(frame);
            xh[iw..].copy_from_slice(&h);
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &p[l.lstm_w + r * xh_len..l.lstm_w + (r + 1) * xh_len];
                *zr = p[l.lstm_b + r] + dot(row, &xh);
            }
            tr.xh.extend_from_slice(&xh);
            tr.c_prev.extend_from_slice(&c);
            let (zi, rest) = z.split_at_mut(u);
            let (zf, rest) = rest.split_at_mut(u);
            let (zg, zo) = rest.split_at_mut(u);
            for k in 0..u {
                zi[k] = sigmoid(zi[k]);
                zf[k] = sigmoid(zf[k]);
                zg[k] = zg[k].tanh();
                zo[k] = sigmoid(zo[k]);
                c[k] = zf[k] * c[k] + zi[k] * zg[k];
                let tc = c[k].tanh();
                h[k] = zo[k] * tc;
                tr.tanh_c.push(tc);
            }
            tr.gates.extend_from_slice(&z);
        }

        let mut a = h;
        for d in &l.dense {
            let mut pre = vec![0.0; d.outputs];
            for (o, po) in pre.iter_mut().enumerate() {
                *po = p[d.b + o] + dot(&p[d.w + o * d.inputs..d.w + (o + 1) * d.inputs], &a);
            }
            let next: Vec<f64> = pre.iter().map(|&x| x.max(0.0)).collect();
            tr.acts.push(std::mem::replace(&mut a, next));
            tr.pre.push(pre);
        }
        tr.acts.push(a);
        let last = tr.acts.last().unwrap();

        let v = p[l.value.b] + dot(&p[l.value.w..l.value.w + l.value.inputs], last);
        let adv = &l.advantage;
        let advantages: Vec<f64> = (0..adv.outputs)
            .map(|k| {
                p[adv.b + k]
                    + dot(
                        &p[adv.w + k * adv.inputs..adv.w + (k + 1) * adv.inputs],
                        last,
                    )
            })
            .collect();
        tr.q = dueling(v, &advantages);
        Ok(tr)
    }

    /// Accumulates `d(dq . Q)/d params` into `grad`.
    pub fn backward(&self, tr: &ForwardTrace, dq: &[f64], grad: &mut [f64]) {
        assert_eq!(dq.len(), self.spec.num_actions, "upstream gradient length");
        assert_eq!(grad.len(), self.layout.total, "gradient buffer length");
        let p = &self.params.0;
        let l = &self.layout;
        let u = self.spec.recurrent_units;
        let iw = self.spec.input_width;
        let xh_len = iw + u;

        let total: f64 = dq.iter().sum();
        let d_value = total;
        let mean_share = total / dq.len() as f64;
        let last = tr.acts.last().unwrap();

        let mut d_act = vec![0.0; last.len()];
        axpy(
            d_value,
            last,
            &mut grad[l.value.w..l.value.w + l.value.inputs],
        );
        grad[l.value.b] += d_value;
        axpy(
            d_value,
            &p[l.value.w..l.value.w + l.value.inputs],
            &mut d_act,
        );
        let adv = &l.advantage;
        for (k, &dqk) in dq.iter().enumerate() {
            let da = dqk - mean_share;
            if da == 0.0 {
                continue;
            }
            let w = adv.w + k * adv.inputs;
            axpy(da, last, &mut grad[w..w + adv.inputs]);
            grad[adv.b + k] += da;
            axpy(da, &p[w..w + adv.inputs], &mut d_act);
        }

        for (k, d) in l.dense.iter().enumerate().rev() {
            let input = &tr.acts[k];
            let pre = &tr.pre[k];
            let mut d_in = vec![0.0; d.inputs];
            for o in 0..d.outputs {
                if pre[o] <= 0.0 || d_act[o] == 0.0 {
                    continue;
                }
                let g = d_act[o];
                let w = d.w + o * d.inputs;
                axpy(g, input, &mut grad[w..w + d.inputs]);
                grad[d.b + o] += g;
                axpy(g, &p[w..w + d.inputs], &mut d_in);
            }
            d_act = d_in;
        }

        let mut dh = d_act;
        let mut dc = vec![0.0; u];
        let mut dz = vec![0.0; 4 * u];
        for t in (0..tr.steps).rev() {
            let gates = &tr.gates[t * 4 * u..(t + 1) * 4 * u];
            let (gi, gf, gg, go) = (
                &gates[..u],
                &gates[u..2 * u],
                &gates[2 * u..3 * u],
                &gates[3 * u..],
            );
            let c_prev = &tr.c_prev[t * u..(t + 1) * u];
            let tanh_c = &tr.tanh_c[t * u..(t + 1) * u];
            for k in 0..u {
                let d_o = dh[k] * tanh_c[k];
                let dck = dc[k] + dh[k] * go[k] * (1.0 - tanh_c[k] * tanh_c[k]);
                dz[k] = dck * gg[k] * gi[k] * (1.0 - gi[k]);
                dz[u + k] = dck * c_prev[k] * gf[k] * (1.0 - gf[k]);
                dz[2 * u + k] = dck * gi[k] * (1.0 - gg[k] * gg[k]);
                dz[3 * u + k] = d_o * go[k] * (1.0 - go[k]);
                dc[k] = dck * gf[k];
            }
            let xh = &tr.xh[t * xh_len..(t + 1) * xh_len];
            let mut dh_prev = vec![0.0; u];
            for (r, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let w = l.lstm_w + r * xh_len;
                axpy(g, xh, &mut grad[w..w + xh_len]);
                grad[l.lstm_b + r] += g;
                axpy(g, &p[w + iw..w + xh_len], &mut dh_prev);
            }
            dh = dh_prev;
        }
    }

    /// Gradient of `dq . Q(obs)` as a fresh vector.
    pub fn gradient(&self, obs: &Observation, dq: &[f64]) -> Result<ParamVector> {
        let tr = self.forward_trace(obs)?;
        let mut g = ParamVector::zeros(self.layout.total);
        self.backward(&tr, dq, &mut g.0);
        Ok(g)
    }
}

/// `Q(a) = V + A(a) - mean(A)`.
pub fn dueling(value: f64, advantages: &[f64]) -> Vec<f64> {
    let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
    advantages.iter().map(|&a| value + (a - mean)).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec {
            input_width: 3,
            recurrent_units: 5,
            dense_widths: vec![6, 4],
            num_actions: 3,
        }
    }

    fn obs(width: usize, history: usize, seed: u64) -> Observation {
        let mut rng = substream(seed, Stream::Evaluation, 0);
        Observation::new(width, (0..width * history).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn standard_layout_size() {
        let spec = NetworkSpec::standard(5, 10);
        let lstm = 4 * 64 * (5 + 64) + 4 * 64;
        let dense = 64 * 128 + 128 + 128 * 64 + 64;
        let heads = 64 + 1 + 10 * 64 + 10;
        assert_eq!(spec.param_count(), lstm + dense + heads);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::zeros(tiny_spec()).unwrap();
        assert_eq!(net.forward(&obs(3, 4, 1)).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn dueling_examples() {
        assert_eq!(dueling(1.0, &[0.0, 2.0, 4.0]), vec![-1.0, 1.0, 3.0]);
        assert_eq!(dueling(0.7, &[0.3, 0.3, 0.3]), vec![0.7, 0.7, 0.7]);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }

    #[test]
    fn forward_is_pure_and_checks_width() {
        let net = Network::init(tiny_spec(), &mut substream(1, Stream::Init, 0)).unwrap();
        let o = obs(3, 4, 2);
        assert_eq!(net.forward(&o).unwrap(), net.forward(&o).unwrap());
        assert!(matches!(net.forward(&obs(4, 4, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn init_sets_forget_bias() {
        let net = Network::init(tiny_spec(), &mut substream(1, Stream::Init, 0)).unwrap();
        let b = &net.group_ranges(ParamGroup::LstmBias)[0];
        let bias = &net.params().as_slice()[b.clone()];
        assert!(bias[..5].iter().all(|&x| x == 0.0));
        assert!(bias[5..10].iter().all(|&x| x == 1.0));
        assert!(bias[10..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let net = Network::init(tiny_spec(), &mut substream(1, Stream::Init, 0)).unwrap();
        let g = net.gradient(&obs(3, 4, 5), &[0.0; 3]).unwrap();
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn advantage_bias_gradient_is_one_minus_share() {
        let net = Network::init(tiny_spec(), &mut substream(1, Stream::Init, 0)).unwrap();
        let g = net.gradient(&obs(3, 4, 5), &[0.0, 1.0, 0.0]).unwrap();
        let adv = net.group_ranges(ParamGroup::Advantage)[0].clone();
        let biases = &g.as_slice()[adv.end - 3..adv.end];
        assert!((biases[1] - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
        assert!((biases[0] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn clone_is_independent() {
        let net = Network::init(tiny_spec(), &mut substream(1, Stream::Init, 0)).unwrap();
        let mut original = net.params().clone();
        let copy = clone_params(&original);
        assert_eq!(copy, original);
        original.0[0] += 1.0;
        assert_ne!(copy, original);
        assert_eq!(copy, *net.params());
        assert!(clone_params(&ParamVector::zeros(4))
            .as_slice()
            .iter()
            .all(|&x| x == 0.0));
    }

    proptest! {
        /// Small-integer advantages and values keep every operation exact, so
        /// the spread identity must hold bit for bit.
        #[test]
        fn dueling_spread_exact_on_dyadic_heads(v in -64i32..64, adv in prop::collection::vec(-64i32..64, 4)) {
            let a: Vec<f64> = adv.iter().map(|&x| x as f64).collect();
            let q = dueling(v as f64, &a);
            let spread = |x: &[f64]| x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
            prop_assert_eq!(spread(&q), spread(&a));
        }

        #[test]
        fn dueling_spread_close_on_random_heads(v in -10.0f64..10.0, a in prop::collection::vec(-10.0f64..10.0, 2..12)) {
            let q = dueling(v, &a);
            let spread = |x: &[f64]| x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
            prop_assert!((spread(&q) - spread(&a)).abs() <= 1e-12 * (1.0 + spread(&a)));
        }
    }
}
