//! Fully connected Q-network with online/target parameter sets, trained by
//! Adam on the squared TD error of the taken action.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

/// Float types the network can run in.
pub trait Real:
    ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + num_traits::Float
    + num_traits::FromPrimitive
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
    const NAME: &'static str;
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}

fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite constant")
}

/// Weights are stored `(fan_in, fan_out)` so a batch forward is `x . W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Real> Mlp<T> {
    /// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output widths");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((w[0], w[1]), || cast(rng.random_range(-bound..bound))));
            biases.push(Array1::from_shape_simple_fn(w[1], || cast(rng.random_range(-bound..bound))));
        }
        Self { weights, biases }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            weights: other.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: other.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Layer widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.weights[0].nrows()];
        s.extend(self.weights.iter().map(|w| w.ncols()));
        s
    }

    pub fn input_width(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_width(&self) -> usize {
        self.weights.last().expect("non-empty").ncols()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Output of every layer; hidden layers are rectified, the last is linear.
    fn layer_outputs(&self, x: ArrayView2<T>) -> Vec<Array2<T>> {
        let last = self.weights.len() - 1;
        let mut outs: Vec<Array2<T>> = Vec::with_capacity(self.weights.len());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = if l == 0 { x } else { outs[l - 1].view() };
            let mut z = input.dot(w) + b;
            if l < last {
                z.mapv_inplace(|v| v.max(T::zero()));
            }
            outs.push(z);
        }
        outs
    }

    /// Batch forward: `(B, in) -> (B, out)`.
    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        self.layer_outputs(x).pop().expect("at least one layer")
    }

    pub fn forward_one(&self, state: &[T]) -> Array1<T> {
        let x = ArrayView2::from_shape((1, state.len()), state).expect("state width");
        self.forward(x).index_axis_move(Axis(0), 0)
    }

    /// `L = 1/B * sum_i (y_i - Q(s_i, a_i))^2` and its gradient.
    pub fn loss_and_grad(&self, x: ArrayView2<T>, actions: &[usize], targets: &[T]) -> (T, Mlp<T>) {
        let b = x.nrows();
        assert_eq!(actions.len(), b);
        assert_eq!(targets.len(), b);
        let outs = self.layer_outputs(x);
        let q = outs.last().expect("at least one layer");
        let inv_b = cast::<T>(1.0) / cast::<T>(b as f64);
        let two = cast::<T>(2.0);
        let mut loss = T::zero();
        let mut delta = Array2::<T>::zeros(q.raw_dim());
        for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let diff = q[[i, a]] - y;
            loss = loss + diff * diff;
            delta[[i, a]] = two * diff * inv_b;
        }
        loss = loss * inv_b;

        let mut grads = Mlp::zeros_like(self);
        for l in (0..self.weights.len()).rev() {
            let input = if l == 0 { x } else { outs[l - 1].view() };
            grads.weights[l] = input.t().dot(&delta);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                Zip::from(&mut back).and(&outs[l - 1]).for_each(|g, &a| {
                    if a <= T::zero() {
                        *g = T::zero();
                    }
                });
                delta = back;
            }
        }
        (loss, grads)
    }

    /// Mean squared error only, for checks.
    pub fn loss(&self, x: ArrayView2<T>, actions: &[usize], targets: &[T]) -> T {
        let q = self.forward(x);
        let mut loss = T::zero();
        for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let diff = q[[i, a]] - y;
            loss = loss + diff * diff;
        }
        loss / cast(actions.len() as f64)
    }

    fn tensors_mut(&mut self) -> impl Iterator<Item = ndarray::ArrayViewMut1<'_, T>> {
        let w = self.weights.iter_mut().map(|w| {
            let n = w.len();
            w.view_mut().into_shape_with_order(n).expect("contiguous")
        });
        let b = self.biases.iter_mut().map(|b| b.view_mut());
        w.chain(b)
    }

    fn tensors(&self) -> impl Iterator<Item = ArrayView1<'_, T>> {
        let w = self.weights.iter().map(|w| w.view().into_shape_with_order(w.len()).expect("contiguous"));
        let b = self.biases.iter().map(|b| b.view());
        w.chain(b)
    }

    /// All parameters, weights first then biases, each row-major.
    pub fn flat_params(&self) -> Vec<T> {
        self.tensors().flat_map(|t| t.to_vec()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.param_count());
        let mut at = 0;
        for mut t in self.tensors_mut() {
            let n = t.len();
            t.assign(&ArrayView1::from(&flat[at..at + n]));
            at += n;
        }
    }
}

/// First index of the maximum; NaN never wins.
pub fn argmax<T: Real>(values: ArrayView1<T>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    m: Mlp<T>,
    v: Mlp<T>,
    step: i32,
    beta1: T,
    beta2: T,
    epsilon: T,
}

impl<T: Real> Adam<T> {
    pub fn new(shape: &Mlp<T>) -> Self {
        Self {
            m: Mlp::zeros_like(shape),
            v: Mlp::zeros_like(shape),
            step: 0,
            beta1: cast(0.9),
            beta2: cast(0.999),
            epsilon: cast(1e-8),
        }
    }

    pub fn update(&mut self, params: &mut Mlp<T>, grads: &Mlp<T>, lr: T) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let one = T::one();
        let c1 = one - b1.powi(self.step);
        let c2 = one - b2.powi(self.step);
        for (((mut p, mut m), mut v), g) in
            params.tensors_mut().zip(self.m.tensors_mut()).zip(self.v.tensors_mut()).zip(grads.tensors())
        {
            Zip::from(&mut p).and(&mut m).and(&mut v).and(&g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
    }
}

/// A sampled minibatch in matrix form.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub states: Array2<T>,
    pub actions: Vec<usize>,
    pub rewards: Vec<T>,
    pub next_states: Array2<T>,
}

/// Learning targets for a batch.
///
/// Episodic: `y = r`. Bootstrapped: `y = r + gamma * Q_target(s', argmax_a Q_online(s', a))`.
pub fn compute_targets<T: Real>(batch: &Batch<T>, gamma: T, bootstrap: bool, online: &Mlp<T>, target: &Mlp<T>) -> Vec<T> {
    if !bootstrap {
        return batch.rewards.clone();
    }
    let q_online = online.forward(batch.next_states.view());
    let q_target = target.forward(batch.next_states.view());
    batch
        .rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let a = argmax(q_online.row(i));
            r + gamma * q_target[[i, a]]
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct QNetwork<T> {
    pub online: Mlp<T>,
    pub target: Mlp<T>,
    adam: Adam<T>,
}

impl<T: Real> QNetwork<T> {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], actions: usize, rng: &mut R) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(actions);
        let online = Mlp::new(&sizes, rng);
        Self { target: online.clone(), adam: Adam::new(&online), online }
    }

    pub fn actions(&self) -> usize {
        self.online.output_width()
    }

    pub fn q_values(&self, state: &[T]) -> Array1<T> {
        self.online.forward_one(state)
    }

    /// Greedy action; ties go to the lowest index.
    pub fn policy(&self, state: &[T]) -> usize {
        argmax(self.q_values(state).view())
    }

    /// Epsilon-greedy over the online network.
    pub fn select_action<R: Rng + ?Sized>(&self, state: &[T], epsilon: f64, rng: &mut R) -> usize {
        if rng.random::<f64>() < epsilon {
            rng.random_range(0..self.actions())
        } else {
            self.policy(state)
        }
    }

    /// One Adam step on the batch. Returns the loss before the update.
    pub fn train_step(&mut self, states: ArrayView2<T>, actions: &[usize], targets: &[T], lr: T) -> T {
        let (loss, grads) = self.online.loss_and_grad(states, actions, targets);
        self.adam.update(&mut self.online, &grads, lr);
        loss
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
    }

    /// Writes a text shape header followed by online then target parameters
    /// as little-endian f64.
    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let sizes: Vec<String> = self.online.sizes().iter().map(|s| s.to_string()).collect();
        writeln!(out, "qnet {} {}", T::NAME, sizes.join(","))?;
        for net in [&self.online, &self.target] {
            for p in net.flat_params() {
                out.write_all(&p.to_f64().expect("finite").to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Restores parameters saved by [`QNetwork::save`]. Optimizer state starts fresh.
    pub fn load<R: BufRead>(mut input: R) -> std::io::Result<Self> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut header = String::new();
        input.read_line(&mut header)?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("qnet") {
            return Err(bad("missing checkpoint header"));
        }
        parts.next().ok_or_else(|| bad("missing float type"))?;
        let sizes: Vec<usize> = parts
            .next()
            .ok_or_else(|| bad("missing layer sizes"))?
            .split(',')
            .map(|s| s.parse().map_err(|_| bad("bad layer size")))
            .collect::<std::io::Result<_>>()?;
        if sizes.len() < 2 {
            return Err(bad("need at least two layer sizes"));
        }
        let mut online = Mlp::<T> {
            weights: sizes.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect(),
            biases: sizes[1..].iter().map(|&s| Array1::zeros(s)).collect(),
        };
        let mut target = online.clone();
        for net in [&mut online, &mut target] {
            let mut flat = Vec::with_capacity(net.param_count());
            let mut buf = [0u8; 8];
            for _ in 0..net.param_count() {
                input.read_exact(&mut buf)?;
                flat.push(cast(f64::from_le_bytes(buf)));
            }
            net.set_flat_params(&flat);
        }
        Ok(Self { adam: Adam::new(&online), online, target })
    }
}
