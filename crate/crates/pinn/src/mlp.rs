//! Fully connected tanh network with forward-mode input jets.
//!
//! Parameters live in one flat vector; layer `l` stores its weight matrix
//! (row-major, `n_out × n_in`) followed by its bias. Evaluation carries four
//! channels through the network, `u`, `∂u/∂t`, `∂u/∂x` and `∂²u/∂x²`, and
//! [`Mlp::backprop`] pulls adjoints of those channels back to the parameters.

use inversa_core::Real;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::PinnError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    #[default]
    Linear,
    Sigmoid,
}

/// Which derivative channels to propagate. `xx` implies `x`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Need {
    pub t: bool,
    pub x: bool,
    pub xx: bool,
}

impl Need {
    pub const VALUE: Need = Need { t: false, x: false, xx: false };
    pub const T: Need = Need { t: true, x: false, xx: false };
    pub const T_XX: Need = Need { t: true, x: true, xx: true };

    fn mask(self) -> [bool; 4] {
        [true, self.t, self.x || self.xx, self.xx]
    }
}

/// Network output and its input derivatives at one point. Unrequested
/// channels are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointEval {
    pub u: f64,
    pub ut: f64,
    pub ux: f64,
    pub uxx: f64,
}

impl PointEval {
    fn channel(&self, c: usize) -> f64 {
        [self.u, self.ut, self.ux, self.uxx][c]
    }
}

/// Stored activations of one evaluation, consumed by [`Mlp::backprop`].
#[derive(Clone, Debug, Default)]
pub struct Tape {
    need: Need,
    // activations entering each layer (plus the network output) and
    // pre-activations, each as 4 channel blocks of the layer width
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub output: OutputActivation,
    pub theta: Vec<f64>,
}

impl Mlp {
    /// Zero-parameter network of the given shape.
    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Result<Self, PinnError> {
        if sizes.len() < 2 || sizes.iter().any(|&n| n == 0) {
            return Err(PinnError::Config(format!("invalid layer sizes {sizes:?}")));
        }
        if sizes[0] > 2 || *sizes.last().unwrap() != 1 {
            return Err(PinnError::Config("networks take (t) or (t, x) and return one value".into()));
        }
        let n = sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        Ok(Self { sizes: sizes.to_vec(), output, theta: vec![0.0; n] })
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier(sizes: &[usize], output: OutputActivation, seed: u64) -> Result<Self, PinnError> {
        let mut net = Self::zeros(sizes, output)?;
        let mut rng = inversa_core::rng::seeded(seed);
        for l in 0..net.n_layers() {
            let (n_in, n_out) = (net.sizes[l], net.sizes[l + 1]);
            let bound = xavier_bound(n_in, n_out);
            let off = net.offset(l);
            for w in &mut net.theta[off..off + n_in * n_out] {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    /// Start of layer `l` in the flat parameter vector.
    pub fn offset(&self, l: usize) -> usize {
        self.sizes[..=l].windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let off = self.offset(l);
        &self.theta[off..off + self.sizes[l] * self.sizes[l + 1]]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let off = self.offset(l) + self.sizes[l] * self.sizes[l + 1];
        &self.theta[off..off + self.sizes[l + 1]]
    }

    /// Plain forward pass over any scalar type. Used with hyper-dual numbers
    /// as an independent derivative oracle.
    pub fn forward<T: Real>(&self, theta: &[T], input: &[T]) -> T {
        let mut a: Vec<T> = input.to_vec();
        let mut off = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &theta[off..off + n_in * n_out];
            let b = &theta[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let last = l + 1 == self.n_layers();
            a = (0..n_out)
                .map(|i| {
                    let z = (0..n_in).fold(b[i], |s, j| s + w[i * n_in + j] * a[j]);
                    match (last, self.output) {
                        (false, _) => z.tanh(),
                        (true, OutputActivation::Linear) => z,
                        (true, OutputActivation::Sigmoid) => T::one() / (T::one() + (-z).exp()),
                    }
                })
                .collect();
        }
        a[0]
    }

    pub fn value(&self, input: &[f64]) -> f64 {
        self.forward(&self.theta, input)
    }

    /// Evaluates `u` and the requested input derivatives at `input`
    /// (`[t]` or `[t, x]`), recording a tape for the reverse pass.
    pub fn eval(&self, theta: &[f64], input: &[f64], need: Need, tape: &mut Tape) -> PointEval {
        debug_assert_eq!(input.len(), self.input_dim());
        let mask = need.mask();
        tape.need = need;
        tape.inputs.resize(self.n_layers() + 1, Vec::new());
        tape.pre.resize(self.n_layers(), Vec::new());

        let n0 = self.sizes[0];
        let a0 = &mut tape.inputs[0];
        a0.clear();
        a0.resize(4 * n0, 0.0);
        a0[..n0].copy_from_slice(input);
        a0[n0] = 1.0; // ∂t/∂t
        if n0 > 1 {
            a0[2 * n0 + 1] = 1.0; // ∂x/∂x
        }

        let mut off = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &theta[off..off + n_in * n_out];
            let b = &theta[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;

            let (head, tail) = tape.inputs.split_at_mut(l + 1);
            let a = &head[l];
            let z = &mut tape.pre[l];
            z.clear();
            z.resize(4 * n_out, 0.0);
            for c in 0..4 {
                if !mask[c] {
                    continue;
                }
                let ac = &a[c * n_in..(c + 1) * n_in];
                for i in 0..n_out {
                    let row = &w[i * n_in..(i + 1) * n_in];
                    let mut s = if c == 0 { b[i] } else { 0.0 };
                    for j in 0..n_in {
                        s += row[j] * ac[j];
                    }
                    z[c * n_out + i] = s;
                }
            }

            let last = l + 1 == self.n_layers();
            let act = if last { self.output_act() } else { Act::Tanh };
            let out = &mut tail[0];
            out.clear();
            out.resize(4 * n_out, 0.0);
            for i in 0..n_out {
                let (y, d1, d2, _) = act.derivs(z[i]);
                out[i] = y;
                if mask[1] {
                    out[n_out + i] = d1 * z[n_out + i];
                }
                if mask[2] {
                    let zx = z[2 * n_out + i];
                    out[2 * n_out + i] = d1 * zx;
                    if mask[3] {
                        out[3 * n_out + i] = d1 * z[3 * n_out + i] + d2 * zx * zx;
                    }
                }
            }
            if last {
                return PointEval { u: out[0], ut: out[1], ux: out[2], uxx: out[3] };
            }
        }
        unreachable!("network has at least one layer")
    }

    /// Adds `Σ_c adj_c · ∂(channel c)/∂θ` to `grad`.
    pub fn backprop(&self, theta: &[f64], tape: &Tape, adj: &PointEval, grad: &mut [f64]) {
        let mask = tape.need.mask();
        let mut ybar: Vec<f64> = (0..4).map(|c| if mask[c] { adj.channel(c) } else { 0.0 }).collect();
        let mut zbar = Vec::new();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            let last = l + 1 == self.n_layers();
            let act = if last { self.output_act() } else { Act::Tanh };
            let z = &tape.pre[l];
            let a = &tape.inputs[l];

            zbar.clear();
            zbar.resize(4 * n_out, 0.0);
            for i in 0..n_out {
                let (_, d1, d2, d3) = act.derivs(z[i]);
                let mut zv = ybar[i] * d1;
                if mask[1] {
                    let zt = z[n_out + i];
                    zbar[n_out + i] = ybar[n_out + i] * d1;
                    zv += ybar[n_out + i] * d2 * zt;
                }
                if mask[2] {
                    let zx = z[2 * n_out + i];
                    let yx = ybar[2 * n_out + i];
                    let mut zxb = yx * d1;
                    zv += yx * d2 * zx;
                    if mask[3] {
                        let zxx = z[3 * n_out + i];
                        let yxx = ybar[3 * n_out + i];
                        zbar[3 * n_out + i] = yxx * d1;
                        zxb += yxx * d2 * 2.0 * zx;
                        zv += yxx * (d2 * zxx + d3 * zx * zx);
                    }
                    zbar[2 * n_out + i] = zxb;
                }
                zbar[i] = zv;
            }

            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for c in 0..4 {
                if !mask[c] {
                    continue;
                }
                let ac = &a[c * n_in..(c + 1) * n_in];
                for i in 0..n_out {
                    let zb = zbar[c * n_out + i];
                    if zb == 0.0 {
                        continue;
                    }
                    let row = &mut gw[i * n_in..(i + 1) * n_in];
                    for j in 0..n_in {
                        row[j] += zb * ac[j];
                    }
                }
            }
            for i in 0..n_out {
                gb[i] += zbar[i];
            }

            if l == 0 {
                break;
            }
            let w = &theta[off..off + n_in * n_out];
            ybar.clear();
            ybar.resize(4 * n_in, 0.0);
            for c in 0..4 {
                if !mask[c] {
                    continue;
                }
                for i in 0..n_out {
                    let zb = zbar[c * n_out + i];
                    let row = &w[i * n_in..(i + 1) * n_in];
                    let yb = &mut ybar[c * n_in..(c + 1) * n_in];
                    for j in 0..n_in {
                        yb[j] += row[j] * zb;
                    }
                }
            }
        }
    }

    fn output_act(&self) -> Act {
        match self.output {
            OutputActivation::Linear => Act::Identity,
            OutputActivation::Sigmoid => Act::Sigmoid,
        }
    }
}

pub fn xavier_bound(n_in: usize, n_out: usize) -> f64 {
    (6.0 / (n_in + n_out) as f64).sqrt()
}

#[derive(Clone, Copy)]
enum Act {
    Tanh,
    Identity,
    Sigmoid,
}

impl Act {
    /// Value and first three derivatives.
    #[inline]
    fn derivs(self, z: f64) -> (f64, f64, f64, f64) {
        match self {
            Act::Tanh => {
                let y = z.tanh();
                let d1 = 1.0 - y * y;
                (y, d1, -2.0 * y * d1, -2.0 * d1 * d1 + 4.0 * y * y * d1)
            }
            Act::Identity => (z, 1.0, 0.0, 0.0),
            Act::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                let d1 = s * (1.0 - s);
                let d2 = d1 * (1.0 - 2.0 * s);
                (s, d1, d2, d2 * (1.0 - 2.0 * s) - 2.0 * d1 * d1)
            }
        }
    }
}
