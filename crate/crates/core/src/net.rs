//! Fully connected network `u(x, y, t)` with tanh hidden layers.
//!
//! Evaluation is batched: each layer is one matrix product over all points.
//! Two passes are available. The value pass traces activations for reverse-mode
//! parameter gradients. The jet pass additionally carries the input derivatives
//! `∂x, ∂y, ∂t, ∂xx, ∂yy` forward through the layers so a strong-form residual
//! can be formed analytically and then differentiated with respect to the
//! parameters.

use ndarray::{Array1, Array2, Axis as NdAxis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    seed: u64,
    /// Multiplies `t` before it enters the first layer.
    time_scale: f64,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Gradient buffers with the same shapes as the owning network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            biases: mlp
                .biases
                .iter()
                .map(|b| Array1::zeros(b.raw_dim()))
                .collect(),
        }
    }

    /// Flat view in checkpoint order (per layer: weights row-major, then bias).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }
}

/// Activations recorded by [`Mlp::trace`].
#[derive(Debug, Clone)]
pub struct ValueTape {
    /// `acts[0]` is the scaled input; `acts[l + 1]` is the output of layer `l`.
    acts: Vec<Array2<f64>>,
}

impl ValueTape {
    pub fn output(&self) -> Vec<f64> {
        self.acts.last().unwrap().column(0).to_vec()
    }
}

/// Network value with its first and second input derivatives at each point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Jets {
    pub value: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dt: Vec<f64>,
    pub dxx: Vec<f64>,
    pub dyy: Vec<f64>,
}

/// Per-point cotangents on each jet component.
#[derive(Debug, Clone, PartialEq)]
pub struct JetCotangents {
    pub value: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dt: Vec<f64>,
    pub dxx: Vec<f64>,
    pub dyy: Vec<f64>,
}

impl JetCotangents {
    pub fn zeros(n: usize) -> Self {
        Self {
            value: vec![0.0; n],
            dx: vec![0.0; n],
            dy: vec![0.0; n],
            dt: vec![0.0; n],
            dxx: vec![0.0; n],
            dyy: vec![0.0; n],
        }
    }

    fn len(&self) -> usize {
        self.value.len()
    }

    fn channels(&self) -> [&Vec<f64>; 6] {
        [
            &self.value,
            &self.dx,
            &self.dy,
            &self.dt,
            &self.dxx,
            &self.dyy,
        ]
    }
}

// Channel layout inside the jet tape.
const V: usize = 0;
const DX: usize = 1;
const DY: usize = 2;
const DT: usize = 3;
const DXX: usize = 4;
const DYY: usize = 5;
const CHANNELS: usize = 6;

/// Pre-activations of every layer for all six jet channels.
#[derive(Debug, Clone)]
pub struct JetTape {
    /// `pre[l][c]` is channel `c` of layer `l` before the activation.
    pre: Vec<[Array2<f64>; CHANNELS]>,
    /// `post[0]` is the input jet; `post[l + 1]` is the output of layer `l`.
    post: Vec<[Array2<f64>; CHANNELS]>,
}

impl JetTape {
    pub fn jets(&self) -> Jets {
        let out = self.post.last().unwrap();
        let col = |c: usize| out[c].column(0).to_vec();
        Jets {
            value: col(V),
            dx: col(DX),
            dy: col(DY),
            dt: col(DT),
            dxx: col(DXX),
            dyy: col(DYY),
        }
    }
}

impl Mlp {
    /// Uniform `±1/√fan_in` weights and zero biases, reproducible from `seed`.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        validate_layers(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.gen_range(-bound..bound)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            seed,
            time_scale: 1.0,
            weights,
            biases,
        })
    }

    /// Feed `t / t_final` instead of `t` to the first layer.
    pub fn with_final_time(mut self, t_final: f64) -> Self {
        self.time_scale = 1.0 / t_final;
        self
    }

    /// Multiplier applied to the `t` input before the first layer.
    pub fn with_time_scale(mut self, scale: f64) -> Self {
        self.time_scale = scale;
        self
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|p| p[0] * p[1] + p[1])
            .sum()
    }

    /// Parameters in checkpoint order (per layer: weights row-major, then bias).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    /// Overwrite every parameter from a flat vector in checkpoint order.
    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|x| *x = it.next().unwrap());
            b.iter_mut().for_each(|x| *x = it.next().unwrap());
        }
        Ok(())
    }

    fn input_matrix(&self, points: &[[f64; 3]]) -> Array2<f64> {
        Array2::from_shape_fn((points.len(), 3), |(p, c)| {
            if c == 2 {
                points[p][2] * self.time_scale
            } else {
                points[p][c]
            }
        })
    }

    fn is_hidden(&self, layer: usize) -> bool {
        layer + 1 < self.weights.len()
    }

    pub fn forward(&self, points: &[[f64; 3]]) -> Vec<f64> {
        self.trace(points).output()
    }

    pub fn trace(&self, points: &[[f64; 3]]) -> ValueTape {
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(self.input_matrix(points));
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(&w.t());
            z += b;
            if self.is_hidden(l) {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        ValueTape { acts }
    }

    /// Gradient of `Σ_p cotangents[p] · u(points[p])` with respect to all parameters.
    pub fn backward_params(&self, points: &[[f64; 3]], cotangents: &[f64]) -> Result<ParamGrads> {
        if cotangents.len() != points.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} cotangents for {} points",
                cotangents.len(),
                points.len()
            )));
        }
        let tape = self.trace(points);
        Ok(self.backward_tape(&tape, cotangents))
    }

    pub fn backward_tape(&self, tape: &ValueTape, cotangents: &[f64]) -> ParamGrads {
        let n_layers = self.weights.len();
        let mut grads = ParamGrads::zeros_like(self);
        let mut delta = Array2::from_shape_fn((cotangents.len(), 1), |(p, _)| cotangents[p]);
        for l in (0..n_layers).rev() {
            let a_in = &tape.acts[l];
            grads.weights[l] = delta.t().dot(a_in);
            grads.biases[l] = delta.sum_axis(NdAxis(0));
            if l == 0 {
                break;
            }
            let mut back = delta.dot(&self.weights[l]);
            // a_in = tanh(z) for every layer below the output.
            Zip::from(&mut back)
                .and(a_in)
                .for_each(|d, &h| *d *= 1.0 - h * h);
            delta = back;
        }
        grads
    }

    pub fn forward_jets(&self, points: &[[f64; 3]]) -> Jets {
        self.trace_jets(points).jets()
    }

    pub fn trace_jets(&self, points: &[[f64; 3]]) -> JetTape {
        let n = points.len();
        let x = self.input_matrix(points);
        let unit = |c: usize, s: f64| {
            let mut m = Array2::zeros((n, 3));
            m.column_mut(c).fill(s);
            m
        };
        let input = [
            x,
            unit(0, 1.0),
            unit(1, 1.0),
            unit(2, self.time_scale),
            Array2::zeros((n, 3)),
            Array2::zeros((n, 3)),
        ];
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut post = Vec::with_capacity(self.weights.len() + 1);
        post.push(input);
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let a = &post[l];
            let wt = w.t();
            let mut z: [Array2<f64>; CHANNELS] = std::array::from_fn(|c| a[c].dot(&wt));
            z[V] += b;
            let next = if self.is_hidden(l) {
                tanh_jet(&z)
            } else {
                z.clone()
            };
            pre.push(z);
            post.push(next);
        }
        JetTape { pre, post }
    }

    /// Reverse pass through the jet computation for cotangents on each output component.
    pub fn backward_jets(&self, tape: &JetTape, cot: &JetCotangents) -> Result<ParamGrads> {
        let n = tape.post[0][V].nrows();
        if cot.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} jet cotangents for {} points",
                cot.len(),
                n
            )));
        }
        let n_layers = self.weights.len();
        let mut grads = ParamGrads::zeros_like(self);
        // Cotangents on the pre-activations of the current layer.
        let mut zbar: [Array2<f64>; CHANNELS] = std::array::from_fn(|c| {
            let src = cot.channels()[c];
            Array2::from_shape_fn((n, 1), |(p, _)| src[p])
        });
        for l in (0..n_layers).rev() {
            let a_in = &tape.post[l];
            let w = &self.weights[l];
            let mut gw = Array2::zeros(w.raw_dim());
            for c in 0..CHANNELS {
                gw += &zbar[c].t().dot(&a_in[c]);
            }
            grads.weights[l] = gw;
            grads.biases[l] = zbar[V].sum_axis(NdAxis(0));
            if l == 0 {
                break;
            }
            let abar: [Array2<f64>; CHANNELS] = std::array::from_fn(|c| zbar[c].dot(w));
            zbar = tanh_jet_adjoint(&tape.pre[l - 1], &a_in[V], &abar);
        }
        Ok(grads)
    }
}

fn validate_layers(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(
            "layer_sizes needs at least an input and an output layer".into(),
        ));
    }
    if layer_sizes[0] != 3 {
        return Err(Error::Config(format!(
            "first layer size must be 3 (x, y, t), got {}",
            layer_sizes[0]
        )));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::Config(format!(
            "last layer size must be 1, got {}",
            layer_sizes.last().unwrap()
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config("layer sizes must be positive".into()));
    }
    Ok(())
}

/// Push a jet through `tanh`: first-order channels scale by `h'`, second-order
/// channels pick up `h''·(∂z)²`.
fn tanh_jet(z: &[Array2<f64>; CHANNELS]) -> [Array2<f64>; CHANNELS] {
    let h = z[V].mapv(f64::tanh);
    let h1 = h.mapv(|h| 1.0 - h * h);
    let h2 = Zip::from(&h).and(&h1).map_collect(|&h, &d| -2.0 * h * d);
    let first = |c: usize| &z[c] * &h1;
    let second = |c2: usize, c1: usize| {
        Zip::from(&z[c2])
            .and(&z[c1])
            .and(&h1)
            .and(&h2)
            .map_collect(|&zz, &zd, &d1, &d2| d2 * zd * zd + d1 * zz)
    };
    [
        h.clone(),
        first(DX),
        first(DY),
        first(DT),
        second(DXX, DX),
        second(DYY, DY),
    ]
}

/// Transpose of the linearization of [`tanh_jet`].
fn tanh_jet_adjoint(
    z: &[Array2<f64>; CHANNELS],
    h: &Array2<f64>,
    abar: &[Array2<f64>; CHANNELS],
) -> [Array2<f64>; CHANNELS] {
    let shape = h.raw_dim();
    let mut out: [Array2<f64>; CHANNELS] = std::array::from_fn(|_| Array2::zeros(shape));
    let (n, m) = (shape[0], shape[1]);
    for p in 0..n {
        for q in 0..m {
            let hv = h[[p, q]];
            let d1 = 1.0 - hv * hv;
            let d2 = -2.0 * hv * d1;
            let d3 = -2.0 * d1 * d1 + 4.0 * hv * hv * d1;
            let mut zv = abar[V][[p, q]] * d1;
            for c in [DX, DY, DT] {
                let zc = z[c][[p, q]];
                out[c][[p, q]] = abar[c][[p, q]] * d1;
                zv += abar[c][[p, q]] * zc * d2;
            }
            for (c2, c1) in [(DXX, DX), (DYY, DY)] {
                let zd = z[c1][[p, q]];
                let zz = z[c2][[p, q]];
                let ab = abar[c2][[p, q]];
                out[c2][[p, q]] = ab * d1;
                out[c1][[p, q]] += ab * 2.0 * d2 * zd;
                zv += ab * (d3 * zd * zd + d2 * zz);
            }
            out[V][[p, q]] = zv;
        }
    }
    out
}

/// Worst relative error between [`Mlp::backward_params`] and central finite
/// differences (step `1e-6`) of `Σ cot·u` over every parameter.
pub fn grad_check(mlp: &Mlp, points: &[[f64; 3]], cotangents: &[f64]) -> Result<f64> {
    let analytic = mlp.backward_params(points, cotangents)?.flatten();
    let objective = |m: &Mlp| -> f64 {
        m.forward(points)
            .iter()
            .zip(cotangents)
            .map(|(u, c)| u * c)
            .sum()
    };
    Ok(finite_difference_error(mlp, &analytic, objective))
}

/// Compare a flat analytic gradient with central differences of `objective`.
pub fn finite_difference_error(
    mlp: &Mlp,
    analytic: &[f64],
    objective: impl Fn(&Mlp) -> f64,
) -> f64 {
    const STEP: f64 = 1e-6;
    let base = mlp.flatten();
    let mut probe = mlp.clone();
    let mut worst: f64 = 0.0;
    for (idx, &g) in analytic.iter().enumerate() {
        let mut theta = base.clone();
        theta[idx] = base[idx] + STEP;
        probe.assign(&theta).unwrap();
        let plus = objective(&probe);
        theta[idx] = base[idx] - STEP;
        probe.assign(&theta).unwrap();
        let minus = objective(&probe);
        let fd = (plus - minus) / (2.0 * STEP);
        worst = worst.max(relative_error(g, fd));
    }
    worst
}

pub(crate) fn relative_error(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / a.abs().max(b.abs()).max(1e-7)
}
