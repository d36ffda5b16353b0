//! Feed-forward networks with hand-derived reverse-mode gradients and an
//! Adam-style moment-based update.
//!
//! Weights are stored `(inputs, outputs)` so a batch `X` of shape
//! `(examples, inputs)` maps to `X·W + b`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputActivation {
    Linear,
    /// `scale * tanh(z)`.
    TanhScaled(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub hidden: Activation,
    pub output: OutputActivation,
}

/// Gradient with the same layout as [`NetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Intermediate values of a batched forward pass, consumed by
/// [`NetParams::backward_batch`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (`inputs[0]` is the network input).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl NetParams {
    /// Uniform `±1/sqrt(fan_in)` initialisation.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: OutputActivation,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let k = 1.0 / (w[0] as f64).sqrt();
            weights.push(Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-k..k)));
            biases.push(Array1::from_shape_fn(w[1], |_| rng.random_range(-k..k)));
        }
        NetParams {
            sizes: sizes.to_vec(),
            weights,
            biases,
            hidden,
            output,
        }
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: OutputActivation) -> Self {
        let weights = sizes.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect();
        let biases = sizes.windows(2).map(|w| Array1::zeros(w[1])).collect();
        NetParams {
            sizes: sizes.to_vec(),
            weights,
            biases,
            hidden,
            output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Scales the last layer, used to start policies near the centre of
    /// their output range.
    pub fn scale_last_layer(&mut self, factor: f64) {
        let l = self.num_layers() - 1;
        self.weights[l] *= factor;
        self.biases[l] *= factor;
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ApproxError> {
        let xb = Array2::from_shape_vec((1, x.len()), x.to_vec())
            .map_err(|e| ApproxError::ShapeMismatch(e.to_string()))?;
        Ok(self.forward_batch(&xb)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>, ApproxError> {
        self.check_input(x)?;
        let last = self.num_layers() - 1;
        let mut h = x.dot(&self.weights[0]) + &self.biases[0];
        for l in 0..=last {
            if l > 0 {
                h = h.dot(&self.weights[l]) + &self.biases[l];
            }
            if l < last {
                self.apply_hidden(&mut h);
            } else {
                self.apply_output(&mut h);
            }
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: Array2<f64>) -> Result<ForwardCache, ApproxError> {
        self.check_input(&x)?;
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(last + 1);
        let mut pre = Vec::with_capacity(last + 1);
        let mut h = x;
        for l in 0..=last {
            let z = h.dot(&self.weights[l]) + &self.biases[l];
            inputs.push(h);
            let mut a = z.clone();
            if l < last {
                self.apply_hidden(&mut a);
            } else {
                self.apply_output(&mut a);
            }
            pre.push(z);
            h = a;
        }
        Ok(ForwardCache {
            inputs,
            pre,
            output: h,
        })
    }

    /// Gradient of `upstream · forward(x)` with respect to every parameter.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients, ApproxError> {
        let xb = Array2::from_shape_vec((1, x.len()), x.to_vec())
            .map_err(|e| ApproxError::ShapeMismatch(e.to_string()))?;
        let ub = Array2::from_shape_vec((1, upstream.len()), upstream.to_vec())
            .map_err(|e| ApproxError::ShapeMismatch(e.to_string()))?;
        let cache = self.forward_cached(xb)?;
        Ok(self.backward_batch(&cache, &ub)?.0)
    }

    /// Reverse pass over a cached batch. `upstream` holds `dL/d output` per
    /// example; parameter gradients are summed over the batch. Also returns
    /// `dL/d input` per example.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
    ) -> Result<(Gradients, Array2<f64>), ApproxError> {
        if upstream.dim() != cache.output.dim() {
            return Err(ApproxError::ShapeMismatch(format!(
                "upstream {:?} vs output {:?}",
                upstream.dim(),
                cache.output.dim()
            )));
        }
        let last = self.num_layers() - 1;
        let mut gw = vec![Array2::zeros((0, 0)); last + 1];
        let mut gb = vec![Array1::zeros(0); last + 1];
        // delta = dL/dz for the current layer.
        let mut delta = upstream.clone();
        match self.output {
            OutputActivation::Linear => {}
            OutputActivation::TanhScaled(s) => {
                delta.zip_mut_with(&cache.pre[last], |d, &z| {
                    let t = z.tanh();
                    *d *= s * (1.0 - t * t);
                });
            }
        }
        for l in (0..=last).rev() {
            gw[l] = cache.inputs[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            let mut din = delta.dot(&self.weights[l].t());
            if l > 0 {
                match self.hidden {
                    Activation::Relu => din.zip_mut_with(&cache.pre[l - 1], |d, &z| {
                        if z <= 0.0 {
                            *d = 0.0;
                        }
                    }),
                    Activation::Tanh => din.zip_mut_with(&cache.pre[l - 1], |d, &z| {
                        let t = z.tanh();
                        *d *= 1.0 - t * t;
                    }),
                }
            }
            delta = din;
        }
        Ok((
            Gradients {
                weights: gw,
                biases: gb,
            },
            delta,
        ))
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<(), ApproxError> {
        if x.ncols() != self.input_dim() {
            return Err(ApproxError::ShapeMismatch(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn apply_hidden(&self, h: &mut Array2<f64>) {
        match self.hidden {
            Activation::Relu => h.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => h.mapv_inplace(f64::tanh),
        }
    }

    fn apply_output(&self, h: &mut Array2<f64>) {
        if let OutputActivation::TanhScaled(s) = self.output {
            h.mapv_inplace(|v| s * v.tanh());
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// All parameters, layer by layer: weights row-major, then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<(), ApproxError> {
        if v.len() != self.num_params() {
            return Err(ApproxError::ShapeMismatch(format!(
                "{} values for {} parameters",
                v.len(),
                self.num_params()
            )));
        }
        let mut it = v.iter();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|p| *p = *it.next().unwrap());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(all_finite) && self.biases.iter().all(all_finite)
    }

    pub fn max_abs_diff(&self, other: &NetParams) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checkpoint text: header, layer shapes, then one line of row-major
    /// weights followed by one line of biases per layer.
    pub fn to_text(&self) -> String {
        let mut s = String::from("nonmono-net v1\n");
        let hidden = match self.hidden {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        };
        let _ = writeln!(s, "hidden {hidden}");
        match self.output {
            OutputActivation::Linear => s.push_str("output linear\n"),
            OutputActivation::TanhScaled(k) => {
                let _ = writeln!(s, "output tanh {k}");
            }
        }
        let sizes: Vec<String> = self.sizes.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "sizes {}", sizes.join(" "));
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let line: Vec<String> = w.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
            let line: Vec<String> = b.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<NetParams, ApproxError> {
        let fmt = |m: &str| ApproxError::Format(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some("nonmono-net v1") {
            return Err(fmt("missing header"));
        }
        let hidden = match lines.next() {
            Some("hidden relu") => Activation::Relu,
            Some("hidden tanh") => Activation::Tanh,
            _ => return Err(fmt("bad hidden activation")),
        };
        let output = match lines.next().map(|l| l.split_whitespace().collect::<Vec<_>>()) {
            Some(t) if t == ["output", "linear"] => OutputActivation::Linear,
            Some(t) if t.len() == 3 && t[0] == "output" && t[1] == "tanh" => {
                OutputActivation::TanhScaled(t[2].parse().map_err(|_| fmt("bad output scale"))?)
            }
            _ => return Err(fmt("bad output activation")),
        };
        let sizes: Vec<usize> = match lines.next().and_then(|l| l.strip_prefix("sizes ")) {
            Some(rest) => rest
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| fmt("bad size")))
                .collect::<Result<_, _>>()?,
            None => return Err(fmt("missing sizes")),
        };
        if sizes.len() < 2 {
            return Err(fmt("need at least two sizes"));
        }
        let mut p = NetParams::zeros(&sizes, hidden, output);
        let parse_line = |l: Option<&str>, n: usize| -> Result<Vec<f64>, ApproxError> {
            let v: Vec<f64> = l
                .ok_or_else(|| fmt("truncated"))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| fmt("bad value")))
                .collect::<Result<_, _>>()?;
            if v.len() != n {
                return Err(fmt("wrong value count"));
            }
            Ok(v)
        };
        for l in 0..p.num_layers() {
            let shape = p.weights[l].dim();
            let w = parse_line(lines.next(), shape.0 * shape.1)?;
            p.weights[l] = Array2::from_shape_vec(shape, w).map_err(|e| fmt(&e.to_string()))?;
            let b = parse_line(lines.next(), shape.1)?;
            p.biases[l] = Array1::from_vec(b);
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), ApproxError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<NetParams, ApproxError> {
        NetParams::from_text(&std::fs::read_to_string(path)?)
    }
}

impl Gradients {
    pub fn zeros_like(p: &NetParams) -> Self {
        Gradients {
            weights: p.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: p.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.weights.iter_mut().for_each(|w| *w *= k);
        self.biases.iter_mut().for_each(|b| *b *= k);
    }

    pub fn norm(&self) -> f64 {
        let ss: f64 = self.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
            + self.biases.iter().map(|b| b.iter().map(|v| v * v).sum::<f64>()).sum::<f64>();
        ss.sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm && n.is_finite() {
            self.scale(max_norm / n);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(all_finite) && self.biases.iter().all(all_finite)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v
    }
}

/// First and second moment estimates for an Adam update.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    m: Gradients,
    v: Gradients,
    pub t: u64,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimState {
    pub fn new(p: &NetParams, step_size: f64) -> Self {
        OptimState {
            m: Gradients::zeros_like(p),
            v: Gradients::zeros_like(p),
            t: 0,
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

fn all_finite<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> bool {
    match a.as_slice_memory_order() {
        // Any NaN or infinity turns the product into NaN.
        Some(xs) => xs.iter().fold(0.0, |acc, &v| acc + v * 0.0) == 0.0,
        None => a.iter().all(|v| v.is_finite()),
    }
}

/// One bias-corrected Adam step in the descent direction of `grad`.
pub fn opt_step(p: &mut NetParams, o: &mut OptimState, grad: &Gradients) -> Result<(), ApproxError> {
    if grad.weights.len() != p.weights.len()
        || grad.weights.iter().zip(&p.weights).any(|(g, w)| g.dim() != w.dim())
        || grad.biases.iter().zip(&p.biases).any(|(g, b)| g.len() != b.len())
    {
        return Err(ApproxError::ShapeMismatch("gradient layout differs from parameters".into()));
    }
    if !grad.is_finite() {
        return Err(ApproxError::NonFiniteGradient);
    }
    o.t += 1;
    let (b1, b2, eps) = (o.beta1, o.beta2, o.eps);
    let c1 = 1.0 - b1.powi(o.t as i32);
    let c2 = 1.0 - b2.powi(o.t as i32);
    let lr = o.step_size;
    let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mh = *m / c1;
        let vh = *v / c2;
        *param -= lr * mh / (vh.sqrt() + eps);
    };
    for l in 0..p.weights.len() {
        ndarray::Zip::from(&mut p.weights[l])
            .and(&grad.weights[l])
            .and(&mut o.m.weights[l])
            .and(&mut o.v.weights[l])
            .for_each(|w, &g, m, v| update(w, g, m, v));
        ndarray::Zip::from(&mut p.biases[l])
            .and(&grad.biases[l])
            .and(&mut o.m.biases[l])
            .and(&mut o.v.biases[l])
            .for_each(|w, &g, m, v| update(w, g, m, v));
    }
    Ok(())
}

/// `target <- tau * live + (1 - tau) * target`, elementwise.
pub fn soft_update(target: &mut NetParams, live: &NetParams, tau: f64) {
    for (t, l) in target.weights.iter_mut().zip(&live.weights) {
        t.zip_mut_with(l, |a, &b| *a = tau * b + (1.0 - tau) * *a);
    }
    for (t, l) in target.biases.iter_mut().zip(&live.biases) {
        t.zip_mut_with(l, |a, &b| *a = tau * b + (1.0 - tau) * *a);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent forward pass with explicit loops.
    fn oracle_forward(p: &NetParams, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let last = p.num_layers() - 1;
        for l in 0..=last {
            let (nin, nout) = p.weights[l].dim();
            let mut z = vec![0.0; nout];
            for j in 0..nout {
                let mut acc = p.biases[l][j];
                for i in 0..nin {
                    acc += h[i] * p.weights[l][[i, j]];
                }
                z[j] = acc;
            }
            h = z
                .into_iter()
                .map(|v| {
                    if l < last {
                        match p.hidden {
                            Activation::Relu => v.max(0.0),
                            Activation::Tanh => v.tanh(),
                        }
                    } else {
                        match p.output {
                            OutputActivation::Linear => v,
                            OutputActivation::TanhScaled(s) => s * v.tanh(),
                        }
                    }
                })
                .collect();
        }
        h
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Max relative error of backward against central differences of
    /// `upstream · forward`.
    fn fd_error(p: &NetParams, x: &[f64], up: &[f64]) -> f64 {
        let h = 1e-5;
        let g = p.backward(x, up).unwrap().to_flat();
        let base = p.to_flat();
        let mut q = p.clone();
        let mut worst: f64 = 0.0;
        for i in 0..base.len() {
            let mut v = base.clone();
            v[i] += h;
            q.set_flat(&v).unwrap();
            let fp = dot(&oracle_forward(&q, x), up);
            v[i] -= 2.0 * h;
            q.set_flat(&v).unwrap();
            let fm = dot(&oracle_forward(&q, x), up);
            let num = (fp - fm) / (2.0 * h);
            let err = (num - g[i]).abs() / (num.abs().max(g[i].abs()).max(1e-3));
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn zero_net_gives_zero() {
        let p = NetParams::zeros(&[3, 4, 2], Activation::Relu, OutputActivation::Linear);
        assert_eq!(p.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer() {
        let mut p = NetParams::zeros(&[3, 3], Activation::Relu, OutputActivation::Linear);
        p.weights[0] = Array2::eye(3);
        let x = [0.5, -1.5, 2.0];
        assert_eq!(p.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (hidden, output) in [
            (Activation::Relu, OutputActivation::Linear),
            (Activation::Tanh, OutputActivation::TanhScaled(2.5)),
        ] {
            let p = NetParams::new(&[4, 7, 5, 3], hidden, output, &mut rng);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = p.forward(&x).unwrap();
            let b = oracle_forward(&p, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_mismatch_reported() {
        let p = NetParams::zeros(&[3, 2], Activation::Relu, OutputActivation::Linear);
        assert!(matches!(p.forward(&[1.0]), Err(ApproxError::ShapeMismatch(_))));
        assert!(matches!(
            p.backward(&[1.0, 2.0, 3.0], &[1.0]),
            Err(ApproxError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = NetParams::new(&[3, 6, 2], Activation::Tanh, OutputActivation::Linear, &mut rng);
        let g = p.backward(&[0.3, 0.1, -0.7], &[0.0, 0.0]).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_linear_in_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = NetParams::new(&[3, 6, 6, 2], Activation::Relu, OutputActivation::TanhScaled(1.5), &mut rng);
        let x = [0.3, 0.1, -0.7];
        let (a, b) = ([0.4, -1.0], [2.0, 0.5]);
        let ga = p.backward(&x, &a).unwrap().to_flat();
        let gb = p.backward(&x, &b).unwrap().to_flat();
        let gab = p.backward(&x, &[a[0] + b[0], a[1] + b[1]]).unwrap().to_flat();
        for i in 0..ga.len() {
            assert!((ga[i] + gb[i] - gab[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn input_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = NetParams::new(&[4, 8, 1], Activation::Tanh, OutputActivation::Linear, &mut rng);
        let x = vec![0.2, -0.4, 0.9, 0.1];
        let cache = p.forward_cached(Array2::from_shape_vec((1, 4), x.clone()).unwrap()).unwrap();
        let (_, dx) = p.backward_batch(&cache, &Array2::ones((1, 1))).unwrap();
        for i in 0..4 {
            let mut xp = x.clone();
            xp[i] += 1e-6;
            let mut xm = x.clone();
            xm[i] -= 1e-6;
            let num = (p.forward(&xp).unwrap()[0] - p.forward(&xm).unwrap()[0]) / 2e-6;
            assert!((num - dx[[0, i]]).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = NetParams::new(&[2, 4, 1], Activation::Relu, OutputActivation::Linear, &mut rng);
        let before = p.clone();
        let mut o = OptimState::new(&p, 1e-2);
        let g = Gradients::zeros_like(&p);
        for _ in 0..5 {
            opt_step(&mut p, &mut o, &g).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_descends() {
        let mut p = NetParams::zeros(&[1, 1], Activation::Relu, OutputActivation::Linear);
        let mut o = OptimState::new(&p, 1e-2);
        let mut g = Gradients::zeros_like(&p);
        g.weights[0][[0, 0]] = 3.0;
        g.biases[0][0] = -0.5;
        for _ in 0..50 {
            opt_step(&mut p, &mut o, &g).unwrap();
        }
        assert!(p.weights[0][[0, 0]] < 0.0);
        assert!(p.biases[0][0] > 0.0);
    }

    #[test]
    fn quadratic_bowl_minimised() {
        // f(w) = ||w||^2 over all parameters of a small net; grad = 2w.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut p = NetParams::new(&[3, 4, 2], Activation::Relu, OutputActivation::Linear, &mut rng);
        let mut o = OptimState::new(&p, 1e-2);
        for _ in 0..2000 {
            let mut g = Gradients::zeros_like(&p);
            for (gw, w) in g.weights.iter_mut().zip(&p.weights) {
                *gw = w * 2.0;
            }
            for (gb, b) in g.biases.iter_mut().zip(&p.biases) {
                *gb = b * 2.0;
            }
            opt_step(&mut p, &mut o, &g).unwrap();
        }
        let norm = p.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "norm {norm}");
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = NetParams::zeros(&[1, 1], Activation::Relu, OutputActivation::Linear);
        let mut o = OptimState::new(&p, 1e-2);
        let mut g = Gradients::zeros_like(&p);
        g.biases[0][0] = f64::NAN;
        assert!(matches!(opt_step(&mut p, &mut o, &g), Err(ApproxError::NonFiniteGradient)));
    }

    #[test]
    fn soft_update_is_exact_blend() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let live = NetParams::new(&[2, 3, 1], Activation::Relu, OutputActivation::Linear, &mut rng);
        let mut target = NetParams::new(&[2, 3, 1], Activation::Relu, OutputActivation::Linear, &mut rng);
        let before = target.to_flat();
        soft_update(&mut target, &live, 0.005);
        for ((t, b), l) in target.to_flat().iter().zip(&before).zip(live.to_flat()) {
            assert_eq!(*t, 0.005 * l + (1.0 - 0.005) * b);
        }
    }

    #[test]
    fn checkpoint_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = NetParams::new(&[3, 5, 2], Activation::Tanh, OutputActivation::TanhScaled(10.0), &mut rng);
        let q = NetParams::from_text(&p.to_text()).unwrap();
        assert_eq!(p, q);
        assert!(NetParams::from_text("garbage").is_err());
    }

    fn activations() -> impl Strategy<Value = (Activation, OutputActivation)> {
        prop_oneof![
            Just((Activation::Relu, OutputActivation::Linear)),
            Just((Activation::Relu, OutputActivation::TanhScaled(2.0))),
            Just((Activation::Tanh, OutputActivation::Linear)),
            Just((Activation::Tanh, OutputActivation::TanhScaled(0.7))),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn gradient_matches_finite_differences(
            acts in activations(),
            hidden in proptest::collection::vec(1usize..6, 0..=3),
            nin in 1usize..5,
            nout in 1usize..4,
            seed in 0u64..10_000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sizes = vec![nin];
            sizes.extend(&hidden);
            sizes.push(nout);
            let p = NetParams::new(&sizes, acts.0, acts.1, &mut rng);
            let x: Vec<f64> = (0..nin).map(|_| rng.random_range(-1.5..1.5)).collect();
            let up: Vec<f64> = (0..nout).map(|_| rng.random_range(-1.0..1.0)).collect();
            let before = p.clone();
            prop_assert!(fd_error(&p, &x, &up) < 1e-4);
            prop_assert_eq!(p, before);
        }
    }
}
