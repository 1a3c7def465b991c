//! Fully connected regressor: ReLU hidden layers, a linear scalar output and
//! Adam training on [`LossKind`] objectives.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use super::loss::{loss, LossKind};
use super::PredictorConfig;
use crate::error::{Error, Result};
use crate::rng::seeded;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

const CHECKPOINT_MAGIC: &str = "bananas-mlp v1";

/// Network weights in one flat buffer. Layer `l` maps `dims[l]` inputs to
/// `dims[l + 1]` outputs and stores its row-major weight matrix followed by
/// its bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Per-sample activations reused across a training pass.
struct Trace {
    /// `acts[0]` is the input, `acts[l]` the post-activation output of layer `l-1`.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    nonzero: Vec<usize>,
}

impl Trace {
    fn new(dims: &[usize]) -> Self {
        Self {
            acts: dims.iter().map(|&d| vec![0.0; d]).collect(),
            deltas: dims.iter().map(|&d| vec![0.0; d]).collect(),
            nonzero: Vec::with_capacity(dims[0]),
        }
    }
}

impl Network {
    /// `n_hidden` ReLU layers of `width` units on top of `input_dim` inputs,
    /// initialized fan-in-scaled uniform (He) with zero biases.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, n_hidden: usize, width: usize, rng: &mut R) -> Self {
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat_n(width, n_hidden));
        dims.push(1);
        let n_params = Self::param_count(&dims);
        let mut params = Vec::with_capacity(n_params);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = (6.0 / fan_in.max(1) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self { dims, params }
    }

    fn param_count(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.dims.len());
        let mut o = 0;
        offsets.push(0);
        for w in self.dims.windows(2) {
            o += w[0] * w[1] + w[1];
            offsets.push(o);
        }
        offsets
    }

    fn forward_trace(&self, x: &[f64], offsets: &[usize], trace: &mut Trace) -> f64 {
        let last = self.dims.len() - 2;
        trace.acts[0].copy_from_slice(x);
        trace.nonzero.clear();
        trace
            .nonzero
            .extend(x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i));

        for l in 0..=last {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[offsets[l]..offsets[l] + n_in * n_out];
            let b = &self.params[offsets[l] + n_in * n_out..offsets[l + 1]];
            let (head, tail) = trace.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut z = b[o];
                if l == 0 {
                    for &i in &trace.nonzero {
                        z += row[i] * input[i];
                    }
                } else {
                    z += row.iter().zip(input.iter()).map(|(a, b)| a * b).sum::<f64>();
                }
                out[o] = if l == last { z } else { z.max(0.0) };
            }
        }
        trace.acts[last + 1][0]
    }

    /// Accumulates `scale * d(output)/d(params)` into `grad` using the trace
    /// of the last forward pass.
    fn backward(&self, scale: f64, offsets: &[usize], trace: &mut Trace, grad: &mut [f64]) {
        let last = self.dims.len() - 2;
        trace.deltas[last + 1][0] = scale;
        for l in (0..=last).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w_off = offsets[l];
            let b_off = w_off + n_in * n_out;
            let (dh, dt) = trace.deltas.split_at_mut(l + 1);
            let delta_out = &dt[0];
            let input = &trace.acts[l];
            for o in 0..n_out {
                let d = delta_out[o];
                if d == 0.0 {
                    continue;
                }
                grad[b_off + o] += d;
                let g_row = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
                if l == 0 {
                    for &i in &trace.nonzero {
                        g_row[i] += d * input[i];
                    }
                } else {
                    for (g, &a) in g_row.iter_mut().zip(input.iter()) {
                        *g += d * a;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let delta_in = &mut dh[l];
            delta_in.iter_mut().for_each(|v| *v = 0.0);
            let w = &self.params[w_off..b_off];
            for o in 0..n_out {
                let d = delta_out[o];
                if d == 0.0 {
                    continue;
                }
                let row = &w[o * n_in..(o + 1) * n_in];
                for (di, &wi) in delta_in.iter_mut().zip(row) {
                    *di += d * wi;
                }
            }
            // ReLU derivative
            for (di, &a) in delta_in.iter_mut().zip(input.iter()) {
                if a <= 0.0 {
                    *di = 0.0;
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let offsets = self.layer_offsets();
        let mut trace = Trace::new(&self.dims);
        self.forward_trace(x, &offsets, &mut trace)
    }

    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let offsets = self.layer_offsets();
        let mut trace = Trace::new(&self.dims);
        xs.iter()
            .map(|x| self.forward_trace(x, &offsets, &mut trace))
            .collect()
    }

    /// Loss over `(xs, ys)` and its gradient with respect to all parameters.
    pub fn loss_and_grad(
        &self,
        xs: &[&[f64]],
        ys: &[f64],
        kind: LossKind,
        y_lb: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let value = self.accumulate(xs, ys, kind, y_lb, &mut grad, &mut Vec::new())?;
        Ok((value, grad))
    }

    fn accumulate(
        &self,
        xs: &[&[f64]],
        ys: &[f64],
        kind: LossKind,
        y_lb: f64,
        grad: &mut [f64],
        traces: &mut Vec<Trace>,
    ) -> Result<f64> {
        let offsets = self.layer_offsets();
        while traces.len() < xs.len() {
            traces.push(Trace::new(&self.dims));
        }
        let mut preds = Vec::with_capacity(xs.len());
        for (x, t) in xs.iter().zip(traces.iter_mut()) {
            if x.len() != self.input_dim() {
                return Err(Error::Dimension {
                    expected: self.input_dim(),
                    got: x.len(),
                });
            }
            preds.push(self.forward_trace(x, &offsets, t));
        }
        let (value, dpred) = loss(kind, y_lb, &preds, ys)?;
        for (t, &d) in traces.iter_mut().zip(&dpred) {
            if d != 0.0 {
                self.backward(d, &offsets, t, grad);
            }
        }
        Ok(value)
    }

    /// Smallest |pre-activation| of any hidden unit over the given inputs;
    /// finite-difference checks should stay clear of these kinks.
    pub fn min_hidden_margin(&self, xs: &[&[f64]]) -> f64 {
        let offsets = self.layer_offsets();
        let last = self.dims.len() - 2;
        let mut margin = f64::INFINITY;
        for x in xs {
            let mut a = x.to_vec();
            for l in 0..=last {
                let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
                let w = &self.params[offsets[l]..offsets[l] + n_in * n_out];
                let b = &self.params[offsets[l] + n_in * n_out..offsets[l + 1]];
                let z: Vec<f64> = (0..n_out)
                    .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(&a).map(|(p, q)| p * q).sum::<f64>())
                    .collect();
                if l < last {
                    margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
                    a = z.into_iter().map(|v| v.max(0.0)).collect();
                }
            }
        }
        margin
    }

    /// Serializes to the versioned text checkpoint format.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        writeln!(out, "dims {}", dims.join(" ")).unwrap();
        let offsets = self.layer_offsets();
        for l in 0..self.dims.len() - 1 {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.params[offsets[l]..offsets[l] + n_in * n_out];
            for row in w.chunks(n_in.max(1)) {
                writeln!(out, "w {}", join_floats(row)).unwrap();
            }
            writeln!(out, "b {}", join_floats(&self.params[offsets[l] + n_in * n_out..offsets[l + 1]]))
                .unwrap();
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(CHECKPOINT_MAGIC) {
            return Err(bad("missing `bananas-mlp v1` header"));
        }
        let dims: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("dims "))
            .ok_or_else(|| bad("missing dims line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad dimension")))
            .collect::<Result<_>>()?;
        if dims.len() < 2 || *dims.last().unwrap() != 1 {
            return Err(bad("dims must end in a scalar output"));
        }
        let mut params = Vec::with_capacity(Self::param_count(&dims));
        for w in dims.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            for _ in 0..n_out {
                let row = parse_floats(lines.next(), "w ", n_in)?;
                params.extend(row);
            }
            params.extend(parse_floats(lines.next(), "b ", n_out)?);
        }
        if lines.next().is_some() {
            return Err(bad("trailing data"));
        }
        Ok(Self { dims, params })
    }
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

fn parse_floats(line: Option<&str>, prefix: &str, expected: usize) -> Result<Vec<f64>> {
    let body = line
        .and_then(|l| l.strip_prefix(prefix.trim_end()))
        .ok_or_else(|| Error::Checkpoint(format!("expected a `{}` line", prefix.trim())))?;
    let v: Vec<f64> = body
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Checkpoint(format!("bad number `{t}`"))))
        .collect::<Result<_>>()?;
    if v.len() != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} values, found {}",
            v.len()
        )));
    }
    Ok(v)
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// Trains one network. The seed fixes both the initialization and the
/// per-epoch shuffling of the training order.
pub fn train_member(xs: &[Vec<f64>], ys: &[f64], cfg: &PredictorConfig, seed: u64) -> Result<Network> {
    cfg.check()?;
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Dimension {
            expected: ys.len().max(1),
            got: xs.len(),
        });
    }
    let input_dim = xs[0].len();
    if let Some(bad) = xs.iter().find(|x| x.len() != input_dim) {
        return Err(Error::Dimension {
            expected: input_dim,
            got: bad.len(),
        });
    }
    if cfg.loss == LossKind::Mape {
        if let Some(&t) = ys.iter().find(|&&t| t <= cfg.y_lb) {
            return Err(Error::LossDomain {
                target: t,
                lower_bound: cfg.y_lb,
            });
        }
    }

    let mut rng = seeded(seed);
    let mut net = Network::init(input_dim, cfg.n_layers, cfg.width, &mut rng);
    let mut adam = Adam::new(net.params.len(), cfg.learning_rate);
    let batch = cfg.effective_batch_size(xs.len());
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut grad = vec![0.0; net.params.len()];
    let mut bx: Vec<&[f64]> = Vec::with_capacity(batch);
    let mut by: Vec<f64> = Vec::with_capacity(batch);
    let mut traces = Vec::new();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.push(&xs[i]);
                by.push(ys[i]);
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            let value = net.accumulate(&bx, &by, cfg.loss, cfg.y_lb, &mut grad, &mut traces)?;
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, loss: value });
            }
            adam.step(&mut net.params, &grad);
        }
    }
    if net.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Divergence {
            epoch: cfg.epochs,
            loss: f64::NAN,
        });
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> PredictorConfig {
        PredictorConfig {
            n_layers: 3,
            width: 8,
            epochs: 300,
            ..PredictorConfig::default()
        }
    }

    // Adam on a sign-subgradient loss settles into a limit cycle whose size
    // grows with the step size, so the fit checks use small learning rates.
    #[test]
    fn memorizes_single_point() {
        let cfg = PredictorConfig {
            n_layers: 3,
            epochs: 2000,
            learning_rate: 3e-5,
            loss: LossKind::Mae,
            ..PredictorConfig::default()
        };
        let xs = vec![vec![1.0, 0.0, 1.0, 0.0]];
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        for seed in 0..5 {
            let net = train_member(&xs, &[0.3], &cfg, seed).unwrap();
            let (l, _) = net.loss_and_grad(&refs, &[0.3], LossKind::Mae, 0.0).unwrap();
            assert!(l < 1e-3, "seed {seed}: loss {l}");
        }
    }

    #[test]
    fn fits_constant_targets() {
        let mut rng = seeded(4);
        let xs: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..12).map(|_| rng.random_range(0..2) as f64).collect())
            .collect();
        let c = 0.25;
        let ys = vec![c; xs.len()];
        let cfg = PredictorConfig {
            epochs: 2000,
            learning_rate: 1e-4,
            ..PredictorConfig::default()
        };
        for seed in 0..3 {
            let net = train_member(&xs, &ys, &cfg, seed).unwrap();
            for p in net.predict_many(&xs) {
                assert!((p - c).abs() <= c * 1e-2 + 1e-3, "seed {seed}: {p}");
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let xs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let ys = [0.2, 0.3, 0.4];
        let a = train_member(&xs, &ys, &small_cfg(), 5).unwrap();
        let b = train_member(&xs, &ys, &small_cfg(), 5).unwrap();
        assert_eq!(a.params(), b.params());
        let c = train_member(&xs, &ys, &small_cfg(), 6).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = small_cfg();
        assert!(train_member(&[], &[], &cfg, 0).is_err());
        assert!(train_member(&[vec![1.0], vec![1.0, 2.0]], &[0.1, 0.2], &cfg, 0).is_err());
        assert!(matches!(
            train_member(&[vec![1.0]], &[0.0], &cfg, 0),
            Err(Error::LossDomain { .. })
        ));
    }

    #[test]
    fn diverging_learning_rate_is_reported() {
        let cfg = PredictorConfig {
            learning_rate: 1e300,
            loss: LossKind::Mae,
            ..small_cfg()
        };
        let xs = vec![vec![1.0, 1.0], vec![0.5, 1.0]];
        assert!(matches!(
            train_member(&xs, &[0.1, 0.9], &cfg, 0),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn full_batch_is_order_invariant() {
        let mut rng = seeded(8);
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..6).map(|_| rng.random::<f64>()).collect())
            .collect();
        let ys: Vec<f64> = (0..20).map(|i| 0.1 + 0.01 * i as f64).collect();
        let net = Network::init(6, 3, 8, &mut seeded(1));
        let fwd: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let rev: Vec<&[f64]> = xs.iter().rev().map(|x| x.as_slice()).collect();
        let ys_rev: Vec<f64> = ys.iter().rev().copied().collect();
        let (la, ga) = net.loss_and_grad(&fwd, &ys, LossKind::Mape, 0.0).unwrap();
        let (lb, gb) = net.loss_and_grad(&rev, &ys_rev, LossKind::Mape, 0.0).unwrap();
        assert!((la - lb).abs() < 1e-12);
        for (a, b) in ga.iter().zip(&gb) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let net = Network::init(5, 2, 4, &mut seeded(3));
        let text = net.to_checkpoint();
        assert!(text.starts_with("bananas-mlp v1\ndims 5 4 4 1\n"));
        assert_eq!(Network::from_checkpoint(&text).unwrap(), net);
        assert!(Network::from_checkpoint("nope").is_err());
        let truncated: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(Network::from_checkpoint(&truncated).is_err());
    }
}
