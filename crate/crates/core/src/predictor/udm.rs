//! A miniature unconditional DiffWave: dilated gated convolutions with residual and
//! skip paths, conditioned only on the log-SNR through a sinusoidal embedding.
//!
//! Forward and reverse passes are written out by hand. The network is generic over the
//! float type: inference and training run in `f32`, gradient checks can run the same
//! parameters in `f64`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::TensorEntry;
use super::{NoisePredictor, ParamGradient, Pullback};
use crate::error::{ensure, Error, Result};

pub trait Real: Float + FromPrimitive + AddAssign + Sum + Send + Sync + Debug + Default + 'static {}
impl Real for f32 {}
impl Real for f64 {}

#[inline]
fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite cast")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// ReLU, swish and the tanh·sigmoid gate.
    #[default]
    Gated,
    /// Every nonlinearity replaced by the identity (the gate passes its first half).
    /// Only useful for verifying the linear algebra of the reverse pass.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyUdmConfig {
    pub residual_layers: usize,
    pub channels: usize,
    pub dilation_cycle: Vec<usize>,
    pub kernel_size: usize,
    pub embedding_dim: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for ToyUdmConfig {
    fn default() -> Self {
        Self {
            residual_layers: 4,
            channels: 16,
            dilation_cycle: vec![1, 2, 4, 8],
            kernel_size: 3,
            embedding_dim: 32,
            activation: Activation::Gated,
        }
    }
}

impl ToyUdmConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.residual_layers > 0, "need at least one residual layer");
        ensure!(self.channels > 0, "channels must be positive");
        ensure!(
            !self.dilation_cycle.is_empty() && self.dilation_cycle.iter().all(|d| *d > 0),
            "dilation cycle must be non-empty and positive"
        );
        ensure!(
            self.kernel_size % 2 == 1,
            "kernel size must be odd, got {}",
            self.kernel_size
        );
        ensure!(
            self.embedding_dim >= 2 && self.embedding_dim.is_multiple_of(2),
            "embedding dim must be even and >= 2"
        );
        Ok(())
    }

    pub fn dilation(&self, layer: usize) -> usize {
        self.dilation_cycle[layer % self.dilation_cycle.len()]
    }

    /// Number of input samples that can influence one output sample.
    pub fn receptive_field(&self) -> usize {
        1 + (0..self.residual_layers)
            .map(|l| (self.kernel_size - 1) * self.dilation(l))
            .sum::<usize>()
    }
}

#[derive(Clone, Debug)]
struct LayerOffsets {
    proj_w: usize,
    proj_b: usize,
    dil_w: usize,
    dil_b: usize,
    out_w: usize,
    out_b: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    input_w: usize,
    input_b: usize,
    fc1_w: usize,
    fc1_b: usize,
    fc2_w: usize,
    fc2_b: usize,
    layers: Vec<LayerOffsets>,
    skip_w: usize,
    skip_b: usize,
    final_w: usize,
    final_b: usize,
    tensors: Vec<TensorEntry>,
    /// Fan-in used for uniform initialisation, per tensor; `None` means zero init.
    init_fan_in: Vec<Option<usize>>,
    total: usize,
}

impl Layout {
    fn new(cfg: &ToyUdmConfig) -> Self {
        let (c, e, k) = (cfg.channels, cfg.embedding_dim, cfg.kernel_size);
        let mut tensors = Vec::new();
        let mut init = Vec::new();
        let mut total = 0;
        let mut push = |name: String, shape: Vec<usize>, fan: Option<usize>| {
            let len = shape.iter().product::<usize>();
            tensors.push(TensorEntry {
                name,
                shape,
                offset: total,
            });
            init.push(fan);
            total += len;
            total - len
        };
        let input_w = push("input.weight".into(), vec![c, 1], Some(1));
        let input_b = push("input.bias".into(), vec![c], None);
        let fc1_w = push("embed.fc1.weight".into(), vec![e, e], Some(e));
        let fc1_b = push("embed.fc1.bias".into(), vec![e], None);
        let fc2_w = push("embed.fc2.weight".into(), vec![e, e], Some(e));
        let fc2_b = push("embed.fc2.bias".into(), vec![e], None);
        let layers = (0..cfg.residual_layers)
            .map(|l| LayerOffsets {
                proj_w: push(format!("layers.{l}.diffusion_proj.weight"), vec![c, e], Some(e)),
                proj_b: push(format!("layers.{l}.diffusion_proj.bias"), vec![c], None),
                dil_w: push(format!("layers.{l}.dilated_conv.weight"), vec![2 * c, c, k], Some(c * k)),
                dil_b: push(format!("layers.{l}.dilated_conv.bias"), vec![2 * c], None),
                out_w: push(format!("layers.{l}.output_proj.weight"), vec![2 * c, c], Some(c)),
                out_b: push(format!("layers.{l}.output_proj.bias"), vec![2 * c], None),
            })
            .collect();
        let skip_w = push("skip_proj.weight".into(), vec![c, c], Some(c));
        let skip_b = push("skip_proj.bias".into(), vec![c], None);
        let final_w = push("output_proj.weight".into(), vec![1, c], None);
        let final_b = push("output_proj.bias".into(), vec![1], None);
        Self {
            input_w,
            input_b,
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
            layers,
            skip_w,
            skip_b,
            final_w,
            final_b,
            tensors,
            init_fan_in: init,
            total,
        }
    }
}

/// Activations kept from the forward pass for the reverse pass.
struct Tape<T> {
    n: usize,
    z: Vec<T>,
    emb0: Vec<T>,
    u1: Vec<T>,
    e1: Vec<T>,
    u2: Vec<T>,
    e2: Vec<T>,
    h0_pre: Vec<T>,
    /// Per layer: conditioned input `y` (C×n) and conv output `a` (2C×n).
    layers: Vec<(Vec<T>, Vec<T>)>,
    skip: Vec<T>,
    q_pre: Vec<T>,
    out: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct ToyUdm<T: Real = f32> {
    config: ToyUdmConfig,
    layout: Layout,
    params: Vec<T>,
}

fn sig<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Real> ToyUdm<T> {
    /// Uniform `±1/sqrt(fan_in)` weights, zero biases, zero output projection.
    pub fn init<R: Rng + ?Sized>(config: ToyUdmConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![T::zero(); layout.total];
        for (entry, fan) in layout.tensors.iter().zip(&layout.init_fan_in) {
            if let Some(fan) = fan {
                let bound = 1.0 / (*fan as f64).sqrt();
                let len: usize = entry.shape.iter().product();
                for p in &mut params[entry.offset..entry.offset + len] {
                    *p = cast(rng.random_range(-bound..bound));
                }
            }
        }
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn from_params(config: ToyUdmConfig, params: Vec<T>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        ensure!(
            params.len() == layout.total,
            "expected {} parameters, got {}",
            layout.total,
            params.len()
        );
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &ToyUdmConfig {
        &self.config
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn tensors(&self) -> &[TensorEntry] {
        &self.layout.tensors
    }

    /// Same network with parameters converted to another float type.
    pub fn cast<U: Real>(&self) -> ToyUdm<U> {
        ToyUdm {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self
                .params
                .iter()
                .map(|p| cast::<U>(p.to_f64().unwrap()))
                .collect(),
        }
    }

    fn check_params(&self) -> Result<()> {
        if let Some(i) = self.params.iter().position(|p| !p.is_finite()) {
            let name = self
                .layout
                .tensors
                .iter()
                .rev()
                .find(|t| t.offset <= i)
                .map(|t| t.name.as_str())
                .unwrap_or("?");
            return Err(Error::InvalidArgument(format!(
                "non-finite parameter at index {i} ({name})"
            )));
        }
        Ok(())
    }

    fn embedding(&self, delta: f64) -> Vec<T> {
        let half = self.config.embedding_dim / 2;
        let mut out = vec![T::zero(); 2 * half];
        for i in 0..half {
            let frac = if half > 1 {
                i as f64 / (half - 1) as f64
            } else {
                0.0
            };
            let freq = 0.1 * 1000f64.powf(frac);
            out[i] = cast((delta * freq).sin());
            out[half + i] = cast((delta * freq).cos());
        }
        out
    }

    fn linear(&self) -> bool {
        self.config.activation == Activation::Linear
    }

    fn act_swish(&self, u: T) -> T {
        if self.linear() {
            u
        } else {
            u * sig(u)
        }
    }

    fn act_swish_grad(&self, u: T) -> T {
        if self.linear() {
            T::one()
        } else {
            let s = sig(u);
            s * (T::one() + u * (T::one() - s))
        }
    }

    fn dense(&self, w: usize, b: usize, rows: usize, cols: usize, x: &[T]) -> Vec<T> {
        let p = &self.params;
        (0..rows)
            .map(|r| {
                let mut acc = p[b + r];
                for c in 0..cols {
                    acc += p[w + r * cols + c] * x[c];
                }
                acc
            })
            .collect()
    }

    fn forward(&self, z: &[T], delta: f64) -> Result<Tape<T>> {
        self.check_params()?;
        let cfg = &self.config;
        let lay = &self.layout;
        let p = &self.params;
        let (n, c, e, k) = (z.len(), cfg.channels, cfg.embedding_dim, cfg.kernel_size);
        let half_k = (k / 2) as isize;
        let relu = |v: T| if self.linear() { v } else { v.max(T::zero()) };

        let emb0 = self.embedding(delta);
        let u1 = self.dense(lay.fc1_w, lay.fc1_b, e, e, &emb0);
        let e1: Vec<T> = u1.iter().map(|&u| self.act_swish(u)).collect();
        let u2 = self.dense(lay.fc2_w, lay.fc2_b, e, e, &e1);
        let e2: Vec<T> = u2.iter().map(|&u| self.act_swish(u)).collect();

        let mut h0_pre = vec![T::zero(); c * n];
        for ch in 0..c {
            let (w, b) = (p[lay.input_w + ch], p[lay.input_b + ch]);
            for (o, zv) in h0_pre[ch * n..(ch + 1) * n].iter_mut().zip(z) {
                *o = w * *zv + b;
            }
        }
        let mut h: Vec<T> = h0_pre.iter().map(|&v| relu(v)).collect();
        let mut skip = vec![T::zero(); c * n];
        let mut layers = Vec::with_capacity(cfg.residual_layers);
        let inv_sqrt2: T = cast(std::f64::consts::FRAC_1_SQRT_2);

        for (l, off) in lay.layers.iter().enumerate() {
            let d = self.dense(off.proj_w, off.proj_b, c, e, &e2);
            let mut y = h.clone();
            for ch in 0..c {
                for v in &mut y[ch * n..(ch + 1) * n] {
                    *v += d[ch];
                }
            }
            let dil = cfg.dilation(l) as isize;
            let mut a = vec![T::zero(); 2 * c * n];
            for o in 0..2 * c {
                let row = &mut a[o * n..(o + 1) * n];
                row.fill(p[off.dil_b + o]);
                for ch in 0..c {
                    let yrow = &y[ch * n..(ch + 1) * n];
                    for kk in 0..k {
                        let w = p[off.dil_w + (o * c + ch) * k + kk];
                        let shift = (kk as isize - half_k) * dil;
                        let (t0, t1) = shifted_range(n, shift);
                        let src = &yrow[(t0 as isize + shift) as usize..(t1 as isize + shift) as usize];
                        for (r, s) in row[t0..t1].iter_mut().zip(src) {
                            *r += w * *s;
                        }
                    }
                }
            }
            let g = self.gate(&a, c, n);
            // output projection into residual (first C rows) and skip (last C rows)
            for j in 0..2 * c {
                let mut row = vec![p[off.out_b + j]; n];
                for ch in 0..c {
                    let w = p[off.out_w + j * c + ch];
                    for (r, gv) in row.iter_mut().zip(&g[ch * n..(ch + 1) * n]) {
                        *r += w * *gv;
                    }
                }
                if j < c {
                    for (hv, r) in h[j * n..(j + 1) * n].iter_mut().zip(&row) {
                        *hv = (*hv + *r) * inv_sqrt2;
                    }
                } else {
                    let ch = j - c;
                    for (s, r) in skip[ch * n..(ch + 1) * n].iter_mut().zip(&row) {
                        *s += *r;
                    }
                }
            }
            layers.push((y, a));
        }

        let skip_scale: T = cast(1.0 / (cfg.residual_layers as f64).sqrt());
        for s in skip.iter_mut() {
            *s = *s * skip_scale;
        }
        let mut q_pre = vec![T::zero(); c * n];
        for r in 0..c {
            let row = &mut q_pre[r * n..(r + 1) * n];
            row.fill(p[lay.skip_b + r]);
            for ch in 0..c {
                let w = p[lay.skip_w + r * c + ch];
                for (o, s) in row.iter_mut().zip(&skip[ch * n..(ch + 1) * n]) {
                    *o += w * *s;
                }
            }
        }
        let mut out = vec![p[lay.final_b]; n];
        for ch in 0..c {
            let w = p[lay.final_w + ch];
            for (o, q) in out.iter_mut().zip(&q_pre[ch * n..(ch + 1) * n]) {
                *o += w * relu(*q);
            }
        }
        Ok(Tape {
            n,
            z: z.to_vec(),
            emb0,
            u1,
            e1,
            u2,
            e2,
            h0_pre,
            layers,
            skip,
            q_pre,
            out,
        })
    }

    /// `tanh(a[:C]) * sigmoid(a[C:])`.
    fn gate(&self, a: &[T], c: usize, n: usize) -> Vec<T> {
        if self.linear() {
            return a[..c * n].to_vec();
        }
        let (filt, gate) = a.split_at(c * n);
        filt.iter().zip(gate).map(|(f, g)| f.tanh() * sig(*g)).collect()
    }

    /// Reverse pass: gradients w.r.t. the input and every parameter.
    fn backward(&self, tape: &Tape<T>, cot: &[T]) -> (Vec<T>, Vec<T>) {
        let cfg = &self.config;
        let lay = &self.layout;
        let p = &self.params;
        let (n, c, e, k) = (tape.n, cfg.channels, cfg.embedding_dim, cfg.kernel_size);
        let half_k = (k / 2) as isize;
        let lin = self.linear();
        let relu = |v: T| if lin { v } else { v.max(T::zero()) };
        let relu_grad = |v: T| if lin || v > T::zero() { T::one() } else { T::zero() };
        let mut gp = vec![T::zero(); p.len()];

        // output projection
        gp[lay.final_b] = cot.iter().copied().sum();
        let mut dq = vec![T::zero(); c * n];
        for ch in 0..c {
            let w = p[lay.final_w + ch];
            let q = &tape.q_pre[ch * n..(ch + 1) * n];
            let mut gw = T::zero();
            for t in 0..n {
                gw += cot[t] * relu(q[t]);
                dq[ch * n + t] = w * cot[t] * relu_grad(q[t]);
            }
            gp[lay.final_w + ch] = gw;
        }
        // skip projection
        let mut ds = vec![T::zero(); c * n];
        for r in 0..c {
            let dqr = &dq[r * n..(r + 1) * n];
            gp[lay.skip_b + r] = dqr.iter().copied().sum();
            for ch in 0..c {
                let srow = &tape.skip[ch * n..(ch + 1) * n];
                gp[lay.skip_w + r * c + ch] = dqr.iter().zip(srow).map(|(a, b)| *a * *b).sum();
                let w = p[lay.skip_w + r * c + ch];
                for (d, g) in ds[ch * n..(ch + 1) * n].iter_mut().zip(dqr) {
                    *d += w * *g;
                }
            }
        }
        let skip_scale: T = cast(1.0 / (cfg.residual_layers as f64).sqrt());
        for v in ds.iter_mut() {
            *v = *v * skip_scale;
        }

        let inv_sqrt2: T = cast(std::f64::consts::FRAC_1_SQRT_2);
        let mut dh = vec![T::zero(); c * n];
        let mut de2 = vec![T::zero(); e];
        for (l, off) in lay.layers.iter().enumerate().rev() {
            let (y, a) = &tape.layers[l];
            let g = self.gate(a, c, n);
            // upstream grad of the 2C projection rows
            let mut dout = vec![T::zero(); 2 * c * n];
            for (dst, src) in dout[..c * n].iter_mut().zip(&dh) {
                *dst = *src * inv_sqrt2;
            }
            dout[c * n..].copy_from_slice(&ds);
            // residual path straight through
            for v in dh.iter_mut() {
                *v = *v * inv_sqrt2;
            }
            let mut dg = vec![T::zero(); c * n];
            for j in 0..2 * c {
                let drow = &dout[j * n..(j + 1) * n];
                gp[off.out_b + j] = drow.iter().copied().sum();
                for ch in 0..c {
                    let grow = &g[ch * n..(ch + 1) * n];
                    gp[off.out_w + j * c + ch] = drow.iter().zip(grow).map(|(a, b)| *a * *b).sum();
                    let w = p[off.out_w + j * c + ch];
                    for (d, s) in dg[ch * n..(ch + 1) * n].iter_mut().zip(drow) {
                        *d += w * *s;
                    }
                }
            }
            // through the gate
            let mut da = vec![T::zero(); 2 * c * n];
            if lin {
                da[..c * n].copy_from_slice(&dg);
            } else {
                for i in 0..c * n {
                    let th = a[i].tanh();
                    let sg = sig(a[c * n + i]);
                    da[i] = dg[i] * sg * (T::one() - th * th);
                    da[c * n + i] = dg[i] * th * sg * (T::one() - sg);
                }
            }
            // dilated convolution
            let dil = cfg.dilation(l) as isize;
            let mut dy = vec![T::zero(); c * n];
            for o in 0..2 * c {
                let darow = &da[o * n..(o + 1) * n];
                gp[off.dil_b + o] = darow.iter().copied().sum();
                for ch in 0..c {
                    let yrow = &y[ch * n..(ch + 1) * n];
                    for kk in 0..k {
                        let idx = off.dil_w + (o * c + ch) * k + kk;
                        let shift = (kk as isize - half_k) * dil;
                        let (t0, t1) = shifted_range(n, shift);
                        let s0 = (t0 as isize + shift) as usize;
                        let s1 = (t1 as isize + shift) as usize;
                        gp[idx] = darow[t0..t1]
                            .iter()
                            .zip(&yrow[s0..s1])
                            .map(|(a, b)| *a * *b)
                            .sum();
                        let w = p[idx];
                        for (d, g) in dy[ch * n + s0..ch * n + s1].iter_mut().zip(&darow[t0..t1]) {
                            *d += w * *g;
                        }
                    }
                }
            }
            // y = h + proj(e2)
            for ch in 0..c {
                let dyrow = &dy[ch * n..(ch + 1) * n];
                let dd: T = dyrow.iter().copied().sum();
                gp[off.proj_b + ch] = dd;
                for j in 0..e {
                    gp[off.proj_w + ch * e + j] = dd * tape.e2[j];
                    de2[j] += p[off.proj_w + ch * e + j] * dd;
                }
                for (h, d) in dh[ch * n..(ch + 1) * n].iter_mut().zip(dyrow) {
                    *h += *d;
                }
            }
        }

        // input projection
        let mut dz = vec![T::zero(); n];
        for ch in 0..c {
            let w = p[lay.input_w + ch];
            let pre = &tape.h0_pre[ch * n..(ch + 1) * n];
            let mut gw = T::zero();
            let mut gb = T::zero();
            for t in 0..n {
                let d = dh[ch * n + t] * relu_grad(pre[t]);
                gw += d * tape.z[t];
                gb += d;
                dz[t] += w * d;
            }
            gp[lay.input_w + ch] = gw;
            gp[lay.input_b + ch] = gb;
        }

        // embedding MLP
        let du2: Vec<T> = de2
            .iter()
            .zip(&tape.u2)
            .map(|(d, u)| *d * self.act_swish_grad(*u))
            .collect();
        let mut de1 = vec![T::zero(); e];
        for r in 0..e {
            gp[lay.fc2_b + r] = du2[r];
            for j in 0..e {
                gp[lay.fc2_w + r * e + j] = du2[r] * tape.e1[j];
                de1[j] += p[lay.fc2_w + r * e + j] * du2[r];
            }
        }
        for r in 0..e {
            let du1 = de1[r] * self.act_swish_grad(tape.u1[r]);
            gp[lay.fc1_b + r] = du1;
            for j in 0..e {
                gp[lay.fc1_w + r * e + j] = du1 * tape.emb0[j];
            }
        }
        (dz, gp)
    }

    /// `ε̂(z; δ)` in the network's precision.
    pub fn forward_native(&self, z: &[T], delta: f64) -> Result<Vec<T>> {
        Ok(self.forward(z, delta)?.out)
    }

    /// Returns `(prediction, grad_z, grad_params)` for cotangent `cot` on the prediction.
    pub fn vjp_native(&self, z: &[T], delta: f64, cot: &[T]) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
        ensure!(
            z.len() == cot.len(),
            "cotangent length {} does not match latent length {}",
            cot.len(),
            z.len()
        );
        let tape = self.forward(z, delta)?;
        let (dz, gp) = self.backward(&tape, cot);
        Ok((tape.out, dz, gp))
    }
}

/// Output index range `[t0, t1)` for which `t + shift` stays inside `0..n`.
fn shifted_range(n: usize, shift: isize) -> (usize, usize) {
    let t0 = (-shift).max(0) as usize;
    let t1 = (n as isize - shift.max(0)).max(0) as usize;
    (t0.min(n), t1.max(t0.min(n)))
}

fn to_t<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| cast(x)).collect()
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap()).collect()
}

impl<T: Real> NoisePredictor for ToyUdm<T> {
    fn predict(&self, z: &[f64], delta: f64) -> Result<Vec<f64>> {
        Ok(to_f64(&self.forward_native(&to_t::<T>(z), delta)?))
    }

    fn vjp(&self, z: &[f64], delta: f64, cotangent: &[f64]) -> Result<Vec<f64>> {
        let (_, dz, _) = self.vjp_native(&to_t::<T>(z), delta, &to_t::<T>(cotangent))?;
        Ok(to_f64(&dz))
    }

    fn predict_with_pullback<'a>(
        &'a self,
        z: &'a [f64],
        delta: f64,
    ) -> Result<(Vec<f64>, Pullback<'a>)> {
        let tape = self.forward(&to_t::<T>(z), delta)?;
        let out = to_f64(&tape.out);
        let pullback = move |c: &[f64]| -> Result<Vec<f64>> {
            ensure!(
                c.len() == tape.n,
                "cotangent length {} does not match latent length {}",
                c.len(),
                tape.n
            );
            let (dz, _) = self.backward(&tape, &to_t::<T>(c));
            Ok(to_f64(&dz))
        };
        Ok((out, Box::new(pullback)))
    }
}

impl<T: Real> ParamGradient for ToyUdm<T> {
    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn predict_and_param_grad(
        &self,
        z: &[f64],
        delta: f64,
        cotangent: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let tape = self.forward(&to_t::<T>(z), delta)?;
        let out = to_f64(&tape.out);
        let cot = cotangent(&out);
        ensure!(cot.len() == out.len(), "cotangent length mismatch");
        let (_, gp) = self.backward(&tape, &to_t::<T>(&cot));
        Ok((out, to_f64(&gp)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, seeded};

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Default init with a random (instead of zero) output projection so that every
    /// parameter receives gradient.
    fn live_model<T: Real>(cfg: ToyUdmConfig, seed: u64) -> ToyUdm<T> {
        let mut rng = seeded(seed);
        let mut m = ToyUdm::<T>::init(cfg, &mut rng).unwrap();
        let (fw, fb) = (m.layout.final_w, m.layout.final_b);
        for i in fw..=fb {
            m.params[i] = cast(rng.random_range(-0.5..0.5));
        }
        for i in 0..m.params.len() {
            if m.params[i] == T::zero() {
                m.params[i] = cast(rng.random_range(-0.1..0.1));
            }
        }
        m
    }

    fn small_cfg() -> ToyUdmConfig {
        ToyUdmConfig {
            residual_layers: 3,
            channels: 4,
            dilation_cycle: vec![1, 2, 4],
            kernel_size: 3,
            embedding_dim: 8,
            activation: Activation::Gated,
        }
    }

    #[test]
    fn zero_output_projection_gives_zero() {
        let m = ToyUdm::<f32>::init(ToyUdmConfig::default(), &mut seeded(1)).unwrap();
        let z = normal_vec(&mut seeded(2), 100);
        assert!(m.predict(&z, 3.0).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn deterministic_output() {
        let a = live_model::<f32>(ToyUdmConfig::default(), 3);
        let b = live_model::<f32>(ToyUdmConfig::default(), 3);
        let z = normal_vec(&mut seeded(4), 257);
        let pa = a.predict(&z, 1.5).unwrap();
        let pb = b.predict(&z, 1.5).unwrap();
        assert_eq!(pa.len(), 257);
        assert!(pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn receptive_field_matches_impulse_support() {
        let cfg = small_cfg();
        let m = live_model::<f64>(cfg.clone(), 5);
        let n = 64;
        let base = m.predict(&vec![0.0; n], 2.0).unwrap();
        let mut z = vec![0.0; n];
        z[32] = 1.0;
        let out = m.predict(&z, 2.0).unwrap();
        let changed: Vec<usize> = (0..n).filter(|&t| (out[t] - base[t]).abs() > 1e-12).collect();
        let span = changed.last().unwrap() - changed.first().unwrap() + 1;
        assert_eq!(span, cfg.receptive_field());
    }

    #[test]
    fn nan_parameter_fails_fast() {
        let mut m = ToyUdm::<f32>::init(small_cfg(), &mut seeded(6)).unwrap();
        m.params_mut()[10] = f32::NAN;
        assert!(m.predict(&[0.0; 8], 0.0).is_err());
    }

    #[test]
    fn grad_z_matches_central_differences_f64() {
        let m = live_model::<f64>(small_cfg(), 7);
        let mut rng = seeded(8);
        let z = normal_vec(&mut rng, 40);
        let c = normal_vec(&mut rng, 40);
        let delta = 2.5;
        let g = m.vjp(&z, delta, &c).unwrap();
        let h = 1e-5;
        for i in [0, 3, 19, 39] {
            let mut zp = z.clone();
            zp[i] += h;
            let mut zm = z.clone();
            zm[i] -= h;
            let fd = (dot(&m.predict(&zp, delta).unwrap(), &c) - dot(&m.predict(&zm, delta).unwrap(), &c))
                / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-7 * fd.abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn grad_params_match_central_differences_f64() {
        let m = live_model::<f64>(small_cfg(), 9);
        let mut rng = seeded(10);
        let z = normal_vec(&mut rng, 32);
        let c = normal_vec(&mut rng, 32);
        let delta = 0.8;
        let (_, _, gp) = m.vjp_native(&z, delta, &c).unwrap();
        let h = 1e-5;
        // one coordinate from every tensor
        for entry in m.tensors() {
            let i = entry.offset + (entry.shape.iter().product::<usize>() / 2);
            let mut mp = m.clone();
            mp.params[i] += h;
            let mut mm = m.clone();
            mm.params[i] -= h;
            let fd = (dot(&mp.predict(&z, delta).unwrap(), &c) - dot(&mm.predict(&z, delta).unwrap(), &c))
                / (2.0 * h);
            assert!(
                (fd - gp[i]).abs() <= 1e-6 * fd.abs().max(1e-3),
                "{}: {fd} vs {}",
                entry.name,
                gp[i]
            );
        }
    }

    #[test]
    fn linear_network_vjp_is_transpose() {
        let cfg = ToyUdmConfig {
            activation: Activation::Linear,
            ..small_cfg()
        };
        let m = live_model::<f64>(cfg, 11);
        let mut rng = seeded(12);
        let n = 30;
        let z0 = normal_vec(&mut rng, n);
        let z1 = normal_vec(&mut rng, n);
        let v = normal_vec(&mut rng, n);
        let c = normal_vec(&mut rng, n);
        let g0 = m.vjp(&z0, 1.0, &c).unwrap();
        let g1 = m.vjp(&z1, 1.0, &c).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            assert!((a - b).abs() < 1e-12);
        }
        // affine map: J v = f(z + v) - f(z), and <J v, c> = <v, J^T c>
        let zv: Vec<f64> = z0.iter().zip(&v).map(|(a, b)| a + b).collect();
        let jv: Vec<f64> = m
            .predict(&zv, 1.0)
            .unwrap()
            .iter()
            .zip(&m.predict(&z0, 1.0).unwrap())
            .map(|(a, b)| a - b)
            .collect();
        assert!((dot(&jv, &c) - dot(&v, &g0)).abs() < 1e-10 * dot(&v, &g0).abs().max(1.0));
    }

    #[test]
    fn vjp_sum_rule() {
        let m = live_model::<f64>(small_cfg(), 13);
        let z = normal_vec(&mut seeded(14), 12);
        let ones = vec![1.0; 12];
        let total = m.vjp(&z, 0.3, &ones).unwrap();
        let mut summed = vec![0.0; 12];
        for i in 0..12 {
            let mut e = vec![0.0; 12];
            e[i] = 1.0;
            for (s, g) in summed.iter_mut().zip(m.vjp(&z, 0.3, &e).unwrap()) {
                *s += g;
            }
        }
        for (a, b) in total.iter().zip(&summed) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pullback_matches_vjp() {
        let m = live_model::<f32>(small_cfg(), 15);
        let z = normal_vec(&mut seeded(16), 50);
        let c = normal_vec(&mut seeded(17), 50);
        let (out, pb) = m.predict_with_pullback(&z, 4.0).unwrap();
        assert_eq!(out, m.predict(&z, 4.0).unwrap());
        assert_eq!(pb(&c).unwrap(), m.vjp(&z, 4.0, &c).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg();
        cfg.kernel_size = 2;
        assert!(cfg.validate().is_err());
        let cfg = ToyUdmConfig::default();
        assert_eq!(cfg.receptive_field(), 1 + 2 * (1 + 2 + 4 + 8));
        assert!(ToyUdm::<f32>::from_params(cfg, vec![0.0; 3]).is_err());
    }
}
