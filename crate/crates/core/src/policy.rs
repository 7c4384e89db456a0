//! Shared actor-critic network: two tanh hidden layers feeding a linear
//! action-logit head and a linear value head, plus an Adam optimizer.
//!
//! All parameters live in one flat vector in declaration order:
//! `hidden1.weight, hidden1.bias, hidden2.weight, hidden2.bias,
//! actor.weight, actor.bias, critic.weight, critic.bias`. Weight matrices are
//! stored `[out][in]` row-major.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{ActionId, Observation};
use crate::error::{Error, Result};

pub const HIDDEN: usize = 32;
pub const CHECKPOINT_VERSION: u32 = 1;

/// Layer sizes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub actions: usize,
}

impl Arch {
    pub fn new(input: usize, actions: usize) -> Self {
        Self { input, hidden1: HIDDEN, hidden2: HIDDEN, actions }
    }

    fn layers(&self) -> [(usize, usize); 4] {
        [(self.input, self.hidden1), (self.hidden1, self.hidden2), (self.hidden2, self.actions), (self.hidden2, 1)]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }

    /// Offsets of (weight, bias) for each layer.
    fn offsets(&self) -> [(usize, usize); 4] {
        let mut out = [(0, 0); 4];
        let mut pos = 0;
        for (k, (i, o)) in self.layers().into_iter().enumerate() {
            out[k] = (pos, pos + i * o);
            pos += i * o + o;
        }
        out
    }
}

/// Flattens an observation: the measurement matrix row-major (bits as 0.0 /
/// 1.0), followed by the weight encoding.
pub fn flatten_observation(obs: &Observation, shots: usize, n: usize) -> Result<Vec<f64>> {
    if obs.bits.rows() != shots || obs.bits.cols() != n || obs.wtilde.len() != n * (n + 1) / 2 {
        return Err(Error::Argument(format!(
            "observation shape {}x{} + {} does not match {shots}x{n}",
            obs.bits.rows(),
            obs.bits.cols(),
            obs.wtilde.len()
        )));
    }
    let mut x = Vec::with_capacity(shots * n + obs.wtilde.len());
    x.extend(obs.bits.as_slice().iter().map(|&b| b as f64));
    x.extend_from_slice(&obs.wtilde.values);
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    arch: Arch,
    data: Vec<f64>,
}

/// Intermediate activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    let cols = x.len();
    out.clear();
    out.extend(b.iter().enumerate().map(|(r, &bias)| {
        let row = &w[r * cols..(r + 1) * cols];
        bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }));
}

/// Orthogonal `rows x cols` matrix scaled by `gain`: Gram-Schmidt over
/// Gaussian vectors along the smaller dimension.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (count, dim) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(count);
    while vecs.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for u in &vecs {
            let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            vecs.push(v);
        }
    }
    let mut w = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            w[r * cols + c] = gain * if rows <= cols { vecs[r][c] } else { vecs[c][r] };
        }
    }
    w
}

impl PolicyParams {
    pub fn zeros(arch: Arch) -> Self {
        Self { arch, data: vec![0.0; arch.param_count()] }
    }

    /// Orthogonal initialization: gain sqrt(2) on hidden layers, 0.01 on the
    /// actor head (near-uniform initial policy), 1.0 on the critic head.
    /// Biases start at zero.
    pub fn init<R: Rng + ?Sized>(arch: Arch, rng: &mut R) -> Self {
        let mut p = Self::zeros(arch);
        let gains = [2f64.sqrt(), 2f64.sqrt(), 0.01, 1.0];
        for (k, ((inp, out), (w_off, _))) in arch.layers().into_iter().zip(arch.offsets()).enumerate() {
            let w = orthogonal(out, inp, gains[k], rng);
            p.data[w_off..w_off + inp * out].copy_from_slice(&w);
        }
        p
    }

    pub fn from_vec(arch: Arch, data: Vec<f64>) -> Result<Self> {
        if data.len() != arch.param_count() {
            return Err(Error::Argument(format!(
                "{} parameters supplied, architecture needs {}",
                data.len(),
                arch.param_count()
            )));
        }
        Ok(Self { arch, data })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let (inp, out) = self.arch.layers()[k];
        let (w, b) = self.arch.offsets()[k];
        (&self.data[w..w + inp * out], &self.data[b..b + out])
    }

    /// Action logits and state value for one flattened observation.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (logits, value, _) = self.forward_cached(x)?;
        Ok((logits, value))
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, f64, ForwardCache)> {
        if x.len() != self.arch.input {
            return Err(Error::Argument(format!("input length {} != {}", x.len(), self.arch.input)));
        }
        let mut h1 = Vec::with_capacity(self.arch.hidden1);
        let (w, b) = self.layer(0);
        affine(w, b, x, &mut h1);
        h1.iter_mut().for_each(|v| *v = v.tanh());
        let mut h2 = Vec::with_capacity(self.arch.hidden2);
        let (w, b) = self.layer(1);
        affine(w, b, &h1, &mut h2);
        h2.iter_mut().for_each(|v| *v = v.tanh());
        let mut logits = Vec::with_capacity(self.arch.actions);
        let (w, b) = self.layer(2);
        affine(w, b, &h2, &mut logits);
        let (w, b) = self.layer(3);
        let value = b[0] + w.iter().zip(&h2).map(|(a, b)| a * b).sum::<f64>();
        Ok((logits, value, ForwardCache { input: x.to_vec(), h1, h2 }))
    }

    /// Accumulates into `grads` the parameter gradient of a scalar loss given
    /// its derivatives with respect to the logits and the value.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64], dvalue: f64, grads: &mut [f64]) {
        let offs = self.arch.offsets();
        let a = self.arch;

        // heads
        let mut dh2 = vec![0.0; a.hidden2];
        let (aw, ab) = offs[2];
        for (r, &g) in dlogits.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads[ab + r] += g;
            let row = aw + r * a.hidden2;
            for c in 0..a.hidden2 {
                grads[row + c] += g * cache.h2[c];
                dh2[c] += g * self.data[row + c];
            }
        }
        let (cw, cb) = offs[3];
        grads[cb] += dvalue;
        for c in 0..a.hidden2 {
            grads[cw + c] += dvalue * cache.h2[c];
            dh2[c] += dvalue * self.data[cw + c];
        }

        // hidden2
        let dz2: Vec<f64> = dh2.iter().zip(&cache.h2).map(|(d, h)| d * (1.0 - h * h)).collect();
        let mut dh1 = vec![0.0; a.hidden1];
        let (w2, b2) = offs[1];
        for (r, &g) in dz2.iter().enumerate() {
            grads[b2 + r] += g;
            let row = w2 + r * a.hidden1;
            for c in 0..a.hidden1 {
                grads[row + c] += g * cache.h1[c];
                dh1[c] += g * self.data[row + c];
            }
        }

        // hidden1
        let (w1, b1) = offs[0];
        for (r, (&d, &h)) in dh1.iter().zip(&cache.h1).enumerate() {
            let g = d * (1.0 - h * h);
            grads[b1 + r] += g;
            let row = w1 + r * a.input;
            for (c, &x) in cache.input.iter().enumerate() {
                grads[row + c] += g * x;
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(&mut std::io::BufReader::new(f))
    }

    /// Checkpoint layout: one line of JSON header terminated by `\n`, then
    /// every parameter as a little-endian f64 in declaration order.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = CheckpointHeader {
            version: CHECKPOINT_VERSION,
            arch: [self.arch.input, self.arch.hidden1, self.arch.hidden2],
            actions: self.arch.actions,
        };
        serde_json::to_writer(&mut *out, &header)?;
        out.write_all(b"\n")?;
        for x in &self.data {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut header = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            input.read_exact(&mut byte)?;
            if byte[0] == b'\n' {
                break;
            }
            header.push(byte[0]);
            if header.len() > 4096 {
                return Err(Error::Format("checkpoint header too long".into()));
            }
        }
        let header: CheckpointHeader = serde_json::from_slice(&header)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
        }
        let arch =
            Arch { input: header.arch[0], hidden1: header.arch[1], hidden2: header.arch[2], actions: header.actions };
        let mut data = vec![0.0; arch.param_count()];
        let mut buf = [0u8; 8];
        for x in data.iter_mut() {
            input.read_exact(&mut buf)?;
            *x = f64::from_le_bytes(buf);
        }
        if input.read(&mut buf)? != 0 {
            return Err(Error::Format("trailing bytes after checkpoint parameters".into()));
        }
        Ok(Self { arch, data })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    version: u32,
    arch: [usize; 3],
    actions: usize,
}

/// Numerically stable `log softmax`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

pub fn entropy(logp: &[f64]) -> f64 {
    -logp.iter().map(|&l| l.exp() * l).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    pub action: ActionId,
    pub logprob: f64,
    pub entropy: f64,
}

/// Draws from the softmax distribution over `logits`.
pub fn sample_action<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> Result<SampledAction> {
    if logits.is_empty() {
        return Err(Error::Argument("no logits".into()));
    }
    if let Some(i) = logits.iter().position(|l| !l.is_finite()) {
        return Err(Error::Numeric(format!("logit {i} is not finite")));
    }
    let logp = log_softmax(logits);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut action = logits.len() - 1;
    for (i, &l) in logp.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            action = i;
            break;
        }
    }
    Ok(SampledAction { action, logprob: logp[action], entropy: entropy(&logp) })
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, epsilon: f64) -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Argument("optimizer state shape mismatch".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}
