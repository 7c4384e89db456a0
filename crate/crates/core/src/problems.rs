//! Random MaxCut / MaxQP / QUBO instances, their cost functions, brute-force
//! extremes and the flat upper-triangular weight encoding fed to the policy.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevec::MAX_QUBITS;

/// Observation layout size used by the default experiment.
pub const DEFAULT_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    MaxCut,
    MaxQp,
    Qubo,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::MaxCut, ProblemKind::MaxQp, ProblemKind::Qubo];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::MaxCut => "maxcut",
            ProblemKind::MaxQp => "maxqp",
            ProblemKind::Qubo => "qubo",
        }
    }

    pub fn has_diagonal(&self) -> bool {
        matches!(self, ProblemKind::Qubo)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "maxcut" => Ok(ProblemKind::MaxCut),
            "maxqp" => Ok(ProblemKind::MaxQp),
            "qubo" => Ok(ProblemKind::Qubo),
            other => Err(Error::Argument(format!("unknown problem kind `{other}`"))),
        }
    }
}

/// Number of upper-triangular entries (diagonal included) of an `n x n` matrix.
pub fn triangle_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// A problem instance: symmetric weights plus lazily computed cost data.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    kind: ProblemKind,
    n: usize,
    /// Row-major `n x n`.
    w: Vec<f64>,
    seed: u64,
    extremes: OnceLock<(f64, f64)>,
    costs: OnceLock<Vec<f64>>,
}

impl PartialEq for ProblemInstance {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.n == other.n && self.w == other.w && self.seed == other.seed
    }
}

fn check_n(n: usize) -> Result<()> {
    if !(1..=MAX_QUBITS).contains(&n) {
        return Err(Error::Config(format!("variable count {n} outside supported range 1..={MAX_QUBITS}")));
    }
    Ok(())
}

impl ProblemInstance {
    /// Builds an instance from a full row-major matrix, checking the
    /// structural constraints of `kind`.
    pub fn from_matrix(kind: ProblemKind, n: usize, w: Vec<f64>, seed: u64) -> Result<Self> {
        check_n(n)?;
        if w.len() != n * n {
            return Err(Error::Argument(format!("weight matrix has {} entries, expected {}", w.len(), n * n)));
        }
        for i in 0..n {
            for j in 0..n {
                let x = w[i * n + j];
                if !x.is_finite() {
                    return Err(Error::Argument(format!("non-finite weight at ({i},{j})")));
                }
                if x != w[j * n + i] {
                    return Err(Error::Argument(format!("weight matrix not symmetric at ({i},{j})")));
                }
            }
            if !kind.has_diagonal() && w[i * n + i] != 0.0 {
                return Err(Error::Argument(format!("{kind} instance has nonzero diagonal at {i}")));
            }
        }
        if kind == ProblemKind::MaxCut && w.iter().any(|&x| x < 0.0) {
            return Err(Error::Argument("maxcut weights must be nonnegative".into()));
        }
        Ok(Self { kind, n, w, seed, extremes: OnceLock::new(), costs: OnceLock::new() })
    }

    /// Builds an instance from its upper triangle (row-major, diagonal included).
    pub fn from_upper(kind: ProblemKind, n: usize, upper: &[f64], seed: u64) -> Result<Self> {
        check_n(n)?;
        if upper.len() != triangle_len(n) {
            return Err(Error::Argument(format!(
                "upper triangle has {} entries, expected {}",
                upper.len(),
                triangle_len(n)
            )));
        }
        let mut w = vec![0.0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i..n {
                let x = *it.next().expect("length checked");
                w[i * n + j] = x;
                w[j * n + i] = x;
            }
        }
        Self::from_matrix(kind, n, w, seed)
    }

    /// Draws an instance from `rng`. `seed` is recorded as the instance
    /// identity but not used for sampling.
    pub fn generate_with<R: Rng + ?Sized>(kind: ProblemKind, n: usize, seed: u64, rng: &mut R) -> Result<Self> {
        check_n(n)?;
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let x = match kind {
                    ProblemKind::MaxCut if i < j => {
                        if rng.gen::<f64>() < 0.5 {
                            rng.gen::<f64>()
                        } else {
                            0.0
                        }
                    }
                    ProblemKind::MaxQp if i < j => rng.gen_range(-1.0..1.0),
                    ProblemKind::Qubo => rng.gen_range(-1.0..1.0),
                    _ => 0.0,
                };
                w[i * n + j] = x;
                w[j * n + i] = x;
            }
        }
        Self::from_matrix(kind, n, w, seed)
    }

    /// Deterministic generation: the same `(kind, n, seed)` gives the same weights.
    pub fn generate(kind: ProblemKind, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::generate_with(kind, n, seed, &mut rng)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn upper(&self) -> Vec<f64> {
        let n = self.n;
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| self.w[i * n + j]).collect()
    }

    /// Returns a copy with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_matrix(self.kind, self.n, self.w.iter().map(|x| x * c).collect(), self.seed)
    }

    fn check_bits(&self, bits: &[u8]) -> Result<()> {
        if bits.len() != self.n {
            return Err(Error::Argument(format!("bitstring has length {}, expected {}", bits.len(), self.n)));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Argument("bitstring entries must be 0 or 1".into()));
        }
        Ok(())
    }

    /// Objective value of a bitstring under the full double-sum convention.
    pub fn cost(&self, bits: &[u8]) -> Result<f64> {
        self.check_bits(bits)?;
        Ok(self.cost_unchecked(bits))
    }

    fn cost_unchecked(&self, bits: &[u8]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        match self.kind {
            ProblemKind::MaxCut => {
                for (i, &bi) in bits.iter().enumerate() {
                    let zi = 1.0 - 2.0 * bi as f64;
                    for (&w, &bj) in self.w[i * n..(i + 1) * n].iter().zip(bits) {
                        let zj = 1.0 - 2.0 * bj as f64;
                        total += w * (1.0 - zi * zj) / 2.0;
                    }
                }
                total / 2.0
            }
            ProblemKind::MaxQp => {
                for (i, &bi) in bits.iter().enumerate() {
                    let zi = 1.0 - 2.0 * bi as f64;
                    for (&w, &bj) in self.w[i * n..(i + 1) * n].iter().zip(bits) {
                        let zj = 1.0 - 2.0 * bj as f64;
                        total += w * zi * zj;
                    }
                }
                total
            }
            ProblemKind::Qubo => {
                for (i, _) in bits.iter().enumerate().filter(|b| *b.1 == 1) {
                    for (&w, _) in self.w[i * n..(i + 1) * n].iter().zip(bits).filter(|p| *p.1 == 1) {
                        total += w;
                    }
                }
                total
            }
        }
    }

    /// Cost of every basis index, `C(b)` at position `index(b)`.
    pub fn cost_table(&self) -> &[f64] {
        self.costs.get_or_init(|| {
            let mut bits = vec![0u8; self.n];
            (0..1usize << self.n)
                .map(|k| {
                    for (i, b) in bits.iter_mut().enumerate() {
                        *b = ((k >> i) & 1) as u8;
                    }
                    self.cost_unchecked(&bits)
                })
                .collect()
        })
    }

    /// `(m, M)`: minimum and maximum cost over all bitstrings.
    pub fn extremes(&self) -> (f64, f64) {
        *self.extremes.get_or_init(|| {
            self.cost_table().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| (lo.min(c), hi.max(c)))
        })
    }

    pub fn cached_extremes(&self) -> Option<(f64, f64)> {
        self.extremes.get().copied()
    }

    /// Installs externally computed extremes. Ignored if already set.
    fn set_extremes(&self, m: f64, big_m: f64) {
        let _ = self.extremes.set((m, big_m));
    }

    /// Maps a raw cost into `[0, 1]` using the instance extremes. A degenerate
    /// instance with `M == m` scores every bitstring as 1.
    pub fn normalize(&self, cost: f64) -> f64 {
        let (m, big_m) = self.extremes();
        if big_m - m <= 0.0 {
            1.0
        } else {
            ((cost - m) / (big_m - m)).clamp(0.0, 1.0)
        }
    }

    pub fn normalized_cost(&self, bits: &[u8]) -> Result<f64> {
        self.check_bits(bits)?;
        Ok(self.normalize(self.cost_table()[crate::statevec::bits_to_index(bits)]))
    }

    /// Normalized cost of a basis index.
    pub fn normalized_cost_index(&self, index: usize) -> f64 {
        self.normalize(self.cost_table()[index])
    }

    /// Equivalent QUBO weights `q` and constant `offset` with
    /// `C(x) = offset + sum_{i,j} q_ij x_i x_j` for every bitstring `x`.
    pub fn qubo_form(&self) -> (Vec<f64>, f64) {
        let n = self.n;
        let degree: Vec<f64> = (0..n).map(|i| (0..n).map(|j| self.w[i * n + j]).sum()).collect();
        let mut q = vec![0.0; n * n];
        match self.kind {
            ProblemKind::Qubo => (self.w.clone(), 0.0),
            ProblemKind::MaxCut => {
                // (1 - z_i z_j)/2 = x_i + x_j - 2 x_i x_j
                for i in 0..n {
                    for j in 0..n {
                        q[i * n + j] = if i == j { degree[i] } else { -self.w[i * n + j] };
                    }
                }
                (q, 0.0)
            }
            ProblemKind::MaxQp => {
                // z_i z_j = 1 - 2 x_i - 2 x_j + 4 x_i x_j
                let total: f64 = self.w.iter().sum();
                for i in 0..n {
                    for j in 0..n {
                        q[i * n + j] = if i == j { -4.0 * degree[i] } else { 4.0 * self.w[i * n + j] };
                    }
                }
                (q, total)
            }
        }
    }

    /// The equivalent QUBO instance (costs differ by `qubo_form().1`).
    pub fn to_qubo(&self) -> Result<(ProblemInstance, f64)> {
        let (q, offset) = self.qubo_form();
        Ok((ProblemInstance::from_matrix(ProblemKind::Qubo, self.n, q, self.seed)?, offset))
    }

    /// Spin form `C = constant + sum_i h_i z_i + sum_{i<j} J_ij z_i z_j` with
    /// `z = 1 - 2x`. Zero couplings are omitted, and MaxCut / MaxQP have no
    /// linear terms.
    pub fn ising_form(&self) -> IsingForm {
        let n = self.n;
        let mut constant = 0.0;
        let mut linear = vec![0.0; n];
        let mut coupling = Vec::new();
        for i in 0..n {
            if self.kind == ProblemKind::Qubo {
                // w_ii x_i = w_ii (1 - z_i)/2
                let d = self.w[i * n + i];
                constant += d / 2.0;
                linear[i] -= d / 2.0;
            }
            for j in (i + 1)..n {
                let w = self.w[i * n + j];
                if w == 0.0 {
                    continue;
                }
                let c = match self.kind {
                    // both orders of (1 - z_i z_j)/2, halved
                    ProblemKind::MaxCut => {
                        constant += w / 2.0;
                        -w / 2.0
                    }
                    ProblemKind::MaxQp => 2.0 * w,
                    // 2 w_ij x_i x_j = w_ij (1 - z_i - z_j + z_i z_j)/2
                    ProblemKind::Qubo => {
                        constant += w / 2.0;
                        linear[i] -= w / 2.0;
                        linear[j] -= w / 2.0;
                        w / 2.0
                    }
                };
                coupling.push((i, j, c));
            }
        }
        IsingForm { constant, linear, coupling }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingForm {
    pub constant: f64,
    pub linear: Vec<f64>,
    /// `(i, j, J_ij)` with `i < j`, zero couplings omitted.
    pub coupling: Vec<(usize, usize, f64)>,
}

impl IsingForm {
    pub fn evaluate(&self, bits: &[u8]) -> f64 {
        let z = |i: usize| 1.0 - 2.0 * bits[i] as f64;
        self.constant
            + self.linear.iter().enumerate().map(|(i, h)| h * z(i)).sum::<f64>()
            + self.coupling.iter().map(|&(i, j, c)| c * z(i) * z(j)).sum::<f64>()
    }
}

/// Flat upper-triangular weight encoding, row-major with the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WTilde {
    pub values: Vec<f64>,
}

impl WTilde {
    /// Encodes `instance` into the layout for `layout_n` variables. The
    /// diagonal slots are present for every kind (zero for MaxCut / MaxQP) so
    /// mixed-kind datasets share one input shape.
    pub fn encode(instance: &ProblemInstance, layout_n: usize) -> Result<Self> {
        if instance.n() != layout_n {
            return Err(Error::Config(format!(
                "observation layout is fixed to {layout_n} variables, instance has {}",
                instance.n()
            )));
        }
        Ok(Self { values: instance.upper() })
    }

    pub fn decode(&self, kind: ProblemKind, n: usize, seed: u64) -> Result<ProblemInstance> {
        ProblemInstance::from_upper(kind, n, &self.values, seed)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Encoding for the default ten-variable layout.
pub fn encode_wtilde(instance: &ProblemInstance) -> Result<WTilde> {
    WTilde::encode(instance, DEFAULT_N)
}

/// One line of an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub kind: ProblemKind,
    pub n: usize,
    pub upper: Vec<f64>,
    pub seed: u64,
    pub m: Option<f64>,
    #[serde(rename = "M")]
    pub big_m: Option<f64>,
}

impl From<&ProblemInstance> for InstanceRecord {
    fn from(inst: &ProblemInstance) -> Self {
        let ext = inst.cached_extremes();
        Self {
            kind: inst.kind,
            n: inst.n,
            upper: inst.upper(),
            seed: inst.seed,
            m: ext.map(|e| e.0),
            big_m: ext.map(|e| e.1),
        }
    }
}

impl TryFrom<InstanceRecord> for ProblemInstance {
    type Error = Error;

    fn try_from(rec: InstanceRecord) -> Result<Self> {
        let inst = ProblemInstance::from_upper(rec.kind, rec.n, &rec.upper, rec.seed)?;
        match (rec.m, rec.big_m) {
            (Some(m), Some(big_m)) => {
                if big_m < m {
                    return Err(Error::Format(format!("instance {}: M < m", rec.seed)));
                }
                inst.set_extremes(m, big_m);
            }
            (None, None) => {}
            _ => return Err(Error::Format(format!("instance {}: only one of m, M present", rec.seed))),
        }
        Ok(inst)
    }
}

pub fn write_instances<W: Write>(mut out: W, instances: &[ProblemInstance]) -> Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut out, &InstanceRecord::from(inst))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(input: R) -> Result<Vec<ProblemInstance>> {
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InstanceRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        out.push(rec.try_into()?);
    }
    Ok(out)
}

pub fn load_instances(path: &std::path::Path) -> Result<Vec<ProblemInstance>> {
    let f = std::fs::File::open(path)?;
    read_instances(std::io::BufReader::new(f))
}

pub fn save_instances(path: &std::path::Path, instances: &[ProblemInstance]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_instances(&mut w, instances)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::index_to_bits;

    fn single_edge(n: usize) -> ProblemInstance {
        let mut w = vec![0.0; n * n];
        w[1] = 1.0;
        w[n] = 1.0;
        ProblemInstance::from_matrix(ProblemKind::MaxCut, n, w, 0).unwrap()
    }

    #[test]
    fn generated_maxcut_structure() {
        let mut nonzero = 0;
        for seed in 0..200 {
            let inst = ProblemInstance::generate(ProblemKind::MaxCut, 10, seed).unwrap();
            for i in 0..10 {
                assert_eq!(inst.weight(i, i), 0.0);
                for j in 0..10 {
                    assert_eq!(inst.weight(i, j), inst.weight(j, i));
                    assert!(inst.weight(i, j) >= 0.0 && inst.weight(i, j) < 1.0);
                    if i < j && inst.weight(i, j) != 0.0 {
                        nonzero += 1;
                    }
                }
            }
        }
        // 9000 Bernoulli(0.5) trials, sigma = 47.4
        let frac = nonzero as f64 / 9000.0;
        assert!((frac - 0.5).abs() < 4.0 * 0.00527, "edge fraction {frac}");
    }

    #[test]
    fn generated_maxqp_and_qubo_ranges() {
        let qp = ProblemInstance::generate(ProblemKind::MaxQp, 10, 5).unwrap();
        assert!((0..10).all(|i| qp.weight(i, i) == 0.0));
        assert!(qp.weights().iter().all(|x| (-1.0..1.0).contains(x)));
        let qubo = ProblemInstance::generate(ProblemKind::Qubo, 10, 5).unwrap();
        assert!((0..10).any(|i| qubo.weight(i, i) != 0.0));
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in ProblemKind::ALL {
            let a = ProblemInstance::generate(kind, 10, 42).unwrap();
            let b = ProblemInstance::generate(kind, 10, 42).unwrap();
            assert_eq!(a.weights(), b.weights());
        }
        assert!(matches!(ProblemInstance::generate(ProblemKind::Qubo, 17, 0), Err(Error::Config(_))));
    }

    #[test]
    fn cost_examples() {
        let inst = single_edge(10);
        let mut b = vec![0u8; 10];
        b[0] = 1;
        assert_eq!(inst.cost(&b).unwrap(), 1.0);
        assert_eq!(inst.extremes(), (0.0, 1.0));

        let qubo = ProblemInstance::generate(ProblemKind::Qubo, 10, 9).unwrap();
        assert_eq!(qubo.cost(&[0; 10]).unwrap(), 0.0);

        let qp = ProblemInstance::generate(ProblemKind::MaxQp, 10, 9).unwrap();
        let upper_sum: f64 =
            (0..10).flat_map(|i| ((i + 1)..10).map(move |j| (i, j))).map(|(i, j)| qp.weight(i, j)).sum();
        assert!((qp.cost(&[0; 10]).unwrap() - 2.0 * upper_sum).abs() < 1e-12);

        assert!(matches!(inst.cost(&[0; 9]), Err(Error::Argument(_))));
    }

    #[test]
    fn maxcut_minimum_is_empty_cut() {
        for seed in 0..20 {
            let inst = ProblemInstance::generate(ProblemKind::MaxCut, 8, seed).unwrap();
            assert_eq!(inst.extremes().0, 0.0);
            assert_eq!(inst.cost(&[0; 8]).unwrap(), 0.0);
        }
    }

    #[test]
    fn normalized_endpoints_and_degenerate() {
        let inst = ProblemInstance::generate(ProblemKind::MaxQp, 6, 3).unwrap();
        let table = inst.cost_table();
        let (m, big_m) = inst.extremes();
        let argmax = table.iter().position(|&c| c == big_m).unwrap();
        let argmin = table.iter().position(|&c| c == m).unwrap();
        assert_eq!(inst.normalized_cost(&index_to_bits(argmax, 6)).unwrap(), 1.0);
        assert_eq!(inst.normalized_cost(&index_to_bits(argmin, 6)).unwrap(), 0.0);

        let zero = ProblemInstance::from_matrix(ProblemKind::Qubo, 4, vec![0.0; 16], 0).unwrap();
        assert_eq!(zero.extremes(), (0.0, 0.0));
        assert_eq!(zero.normalized_cost(&[1, 0, 1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn structural_checks() {
        let mut w = vec![0.0; 4];
        w[1] = 1.0;
        assert!(ProblemInstance::from_matrix(ProblemKind::Qubo, 2, w, 0).is_err());
        assert!(ProblemInstance::from_matrix(ProblemKind::MaxCut, 2, vec![0.0, -1.0, -1.0, 0.0], 0).is_err());
        assert!(ProblemInstance::from_matrix(ProblemKind::MaxQp, 2, vec![1.0, 0.0, 0.0, 0.0], 0).is_err());
    }

    #[test]
    fn wtilde_layout() {
        let inst = ProblemInstance::generate(ProblemKind::MaxCut, 10, 1).unwrap();
        let wt = encode_wtilde(&inst).unwrap();
        assert_eq!(wt.len(), 55);
        let mut pos = 0;
        for i in 0..10 {
            assert_eq!(wt.values[pos], 0.0);
            pos += 10 - i;
        }
        let mut w = vec![0.0; 100];
        w[0] = 0.3;
        let qubo = ProblemInstance::from_matrix(ProblemKind::Qubo, 10, w, 0).unwrap();
        assert_eq!(encode_wtilde(&qubo).unwrap().values[0], 0.3);
        let small = ProblemInstance::generate(ProblemKind::Qubo, 6, 0).unwrap();
        assert!(matches!(encode_wtilde(&small), Err(Error::Config(_))));
        assert_eq!(WTilde::encode(&small, 6).unwrap().len(), 21);
    }

    #[test]
    fn ising_form_matches_cost() {
        for kind in ProblemKind::ALL {
            for seed in 0..5 {
                let inst = ProblemInstance::generate(kind, 6, seed).unwrap();
                let ising = inst.ising_form();
                for k in 0..64 {
                    let b = index_to_bits(k, 6);
                    assert!((ising.evaluate(&b) - inst.cost(&b).unwrap()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn jsonl_roundtrip_keeps_extremes() {
        let a = ProblemInstance::generate(ProblemKind::Qubo, 5, 77).unwrap();
        a.extremes();
        let b = ProblemInstance::generate(ProblemKind::MaxCut, 5, 78).unwrap();
        let mut buf = Vec::new();
        write_instances(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("{\"kind\":\"qubo\",\"n\":5,\"upper\":["));
        assert!(text.lines().nth(1).unwrap().ends_with("\"m\":null,\"M\":null}"));
        let back = read_instances(&buf[..]).unwrap();
        assert_eq!(back, vec![a.clone(), b]);
        assert_eq!(back[0].cached_extremes(), a.cached_extremes());
        assert!(back[1].cached_extremes().is_none());
    }
}
