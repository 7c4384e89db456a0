//! Dense statevector simulator.
//!
//! Qubit `i` is bit `i` of the basis index (little-endian), so the bitstring
//! `b_0 b_1 ... b_{n-1}` maps to `sum_i b_i 2^i`. Rotations use the half-angle
//! convention `R_A(theta) = exp(-i theta A / 2)`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::problems::ProblemInstance;

/// Largest register the dense representation accepts.
pub const MAX_QUBITS: usize = 16;

/// A gate the simulator knows how to apply.
///
/// `H`, `Cz` and `PhaseZz` never appear in agent programs; they are used by the
/// QAOA circuit emitter and the transpiler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp {
    Rx {
        qubit: usize,
        angle: f64,
    },
    Ry {
        qubit: usize,
        angle: f64,
    },
    Rz {
        qubit: usize,
        angle: f64,
    },
    H {
        qubit: usize,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Cz {
        a: usize,
        b: usize,
    },
    /// `exp(-i angle/2 Z_a Z_b)`.
    PhaseZz {
        a: usize,
        b: usize,
        angle: f64,
    },
}

impl GateOp {
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            GateOp::Rx { qubit, .. } | GateOp::Ry { qubit, .. } | GateOp::Rz { qubit, .. } | GateOp::H { qubit } => {
                (qubit, None)
            }
            GateOp::Cnot { control, target } => (control, Some(target)),
            GateOp::Cz { a, b } | GateOp::PhaseZz { a, b, .. } => (a, Some(b)),
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        self.qubits().1.is_some()
    }

    /// Checks qubit indices against a register of `n` qubits.
    pub fn validate(&self, n: usize) -> Result<()> {
        let (q0, q1) = self.qubits();
        if q0 >= n {
            return Err(Error::Argument(format!("qubit {q0} out of range for {n} qubits")));
        }
        if let Some(q1) = q1 {
            if q1 >= n {
                return Err(Error::Argument(format!("qubit {q1} out of range for {n} qubits")));
            }
            if q0 == q1 {
                return Err(Error::Argument(format!("two-qubit gate on repeated qubit {q0}")));
            }
        }
        Ok(())
    }

    /// 2x2 unitary of a single-qubit gate in row-major order.
    pub fn single_qubit_matrix(&self) -> Option<[Complex64; 4]> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match *self {
            GateOp::Rx { angle, .. } => {
                let (s, co) = half_angle_sin_cos(angle);
                Some([c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
            }
            GateOp::Ry { angle, .. } => {
                let (s, co) = half_angle_sin_cos(angle);
                Some([c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
            }
            GateOp::Rz { angle, .. } => {
                let (s, co) = half_angle_sin_cos(angle);
                Some([c(co, -s), c(0.0, 0.0), c(0.0, 0.0), c(co, s)])
            }
            GateOp::H { .. } => {
                let h = FRAC_1_SQRT_2;
                Some([c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
            }
            _ => None,
        }
    }
}

/// `sin` and `cos` of `angle / 2`, exact (0 or +-1) when `angle` is a
/// multiple of pi so that pi rotations permute amplitudes without leakage.
fn half_angle_sin_cos(angle: f64) -> (f64, f64) {
    let k = (angle / std::f64::consts::PI).round();
    if (angle / std::f64::consts::PI - k).abs() < 1e-12 {
        return match (k as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        };
    }
    (angle / 2.0).sin_cos()
}

/// Renders an angle as a multiple of pi the way Quil listings do:
/// `0`, `pi`, `pi/4`, `3*pi/2`. Angles that are not multiples of pi/4 are
/// printed as plain decimals.
pub fn format_angle(angle: f64) -> String {
    let quarters = angle / (std::f64::consts::PI / 4.0);
    let rounded = quarters.round();
    if (quarters - rounded).abs() > 1e-9 {
        return format!("{angle}");
    }
    let q = rounded as i64;
    if q == 0 {
        return "0".to_string();
    }
    let sign = if q < 0 { "-" } else { "" };
    let q = q.abs();
    // reduce q/4
    let g = gcd(q, 4);
    let (num, den) = (q / g, 4 / g);
    let num_part = if num == 1 { "pi".to_string() } else { format!("{num}*pi") };
    if den == 1 {
        format!("{sign}{num_part}")
    } else {
        format!("{sign}{num_part}/{den}")
    }
}

/// Inverse of [`format_angle`]; also accepts any decimal literal.
pub fn parse_angle(text: &str) -> Result<f64> {
    let bad = || Error::Format(format!("cannot parse angle `{text}`"));
    let t = text.trim();
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t),
    };
    if !body.contains("pi") {
        return t.parse::<f64>().map_err(|_| bad());
    }
    let (num_part, den) = match body.split_once('/') {
        Some((a, d)) => (a, d.trim().parse::<f64>().map_err(|_| bad())?),
        None => (body, 1.0),
    };
    let num = match num_part.trim() {
        "pi" => 1.0,
        other => other.strip_suffix("*pi").ok_or_else(bad)?.trim().parse::<f64>().map_err(|_| bad())?,
    };
    if den == 0.0 {
        return Err(bad());
    }
    Ok(sign * num * std::f64::consts::PI / den)
}

impl std::str::FromStr for GateOp {
    type Err = Error;

    /// Parses the listing form produced by `Display`, e.g. `RX(pi/4) 2` or
    /// `CNOT 5 9`.
    fn from_str(line: &str) -> Result<Self> {
        let bad = |why: &str| Error::Format(format!("cannot parse gate `{line}`: {why}"));
        let line = line.trim();
        let (head, rest) = match line.find(|c: char| c == '(' || c.is_whitespace()) {
            Some(i) => line.split_at(i),
            None => (line, ""),
        };
        let (angle, rest) = if let Some(r) = rest.strip_prefix('(') {
            let close = r.find(')').ok_or_else(|| bad("missing `)`"))?;
            (Some(parse_angle(&r[..close])?), &r[close + 1..])
        } else {
            (None, rest)
        };
        let qubits = rest
            .split_whitespace()
            .map(|q| q.parse::<usize>().map_err(|_| bad("qubit is not an integer")))
            .collect::<Result<Vec<_>>>()?;
        let name = head.to_ascii_uppercase();
        match (name.as_str(), angle, qubits.as_slice()) {
            ("RX", Some(angle), &[qubit]) => Ok(GateOp::Rx { qubit, angle }),
            ("RY", Some(angle), &[qubit]) => Ok(GateOp::Ry { qubit, angle }),
            ("RZ", Some(angle), &[qubit]) => Ok(GateOp::Rz { qubit, angle }),
            ("H", None, &[qubit]) => Ok(GateOp::H { qubit }),
            ("CNOT", None, &[control, target]) => Ok(GateOp::Cnot { control, target }),
            ("CZ", None, &[a, b]) => Ok(GateOp::Cz { a, b }),
            ("PHASEZZ", Some(angle), &[a, b]) => Ok(GateOp::PhaseZz { a, b, angle }),
            _ => Err(bad("unknown gate or wrong operands")),
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GateOp::Rx { qubit, angle } => write!(f, "RX({}) {qubit}", format_angle(angle)),
            GateOp::Ry { qubit, angle } => write!(f, "RY({}) {qubit}", format_angle(angle)),
            GateOp::Rz { qubit, angle } => write!(f, "RZ({}) {qubit}", format_angle(angle)),
            GateOp::H { qubit } => write!(f, "H {qubit}"),
            GateOp::Cnot { control, target } => write!(f, "CNOT {control} {target}"),
            GateOp::Cz { a, b } => write!(f, "CZ {a} {b}"),
            GateOp::PhaseZz { a, b, angle } => write!(f, "PHASEZZ({}) {a} {b}", format_angle(angle)),
        }
    }
}

/// Decodes bit `i` of `index` into position `i` of the returned bitstring.
pub fn index_to_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((index >> i) & 1) as u8).collect()
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().enumerate().fold(0usize, |acc, (i, &b)| acc | ((b as usize & 1) << i))
}

/// `shots x n` matrix of measurement outcomes, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    /// Builds a matrix whose rows are the given basis indices.
    pub fn from_indices(indices: &[usize], cols: usize) -> Self {
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &k in indices {
            data.extend(index_to_bits(k, cols));
        }
        Self { rows: indices.len(), cols, data }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Argument("ragged bit matrix rows".into()));
        }
        if rows.iter().flatten().any(|&b| b > 1) {
            return Err(Error::Argument("bit matrix entries must be 0 or 1".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_index(&self, row: usize) -> usize {
        bits_to_index(self.row(row))
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
    /// Born probabilities, refreshed only by non-diagonal gates so that
    /// diagonal gates leave measurement statistics bit-for-bit unchanged.
    probs: Vec<f64>,
}

impl StateVector {
    /// The all-zeros register `|0...0>`.
    pub fn zero(n: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n) {
            return Err(Error::Config(format!("qubit count {n} outside supported range 1..={MAX_QUBITS}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        let mut probs = vec![0.0; 1 << n];
        probs[0] = 1.0;
        Ok(Self { n, amps, probs })
    }

    /// Builds a state from raw amplitudes. The caller is responsible for
    /// normalization.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::Argument(format!("amplitude length {len} is not 2^n, n >= 1")));
        }
        let n = len.trailing_zeros() as usize;
        if n > MAX_QUBITS {
            return Err(Error::Config(format!("{n} qubits exceeds {MAX_QUBITS}")));
        }
        let probs = amps.iter().map(|a| a.norm_sqr()).collect();
        Ok(Self { n, amps, probs })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    fn refresh_probabilities(&mut self) {
        for (p, a) in self.probs.iter_mut().zip(&self.amps) {
            *p = a.norm_sqr();
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n)?;
        match *gate {
            GateOp::Rz { qubit, angle } => self.apply_rz(qubit, angle),
            GateOp::Cnot { control, target } => {
                self.apply_cnot(control, target);
                self.refresh_probabilities();
            }
            GateOp::Cz { a, b } => self.apply_cz(a, b),
            GateOp::PhaseZz { a, b, angle } => self.apply_zz(a, b, angle),
            GateOp::Rx { qubit, .. } | GateOp::Ry { qubit, .. } | GateOp::H { qubit } => {
                let m = gate.single_qubit_matrix().expect("single-qubit gate");
                self.apply_single(qubit, &m);
                self.refresh_probabilities();
            }
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    fn apply_single(&mut self, qubit: usize, m: &[Complex64; 4]) {
        let mask = 1usize << qubit;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a0, a1) = (self.amps[i], self.amps[j]);
                self.amps[i] = m[0] * a0 + m[1] * a1;
                self.amps[j] = m[2] * a0 + m[3] * a1;
            }
        }
    }

    // Diagonal: probabilities are untouched by construction.
    fn apply_rz(&mut self, qubit: usize, angle: f64) {
        let mask = 1usize << qubit;
        let lo = Complex64::from_polar(1.0, -angle / 2.0);
        let hi = Complex64::from_polar(1.0, angle / 2.0);
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & mask == 0 { lo } else { hi };
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cm, tm) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let both = (1usize << a) | (1usize << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & both == both {
                *amp = -*amp;
            }
        }
    }

    fn apply_zz(&mut self, a: usize, b: usize, angle: f64) {
        let same = Complex64::from_polar(1.0, -angle / 2.0);
        let diff = Complex64::from_polar(1.0, angle / 2.0);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            let parity = ((i >> a) ^ (i >> b)) & 1;
            *amp *= if parity == 0 { same } else { diff };
        }
    }

    /// Multiplies each amplitude by `exp(-i gamma C(b))`, with `C` the
    /// instance cost.
    pub fn apply_phase_zz(&mut self, instance: &ProblemInstance, gamma: f64) -> Result<()> {
        self.check_instance(instance)?;
        let costs = instance.cost_table();
        for (amp, &c) in self.amps.iter_mut().zip(costs.iter()) {
            *amp *= Complex64::from_polar(1.0, -gamma * c);
        }
        Ok(())
    }

    /// `sum_b |amp_b|^2 C(b)`.
    pub fn exact_expectation(&self, instance: &ProblemInstance) -> Result<f64> {
        self.check_instance(instance)?;
        let costs = instance.cost_table();
        Ok(self.probs.iter().zip(costs.iter()).map(|(p, &c)| p * c).sum())
    }

    fn check_instance(&self, instance: &ProblemInstance) -> Result<()> {
        if instance.n() != self.n {
            return Err(Error::Argument(format!(
                "instance has {} variables, register has {} qubits",
                instance.n(),
                self.n
            )));
        }
        Ok(())
    }

    /// Draws `shots` basis indices i.i.d. from the Born distribution.
    pub fn sample_indices<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for &p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let total = acc;
        (0..shots)
            .map(|_| {
                let u: f64 = rng.gen::<f64>() * total;
                let k = cdf.partition_point(|&c| c <= u);
                // guard against drawing a zero-probability tail state through rounding
                let mut k = k.min(cdf.len() - 1);
                while k > 0 && self.probs[k] == 0.0 {
                    k -= 1;
                }
                k
            })
            .collect()
    }

    /// `shots x n` measurement matrix; column `j` holds qubit `j`.
    pub fn sample_bitstrings<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Result<BitMatrix> {
        if shots == 0 {
            return Err(Error::Argument("shots must be at least 1".into()));
        }
        Ok(BitMatrix::from_indices(&self.sample_indices(shots, rng), self.n))
    }
}
