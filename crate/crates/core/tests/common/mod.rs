#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use qprl::env::{decode_action, num_actions};
use qprl::problems::{ProblemInstance, ProblemKind};
use qprl::statevec::{GateOp, StateVector};

/// Objective written straight from the problem definitions, independent of
/// the library's double-sum implementation.
pub fn oracle_cost(inst: &ProblemInstance, index: usize) -> f64 {
    let n = inst.n();
    let bit = |i: usize| (index >> i) & 1;
    let mut total = 0.0;
    match inst.kind() {
        ProblemKind::MaxCut => {
            for i in 0..n {
                for j in (i + 1)..n {
                    if bit(i) != bit(j) {
                        total += inst.weight(i, j);
                    }
                }
            }
        }
        ProblemKind::MaxQp => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let zi = if bit(i) == 0 { 1.0 } else { -1.0 };
                        let zj = if bit(j) == 0 { 1.0 } else { -1.0 };
                        total += inst.weight(i, j) * zi * zj;
                    }
                }
            }
        }
        ProblemKind::Qubo => {
            let ones: Vec<usize> = (0..n).filter(|&i| bit(i) == 1).collect();
            for &i in &ones {
                for &j in &ones {
                    total += inst.weight(i, j);
                }
            }
        }
    }
    total
}

/// Minimum and maximum of [`oracle_cost`], visiting bitstrings in Gray-code
/// order.
pub fn oracle_extremes(inst: &ProblemInstance) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..(1usize << inst.n()) {
        let c = oracle_cost(inst, k ^ (k >> 1));
        lo = lo.min(c);
        hi = hi.max(c);
    }
    (lo, hi)
}

/// Haar-ish random state from i.i.d. complex normals.
pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> StateVector {
    let mut amps: Vec<Complex64> =
        (0..1usize << n).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(amps).unwrap()
}

/// `len` uniformly drawn actions decoded to gates.
pub fn random_program<R: Rng>(n: usize, len: usize, rng: &mut R) -> Vec<GateOp> {
    (0..len).map(|_| decode_action(rng.gen_range(0..num_actions(n)), n).unwrap()).collect()
}

/// The first generated program listed for the trained model, with its reward
/// trace.
pub const FIRST_PROGRAM: [(&str, f64); 13] = [
    ("RX(pi) 8", 0.497569),
    ("RY(pi) 1", 0.503288),
    ("RY(pi) 0", 0.691885),
    ("RX(pi) 9", 0.687903),
    ("RX(pi/4) 2", 0.676666),
    ("RX(pi/4) 2", 0.669175),
    ("RX(pi/4) 2", 0.661683),
    ("RX(pi/4) 2", 0.650446),
    ("RX(pi/4) 2", 0.654192),
    ("RY(pi) 4", 0.713833),
    ("RX(pi) 5", 0.723166),
    ("RX(pi/4) 2", 0.683561),
    ("CNOT 5 9", 0.929027),
];
