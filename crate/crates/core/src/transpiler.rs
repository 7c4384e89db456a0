//! Decomposition into the native gate set `{CZ, RZ(theta), RX(+pi/2), RX(-pi/2)}`
//! on an all-to-all topology, used for the compiled-length metric.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::statevec::{format_angle, GateOp, StateVector};

const ANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NativeGate {
    Rz {
        qubit: usize,
        angle: f64,
    },
    /// `RX(+pi/2)`.
    RxPlus {
        qubit: usize,
    },
    /// `RX(-pi/2)`.
    RxMinus {
        qubit: usize,
    },
    Cz {
        a: usize,
        b: usize,
    },
}

impl NativeGate {
    pub fn to_gate(&self) -> GateOp {
        match *self {
            NativeGate::Rz { qubit, angle } => GateOp::Rz { qubit, angle },
            NativeGate::RxPlus { qubit } => GateOp::Rx { qubit, angle: FRAC_PI_2 },
            NativeGate::RxMinus { qubit } => GateOp::Rx { qubit, angle: -FRAC_PI_2 },
            NativeGate::Cz { a, b } => GateOp::Cz { a, b },
        }
    }
}

impl fmt::Display for NativeGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NativeGate::Rz { qubit, angle } => write!(f, "RZ({}) {qubit}", format_angle(angle)),
            NativeGate::RxPlus { qubit } => write!(f, "RX(pi/2) {qubit}"),
            NativeGate::RxMinus { qubit } => write!(f, "RX(-pi/2) {qubit}"),
            NativeGate::Cz { a, b } => write!(f, "CZ {a} {b}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NativeProgram {
    pub gates: Vec<NativeGate>,
    /// Index of the source gate each native gate came from.
    pub provenance: Vec<usize>,
}

impl NativeProgram {
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn to_gates(&self) -> Vec<GateOp> {
        self.gates.iter().map(NativeGate::to_gate).collect()
    }

    pub fn render(&self) -> Vec<String> {
        self.gates.iter().map(ToString::to_string).collect()
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if (TAU - w).abs() < ANGLE_TOL {
        0.0
    } else {
        w
    }
}

fn is_multiple_of_tau(a: f64) -> bool {
    let w = a.rem_euclid(TAU);
    w < ANGLE_TOL || TAU - w < ANGLE_TOL
}

/// ZYZ Euler angles `(phi, theta, lambda)` with `U ~ RZ(phi) RY(theta) RZ(lambda)`
/// up to global phase.
fn zyz_angles(u: &[Complex64; 4]) -> (f64, f64, f64) {
    let det = u[0] * u[3] - u[1] * u[2];
    let v: Vec<Complex64> = u.iter().map(|x| x / det.sqrt()).collect();
    let theta = 2.0 * v[2].norm().atan2(v[0].norm());
    // V00 = e^{-i(phi+lambda)/2} cos, V10 = e^{i(phi-lambda)/2} sin
    let sum = if v[0].norm() > 1e-12 { -2.0 * v[0].arg() } else { 0.0 };
    let diff = if v[2].norm() > 1e-12 { 2.0 * v[2].arg() } else { 0.0 };
    ((sum + diff) / 2.0, theta, (sum - diff) / 2.0)
}

type AngleKey = (u8, u64);
type EulerCache = Mutex<HashMap<AngleKey, (f64, f64, f64)>>;

fn euler_cache() -> &'static EulerCache {
    static CACHE: OnceLock<EulerCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Template angles `(a, b, c)` for `RZ(a) RXp RZ(b) RXp RZ(c)` in time order.
fn zxzxz_angles(gate: &GateOp) -> (f64, f64, f64) {
    let key = match *gate {
        GateOp::Rx { angle, .. } => (0u8, angle.to_bits()),
        GateOp::Ry { angle, .. } => (1u8, angle.to_bits()),
        _ => (2u8, 0),
    };
    let solve = || {
        let m = gate.single_qubit_matrix().expect("single-qubit gate");
        let (phi, theta, lambda) = zyz_angles(&m);
        // RZ(phi) RY(theta) RZ(lambda) ~ RZ(phi + pi) SX RZ(theta + pi) SX RZ(lambda)
        (wrap_angle(lambda), wrap_angle(theta + PI), wrap_angle(phi + PI))
    };
    if key.0 == 2 {
        return solve();
    }
    let mut cache = euler_cache().lock().expect("cache poisoned");
    *cache.entry(key).or_insert_with(solve)
}

fn hadamard(qubit: usize) -> [NativeGate; 3] {
    [
        NativeGate::Rz { qubit, angle: FRAC_PI_2 },
        NativeGate::RxPlus { qubit },
        NativeGate::Rz { qubit, angle: FRAC_PI_2 },
    ]
}

/// Native-gate expansion of a single gate, equal to it up to global phase.
pub fn decompose_gate(gate: &GateOp) -> Result<Vec<NativeGate>> {
    Ok(match *gate {
        GateOp::Rz { qubit, angle } => vec![NativeGate::Rz { qubit, angle }],
        GateOp::Rx { qubit, angle } if is_multiple_of_tau(angle - FRAC_PI_2) => vec![NativeGate::RxPlus { qubit }],
        GateOp::Rx { qubit, angle } if is_multiple_of_tau(angle + FRAC_PI_2) => vec![NativeGate::RxMinus { qubit }],
        GateOp::Rx { qubit, .. } | GateOp::Ry { qubit, .. } => {
            let (a, b, c) = zxzxz_angles(gate);
            vec![
                NativeGate::Rz { qubit, angle: a },
                NativeGate::RxPlus { qubit },
                NativeGate::Rz { qubit, angle: b },
                NativeGate::RxPlus { qubit },
                NativeGate::Rz { qubit, angle: c },
            ]
        }
        GateOp::H { qubit } => hadamard(qubit).to_vec(),
        GateOp::Cnot { control, target } => {
            let mut out = hadamard(target).to_vec();
            out.push(NativeGate::Cz { a: control, b: target });
            out.extend(hadamard(target));
            out
        }
        GateOp::Cz { a, b } => vec![NativeGate::Cz { a, b }],
        GateOp::PhaseZz { .. } => {
            return Err(Error::Argument(format!("no native decomposition for `{gate}`")));
        }
    })
}

/// Decomposes every gate, then runs one peephole pass that merges RZ gates
/// adjacent on the same qubit wire and drops RZ rotations by multiples of 2 pi.
pub fn transpile(program: &[GateOp]) -> Result<NativeProgram> {
    let mut expanded = Vec::new();
    for (i, g) in program.iter().enumerate() {
        expanded.extend(decompose_gate(g)?.into_iter().map(|n| (n, i)));
    }
    Ok(peephole(expanded))
}

fn peephole(gates: Vec<(NativeGate, usize)>) -> NativeProgram {
    let mut out: Vec<Option<(NativeGate, usize)>> = Vec::with_capacity(gates.len());
    // live gate indices touching each qubit, most recent last
    let mut wires: HashMap<usize, Vec<usize>> = HashMap::new();
    for (g, src) in gates {
        match g {
            NativeGate::Rz { qubit, angle } => {
                let wire = wires.entry(qubit).or_default();
                let prev = wire.last().copied();
                if let Some(Some((NativeGate::Rz { angle: prev_angle, .. }, _))) = prev.map(|i| out[i]) {
                    let i = prev.expect("checked");
                    let merged = prev_angle + angle;
                    if is_multiple_of_tau(merged) {
                        out[i] = None;
                        wire.pop();
                    } else if let Some((NativeGate::Rz { angle: a, .. }, _)) = out[i].as_mut() {
                        *a = wrap_angle(merged);
                    }
                } else if !is_multiple_of_tau(angle) {
                    wire.push(out.len());
                    out.push(Some((g, src)));
                }
            }
            NativeGate::RxPlus { qubit } | NativeGate::RxMinus { qubit } => {
                wires.entry(qubit).or_default().push(out.len());
                out.push(Some((g, src)));
            }
            NativeGate::Cz { a, b } => {
                wires.entry(a).or_default().push(out.len());
                wires.entry(b).or_default().push(out.len());
                out.push(Some((g, src)));
            }
        }
    }
    let (gates, provenance) = out.into_iter().flatten().unzip();
    NativeProgram { gates, provenance }
}

/// Number of native instructions after transpilation.
pub fn compiled_length(program: &[GateOp]) -> Result<usize> {
    Ok(transpile(program)?.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivalenceMode {
    /// Compare full `2^n x 2^n` unitaries (n <= 4).
    Unitary,
    /// Compare output states on random product-state inputs.
    Statevector,
}

pub const EQUIVALENCE_TOL: f64 = 1e-9;
const PRODUCT_INPUTS: usize = 8;

fn run(program: &[GateOp], mut state: StateVector) -> Result<StateVector> {
    state.apply_all(program)?;
    Ok(state)
}

/// Whether two programs implement the same operation up to a global phase.
pub fn verify_equivalence(a: &[GateOp], b: &[GateOp], n: usize, mode: EquivalenceMode) -> Result<bool> {
    match mode {
        EquivalenceMode::Unitary => {
            if n > 4 {
                return Err(Error::Argument(format!("full-unitary check limited to 4 qubits, got {n}")));
            }
            let dim = 1usize << n;
            let mut phase: Option<Complex64> = None;
            for k in 0..dim {
                let mut basis = vec![Complex64::new(0.0, 0.0); dim];
                basis[k] = Complex64::new(1.0, 0.0);
                let ua = run(a, StateVector::from_amplitudes(basis.clone())?)?;
                let ub = run(b, StateVector::from_amplitudes(basis)?)?;
                let (ca, cb) = (ua.amplitudes(), ub.amplitudes());
                if phase.is_none() {
                    let (idx, _) = ca
                        .iter()
                        .enumerate()
                        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
                        .expect("non-empty column");
                    if cb[idx].norm() < 1e-12 {
                        return Ok(false);
                    }
                    let p = cb[idx] / ca[idx];
                    phase = Some(p / p.norm());
                }
                let p = phase.expect("set above");
                if ca.iter().zip(cb).any(|(x, y)| (p * x - y).norm() > EQUIVALENCE_TOL) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        EquivalenceMode::Statevector => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_u64 ^ n as u64);
            for _ in 0..PRODUCT_INPUTS {
                let prep = random_product_state(n, &mut rng);
                let sa = run(a, run(&prep, StateVector::zero(n)?)?)?;
                let sb = run(b, run(&prep, StateVector::zero(n)?)?)?;
                if sa.inner(&sb).norm() < 1.0 - EQUIVALENCE_TOL {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Gates preparing a random product state from `|0...0>`.
pub fn random_product_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<GateOp> {
    (0..n)
        .flat_map(|q| {
            [
                GateOp::Ry { qubit: q, angle: rng.gen_range(0.0..PI) },
                GateOp::Rz { qubit: q, angle: rng.gen_range(0.0..TAU) },
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn natives(gs: &[NativeGate]) -> Vec<GateOp> {
        gs.iter().map(NativeGate::to_gate).collect()
    }

    #[test]
    fn native_passthrough() {
        let g = GateOp::Rz { qubit: 0, angle: 3.0 * PI / 2.0 };
        assert_eq!(decompose_gate(&g).unwrap(), vec![NativeGate::Rz { qubit: 0, angle: 3.0 * PI / 2.0 }]);
        let g = GateOp::Rx { qubit: 1, angle: PI / 2.0 };
        assert_eq!(decompose_gate(&g).unwrap(), vec![NativeGate::RxPlus { qubit: 1 }]);
        let g = GateOp::Rx { qubit: 1, angle: 3.0 * PI / 2.0 };
        assert_eq!(decompose_gate(&g).unwrap(), vec![NativeGate::RxMinus { qubit: 1 }]);
        assert!(decompose_gate(&GateOp::PhaseZz { a: 0, b: 1, angle: 1.0 }).is_err());
    }

    #[test]
    fn cnot_expansion() {
        let g = GateOp::Cnot { control: 0, target: 1 };
        let d = decompose_gate(&g).unwrap();
        assert_eq!(d.len(), 7);
        assert!(verify_equivalence(&[g], &natives(&d), 2, EquivalenceMode::Unitary).unwrap());
        let g = GateOp::Cnot { control: 1, target: 0 };
        assert!(verify_equivalence(&[g], &natives(&decompose_gate(&g).unwrap()), 2, EquivalenceMode::Unitary).unwrap());
    }

    #[test]
    fn ry_pi_template() {
        let g = GateOp::Ry { qubit: 0, angle: PI };
        let d = decompose_gate(&g).unwrap();
        assert!(d.len() <= 5);
        assert!(verify_equivalence(&[g], &natives(&d), 1, EquivalenceMode::Unitary).unwrap());
    }

    #[test]
    fn arbitrary_rotations() {
        for k in 0..40 {
            let angle = -7.0 + 0.37 * k as f64;
            for g in [GateOp::Rx { qubit: 0, angle }, GateOp::Ry { qubit: 0, angle }, GateOp::H { qubit: 0 }] {
                let d = decompose_gate(&g).unwrap();
                assert!(verify_equivalence(&[g], &natives(&d), 1, EquivalenceMode::Unitary).unwrap(), "{g}");
            }
        }
    }

    #[test]
    fn inequivalent_detected() {
        let a = [GateOp::Rx { qubit: 0, angle: PI }];
        let b = [GateOp::Ry { qubit: 0, angle: PI }];
        assert!(!verify_equivalence(&a, &b, 1, EquivalenceMode::Unitary).unwrap());
        assert!(!verify_equivalence(&a, &b, 1, EquivalenceMode::Statevector).unwrap());
        assert!(verify_equivalence(&a, &a, 1, EquivalenceMode::Unitary).unwrap());
        assert!(verify_equivalence(&a, &a, 1, EquivalenceMode::Statevector).unwrap());
        assert!(verify_equivalence(&a, &a, 5, EquivalenceMode::Unitary).is_err());
    }

    #[test]
    fn peephole_merges_and_drops() {
        assert!(transpile(&[]).unwrap().is_empty());
        let p =
            transpile(&[GateOp::Rz { qubit: 0, angle: PI / 2.0 }, GateOp::Rz { qubit: 0, angle: PI / 2.0 }]).unwrap();
        assert_eq!(p.gates, vec![NativeGate::Rz { qubit: 0, angle: PI }]);
        let p = transpile(&[GateOp::Rz { qubit: 0, angle: PI }, GateOp::Rz { qubit: 0, angle: PI }]).unwrap();
        assert!(p.is_empty());
        let p = transpile(&[GateOp::Rz { qubit: 2, angle: 0.0 }]).unwrap();
        assert!(p.is_empty());
        // an intervening gate on another wire does not block the merge
        let p = transpile(&[
            GateOp::Rz { qubit: 0, angle: PI / 4.0 },
            GateOp::Rx { qubit: 1, angle: PI / 2.0 },
            GateOp::Rz { qubit: 0, angle: PI / 4.0 },
        ])
        .unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.provenance, vec![0, 1]);
        // but a CZ on the same wire does
        let p = transpile(&[
            GateOp::Rz { qubit: 0, angle: PI / 4.0 },
            GateOp::Cz { a: 0, b: 1 },
            GateOp::Rz { qubit: 0, angle: PI / 4.0 },
        ])
        .unwrap();
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn native_rendering() {
        let p = transpile(&[GateOp::Cnot { control: 5, target: 9 }]).unwrap();
        assert_eq!(
            p.render(),
            vec!["RZ(pi/2) 9", "RX(pi/2) 9", "RZ(pi/2) 9", "CZ 5 9", "RZ(pi/2) 9", "RX(pi/2) 9", "RZ(pi/2) 9"]
        );
    }
}
