mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::random_state;
use qprl::env::{decode_action, encode_action, episode_score, num_actions, steps_to_score};
use qprl::policy::{Arch, PolicyParams};
use qprl::ppo::compute_gae;
use qprl::problems::{read_instances, write_instances, ProblemInstance, ProblemKind, WTilde};
use qprl::qaoa;
use qprl::statevec::{GateOp, StateVector};
use qprl::transpiler::{self, NativeGate};

fn kind() -> impl Strategy<Value = ProblemKind> {
    prop_oneof![Just(ProblemKind::MaxCut), Just(ProblemKind::MaxQp), Just(ProblemKind::Qubo)]
}

fn gate_on(n: usize) -> impl Strategy<Value = GateOp> {
    (0..num_actions(n)).prop_map(move |id| decode_action(id, n).unwrap())
}

fn program(n: usize, max_len: usize) -> impl Strategy<Value = Vec<GateOp>> {
    prop::collection::vec(gate_on(n), 0..max_len)
}

fn native_gate(n: usize) -> impl Strategy<Value = NativeGate> {
    prop_oneof![
        (0..n, -8i32..8).prop_map(|(q, k)| NativeGate::Rz { qubit: q, angle: k as f64 * std::f64::consts::FRAC_PI_4 }),
        (0..n).prop_map(|q| NativeGate::RxPlus { qubit: q }),
        (0..n).prop_map(|q| NativeGate::RxMinus { qubit: q }),
        (0..n, 1..n).prop_map(move |(a, d)| NativeGate::Cz { a, b: (a + d) % n }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn programs_preserve_norm(n in 2usize..7, seed in any::<u64>(), prog in program(6, 30)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = random_state(n, &mut rng);
        for g in prog.iter().filter(|g| g.validate(n).is_ok()) {
            s.apply(g).unwrap();
        }
        prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn diagonal_gates_keep_probabilities(seed in any::<u64>(), q in 0usize..5, r in 0usize..5, angle in -10.0f64..10.0) {
        let mut s = random_state(5, &mut ChaCha8Rng::seed_from_u64(seed));
        let before = s.probabilities().to_vec();
        s.apply(&GateOp::Rz { qubit: q, angle }).unwrap();
        if q != r {
            s.apply(&GateOp::Cz { a: q, b: r }).unwrap();
        }
        prop_assert_eq!(s.probabilities(), &before[..]);
    }

    #[test]
    fn action_ids_roundtrip(n in 2usize..11, frac in 0.0f64..1.0) {
        let id = ((num_actions(n) as f64 * frac) as usize).min(num_actions(n) - 1);
        prop_assert_eq!(encode_action(&decode_action(id, n).unwrap(), n), Some(id));
    }

    #[test]
    fn wtilde_roundtrip(k in kind(), n in 1usize..11, seed in any::<u64>()) {
        let inst = ProblemInstance::generate(k, n, seed).unwrap();
        let w = WTilde::encode(&inst, n).unwrap();
        prop_assert_eq!(w.len(), n * (n + 1) / 2);
        let back = w.decode(k, n, seed).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn normalized_cost_is_scale_invariant(k in kind(), seed in any::<u64>(), c in 0.01f64..100.0) {
        let inst = ProblemInstance::generate(k, 6, seed).unwrap();
        let scaled = inst.scaled(c).unwrap();
        for b in 0..64 {
            let (x, y) = (inst.normalized_cost_index(b), scaled.normalized_cost_index(b));
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn ising_form_reproduces_cost(k in kind(), seed in any::<u64>(), b in 0usize..128) {
        let inst = ProblemInstance::generate(k, 7, seed).unwrap();
        let bits: Vec<u8> = (0..7).map(|i| ((b >> i) & 1) as u8).collect();
        let c = inst.cost(&bits).unwrap();
        prop_assert!((inst.ising_form().evaluate(&bits) - c).abs() <= 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn instance_files_roundtrip(k in kind(), n in 1usize..9, seed in any::<u64>(), with_extremes in any::<bool>()) {
        let inst = ProblemInstance::generate(k, n, seed).unwrap();
        if with_extremes {
            inst.extremes();
        }
        let mut buf = Vec::new();
        write_instances(&mut buf, std::slice::from_ref(&inst)).unwrap();
        let back = read_instances(&buf[..]).unwrap();
        prop_assert_eq!(&back[0], &inst);
        prop_assert_eq!(back[0].cached_extremes(), inst.cached_extremes());
    }

    #[test]
    fn episode_score_is_first_max(rewards in prop::collection::vec(0.0f64..1.0, 1..30)) {
        let s = episode_score(&rewards).unwrap();
        let k = steps_to_score(&rewards).unwrap();
        prop_assert!(rewards.iter().all(|&r| r <= s));
        prop_assert_eq!(rewards[k - 1], s);
        prop_assert!(rewards[..k - 1].iter().all(|&r| r < s));
    }

    #[test]
    fn transpile_respects_length_bound(prog in program(6, 25)) {
        let cnots = prog.iter().filter(|g| g.is_two_qubit()).count();
        let rotations = prog.len() - cnots;
        let native = transpiler::transpile(&prog).unwrap();
        prop_assert!(native.len() <= 7 * cnots + 5 * rotations);
    }

    #[test]
    fn transpile_never_grows_native_input(prog in prop::collection::vec(native_gate(4), 0..30)) {
        let gates: Vec<GateOp> = prog.iter().map(NativeGate::to_gate).collect();
        prop_assert!(transpiler::transpile(&gates).unwrap().len() <= gates.len());
    }

    #[test]
    fn gate_text_roundtrip(g in gate_on(10)) {
        let back: GateOp = g.to_string().parse().unwrap();
        prop_assert_eq!(back.to_string(), g.to_string());
        let mut a = StateVector::zero(10).unwrap();
        a.apply(&GateOp::H { qubit: 0 }).unwrap();
        let mut b = a.clone();
        a.apply(&g).unwrap();
        b.apply(&back).unwrap();
        prop_assert!((a.inner(&b).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gae_monte_carlo_limit(trace in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, any::<bool>()), 1..20), boot in -1.0f64..1.0) {
        let rewards: Vec<f64> = trace.iter().map(|t| t.0).collect();
        let values: Vec<f64> = trace.iter().map(|t| t.1).collect();
        let dones: Vec<bool> = trace.iter().map(|t| t.2).collect();
        let (adv, _) = compute_gae(&rewards, &values, &dones, boot, 1.0, 1.0).unwrap();
        let mut ret = boot;
        for t in (0..rewards.len()).rev() {
            if dones[t] {
                ret = 0.0;
            }
            ret += rewards[t];
            prop_assert!((adv[t] - (ret - values[t])).abs() <= 1e-12);
        }
    }

    #[test]
    fn checkpoint_bytes_roundtrip(seed in any::<u64>(), input in 1usize..40, actions in 1usize..50) {
        let p = PolicyParams::init(Arch::new(input, actions), &mut ChaCha8Rng::seed_from_u64(seed));
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        let back = PolicyParams::read_from(&mut &buf[..]).unwrap();
        prop_assert_eq!(back.as_slice(), p.as_slice());
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn qaoa_values_are_normalized(k in kind(), seed in any::<u64>(), g in 0.0f64..6.3, b in 0.0f64..6.3) {
        let inst = ProblemInstance::generate(k, 5, seed).unwrap();
        let v = qaoa::normalized_expectation(&inst, g, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }
}
