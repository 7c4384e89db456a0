//! Depth-one QAOA baseline: exhaustive grid search over `(gamma, beta)` with
//! exact expectations, then a sampled quality estimate at the optimum.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{reward_from_samples, EpisodeRecord, Outcome};
use crate::error::{Error, Result};
use crate::problems::ProblemInstance;
use crate::seeding::{rng_for, streams};
use crate::statevec::{GateOp, StateVector};
use crate::transpiler;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QaoaConfig {
    /// Grid points per axis over `[0, 2pi)`.
    pub bins: usize,
    pub shots: usize,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        Self { bins: 20, shots: 10 }
    }
}

impl QaoaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Config(format!("bins must be at least 2, got {}", self.bins)));
        }
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        Ok(())
    }

    /// Left edge of bin `k`.
    pub fn grid_angle(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.bins as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaoaResult {
    pub gamma_index: usize,
    pub beta_index: usize,
    pub gamma_star: f64,
    pub beta_star: f64,
    /// Normalized exact expectation at the optimum.
    pub exact_expectation: f64,
    pub sampled_quality: Option<f64>,
    pub program: Vec<GateOp>,
    pub uncompiled_len: usize,
    pub evaluations: usize,
}

/// `exp(-i beta sum X) exp(-i gamma C) |+>^n`.
pub fn build_qaoa_state(instance: &ProblemInstance, gamma: f64, beta: f64) -> Result<StateVector> {
    let n = instance.n();
    let mut state = StateVector::zero(n)?;
    for q in 0..n {
        state.apply(&GateOp::H { qubit: q })?;
    }
    state.apply_phase_zz(instance, gamma)?;
    for q in 0..n {
        state.apply(&GateOp::Rx { qubit: q, angle: 2.0 * beta })?;
    }
    Ok(state)
}

/// Normalized exact expectation of the QAOA state.
pub fn normalized_expectation(instance: &ProblemInstance, gamma: f64, beta: f64) -> Result<f64> {
    let state = build_qaoa_state(instance, gamma, beta)?;
    Ok(instance.normalize(state.exact_expectation(instance)?))
}

/// All `bins x bins` normalized expectations, row-major by gamma index.
pub fn grid_values(instance: &ProblemInstance, cfg: &QaoaConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let bins = cfg.bins;
    // warm both caches before fanning out
    instance.extremes();
    (0..bins * bins)
        .into_par_iter()
        .map(|cell| normalized_expectation(instance, cfg.grid_angle(cell / bins), cfg.grid_angle(cell % bins)))
        .collect()
}

/// Grid argmax, ties going to the smallest `(gamma index, beta index)`.
pub fn grid_search(instance: &ProblemInstance, cfg: &QaoaConfig) -> Result<QaoaResult> {
    let values = grid_values(instance, cfg)?;
    let mut best = 0;
    for (cell, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = cell;
        }
    }
    let (gi, bi) = (best / cfg.bins, best % cfg.bins);
    let (gamma, beta) = (cfg.grid_angle(gi), cfg.grid_angle(bi));
    let program = qaoa_program(instance, gamma, beta);
    Ok(QaoaResult {
        gamma_index: gi,
        beta_index: bi,
        gamma_star: gamma,
        beta_star: beta,
        exact_expectation: values[best],
        sampled_quality: None,
        uncompiled_len: program.len(),
        program,
        evaluations: values.len(),
    })
}

/// Mean normalized cost of `cfg.shots` measurements, the same estimator as
/// the environment reward.
pub fn sampled_quality<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    gamma: f64,
    beta: f64,
    cfg: &QaoaConfig,
    rng: &mut R,
) -> Result<f64> {
    let state = build_qaoa_state(instance, gamma, beta)?;
    let bits = state.sample_bitstrings(cfg.shots, rng)?;
    reward_from_samples(&bits, instance)
}

/// Explicit gate sequence preparing the QAOA state up to global phase.
pub fn qaoa_program(instance: &ProblemInstance, gamma: f64, beta: f64) -> Vec<GateOp> {
    let n = instance.n();
    let ising = instance.ising_form();
    let mut program: Vec<GateOp> = (0..n).map(|q| GateOp::H { qubit: q }).collect();
    for &(i, j, c) in &ising.coupling {
        program.push(GateOp::Cnot { control: i, target: j });
        program.push(GateOp::Rz { qubit: j, angle: 2.0 * gamma * c });
        program.push(GateOp::Cnot { control: i, target: j });
    }
    for (q, &h) in ising.linear.iter().enumerate() {
        if h != 0.0 {
            program.push(GateOp::Rz { qubit: q, angle: 2.0 * gamma * h });
        }
    }
    program.extend((0..n).map(|q| GateOp::Rx { qubit: q, angle: 2.0 * beta }));
    program
}

/// Runs the full baseline on one instance and returns its episode record.
/// The score is the final-state sampled quality.
pub fn run_instance<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    cfg: &QaoaConfig,
    win_threshold: f64,
    rng: &mut R,
) -> Result<(QaoaResult, EpisodeRecord)> {
    let mut result = grid_search(instance, cfg)?;
    let quality = sampled_quality(instance, result.gamma_star, result.beta_star, cfg, rng)?;
    result.sampled_quality = Some(quality);
    let record = EpisodeRecord {
        instance_seed: instance.seed(),
        kind: instance.kind().to_string(),
        actions: Vec::new(),
        program_text: result.program.iter().map(ToString::to_string).collect(),
        rewards: vec![quality],
        outcome: if quality > win_threshold { Outcome::Won } else { Outcome::Lost },
        score: quality,
        agent: Some("qaoa".into()),
        steps_to_score: Some(result.uncompiled_len),
        compiled_len: Some(transpiler::compiled_length(&result.program)?),
        gamma: Some(result.gamma_star),
        beta: Some(result.beta_star),
    };
    Ok((result, record))
}

/// Baseline over a dataset, instance `i` sampling from its own derived
/// stream. Records come back in dataset order.
pub fn run_dataset(
    instances: &[ProblemInstance],
    cfg: &QaoaConfig,
    win_threshold: f64,
    seed: u64,
) -> Result<Vec<EpisodeRecord>> {
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let mut rng = rng_for(seed, streams::QAOA_SAMPLE, i as u64);
            run_instance(inst, cfg, win_threshold, &mut rng).map(|(_, rec)| rec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemKind;
    use crate::transpiler::{verify_equivalence, EquivalenceMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_edge() -> ProblemInstance {
        ProblemInstance::from_matrix(ProblemKind::MaxCut, 2, vec![0.0, 1.0, 1.0, 0.0], 0).unwrap()
    }

    #[test]
    fn origin_is_uniform_average() {
        let inst = ProblemInstance::generate(ProblemKind::Qubo, 5, 3).unwrap();
        let v = normalized_expectation(&inst, 0.0, 0.0).unwrap();
        let mean: f64 = (0..32).map(|i| inst.normalized_cost_index(i)).sum::<f64>() / 32.0;
        assert!((v - mean).abs() < 1e-12);
        let w = normalized_expectation(&inst, 0.0, 1.1).unwrap();
        assert!((v - w).abs() < 1e-12);
    }

    #[test]
    fn program_lengths() {
        let empty = ProblemInstance::from_matrix(ProblemKind::MaxCut, 3, vec![0.0; 9], 0).unwrap();
        assert_eq!(qaoa_program(&empty, 0.3, 0.2).len(), 6);
        assert_eq!(qaoa_program(&single_edge(), 0.3, 0.2).len(), 7);
    }

    #[test]
    fn degenerate_instance_picks_origin() {
        let empty = ProblemInstance::from_matrix(ProblemKind::MaxQp, 3, vec![0.0; 9], 0).unwrap();
        let res = grid_search(&empty, &QaoaConfig::default()).unwrap();
        assert_eq!((res.gamma_index, res.beta_index), (0, 0));
        assert_eq!(res.exact_expectation, 1.0);
        assert_eq!(res.evaluations, 400);
    }

    #[test]
    fn program_prepares_state() {
        for kind in ProblemKind::ALL {
            let inst = ProblemInstance::generate(kind, 4, 11).unwrap();
            let (g, b) = (0.7, 2.3);
            let state = build_qaoa_state(&inst, g, b).unwrap();
            let mut other = StateVector::zero(4).unwrap();
            other.apply_all(&qaoa_program(&inst, g, b)).unwrap();
            assert!(state.inner(&other).norm() > 1.0 - 1e-9, "{kind}");
        }
    }

    #[test]
    fn transpiled_program_is_equivalent() {
        let inst = ProblemInstance::generate(ProblemKind::MaxQp, 4, 2).unwrap();
        let program = qaoa_program(&inst, 0.4, 1.2);
        let native = transpiler::transpile(&program).unwrap().to_gates();
        assert!(verify_equivalence(&program, &native, 4, EquivalenceMode::Unitary).unwrap());
    }

    #[test]
    fn sampled_quality_is_seeded() {
        let inst = ProblemInstance::generate(ProblemKind::MaxCut, 5, 8).unwrap();
        let cfg = QaoaConfig::default();
        let a = sampled_quality(&inst, 0.9, 0.4, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sampled_quality(&inst, 0.9, 0.4, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn record_carries_angles() {
        let inst = ProblemInstance::generate(ProblemKind::MaxCut, 4, 5).unwrap();
        let (res, rec) = run_instance(&inst, &QaoaConfig::default(), 0.8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(rec.agent.as_deref(), Some("qaoa"));
        assert_eq!(rec.gamma, Some(res.gamma_star));
        assert_eq!(rec.score, *rec.rewards.last().unwrap());
        assert_eq!(rec.steps_to_score, Some(res.program.len()));
    }
}
