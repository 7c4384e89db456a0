//! Episodic program-synthesis environment.
//!
//! Each action appends one gate to the program. After every step the register
//! is measured `shots` times and the reward is the mean normalized cost of the
//! sampled bitstrings. An episode is won as soon as the reward exceeds the
//! threshold and lost once the program reaches its maximum length.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{ProblemInstance, WTilde};
use crate::statevec::{BitMatrix, GateOp, StateVector, MAX_QUBITS};

/// Discrete rotation angles per axis: `2 pi k / 8`.
pub const ANGLE_STEPS: usize = 8;

pub type ActionId = usize;

/// Size of the action set for an `n`-qubit register: three rotation axes
/// times `n` qubits times eight angles, plus one CNOT per unordered pair.
pub fn num_actions(n: usize) -> usize {
    3 * n * ANGLE_STEPS + n * (n - 1) / 2
}

/// Unordered pair `{i, j}`, `i < j`, at lexicographic position `k`.
fn pair_at(mut k: usize, n: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
    }
    unreachable!("pair index checked by caller")
}

pub fn decode_action(id: ActionId, n: usize) -> Result<GateOp> {
    if n == 0 || id >= num_actions(n) {
        return Err(Error::Argument(format!("action {id} out of range for {n} qubits")));
    }
    let per_axis = n * ANGLE_STEPS;
    if id < 3 * per_axis {
        let qubit = (id % per_axis) / ANGLE_STEPS;
        let angle = 2.0 * PI * (id % ANGLE_STEPS) as f64 / ANGLE_STEPS as f64;
        Ok(match id / per_axis {
            0 => GateOp::Rx { qubit, angle },
            1 => GateOp::Ry { qubit, angle },
            _ => GateOp::Rz { qubit, angle },
        })
    } else {
        let (control, target) = pair_at(id - 3 * per_axis, n);
        Ok(GateOp::Cnot { control, target })
    }
}

/// Inverse of [`decode_action`] for gates that belong to the action set.
pub fn encode_action(gate: &GateOp, n: usize) -> Option<ActionId> {
    let per_axis = n * ANGLE_STEPS;
    let rotation = |axis: usize, qubit: usize, angle: f64| {
        let steps = angle.rem_euclid(2.0 * PI) / (2.0 * PI / ANGLE_STEPS as f64);
        let k = steps.round();
        if qubit >= n || (steps - k).abs() > 1e-9 {
            return None;
        }
        Some(axis * per_axis + qubit * ANGLE_STEPS + (k as usize % ANGLE_STEPS))
    };
    match *gate {
        GateOp::Rx { qubit, angle } => rotation(0, qubit, angle),
        GateOp::Ry { qubit, angle } => rotation(1, qubit, angle),
        GateOp::Rz { qubit, angle } => rotation(2, qubit, angle),
        GateOp::Cnot { control, target } if control < target && target < n => {
            let offset: usize = (0..control).map(|i| n - 1 - i).sum();
            Some(3 * per_axis + offset + (target - control - 1))
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Mean normalized cost over `shots` measured bitstrings.
    Sampled,
    /// Normalized exact expectation (noiseless diagnostics).
    Exact,
}

impl std::str::FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled" => Ok(RewardMode::Sampled),
            "exact" => Ok(RewardMode::Exact),
            other => Err(Error::Argument(format!("unknown reward mode `{other}`"))),
        }
    }
}

impl RewardMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardMode::Sampled => "sampled",
            RewardMode::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub n: usize,
    pub shots: usize,
    pub max_program_len: usize,
    pub win_threshold: f64,
    pub reward_mode: RewardMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { n: 10, shots: 10, max_program_len: 25, win_threshold: 0.8, reward_mode: RewardMode::Sampled }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_QUBITS).contains(&self.n) {
            return Err(Error::Config(format!("n = {} outside 1..={MAX_QUBITS}", self.n)));
        }
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if self.max_program_len == 0 {
            return Err(Error::Config("max_program_len must be at least 1".into()));
        }
        if !(self.win_threshold > 0.0 && self.win_threshold < 1.0) {
            return Err(Error::Config(format!("win_threshold {} not in (0, 1)", self.win_threshold)));
        }
        Ok(())
    }

    pub fn num_actions(&self) -> usize {
        num_actions(self.n)
    }

    /// Length of the flattened observation: `shots * n` bits plus the weight triangle.
    pub fn observation_len(&self) -> usize {
        self.shots * self.n + crate::problems::triangle_len(self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub bits: BitMatrix,
    pub wtilde: WTilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Running,
    Won,
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub outcome: Outcome,
}

/// Mean normalized cost of the measured rows.
pub fn reward_from_samples(bits: &BitMatrix, instance: &ProblemInstance) -> Result<f64> {
    if bits.cols() != instance.n() || bits.rows() == 0 {
        return Err(Error::Argument(format!(
            "sample matrix {}x{} does not match {} variables",
            bits.rows(),
            bits.cols(),
            instance.n()
        )));
    }
    let total: f64 = (0..bits.rows()).map(|r| instance.normalized_cost_index(bits.row_index(r))).sum();
    Ok(total / bits.rows() as f64)
}

/// Best reward seen over an episode.
pub fn episode_score(rewards: &[f64]) -> Result<f64> {
    rewards
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::Argument("episode score of an empty reward list".into()))
}

/// 1-based position of the first step attaining the episode score.
pub fn steps_to_score(rewards: &[f64]) -> Result<usize> {
    let best = episode_score(rewards)?;
    Ok(rewards.iter().position(|&r| r == best).expect("max is present") + 1)
}

/// Histogram of measured rows over basis indices.
pub fn observation_counts(bits: &BitMatrix) -> Result<Vec<u64>> {
    if bits.cols() > MAX_QUBITS {
        return Err(Error::Argument(format!("{} columns exceeds {MAX_QUBITS}", bits.cols())));
    }
    let mut counts = vec![0u64; 1 << bits.cols()];
    for r in 0..bits.rows() {
        counts[bits.row_index(r)] += 1;
    }
    Ok(counts)
}

/// One running episode.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    instance: Arc<ProblemInstance>,
    wtilde: WTilde,
    state: StateVector,
    program: Vec<GateOp>,
    actions: Vec<ActionId>,
    rewards: Vec<f64>,
    outcome: Outcome,
}

impl Env {
    /// Starts an episode from `|0...0>` and returns the initial observation.
    pub fn reset<R: Rng + ?Sized>(
        instance: Arc<ProblemInstance>,
        cfg: &EnvConfig,
        rng: &mut R,
    ) -> Result<(Self, Observation)> {
        cfg.validate()?;
        if instance.n() != cfg.n {
            return Err(Error::Config(format!(
                "instance has {} variables, environment expects {}",
                instance.n(),
                cfg.n
            )));
        }
        let wtilde = WTilde::encode(&instance, cfg.n)?;
        // extremes are needed for every reward
        instance.extremes();
        let env = Self {
            cfg: cfg.clone(),
            instance,
            wtilde,
            state: StateVector::zero(cfg.n)?,
            program: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            outcome: Outcome::Running,
        };
        let obs = env.observe(rng)?;
        Ok((env, obs))
    }

    fn observe<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Observation> {
        Ok(Observation { bits: self.state.sample_bitstrings(self.cfg.shots, rng)?, wtilde: self.wtilde.clone() })
    }

    pub fn step<R: Rng + ?Sized>(&mut self, action: ActionId, rng: &mut R) -> Result<Step> {
        if self.is_done() {
            return Err(Error::Usage("step called on a finished episode".into()));
        }
        let gate = decode_action(action, self.cfg.n)?;
        self.state.apply(&gate)?;
        self.program.push(gate);
        self.actions.push(action);

        let observation = self.observe(rng)?;
        let reward = match self.cfg.reward_mode {
            RewardMode::Sampled => reward_from_samples(&observation.bits, &self.instance)?,
            RewardMode::Exact => self.instance.normalize(self.state.exact_expectation(&self.instance)?),
        };
        self.rewards.push(reward);

        self.outcome = if reward > self.cfg.win_threshold {
            Outcome::Won
        } else if self.program.len() >= self.cfg.max_program_len {
            Outcome::Lost
        } else {
            Outcome::Running
        };
        Ok(Step { observation, reward, done: self.is_done(), outcome: self.outcome })
    }

    pub fn is_done(&self) -> bool {
        self.outcome != Outcome::Running
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn instance(&self) -> &Arc<ProblemInstance> {
        &self.instance
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn program(&self) -> &[GateOp] {
        &self.program
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Episode log line for a finished (or abandoned) episode.
    pub fn record(&self) -> Result<EpisodeRecord> {
        Ok(EpisodeRecord {
            instance_seed: self.instance.seed(),
            kind: self.instance.kind().to_string(),
            actions: self.actions.clone(),
            program_text: self.program.iter().map(ToString::to_string).collect(),
            rewards: self.rewards.clone(),
            outcome: match self.outcome {
                Outcome::Won => Outcome::Won,
                _ => Outcome::Lost,
            },
            score: episode_score(&self.rewards)?,
            agent: None,
            steps_to_score: None,
            compiled_len: None,
            gamma: None,
            beta: None,
        })
    }
}

/// Episode log line. The optional trailing fields are filled by evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub instance_seed: u64,
    pub kind: String,
    pub actions: Vec<ActionId>,
    pub program_text: Vec<String>,
    pub rewards: Vec<f64>,
    pub outcome: Outcome,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    /// Uncompiled instructions up to the step attaining `score`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_to_score: Option<usize>,
    /// Native-gate instructions for the same prefix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compiled_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}
