//! Proximal Policy Optimization over the program-synthesis environment.
//!
//! Rollouts of `n_steps` transitions per environment feed generalized
//! advantage estimation, then several epochs of clipped-surrogate updates on
//! shuffled minibatches. Gradients are computed analytically through the
//! shared actor-critic network.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{steps_to_score, Env, EnvConfig, EpisodeRecord};
use crate::error::{Error, Result};
use crate::policy::{entropy, flatten_observation, log_softmax, sample_action, Adam, Arch, PolicyParams};
use crate::problems::ProblemInstance;
use crate::seeding::{rng_for, streams};
use crate::transpiler;

/// Episodes kept for the rolling learning-curve statistics.
const EPISODE_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub n_steps: usize,
    pub n_envs: usize,
    pub gae_lambda: f64,
    pub discount: f64,
    pub clip: f64,
    pub adam_epsilon: f64,
    pub lr_initial: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Global gradient-norm clip; `None` disables it.
    pub max_grad_norm: Option<f64>,
    pub normalize_advantages: bool,
    pub reward_signal: RewardSignal,
    pub total_steps: usize,
}

/// What the learner is paid per transition. The environment reward itself
/// (and every episode score) is unaffected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardSignal {
    /// The step reward as returned by the environment.
    Absolute,
    /// Change in step reward since the previous observation; the episode
    /// return telescopes to the final reward minus the starting one.
    Increment,
}

impl RewardSignal {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardSignal::Absolute => "absolute",
            RewardSignal::Increment => "increment",
        }
    }
}

impl std::str::FromStr for RewardSignal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(RewardSignal::Absolute),
            "increment" => Ok(RewardSignal::Increment),
            other => Err(Error::Argument(format!("unknown reward signal `{other}`"))),
        }
    }
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            n_steps: 512,
            n_envs: 1,
            gae_lambda: 0.95,
            discount: 0.99,
            clip: 0.2,
            adam_epsilon: 1e-5,
            lr_initial: 2.5e-4,
            epochs_per_update: 4,
            minibatch_size: 64,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: Some(0.5),
            normalize_advantages: true,
            reward_signal: RewardSignal::Increment,
            total_steps: 512,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return bad("clip must be positive");
        }
        if self.n_steps == 0 || self.n_envs == 0 || self.minibatch_size == 0 || self.epochs_per_update == 0 {
            return bad("n_steps, n_envs, minibatch_size and epochs_per_update must be positive");
        }
        if self.total_steps == 0 {
            return bad("total_steps must be positive");
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.n_steps * self.n_envs
    }

    /// Number of collect/update rounds needed to cover `total_steps`.
    pub fn num_updates(&self) -> usize {
        self.total_steps.div_ceil(self.batch_size()).max(1)
    }
}

/// Learning rate after `steps_done` environment steps, decaying linearly to
/// zero at `total_steps`.
pub fn linear_lr(lr_initial: f64, steps_done: usize, total_steps: usize) -> f64 {
    lr_initial * (1.0 - steps_done as f64 / total_steps as f64).max(0.0)
}

/// Backward GAE recursion over one environment's trajectory.
///
/// `dones[t]` marks that the episode ended with transition `t`; `bootstrap`
/// is the value estimate of the observation following the last transition.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    discount: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = rewards.len();
    if values.len() != len || dones.len() != len {
        return Err(Error::Argument("GAE inputs differ in length".into()));
    }
    let mut adv = vec![0.0; len];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..len).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + discount * next_value * live - values[t];
        next_adv = delta + discount * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Transitions laid out `[step][env]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub n_steps: usize,
    pub n_envs: usize,
    pub obs_len: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub logprobs: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of each environment's observation after the final step.
    pub bootstrap: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    advantages_ready: bool,
}

impl RolloutBuffer {
    pub fn new(n_steps: usize, n_envs: usize, obs_len: usize) -> Self {
        let cap = n_steps * n_envs;
        Self {
            n_steps,
            n_envs,
            obs_len,
            observations: Vec::with_capacity(cap * obs_len),
            actions: Vec::with_capacity(cap),
            rewards: Vec::with_capacity(cap),
            values: Vec::with_capacity(cap),
            logprobs: Vec::with_capacity(cap),
            dones: Vec::with_capacity(cap),
            bootstrap: vec![0.0; n_envs],
            advantages: Vec::new(),
            returns: Vec::new(),
            advantages_ready: false,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_len..(i + 1) * self.obs_len]
    }

    pub fn push(&mut self, obs: &[f64], action: usize, reward: f64, value: f64, logprob: f64, done: bool) {
        debug_assert_eq!(obs.len(), self.obs_len);
        self.observations.extend_from_slice(obs);
        self.actions.push(action);
        self.rewards.push(reward);
        self.values.push(value);
        self.logprobs.push(logprob);
        self.dones.push(done);
        self.advantages_ready = false;
    }

    pub fn compute_advantages(&mut self, discount: f64, lambda: f64) -> Result<()> {
        if self.len() != self.n_steps * self.n_envs {
            return Err(Error::Usage(format!(
                "buffer holds {} transitions, expected {}",
                self.len(),
                self.n_steps * self.n_envs
            )));
        }
        self.advantages = vec![0.0; self.len()];
        self.returns = vec![0.0; self.len()];
        for e in 0..self.n_envs {
            let col: Vec<usize> = (0..self.n_steps).map(|t| t * self.n_envs + e).collect();
            let pick = |v: &[f64]| col.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let dones: Vec<bool> = col.iter().map(|&i| self.dones[i]).collect();
            let (adv, ret) =
                compute_gae(&pick(&self.rewards), &pick(&self.values), &dones, self.bootstrap[e], discount, lambda)?;
            for (k, &i) in col.iter().enumerate() {
                self.advantages[i] = adv[k];
                self.returns[i] = ret[k];
            }
        }
        self.advantages_ready = true;
        Ok(())
    }

    pub fn advantages_ready(&self) -> bool {
        self.advantages_ready
    }
}

/// Cycles through a dataset in shuffled order, reshuffling after each pass.
#[derive(Debug, Clone)]
pub struct InstanceSampler {
    instances: Vec<Arc<ProblemInstance>>,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl InstanceSampler {
    pub fn new(instances: Vec<Arc<ProblemInstance>>, rng: ChaCha8Rng) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Argument("empty training dataset".into()));
        }
        let order = (0..instances.len()).collect();
        let mut s = Self { instances, order, pos: 0, rng };
        s.order.shuffle(&mut s.rng);
        Ok(s)
    }

    pub fn next_instance(&mut self) -> Arc<ProblemInstance> {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.instances[self.order[self.pos - 1]].clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    /// Undiscounted sum of what the learner was paid.
    pub total_reward: f64,
    pub length: usize,
    pub score: f64,
}

struct Slot {
    env: Env,
    obs: Vec<f64>,
    rng: ChaCha8Rng,
    last_reward: f64,
    paid: f64,
}

/// Reward of the freshly reset register, which always measures all zeros.
fn initial_reward(env: &Env) -> f64 {
    env.instance().normalized_cost_index(0)
}

/// Vectorized environments that persist across rollouts, so episodes may
/// straddle update boundaries.
pub struct Collector {
    env_cfg: EnvConfig,
    slots: Vec<Slot>,
    sampler: InstanceSampler,
    recent: VecDeque<EpisodeStats>,
    episodes: usize,
    steps: usize,
    signal: RewardSignal,
}

impl Collector {
    pub fn new(dataset: &[Arc<ProblemInstance>], env_cfg: &EnvConfig, n_envs: usize, seed: u64) -> Result<Self> {
        env_cfg.validate()?;
        let mut sampler = InstanceSampler::new(dataset.to_vec(), rng_for(seed, streams::DATASET_SHUFFLE, 0))?;
        let mut slots = Vec::with_capacity(n_envs);
        for e in 0..n_envs {
            let mut rng = rng_for(seed, streams::ROLLOUT_ENV, e as u64);
            let (env, obs) = Env::reset(sampler.next_instance(), env_cfg, &mut rng)?;
            let obs = flatten_observation(&obs, env_cfg.shots, env_cfg.n)?;
            let last_reward = initial_reward(&env);
            slots.push(Slot { env, obs, rng, last_reward, paid: 0.0 });
        }
        Ok(Self {
            env_cfg: env_cfg.clone(),
            slots,
            sampler,
            recent: VecDeque::new(),
            episodes: 0,
            steps: 0,
            signal: RewardSignal::Increment,
        })
    }

    pub fn with_signal(mut self, signal: RewardSignal) -> Self {
        self.signal = signal;
        self
    }

    pub fn collect(&mut self, params: &PolicyParams, n_steps: usize) -> Result<RolloutBuffer> {
        let obs_len = self.env_cfg.observation_len();
        let mut buf = RolloutBuffer::new(n_steps, self.slots.len(), obs_len);
        for _ in 0..n_steps {
            for slot in &mut self.slots {
                let (logits, value) = params.forward(&slot.obs)?;
                let sampled = sample_action(&logits, &mut slot.rng)?;
                let step = slot.env.step(sampled.action, &mut slot.rng)?;
                let paid = match self.signal {
                    RewardSignal::Absolute => step.reward,
                    RewardSignal::Increment => step.reward - slot.last_reward,
                };
                slot.last_reward = step.reward;
                slot.paid += paid;
                buf.push(&slot.obs, sampled.action, paid, value, sampled.logprob, step.done);
                if step.done {
                    let rewards = slot.env.rewards();
                    self.recent.push_back(EpisodeStats {
                        total_reward: slot.paid,
                        length: rewards.len(),
                        score: crate::env::episode_score(rewards)?,
                    });
                    if self.recent.len() > EPISODE_WINDOW {
                        self.recent.pop_front();
                    }
                    self.episodes += 1;
                    let (env, obs) = Env::reset(self.sampler.next_instance(), &self.env_cfg, &mut slot.rng)?;
                    slot.last_reward = initial_reward(&env);
                    slot.paid = 0.0;
                    slot.env = env;
                    slot.obs = flatten_observation(&obs, self.env_cfg.shots, self.env_cfg.n)?;
                } else {
                    slot.obs = flatten_observation(&step.observation, self.env_cfg.shots, self.env_cfg.n)?;
                }
            }
        }
        for (e, slot) in self.slots.iter().enumerate() {
            buf.bootstrap[e] = params.forward(&slot.obs)?.1;
        }
        self.steps += n_steps * self.slots.len();
        Ok(buf)
    }

    /// Statistics of the most recent finished episodes.
    pub fn recent_episodes(&self) -> impl Iterator<Item = &EpisodeStats> {
        self.recent.iter()
    }

    pub fn episodes_finished(&self) -> usize {
        self.episodes
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }
}

/// One transition as seen by the loss.
#[derive(Debug, Clone, Copy)]
pub struct LossSample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub old_logprob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    /// `policy + value_coef * value - entropy_coef * entropy`, minimized.
    pub total: f64,
    /// Negated mean clipped surrogate.
    pub policy: f64,
    /// Mean squared error of the value head against the returns.
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub clipped_surrogate: f64,
    pub unclipped_surrogate: f64,
}

/// PPO loss over a minibatch and its gradient with respect to every
/// parameter. Advantages are used as given.
pub fn ppo_loss(params: &PolicyParams, batch: &[LossSample<'_>], cfg: &PpoConfig) -> Result<(LossBreakdown, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Argument("empty minibatch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = vec![0.0; params.len()];
    let mut out = LossBreakdown::default();
    for s in batch {
        let (logits, value, cache) = params.forward_cached(s.obs)?;
        let logp = log_softmax(&logits);
        let h = entropy(&logp);
        let ratio = (logp[s.action] - s.old_logprob).exp();
        let clipped_ratio = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let surr1 = ratio * s.advantage;
        let surr2 = clipped_ratio * s.advantage;
        let surr = surr1.min(surr2);
        debug_assert!(surr <= surr1);

        out.unclipped_surrogate += scale * surr1;
        out.clipped_surrogate += scale * surr;
        out.value += scale * (value - s.ret).powi(2);
        out.entropy += scale * h;
        if (ratio - 1.0).abs() > cfg.clip {
            out.clip_fraction += scale;
        }
        out.approx_kl += scale * 0.5 * (logp[s.action] - s.old_logprob).powi(2);

        // d surr / d ratio: the unclipped branch carries the gradient, the
        // clipped one is flat
        let dsurr_dratio = if surr1 <= surr2 { s.advantage } else { 0.0 };
        let dpolicy = -scale * dsurr_dratio * ratio;
        let dlogits: Vec<f64> = logp
            .iter()
            .enumerate()
            .map(|(j, &lp)| {
                let p = lp.exp();
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                dpolicy * (onehot - p) + cfg.entropy_coef * scale * p * (lp + h)
            })
            .collect();
        let dvalue = cfg.value_coef * scale * 2.0 * (value - s.ret);
        params.backward(&cache, &dlogits, dvalue, &mut grads);
    }
    out.policy = -out.clipped_surrogate;
    out.total = out.policy + cfg.value_coef * out.value - cfg.entropy_coef * out.entropy;
    if !out.total.is_finite() {
        return Err(Error::Numeric(format!("non-finite PPO loss {}", out.total)));
    }
    Ok((out, grads))
}

/// Averaged diagnostics of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub minibatches: usize,
}

fn clip_grad_norm(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / (norm + 1e-6);
        grads.iter_mut().for_each(|g| *g *= s);
    }
}

/// Several epochs of minibatch updates over one rollout.
pub fn ppo_update<R: Rng + ?Sized>(
    buffer: &RolloutBuffer,
    params: &mut PolicyParams,
    opt: &mut Adam,
    cfg: &PpoConfig,
    lr: f64,
    rng: &mut R,
) -> Result<UpdateStats> {
    if !buffer.advantages_ready() {
        return Err(Error::Usage("advantages must be computed before the update".into()));
    }
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut stats = UpdateStats::default();
    for _ in 0..cfg.epochs_per_update {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let mut adv: Vec<f64> = chunk.iter().map(|&i| buffer.advantages[i]).collect();
            if cfg.normalize_advantages {
                let mean = adv.iter().sum::<f64>() / adv.len() as f64;
                let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / adv.len() as f64;
                let std = var.sqrt();
                adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
            }
            let batch: Vec<LossSample<'_>> = chunk
                .iter()
                .zip(&adv)
                .map(|(&i, &a)| LossSample {
                    obs: buffer.observation(i),
                    action: buffer.actions[i],
                    old_logprob: buffer.logprobs[i],
                    advantage: a,
                    ret: buffer.returns[i],
                })
                .collect();
            let (loss, mut grads) = ppo_loss(params, &batch, cfg)?;
            if let Some(max) = cfg.max_grad_norm {
                clip_grad_norm(&mut grads, max);
            }
            opt.step(params.as_mut_slice(), &grads, lr)?;
            stats.policy_loss += loss.policy;
            stats.value_loss += loss.value;
            stats.entropy += loss.entropy;
            stats.clip_fraction += loss.clip_fraction;
            stats.approx_kl += loss.approx_kl;
            stats.minibatches += 1;
        }
    }
    let k = stats.minibatches.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
    stats.approx_kl /= k;
    Ok(stats)
}

/// One learning-curve row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub steps: usize,
    pub mean_ep_reward: f64,
    pub mean_ep_len: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

pub const CURVE_HEADER: &str = "steps,mean_ep_reward,mean_ep_len,entropy,clip_fraction,approx_kl";

impl CurveRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.steps, self.mean_ep_reward, self.mean_ep_len, self.entropy, self.clip_fraction, self.approx_kl
        )
    }
}

pub fn write_curve<W: std::io::Write>(mut out: W, rows: &[CurveRow]) -> Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub ppo: PpoConfig,
    pub env: EnvConfig,
    pub seed: u64,
    /// Evaluate on the validation set every this many updates (0 disables).
    pub eval_every: usize,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: PolicyParams,
    /// Best validation checkpoint and its mean episode score.
    pub best: Option<(PolicyParams, f64)>,
    pub curve: Vec<CurveRow>,
    pub updates: usize,
}

/// What a checkpoint callback is being told about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckpointEvent {
    Periodic { update: usize },
    BestValidation { update: usize, score: f64 },
}

/// Alternates rollout collection and PPO updates until `total_steps`
/// environment steps have been taken.
pub fn train(
    train_set: &[Arc<ProblemInstance>],
    val_set: Option<&[Arc<ProblemInstance>]>,
    opts: &TrainOptions,
    mut on_checkpoint: impl FnMut(CheckpointEvent, &PolicyParams) -> Result<()>,
) -> Result<TrainResult> {
    opts.ppo.validate()?;
    opts.env.validate()?;
    let arch = Arch::new(opts.env.observation_len(), opts.env.num_actions());
    let mut params = PolicyParams::init(arch, &mut rng_for(opts.seed, streams::INIT, 0));
    let mut opt = Adam::new(params.len(), opts.ppo.adam_epsilon);
    let mut collector =
        Collector::new(train_set, &opts.env, opts.ppo.n_envs, opts.seed)?.with_signal(opts.ppo.reward_signal);
    let mut mb_rng = rng_for(opts.seed, streams::MINIBATCH, 0);
    let mut curve = Vec::new();
    let mut best: Option<(PolicyParams, f64)> = None;

    let updates = opts.ppo.num_updates();
    let total = updates * opts.ppo.batch_size();
    for update in 1..=updates {
        let lr = linear_lr(opts.ppo.lr_initial, collector.steps_taken(), total);
        let mut buffer = collector.collect(&params, opts.ppo.n_steps)?;
        buffer.compute_advantages(opts.ppo.discount, opts.ppo.gae_lambda)?;
        let stats = ppo_update(&buffer, &mut params, &mut opt, &opts.ppo, lr, &mut mb_rng)?;

        let recent: Vec<&EpisodeStats> = collector.recent_episodes().collect();
        let (mean_r, mean_l) = if recent.is_empty() {
            (0.0, 0.0)
        } else {
            let k = recent.len() as f64;
            (
                recent.iter().map(|e| e.total_reward).sum::<f64>() / k,
                recent.iter().map(|e| e.length as f64).sum::<f64>() / k,
            )
        };
        curve.push(CurveRow {
            steps: collector.steps_taken(),
            mean_ep_reward: mean_r,
            mean_ep_len: mean_l,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            approx_kl: stats.approx_kl,
        });

        let last = update == updates;
        if let Some(val) = val_set {
            if (opts.eval_every > 0 && update % opts.eval_every == 0) || last {
                let records = evaluate(Agent::Trained(&params), val, &opts.env, opts.seed)?;
                let score = records.iter().map(|r| r.score).sum::<f64>() / records.len().max(1) as f64;
                if best.as_ref().is_none_or(|(_, s)| score > *s) {
                    on_checkpoint(CheckpointEvent::BestValidation { update, score }, &params)?;
                    best = Some((params.clone(), score));
                }
            }
        }
        if (opts.eval_every > 0 && update % opts.eval_every == 0) || last {
            on_checkpoint(CheckpointEvent::Periodic { update }, &params)?;
        }
    }
    Ok(TrainResult { params, best, curve, updates })
}

/// Policy driving evaluation episodes.
#[derive(Debug, Clone, Copy)]
pub enum Agent<'a> {
    Trained(&'a PolicyParams),
    /// Uniformly random actions.
    Untrained,
}

impl Agent<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            Agent::Trained(_) => "trained",
            Agent::Untrained => "untrained",
        }
    }

    pub fn choose<R: Rng + ?Sized>(&self, obs: &[f64], num_actions: usize, rng: &mut R) -> Result<usize> {
        match self {
            Agent::Trained(p) => Ok(sample_action(&p.forward(obs)?.0, rng)?.action),
            Agent::Untrained => Ok(rng.gen_range(0..num_actions)),
        }
    }
}

/// Plays one episode to completion with sampled actions.
pub fn run_episode<R: Rng + ?Sized>(
    agent: Agent<'_>,
    instance: Arc<ProblemInstance>,
    cfg: &EnvConfig,
    rng: &mut R,
) -> Result<Env> {
    if let Agent::Trained(p) = agent {
        let a = p.arch();
        if a.input != cfg.observation_len() || a.actions != cfg.num_actions() {
            return Err(Error::Config(format!(
                "checkpoint expects {} inputs / {} actions, environment has {} / {}",
                a.input,
                a.actions,
                cfg.observation_len(),
                cfg.num_actions()
            )));
        }
    }
    let (mut env, obs) = Env::reset(instance, cfg, rng)?;
    let mut x = flatten_observation(&obs, cfg.shots, cfg.n)?;
    while !env.is_done() {
        let action = agent.choose(&x, cfg.num_actions(), rng)?;
        let step = env.step(action, rng)?;
        x = flatten_observation(&step.observation, cfg.shots, cfg.n)?;
    }
    Ok(env)
}

/// One episode per instance. Instance `i` uses its own random stream derived
/// from `seed` and `i`, so results do not depend on scheduling and different
/// agents see identical instance order.
pub fn evaluate(
    agent: Agent<'_>,
    instances: &[Arc<ProblemInstance>],
    cfg: &EnvConfig,
    seed: u64,
) -> Result<Vec<EpisodeRecord>> {
    instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let mut rng = rng_for(seed, streams::EVAL_EPISODE, i as u64);
            let env = run_episode(agent, inst.clone(), cfg, &mut rng)?;
            let mut rec = env.record()?;
            let k = steps_to_score(env.rewards())?;
            rec.agent = Some(agent.label().to_string());
            rec.steps_to_score = Some(k);
            rec.compiled_len = Some(transpiler::transpile(&env.program()[..k])?.len());
            Ok(rec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemKind;
    use rand::SeedableRng;

    #[test]
    fn gae_zero_inputs() {
        let (a, r) = compute_gae(&[0.0; 4], &[0.0; 4], &[false; 4], 0.0, 0.99, 0.95).unwrap();
        assert_eq!(a, vec![0.0; 4]);
        assert_eq!(r, vec![0.0; 4]);
    }

    #[test]
    fn gae_terminal_step() {
        let (a, r) = compute_gae(&[0.7], &[0.3], &[true], 123.0, 0.99, 0.95).unwrap();
        assert!((a[0] - 0.4).abs() < 1e-15);
        assert!((r[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn gae_monte_carlo_limit() {
        // lambda = 1, discount = 1: advantage = empirical return - value
        let rewards = [0.1, 0.5, 0.2, 0.9, 0.4, 0.3];
        let values = [0.3, -0.2, 0.8, 0.1, 0.05, 0.6];
        let dones = [false, false, true, false, false, false];
        let bootstrap = 0.25;
        let (a, _) = compute_gae(&rewards, &values, &dones, bootstrap, 1.0, 1.0).unwrap();
        let returns = [0.8, 0.7, 0.2, 0.9 + 0.4 + 0.3 + 0.25, 0.4 + 0.3 + 0.25, 0.3 + 0.25];
        for t in 0..6 {
            assert!((a[t] - (returns[t] - values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_schedule() {
        assert_eq!(linear_lr(2.5e-4, 0, 1000), 2.5e-4);
        for t in [1usize, 250, 512, 999, 1000] {
            let expect = 2.5e-4 * (1.0 - t as f64 / 1000.0);
            assert!((linear_lr(2.5e-4, t, 1000) - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn sampler_cycles_every_instance() {
        let insts: Vec<_> =
            (0..7).map(|s| Arc::new(ProblemInstance::generate(ProblemKind::MaxCut, 4, s).unwrap())).collect();
        let mut s = InstanceSampler::new(insts, ChaCha8Rng::seed_from_u64(0)).unwrap();
        for _ in 0..3 {
            let mut seen: Vec<u64> = (0..7).map(|_| s.next_instance().seed()).collect();
            seen.sort();
            assert_eq!(seen, (0..7).collect::<Vec<_>>());
        }
        assert!(InstanceSampler::new(vec![], ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn update_requires_advantages() {
        let arch = Arch::new(4, 3);
        let mut p = PolicyParams::zeros(arch);
        let mut opt = Adam::new(p.len(), 1e-5);
        let buf = RolloutBuffer::new(1, 1, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = ppo_update(&buf, &mut p, &mut opt, &PpoConfig::default(), 1e-3, &mut rng);
        assert!(matches!(err, Err(Error::Usage(_))));
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig { discount: 0.0, ..PpoConfig::default() }.validate().is_err());
        assert!(PpoConfig { gae_lambda: 1.5, ..PpoConfig::default() }.validate().is_err());
        assert!(PpoConfig { clip: 0.0, ..PpoConfig::default() }.validate().is_err());
        assert_eq!(PpoConfig { total_steps: 512, ..PpoConfig::default() }.num_updates(), 1);
    }
}
