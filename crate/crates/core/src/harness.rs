//! Dataset generation, multi-agent evaluation, summary statistics and the
//! CSV/JSON report bundle.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{decode_action, num_actions, EnvConfig, EpisodeRecord};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::ppo::{self, Agent};
use crate::problems::{InstanceRecord, ProblemInstance, ProblemKind};
use crate::qaoa::{self, QaoaConfig};
use crate::seeding::{rng_for, streams};
use crate::statevec::{format_angle, GateOp};

/// Score histogram resolution on `[0, 1]`.
pub const SCORE_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.jsonl", self.as_str())
    }

    /// Start of this split's instance-seed range. Ranges are `2^40` wide, so
    /// splits never share a seed.
    fn seed_base(&self) -> u64 {
        (*self as u64) << 40
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Argument(format!("unknown split `{other}`"))),
        }
    }
}

/// Instances per kind in each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kinds: Vec<ProblemKind>,
    pub n: usize,
    pub counts: SplitCounts,
    pub root_seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::Config("dataset needs at least one problem kind".into()));
        }
        let mut kinds = self.kinds.clone();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.kinds.len() {
            return Err(Error::Config("problem kinds listed twice".into()));
        }
        for split in Split::ALL {
            let c = self.counts.get(split);
            if c == 0 {
                return Err(Error::Config(format!("{} count must be at least 1", split.as_str())));
            }
            if c as u64 >= 1 << 32 {
                return Err(Error::Config(format!("{} count {c} too large", split.as_str())));
            }
        }
        Ok(())
    }
}

/// Instance seed for index `i` of `kind` within `split`; unique across the
/// whole dataset.
pub fn instance_seed(split: Split, kind: ProblemKind, index: usize) -> u64 {
    let kind_slot = ProblemKind::ALL.iter().position(|k| *k == kind).expect("known kind") as u64;
    split.seed_base() | (kind_slot << 32) | index as u64
}

/// Generates one split as file records with extremes filled in. The cost
/// tables are dropped as soon as the extremes are known.
pub fn build_split(spec: &DatasetSpec, split: Split) -> Result<Vec<InstanceRecord>> {
    spec.validate()?;
    let count = spec.counts.get(split);
    let jobs: Vec<(ProblemKind, u64)> =
        spec.kinds.iter().flat_map(|&k| (0..count).map(move |i| (k, instance_seed(split, k, i)))).collect();
    let mut records = jobs
        .par_iter()
        .map(|&(kind, seed)| {
            let mut rng = rng_for(spec.root_seed, streams::INSTANCE, seed);
            let inst = ProblemInstance::generate_with(kind, spec.n, seed, &mut rng)?;
            inst.extremes();
            Ok(InstanceRecord::from(&inst))
        })
        .collect::<Result<Vec<_>>>()?;
    if spec.kinds.len() > 1 {
        records.shuffle(&mut rng_for(spec.root_seed, streams::SPLIT_SHUFFLE, split as u64));
    }
    Ok(records)
}

/// Line counts of the files written by [`gen_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec: DatasetSpec,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub rows: usize,
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `train.jsonl`, `val.jsonl` and `test.jsonl` under `out_dir`.
pub fn gen_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for split in Split::ALL {
        let records = build_split(spec, split)?;
        write_jsonl(&out_dir.join(split.file_name()), &records)?;
        files.push(FileEntry { name: split.file_name(), rows: records.len() });
    }
    Ok(DatasetManifest { spec: spec.clone(), files })
}

/// In-memory instances for one split.
pub fn build_instances(spec: &DatasetSpec, split: Split) -> Result<Vec<ProblemInstance>> {
    build_split(spec, split)?.into_iter().map(ProblemInstance::try_from).collect()
}

pub fn load_episodes(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

pub fn save_episodes(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    write_jsonl(path, records)
}

/// An agent or baseline to run over a dataset.
#[derive(Debug, Clone)]
pub enum EvalAgent {
    Trained(PolicyParams),
    Untrained,
    Qaoa(QaoaConfig),
}

impl EvalAgent {
    pub fn label(&self) -> &'static str {
        match self {
            EvalAgent::Trained(_) => "trained",
            EvalAgent::Untrained => "untrained",
            EvalAgent::Qaoa(_) => "qaoa",
        }
    }
}

/// One episode (or QAOA run) per instance per agent. Every agent sees the
/// instances in dataset order with the same per-instance seeds.
pub fn run_eval(
    agents: &[EvalAgent],
    dataset: &[ProblemInstance],
    cfg: &EnvConfig,
    seed: u64,
) -> Result<(EvalSummary, Vec<EpisodeRecord>)> {
    let shared: Vec<Arc<ProblemInstance>> = dataset.iter().cloned().map(Arc::new).collect();
    let mut records = Vec::new();
    for agent in agents {
        let recs = match agent {
            EvalAgent::Trained(p) => ppo::evaluate(Agent::Trained(p), &shared, cfg, seed)?,
            EvalAgent::Untrained => ppo::evaluate(Agent::Untrained, &shared, cfg, seed)?,
            EvalAgent::Qaoa(q) => qaoa::run_dataset(dataset, q, cfg.win_threshold, seed)?,
        };
        records.extend(recs);
    }
    let summary = EvalSummary::from_records(&records, cfg.n)?;
    Ok((summary, records))
}

fn agent_of(rec: &EpisodeRecord) -> &str {
    rec.agent.as_deref().unwrap_or("unknown")
}

/// Statistics for one `(agent, kind)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub score_hist: Vec<u64>,
    /// Instructions-to-score value -> episodes.
    pub steps_hist: BTreeMap<usize, u64>,
    /// Per action id; empty for baselines that do not use the action set.
    pub action_counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub n: usize,
    pub groups: BTreeMap<(String, String), GroupSummary>,
}

/// Histogram bin of a score in `[0, 1]`; 1.0 lands in the last bin.
pub fn score_bin(score: f64) -> usize {
    ((score * SCORE_BINS as f64).floor().max(0.0) as usize).min(SCORE_BINS - 1)
}

impl EvalSummary {
    pub fn from_records(records: &[EpisodeRecord], n: usize) -> Result<Self> {
        let a = num_actions(n);
        let mut buckets: BTreeMap<(String, String), Vec<&EpisodeRecord>> = BTreeMap::new();
        for rec in records {
            buckets.entry((agent_of(rec).to_string(), rec.kind.clone())).or_default().push(rec);
        }
        let mut groups = BTreeMap::new();
        for (key, recs) in buckets {
            let count = recs.len();
            let mean = recs.iter().map(|r| r.score).sum::<f64>() / count as f64;
            let var = recs.iter().map(|r| (r.score - mean).powi(2)).sum::<f64>() / count as f64;
            let mut score_hist = vec![0u64; SCORE_BINS];
            let mut steps_hist = BTreeMap::new();
            let mut action_counts = vec![0u64; a];
            let mut any_actions = false;
            for r in &recs {
                score_hist[score_bin(r.score)] += 1;
                if let Some(k) = r.steps_to_score {
                    *steps_hist.entry(k).or_insert(0) += 1;
                }
                for &id in &r.actions {
                    if id >= a {
                        return Err(Error::Format(format!("action id {id} out of range for {a} actions")));
                    }
                    action_counts[id] += 1;
                    any_actions = true;
                }
            }
            if !any_actions {
                action_counts.clear();
            }
            groups.insert(key, GroupSummary { count, mean, std: var.sqrt(), score_hist, steps_hist, action_counts });
        }
        Ok(Self { n, groups })
    }
}

/// Normalized action usage plus the same mass grouped by gate family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionFrequencies {
    pub total: u64,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    /// `("RX(pi/4)", f)` for every axis and angle, then `("CNOT", f)`.
    pub families: Vec<(String, f64)>,
}

/// Family label of an action, ignoring its qubits.
pub fn action_family(gate: &GateOp) -> String {
    match *gate {
        GateOp::Rx { angle, .. } => format!("RX({})", format_angle(angle)),
        GateOp::Ry { angle, .. } => format!("RY({})", format_angle(angle)),
        GateOp::Rz { angle, .. } => format!("RZ({})", format_angle(angle)),
        GateOp::Cnot { .. } => "CNOT".into(),
        GateOp::H { .. } => "H".into(),
        GateOp::Cz { .. } => "CZ".into(),
        GateOp::PhaseZz { .. } => "PHASEZZ".into(),
    }
}

pub fn action_frequencies(records: &[EpisodeRecord], n: usize) -> Result<ActionFrequencies> {
    let a = num_actions(n);
    let mut counts = vec![0u64; a];
    for rec in records {
        for &id in &rec.actions {
            *counts
                .get_mut(id)
                .ok_or_else(|| Error::Format(format!("action id {id} out of range for {a} actions")))? += 1;
        }
    }
    frequencies_from_counts(counts, n)
}

pub fn frequencies_from_counts(counts: Vec<u64>, n: usize) -> Result<ActionFrequencies> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Argument("no actions to count".into()));
    }
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let mut family_order: Vec<String> = Vec::new();
    let mut family_mass: BTreeMap<String, u64> = BTreeMap::new();
    for (id, &c) in counts.iter().enumerate() {
        let label = action_family(&decode_action(id, n)?);
        if !family_mass.contains_key(&label) {
            family_order.push(label.clone());
        }
        *family_mass.entry(label).or_insert(0) += c;
    }
    let families = family_order
        .into_iter()
        .map(|l| {
            let f = family_mass[&l] as f64 / total as f64;
            (l, f)
        })
        .collect();
    Ok(ActionFrequencies { total, counts, frequencies, families })
}

/// Everything [`emit_report`] wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub files: Vec<FileEntry>,
}

struct CsvFile {
    name: &'static str,
    header: &'static str,
    rows: Vec<String>,
}

impl CsvFile {
    fn new(name: &'static str, header: &'static str) -> Self {
        Self { name, header, rows: Vec::new() }
    }

    fn write(&self, dir: &Path) -> Result<FileEntry> {
        let mut w = BufWriter::new(File::create(dir.join(self.name))?);
        writeln!(w, "{}", self.header)?;
        for r in &self.rows {
            writeln!(w, "{r}")?;
        }
        w.flush()?;
        Ok(FileEntry { name: self.name.to_string(), rows: self.rows.len() })
    }
}

fn opt_field<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the plot-ready tables and `manifest.json` into `out_dir`. The
/// output depends only on `records` (in order) and `n`.
pub fn emit_report(records: &[EpisodeRecord], n: usize, out_dir: &Path) -> Result<ReportManifest> {
    if records.is_empty() {
        return Err(Error::Argument("no episode records to report".into()));
    }
    let summary = EvalSummary::from_records(records, n)?;
    std::fs::create_dir_all(out_dir)?;

    let mut scores = CsvFile::new("scores.csv", "agent,kind,score");
    let mut lengths = CsvFile::new("lengths.csv", "agent,kind,instance_seed,episode_len,steps_to_score,compiled_len");
    for r in records {
        let agent = agent_of(r);
        scores.rows.push(format!("{agent},{},{}", r.kind, r.score));
        lengths.rows.push(format!(
            "{agent},{},{},{},{},{}",
            r.kind,
            r.instance_seed,
            r.rewards.len(),
            opt_field(r.steps_to_score),
            opt_field(r.compiled_len)
        ));
    }

    let mut stats = CsvFile::new("summary.csv", "agent,kind,count,mean,std");
    let mut hist = CsvFile::new("score_hist.csv", "agent,kind,bin,lo,hi,count");
    let mut steps = CsvFile::new("steps_hist.csv", "agent,kind,steps_to_score,count");
    for ((agent, kind), g) in &summary.groups {
        stats.rows.push(format!("{agent},{kind},{},{},{}", g.count, g.mean, g.std));
        for (b, c) in g.score_hist.iter().enumerate() {
            let lo = b as f64 / SCORE_BINS as f64;
            let hi = (b + 1) as f64 / SCORE_BINS as f64;
            hist.rows.push(format!("{agent},{kind},{b},{lo},{hi},{c}"));
        }
        for (k, c) in &g.steps_hist {
            steps.rows.push(format!("{agent},{kind},{k},{c}"));
        }
    }

    let mut freq = CsvFile::new("frequencies.csv", "agent,action,gate,count,frequency");
    let mut fam = CsvFile::new("family_frequencies.csv", "agent,family,frequency");
    let mut by_agent: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
    for ((agent, _), g) in &summary.groups {
        if g.action_counts.is_empty() {
            continue;
        }
        let acc = by_agent.entry(agent.as_str()).or_insert_with(|| vec![0; g.action_counts.len()]);
        for (a, c) in acc.iter_mut().zip(&g.action_counts) {
            *a += c;
        }
    }
    for (agent, counts) in by_agent {
        let f = frequencies_from_counts(counts, n)?;
        for (id, (&c, &p)) in f.counts.iter().zip(&f.frequencies).enumerate() {
            freq.rows.push(format!("{agent},{id},{},{c},{p}", decode_action(id, n)?));
        }
        for (label, p) in &f.families {
            fam.rows.push(format!("{agent},{label},{p}"));
        }
    }

    let mut files = Vec::new();
    for table in [&scores, &lengths, &stats, &hist, &steps, &freq, &fam] {
        files.push(table.write(out_dir)?);
    }
    let manifest = ReportManifest { files };
    let mut w = BufWriter::new(File::create(out_dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(manifest)
}

/// Splits a dataset directory or file argument into the file to read.
pub fn split_path(data: &Path, split: Split) -> PathBuf {
    if data.is_dir() {
        data.join(split.file_name())
    } else {
        data.to_path_buf()
    }
}
