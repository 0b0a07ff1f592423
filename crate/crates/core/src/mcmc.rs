//! Metropolis-Hastings over time-window partitions.
//!
//! Each step picks one of three edits with probability 1/3: split a window
//! in two, join two adjacent windows, or move the cut between two adjacent
//! windows. Draws that cannot be carried out (splitting a width-1 window,
//! joining or moving when there is a single window) leave the state
//! unchanged. This keeps every proposal probability equal to the stated
//! closed forms, which is what makes the acceptance ratio exact.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{TemporalGraph, WindowPartition};
use crate::htcm::{CachedEvaluator, Edit, PriorMode, WindowEvaluator};

/// Starting partition of a chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    #[default]
    SingleWindow,
    AllSingletons,
    Given(WindowPartition),
}

/// Inverse-temperature schedule. `beta` divides the description-length
/// difference, so small values make the chain greedy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaSchedule {
    Fixed(f64),
    /// Geometric interpolation from `start` at the first sweep to `end` at
    /// the last.
    Geometric { start: f64, end: f64 },
    /// Piecewise constant: `(sweep, beta)` pairs, each active from its sweep on.
    Steps(Vec<(usize, f64)>),
}

impl BetaSchedule {
    pub fn beta_at(&self, sweep: usize, sweeps: usize, base: f64) -> f64 {
        match self {
            BetaSchedule::Fixed(b) => *b,
            BetaSchedule::Geometric { start, end } => {
                if sweeps <= 1 {
                    return *start;
                }
                let frac = sweep as f64 / (sweeps - 1) as f64;
                start * (end / start).powf(frac)
            }
            BetaSchedule::Steps(steps) => steps
                .iter()
                .filter(|(s, _)| *s <= sweep)
                .max_by_key(|(s, _)| *s)
                .map_or(base, |(_, b)| *b),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            BetaSchedule::Fixed(b) => *b > 0.0,
            BetaSchedule::Geometric { start, end } => *start > 0.0 && *end > 0.0,
            BetaSchedule::Steps(s) => s.iter().all(|(_, b)| *b > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("every beta in the schedule must be positive"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub beta: f64,
    pub sweeps: usize,
    pub seed: u64,
    pub init: Init,
    /// Overrides `beta` when present.
    pub schedule: Option<BetaSchedule>,
    pub chains: usize,
    /// Proposals per sweep; defaults to the number of time steps.
    pub moves_per_sweep: Option<usize>,
    /// Stop a chain after this many sweeps without a new best partition.
    pub plateau: Option<usize>,
    /// Record the current partition every this many sweeps.
    pub sample_every: Option<usize>,
}

impl ChainConfig {
    /// Fixed-temperature sampling.
    pub fn sampling(beta: f64, sweeps: usize, seed: u64) -> Self {
        ChainConfig {
            beta,
            sweeps,
            seed,
            init: Init::SingleWindow,
            schedule: None,
            chains: 1,
            moves_per_sweep: None,
            plateau: None,
            sample_every: None,
        }
    }

    /// Optimization with geometric annealing from beta = 1 to 0.05.
    pub fn annealing(sweeps: usize, seed: u64) -> Self {
        ChainConfig {
            schedule: Some(BetaSchedule::Geometric { start: 1.0, end: 0.05 }),
            ..Self::sampling(1.0, sweeps, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta must be positive"));
        }
        if self.sweeps < 1 {
            return Err(Error::invalid("sweeps must be at least 1"));
        }
        if self.chains < 1 {
            return Err(Error::invalid("chains must be at least 1"));
        }
        if self.moves_per_sweep == Some(0) || self.sample_every == Some(0) {
            return Err(Error::invalid("moves per sweep and sample stride must be positive"));
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        Ok(())
    }

    fn beta_at(&self, sweep: usize) -> f64 {
        match &self.schedule {
            Some(s) => s.beta_at(sweep, self.sweeps, self.beta),
            None => self.beta,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub split: MoveStats,
    pub join: MoveStats,
    #[serde(rename = "move")]
    pub shift: MoveStats,
    /// Draws that could not be carried out and left the state unchanged.
    pub degenerate: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sweep: usize,
    pub partition: WindowPartition,
    pub bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    /// Index of the chain that produced the best partition.
    pub chain: usize,
    pub best_partition: WindowPartition,
    pub best_bits: f64,
    pub acceptance: AcceptanceStats,
    pub samples: Vec<Sample>,
    /// Description length of the current state at the end of each sweep.
    pub trace: Vec<f64>,
    /// Best description length seen up to the end of each sweep.
    pub best_trace: Vec<f64>,
}

impl ChainResult {
    /// JSON with partition boundaries as cumulative times; the traces are
    /// thinned to every `trace_stride`-th sweep (and the last one).
    pub fn to_json(&self, trace_stride: usize) -> serde_json::Value {
        let stride = trace_stride.max(1);
        let thin = |v: &[f64]| -> Vec<f64> {
            let mut out: Vec<f64> = v.iter().copied().step_by(stride).collect();
            if !v.is_empty() && (v.len() - 1) % stride != 0 {
                out.push(v[v.len() - 1]);
            }
            out
        };
        serde_json::json!({
            "chain": self.chain,
            "boundaries": self.best_partition.boundaries(),
            "widths": self.best_partition.widths(),
            "windows": self.best_partition.len(),
            "bits": self.best_bits,
            "acceptance": {
                "split": { "proposed": self.acceptance.split.proposed, "accepted": self.acceptance.split.accepted, "rate": self.acceptance.split.rate() },
                "join": { "proposed": self.acceptance.join.proposed, "accepted": self.acceptance.join.accepted, "rate": self.acceptance.join.rate() },
                "move": { "proposed": self.acceptance.shift.proposed, "accepted": self.acceptance.shift.accepted, "rate": self.acceptance.shift.rate() },
                "degenerate": self.acceptance.degenerate,
            },
            "trace_stride": stride,
            "trace": thin(&self.trace),
            "best_trace": thin(&self.best_trace),
        })
    }
}

/// A proposed edit with natural-log forward and reverse proposal
/// probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proposal {
    pub edit: Edit,
    pub log_forward: f64,
    pub log_backward: f64,
}

const LN_THIRD: f64 = -1.098_612_288_668_109_8;

/// Draws one edit of the partition with the given widths, or `None` when the
/// draw is degenerate.
pub fn propose_widths<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Option<Proposal> {
    let z = widths.len();
    match rng.random_range(0..3u8) {
        0 => {
            let window = rng.random_range(0..z);
            let width = widths[window];
            if width < 2 {
                return None;
            }
            let at = rng.random_range(1..width);
            // reverse: pick the new adjacent pair among z of the z + 1 windows
            Some(Proposal {
                edit: Edit::Split { window, at },
                log_forward: LN_THIRD - (z as f64).ln() - ((width - 1) as f64).ln(),
                log_backward: LN_THIRD - (z as f64).ln(),
            })
        }
        1 => {
            if z < 2 {
                return None;
            }
            let window = rng.random_range(0..z - 1);
            let merged = widths[window] + widths[window + 1];
            Some(Proposal {
                edit: Edit::Join { window },
                log_forward: LN_THIRD - ((z - 1) as f64).ln(),
                log_backward: LN_THIRD - ((z - 1) as f64).ln() - ((merged - 1) as f64).ln(),
            })
        }
        _ => {
            if z < 2 {
                return None;
            }
            let window = rng.random_range(0..z - 1);
            let merged = widths[window] + widths[window + 1];
            let at = rng.random_range(1..merged);
            let lp = LN_THIRD - ((z - 1) as f64).ln() - ((merged - 1) as f64).ln();
            Some(Proposal { edit: Edit::Move { window, at }, log_forward: lp, log_backward: lp })
        }
    }
}

pub fn propose<R: Rng + ?Sized>(p: &WindowPartition, rng: &mut R) -> Option<Proposal> {
    propose_widths(p.widths(), rng)
}

/// Metropolis-Hastings acceptance probability for a description-length
/// change of `delta_bits` at temperature `beta`.
pub fn accept_probability(delta_bits: f64, log_forward: f64, log_backward: f64, beta: f64) -> f64 {
    let log_ratio = -LN_2 * delta_bits / beta + log_backward - log_forward;
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn initial_widths(init: &Init, steps: usize) -> Result<Vec<usize>> {
    let p = match init {
        Init::SingleWindow => WindowPartition::single(steps)?,
        Init::AllSingletons => WindowPartition::singletons(steps)?,
        Init::Given(p) => {
            p.check_steps(steps)?;
            p.clone()
        }
    };
    Ok(p.widths().to_vec())
}

fn starts_of(widths: &[usize]) -> Vec<usize> {
    widths
        .iter()
        .scan(0, |acc, w| {
            let s = *acc;
            *acc += w;
            Some(s)
        })
        .collect()
}

/// Runs a single chain against a prepared evaluator.
pub fn run_chain(eval: &WindowEvaluator<'_>, cfg: &ChainConfig, chain: usize) -> Result<ChainResult> {
    cfg.validate()?;
    let steps = eval.steps();
    let mut rng = chain_rng(cfg.seed, chain);
    let mut cache = CachedEvaluator::new(eval);
    let mut widths = initial_widths(&cfg.init, steps)?;
    let mut starts = starts_of(&widths);
    let mut bits = cache.total_bits(&widths, PriorMode::General);
    let mut best_widths = widths.clone();
    let mut best_bits = bits;
    let mut stats = AcceptanceStats::default();
    let mut trace = Vec::with_capacity(cfg.sweeps);
    let mut best_trace = Vec::with_capacity(cfg.sweeps);
    let mut samples = Vec::new();
    let moves = cfg.moves_per_sweep.unwrap_or(steps).max(1);
    let mut last_improvement = 0usize;

    for sweep in 0..cfg.sweeps {
        let beta = cfg.beta_at(sweep);
        for _ in 0..moves {
            let Some(prop) = propose_widths(&widths, &mut rng) else {
                stats.degenerate += 1;
                continue;
            };
            let slot = match prop.edit {
                Edit::Split { .. } => &mut stats.split,
                Edit::Join { .. } => &mut stats.join,
                Edit::Move { .. } => &mut stats.shift,
            };
            slot.proposed += 1;
            let delta = cache.edit_delta(&starts, &widths, prop.edit);
            let a = accept_probability(delta, prop.log_forward, prop.log_backward, beta);
            if a >= 1.0 || rng.random::<f64>() < a {
                slot.accepted += 1;
                prop.edit.apply_unchecked(&mut widths);
                starts = starts_of(&widths);
                bits = cache.total_bits(&widths, PriorMode::General);
                if bits < best_bits {
                    best_bits = bits;
                    best_widths.clone_from(&widths);
                    last_improvement = sweep;
                }
            }
        }
        trace.push(bits);
        best_trace.push(best_bits);
        if let Some(k) = cfg.sample_every {
            if (sweep + 1) % k == 0 {
                samples.push(Sample { sweep, partition: WindowPartition::new(widths.clone())?, bits });
            }
        }
        if let Some(plateau) = cfg.plateau {
            if sweep - last_improvement >= plateau {
                break;
            }
        }
    }

    Ok(ChainResult {
        chain,
        best_partition: WindowPartition::new(best_widths)?,
        best_bits,
        acceptance: stats,
        samples,
        trace,
        best_trace,
    })
}

/// Runs `cfg.chains` independent chains in parallel and returns the one with
/// the lowest description length (lowest chain index on ties).
pub fn run(g: &TemporalGraph, cfg: &ChainConfig) -> Result<ChainResult> {
    cfg.validate()?;
    let eval = WindowEvaluator::new(g);
    let results: Vec<ChainResult> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(&eval, cfg, c))
        .collect::<Result<_>>()?;
    Ok(results
        .into_iter()
        .reduce(|best, r| if r.best_bits < best.best_bits { r } else { best })
        .expect("at least one chain"))
}
