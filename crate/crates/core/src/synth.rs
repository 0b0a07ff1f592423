//! Generative sampler for the temporal configuration model.
//!
//! A window draws its edge count, then independent out- and in-activities,
//! then a multivariate hypergeometric adjacency matrix from the activity
//! urn, and finally scatters each cell's edges uniformly over the window's
//! steps. Several independently sampled processes can be overlaid on the
//! same node set.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Binomial, Distribution, Gamma, Hypergeometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Event, TemporalGraph, WindowPartition};
use crate::hcm::{ActivityVectors, CellCounts};

/// Largest distance between the realized and requested degree CV.
pub const CV_TOLERANCE: f64 = 0.05;
const CV_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeBudget {
    /// Exactly this many events, split multinomially with weights `Δ_τ/T`.
    Total(u64),
    /// Each window draws `Poisson(mean)` events.
    PerWindow(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub nodes: usize,
    pub partition: WindowPartition,
    pub edges: EdgeBudget,
    /// Target coefficient of variation of the activities; `None` draws
    /// uniform weak compositions.
    pub degree_cv: Option<f64>,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::invalid("nodes must be at least 1"));
        }
        if let Some(cv) = self.degree_cv {
            if !(0.0..=1.0).contains(&cv) {
                return Err(Error::InfeasibleCv { target: cv, range: "[0, 1]".into() });
            }
        }
        if let EdgeBudget::PerWindow(mean) = self.edges {
            if !(mean >= 0.0 && mean.is_finite()) {
                return Err(Error::invalid("edges per window must be a finite non-negative number"));
            }
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Multinomial split of `total` edges over the windows of `p` with
/// probabilities `Δ_τ / T`.
pub fn sample_edge_counts<R: Rng + ?Sized>(total: u64, p: &WindowPartition, rng: &mut R) -> Vec<u64> {
    let mut left = total;
    let mut mass = p.steps() as f64;
    let widths = p.widths();
    let mut out = Vec::with_capacity(widths.len());
    for (i, &w) in widths.iter().enumerate() {
        if i + 1 == widths.len() {
            out.push(left);
            break;
        }
        let prob = (w as f64 / mass).min(1.0);
        let k = if left == 0 { 0 } else { Binomial::new(left, prob).expect("valid binomial").sample(rng) };
        out.push(k);
        left -= k;
        mass -= w as f64;
    }
    out
}

/// Uniformly random weak composition of `m` into `n` parts (stars and bars).
pub fn sample_weak_composition<R: Rng + ?Sized>(n: usize, m: u64, rng: &mut R) -> Vec<u64> {
    if n == 1 {
        return vec![m];
    }
    let slots = m as usize + n - 1;
    let mut bars: Vec<usize> = sample_indices(rng, slots, n - 1).into_vec();
    bars.sort_unstable();
    let mut parts = Vec::with_capacity(n);
    let mut prev = 0usize;
    for (i, &b) in bars.iter().enumerate() {
        // stars before bar i, after the previous bar
        let start = if i == 0 { 0 } else { prev + 1 };
        parts.push((b - start) as u64);
        prev = b;
    }
    let start = if bars.is_empty() { 0 } else { prev + 1 };
    parts.push((slots - start) as u64);
    parts
}

/// Population coefficient of variation; zero for an all-zero vector.
pub fn coefficient_of_variation(values: &[u64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<u64>() as f64 / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

fn even_split<R: Rng + ?Sized>(n: usize, m: u64, rng: &mut R) -> Vec<u64> {
    let base = m / n as u64;
    let extra = (m % n as u64) as usize;
    let mut parts = vec![base; n];
    for i in sample_indices(rng, n, extra) {
        parts[i] += 1;
    }
    parts
}

fn multinomial<R: Rng + ?Sized>(m: u64, weights: &[f64], rng: &mut R) -> Vec<u64> {
    let mut left = m;
    let mut mass: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        if i + 1 == weights.len() {
            out.push(left);
            break;
        }
        let prob = if mass > 0.0 { (w / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = if left == 0 || prob == 0.0 {
            0
        } else {
            Binomial::new(left, prob).expect("valid binomial").sample(rng)
        };
        out.push(k);
        left -= k;
        mass -= w;
    }
    out
}

/// One activity vector with coefficient of variation close to `cv`.
///
/// Above the multinomial floor `(N-1)/m` the weights come from a symmetric
/// Dirichlet whose concentration makes the expected squared CV equal to
/// `cv²`; below it, a share of the edges is spread evenly and the rest is
/// allocated uniformly at random. Draws are repeated until the realized CV
/// is within [`CV_TOLERANCE`]. Small `m` makes the attainable CVs sparse;
/// when no draw lands within tolerance the closest one is kept.
fn sample_cv_vector<R: Rng + ?Sized>(n: usize, m: u64, cv: f64, rng: &mut R) -> Result<Vec<u64>> {
    let nf = n as f64;
    let mf = m as f64;
    let max_cv = (nf - 1.0).sqrt();
    let range = || format!("[0, {max_cv:.4}) for N = {n}");
    if cv == 0.0 || m == 0 {
        return Ok(even_split(n, m, rng));
    }
    if n < 2 || cv >= max_cv {
        return Err(Error::InfeasibleCv { target: cv, range: range() });
    }
    let c2 = cv * cv;
    let floor = (nf - 1.0) / mf;
    let mut closest: Option<(f64, Vec<u64>)> = None;
    for _ in 0..CV_ATTEMPTS {
        let parts = if c2 <= floor {
            let random = ((c2 * mf * mf / (nf - 1.0)).round() as u64).min(m);
            let mut parts = even_split(n, m - random, rng);
            for (p, r) in parts.iter_mut().zip(multinomial(random, &vec![1.0; n], rng)) {
                *p += r;
            }
            parts
        } else {
            let alpha = mf * (nf - 1.0 - c2) / (nf * (c2 * mf - nf + 1.0));
            let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
            let weights: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
            if weights.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            multinomial(m, &weights, rng)
        };
        let miss = (coefficient_of_variation(&parts) - cv).abs();
        if miss <= CV_TOLERANCE {
            return Ok(parts);
        }
        if closest.as_ref().is_none_or(|(best, _)| miss < *best) {
            closest = Some((miss, parts));
        }
    }
    closest.map(|(_, parts)| parts).ok_or_else(|| Error::InfeasibleCv { target: cv, range: range() })
}

/// Out- and in-activities for a window with `m` edges, drawn independently.
pub fn sample_activities<R: Rng + ?Sized>(
    n: usize,
    m: u64,
    degree_cv: Option<f64>,
    rng: &mut R,
) -> Result<ActivityVectors> {
    let (xi_out, xi_in) = match degree_cv {
        None => (sample_weak_composition(n, m, rng), sample_weak_composition(n, m, rng)),
        Some(cv) => (sample_cv_vector(n, m, cv, rng)?, sample_cv_vector(n, m, cv, rng)?),
    };
    ActivityVectors::new(xi_out, xi_in)
}

/// Successes among `draws` balls taken without replacement from `population`
/// balls of which `marked` are marked.
fn hypergeometric<R: Rng + ?Sized>(population: u64, marked: u64, draws: u64, rng: &mut R) -> u64 {
    match Hypergeometric::new(population, marked, draws) {
        Ok(h) => h.sample(rng),
        // the inverse-transform set-up underflows for some large populations;
        // draw the balls explicitly instead
        Err(_) => sample_indices(rng, population as usize, draws as usize)
            .iter()
            .filter(|&i| (i as u64) < marked)
            .count() as u64,
    }
}

/// Multivariate hypergeometric draw of `m` edges from the activity urn,
/// realized cell by cell in row-major order.
pub fn sample_window<R: Rng + ?Sized>(act: &ActivityVectors, rng: &mut R) -> CellCounts {
    let n = act.nodes();
    let mut cells = CellCounts::new();
    let mut population = act.urn_total();
    let mut left = act.m;
    'outer: for v in 0..n {
        if act.xi_out[v] == 0 {
            continue;
        }
        for w in 0..n {
            if left == 0 {
                break 'outer;
            }
            let xi = act.urn(v, w);
            if xi == 0 {
                continue;
            }
            let a = if xi == population {
                left
            } else {
                hypergeometric(population, xi, left, rng)
            };
            if a > 0 {
                cells.insert((v as u32, w as u32), a);
            }
            population -= xi;
            left -= a;
        }
    }
    cells
}

/// Draws a temporal network from the model.
pub fn sample_temporal<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<TemporalGraph> {
    cfg.validate()?;
    let p = &cfg.partition;
    let counts: Vec<u64> = match cfg.edges {
        EdgeBudget::Total(total) => sample_edge_counts(total, p, rng),
        EdgeBudget::PerWindow(mean) => {
            if mean == 0.0 {
                vec![0; p.len()]
            } else {
                let poisson = Poisson::new(mean).map_err(|e| Error::invalid(e.to_string()))?;
                (0..p.len()).map(|_| poisson.sample(rng) as u64).collect()
            }
        }
    };
    let mut events = Vec::with_capacity(counts.iter().sum::<u64>() as usize);
    for ((start, end), &m) in p.windows().zip(&counts) {
        let act = sample_activities(cfg.nodes, m, cfg.degree_cv, rng)?;
        let cells = sample_window(&act, rng);
        let width = end - start;
        for (&(v, w), &a) in &cells {
            for _ in 0..a {
                let t = start + if width == 1 { 0 } else { rng.random_range(0..width) };
                events.push(Event::new(v, w, t as u32));
            }
        }
    }
    TemporalGraph::new(cfg.nodes, p.steps(), events)
}

/// Multiset union of two graphs on the same nodes and time axis.
pub fn overlay(a: &TemporalGraph, b: &TemporalGraph) -> Result<TemporalGraph> {
    if a.nodes() != b.nodes() || a.steps() != b.steps() {
        return Err(Error::ShapeMismatch(format!(
            "cannot overlay {}x{} with {}x{} (nodes x steps)",
            a.nodes(),
            a.steps(),
            b.nodes(),
            b.steps()
        )));
    }
    let events = a.events().iter().chain(b.events()).copied().collect();
    TemporalGraph::new(a.nodes(), a.steps(), events)
}

/// `pattern` repeated and truncated so the widths sum to `steps`.
pub fn repeat_pattern(pattern: &[usize], steps: usize) -> Result<WindowPartition> {
    if pattern.is_empty() || pattern.iter().any(|&w| w == 0) {
        return Err(Error::invalid("pattern widths must be positive"));
    }
    let mut widths = Vec::new();
    let mut left = steps;
    for &w in pattern.iter().cycle() {
        if left == 0 {
            break;
        }
        let w = w.min(left);
        widths.push(w);
        left -= w;
    }
    WindowPartition::new(widths)
}

/// One process of a declarative synthesis file. Exactly one of `window`,
/// `pattern` or `widths`, and exactly one of `total_edges` or
/// `edges_per_window`, must be given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub window: Option<usize>,
    pub pattern: Option<Vec<usize>>,
    pub widths: Option<Vec<usize>>,
    pub total_edges: Option<u64>,
    pub edges_per_window: Option<f64>,
    pub degree_cv: Option<f64>,
}

/// Declarative description of a synthetic network: independent processes
/// overlaid on `nodes` nodes over `steps` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    pub seed: u64,
    pub nodes: usize,
    pub steps: usize,
    #[serde(rename = "process")]
    pub processes: Vec<ProcessSpec>,
}

impl SynthFile {
    /// Resolves every process into a [`SynthConfig`]. Process 0 uses `seed`
    /// as is; later processes get `seed` xor a multiple of the golden-ratio
    /// constant so neighbouring file seeds never share a process stream.
    pub fn configs(&self) -> Result<Vec<SynthConfig>> {
        if self.nodes == 0 {
            return Err(Error::invalid("field `nodes` must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("field `steps` must be at least 1"));
        }
        if self.processes.is_empty() {
            return Err(Error::invalid("at least one `process` is required"));
        }
        self.processes
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let ctx = |msg: &str| Error::invalid(format!("process {i}: {msg}"));
                let partition = match (&spec.window, &spec.pattern, &spec.widths) {
                    (Some(w), None, None) => repeat_pattern(&[*w], self.steps).map_err(|_| ctx("field `window` must be positive"))?,
                    (None, Some(p), None) => repeat_pattern(p, self.steps).map_err(|_| ctx("field `pattern` must hold positive widths"))?,
                    (None, None, Some(w)) => WindowPartition::with_steps(w.clone(), self.steps)
                        .map_err(|e| ctx(&format!("field `widths`: {e}")))?,
                    _ => return Err(ctx("exactly one of `window`, `pattern`, `widths` is required")),
                };
                let edges = match (spec.total_edges, spec.edges_per_window) {
                    (Some(t), None) => EdgeBudget::Total(t),
                    (None, Some(m)) => EdgeBudget::PerWindow(m),
                    _ => return Err(ctx("exactly one of `total_edges`, `edges_per_window` is required")),
                };
                let cfg = SynthConfig {
                    nodes: self.nodes,
                    partition,
                    edges,
                    degree_cv: spec.degree_cv,
                    seed: self.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                };
                cfg.validate().map_err(|e| match e {
                    Error::InfeasibleCv { target, range } => Error::InfeasibleCv { target, range: format!("{range} (field `degree_cv` of process {i})") },
                    other => ctx(&other.to_string()),
                })?;
                Ok(cfg)
            })
            .collect()
    }

    /// Samples every process and overlays them.
    pub fn generate(&self) -> Result<TemporalGraph> {
        let mut acc: Option<TemporalGraph> = None;
        for cfg in self.configs()? {
            let g = sample_temporal(&cfg, &mut cfg.rng())?;
            acc = Some(match acc {
                None => g,
                Some(prev) => overlay(&prev, &g)?,
            });
        }
        Ok(acc.expect("at least one process"))
    }
}
