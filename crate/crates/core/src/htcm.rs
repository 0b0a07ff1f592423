//! Hypergeometric temporal configuration model: per-window likelihood,
//! priors, total description length and incremental deltas.
//!
//! All quantities are in bits. Activities are always the in-window degrees.
//! The description length of a partition decomposes as
//!
//! ```text
//! Σ = Σ_τ [ likelihood_τ + activity_prior_τ ] + edge_count_prior
//!     + partition_prior + data_constant
//! ```
//!
//! where `data_constant` collects the factors that depend on the graph only
//! (`M!`, `T^-M` and the per-step multiplicities `Π A_vwt!`). The other terms
//! exclude those factors, so every component is disjoint and the total is the
//! absolute code length.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{TemporalGraph, WindowAggregate, WindowPartition};
use crate::numerics::{ln_binomial, ln_factorial, ln_falling_factorial, ln_multiset, to_bits};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMode {
    /// Uniform over all compositions of `T` (change-point detection).
    #[default]
    General,
    /// Uniform over `(α, Δ, …, Δ, ω)` partitions (timescale scans).
    FixedWindow,
}

/// `ln[ C(m², m)⁻¹ m! Π_vw ξ!/(ξ-A)! ]`, the part of the window likelihood
/// that depends on the aggregated counts. `cells` yields `(v, w, A_vw)`.
fn ln_urn_term(m: u64, cells: impl Iterator<Item = (u32, u32, u64)>, kout: &[u64], kin: &[u64]) -> f64 {
    let mut acc = 0.0;
    for (v, w, a) in cells {
        if a > 0 {
            acc += ln_falling_factorial(kout[v as usize] * kin[w as usize], a);
        }
    }
    acc - ln_falling_factorial(m * m, m)
}

/// `log2` of the window likelihood, including the within-window time
/// assignment `(1/Δ)^m Π A_vw! / Π_t A_vwt!`.
pub fn window_log_likelihood(w: &WindowAggregate) -> f64 {
    if w.m == 0 {
        return 0.0;
    }
    let ln = ln_urn_term(w.m, w.cells.iter().map(|(&(v, t), &a)| (v, t, a)), &w.kout, &w.kin)
        + ln_factorial(w.m)
        - w.m as f64 * (w.width as f64).ln()
        - w.log_data_term;
    to_bits(ln)
}

/// `-log2 Pr(Δ) = log2 C(T-1, z-1) + log2 T`.
pub fn partition_prior_bits(z: usize, steps: usize) -> Result<f64> {
    if z < 1 || z > steps {
        return Err(Error::invalid(format!("window count {z} outside [1, {steps}]")));
    }
    Ok(to_bits(ln_binomial(steps as u64 - 1, z as u64 - 1) + (steps as f64).ln()))
}

/// `log2(T(T-1)/2)`, the cost of one admissible fixed-width partition.
pub fn fixed_prior_bits(steps: usize) -> Result<f64> {
    if steps < 2 {
        return Err(Error::invalid("fixed-width prior needs at least 2 steps"));
    }
    let t = steps as f64;
    Ok((t * (t - 1.0) / 2.0).log2())
}

/// True when the partition has the shape `(α, Δ, …, Δ, ω)` with `α < Δ`
/// (or `α` absent) and `ω ≤ Δ`.
pub fn is_fixed_admissible(p: &WindowPartition) -> bool {
    let w = p.widths();
    if w.len() <= 2 {
        return true;
    }
    let delta = w[1];
    w[1..w.len() - 1].iter().all(|&x| x == delta) && w[0] <= delta && w[w.len() - 1] <= delta
}

/// Fixed-width prior for a concrete partition; rejects partitions outside
/// the prior's support.
pub fn fixed_window_prior_bits(p: &WindowPartition) -> Result<f64> {
    if !is_fixed_admissible(p) {
        return Err(Error::invalid(format!(
            "partition {:?} does not have equal interior widths",
            p.widths()
        )));
    }
    fixed_prior_bits(p.steps())
}

/// `2 log2 C(N+m-1, m)`: independent uniform weak-composition priors on the
/// out- and in-activities.
pub fn activity_prior_bits(nodes: usize, m: u64) -> f64 {
    2.0 * to_bits(ln_multiset(nodes as u64, m))
}

/// `-log2` of the multinomial prior on per-window edge counts with
/// probabilities `Δ_τ / T`.
pub fn edge_count_prior_bits(m_seq: &[u64], p: &WindowPartition, total: u64) -> Result<f64> {
    if m_seq.len() != p.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} edge counts for {} windows",
            m_seq.len(),
            p.len()
        )));
    }
    let sum: u64 = m_seq.iter().sum();
    if sum != total {
        return Err(Error::invalid(format!("edge counts sum to {sum}, expected {total}")));
    }
    let t = p.steps() as f64;
    let mut ln = ln_factorial(total);
    for (&m, &w) in m_seq.iter().zip(p.widths()) {
        ln -= ln_factorial(m);
        if m > 0 {
            ln += m as f64 * (w as f64 / t).ln();
        }
    }
    Ok(-to_bits(ln))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowBits {
    pub likelihood_bits: f64,
    pub activity_prior_bits: f64,
}

/// Description length of one partition, split into disjoint components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlReport {
    pub total_bits: f64,
    pub per_window: Vec<WindowBits>,
    pub partition_prior_bits: f64,
    pub edge_count_prior_bits: f64,
    pub data_constant_bits: f64,
    pub prior_mode: PriorMode,
}

impl DlReport {
    /// Total without the graph-only constant.
    pub fn relative_bits(&self) -> f64 {
        self.total_bits - self.data_constant_bits
    }
}

/// Bits that depend only on the graph: `-log2 M! + M log2 T + Σ log2 A_vwt!`.
pub fn data_constant_bits(g: &TemporalGraph) -> f64 {
    let m = g.num_events() as u64;
    to_bits(-ln_factorial(m) + m as f64 * (g.steps() as f64).ln() + g.log_data_term())
}

fn prior_bits(z: usize, steps: usize, mode: PriorMode, p: Option<&WindowPartition>) -> Result<f64> {
    match mode {
        PriorMode::General => partition_prior_bits(z, steps),
        PriorMode::FixedWindow => match p {
            Some(p) => fixed_window_prior_bits(p),
            None => fixed_prior_bits(steps),
        },
    }
}

/// Full description length of `g` under partition `p`.
pub fn description_length(g: &TemporalGraph, p: &WindowPartition, mode: PriorMode) -> Result<DlReport> {
    let windows = g.aggregate(p)?;
    let n = g.nodes();
    let mut per_window = Vec::with_capacity(windows.len());
    let mut edge_bits = 0.0;
    for w in &windows {
        // likelihood without the data-only factors; the Δ^-m factor stays here
        let ln = if w.m == 0 {
            0.0
        } else {
            ln_urn_term(w.m, w.cells.iter().map(|(&(v, t), &a)| (v, t, a)), &w.kout, &w.kin)
                + ln_factorial(w.m)
                - w.m as f64 * (w.width as f64).ln()
        };
        per_window.push(WindowBits {
            likelihood_bits: -to_bits(ln),
            activity_prior_bits: activity_prior_bits(n, w.m),
        });
        edge_bits += to_bits(ln_factorial(w.m) - w.m as f64 * (w.width as f64).ln());
    }
    let partition_prior_bits = prior_bits(p.len(), g.steps(), mode, Some(p))?;
    let data_constant_bits = data_constant_bits(g);
    let mut total = 0.0;
    for w in &per_window {
        total += w.likelihood_bits + w.activity_prior_bits;
    }
    total += edge_bits + partition_prior_bits + data_constant_bits;
    Ok(DlReport {
        total_bits: total,
        per_window,
        partition_prior_bits,
        edge_count_prior_bits: edge_bits,
        data_constant_bits,
        prior_mode: mode,
    })
}

/// A local edit of a partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Edit {
    /// Split window `window` into widths `(at, Δ - at)`.
    Split { window: usize, at: usize },
    /// Merge windows `window` and `window + 1`.
    Join { window: usize },
    /// Re-cut windows `window` and `window + 1` so the first has width `at`.
    Move { window: usize, at: usize },
}

impl Edit {
    pub fn check(&self, p: &WindowPartition) -> Result<()> {
        let w = p.widths();
        let z = w.len();
        let ok = match *self {
            Edit::Split { window, at } => window < z && at >= 1 && at < w[window],
            Edit::Join { window } => window + 1 < z,
            Edit::Move { window, at } => window + 1 < z && at >= 1 && at < w[window] + w[window + 1],
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidEdit(format!("{self:?} on widths {w:?}")))
        }
    }

    pub fn apply(&self, p: &WindowPartition) -> Result<WindowPartition> {
        self.check(p)?;
        let mut q = p.clone();
        self.apply_unchecked(q.widths_mut());
        Ok(q)
    }

    pub(crate) fn apply_unchecked(&self, widths: &mut Vec<usize>) {
        match *self {
            Edit::Split { window, at } => {
                let rest = widths[window] - at;
                widths[window] = at;
                widths.insert(window + 1, rest);
            }
            Edit::Join { window } => {
                let b = widths.remove(window + 1);
                widths[window] += b;
            }
            Edit::Move { window, at } => {
                let total = widths[window] + widths[window + 1];
                widths[window] = at;
                widths[window + 1] = total - at;
            }
        }
    }
}

/// `DL(edit(p)) - DL(p)` under the general prior, evaluated from the
/// affected windows only.
pub fn dl_delta(g: &TemporalGraph, p: &WindowPartition, edit: Edit) -> Result<f64> {
    p.check_steps(g.steps())?;
    edit.check(p)?;
    let eval = WindowEvaluator::new(g);
    let starts: Vec<usize> = p.windows().map(|(s, _)| s).collect();
    Ok(eval.edit_delta(&starts, p.widths(), edit, |s, e| eval.window_bits(s, e)))
}

// dense cell prefix sums are used while they fit in this many entries
const DENSE_LIMIT: usize = 64 << 20;

enum CellIndex {
    /// `prefix[t * cells.len() + c]` = count of cell `c` over steps `< t`.
    Dense { cells: Vec<(u32, u32)>, prefix: Vec<u32> },
    /// Fall back to scanning events step by step.
    Scan { offsets: Vec<usize> },
}

/// Window-level description-length terms from prefix sums, so any window
/// `[start, end)` is evaluated without touching the full event list.
///
/// [`window_bits`](Self::window_bits) covers every partition-dependent term
/// that belongs to one window; [`global_bits`](Self::global_bits) adds the
/// rest, so that the sum over windows plus the global term is the total
/// description length.
pub struct WindowEvaluator<'g> {
    graph: &'g TemporalGraph,
    nodes: usize,
    steps: usize,
    out_prefix: Vec<u32>,
    in_prefix: Vec<u32>,
    index: CellIndex,
    constant_bits: f64,
}

impl<'g> WindowEvaluator<'g> {
    pub fn new(graph: &'g TemporalGraph) -> Self {
        let n = graph.nodes();
        let t = graph.steps();
        let events = graph.events();
        let mut out_prefix = vec![0u32; (t + 1) * n];
        let mut in_prefix = vec![0u32; (t + 1) * n];
        let offsets = graph.step_offsets();
        for step in 0..t {
            let (done, rest) = out_prefix.split_at_mut((step + 1) * n);
            rest[..n].copy_from_slice(&done[step * n..]);
            let (done, rest) = in_prefix.split_at_mut((step + 1) * n);
            rest[..n].copy_from_slice(&done[step * n..]);
            for e in &events[offsets[step]..offsets[step + 1]] {
                out_prefix[(step + 1) * n + e.source as usize] += 1;
                in_prefix[(step + 1) * n + e.target as usize] += 1;
            }
        }

        let mut cells: Vec<(u32, u32)> = events.iter().map(|e| (e.source, e.target)).collect();
        cells.sort_unstable();
        cells.dedup();
        let k = cells.len();
        let index = if k.saturating_mul(t + 1) <= DENSE_LIMIT {
            let lookup: HashMap<(u32, u32), usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
            let mut prefix = vec![0u32; (t + 1) * k];
            for step in 0..t {
                let (done, rest) = prefix.split_at_mut((step + 1) * k);
                rest[..k].copy_from_slice(&done[step * k..]);
                for e in &events[offsets[step]..offsets[step + 1]] {
                    prefix[(step + 1) * k + lookup[&(e.source, e.target)]] += 1;
                }
            }
            CellIndex::Dense { cells, prefix }
        } else {
            CellIndex::Scan { offsets }
        };

        WindowEvaluator {
            graph,
            nodes: n,
            steps: t,
            out_prefix,
            in_prefix,
            index,
            constant_bits: data_constant_bits(graph),
        }
    }

    pub fn graph(&self) -> &TemporalGraph {
        self.graph
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Edges in `[start, end)`.
    pub fn window_edges(&self, start: usize, end: usize) -> u64 {
        let n = self.nodes;
        self.out_prefix[end * n..(end + 1) * n]
            .iter()
            .zip(&self.out_prefix[start * n..(start + 1) * n])
            .map(|(a, b)| (a - b) as u64)
            .sum()
    }

    /// Partition-dependent bits contributed by window `[start, end)`:
    /// likelihood, activity prior and its share of the edge-count prior,
    /// with the `Δ` factors of the latter two cancelled analytically.
    pub fn window_bits(&self, start: usize, end: usize) -> f64 {
        debug_assert!(start < end && end <= self.steps);
        let n = self.nodes;
        let kout: Vec<u64> = (0..n)
            .map(|v| (self.out_prefix[end * n + v] - self.out_prefix[start * n + v]) as u64)
            .collect();
        let m: u64 = kout.iter().sum();
        if m == 0 {
            return 0.0;
        }
        let kin: Vec<u64> = (0..n)
            .map(|v| (self.in_prefix[end * n + v] - self.in_prefix[start * n + v]) as u64)
            .collect();
        let ln = match &self.index {
            CellIndex::Dense { cells, prefix } => {
                let k = cells.len();
                let hi = &prefix[end * k..(end + 1) * k];
                let lo = &prefix[start * k..(start + 1) * k];
                let iter = cells
                    .iter()
                    .zip(hi.iter().zip(lo))
                    .map(|(&(v, w), (h, l))| (v, w, (h - l) as u64));
                ln_urn_term(m, iter, &kout, &kin)
            }
            CellIndex::Scan { offsets } => {
                let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
                for e in &self.graph.events()[offsets[start]..offsets[end]] {
                    *counts.entry((e.source, e.target)).or_insert(0) += 1;
                }
                let mut cells: Vec<_> = counts.into_iter().collect();
                cells.sort_unstable();
                ln_urn_term(m, cells.into_iter().map(|((v, w), a)| (v, w, a)), &kout, &kin)
            }
        };
        -to_bits(ln) + activity_prior_bits(n, m)
    }

    /// Terms shared by the whole partition: the partition prior for `z`
    /// windows plus the graph-only constant.
    pub fn global_bits(&self, z: usize, mode: PriorMode) -> f64 {
        let prior = match mode {
            PriorMode::General => partition_prior_bits(z, self.steps),
            PriorMode::FixedWindow => fixed_prior_bits(self.steps),
        };
        prior.unwrap_or(f64::INFINITY) + self.constant_bits
    }

    /// Total description length of `p`; agrees with
    /// [`description_length`] up to floating-point summation order.
    pub fn total_bits(&self, p: &WindowPartition, mode: PriorMode) -> Result<f64> {
        p.check_steps(self.steps)?;
        if mode == PriorMode::FixedWindow {
            fixed_window_prior_bits(p)?;
        }
        let windows: f64 = p.windows().map(|(s, e)| self.window_bits(s, e)).sum();
        Ok(windows + self.global_bits(p.len(), mode))
    }

    /// Change in general-prior description length caused by `edit`, using
    /// `bits(start, end)` for window terms (possibly memoized by the caller).
    pub fn edit_delta(
        &self,
        starts: &[usize],
        widths: &[usize],
        edit: Edit,
        mut bits: impl FnMut(usize, usize) -> f64,
    ) -> f64 {
        let z = widths.len();
        let prior = |z: usize| partition_prior_bits(z, self.steps).unwrap_or(f64::INFINITY);
        match edit {
            Edit::Split { window, at } => {
                let s = starts[window];
                let e = s + widths[window];
                bits(s, s + at) + bits(s + at, e) - bits(s, e) + prior(z + 1) - prior(z)
            }
            Edit::Join { window } => {
                let s = starts[window];
                let mid = s + widths[window];
                let e = mid + widths[window + 1];
                bits(s, e) - bits(s, mid) - bits(mid, e) + prior(z - 1) - prior(z)
            }
            Edit::Move { window, at } => {
                let s = starts[window];
                let mid = s + widths[window];
                let e = mid + widths[window + 1];
                if s + at == mid {
                    return 0.0;
                }
                bits(s, s + at) + bits(s + at, e) - bits(s, mid) - bits(mid, e)
            }
        }
    }
}

/// [`WindowEvaluator`] with a memo of window terms, for samplers that revisit
/// the same windows many times.
pub struct CachedEvaluator<'e, 'g> {
    eval: &'e WindowEvaluator<'g>,
    cache: HashMap<(u32, u32), f64>,
}

impl<'e, 'g> CachedEvaluator<'e, 'g> {
    pub fn new(eval: &'e WindowEvaluator<'g>) -> Self {
        CachedEvaluator { eval, cache: HashMap::new() }
    }

    pub fn evaluator(&self) -> &'e WindowEvaluator<'g> {
        self.eval
    }

    pub fn window_bits(&mut self, start: usize, end: usize) -> f64 {
        let eval = self.eval;
        *self
            .cache
            .entry((start as u32, end as u32))
            .or_insert_with(|| eval.window_bits(start, end))
    }

    /// Sum of window terms in window order plus the global term.
    pub fn total_bits(&mut self, widths: &[usize], mode: PriorMode) -> f64 {
        let mut start = 0;
        let mut acc = 0.0;
        for &w in widths {
            acc += self.window_bits(start, start + w);
            start += w;
        }
        acc + self.eval.global_bits(widths.len(), mode)
    }

    pub fn edit_delta(&mut self, starts: &[usize], widths: &[usize], edit: Edit) -> f64 {
        let eval = self.eval;
        eval.edit_delta(starts, widths, edit, |s, e| self.window_bits(s, e))
    }
}
