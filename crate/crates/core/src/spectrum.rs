//! Fixed-width description-length scans and the timescale spectrum.
//!
//! For every window size `Δ` the time axis is cut as `(α, Δ, …, Δ, ω)` and
//! the description length is minimized over the padding `α`. Local minima of
//! the resulting curve are ranked by topographic prominence on the negated
//! curve.

use std::io::Write;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{TemporalGraph, WindowPartition};
use crate::htcm::{PriorMode, WindowEvaluator};

/// `(α, Δ, …, Δ, ω)` with `α` omitted when zero and `0 < ω ≤ Δ`.
pub fn build_fixed_partition(steps: usize, delta: usize, alpha: usize) -> Result<WindowPartition> {
    if delta < 1 || delta > steps {
        return Err(Error::invalid(format!("window size {delta} outside [1, {steps}]")));
    }
    if alpha >= delta {
        return Err(Error::invalid(format!("padding {alpha} must be below window size {delta}")));
    }
    let mut widths = Vec::with_capacity(steps / delta + 2);
    if alpha > 0 {
        widths.push(alpha);
    }
    let mut rest = steps - alpha;
    while rest > delta {
        widths.push(delta);
        rest -= delta;
    }
    widths.push(rest);
    WindowPartition::new(widths)
}

/// Paddings considered for a window size: all of `0..Δ`, except that the
/// full-length window admits only `α = 0`.
pub fn padding_range(steps: usize, delta: usize) -> std::ops::Range<usize> {
    if delta >= steps {
        0..1
    } else {
        0..delta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub delta: usize,
    pub alpha: usize,
    pub bits: f64,
    pub norm_bits: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub delta: usize,
    pub prominence: f64,
    pub bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub points: Vec<SpectrumPoint>,
    /// Local minima, most prominent first.
    pub minima: Vec<Minimum>,
    pub mdl_delta: usize,
}

impl Spectrum {
    pub fn point(&self, delta: usize) -> Option<&SpectrumPoint> {
        self.points.iter().find(|p| p.delta == delta)
    }

    pub fn write_csv<W: Write>(&self, writer: W, fmt: impl Fn(f64) -> String) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["delta", "alpha", "bits", "normBits"])?;
        for p in &self.points {
            w.write_record([p.delta.to_string(), p.alpha.to_string(), fmt(p.bits), fmt(p.norm_bits)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Description length of every `Δ` in `deltas`, minimized over paddings.
pub fn scan(g: &TemporalGraph, deltas: RangeInclusive<usize>) -> Result<Vec<SpectrumPoint>> {
    let eval = WindowEvaluator::new(g);
    scan_with(&eval, deltas)
}

pub fn scan_with(eval: &WindowEvaluator<'_>, deltas: RangeInclusive<usize>) -> Result<Vec<SpectrumPoint>> {
    let steps = eval.steps();
    if deltas.is_empty() {
        return Err(Error::invalid("empty window-size range"));
    }
    if *deltas.start() < 1 || *deltas.end() > steps {
        return Err(Error::invalid(format!(
            "window sizes {}..={} outside [1, {steps}]",
            deltas.start(),
            deltas.end()
        )));
    }
    if steps < 2 {
        return Err(Error::invalid("a spectrum needs at least 2 time steps"));
    }
    let global = eval.global_bits(1, PriorMode::FixedWindow);
    let mut points: Vec<SpectrumPoint> = deltas
        .into_par_iter()
        .map(|delta| {
            let mut best = (usize::MAX, f64::INFINITY);
            for alpha in padding_range(steps, delta) {
                let mut bits = 0.0;
                let mut start = 0;
                if alpha > 0 {
                    bits += eval.window_bits(0, alpha);
                    start = alpha;
                }
                while steps - start > delta {
                    bits += eval.window_bits(start, start + delta);
                    start += delta;
                }
                bits += eval.window_bits(start, steps);
                let bits = bits + global;
                if bits < best.1 {
                    best = (alpha, bits);
                }
            }
            SpectrumPoint { delta, alpha: best.0, bits: best.1, norm_bits: 0.0 }
        })
        .collect();
    let min = points.iter().map(|p| p.bits).fold(f64::INFINITY, f64::min);
    for p in &mut points {
        p.norm_bits = p.bits - min;
    }
    Ok(points)
}

/// Indices of local minima of `values`: strictly below the left neighbour
/// and not above the right one, a missing neighbour counting as higher. A
/// plateau is therefore reported once, at its first index.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let v = values[i];
            (i == 0 || v < values[i - 1]) && (i + 1 == n || v <= values[i + 1])
        })
        .collect()
}

/// Topographic prominence of each peak of `heights`.
///
/// The key col of a peak is the highest point from which strictly higher
/// ground can be reached; in one dimension this is the larger of the lowest
/// values between the peak and the nearest strictly higher sample on each
/// side. A peak with no higher ground gets its height minus the global
/// minimum.
pub fn peak_prominences(heights: &[f64], peaks: &[usize]) -> Vec<f64> {
    let floor = heights.iter().copied().fold(f64::INFINITY, f64::min);
    peaks
        .iter()
        .map(|&p| {
            let h = heights[p];
            let mut col = f64::NEG_INFINITY;
            let mut low = h;
            for &x in heights[..p].iter().rev() {
                if x > h {
                    col = col.max(low);
                    break;
                }
                low = low.min(x);
            }
            let mut low = h;
            for &x in &heights[p + 1..] {
                if x > h {
                    col = col.max(low);
                    break;
                }
                low = low.min(x);
            }
            if col == f64::NEG_INFINITY {
                h - floor
            } else {
                h - col
            }
        })
        .collect()
}

/// Window sizes at local minima of the description-length curve.
pub fn minima_deltas(points: &[SpectrumPoint]) -> Vec<usize> {
    let bits: Vec<f64> = points.iter().map(|p| p.bits).collect();
    local_minima(&bits).into_iter().map(|i| points[i].delta).collect()
}

/// Prominence of each candidate minimum, measured on the negated curve and
/// sorted by decreasing prominence (then lower bits, then smaller `Δ`).
pub fn prominence(points: &[SpectrumPoint], candidates: &[usize]) -> Vec<Minimum> {
    let heights: Vec<f64> = points.iter().map(|p| -p.bits).collect();
    let idx: Vec<usize> = candidates
        .iter()
        .filter_map(|d| points.iter().position(|p| p.delta == *d))
        .collect();
    let proms = peak_prominences(&heights, &idx);
    let mut out: Vec<Minimum> = idx
        .iter()
        .zip(proms)
        .map(|(&i, prominence)| Minimum { delta: points[i].delta, prominence, bits: points[i].bits })
        .collect();
    out.sort_by(|a, b| {
        b.prominence
            .total_cmp(&a.prominence)
            .then(a.bits.total_cmp(&b.bits))
            .then(a.delta.cmp(&b.delta))
    });
    out
}

fn assemble(points: Vec<SpectrumPoint>) -> Spectrum {
    let candidates = minima_deltas(&points);
    let minima = prominence(&points, &candidates);
    let mdl_delta = points
        .iter()
        .min_by(|a, b| a.bits.total_cmp(&b.bits).then(a.delta.cmp(&b.delta)))
        .map_or(1, |p| p.delta);
    Spectrum { points, minima, mdl_delta }
}

/// Scan, local minima and prominence in one call.
pub fn spectrogram(g: &TemporalGraph, deltas: RangeInclusive<usize>) -> Result<Spectrum> {
    Ok(assemble(scan(g, deltas)?))
}

pub fn spectrogram_with(eval: &WindowEvaluator<'_>, deltas: RangeInclusive<usize>) -> Result<Spectrum> {
    Ok(assemble(scan_with(eval, deltas)?))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DominantMode {
    /// Global minimum of the description length.
    #[default]
    Mdl,
    /// Most prominent local minimum.
    TopProminence,
}

impl Spectrum {
    pub fn dominant(&self, mode: DominantMode) -> usize {
        match mode {
            DominantMode::Mdl => self.mdl_delta,
            DominantMode::TopProminence => self.minima.first().map_or(self.mdl_delta, |m| m.delta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollingPoint {
    pub start: usize,
    pub dominant: usize,
}

/// Dominant timescale of each slice `[start, start + window_len)` for
/// `start = 0, step, 2 step, …`. Window sizes up to `delta_max` (default:
/// the slice length) are scanned.
pub fn rolling_dominant(
    g: &TemporalGraph,
    window_len: usize,
    step: usize,
    mode: DominantMode,
    delta_max: Option<usize>,
) -> Result<Vec<RollingPoint>> {
    if window_len > g.steps() {
        return Err(Error::invalid(format!(
            "rolling window of {window_len} steps exceeds the {} available",
            g.steps()
        )));
    }
    if window_len < 2 || step < 1 {
        return Err(Error::invalid("rolling window needs at least 2 steps and a positive stride"));
    }
    let delta_max = delta_max.unwrap_or(window_len).min(window_len);
    let starts = rolling_starts(g.steps(), window_len, step);
    starts
        .into_par_iter()
        .map(|start| {
            let slice = g.slice(start, start + window_len)?;
            let spec = spectrogram(&slice, 1..=delta_max)?;
            Ok(RollingPoint { start, dominant: spec.dominant(mode) })
        })
        .collect()
}

pub fn rolling_starts(steps: usize, window_len: usize, step: usize) -> Vec<usize> {
    if window_len > steps || step == 0 {
        return Vec::new();
    }
    (0..=steps - window_len).step_by(step).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShockPhase {
    Pre,
    Overlap,
    Post,
}

/// Position of window `[start, start + len)` relative to a shock at step
/// `shock`: windows ending before it are `Pre`, windows starting at or after
/// it are `Post`, the rest overlap.
pub fn shock_phase(start: usize, len: usize, shock: usize) -> ShockPhase {
    if start + len < shock {
        ShockPhase::Pre
    } else if start >= shock {
        ShockPhase::Post
    } else {
        ShockPhase::Overlap
    }
}

/// Centers the series on the mean of the shock-overlapping windows and
/// divides by the sample standard deviation of the whole series. A constant
/// series maps to zeros.
pub fn renormalize(series: &[RollingPoint], window_len: usize, shock: usize) -> Result<Vec<f64>> {
    let overlap: Vec<f64> = series
        .iter()
        .filter(|p| shock_phase(p.start, window_len, shock) == ShockPhase::Overlap)
        .map(|p| p.dominant as f64)
        .collect();
    if overlap.is_empty() {
        return Err(Error::invalid(format!("no rolling window overlaps the shock at step {shock}")));
    }
    let center = overlap.iter().sum::<f64>() / overlap.len() as f64;
    let n = series.len() as f64;
    let mean = series.iter().map(|p| p.dominant as f64).sum::<f64>() / n;
    let var = if series.len() > 1 {
        series.iter().map(|p| (p.dominant as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    Ok(series
        .iter()
        .map(|p| if sd > 0.0 { (p.dominant as f64 - center) / sd } else { 0.0 })
        .collect())
}
