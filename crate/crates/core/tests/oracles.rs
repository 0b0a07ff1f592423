//! Exact big-integer oracles for the model's probabilities and priors.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use timescales::hcm::{log_prob_hcm, ActivityVectors, CellCounts};
use timescales::htcm::{
    activity_prior_bits, description_length, edge_count_prior_bits, fixed_prior_bits, partition_prior_bits,
    window_log_likelihood,
};
use timescales::{PriorMode, TemporalGraph, WindowPartition};

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

fn falling(x: u64, k: u64) -> BigUint {
    (0..k).fold(BigUint::one(), |acc, i| acc * (x - i))
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    falling(n, k) / factorial(k)
}

fn ln_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    (n >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

fn log2_ratio(r: &BigRational) -> f64 {
    let num = r.numer().to_biguint().unwrap();
    let den = r.denom().to_biguint().unwrap();
    (ln_big(&num) - ln_big(&den)) / std::f64::consts::LN_2
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(num.into(), den.into())
}

/// All ways to place `m` indistinguishable items into `cells` slots.
fn compositions(m: u64, cells: usize) -> Vec<Vec<u64>> {
    if cells == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in 0..=m {
        for mut rest in compositions(m - first, cells - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn random_activity(n: usize, m: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut v = vec![0u64; n];
    for _ in 0..m {
        v[rng.random_range(0..n)] += 1;
    }
    v
}

fn hcm_exact(cells: &CellCounts, act: &ActivityVectors) -> BigRational {
    let mut num = BigUint::one();
    for (&(v, w), &a) in cells {
        num *= binomial(act.urn(v as usize, w as usize), a);
    }
    ratio(num, binomial(act.m * act.m, act.m))
}

#[test]
fn hcm_probabilities_sum_to_exactly_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..=3usize {
        for m in 1..=4u64 {
            let act = ActivityVectors::new(random_activity(n, m, &mut rng), random_activity(n, m, &mut rng)).unwrap();
            let mut total = BigRational::zero();
            for counts in compositions(m, n * n) {
                let cells: CellCounts = counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &a)| a > 0)
                    .map(|(i, &a)| (((i / n) as u32, (i % n) as u32), a))
                    .collect();
                total += hcm_exact(&cells, &act);
            }
            assert_eq!(total, BigRational::one(), "N = {n}, m = {m}, act = {act:?}");
        }
    }
}

#[test]
fn hcm_log_probability_matches_exact_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.random_range(2..6usize);
        let m = rng.random_range(1..60u64);
        let act = ActivityVectors::new(random_activity(n, m, &mut rng), random_activity(n, m, &mut rng)).unwrap();
        // draw a feasible configuration by taking m balls from the urn
        let mut urn: Vec<(u32, u32)> = Vec::new();
        for v in 0..n {
            for w in 0..n {
                for _ in 0..act.urn(v, w) {
                    urn.push((v as u32, w as u32));
                }
            }
        }
        let mut cells = CellCounts::new();
        for _ in 0..m {
            let i = rng.random_range(0..urn.len());
            *cells.entry(urn.swap_remove(i)).or_insert(0) += 1;
        }
        let got = log_prob_hcm(&cells, &act).unwrap();
        let want = log2_ratio(&hcm_exact(&cells, &act));
        assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }
}

fn random_graph(rng: &mut ChaCha8Rng, nodes: usize, steps: usize, events: usize) -> TemporalGraph {
    let triples: Vec<(u32, u32, u32)> = (0..events)
        .map(|_| {
            (
                rng.random_range(0..nodes as u32),
                rng.random_range(0..nodes as u32),
                rng.random_range(0..steps as u32),
            )
        })
        .collect();
    TemporalGraph::from_triples(nodes, steps, &triples).unwrap()
}

fn random_partition(rng: &mut ChaCha8Rng, steps: usize) -> WindowPartition {
    let cuts: Vec<usize> = (1..steps).filter(|_| rng.random_bool(0.3)).collect();
    WindowPartition::from_cuts(&cuts, steps).unwrap()
}

/// Per-step cell multiplicities `A_vwt` of the events inside `[start, end)`.
fn step_counts(g: &TemporalGraph, start: usize, end: usize) -> BTreeMap<(u32, u32, u32), u64> {
    let mut out = BTreeMap::new();
    for e in g.events() {
        let t = e.time as usize;
        if t >= start && t < end {
            *out.entry((e.source, e.target, e.time)).or_insert(0) += 1;
        }
    }
    out
}

/// `C(m², m)⁻¹ Π ξ!/(ξ−A)! Δ^{-m} / Π_t A_vwt!` with ξ the in-window degrees.
fn window_likelihood_exact(g: &TemporalGraph, start: usize, end: usize) -> BigRational {
    let steps = step_counts(g, start, end);
    let n = g.nodes();
    let mut kout = vec![0u64; n];
    let mut kin = vec![0u64; n];
    let mut cells: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for (&(v, w, _), &a) in &steps {
        kout[v as usize] += a;
        kin[w as usize] += a;
        *cells.entry((v, w)).or_insert(0) += a;
    }
    let m: u64 = kout.iter().sum();
    let mut num = BigUint::one();
    for (&(v, w), &a) in &cells {
        num *= falling(kout[v as usize] * kin[w as usize], a);
    }
    let mut den = binomial(m * m, m) * BigUint::from((end - start) as u64).pow(m as u32);
    for &a in steps.values() {
        den *= factorial(a);
    }
    ratio(num, den)
}

#[test]
fn window_likelihood_matches_exact_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let steps = rng.random_range(1..12usize);
        let (nodes, events) = (rng.random_range(1..6), rng.random_range(1..80));
        let g = random_graph(&mut rng, nodes, steps, events);
        let p = random_partition(&mut rng, steps);
        for w in g.aggregate(&p).unwrap() {
            if w.m == 0 {
                assert_eq!(window_log_likelihood(&w), 0.0);
                continue;
            }
            let want = log2_ratio(&window_likelihood_exact(&g, w.start, w.start + w.width));
            let got = window_log_likelihood(&w);
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{got} vs {want}");
        }
    }
}

/// Joint probability of the data and the partition, built factor by factor.
fn joint_exact(g: &TemporalGraph, p: &WindowPartition, mode: PriorMode) -> BigRational {
    let t = p.steps() as u64;
    let n = g.nodes() as u64;
    let z = p.len() as u64;
    let mut joint = match mode {
        PriorMode::General => ratio(BigUint::one(), binomial(t - 1, z - 1) * t),
        PriorMode::FixedWindow => ratio(BigUint::from(2u32), BigUint::from(t * (t - 1))),
    };
    let total = g.num_events() as u64;
    let mut multinomial = ratio(factorial(total), BigUint::from(t).pow(total as u32));
    for (start, end) in p.windows() {
        let m = step_counts(g, start, end).values().sum::<u64>();
        let width = BigUint::from((end - start) as u64);
        multinomial *= ratio(width.pow(m as u32), factorial(m));
        let compositions = binomial(n + m - 1, m);
        joint *= ratio(BigUint::one(), &compositions * &compositions);
        if m > 0 {
            joint *= window_likelihood_exact(g, start, end);
        }
    }
    joint * multinomial
}

#[test]
fn description_length_is_exact_joint_code_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..60 {
        let steps = rng.random_range(2..10usize);
        let (nodes, events) = (rng.random_range(1..5), rng.random_range(1..50));
        let g = random_graph(&mut rng, nodes, steps, events);
        let p = random_partition(&mut rng, steps);
        let report = description_length(&g, &p, PriorMode::General).unwrap();
        let want = -log2_ratio(&joint_exact(&g, &p, PriorMode::General));
        assert!((report.total_bits - want).abs() < 1e-9 * want.abs().max(1.0), "{} vs {want}", report.total_bits);
        let parts: f64 = report.per_window.iter().map(|w| w.likelihood_bits + w.activity_prior_bits).sum::<f64>()
            + report.edge_count_prior_bits
            + report.partition_prior_bits
            + report.data_constant_bits;
        assert!((parts - report.total_bits).abs() < 1e-9 * want.abs().max(1.0));
    }
    for delta in 1..5 {
        let steps = 9;
        let g = random_graph(&mut rng, 3, steps, 40);
        let cuts: Vec<usize> = (1..steps).filter(|c| c % delta == 0).collect();
        let p = WindowPartition::from_cuts(&cuts, steps).unwrap();
        let got = description_length(&g, &p, PriorMode::FixedWindow).unwrap().total_bits;
        let want = -log2_ratio(&joint_exact(&g, &p, PriorMode::FixedWindow));
        assert!((got - want).abs() < 1e-9 * want.abs());
    }
}

fn all_compositions_of(steps: usize) -> Vec<Vec<usize>> {
    (0..1u32 << (steps - 1))
        .map(|mask| {
            let cuts: Vec<usize> = (1..steps).filter(|c| mask & (1 << (c - 1)) != 0).collect();
            WindowPartition::from_cuts(&cuts, steps).unwrap().widths().to_vec()
        })
        .collect()
}

#[test]
fn partition_prior_normalizes_over_compositions() {
    for steps in 1..=12usize {
        let parts = all_compositions_of(steps);
        assert_eq!(parts.len(), 1 << (steps - 1));
        let total: f64 = parts
            .iter()
            .map(|w| (-partition_prior_bits(w.len(), steps).unwrap()).exp2())
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "T = {steps}: {total}");
    }
}

#[test]
fn fixed_prior_normalizes_over_width_and_offset() {
    for steps in 2..=40usize {
        let pairs: usize = (1..steps).map(|delta| delta).sum();
        assert_eq!(pairs, steps * (steps - 1) / 2);
        let total = pairs as f64 * (-fixed_prior_bits(steps).unwrap()).exp2();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn edge_count_prior_normalizes() {
    for widths in [vec![1usize, 2, 3], vec![4], vec![2, 2], vec![1, 1, 1, 5]] {
        let p = WindowPartition::new(widths.clone()).unwrap();
        for total in 0..=6u64 {
            let sum: f64 = compositions(total, widths.len())
                .iter()
                .map(|m| (-edge_count_prior_bits(m, &p, total).unwrap()).exp2())
                .sum();
            assert!((sum - 1.0).abs() < 1e-12, "{widths:?}, M = {total}: {sum}");
        }
    }
}

#[test]
fn activity_prior_counts_weak_compositions() {
    assert_eq!(compositions(4, 3).len(), 15);
    assert!((activity_prior_bits(3, 4) - 2.0 * 15f64.log2()).abs() < 1e-12);
    for n in 1..6usize {
        for m in 0..8u64 {
            let count = compositions(m, n).len() as f64;
            assert!((activity_prior_bits(n, m) - 2.0 * count.log2()).abs() < 1e-10);
        }
    }
}
