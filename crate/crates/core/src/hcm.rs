//! Static hypergeometric configuration model.
//!
//! `m` edges are drawn without replacement from an urn holding
//! `xi_out[v] * xi_in[w]` distinguishable copies of every directed pair
//! `(v, w)`. Activities always sum to `m` on both sides, so the urn holds
//! `m^2` balls.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_binomial, to_bits};

/// Sparse adjacency counts `A_vw` keyed by `(source, target)`.
pub type CellCounts = BTreeMap<(u32, u32), u64>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityVectors {
    pub xi_out: Vec<u64>,
    pub xi_in: Vec<u64>,
    pub m: u64,
}

impl ActivityVectors {
    pub fn new(xi_out: Vec<u64>, xi_in: Vec<u64>) -> Result<Self> {
        if xi_out.len() != xi_in.len() {
            return Err(Error::ShapeMismatch(format!(
                "activity vectors have lengths {} and {}",
                xi_out.len(),
                xi_in.len()
            )));
        }
        let m: u64 = xi_out.iter().sum();
        let m_in: u64 = xi_in.iter().sum();
        if m != m_in {
            return Err(Error::invalid(format!("activities sum to {m} (out) and {m_in} (in)")));
        }
        Ok(ActivityVectors { xi_out, xi_in, m })
    }

    pub fn nodes(&self) -> usize {
        self.xi_out.len()
    }

    /// Number of urn copies of the pair `(v, w)`.
    #[inline]
    pub fn urn(&self, v: usize, w: usize) -> u64 {
        self.xi_out[v] * self.xi_in[w]
    }

    /// Total urn size `Σ_vw Ξ_vw`, equal to `m^2`.
    pub fn urn_total(&self) -> u64 {
        self.m * self.m
    }
}

/// `log2 Pr(A | xi)` under the hypergeometric configuration model.
///
/// Configurations with a cell exceeding its urn count are impossible and
/// yield `-inf`.
pub fn log_prob_hcm(cells: &CellCounts, act: &ActivityVectors) -> Result<f64> {
    let total: u64 = cells.values().sum();
    if total != act.m {
        return Err(Error::invalid(format!(
            "adjacency counts sum to {total} but activities imply m = {}",
            act.m
        )));
    }
    let n = act.nodes();
    let mut ln_p = -ln_binomial(act.urn_total(), act.m);
    for (&(v, w), &a) in cells {
        if v as usize >= n || w as usize >= n {
            return Err(Error::invalid(format!("cell ({v}, {w}) is outside {n} nodes")));
        }
        if a == 0 {
            continue;
        }
        let xi = act.urn(v as usize, w as usize);
        if a > xi {
            return Ok(f64::NEG_INFINITY);
        }
        ln_p += ln_binomial(xi, a);
    }
    Ok(to_bits(ln_p))
}

/// Maximum-likelihood activities: the observed out- and in-degrees.
pub fn mle_activities(cells: &CellCounts, nodes: usize) -> ActivityVectors {
    let mut xi_out = vec![0u64; nodes];
    let mut xi_in = vec![0u64; nodes];
    for (&(v, w), &a) in cells {
        xi_out[v as usize] += a;
        xi_in[w as usize] += a;
    }
    let m = xi_out.iter().sum();
    ActivityVectors { xi_out, xi_in, m }
}

/// Expected `(out, in)` degree of node `v`. With the urn constraint
/// `Σ xi = m` these reduce to the activities themselves.
pub fn expected_degree(act: &ActivityVectors, v: usize) -> (f64, f64) {
    if act.m == 0 {
        return (0.0, 0.0);
    }
    let q = act.m as f64;
    let m = act.m as f64;
    (act.xi_out[v] as f64 / q * m, act.xi_in[v] as f64 / q * m)
}
