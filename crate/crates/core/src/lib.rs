//! Change-point and timescale inference for temporal networks.
//!
//! A temporal network is cut into adjacent time windows. Each window is
//! modelled by a hypergeometric configuration model whose node activities are
//! fixed to the in-window degrees, and competing window partitions are scored
//! by their description length in bits. The crate provides:
//!
//! * [`graph`]: the temporal network data model, CSV ingestion, rebinning,
//!   slicing and per-window aggregation;
//! * [`hcm`]: the static hypergeometric configuration model kernel;
//! * [`htcm`]: the temporal model, its priors, total description length and
//!   incremental deltas for partition edits;
//! * [`mcmc`]: a Metropolis-Hastings sampler/optimizer over partitions;
//! * [`spectrum`]: fixed-width scans, local minima, topographic prominence
//!   and rolling dominant timescales;
//! * [`synth`]: a generative sampler that draws networks from the model.

pub mod error;
pub mod graph;
pub mod hcm;
pub mod htcm;
pub mod mcmc;
pub mod numerics;
pub mod spectrum;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{Event, TemporalGraph, WindowAggregate, WindowPartition};
pub use htcm::{DlReport, PriorMode};
