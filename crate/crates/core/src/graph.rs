//! Temporal network data model: events, partitions of the time axis, and
//! per-window aggregates.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ln_factorial;

/// A directed interaction `source -> target` at discrete step `time`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub time: u32,
    pub source: u32,
    pub target: u32,
}

impl Event {
    pub fn new(source: u32, target: u32, time: u32) -> Self {
        Event { time, source, target }
    }
}

/// Immutable multiset of timestamped directed events over `nodes` node ids
/// and `steps` discrete time steps.
///
/// Events are kept sorted by `(time, source, target)`, so two graphs built
/// from the same multiset compare equal regardless of input order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporalGraph {
    nodes: usize,
    steps: usize,
    events: Vec<Event>,
}

impl TemporalGraph {
    pub fn new(nodes: usize, steps: usize, mut events: Vec<Event>) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::invalid("graph needs at least one node"));
        }
        if steps == 0 {
            return Err(Error::invalid("graph needs at least one time step"));
        }
        if steps > u32::MAX as usize || nodes > u32::MAX as usize {
            return Err(Error::invalid("graph dimensions exceed 32-bit ids"));
        }
        for e in &events {
            if e.source as usize >= nodes || e.target as usize >= nodes {
                return Err(Error::invalid(format!(
                    "event {e:?} references a node outside 0..{nodes}"
                )));
            }
            if e.time as usize >= steps {
                return Err(Error::invalid(format!(
                    "event {e:?} lies outside 0..{steps}"
                )));
            }
        }
        events.sort_unstable();
        Ok(TemporalGraph { nodes, steps, events })
    }

    /// Convenience constructor from `(source, target, time)` triples.
    pub fn from_triples(nodes: usize, steps: usize, triples: &[(u32, u32, u32)]) -> Result<Self> {
        let events = triples.iter().map(|&(s, t, time)| Event::new(s, t, time)).collect();
        Self::new(nodes, steps, events)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Index of the first event at each step; `offsets[t]..offsets[t + 1]`
    /// spans the events at step `t`.
    pub fn step_offsets(&self) -> Vec<usize> {
        let mut offsets = vec![0usize; self.steps + 1];
        for e in &self.events {
            offsets[e.time as usize + 1] += 1;
        }
        for t in 0..self.steps {
            offsets[t + 1] += offsets[t];
        }
        offsets
    }

    /// Maps every event at step `t` to step `t / resolution`.
    pub fn rebin(&self, resolution: usize) -> Result<Self> {
        if resolution < 1 {
            return Err(Error::invalid("rebin resolution must be at least 1"));
        }
        let steps = self.steps.div_ceil(resolution);
        let events = self
            .events
            .iter()
            .map(|e| Event { time: e.time / resolution as u32, ..*e })
            .collect();
        Self::new(self.nodes, steps, events)
    }

    /// Events with `t0 <= t < t1`, shifted to start at zero. The node set is
    /// unchanged.
    pub fn slice(&self, t0: usize, t1: usize) -> Result<Self> {
        if t0 >= t1 || t1 > self.steps {
            return Err(Error::invalid(format!(
                "slice [{t0}, {t1}) is empty or outside [0, {})",
                self.steps
            )));
        }
        let lo = self.events.partition_point(|e| (e.time as usize) < t0);
        let hi = self.events.partition_point(|e| (e.time as usize) < t1);
        let events = self.events[lo..hi]
            .iter()
            .map(|e| Event { time: e.time - t0 as u32, ..*e })
            .collect();
        Ok(TemporalGraph { nodes: self.nodes, steps: t1 - t0, events })
    }

    /// Aggregates the events of each window of `partition` into a static
    /// multigraph.
    pub fn aggregate(&self, partition: &WindowPartition) -> Result<Vec<WindowAggregate>> {
        partition.check_steps(self.steps)?;
        let mut out = Vec::with_capacity(partition.len());
        let mut cursor = 0usize;
        for (tau, (start, end)) in partition.windows().enumerate() {
            let lo = cursor;
            while cursor < self.events.len() && (self.events[cursor].time as usize) < end {
                cursor += 1;
            }
            out.push(WindowAggregate::from_events(
                tau,
                start,
                end - start,
                self.nodes,
                &self.events[lo..cursor],
            ));
        }
        Ok(out)
    }

    /// `Σ_t Σ_vw ln(A_vwt!)` over the whole graph, in nats.
    pub fn log_data_term(&self) -> f64 {
        log_data_term(&self.events)
    }

    /// Writes the graph as a headerless `source,target,timestamp` edge list.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for e in &self.events {
            w.write_record([e.source.to_string(), e.target.to_string(), e.time.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Σ ln(A_vwt!)` for a time-sorted slice of events.
fn log_data_term(events: &[Event]) -> f64 {
    let mut total = 0.0;
    let mut run = 0u64;
    for (i, e) in events.iter().enumerate() {
        run += 1;
        if i + 1 == events.len() || events[i + 1] != *e {
            total += ln_factorial(run);
            run = 0;
        }
    }
    total
}

/// Ordered window widths covering the time axis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct WindowPartition {
    widths: Vec<usize>,
}

impl TryFrom<Vec<usize>> for WindowPartition {
    type Error = Error;

    fn try_from(widths: Vec<usize>) -> Result<Self> {
        WindowPartition::new(widths)
    }
}

impl From<WindowPartition> for Vec<usize> {
    fn from(p: WindowPartition) -> Self {
        p.widths
    }
}

impl WindowPartition {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::invalid("partition needs at least one window"));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::invalid("window widths must be at least 1"));
        }
        Ok(WindowPartition { widths })
    }

    /// A partition that must cover exactly `steps` steps.
    pub fn with_steps(widths: Vec<usize>, steps: usize) -> Result<Self> {
        let p = Self::new(widths)?;
        p.check_steps(steps)?;
        Ok(p)
    }

    pub fn single(steps: usize) -> Result<Self> {
        Self::new(vec![steps])
    }

    pub fn singletons(steps: usize) -> Result<Self> {
        Self::new(vec![1; steps])
    }

    /// Builds the partition whose windows end at the given interior cut
    /// points (strictly increasing, in `1..steps`).
    pub fn from_cuts(cuts: &[usize], steps: usize) -> Result<Self> {
        let mut widths = Vec::with_capacity(cuts.len() + 1);
        let mut prev = 0;
        for &c in cuts.iter().chain(std::iter::once(&steps)) {
            if c <= prev {
                return Err(Error::invalid(format!("cut points must increase within (0, {steps})")));
            }
            widths.push(c - prev);
            prev = c;
        }
        Self::new(widths)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of windows `z`.
    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.widths.iter().sum()
    }

    /// Cumulative window ends; the last entry equals [`steps`](Self::steps).
    pub fn boundaries(&self) -> Vec<usize> {
        self.widths
            .iter()
            .scan(0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect()
    }

    /// Interior cut points (every boundary except the final one).
    pub fn cuts(&self) -> Vec<usize> {
        let mut b = self.boundaries();
        b.pop();
        b
    }

    /// Half-open `(start, end)` step ranges of the windows.
    pub fn windows(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.widths.iter().scan(0, |acc, w| {
            let start = *acc;
            *acc += w;
            Some((start, *acc))
        })
    }

    pub(crate) fn check_steps(&self, steps: usize) -> Result<()> {
        let total = self.steps();
        if total != steps {
            return Err(Error::PartitionMismatch(format!(
                "widths sum to {total} but the graph has {steps} steps"
            )));
        }
        Ok(())
    }

    pub(crate) fn widths_mut(&mut self) -> &mut Vec<usize> {
        &mut self.widths
    }
}

/// Static multigraph obtained by collapsing the events of one window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowAggregate {
    pub tau: usize,
    pub start: usize,
    pub width: usize,
    /// Number of events in the window.
    pub m: u64,
    /// Nonzero cell counts `A_vw` keyed by `(source, target)`.
    pub cells: BTreeMap<(u32, u32), u64>,
    pub kout: Vec<u64>,
    pub kin: Vec<u64>,
    /// `Σ_{t in window} Σ_vw ln(A_vwt!)`, in nats.
    pub log_data_term: f64,
}

impl WindowAggregate {
    fn from_events(tau: usize, start: usize, width: usize, nodes: usize, events: &[Event]) -> Self {
        let mut cells = BTreeMap::new();
        let mut kout = vec![0u64; nodes];
        let mut kin = vec![0u64; nodes];
        for e in events {
            *cells.entry((e.source, e.target)).or_insert(0) += 1;
            kout[e.source as usize] += 1;
            kin[e.target as usize] += 1;
        }
        WindowAggregate {
            tau,
            start,
            width,
            m: events.len() as u64,
            cells,
            kout,
            kin,
            log_data_term: log_data_term(events),
        }
    }
}

/// How the timestamp column is interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFormat {
    /// Plain integers.
    #[default]
    Integer,
    /// `YYYY-MM-DD`, counted in days.
    Date,
    /// RFC 3339 or `YYYY-MM-DD HH:MM:SS`, counted in seconds.
    DateTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CsvSchema {
    pub has_header: bool,
    pub delimiter: u8,
    pub time_format: TimeFormat,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema { has_header: false, delimiter: b',', time_format: TimeFormat::Integer }
    }
}

/// Labels of the dense node ids and the raw timestamp of step zero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMapping {
    pub labels: Vec<String>,
    pub time_origin: i64,
    pub time_format: TimeFormat,
}

impl NodeMapping {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Ingested {
    pub graph: TemporalGraph,
    pub mapping: NodeMapping,
}

fn parse_time(raw: &str, format: TimeFormat) -> std::result::Result<i64, String> {
    let raw = raw.trim();
    match format {
        TimeFormat::Integer => raw.parse::<i64>().map_err(|e| format!("bad timestamp {raw:?}: {e}")),
        TimeFormat::Date => NaiveDate::parse_from_str(raw, "%Y-%m-%d")
            .map(|d| d.signed_duration_since(NaiveDate::default()).num_days())
            .map_err(|e| format!("bad date {raw:?}: {e}")),
        TimeFormat::DateTime => DateTime::parse_from_rfc3339(raw)
            .map(|d| d.timestamp())
            .or_else(|_| {
                NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S").map(|d| d.and_utc().timestamp())
            })
            .map_err(|e| format!("bad datetime {raw:?}: {e}")),
    }
}

/// Reads a `source,target,timestamp` edge list.
///
/// Node labels get dense ids in order of first appearance; the smallest
/// timestamp becomes step zero and empty steps in between are kept.
pub fn ingest_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(schema.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut labels = Vec::new();
    let mut raw = Vec::new();
    let mut intern = |label: &str| -> u32 {
        if let Some(&id) = ids.get(label) {
            return id;
        }
        let id = labels.len() as u32;
        labels.push(label.to_string());
        ids.insert(label.to_string(), id);
        id
    };

    let mut first = true;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if std::mem::take(&mut first) && schema.has_header {
            continue;
        }
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() < 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected source,target,timestamp but found {} field(s)", record.len()),
            });
        }
        if record[0].is_empty() || record[1].is_empty() {
            return Err(Error::Parse { line, message: "empty node label".into() });
        }
        let time = parse_time(&record[2], schema.time_format).map_err(|message| Error::Parse { line, message })?;
        let s = intern(&record[0]);
        let t = intern(&record[1]);
        raw.push((s, t, time));
    }

    if raw.is_empty() {
        return Err(Error::Empty("edge list has no rows".into()));
    }
    let origin = raw.iter().map(|r| r.2).min().unwrap_or(0);
    let last = raw.iter().map(|r| r.2).max().unwrap_or(0);
    let span = (last - origin) as u64 + 1;
    if span > u32::MAX as u64 {
        return Err(Error::invalid(format!("timestamp span {span} is too large; rebin the input first")));
    }
    let events = raw
        .into_iter()
        .map(|(s, t, time)| Event::new(s, t, (time - origin) as u32))
        .collect();
    let graph = TemporalGraph::new(labels.len(), span as usize, events)?;
    Ok(Ingested {
        graph,
        mapping: NodeMapping { labels, time_origin: origin, time_format: schema.time_format },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest(text: &str) -> Result<Ingested> {
        ingest_csv(text.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn ingest_two_rows() {
        let g = ingest("a,b,0\nb,a,1\n").unwrap();
        assert_eq!(g.graph.nodes(), 2);
        assert_eq!(g.graph.steps(), 2);
        assert_eq!(g.graph.num_events(), 2);
        assert_eq!(g.mapping.labels, vec!["a", "b"]);
    }

    #[test]
    fn ingest_shifts_and_keeps_multi_edges() {
        let g = ingest("a,b,5\na,b,5\n").unwrap();
        assert_eq!((g.graph.nodes(), g.graph.steps(), g.graph.num_events()), (2, 1, 2));
        assert_eq!(g.mapping.time_origin, 5);
        let agg = g.graph.aggregate(&WindowPartition::single(1).unwrap()).unwrap();
        assert_eq!(agg[0].cells[&(0, 1)], 2);
    }

    #[test]
    fn ingest_header_and_dates() {
        let schema = CsvSchema { has_header: true, time_format: TimeFormat::Date, ..Default::default() };
        let g = ingest_csv("src,dst,when\nx,y,2001-01-01\ny,z,2001-01-08\n".as_bytes(), &schema).unwrap();
        assert_eq!(g.graph.steps(), 8);
        assert_eq!(g.graph.nodes(), 3);
        let weekly = g.graph.rebin(7).unwrap();
        assert_eq!(weekly.steps(), 2);
    }

    #[test]
    fn ingest_datetime_formats() {
        let schema = CsvSchema { time_format: TimeFormat::DateTime, ..Default::default() };
        let g = ingest_csv("a,b,2001-01-01T00:00:00Z\na,b,2001-01-01 00:00:09\n".as_bytes(), &schema).unwrap();
        assert_eq!(g.graph.steps(), 10);
    }

    #[test]
    fn ingest_errors() {
        assert!(matches!(ingest(""), Err(Error::Empty(_))));
        match ingest("a,b,0\na,b\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match ingest("a,b,0\na,b,zz\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rebin_floor_division() {
        let g = TemporalGraph::from_triples(2, 14, &[(0, 1, 0), (1, 0, 13)]).unwrap();
        let r = g.rebin(7).unwrap();
        assert_eq!(r.steps(), 2);
        assert_eq!(r.events().iter().map(|e| e.time).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(g.rebin(1).unwrap(), g);
        assert!(g.rebin(0).is_err());
        assert_eq!(TemporalGraph::from_triples(1, 15, &[]).unwrap().rebin(7).unwrap().steps(), 3);
    }

    #[test]
    fn slice_shifts_times() {
        let g = TemporalGraph::from_triples(3, 8, &[(0, 1, 2), (1, 2, 5)]).unwrap();
        assert_eq!(g.slice(0, 8).unwrap(), g);
        let s = g.slice(2, 4).unwrap();
        assert_eq!(s.steps(), 2);
        assert_eq!(s.nodes(), 3);
        assert_eq!(s.events(), &[Event::new(0, 1, 0)]);
        assert!(g.slice(3, 3).is_err());
        assert!(g.slice(0, 9).is_err());
    }

    #[test]
    fn aggregate_windows() {
        let g = TemporalGraph::from_triples(2, 2, &[(0, 1, 0), (0, 1, 1)]).unwrap();
        let one = g.aggregate(&WindowPartition::single(2).unwrap()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].m, 2);
        let two = g.aggregate(&WindowPartition::new(vec![1, 1]).unwrap()).unwrap();
        assert_eq!(two.len(), 2);
        for w in &two {
            assert_eq!(w.m, 1);
            assert_eq!(w.cells[&(0, 1)], 1);
            assert_eq!(w.kout, vec![1, 0]);
            assert_eq!(w.kin, vec![0, 1]);
        }
        assert!(matches!(
            g.aggregate(&WindowPartition::new(vec![3]).unwrap()),
            Err(Error::PartitionMismatch(_))
        ));
    }

    #[test]
    fn data_term_counts_same_step_repeats() {
        let g = TemporalGraph::from_triples(2, 2, &[(0, 1, 0), (0, 1, 0), (0, 1, 0), (0, 1, 1)]).unwrap();
        assert!((g.log_data_term() - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn partition_helpers() {
        let p = WindowPartition::new(vec![2, 3, 1]).unwrap();
        assert_eq!(p.boundaries(), vec![2, 5, 6]);
        assert_eq!(p.cuts(), vec![2, 5]);
        assert_eq!(WindowPartition::from_cuts(&[2, 5], 6).unwrap(), p);
        assert!(WindowPartition::from_cuts(&[2, 2], 6).is_err());
        assert!(WindowPartition::new(vec![]).is_err());
        assert!(WindowPartition::new(vec![1, 0]).is_err());
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[2,3,1]");
        assert!(serde_json::from_str::<WindowPartition>("[0]").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = TemporalGraph::from_triples(3, 5, &[(0, 1, 0), (2, 1, 4), (1, 1, 2)]).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = ingest_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(back.graph.num_events(), 3);
        assert_eq!(back.graph.steps(), 5);
    }
}
