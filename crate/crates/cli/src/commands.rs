use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use timescales::graph::{ingest_csv, CsvSchema, Ingested, NodeMapping, TimeFormat};
use timescales::htcm::description_length;
use timescales::mcmc::{self, BetaSchedule, ChainConfig, Init};
use timescales::spectrum::{renormalize, rolling_dominant, spectrogram, DominantMode, Minimum};
use timescales::synth::SynthFile;
use timescales::{PriorMode, TemporalGraph, WindowPartition};

use crate::output::{sig9, Run};
use crate::{
    DetectArgs, DlArgs, InitArg, InputArgs, Invalid, ModeArg, PriorArg, RollingArgs, SpectrumArgs, SynthArgs,
    TimeFormatArg,
};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

/// The graph as analysed, after rebinning, and how its steps map back to
/// the raw timestamps.
struct Loaded {
    graph: TemporalGraph,
    mapping: NodeMapping,
    rebin: usize,
}

fn load(run: &mut Run, args: &InputArgs) -> Result<Loaded> {
    let bytes = run.read_input(&args.input)?;
    if !args.delimiter.is_ascii() {
        return Err(invalid(format!("delimiter {:?} is not a single byte", args.delimiter)));
    }
    let schema = CsvSchema {
        has_header: args.header,
        delimiter: args.delimiter as u8,
        time_format: match args.time_format {
            TimeFormatArg::Integer => TimeFormat::Integer,
            TimeFormatArg::Date => TimeFormat::Date,
            TimeFormatArg::DateTime => TimeFormat::DateTime,
        },
    };
    let Ingested { graph, mapping } =
        ingest_csv(bytes.as_slice(), &schema).with_context(|| format!("reading {}", args.input.display()))?;
    let graph = match args.nodes {
        Some(n) if n < graph.nodes() => {
            return Err(invalid(format!("--nodes {n} is below the {} distinct labels in the data", graph.nodes())))
        }
        Some(n) => TemporalGraph::new(n, graph.steps(), graph.events().to_vec())?,
        None => graph,
    };
    let rebin = args.rebin as usize;
    Ok(Loaded { graph: graph.rebin(rebin)?, mapping, rebin })
}

fn mode(m: ModeArg) -> DominantMode {
    match m {
        ModeArg::Mdl => DominantMode::Mdl,
        ModeArg::TopProminence => DominantMode::TopProminence,
    }
}

pub fn synth(args: &SynthArgs) -> Result<PathBuf> {
    let mut run = Run::start("synth");
    let text = run.read_input(&args.config)?;
    let text = String::from_utf8(text).map_err(|_| invalid(format!("{} is not UTF-8", args.config.display())))?;
    let mut file: SynthFile = toml::from_str(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        file.seed = seed;
    }
    run.seed(file.seed);
    let graph = file.generate().with_context(|| format!("invalid config {}", args.config.display()))?;
    let mut buf = Vec::new();
    graph.write_csv(&mut buf)?;
    run.create(&args.out)?.write_all(&buf)?;
    run.finish(&args.out, &(args, &file))
}

pub fn parse_schedule(spec: &str) -> Result<BetaSchedule> {
    let bad = || invalid(format!("unrecognized beta schedule {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let schedule = match kind {
        "anneal" if rest.is_empty() => BetaSchedule::Geometric { start: 1.0, end: 0.05 },
        "fixed" => BetaSchedule::Fixed(num(rest)?),
        "geometric" => {
            let (a, b) = rest.split_once(':').ok_or_else(bad)?;
            BetaSchedule::Geometric { start: num(a)?, end: num(b)? }
        }
        "steps" => BetaSchedule::Steps(
            rest.split(',')
                .map(|pair| {
                    let (s, b) = pair.split_once('=').ok_or_else(bad)?;
                    Ok((s.trim().parse::<usize>().map_err(|_| bad())?, num(b)?))
                })
                .collect::<Result<_>>()?,
        ),
        _ => return Err(bad()),
    };
    Ok(schedule)
}

pub fn detect(args: &DetectArgs) -> Result<PathBuf> {
    let mut run = Run::start("detect");
    run.seed(args.seed);
    let loaded = load(&mut run, &args.input)?;
    let mut cfg = ChainConfig::sampling(1.0, args.sweeps as usize, args.seed);
    cfg.schedule = Some(parse_schedule(&args.beta_schedule)?);
    cfg.chains = args.chains as usize;
    cfg.plateau = args.plateau;
    cfg.init = match args.init {
        InitArg::Single => Init::SingleWindow,
        InitArg::Singletons => Init::AllSingletons,
    };
    cfg.validate().map_err(|e| invalid(e.to_string()))?;
    let result = mcmc::run(&loaded.graph, &cfg)?;

    let mut json = result.to_json(args.trace_stride as usize);
    let times: Vec<i64> = result
        .best_partition
        .boundaries()
        .iter()
        .map(|&b| loaded.mapping.time_origin + (b * loaded.rebin) as i64)
        .collect();
    json["boundary_timestamps"] = serde_json::json!(times);
    json["steps"] = serde_json::json!(loaded.graph.steps());
    json["nodes"] = serde_json::json!(loaded.graph.nodes());
    json["events"] = serde_json::json!(loaded.graph.num_events());
    run.write_json(&args.out, &json)?;

    if let Some(path) = &args.trace {
        let mut w = std::io::BufWriter::new(run.create(path)?);
        writeln!(w, "sweep,bits,bestBits")?;
        for (i, (b, best)) in result.trace.iter().zip(&result.best_trace).enumerate() {
            writeln!(w, "{i},{},{}", sig9(*b), sig9(*best))?;
        }
        w.flush()?;
    }
    run.finish(&args.out, args)
}

#[derive(Serialize)]
struct MinimaReport<'a> {
    steps: usize,
    delta_max: usize,
    mode: ModeArg,
    dominant: usize,
    mdl_delta: usize,
    minima: &'a [Minimum],
}

pub fn spectrum(args: &SpectrumArgs) -> Result<PathBuf> {
    let mut run = Run::start("spectrum");
    let loaded = load(&mut run, &args.input)?;
    let steps = loaded.graph.steps();
    let delta_max = args.delta_max.map_or(steps, |d| d as usize);
    if delta_max > steps {
        return Err(invalid(format!("--delta-max {delta_max} exceeds the {steps} steps of the data")));
    }
    let spec = spectrogram(&loaded.graph, 1..=delta_max)?;

    let mut buf = Vec::new();
    spec.write_csv(&mut buf, sig9)?;
    run.create(&args.out)?.write_all(&buf)?;
    let report = MinimaReport {
        steps,
        delta_max,
        mode: args.mode,
        dominant: spec.dominant(mode(args.mode)),
        mdl_delta: spec.mdl_delta,
        minima: &spec.minima,
    };
    run.write_json(&args.out.with_extension("minima.json"), &report)?;
    if let Some(path) = &args.svg {
        run.create(path)?.write_all(crate::svg::spectrogram(&spec).as_bytes())?;
    }
    run.finish(&args.out, args)
}

pub fn rolling(args: &RollingArgs) -> Result<PathBuf> {
    let mut run = Run::start("rolling");
    let loaded = load(&mut run, &args.input)?;
    let steps = loaded.graph.steps();
    let window = args.window as usize;
    if window > steps {
        return Err(invalid(format!("--window {window} is longer than the {steps} steps of the data")));
    }
    let series = rolling_dominant(
        &loaded.graph,
        window,
        args.step as usize,
        mode(args.mode),
        args.delta_max.map(|d| d as usize),
    )?;
    let renormalized = match args.shock_time {
        Some(shock) => Some(renormalize(&series, window, shock).map_err(|e| invalid(e.to_string()))?),
        None => None,
    };
    let mut w = std::io::BufWriter::new(run.create(&args.out)?);
    writeln!(w, "windowStart,dominantDelta,renormalizedDelta")?;
    for (i, p) in series.iter().enumerate() {
        let r = renormalized.as_ref().map_or(String::new(), |r| sig9(r[i]));
        writeln!(w, "{},{},{r}", p.start, p.dominant)?;
    }
    w.flush()?;
    drop(w);
    run.finish(&args.out, args)
}

pub fn dl(args: &DlArgs) -> Result<PathBuf> {
    let mut run = Run::start("dl");
    let loaded = load(&mut run, &args.input)?;
    let p = WindowPartition::from_cuts(&args.cuts, loaded.graph.steps()).map_err(|e| invalid(e.to_string()))?;
    let prior = match args.prior {
        PriorArg::General => PriorMode::General,
        PriorArg::FixedWindow => PriorMode::FixedWindow,
    };
    let report = description_length(&loaded.graph, &p, prior).map_err(|e| invalid(e.to_string()))?;
    run.write_json(
        &args.out,
        &serde_json::json!({
            "boundaries": p.boundaries(),
            "widths": p.widths(),
            "relative_bits": report.relative_bits(),
            "report": report,
        }),
    )?;
    run.finish(&args.out, args)
}
