use std::io::Write;

use qconc::trajectory::{sample_counting_stream, sample_discrete_stream, NoJumpPropagator};
use serde::Serialize;
use serde_json::json;

use super::bound::{evaluate, Target};
use super::sampling::{center_of, process_name, Sampler};
use super::Session;
use crate::cli::{Format, SimulateArgs};
use crate::exit::{CliError, CliResult};
use crate::model::ModelKind;
use crate::report::Report;

#[derive(Debug, Serialize)]
pub struct SimRow {
    pub process: &'static str,
    pub parameter: Option<f64>,
    pub horizon: f64,
    pub gamma: f64,
    pub center: Option<f64>,
    pub two_sided: bool,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub trials: u64,
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    if args.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let s = Session::open(&args.model)?;
    s.require_valid()?;
    let ev = evaluate(&s, args.model.rho0.as_deref(), &args.grid)?;
    let sampler = Sampler::new(&s.model, &ev, args.seed);

    let mut rows = Vec::new();
    let mut seen: Vec<(&'static str, Option<u64>, u64, u64)> = Vec::new();
    for e in &ev.rows {
        if matches!(e.target, Target::Unavailable) {
            continue;
        }
        let key = (
            process_name(&e.target),
            e.row.parameter.map(f64::to_bits),
            e.row.horizon.to_bits(),
            e.row.gamma.to_bits(),
        );
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let two_sided = e.row.two_sided;
        let tail = sampler.tail(
            &e.target,
            e.row.horizon,
            e.row.gamma,
            two_sided,
            args.trials,
        )?;
        rows.push(SimRow {
            process: key.0,
            parameter: e.row.parameter,
            horizon: e.row.horizon,
            gamma: e.row.gamma,
            center: center_of(&e.target),
            two_sided,
            estimate: tail.estimate,
            ci_low: tail.ci_low,
            ci_high: tail.ci_high,
            hits: tail.hits,
            trials: tail.trials,
        });
    }

    let mut summary = Vec::new();
    if let Some(m) = ev.rows.iter().find_map(|e| match e.target {
        Target::Counting { m } => Some(m),
        _ => None,
    }) {
        for &t in &args.grid.t {
            let counts = sampler.counts(t, args.trials)?;
            let k = counts.len() as f64;
            let rates: Vec<f64> = counts.iter().map(|&c| c as f64 / t).collect();
            let mean = rates.iter().sum::<f64>() / k;
            let var =
                rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (k - 1.0).max(1.0);
            let se = (var / k).sqrt();
            summary.push(json!({
                "t": t,
                "empirical_rate": mean,
                "standard_error": se,
                "intensity": m,
                "z": if se > 0.0 { (mean - m) / se } else { 0.0 },
            }));
        }
    }

    if let Some(path) = &args.dump {
        dump(&sampler, args, path)?;
    }

    let extra = json!({
        "trials": args.trials,
        "seed": args.seed,
        "dump": args.dump.as_ref().map(|p| p.display().to_string()),
        "dump_limit": args.dump_limit,
    });
    let mut report = Report::new(
        "simulate",
        super::echo(&args.model, Some(&args.grid), extra),
        s.info(),
    );
    report.constants = ev.constants.clone();
    report.warnings = ev.warnings.clone();
    report.rows = rows;
    if !summary.is_empty() {
        report.summary = Some(json!({ "counting": summary }));
    }
    report.emit(
        args.model.format.unwrap_or(Format::Csv),
        args.model.output.as_deref(),
    )
}

/// One JSON record per trajectory, for streams `0..min(trials, dump_limit)` at the longest
/// horizon. Streams match the ones used for the tails.
fn dump(sampler: &Sampler, args: &SimulateArgs, path: &std::path::Path) -> CliResult<()> {
    let mut out = Vec::new();
    let count = args.dump_limit.min(args.trials);
    match &sampler.model.kind {
        ModelKind::Gkls(g) => {
            let t = args.grid.t.iter().copied().fold(0.0, f64::max);
            let rho = sampler.rho()?;
            let prop = NoJumpPropagator::new(&g.generator);
            for k in 0..count {
                let r = sample_counting_stream(&g.generator, &prop, &rho, t, args.seed, k)?;
                let events: Vec<(f64, &str)> = r
                    .events
                    .iter()
                    .map(|&(time, i)| (time, g.generator.labels[i].as_str()))
                    .collect();
                let line = json!({"seed": r.seed, "stream": r.stream, "horizon": r.horizon, "events": events});
                writeln!(out, "{line}").expect("writing to memory");
            }
        }
        _ => {
            let n = args.grid.n.iter().copied().max().unwrap_or(0) as usize;
            let (ch, _) = sampler.channel()?;
            let rho = sampler.rho()?;
            for k in 0..count {
                let r = sample_discrete_stream(&ch, &rho, n, args.seed, k, false)?;
                let labels: Vec<&str> = r.outcomes.iter().map(|&i| ch.labels[i].as_str()).collect();
                let line = json!({"seed": r.seed, "stream": r.stream, "outcomes": labels});
                writeln!(out, "{line}").expect("writing to memory");
            }
        }
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}
