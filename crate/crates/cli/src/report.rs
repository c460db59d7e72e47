use std::io::Write;
use std::path::Path;

use qconc::bounds::{BoundConstants, BoundResult, Flavor};
use serde::Serialize;
use serde_json::Value;

use crate::cli::Format;
use crate::exit::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct ModelInfo {
    pub name: String,
    pub kind: &'static str,
    pub dim: usize,
}

/// A named constant with where it came from: `computed`, `certified-upper`,
/// `estimate`, `exact` or `override`.
#[derive(Debug, Clone, Serialize)]
pub struct Constant {
    pub context: String,
    pub name: &'static str,
    pub value: f64,
    pub provenance: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Report<R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Value,
    pub model: ModelInfo,
    pub constants: Vec<Constant>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<R>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Value>,
}

impl<R: Serialize> Report<R> {
    pub fn new(command: &'static str, inputs: Value, model: ModelInfo) -> Self {
        Report {
            tool: "qconc",
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs,
            model,
            constants: Vec::new(),
            rows: Vec::new(),
            warnings: Vec::new(),
            summary: None,
        }
    }

    /// CSV carries the rows only; warnings go to stderr in both formats.
    pub fn emit(&self, format: Format, output: Option<&Path>) -> CliResult<()> {
        for w in &self.warnings {
            eprintln!("warning: {w}");
        }
        let mut buf = Vec::new();
        match format {
            Format::Csv => {
                let mut wr = csv::Writer::from_writer(&mut buf);
                for r in &self.rows {
                    wr.serialize(r).map_err(io_error)?;
                }
                wr.flush().map_err(io_error)?;
            }
            Format::Structured => {
                serde_json::to_writer_pretty(&mut buf, self).map_err(io_error)?;
                buf.push(b'\n');
            }
        }
        write_out(&buf, output)
    }
}

pub fn write_out(bytes: &[u8], output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(io_error),
    }
}

fn io_error(e: impl std::fmt::Display) -> CliError {
    CliError::new(crate::exit::Code::Numeric, format!("output failed: {e}"))
}

/// One evaluated bound. `bound` is a probability upper bound, except for
/// the `ci` flavor where it is a lower bound on the coverage probability.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub flavor: String,
    pub parameter: Option<f64>,
    pub horizon: f64,
    pub gamma: f64,
    pub bound: f64,
    pub exponent: Option<f64>,
    pub prefactor: Option<f64>,
    pub valid: bool,
    pub two_sided: bool,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub epsilon: Option<f64>,
    pub n_rho: Option<f64>,
    pub g: Option<f64>,
    pub m: Option<f64>,
    pub alpha: Option<f64>,
    pub reason: Option<String>,
}

impl BoundRow {
    pub fn from_result(r: &BoundResult, parameter: Option<f64>) -> Self {
        let k = &r.constants;
        BoundRow {
            flavor: r.flavor.name().to_owned(),
            parameter,
            horizon: r.horizon,
            gamma: r.gamma,
            bound: r.probability_bound,
            exponent: Some(r.exponent),
            prefactor: Some(r.prefactor),
            valid: r.valid,
            two_sided: r.two_sided,
            b: k.b,
            c: k.c,
            epsilon: k.epsilon,
            n_rho: k.n_rho,
            g: k.g,
            m: k.m,
            alpha: k.alpha,
            reason: r.reason.clone(),
        }
    }
}

/// Constants of one bound evaluation, tagged with their provenance.
pub fn constants_of(
    context: &str,
    flavor: Flavor,
    k: &BoundConstants,
    eps_override: bool,
) -> Vec<Constant> {
    let lower = match flavor {
        Flavor::FluxHoeffding => "exact",
        _ => "estimate",
    };
    let fields: [(&'static str, Option<f64>, &'static str); 10] = [
        ("mean", k.mean, "computed"),
        ("b", k.b, "computed"),
        ("c", k.c, "computed"),
        (
            "epsilon",
            k.epsilon,
            if eps_override { "override" } else { "computed" },
        ),
        ("n_rho", k.n_rho, "computed"),
        ("g", k.g, "certified-upper"),
        ("resolvent_upper", k.resolvent_upper, "certified-upper"),
        ("resolvent_lower", k.resolvent_lower, lower),
        ("m", k.m, "computed"),
        ("alpha", k.alpha, "computed"),
    ];
    fields
        .into_iter()
        .filter_map(|(name, v, provenance)| {
            v.map(|value| Constant {
                context: context.to_owned(),
                name,
                value,
                provenance,
            })
        })
        .collect()
}
