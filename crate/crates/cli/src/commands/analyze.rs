use qconc::bounds::{CountingModel, DiscreteModel, Flavor};
use qconc::classical::{
    doubled_chain, flux_bernstein, flux_hoeffding, flux_stats, resolvent_norm_classical,
    stationary_distribution,
};
use qconc::linalg::{self, CMat};
use qconc::operator::{validate_channel, Tolerances};
use qconc::spectral::{
    decompose_invariant_subspaces, generator_invariance_residual, invariance_residual,
    is_irreducible, spectral_report,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::{classical_nu, matrix_json, quantum_rho, Session};
use crate::cli::{AnalyzeArgs, Format};
use crate::exit::{CliError, CliResult, Code};
use crate::model::{ClassicalModel, GklsModel, KrausModel, ModelKind};
use crate::report::{constants_of, Constant, Report};

#[derive(Debug, Serialize)]
pub struct KeyValue {
    pub key: String,
    pub value: String,
}

/// Diagnostics gathered so far plus whatever went wrong along the way.
#[derive(Default)]
struct Findings {
    doc: Map<String, Value>,
    constants: Vec<Constant>,
    warnings: Vec<String>,
    failure: Option<CliError>,
}

impl Findings {
    fn set(&mut self, key: &str, v: impl Serialize) {
        self.doc.insert(
            key.into(),
            serde_json::to_value(v).expect("serializable diagnostics"),
        );
    }

    fn fail(&mut self, code: Code, msg: String) {
        self.warnings.push(msg.clone());
        if self.failure.is_none() {
            self.failure = Some(CliError::new(code, msg));
        }
    }
}

fn error_json(e: impl std::fmt::Display) -> Value {
    json!({ "error": e.to_string() })
}

fn state_json(sigma: &CMat, tol: &Tolerances) -> Value {
    let ev = linalg::eigvalsh(sigma);
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    json!({
        "matrix": matrix_json(sigma),
        "eigenvalues": ev,
        "min_eigenvalue": min,
        "faithful": min > tol.psd,
    })
}

fn kraus(s: &Session, k: &KrausModel, args: &AnalyzeArgs, out: &mut Findings) -> CliResult<()> {
    let tol = s.tol;
    let v = validate_channel(&k.channel, tol.channel);
    out.set("validation", &v);
    if !v.pass {
        out.fail(
            Code::Parse,
            format!(
                "kraus: Σ V*V deviates from the identity by {:e}",
                v.max_deviation
            ),
        );
        return Ok(());
    }
    let irr = is_irreducible(&k.channel, &tol)?;
    out.set("irreducibility", &irr);
    match spectral_report(&k.channel, &tol) {
        Ok(r) => out.set("spectrum", r),
        Err(e) => out.set("spectrum", error_json(e)),
    }
    let dm = DiscreteModel::new(k.channel.clone(), tol);
    match &dm {
        Ok(m) => {
            let mut st = state_json(&m.sigma, &tol);
            st["invariance_residual"] = json!(invariance_residual(&k.channel, &m.sigma));
            out.set("invariant_state", st);
        }
        Err(e) => out.set("invariant_state", error_json(e)),
    }
    let rho = quantum_rho(
        args.model.rho0.as_deref(),
        k.rho0.as_ref(),
        k.channel.dim,
        || dm.as_ref().map(|m| m.sigma.clone()).map_err(Clone::clone),
        &tol,
        &mut out.warnings,
    )?;

    if let Ok(m) = &dm {
        match m.gap() {
            Ok(g) => out.set("psi", g),
            Err(e) => {
                out.set("psi", error_json(&e));
                out.warnings
                    .push(format!("Bernstein-type bounds unavailable: {e}"));
            }
        }
        match m.resolvent() {
            Ok(r) => out.set("pseudoresolvent", r.norm(args.seed)),
            Err(e) => {
                out.set("pseudoresolvent", error_json(&e));
                out.warnings
                    .push(format!("Hoeffding-type bounds unavailable: {e}"));
            }
        }
        let stats = m.stats(&k.f)?;
        out.set("observation", &stats);
        let (mut kb, _) = m.bernstein_constants(&k.f, &rho)?;
        out.constants
            .extend(constants_of("bernstein", Flavor::Bernstein, &kb, false));
        if let Ok(r) = m.resolvent() {
            let norm = r.norm(args.seed);
            kb.g = Some((1.0 + norm.certified_upper) * stats.c);
            kb.resolvent_upper = Some(norm.certified_upper);
            kb.resolvent_lower = Some(norm.lower_estimate);
            kb.epsilon = None;
            kb.n_rho = None;
            out.constants
                .extend(constants_of("hoeffding", Flavor::Hoeffding, &kb, false));
        }
    }

    if !irr.irreducible {
        match decompose_invariant_subspaces(&k.channel, &tol) {
            Ok(dec) => {
                let weights = dec.weights(&rho);
                let blocks: Vec<Value> = (0..dec.len())
                    .map(|j| {
                        let ch = &dec.restricted_channels[j];
                        let mean = qconc::bounds::outcome_law(ch, &dec.block_states[j])
                            .iter()
                            .zip(&k.f.values)
                            .map(|(p, v)| p * v)
                            .sum::<f64>();
                        json!({
                            "dim": dec.bases[j].ncols(),
                            "weight": weights[j],
                            "mean": mean,
                            "state": state_json(&dec.block_states[j], &tol),
                        })
                    })
                    .collect();
                out.set(
                    "decomposition",
                    json!({
                        "blocks": blocks,
                        "commutation_residual": dec.commutation_residual,
                    }),
                );
                out.warnings.push(format!(
                    "channel is reducible: {} invariant blocks; use --flavor reducible",
                    dec.len()
                ));
            }
            Err(e) => {
                out.set("decomposition", error_json(&e));
                out.fail(
                    Code::Hypothesis,
                    format!("channel is reducible and cannot be decomposed: {e}"),
                );
            }
        }
    } else if let Err(e) = &dm {
        out.fail(Code::Hypothesis, e.to_string());
    }
    Ok(())
}

fn gkls(s: &Session, g: &GklsModel, args: &AnalyzeArgs, out: &mut Findings) -> CliResult<()> {
    let tol = s.tol;
    let gen = &g.generator;
    let v = gen.validate(&tol);
    out.set("validation", &v);
    if !v.pass {
        out.fail(Code::Parse, "hamiltonian: not selfadjoint".into());
        return Ok(());
    }
    let cm = match CountingModel::new(gen.clone(), tol) {
        Ok(cm) => cm,
        Err(e) => {
            out.set("steady_state", error_json(&e));
            out.fail(Code::Hypothesis, e.to_string());
            return Ok(());
        }
    };
    let mut st = state_json(&cm.sigma, &tol);
    st["invariance_residual"] = json!(generator_invariance_residual(gen, &cm.sigma));
    st["hamiltonian_commutator"] = json!(gen.commutes_with(&cm.sigma));
    out.set("steady_state", st);
    let rho = quantum_rho(
        args.model.rho0.as_deref(),
        g.rho0.as_ref(),
        gen.dim,
        || Ok(cm.sigma.clone()),
        &tol,
        &mut out.warnings,
    )?;
    let gap_ok = match cm.gap() {
        Ok(gap) => {
            out.set("additive_gap", gap);
            true
        }
        Err(e) => {
            out.set("additive_gap", error_json(&e));
            out.fail(Code::Hypothesis, format!("counting bound unavailable: {e}"));
            false
        }
    };
    let mut jumps = Vec::new();
    for (i, label) in gen.labels.iter().enumerate() {
        let c = cm.constants(i)?;
        let aux = cm.aux_bounds(i)?;
        jumps.push(json!({
            "label": label,
            "counted": i == g.counted,
            "intensity": c.m,
            "b": c.b,
            "alpha": c.alpha,
            "b_upper": aux.b_upper,
            "alpha_upper": aux.alpha_upper,
        }));
        if gap_ok {
            let (k, _) = cm.bound_constants(i, &rho)?;
            out.constants.extend(constants_of(
                &format!("counting {label}"),
                Flavor::Counting,
                &k,
                false,
            ));
        }
    }
    out.set("jumps", jumps);
    Ok(())
}

fn classical(
    s: &Session,
    c: &ClassicalModel,
    args: &AnalyzeArgs,
    out: &mut Findings,
) -> CliResult<()> {
    let _ = s;
    let chain = &c.chain;
    out.set("irreducible", chain.is_irreducible());
    let sigma = match stationary_distribution(chain) {
        Ok(x) => x,
        Err(e) => {
            out.set("stationary", error_json(&e));
            out.fail(Code::Hypothesis, e.to_string());
            return Ok(());
        }
    };
    out.set("stationary", &sigma);
    let nu = classical_nu(args.model.rho0.as_deref(), c.initial.as_deref(), &sigma)?;
    out.set("observation", flux_stats(chain, &sigma, &c.f)?);
    let b = flux_bernstein(chain, &nu, &c.f, 1.0, 1)?;
    out.set(
        "multiplicative_symmetrization",
        json!({
            "irreducible": b.constants.epsilon.is_some(),
            "epsilon": b.constants.epsilon,
        }),
    );
    if b.constants.epsilon.is_none() {
        out.warnings
            .push("P†P is reducible: flux Bernstein bound unavailable".into());
    }
    out.constants.extend(constants_of(
        "flux-bernstein",
        Flavor::FluxBernstein,
        &b.constants,
        false,
    ));
    out.set("resolvent", resolvent_norm_classical(chain, &sigma)?);
    let h = flux_hoeffding(chain, &c.f, 1.0, 1)?;
    out.constants.extend(constants_of(
        "flux-hoeffding",
        Flavor::FluxHoeffding,
        &h.constants,
        false,
    ));
    match doubled_chain(chain) {
        Ok((d, law)) => out.set(
            "doubled_chain",
            json!({
                "states": d.states,
                "irreducible": d.is_irreducible(),
                "stationary": law,
            }),
        ),
        Err(e) => out.set("doubled_chain", error_json(e)),
    }
    Ok(())
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<KeyValue>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::String(s) => out.push(KeyValue {
            key: prefix.into(),
            value: s.clone(),
        }),
        other => out.push(KeyValue {
            key: prefix.into(),
            value: other.to_string(),
        }),
    }
}

pub fn run(args: &AnalyzeArgs) -> CliResult<()> {
    let s = Session::open(&args.model)?;
    let mut out = Findings::default();
    match &s.model.kind {
        ModelKind::Kraus(k) => kraus(&s, k, args, &mut out)?,
        ModelKind::Gkls(g) => gkls(&s, g, args, &mut out)?,
        ModelKind::Classical(c) => classical(&s, c, args, &mut out)?,
    }
    let extra = json!({ "seed": args.seed });
    let mut report: Report<KeyValue> =
        Report::new("analyze", super::echo(&args.model, None, extra), s.info());
    report.constants = out.constants;
    report.warnings = out.warnings;
    let doc = Value::Object(out.doc);
    let format = args.model.format.unwrap_or(Format::Structured);
    if format == Format::Csv {
        flatten("", &doc, &mut report.rows);
        for c in &report.constants {
            report.rows.push(KeyValue {
                key: format!("constants.{}.{}", c.context, c.name),
                value: c.value.to_string(),
            });
        }
    } else {
        report.summary = Some(doc);
    }
    report.emit(format, args.model.output.as_deref())?;
    match out.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
