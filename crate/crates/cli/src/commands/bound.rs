use qconc::bounds::{
    bernstein_bound, confidence_lower_bound, counting_bound, multitime_hoeffding, reducible_bound,
    schedule_stats, time_dependent_bernstein, time_dependent_hoeffding, BoundResult, CountingModel,
    DiscreteModel, Flavor,
};
use qconc::classical::{flux_bernstein, flux_hoeffding, flux_stats, stationary_distribution};
use qconc::linalg::CMat;
use qconc::spectral::{decompose_invariant_subspaces, InvariantDecomposition};
use serde_json::json;

use super::{
    check_flavor, check_gammas, classical_nu, default_flavors, grid_n, grid_t, is_hypothesis,
    quantum_rho, Session,
};
use crate::cli::{BoundArgs, FlavorArg, Format, GridArgs};
use crate::exit::{CliError, CliResult, Code};
use crate::model::{GklsModel, KrausModel, ModelKind};
use crate::report::{constants_of, BoundRow, Constant, Report};

/// What a bound row is a bound on, with the centering needed to compute the
/// matching tail.
#[derive(Debug, Clone)]
pub enum Target {
    /// `f̄_n` of the model channel, centered at `mean`.
    Discrete {
        mean: f64,
    },
    /// Cyclic schedule; `center` is the average of the step means over `n`.
    Schedule {
        center: f64,
    },
    Window {
        mean: f64,
    },
    Flux {
        mean: f64,
    },
    /// Always two-sided, centered at the block mean of the settled block.
    Reducible,
    Counting {
        m: f64,
    },
    /// Coverage of `|f̄_n − mean| < γ` for family member `member`.
    Coverage {
        member: usize,
        mean: f64,
    },
    Unavailable,
}

#[derive(Debug, Clone)]
pub struct Evaluated {
    pub row: BoundRow,
    pub target: Target,
}

pub enum Initial {
    Quantum(CMat),
    Classical(Vec<f64>),
}

pub struct Evaluation {
    pub rows: Vec<Evaluated>,
    pub constants: Vec<Constant>,
    pub warnings: Vec<String>,
    pub initial: Option<Initial>,
    pub member_states: Vec<CMat>,
    pub decomposition: Option<InvariantDecomposition>,
    pub counted: usize,
    pub failed: usize,
    pub flavors: usize,
}

impl Evaluation {
    fn push_constants(&mut self, c: Vec<Constant>) {
        for c in c {
            let dup = self.constants.iter().any(|x| {
                x.context == c.context && x.name == c.name && x.value.to_bits() == c.value.to_bits()
            });
            if !dup {
                self.constants.push(c);
            }
        }
    }
}

fn row_names(f: FlavorArg) -> Vec<&'static str> {
    match f {
        FlavorArg::Flux => vec!["flux-bernstein", "flux-hoeffding"],
        FlavorArg::Reducible => vec!["reducible-bernstein", "reducible-hoeffding"],
        other => vec![other.name()],
    }
}

fn invalid_rows(f: FlavorArg, horizons: &[f64], grid: &GridArgs, reason: &str) -> Vec<Evaluated> {
    let mut out = Vec::new();
    for name in row_names(f) {
        for &h in horizons {
            for &gamma in &grid.gamma {
                out.push(Evaluated {
                    row: BoundRow {
                        flavor: name.to_owned(),
                        parameter: None,
                        horizon: h,
                        gamma,
                        bound: 1.0,
                        exponent: None,
                        prefactor: None,
                        valid: false,
                        two_sided: grid.two_sided
                            || matches!(f, FlavorArg::Reducible | FlavorArg::Ci),
                        b: None,
                        c: None,
                        epsilon: None,
                        n_rho: None,
                        g: None,
                        m: None,
                        alpha: None,
                        reason: Some(reason.to_owned()),
                    },
                    target: Target::Unavailable,
                });
            }
        }
    }
    out
}

/// Re-evaluates `ε`-dependent flavors with a user supplied gap.
fn with_epsilon(r: BoundResult, epsilon: Option<f64>) -> BoundResult {
    let Some(e) = epsilon else { return r };
    let mut k = r.constants.clone();
    k.epsilon = Some(e);
    let mut out = match r.flavor {
        Flavor::Bernstein | Flavor::TdmBernstein | Flavor::FluxBernstein => {
            bernstein_bound(&k, r.gamma, r.horizon as u64, true)
        }
        Flavor::Counting => counting_bound(&k, r.gamma, r.horizon, true),
        _ => return r,
    };
    out.flavor = r.flavor;
    out
}

struct Ctx<'a> {
    s: &'a Session,
    grid: &'a GridArgs,
    ev: Evaluation,
}

impl Ctx<'_> {
    fn finish(&mut self, f: FlavorArg, horizons: &[f64], res: CliResult<()>) -> CliResult<()> {
        match res {
            Ok(()) => Ok(()),
            Err(e) if is_hypothesis(&e) => {
                self.ev.failed += 1;
                self.ev
                    .warnings
                    .push(format!("{}: {}", f.name(), e.message));
                let rows = invalid_rows(f, horizons, self.grid, &e.message);
                self.ev.rows.extend(rows);
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    fn push(&mut self, r: BoundResult, parameter: Option<f64>, target: Target, context: String) {
        let r = with_epsilon(r, self.grid.epsilon).with_sides(self.grid.two_sided);
        let k = r.constants.clone();
        self.ev.push_constants(constants_of(
            &context,
            r.flavor,
            &k,
            self.grid.epsilon.is_some(),
        ));
        self.ev.rows.push(Evaluated {
            row: BoundRow::from_result(&r, parameter),
            target,
        });
    }
}

fn model_of(dm: &qconc::Result<DiscreteModel>) -> CliResult<&DiscreteModel> {
    dm.as_ref().map_err(|e| CliError::from(e.clone()))
}

fn kraus(
    ctx: &mut Ctx,
    k: &KrausModel,
    flavors: &[FlavorArg],
    rho_arg: Option<&str>,
) -> CliResult<()> {
    let tol = ctx.s.tol;
    let dm = DiscreteModel::new(k.channel.clone(), tol);
    let rho = quantum_rho(
        rho_arg,
        k.rho0.as_ref(),
        k.channel.dim,
        || dm.as_ref().map(|m| m.sigma.clone()).map_err(Clone::clone),
        &tol,
        &mut ctx.ev.warnings,
    )?;
    let ns = grid_n(ctx.grid)?;
    let hs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let gammas = ctx.grid.gamma.clone();
    for &f in flavors {
        let res = (|| -> CliResult<()> {
            match f {
                FlavorArg::Bernstein | FlavorArg::Hoeffding => {
                    let m = model_of(&dm)?;
                    let mean = m.stats(&k.f)?.mean;
                    for &n in &ns {
                        for &g in &gammas {
                            let r = if f == FlavorArg::Bernstein {
                                m.bernstein(&k.f, &rho, g, n)?
                            } else {
                                m.hoeffding(&k.f, g, n)?
                            };
                            ctx.push(r, None, Target::Discrete { mean }, f.name().into());
                        }
                    }
                }
                FlavorArg::TdmBernstein | FlavorArg::TdmHoeffding => {
                    let m = model_of(&dm)?;
                    let steps = k.schedule.as_deref().unwrap_or_default();
                    for &n in &ns {
                        let st = schedule_stats(m, steps, n)?;
                        let center = (0..n as usize)
                            .map(|j| st.steps[j % steps.len()].mean)
                            .sum::<f64>()
                            / n as f64;
                        for &g in &gammas {
                            let r = if f == FlavorArg::TdmBernstein {
                                time_dependent_bernstein(m, steps, &rho, g, n)?
                            } else {
                                time_dependent_hoeffding(m, steps, g, n)?
                            };
                            ctx.push(
                                r,
                                None,
                                Target::Schedule { center },
                                format!("{} n={n}", f.name()),
                            );
                        }
                    }
                }
                FlavorArg::Multitime => {
                    let m = model_of(&dm)?;
                    let w = k.window.as_ref().expect("checked by check_flavor");
                    for &n in &ns {
                        for &g in &gammas {
                            let rep = multitime_hoeffding(m, w, g, n)?;
                            let mean = rep
                                .window_law
                                .iter()
                                .zip(&w.values)
                                .map(|(p, v)| p * v)
                                .sum();
                            ctx.push(rep.bound, None, Target::Window { mean }, f.name().into());
                        }
                    }
                }
                FlavorArg::Reducible => reducible(ctx, k, &rho, &ns)?,
                FlavorArg::Ci => confidence(ctx, k, rho_arg, &ns)?,
                FlavorArg::Counting | FlavorArg::Flux => unreachable!("checked by check_flavor"),
            }
            Ok(())
        })();
        ctx.finish(f, &hs, res)?;
    }
    ctx.ev.initial = Some(Initial::Quantum(rho));
    Ok(())
}

fn reducible(ctx: &mut Ctx, k: &KrausModel, rho: &CMat, ns: &[u64]) -> CliResult<()> {
    let tol = ctx.s.tol;
    let dec = decompose_invariant_subspaces(&k.channel, &tol)?;
    if ctx.grid.epsilon.is_some() {
        ctx.ev
            .warnings
            .push("reducible: --epsilon is ignored".into());
    }
    for inner in [Flavor::Bernstein, Flavor::Hoeffding] {
        let name = format!("reducible-{}", inner.name());
        for &n in ns {
            for &g in &ctx.grid.gamma {
                let rb = reducible_bound(&dec, rho, &k.f, g, n, inner, &tol)?;
                let mut notes = Vec::new();
                for (j, b) in rb.blocks.iter().enumerate() {
                    if let Some(r) = &b.result {
                        let ctxname = format!("{name} block {j}");
                        let c = constants_of(&ctxname, r.flavor, &r.constants, false);
                        ctx.ev.push_constants(c);
                    }
                    if b.weight > 0.0 && b.result.as_ref().is_none_or(|r| !r.valid) {
                        let why = b.reason.as_deref().unwrap_or("invalid");
                        notes.push(format!("block {j} contributes its weight ({why})"));
                    }
                }
                ctx.ev.rows.push(Evaluated {
                    row: BoundRow {
                        flavor: name.clone(),
                        parameter: None,
                        horizon: n as f64,
                        gamma: g,
                        bound: rb.mixture,
                        exponent: None,
                        prefactor: None,
                        valid: true,
                        two_sided: true,
                        b: None,
                        c: None,
                        epsilon: None,
                        n_rho: None,
                        g: None,
                        m: None,
                        alpha: None,
                        reason: (!notes.is_empty()).then(|| notes.join("; ")),
                    },
                    target: Target::Reducible,
                });
            }
        }
    }
    ctx.ev.decomposition = Some(dec);
    Ok(())
}

fn confidence(ctx: &mut Ctx, k: &KrausModel, rho_arg: Option<&str>, ns: &[u64]) -> CliResult<()> {
    let tol = ctx.s.tol;
    let fam = k.family.as_ref().expect("checked by check_flavor");
    let mut states = Vec::with_capacity(fam.members.len());
    for (idx, mem) in fam.members.iter().enumerate() {
        let dm = DiscreteModel::new(mem.channel.clone(), tol)?;
        let rho = quantum_rho(
            rho_arg,
            k.rho0.as_ref(),
            mem.channel.dim,
            || Ok(dm.sigma.clone()),
            &tol,
            &mut ctx.ev.warnings,
        )?;
        let mean = dm.stats(&mem.f)?.mean;
        if (mean - mem.value).abs() > 1e-9 * mem.value.abs().max(1.0) {
            ctx.ev.warnings.push(format!(
                "ci: member {}={} has stationary mean {mean}",
                fam.parameter, mem.value
            ));
        }
        for &n in ns {
            for &g in &ctx.grid.gamma {
                let b = with_epsilon(dm.bernstein(&mem.f, &rho, g, n)?, ctx.grid.epsilon);
                let h = match dm.hoeffding(&mem.f, g, n) {
                    Ok(h) => Some(h),
                    Err(e) if CliError::from(e.clone()).code == Code::Hypothesis => None,
                    Err(e) => return Err(e.into()),
                };
                let lb = match &h {
                    Some(h) => confidence_lower_bound(n, g, &b, h)?,
                    None if b.valid => (1.0 - 2.0 * b.probability_bound).clamp(0.0, 1.0),
                    None => 0.0,
                };
                let context = format!("ci {}={}", fam.parameter, mem.value);
                let override_eps = ctx.grid.epsilon.is_some();
                ctx.ev
                    .push_constants(constants_of(&context, b.flavor, &b.constants, override_eps));
                if let Some(h) = &h {
                    ctx.ev
                        .push_constants(constants_of(&context, h.flavor, &h.constants, false));
                }
                let kb = &b.constants;
                ctx.ev.rows.push(Evaluated {
                    row: BoundRow {
                        flavor: "ci".into(),
                        parameter: Some(mem.value),
                        horizon: n as f64,
                        gamma: g,
                        bound: lb,
                        exponent: None,
                        prefactor: None,
                        valid: b.valid || h.as_ref().is_some_and(|h| h.valid),
                        two_sided: true,
                        b: kb.b,
                        c: kb.c,
                        epsilon: kb.epsilon,
                        n_rho: kb.n_rho,
                        g: h.as_ref().and_then(|h| h.constants.g),
                        m: None,
                        alpha: None,
                        reason: None,
                    },
                    target: Target::Coverage { member: idx, mean },
                });
            }
        }
        states.push(rho);
    }
    ctx.ev.member_states = states;
    Ok(())
}

fn gkls(ctx: &mut Ctx, g: &GklsModel, rho_arg: Option<&str>) -> CliResult<()> {
    let tol = ctx.s.tol;
    let i = match &ctx.grid.jump {
        Some(l) => g
            .generator
            .label_index(l)
            .ok_or_else(|| CliError::usage(format!("unknown jump label `{l}`")))?,
        None => g.counted,
    };
    ctx.ev.counted = i;
    let ts = grid_t(ctx.grid)?;
    let cm = CountingModel::new(g.generator.clone(), tol);
    let rho = quantum_rho(
        rho_arg,
        g.rho0.as_ref(),
        g.generator.dim,
        || cm.as_ref().map(|m| m.sigma.clone()).map_err(Clone::clone),
        &tol,
        &mut ctx.ev.warnings,
    )?;
    let res = (|| -> CliResult<()> {
        let cm = cm.as_ref().map_err(|e| CliError::from(e.clone()))?;
        let m = cm.intensity(i)?;
        for &t in &ts {
            for &gamma in &ctx.grid.gamma {
                let r = cm.bound(i, &rho, gamma, t)?;
                ctx.push(r, None, Target::Counting { m }, "counting".into());
            }
        }
        Ok(())
    })();
    ctx.finish(FlavorArg::Counting, &ts, res)?;
    ctx.ev.initial = Some(Initial::Quantum(rho));
    Ok(())
}

fn classical(
    ctx: &mut Ctx,
    c: &crate::model::ClassicalModel,
    rho_arg: Option<&str>,
) -> CliResult<()> {
    let ns = grid_n(ctx.grid)?;
    let hs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let res = (|| -> CliResult<()> {
        let sigma = stationary_distribution(&c.chain)?;
        let nu = classical_nu(rho_arg, c.initial.as_deref(), &sigma)?;
        let mean = flux_stats(&c.chain, &sigma, &c.f)?.mean;
        for &n in &ns {
            for &g in &ctx.grid.gamma {
                let b = flux_bernstein(&c.chain, &nu, &c.f, g, n)?;
                ctx.push(b, None, Target::Flux { mean }, "flux-bernstein".into());
                let h = flux_hoeffding(&c.chain, &c.f, g, n)?;
                ctx.push(h, None, Target::Flux { mean }, "flux-hoeffding".into());
            }
        }
        ctx.ev.initial = Some(Initial::Classical(nu));
        Ok(())
    })();
    ctx.finish(FlavorArg::Flux, &hs, res)
}

/// Evaluates every requested flavor over the grid. Hypothesis failures
/// become invalid rows; other errors abort.
pub fn evaluate(s: &Session, rho_arg: Option<&str>, grid: &GridArgs) -> CliResult<Evaluation> {
    check_gammas(grid)?;
    let flavors = default_flavors(&s.model, grid);
    for &f in &flavors {
        check_flavor(&s.model, f)?;
    }
    let mut ctx = Ctx {
        s,
        grid,
        ev: Evaluation {
            rows: Vec::new(),
            constants: Vec::new(),
            warnings: Vec::new(),
            initial: None,
            member_states: Vec::new(),
            decomposition: None,
            counted: 0,
            failed: 0,
            flavors: flavors.len(),
        },
    };
    match &s.model.kind {
        ModelKind::Kraus(k) => kraus(&mut ctx, k, &flavors, rho_arg)?,
        ModelKind::Gkls(g) => gkls(&mut ctx, g, rho_arg)?,
        ModelKind::Classical(c) => classical(&mut ctx, c, rho_arg)?,
    }
    let mut ev = ctx.ev;
    let mut names: Vec<&str> = ev.rows.iter().map(|r| r.row.flavor.as_str()).collect();
    names.dedup();
    let mut extra = Vec::new();
    for name in names {
        let mut rows = ev.rows.iter().filter(|r| r.row.flavor == name);
        if rows.all(|r| !r.row.valid)
            && ev
                .rows
                .iter()
                .any(|r| r.row.flavor == name && r.target_ok())
        {
            extra.push(format!(
                "{name}: no grid point satisfies the bound's hypotheses or regime"
            ));
        }
    }
    ev.warnings.extend(extra);
    Ok(ev)
}

impl Evaluated {
    fn target_ok(&self) -> bool {
        !matches!(self.target, Target::Unavailable)
    }
}

pub fn run(args: &BoundArgs) -> CliResult<()> {
    let s = Session::open(&args.model)?;
    s.require_valid()?;
    let ev = evaluate(&s, args.model.rho0.as_deref(), &args.grid)?;
    let mut report = Report::new(
        "bound",
        super::echo(&args.model, Some(&args.grid), json!({})),
        s.info(),
    );
    report.constants = ev.constants;
    report.warnings = ev.warnings;
    report.rows = ev.rows.into_iter().map(|e| e.row).collect();
    report.emit(
        args.model.format.unwrap_or(Format::Csv),
        args.model.output.as_deref(),
    )?;
    if ev.failed == ev.flavors {
        return Err(CliError::new(
            Code::Hypothesis,
            "no flavor could be evaluated",
        ));
    }
    Ok(())
}
