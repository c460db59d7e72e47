pub mod analyze;
pub mod bound;
pub mod sampling;
pub mod simulate;
pub mod verify;

use std::path::Path;

use qconc::linalg::{self, CMat};
use qconc::operator::{validate_channel, DensityMatrix, Tolerances};
use qconc::Error;
use serde_json::{json, Value};

use crate::cli::{FlavorArg, GridArgs, ModelArgs};
use crate::exit::{CliError, CliResult, Code};
use crate::model::{self, Model, ModelKind};
use crate::report::ModelInfo;

pub struct Session {
    pub model: Model,
    pub tol: Tolerances,
}

impl Session {
    pub fn open(args: &ModelArgs) -> CliResult<Self> {
        let tol = args.tol.tolerances();
        Ok(Session {
            model: model::load(&args.model)?,
            tol,
        })
    }

    pub fn info(&self) -> ModelInfo {
        ModelInfo {
            name: self.model.name.clone(),
            kind: self.model.kind_name(),
            dim: self.model.dim(),
        }
    }

    /// Bounds and simulations need an actual channel or generator; `analyze`
    /// reports the residuals instead.
    pub fn require_valid(&self) -> CliResult<()> {
        match &self.model.kind {
            ModelKind::Kraus(k) => {
                let v = validate_channel(&k.channel, self.tol.channel);
                if !v.pass {
                    return Err(CliError::parse(format!(
                        "kraus: Σ V*V deviates from the identity by {:e} (tolerance {:e})",
                        v.max_deviation, v.tolerance
                    )));
                }
            }
            ModelKind::Gkls(g) => {
                let v = g.generator.validate(&self.tol);
                if !v.pass {
                    return Err(CliError::parse(format!(
                        "hamiltonian: not selfadjoint (residual {:e})",
                        v.hamiltonian_residual
                    )));
                }
            }
            ModelKind::Classical(_) => {}
        }
        Ok(())
    }
}

/// Echo of the options that determine the numbers in a report.
pub fn echo(args: &ModelArgs, grid: Option<&GridArgs>, extra: Value) -> Value {
    let tol = args.tol.tolerances();
    let mut v = json!({
        "model": args.model.display().to_string(),
        "rho0": args.rho0,
        "tolerances": tol,
    });
    if let Some(g) = grid {
        let flavors: Vec<&str> = g.flavor.iter().map(|f| f.name()).collect();
        v["flavor"] = json!(flavors);
        v["n"] = json!(g.n);
        v["t"] = json!(g.t);
        v["gamma"] = json!(g.gamma);
        v["two_sided"] = json!(g.two_sided);
        v["jump"] = json!(g.jump);
        v["epsilon"] = json!(g.epsilon);
    }
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    v
}

pub fn default_flavors(model: &Model, grid: &GridArgs) -> Vec<FlavorArg> {
    if !grid.flavor.is_empty() {
        let mut out = Vec::new();
        for f in &grid.flavor {
            if !out.contains(f) {
                out.push(*f);
            }
        }
        return out;
    }
    vec![match model.kind {
        ModelKind::Kraus(_) => FlavorArg::Bernstein,
        ModelKind::Gkls(_) => FlavorArg::Counting,
        ModelKind::Classical(_) => FlavorArg::Flux,
    }]
}

pub fn check_flavor(model: &Model, f: FlavorArg) -> CliResult<()> {
    let ok = match (&model.kind, f) {
        (ModelKind::Gkls(_), FlavorArg::Counting) => true,
        (ModelKind::Classical(_), FlavorArg::Flux) => true,
        (ModelKind::Kraus(k), _) => match f {
            FlavorArg::Bernstein | FlavorArg::Hoeffding | FlavorArg::Reducible => true,
            FlavorArg::TdmBernstein | FlavorArg::TdmHoeffding => {
                if k.schedule.is_none() {
                    return Err(CliError::usage(format!(
                        "{}: the model has no `schedule`",
                        f.name()
                    )));
                }
                true
            }
            FlavorArg::Multitime => {
                if k.window.is_none() {
                    return Err(CliError::usage("multitime: the model has no `window`"));
                }
                true
            }
            FlavorArg::Ci => {
                if k.family.is_none() {
                    return Err(CliError::usage("ci: the model has no `family`"));
                }
                true
            }
            FlavorArg::Counting | FlavorArg::Flux => false,
        },
        _ => false,
    };
    if !ok {
        return Err(CliError::usage(format!(
            "flavor {} does not apply to {} models",
            f.name(),
            model.kind_name()
        )));
    }
    Ok(())
}

pub fn grid_n(grid: &GridArgs) -> CliResult<Vec<u64>> {
    if grid.n.is_empty() {
        return Err(CliError::usage("discrete-time models need --n"));
    }
    if grid.n.contains(&0) {
        return Err(CliError::usage("--n values must be at least 1"));
    }
    Ok(grid.n.clone())
}

pub fn grid_t(grid: &GridArgs) -> CliResult<Vec<f64>> {
    if grid.t.is_empty() {
        return Err(CliError::usage("counting models need --t"));
    }
    if grid.t.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(CliError::usage("--t values must be positive"));
    }
    Ok(grid.t.clone())
}

pub fn check_gammas(grid: &GridArgs) -> CliResult<()> {
    if grid.gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(CliError::usage("--gamma values must be positive"));
    }
    Ok(())
}

/// Resolves `--rho0` for quantum models. Without the flag the model's own
/// `rho0` is used, then the stationary state, then the maximally mixed state
/// when the stationary state is not unique.
pub fn quantum_rho(
    arg: Option<&str>,
    model_rho0: Option<&CMat>,
    dim: usize,
    stationary: impl FnOnce() -> qconc::Result<CMat>,
    tol: &Tolerances,
    warnings: &mut Vec<String>,
) -> CliResult<CMat> {
    let checked = |m: CMat, what: &str| {
        DensityMatrix::new(m, tol)
            .map(DensityMatrix::into_matrix)
            .map_err(|e| CliError::parse(format!("{what}: {e}")))
    };
    match arg {
        Some("stationary") => Ok(stationary()?),
        Some("maximally-mixed") => Ok(DensityMatrix::maximally_mixed(dim).into_matrix()),
        Some(path) => checked(model::load_state(Path::new(path), dim)?, path),
        None => match model_rho0 {
            Some(m) => checked(m.clone(), "rho0"),
            None => match stationary() {
                Ok(s) => Ok(s),
                Err(Error::NonUniqueFixedPoint(_)) | Err(Error::Reducible) => {
                    warnings.push(
                        "no unique stationary state; starting from the maximally mixed state"
                            .into(),
                    );
                    Ok(linalg::identity(dim) * linalg::real(1.0 / dim as f64))
                }
                Err(e) => Err(e.into()),
            },
        },
    }
}

/// Resolves `--rho0` for classical chains: `stationary`, `uniform`
/// (alias `maximally-mixed`) or a JSON vector file.
pub fn classical_nu(
    arg: Option<&str>,
    initial: Option<&[f64]>,
    sigma: &[f64],
) -> CliResult<Vec<f64>> {
    let n = sigma.len();
    let nu = match arg {
        Some("stationary") => sigma.to_vec(),
        Some("uniform") | Some("maximally-mixed") => vec![1.0 / n as f64; n],
        Some(path) => model::load_distribution(Path::new(path), n)?,
        None => initial.map_or_else(|| sigma.to_vec(), <[f64]>::to_vec),
    };
    let total: f64 = nu.iter().sum();
    if nu.iter().any(|v| !v.is_finite() || *v < 0.0) || (total - 1.0).abs() > 1e-10 {
        return Err(CliError::parse("initial law must be a probability vector"));
    }
    Ok(nu.iter().map(|v| v / total).collect())
}

pub fn is_hypothesis(e: &CliError) -> bool {
    e.code == Code::Hypothesis
}

pub fn matrix_json(m: &CMat) -> Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect();
    json!(rows)
}
