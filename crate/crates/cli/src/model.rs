//! JSON model files. Complex entries are `[re, im]` pairs; a bare number is
//! read as a real entry.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use qconc::bounds::{Step, WindowFunction};
use qconc::classical::{FluxFunction, MarkovChain};
use qconc::linalg::{cplx, CMat};
use qconc::operator::{GklsGenerator, KrausChannel, ObservationFunction};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::exit::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

type MatrixFile = Vec<Vec<Entry>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    label: String,
    matrix: MatrixFile,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ObservationFile {
    List(Vec<f64>),
    ByLabel(BTreeMap<String, f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepFile {
    kraus: Vec<OperatorFile>,
    observation: ObservationFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowFile {
    m: usize,
    /// All `|I|^m` values, first outcome most significant.
    values: Option<Vec<f64>>,
    /// Sparse form: comma-joined labels to value, zero elsewhere.
    entries: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemberFile {
    value: f64,
    kraus: Vec<OperatorFile>,
    observation: Option<ObservationFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    parameter: String,
    members: Vec<MemberFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KrausFile {
    #[allow(dead_code)]
    kind: String,
    name: Option<String>,
    #[allow(dead_code)]
    description: Option<String>,
    dim: usize,
    kraus: Vec<OperatorFile>,
    observation: ObservationFile,
    rho0: Option<MatrixFile>,
    schedule: Option<Vec<StepFile>>,
    window: Option<WindowFile>,
    family: Option<FamilyFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GklsFile {
    #[allow(dead_code)]
    kind: String,
    name: Option<String>,
    #[allow(dead_code)]
    description: Option<String>,
    dim: usize,
    hamiltonian: MatrixFile,
    jumps: Vec<OperatorFile>,
    counted: Option<String>,
    rho0: Option<MatrixFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FluxEntry {
    from: String,
    to: String,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassicalFile {
    #[allow(dead_code)]
    kind: String,
    name: Option<String>,
    #[allow(dead_code)]
    description: Option<String>,
    states: Vec<String>,
    transition: Vec<Vec<f64>>,
    flux: Vec<FluxEntry>,
    initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Family {
    pub parameter: String,
    pub members: Vec<Member>,
}

#[derive(Debug, Clone)]
pub struct Member {
    pub value: f64,
    pub channel: KrausChannel,
    pub f: ObservationFunction,
}

#[derive(Debug, Clone)]
pub struct KrausModel {
    pub channel: KrausChannel,
    pub f: ObservationFunction,
    pub rho0: Option<CMat>,
    pub schedule: Option<Vec<Step>>,
    pub window: Option<WindowFunction>,
    pub family: Option<Family>,
}

#[derive(Debug, Clone)]
pub struct GklsModel {
    pub generator: GklsGenerator,
    pub counted: usize,
    pub rho0: Option<CMat>,
}

#[derive(Debug, Clone)]
pub struct ClassicalModel {
    pub chain: MarkovChain,
    pub f: FluxFunction,
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    Kraus(KrausModel),
    Gkls(GklsModel),
    Classical(ClassicalModel),
}

#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub kind: ModelKind,
}

impl Model {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ModelKind::Kraus(_) => "kraus",
            ModelKind::Gkls(_) => "gkls",
            ModelKind::Classical(_) => "classical",
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ModelKind::Kraus(m) => m.channel.dim,
            ModelKind::Gkls(m) => m.generator.dim,
            ModelKind::Classical(m) => m.chain.len(),
        }
    }
}

fn typed<T: DeserializeOwned>(text: &str, path: &Path) -> CliResult<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        CliError::parse(format!(
            "{}: field `{}`: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })
}

fn field_error(path: &Path, field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::parse(format!("{}: field `{field}`: {msg}", path.display()))
}

fn matrix(m: &MatrixFile, dim: usize, path: &Path, field: &str) -> CliResult<CMat> {
    if m.len() != dim {
        return Err(field_error(
            path,
            field,
            format!("expected {dim} rows, found {}", m.len()),
        ));
    }
    for (r, row) in m.iter().enumerate() {
        if row.len() != dim {
            return Err(field_error(
                path,
                &format!("{field}[{r}]"),
                format!("expected {dim} entries, found {}", row.len()),
            ));
        }
    }
    let out = CMat::from_fn(dim, dim, |r, c| match m[r][c] {
        Entry::Real(x) => cplx(x, 0.0),
        Entry::Complex([re, im]) => cplx(re, im),
    });
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(field_error(path, field, "non-finite entry"));
    }
    Ok(out)
}

fn operators(
    ops: &[OperatorFile],
    dim: usize,
    path: &Path,
    field: &str,
) -> CliResult<(Vec<CMat>, Vec<String>)> {
    let mut mats = Vec::with_capacity(ops.len());
    let mut labels = Vec::with_capacity(ops.len());
    for (k, op) in ops.iter().enumerate() {
        mats.push(matrix(
            &op.matrix,
            dim,
            path,
            &format!("{field}[{k}].matrix"),
        )?);
        labels.push(op.label.clone());
    }
    Ok((mats, labels))
}

fn channel(ops: &[OperatorFile], dim: usize, path: &Path, field: &str) -> CliResult<KrausChannel> {
    let (mats, labels) = operators(ops, dim, path, field)?;
    KrausChannel::new(mats, labels).map_err(|e| field_error(path, field, e))
}

fn observation(
    obs: &ObservationFile,
    channel: &KrausChannel,
    path: &Path,
    field: &str,
) -> CliResult<ObservationFunction> {
    let values = match obs {
        ObservationFile::List(v) => v.clone(),
        ObservationFile::ByLabel(map) => {
            for key in map.keys() {
                if channel.label_index(key).is_none() {
                    return Err(field_error(
                        path,
                        field,
                        format!("unknown outcome label `{key}`"),
                    ));
                }
            }
            channel
                .labels
                .iter()
                .map(|l| map.get(l).copied().unwrap_or(0.0))
                .collect()
        }
    };
    let f = ObservationFunction::new(values).map_err(|e| field_error(path, field, e))?;
    f.check_len(channel.len())
        .map_err(|e| field_error(path, field, e))?;
    Ok(f)
}

fn window(w: &WindowFile, channel: &KrausChannel, path: &Path) -> CliResult<WindowFunction> {
    let k = channel.len();
    let values = match (&w.values, &w.entries) {
        (Some(v), None) => v.clone(),
        (None, Some(entries)) => {
            let total = k
                .checked_pow(w.m as u32)
                .ok_or_else(|| field_error(path, "window.m", "window too long"))?;
            let mut v = vec![0.0; total];
            for (key, value) in entries {
                let mut idx = Vec::new();
                for label in key.split(',') {
                    let i = channel.label_index(label.trim()).ok_or_else(|| {
                        field_error(
                            path,
                            "window.entries",
                            format!("unknown outcome label `{label}`"),
                        )
                    })?;
                    idx.push(i);
                }
                if idx.len() != w.m {
                    return Err(field_error(
                        path,
                        "window.entries",
                        format!("`{key}` does not have {} labels", w.m),
                    ));
                }
                v[idx.iter().fold(0, |a, i| a * k + i)] = *value;
            }
            v
        }
        _ => {
            return Err(field_error(
                path,
                "window",
                "give exactly one of `values` and `entries`",
            ))
        }
    };
    WindowFunction::new(w.m, k, values).map_err(|e| field_error(path, "window", e))
}

fn load_kraus(text: &str, path: &Path) -> CliResult<Model> {
    let file: KrausFile = typed(text, path)?;
    let ch = channel(&file.kraus, file.dim, path, "kraus")?;
    let f = observation(&file.observation, &ch, path, "observation")?;
    let rho0 = file
        .rho0
        .as_ref()
        .map(|m| matrix(m, file.dim, path, "rho0"))
        .transpose()?;
    let schedule = match &file.schedule {
        None => None,
        Some(steps) => {
            let mut out = Vec::with_capacity(steps.len());
            for (k, s) in steps.iter().enumerate() {
                let field = format!("schedule[{k}]");
                let unravelling = channel(&s.kraus, file.dim, path, &format!("{field}.kraus"))?;
                let f = observation(
                    &s.observation,
                    &unravelling,
                    path,
                    &format!("{field}.observation"),
                )?;
                out.push(Step { unravelling, f });
            }
            Some(out)
        }
    };
    let window = file
        .window
        .as_ref()
        .map(|w| window(w, &ch, path))
        .transpose()?;
    let family = match &file.family {
        None => None,
        Some(fam) => {
            let mut members = Vec::with_capacity(fam.members.len());
            for (k, m) in fam.members.iter().enumerate() {
                let field = format!("family.members[{k}]");
                let c = channel(&m.kraus, file.dim, path, &format!("{field}.kraus"))?;
                let f = match &m.observation {
                    Some(o) => observation(o, &c, path, &format!("{field}.observation"))?,
                    None => {
                        if c.len() != ch.len() {
                            return Err(field_error(
                                path,
                                &field,
                                "outcome count differs; give an observation",
                            ));
                        }
                        f.clone()
                    }
                };
                members.push(Member {
                    value: m.value,
                    channel: c,
                    f,
                });
            }
            Some(Family {
                parameter: fam.parameter.clone(),
                members,
            })
        }
    };
    Ok(Model {
        name: file.name.unwrap_or_else(|| stem(path)),
        kind: ModelKind::Kraus(KrausModel {
            channel: ch,
            f,
            rho0,
            schedule,
            window,
            family,
        }),
    })
}

fn load_gkls(text: &str, path: &Path) -> CliResult<Model> {
    let file: GklsFile = typed(text, path)?;
    let h = matrix(&file.hamiltonian, file.dim, path, "hamiltonian")?;
    let (jumps, labels) = operators(&file.jumps, file.dim, path, "jumps")?;
    let generator =
        GklsGenerator::new(h, jumps, labels).map_err(|e| field_error(path, "jumps", e))?;
    let counted = match &file.counted {
        None => 0,
        Some(l) => generator
            .label_index(l)
            .ok_or_else(|| field_error(path, "counted", format!("unknown jump label `{l}`")))?,
    };
    let rho0 = file
        .rho0
        .as_ref()
        .map(|m| matrix(m, file.dim, path, "rho0"))
        .transpose()?;
    Ok(Model {
        name: file.name.unwrap_or_else(|| stem(path)),
        kind: ModelKind::Gkls(GklsModel {
            generator,
            counted,
            rho0,
        }),
    })
}

fn load_classical(text: &str, path: &Path) -> CliResult<Model> {
    let file: ClassicalFile = typed(text, path)?;
    let n = file.states.len();
    if file.transition.len() != n {
        return Err(field_error(
            path,
            "transition",
            format!("expected {n} rows"),
        ));
    }
    for (r, row) in file.transition.iter().enumerate() {
        if row.len() != n {
            return Err(field_error(
                path,
                &format!("transition[{r}]"),
                format!("expected {n} entries"),
            ));
        }
    }
    let p = DMatrix::from_fn(n, n, |x, y| file.transition[x][y]);
    let chain =
        MarkovChain::new(file.states.clone(), p).map_err(|e| field_error(path, "transition", e))?;
    let state = |s: &str, k: usize, which: &str| {
        chain.states.iter().position(|x| x == s).ok_or_else(|| {
            field_error(
                path,
                &format!("flux[{k}].{which}"),
                format!("unknown state `{s}`"),
            )
        })
    };
    let mut table = BTreeMap::new();
    for (k, e) in file.flux.iter().enumerate() {
        let (x, y) = (state(&e.from, k, "from")?, state(&e.to, k, "to")?);
        if chain.p[(x, y)] <= 0.0 {
            return Err(field_error(
                path,
                &format!("flux[{k}]"),
                format!("`{}` -> `{}` has zero probability", e.from, e.to),
            ));
        }
        table.insert((x, y), e.value);
    }
    let f = FluxFunction::from_fn(&chain, |x, y| table.get(&(x, y)).copied().unwrap_or(0.0))
        .map_err(|e| field_error(path, "flux", e))?;
    if let Some(init) = &file.initial {
        if init.len() != n {
            return Err(field_error(
                path,
                "initial",
                format!("expected {n} entries"),
            ));
        }
    }
    Ok(Model {
        name: file.name.unwrap_or_else(|| stem(path)),
        kind: ModelKind::Classical(ClassicalModel {
            chain,
            f,
            initial: file.initial,
        }),
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

pub fn load(path: &Path) -> CliResult<Model> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    #[derive(Deserialize)]
    struct Kind {
        kind: String,
    }
    let kind: Kind = typed(&text, path)?;
    match kind.kind.as_str() {
        "kraus" => load_kraus(&text, path),
        "gkls" => load_gkls(&text, path),
        "classical" => load_classical(&text, path),
        other => Err(field_error(
            path,
            "kind",
            format!("unknown kind `{other}` (expected kraus, gkls or classical)"),
        )),
    }
}

/// A density matrix file: a JSON matrix of `[re, im]` entries.
pub fn load_state(path: &Path, dim: usize) -> CliResult<CMat> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let m: MatrixFile = typed(&text, path)?;
    matrix(&m, dim, path, "")
}

/// A probability vector file for classical chains.
pub fn load_distribution(path: &Path, len: usize) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let v: Vec<f64> = typed(&text, path)?;
    if v.len() != len {
        return Err(CliError::parse(format!(
            "{}: expected {len} entries",
            path.display()
        )));
    }
    Ok(v)
}
