use rand::Rng;

use super::{stream_rng, TrajectoryRecord};
use crate::bounds::WindowFunction;
use crate::error::{Error, Result};
use crate::linalg::{real, CMat};
use crate::operator::KrausChannel;

/// Outcome probabilities below this are treated as zero.
const PROBABILITY_FLOOR: f64 = 1e-15;

/// Quantum filter for a channel: samples an outcome and updates the
/// conditional state.
#[derive(Debug, Clone)]
pub struct DiscreteSampler<'a> {
    kraus: &'a [CMat],
    state: CMat,
    probs: Vec<f64>,
    images: Vec<CMat>,
}

impl<'a> DiscreteSampler<'a> {
    pub fn new(channel: &'a KrausChannel, rho0: &CMat) -> Result<Self> {
        Self::from_kraus(&channel.kraus, rho0)
    }

    pub fn from_kraus(kraus: &'a [CMat], rho0: &CMat) -> Result<Self> {
        let d = kraus.first().map(|v| v.nrows()).unwrap_or(0);
        if rho0.nrows() != d || rho0.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rho0.nrows(),
            });
        }
        Ok(DiscreteSampler {
            kraus,
            state: rho0.clone(),
            probs: vec![0.0; kraus.len()],
            images: Vec::with_capacity(kraus.len()),
        })
    }

    pub fn state(&self) -> &CMat {
        &self.state
    }

    /// Switches to another unravelling of the same system, keeping the state.
    pub fn set_kraus(&mut self, kraus: &'a [CMat]) {
        self.kraus = kraus;
        self.probs.resize(kraus.len(), 0.0);
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        self.images.clear();
        let mut total = 0.0;
        for (k, v) in self.kraus.iter().enumerate() {
            let img = v * &self.state * v.adjoint();
            let p = img.trace().re;
            let p = if p < PROBABILITY_FLOOR { 0.0 } else { p };
            self.probs[k] = p;
            total += p;
            self.images.push(img);
        }
        if !(total > 0.0) {
            return Err(Error::FilterCollapse);
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                pick = Some(k);
                if u < acc {
                    break;
                }
            }
        }
        let k = pick.ok_or(Error::FilterCollapse)?;
        let p = self.probs[k];
        self.state = std::mem::take(&mut self.images[k]) / real(p);
        Ok(k)
    }
}

pub fn sample_discrete(
    channel: &KrausChannel,
    rho0: &CMat,
    n: usize,
    seed: u64,
) -> Result<TrajectoryRecord> {
    sample_discrete_stream(channel, rho0, n, seed, 0, false)
}

pub fn sample_discrete_stream(
    channel: &KrausChannel,
    rho0: &CMat,
    n: usize,
    seed: u64,
    stream: u64,
    record_states: bool,
) -> Result<TrajectoryRecord> {
    let mut rng = stream_rng(seed, stream);
    let mut sampler = DiscreteSampler::new(channel, rho0)?;
    let mut outcomes = Vec::with_capacity(n);
    let mut states = record_states.then(|| Vec::with_capacity(n));
    for _ in 0..n {
        outcomes.push(sampler.step(&mut rng)?);
        if let Some(s) = states.as_mut() {
            s.push(sampler.state().clone());
        }
    }
    Ok(TrajectoryRecord {
        outcomes,
        conditional_states: states,
        seed,
        stream,
    })
}

/// `f(X_k, …, X_{k+m−1})` for every full window of the record.
pub fn windowed_sums(record: &TrajectoryRecord, f: &WindowFunction) -> Result<Vec<f64>> {
    let n = record.outcomes.len();
    if n < f.m {
        return Err(Error::InvalidArgument(format!(
            "record of length {n} is shorter than the window {}",
            f.m
        )));
    }
    Ok(record.outcomes.windows(f.m).map(|w| f.eval(w)).collect())
}
