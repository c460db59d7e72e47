//! Monte Carlo tails for the targets of bound rows, shared by `simulate` and
//! `verify`.

use std::cell::RefCell;
use std::collections::BTreeMap;

use qconc::classical::embed_diagonal;
use qconc::linalg::{self, CMat};
use qconc::operator::{KrausChannel, ObservationFunction};
use qconc::trajectory::{
    counting_counts, mc_probability, mc_reducible_tail, mc_tail_two_sided, reaches,
    DiscreteSampler, EmpiricalTail,
};

use super::bound::{Evaluation, Initial, Target};
use crate::exit::{CliError, CliResult};
use crate::model::{Model, ModelKind};

fn deviates(sum: f64, n: f64, center: f64, gamma: f64, two_sided: bool) -> bool {
    reaches(sum, n, center + gamma) || (two_sided && reaches(-sum, n, gamma - center))
}

pub struct Sampler<'a> {
    pub model: &'a Model,
    pub ev: &'a Evaluation,
    pub seed: u64,
    counts: RefCell<BTreeMap<u64, Vec<u64>>>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a Model, ev: &'a Evaluation, seed: u64) -> Self {
        Sampler {
            model,
            ev,
            seed,
            counts: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn rho(&self) -> CliResult<CMat> {
        match &self.ev.initial {
            Some(Initial::Quantum(r)) => Ok(r.clone()),
            Some(Initial::Classical(nu)) => Ok(linalg::diag_real(nu)),
            None => Err(CliError::usage("no initial state available")),
        }
    }

    /// The discrete channel the model's output process is sampled from;
    /// classical chains use their diagonal embedding.
    pub fn channel(&self) -> CliResult<(KrausChannel, ObservationFunction)> {
        match &self.model.kind {
            ModelKind::Kraus(k) => Ok((k.channel.clone(), k.f.clone())),
            ModelKind::Classical(c) => Ok(embed_diagonal(&c.chain, &c.f)?),
            ModelKind::Gkls(_) => Err(CliError::usage("counting models have no discrete channel")),
        }
    }

    /// Click counts at time `t`, sampled once per horizon.
    pub fn counts(&self, t: f64, trials: u64) -> CliResult<Vec<u64>> {
        if let Some(c) = self.counts.borrow().get(&t.to_bits()) {
            return Ok(c.clone());
        }
        let ModelKind::Gkls(g) = &self.model.kind else {
            return Err(CliError::usage("counting tails need a gkls model"));
        };
        let rho = self.rho()?;
        let c = counting_counts(&g.generator, self.ev.counted, &rho, t, trials, self.seed)?;
        self.counts.borrow_mut().insert(t.to_bits(), c.clone());
        Ok(c)
    }

    /// Empirical probability of the event a row bounds. For coverage targets
    /// this is the coverage frequency `P(|f̄_n − mean| < γ)`.
    pub fn tail(
        &self,
        target: &Target,
        horizon: f64,
        gamma: f64,
        two_sided: bool,
        trials: u64,
    ) -> CliResult<EmpiricalTail> {
        if trials == 0 {
            return Err(CliError::usage("--trials must be at least 1"));
        }
        let seed = self.seed;
        let n = horizon as u64;
        let nf = horizon;
        let out = match target {
            Target::Discrete { mean } | Target::Flux { mean } => {
                let (ch, f) = self.channel()?;
                let rho = self.rho()?;
                DiscreteSampler::new(&ch, &rho)?;
                mc_probability(trials, seed, |rng| {
                    let mut s = DiscreteSampler::new(&ch, &rho)?;
                    let mut sum = 0.0;
                    for _ in 0..n {
                        sum += f.values[s.step(rng)?];
                    }
                    Ok(deviates(sum, nf, *mean, gamma, two_sided))
                })?
            }
            Target::Schedule { center } => {
                let ModelKind::Kraus(k) = &self.model.kind else {
                    unreachable!()
                };
                let steps = k.schedule.as_deref().unwrap_or_default();
                let rho = self.rho()?;
                mc_probability(trials, seed, |rng| {
                    let mut s = DiscreteSampler::new(&steps[0].unravelling, &rho)?;
                    let mut sum = 0.0;
                    for j in 0..n as usize {
                        let st = &steps[j % steps.len()];
                        s.set_kraus(&st.unravelling.kraus);
                        sum += st.f.values[s.step(rng)?];
                    }
                    Ok(deviates(sum, nf, *center, gamma, two_sided))
                })?
            }
            Target::Window { mean } => {
                let ModelKind::Kraus(k) = &self.model.kind else {
                    unreachable!()
                };
                let w = k.window.as_ref().expect("window target without window");
                let rho = self.rho()?;
                let len = n as usize + w.m - 1;
                mc_probability(trials, seed, |rng| {
                    let mut s = DiscreteSampler::new(&k.channel, &rho)?;
                    let mut xs = Vec::with_capacity(len);
                    for _ in 0..len {
                        xs.push(s.step(rng)?);
                    }
                    let sum: f64 = xs.windows(w.m).map(|x| w.eval(x)).sum();
                    Ok(deviates(sum, nf, *mean, gamma, two_sided))
                })?
            }
            Target::Reducible => {
                let ModelKind::Kraus(k) = &self.model.kind else {
                    unreachable!()
                };
                let dec = self
                    .ev
                    .decomposition
                    .as_ref()
                    .expect("reducible target without decomposition");
                mc_reducible_tail(dec, &self.rho()?, &k.f, n, gamma, trials, seed)?
            }
            Target::Counting { m } => {
                let counts = self.counts(horizon, trials)?;
                let hits = counts
                    .iter()
                    .filter(|&&c| deviates(c as f64, horizon, *m, gamma, two_sided))
                    .count() as u64;
                EmpiricalTail::from_counts(hits, trials)
            }
            Target::Coverage { member, mean } => {
                let ModelKind::Kraus(k) = &self.model.kind else {
                    unreachable!()
                };
                let fam = k.family.as_ref().expect("coverage target without family");
                let mem = &fam.members[*member];
                let rho = &self.ev.member_states[*member];
                let miss =
                    mc_tail_two_sided(&mem.channel, rho, &mem.f, n, *mean, gamma, trials, seed)?;
                EmpiricalTail::from_counts(trials - miss.hits, trials)
            }
            Target::Unavailable => return Err(CliError::usage("no target to sample")),
        };
        Ok(out)
    }
}

pub fn process_name(t: &Target) -> &'static str {
    match t {
        Target::Discrete { .. } => "discrete",
        Target::Schedule { .. } => "schedule",
        Target::Window { .. } => "window",
        Target::Flux { .. } => "flux",
        Target::Reducible => "reducible",
        Target::Counting { .. } => "counting",
        Target::Coverage { .. } => "coverage",
        Target::Unavailable => "none",
    }
}

/// Center of the deviation event.
pub fn center_of(t: &Target) -> Option<f64> {
    match t {
        Target::Discrete { mean }
        | Target::Window { mean }
        | Target::Flux { mean }
        | Target::Coverage { mean, .. } => Some(*mean),
        Target::Schedule { center } => Some(*center),
        Target::Counting { m } => Some(*m),
        Target::Reducible | Target::Unavailable => None,
    }
}
