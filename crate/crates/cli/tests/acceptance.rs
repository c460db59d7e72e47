//! Acceptance criteria 1-13. Runs without the libtest harness so that every
//! criterion prints one line; exits nonzero if any criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use qconc::bounds::{
    multitime_hoeffding, reducible_bound, schedule_stats, time_dependent_bernstein,
    time_dependent_hoeffding, CountingModel, DiscreteModel, Flavor, Step, WindowFunction,
};
use qconc::classical::{
    embed_diagonal, flux_bernstein, flux_hoeffding, flux_tail_dp, stationary_distribution,
    FluxFunction, MarkovChain,
};
use qconc::fixtures;
use qconc::linalg::{self, real, CMat};
use qconc::operator::{
    kms_positive_parts, CpMap, Kms, KrausChannel, ObservationFunction, Superoperator, Tolerances,
};
use qconc::spectral::{
    decompose_invariant_subspaces, invariant_state, poisson_solve, pseudoresolvent_norm,
    spectral_radius_deformed,
};
use qconc::trajectory::{
    counting_counts, exact_tail_dp, laplace_transform_exact, mc_reducible_tail, mc_tail_two_sided,
    mixture_law_residual, reaches, schedule_sum_distribution, stream_rng, window_sum_distribution,
    DiscreteSampler, EmpiricalTail,
};
use statrs::distribution::{DiscreteCDF, Poisson};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tol() -> Tolerances {
    Tolerances::default()
}

struct Fixture {
    name: &'static str,
    model: DiscreteModel,
    f: ObservationFunction,
}

fn fixture(name: &'static str, channel: KrausChannel, f: ObservationFunction) -> Fixture {
    Fixture {
        name,
        model: DiscreteModel::new(channel, tol()).expect("fixture has a faithful invariant state"),
        f,
    }
}

/// The two fixtures named by the criteria.
fn named_fixtures() -> Vec<Fixture> {
    vec![
        fixture("ring", fixtures::ring(), fixtures::ring_observation()),
        fixture(
            "two-unitary",
            fixtures::two_unitary_qubit(),
            fixtures::two_unitary_observation(),
        ),
    ]
}

/// A qubit channel whose `Ψ` is irreducible, so the Bernstein side is not
/// vacuous on a qubit.
fn random_qubit_fixture() -> Fixture {
    fixture(
        "random-qubit",
        fixtures::random_qubit(),
        fixtures::random_qubit_observation(),
    )
}

fn gamma_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// Initial states: the invariant state and a fixed random faithful state.
fn initial_states(model: &DiscreteModel) -> Vec<CMat> {
    vec![model.sigma.clone(), fixtures::random_state(model.dim(), 99)]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut vacuous = 0;
    let mut worst = f64::INFINITY;
    let mut fixtures = named_fixtures();
    fixtures.push(random_qubit_fixture());
    for fx in &fixtures {
        let mean = fx.model.stats(&fx.f).map_err(|e| e.to_string())?.mean;
        for rho in initial_states(&fx.model) {
            for n in 4..=16u64 {
                for &g in &gamma_grid() {
                    let b = fx
                        .model
                        .bernstein(&fx.f, &rho, g, n)
                        .map_err(|e| e.to_string())?;
                    let exact = exact_tail_dp(&fx.model.channel, &rho, &fx.f, n, mean + g)
                        .map_err(|e| e.to_string())?;
                    if !b.valid {
                        vacuous += 1;
                    }
                    worst = worst.min(b.probability_bound - exact);
                    if b.probability_bound < exact - 1e-12 {
                        return Err(format!(
                            "{}: n={n} γ={g}: bound {:e} < exact {:e}",
                            fx.name, b.probability_bound, exact
                        ));
                    }
                    checked += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        secs < 30.0,
        format!(
            "{checked} grid points, min slack {worst:.3e}, {vacuous} with vacuous bound 1 (two-unitary Ψ is reducible), {secs:.2}s"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    for fx in named_fixtures()
        .iter()
        .chain([random_qubit_fixture()].iter())
    {
        let stats = fx.model.stats(&fx.f).map_err(|e| e.to_string())?;
        let g_const = fx
            .model
            .hoeffding_constants(&fx.f)
            .map_err(|e| e.to_string())?
            .g
            .unwrap();
        for rho in initial_states(&fx.model) {
            for n in 4..=16u64 {
                for &g in &gamma_grid() {
                    if (n as f64) * g < 2.0 * g_const {
                        continue;
                    }
                    let h = fx.model.hoeffding(&fx.f, g, n).map_err(|e| e.to_string())?;
                    if !h.valid {
                        return Err(format!(
                            "{}: n={n} γ={g} in regime but flagged invalid",
                            fx.name
                        ));
                    }
                    let exact = exact_tail_dp(&fx.model.channel, &rho, &fx.f, n, stats.mean + g)
                        .map_err(|e| e.to_string())?;
                    worst = worst.min(h.probability_bound - exact);
                    if h.probability_bound < exact - 1e-12 {
                        return Err(format!(
                            "{}: n={n} γ={g}: bound {:e} < exact {:e}",
                            fx.name, h.probability_bound, exact
                        ));
                    }
                    checked += 1;
                }
            }
        }
        // one step: a deviation of 2c or more is impossible
        for g in [2.0 * stats.c, 2.0 * stats.c + 0.5] {
            let exact = exact_tail_dp(&fx.model.channel, &fx.model.sigma, &fx.f, 1, stats.mean + g)
                .map_err(|e| e.to_string())?;
            if exact != 0.0 {
                return Err(format!(
                    "{}: n=1 γ={g}: exact tail {exact:e} is not 0",
                    fx.name
                ));
            }
        }
    }
    check(
        checked > 0,
        format!("{checked} in-regime grid points, min slack {worst:.3e}; n=1 tails are 0"),
    )
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for fx in named_fixtures() {
        for n in 1..=8u64 {
            for u in [0.0, 0.05, 0.1, 0.2] {
                let l = laplace_transform_exact(&fx.model.channel, &fx.model.sigma, &fx.f, n, u)
                    .map_err(|e| e.to_string())?;
                worst = worst.max((l.via_powers - l.via_dp).abs());
            }
        }
    }
    check(
        worst < 1e-10,
        format!("max |Φ_uⁿ route − DP route| = {worst:.3e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut notes = Vec::new();
    for fx in named_fixtures().into_iter().chain([random_qubit_fixture()]) {
        let stats = fx.model.stats(&fx.f).map_err(|e| e.to_string())?;
        let gap = match fx.model.gap() {
            Ok(g) => g.gap.epsilon,
            Err(_) => {
                notes.push(format!("{} skipped (ε = 0)", fx.name));
                continue;
            }
        };
        let top = 0.99 * gap / (10.0 * stats.c);
        for k in 0..50 {
            let u = top * k as f64 / 49.0;
            let r = spectral_radius_deformed(&fx.model.channel, &stats.centered, u, &fx.model.kms)
                .map_err(|e| e.to_string())?;
            let rhs =
                (6.0 * stats.b * stats.b * u * u / gap / (1.0 - 10.0 * stats.c * u / gap)).exp();
            worst = worst.min(rhs - r);
        }
    }
    check(
        worst >= -1e-10,
        format!("min slack {worst:.3e}; {}", notes.join(", ")),
    )
}

fn criterion_5() -> Outcome {
    let t = tol();
    let mut worst = 0.0f64;
    for k in 0..200u64 {
        let d = 2 + (k % 3) as usize;
        let kms =
            Kms::new(&fixtures::random_state(d, 10_000 + k), &t).map_err(|e| e.to_string())?;
        let a_kraus = fixtures::random_cp_kraus(d, 1 + (k % 3) as usize, 20_000 + k);
        let a = Superoperator::heisenberg_kraus(&a_kraus);
        let b = Superoperator::heisenberg_kraus(&fixtures::random_cp_kraus(d, 2, 30_000 + k));

        let x = fixtures::random_matrix(d, 40_000 + k);
        let y = fixtures::random_matrix(d, 50_000 + k);
        let adj = kms.adjoint(&a);
        worst = worst.max((kms.inner(&x, &a.apply(&y)) - kms.inner(&adj.apply(&x), &y)).norm());
        worst = worst.max(linalg::max_abs(&(kms.adjoint(&adj).matrix - &a.matrix)));
        let via_kraus = Superoperator::heisenberg_kraus(
            &kms.adjoint_kraus(&CpMap::new(a_kraus).map_err(|e| e.to_string())?)
                .kraus,
        );
        worst = worst.max(linalg::max_abs(&(via_kraus.matrix - &adj.matrix)));

        let diff = kms.superop_norm(&Superoperator::from_matrix(d, &a.matrix - &b.matrix));
        let sum = kms.superop_norm(&Superoperator::from_matrix(d, &a.matrix + &b.matrix));
        worst = worst.max(diff - sum);

        let h = linalg::hermitian_part(&fixtures::random_matrix(d, 60_000 + k));
        let (p, m) = kms_positive_parts(&h, &kms, &t).map_err(|e| e.to_string())?;
        worst = worst.max(linalg::max_abs(&(&p - &m - &h)));
        worst = worst.max(kms.inner(&p, &m).norm());
        worst = worst
            .max(-linalg::eigvalsh(&p)[0])
            .max(-linalg::eigvalsh(&m)[0]);
    }
    check(
        worst < 1e-10,
        format!("200 pairs, max residual {worst:.3e}"),
    )
}

fn criterion_6() -> Outcome {
    let t = tol();
    let (mut residual, mut centering, mut ratio) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let d = 2 + (seed % 3) as usize;
        let k = 2 + (seed % 3) as usize;
        let ch = fixtures::random_channel(d, k, 900 + seed);
        let sigma = invariant_state(&ch, &t)
            .map_err(|e| e.to_string())?
            .into_matrix();
        let mut f = linalg::zeros(d);
        for (i, v) in ch.kraus.iter().enumerate() {
            f += v.adjoint() * v * real((i as f64 * 1.3 + seed as f64).cos());
        }
        let f = &f - linalg::identity(d) * (&sigma * &f).trace();
        let a = poisson_solve(&ch, &f, &sigma, &t).map_err(|e| e.to_string())?;
        residual = residual.max(linalg::max_abs(&(&a - ch.heisenberg(&a) - &f)));
        centering = centering.max((&sigma * &a).trace().norm());
        let norm = pseudoresolvent_norm(&ch, &sigma, seed, &t).map_err(|e| e.to_string())?;
        // G/c = 1 + certified upper bound
        ratio = ratio.max(
            linalg::uniform_norm(&a) / ((1.0 + norm.certified_upper) * linalg::uniform_norm(&f)),
        );
    }
    check(
        residual < 1e-11 && centering < 1e-11 && ratio <= 1.0,
        format!(
            "residual {residual:.2e}, |tr(σA_f)| {centering:.2e}, max ‖A_f‖/(G/c·‖F‖) {ratio:.3}"
        ),
    )
}

/// Empirical tail of `N(t)/t − m ≥ γ` from sampled counts.
fn count_tail(counts: &[u64], t: f64, level: f64) -> EmpiricalTail {
    let hits = counts
        .iter()
        .filter(|&&c| reaches(c as f64, t, level))
        .count() as u64;
    EmpiricalTail::from_counts(hits, counts.len() as u64)
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let trials = 10_000;
    let cm =
        CountingModel::new(fixtures::driven_qubit(1.0, 0.5), tol()).map_err(|e| e.to_string())?;
    let excited = cm.sigma[(1, 1)].re;
    let m = cm.intensity(0).map_err(|e| e.to_string())?;
    if (excited - 4.0 / 9.0).abs() > 1e-9 || (m - 2.0 / 9.0).abs() > 1e-9 {
        return Err(format!(
            "steady excited population {excited}, intensity {m}"
        ));
    }
    let rho = cm.sigma.clone();
    let mut z_at_200 = 0.0;
    let mut min_margin = f64::INFINITY;
    for (k, t) in [50.0, 100.0, 200.0].into_iter().enumerate() {
        let counts = counting_counts(&cm.generator, 0, &rho, t, trials, 700 + k as u64)
            .map_err(|e| e.to_string())?;
        if t == 200.0 {
            let rates: Vec<f64> = counts.iter().map(|&c| c as f64 / t).collect();
            let mean = rates.iter().sum::<f64>() / trials as f64;
            let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
            z_at_200 = (mean - m) / (var / trials as f64).sqrt();
        }
        for g in [0.05, 0.1, 0.2] {
            let b = cm.bound(0, &rho, g, t).map_err(|e| e.to_string())?;
            let mc = count_tail(&counts, t, m + g);
            min_margin = min_margin.min(b.probability_bound - mc.ci_high);
            if b.probability_bound < mc.ci_high {
                return Err(format!(
                    "t={t} γ={g}: bound {:e} < MC upper {:e}",
                    b.probability_bound, mc.ci_high
                ));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        z_at_200.abs() <= 3.0 && secs < 300.0,
        format!("m = 2/9 confirmed (z = {z_at_200:.2} at t = 200), min bound − ci_high {min_margin:.3e}, {secs:.1}s"),
    )
}

fn criterion_8() -> Outcome {
    let trials = 10_000;
    let cm = CountingModel::new(fixtures::poisson_pair(1.0), tol()).map_err(|e| e.to_string())?;
    let m = cm.intensity(0).map_err(|e| e.to_string())?;
    let rho = linalg::identity(2) * real(0.5);
    let mut worst_z = 0.0f64;
    let mut min_slack = f64::INFINITY;
    for (k, t) in [20.0, 50.0, 100.0].into_iter().enumerate() {
        let counts = counting_counts(&cm.generator, 0, &rho, t, trials, 800 + k as u64)
            .map_err(|e| e.to_string())?;
        let law = Poisson::new(m * t).map_err(|e| e.to_string())?;
        for g in [0.05, 0.1, 0.2] {
            // smallest count whose rate reaches m + γ
            let kmin = (0..).find(|&c| reaches(c as f64, t, m + g)).unwrap();
            let exact = if kmin == 0 { 1.0 } else { law.sf(kmin - 1) };
            let mc = count_tail(&counts, t, m + g);
            let se = (exact * (1.0 - exact) / trials as f64)
                .sqrt()
                .max(1.0 / trials as f64);
            worst_z = worst_z.max((mc.estimate - exact).abs() / se);
            let b = cm.bound(0, &rho, g, t).map_err(|e| e.to_string())?;
            min_slack = min_slack.min(b.probability_bound - exact);
            if b.probability_bound < exact {
                return Err(format!(
                    "t={t} γ={g}: bound {:e} < Poisson tail {exact:e}",
                    b.probability_bound
                ));
            }
        }
    }
    check(
        worst_z <= 3.0 && (m - 0.5).abs() < 1e-12,
        format!("rate {m}, max |MC − Poisson|/se {worst_z:.2}, min bound − exact {min_slack:.3e}"),
    )
}

fn criterion_9() -> Outcome {
    let chain = MarkovChain::from_rows(&[&[0.7, 0.3], &[0.4, 0.6]]).map_err(|e| e.to_string())?;
    let sigma = stationary_distribution(&chain).map_err(|e| e.to_string())?;
    if (sigma[0] - 4.0 / 7.0).abs() > 1e-12 || (sigma[1] - 3.0 / 7.0).abs() > 1e-12 {
        return Err(format!("stationary law {sigma:?}"));
    }
    let f = FluxFunction::from_fn(&chain, |x, y| if (x, y) == (0, 1) { 1.0 } else { 0.0 })
        .map_err(|e| e.to_string())?;
    let (emb, emb_f) = embed_diagonal(&chain, &f).map_err(|e| e.to_string())?;
    let mean = sigma[0] * 0.3;
    let mut checked = 0;
    let mut embed_gap = 0.0f64;
    for nu in [sigma.clone(), vec![1.0, 0.0]] {
        for n in 4..=16u64 {
            for &g in &gamma_grid() {
                let exact =
                    flux_tail_dp(&chain, &nu, &f, n, mean + g).map_err(|e| e.to_string())?;
                let embedded = exact_tail_dp(&emb, &linalg::diag_real(&nu), &emb_f, n, mean + g)
                    .map_err(|e| e.to_string())?;
                embed_gap = embed_gap.max((exact - embedded).abs());
                let b = flux_bernstein(&chain, &nu, &f, g, n).map_err(|e| e.to_string())?;
                let h = flux_hoeffding(&chain, &f, g, n).map_err(|e| e.to_string())?;
                for r in [&b, &h] {
                    if r.valid && r.probability_bound < exact - 1e-12 {
                        return Err(format!(
                            "{:?} n={n} γ={g}: {:e} < {exact:e}",
                            r.flavor, r.probability_bound
                        ));
                    }
                }
                checked += 1;
            }
        }
    }
    check(
        embed_gap < 1e-11,
        format!(
            "{checked} grid points dominated; diagonal embedding max difference {embed_gap:.2e}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let t = tol();
    let ch = fixtures::two_block_ring(0.5, 0.8);
    let f = fixtures::ring_observation();
    let rho = linalg::identity(6) * real(1.0 / 6.0);
    let dec = decompose_invariant_subspaces(&ch, &t).map_err(|e| e.to_string())?;
    let residual = mixture_law_residual(&ch, &dec, &rho, 4);
    if residual > 1e-10 {
        return Err(format!("mixture identity residual {residual:e}"));
    }
    let mut rows = 0;
    let mut tight = 0;
    for n in [100u64, 400, 1000] {
        for g in [0.1, 0.2, 0.3] {
            let mc = mc_reducible_tail(&dec, &rho, &f, n, g, 4000, 1000 + n)
                .map_err(|e| e.to_string())?;
            for flavor in [Flavor::Bernstein, Flavor::Hoeffding] {
                let b =
                    reducible_bound(&dec, &rho, &f, g, n, flavor, &t).map_err(|e| e.to_string())?;
                if b.mixture < mc.estimate || b.mixture < mc.ci_low {
                    return Err(format!(
                        "{flavor:?} n={n} γ={g}: mixture {:e} < MC {:e}",
                        b.mixture, mc.estimate
                    ));
                }
                if b.mixture >= mc.ci_high {
                    tight += 1;
                }
                rows += 1;
            }
        }
    }
    check(
        true,
        format!("{} blocks, identity residual {residual:.2e}; {rows} rows dominate MC ({tight} above ci_high)", dec.len()),
    )
}

/// Sums of `trials` sampled records, one stream each, so that every γ of a
/// horizon reuses the same trajectories.
fn sampled_sums(
    trials: u64,
    seed: u64,
    record: impl Fn(&mut rand_chacha::ChaCha8Rng) -> qconc::Result<f64>,
) -> Result<Vec<f64>, String> {
    (0..trials)
        .map(|k| record(&mut stream_rng(seed, k)).map_err(|e| e.to_string()))
        .collect()
}

fn sums_tail(sums: &[f64], n: u64, level: f64) -> EmpiricalTail {
    let hits = sums
        .iter()
        .filter(|&&s| reaches(s, n as f64, level))
        .count() as u64;
    EmpiricalTail::from_counts(hits, sums.len() as u64)
}

fn criterion_11() -> Outcome {
    let model = DiscreteModel::new(fixtures::ring(), tol()).map_err(|e| e.to_string())?;
    let rho = model.sigma.clone();
    let steps = vec![
        Step {
            unravelling: fixtures::ring(),
            f: fixtures::ring_observation(),
        },
        Step {
            unravelling: fixtures::ring_superposed(),
            f: fixtures::ring_superposed_observation(),
        },
    ];
    let pairs: Vec<_> = steps
        .iter()
        .map(|s| (s.unravelling.clone(), s.f.clone()))
        .collect();
    let mut checked = 0;

    // time-dependent measurements: exact DP on short horizons, MC on a long one
    for n in [20u64, 50, 100, 200, 1000] {
        let stats = schedule_stats(&model, &steps, n).map_err(|e| e.to_string())?;
        let center = (0..n as usize)
            .map(|k| stats.steps[k % steps.len()].mean)
            .sum::<f64>()
            / n as f64;
        let (dist, sums) = if n <= 200 {
            (
                Some(schedule_sum_distribution(&pairs, &rho, n).map_err(|e| e.to_string())?),
                Vec::new(),
            )
        } else {
            let sums = sampled_sums(4000, 1100 + n, |rng| {
                let mut s = DiscreteSampler::new(&pairs[0].0, &rho)?;
                let mut sum = 0.0;
                for k in 0..n as usize {
                    let (ch, f) = &pairs[k % pairs.len()];
                    s.set_kraus(&ch.kraus);
                    sum += f.values[s.step(rng)?];
                }
                Ok(sum)
            })?;
            (None, sums)
        };
        for g in [0.1, 0.2, 0.4, 0.6] {
            let (tail, upper) = match &dist {
                Some(d) => {
                    let t = d.tail(center + g);
                    (t, t)
                }
                None => {
                    let mc = sums_tail(&sums, n, center + g);
                    (mc.estimate, mc.ci_low)
                }
            };
            let b =
                time_dependent_bernstein(&model, &steps, &rho, g, n).map_err(|e| e.to_string())?;
            let h = time_dependent_hoeffding(&model, &steps, g, n).map_err(|e| e.to_string())?;
            for r in [&b, &h] {
                if r.valid && (r.probability_bound < tail - 1e-12 || r.probability_bound < upper) {
                    return Err(format!(
                        "{:?} n={n} γ={g}: {:e} < {tail:e}",
                        r.flavor, r.probability_bound
                    ));
                }
                checked += r.valid as usize;
            }
        }
    }

    // two-time window s(x)s(y)
    let s = fixtures::ring_observation().values;
    let w = WindowFunction::from_fn(2, 6, |x| s[x[0]] * s[x[1]]).map_err(|e| e.to_string())?;
    for n in [50u64, 100, 200, 1000] {
        let (dist, sums) = if n <= 200 {
            (
                Some(
                    window_sum_distribution(&model.channel, &rho, &w, n)
                        .map_err(|e| e.to_string())?,
                ),
                Vec::new(),
            )
        } else {
            let sums = sampled_sums(4000, 1200 + n, |rng| {
                let mut s = DiscreteSampler::new(&model.channel, &rho)?;
                let mut xs = Vec::with_capacity(n as usize + 1);
                for _ in 0..=n {
                    xs.push(s.step(rng)?);
                }
                Ok(xs.windows(2).map(|x| w.eval(x)).sum())
            })?;
            (None, sums)
        };
        for g in [0.2, 0.4, 0.6] {
            let rep = multitime_hoeffding(&model, &w, g, n).map_err(|e| e.to_string())?;
            let mean: f64 = rep
                .window_law
                .iter()
                .zip(&w.values)
                .map(|(p, v)| p * v)
                .sum();
            let (tail, floor) = match &dist {
                Some(d) => {
                    let t = d.tail(mean + g);
                    (t, t)
                }
                None => {
                    let mc = sums_tail(&sums, n, mean + g);
                    (mc.estimate, mc.ci_low)
                }
            };
            let r = &rep.bound;
            if r.valid && (r.probability_bound < tail - 1e-12 || r.probability_bound < floor) {
                return Err(format!(
                    "multitime n={n} γ={g}: {:e} < {tail:e}",
                    r.probability_bound
                ));
            }
            checked += r.valid as usize;
        }
    }
    check(
        checked > 0,
        format!("{checked} in-regime rows dominate DP/MC tails"),
    )
}

fn criterion_12() -> Outcome {
    let (n, g, trials) = (1000u64, 0.1, 2000u64);
    let f = fixtures::ring_up_indicator();
    let mut parts = Vec::new();
    for (k, theta) in [0.3, 0.5, 0.7].into_iter().enumerate() {
        let model =
            DiscreteModel::new(fixtures::ring_with(theta), tol()).map_err(|e| e.to_string())?;
        let mean = model.stats(&f).map_err(|e| e.to_string())?.mean;
        if (mean - theta).abs() > 1e-12 {
            return Err(format!("θ = {theta}: stationary mean {mean}"));
        }
        let lb = model
            .confidence(&f, &model.sigma, g, n)
            .map_err(|e| e.to_string())?;
        let miss = mc_tail_two_sided(
            &model.channel,
            &model.sigma,
            &f,
            n,
            theta,
            g,
            trials,
            1300 + k as u64,
        )
        .map_err(|e| e.to_string())?;
        let coverage = 1.0 - miss.estimate;
        if coverage < lb {
            return Err(format!(
                "θ = {theta}: coverage {coverage} < lower bound {lb}"
            ));
        }
        parts.push(format!("θ={theta}: {coverage:.4} ≥ {lb:.4}"));
    }
    check(true, parts.join(", "))
}

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn run_cli(args: &[&str], threads: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qconc"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn criterion_13() -> Outcome {
    let dir = models_dir();
    let ring = dir.join("ring.json");
    let qubit = dir.join("driven_qubit.json");
    let ring = ring.to_str().unwrap();
    let qubit = qubit.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "simulate", "--model", ring, "--n", "100,300", "--gamma", "0.1,0.2", "--trials",
            "1000", "--seed", "11",
        ],
        vec![
            "simulate",
            "--model",
            qubit,
            "--t",
            "20",
            "--gamma",
            "0.1",
            "--trials",
            "500",
            "--seed",
            "5",
            "--format",
            "structured",
        ],
        vec![
            "verify",
            "--model",
            ring,
            "--flavor",
            "bernstein,hoeffding",
            "--n",
            "14,200",
            "--gamma",
            "0.5",
            "--trials",
            "500",
            "--seed",
            "3",
        ],
    ];
    for args in &runs {
        let a = run_cli(args, "4")?;
        let b = run_cli(args, "4")?;
        let c = run_cli(args, "1")?;
        if a != b {
            return Err(format!("{} differs between identical runs", args[0]));
        }
        if a != c {
            return Err(format!(
                "{} differs between 1 and 4 worker threads",
                args[0]
            ));
        }
    }
    Ok(format!(
        "{} commands byte-identical across repeats and thread counts",
        runs.len()
    ))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 13] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
        (13, criterion_13),
    ];
    let mut failed = 0;
    for (k, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {k}: PASS [{secs:.1}s] ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {k}: FAIL [{secs:.1}s] ({detail})");
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
