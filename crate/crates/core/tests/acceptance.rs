//! Acceptance criteria, one pass/fail line each. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use mvalse::bench::{
    generate_trial, run_monte_carlo, EstimatorPrior, FrequencySource, Preset, ScenarioConfig, Sweep, SweepVariable,
};
use mvalse::circular::{circular_moment, VonMises};
use mvalse::engine::{
    apply_flip, compute_coupling, flip_delta, ln_evidence, run, update_support, update_weights, EngineState,
    Options,
};
use mvalse::model::{CMatrix, ComponentPosterior, HyperParams, MeasurementSet, PriorConfig, WeightPosterior};
use mvalse::{partition, run_parallel, run_sequential, Executor, SequentialOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn executor() -> Executor {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    Executor::new(workers).unwrap()
}

struct RandomState {
    y: MeasurementSet,
    components: Vec<ComponentPosterior>,
    hyper: HyperParams,
}

fn random_state(rng: &mut ChaCha20Rng, n: usize, m: usize, l: usize) -> RandomState {
    let components: Vec<_> = (0..n)
        .map(|_| {
            let mu = rng.random_range(-PI..PI);
            let kappa = if rng.random_bool(0.2) { 0.0 } else { 10f64.powf(rng.random_range(-1.0..3.0)) };
            ComponentPosterior::from_prior(VonMises::new(mu, kappa).unwrap(), m)
        })
        .collect();
    let tones: Vec<f64> = (0..3).map(|_| rng.random_range(-PI..PI)).collect();
    let y = CMatrix::from_fn(m, l, |r, _| {
        tones.iter().map(|&t| Complex64::from_polar(1.0, r as f64 * t)).sum::<Complex64>()
    });
    let noise = CMatrix::from_fn(m, l, |_, _| Complex64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)));
    let hyper = HyperParams {
        nu: rng.random_range(0.05..1.0),
        lambda: rng.random_range(0.05..0.95),
        tau: rng.random_range(0.5..3.0),
    };
    RandomState {
        y: MeasurementSet::new(y + noise).unwrap(),
        components,
        hyper,
    }
}

fn random_support(rng: &mut ChaCha20Rng, n: usize) -> Vec<usize> {
    (0..n).filter(|_| rng.random_bool(0.4)).collect()
}

fn flip_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let (mut activations, mut deactivations) = (0, 0);
    for s in 0..200 {
        let n = rng.random_range(1..=12);
        let l = if s % 2 == 0 { 1 } else { 4 };
        let st = random_state(&mut rng, n, 16, l);
        let coupling = compute_coupling(&st.components, &st.y).unwrap();
        let active = random_support(&mut rng, n);
        let weights = update_weights(&coupling, &active, &st.hyper).unwrap();
        let z0 = ln_evidence(&active, &coupling, &st.hyper).unwrap();
        for k in 0..n {
            let flip = flip_delta(k, &coupling, &weights, &st.hyper);
            let mut next = active.clone();
            match next.binary_search(&k) {
                Ok(p) => {
                    next.remove(p);
                    deactivations += 1;
                }
                Err(p) => {
                    next.insert(p, k);
                    activations += 1;
                }
            }
            let oracle = ln_evidence(&next, &coupling, &st.hyper).unwrap() - z0;
            worst = worst.max((flip.delta - oracle).abs() / oracle.abs().max(1.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-8 && secs < 10.0,
        format!("max relative error {worst:.2e} over {activations} activations and {deactivations} deactivations, {secs:.2} s"),
    )
}

fn rank_one_consistency() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for s in 0..100 {
        let n = rng.random_range(2..=12);
        let l = if s % 2 == 0 { 1 } else { 4 };
        let st = random_state(&mut rng, n, 16, l);
        let coupling = compute_coupling(&st.components, &st.y).unwrap();
        let mut weights = update_weights(&coupling, &random_support(&mut rng, n), &st.hyper).unwrap();
        for _ in 0..10 {
            let k = rng.random_range(0..n);
            let flip = flip_delta(k, &coupling, &weights, &st.hyper);
            weights = apply_flip(&weights, &coupling, &st.hyper, &flip);
            let direct = update_weights(&coupling, &weights.active, &st.hyper).unwrap();
            let dc = (&weights.c_hat - &direct.c_hat).camax();
            let dw = (&weights.w_hat - &direct.w_hat).camax();
            worst = worst.max(dc).max(dw);
        }
    }
    check(worst <= 1e-8, format!("max abs deviation {worst:.2e} over 100 sequences of 10 flips"))
}

fn exhaustive_search() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let n = 8;
    let mut global = 0;
    for _ in 0..50 {
        let st = random_state(&mut rng, n, 12, 2);
        let coupling = compute_coupling(&st.components, &st.y).unwrap();
        let mut state = EngineState {
            priors: vec![VonMises::uniform(); n],
            components: st.components.clone(),
            coupling: coupling.clone(),
            weights: WeightPosterior::empty(2),
            hyper: st.hyper,
            nu_floor: 0.0,
        };
        update_support(&mut state, &Options::default());
        let support_of = |mask: usize| (0..n).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>();
        let values: Vec<f64> = (0..1usize << n)
            .map(|mask| ln_evidence(&support_of(mask), &coupling, &st.hyper).unwrap())
            .collect();
        let found: usize = state.weights.active.iter().map(|i| 1 << i).sum();
        let z = values[found];
        for k in 0..n {
            let neighbour = values[found ^ (1 << k)];
            if neighbour > z + 1e-8 * z.abs().max(1.0) {
                return Err(format!("flip of {k} improves {z} to {neighbour}"));
            }
        }
        if values.iter().all(|&v| v <= z + 1e-8 * z.abs().max(1.0)) {
            global += 1;
        }
    }
    check(true, format!("50/50 one-flip local maxima, {global}/50 also global maxima"))
}

fn moment_quadrature() -> Outcome {
    let points = 8192;
    let mut worst: f64 = 0.0;
    for &kappa in &[0.0, 0.5, 2.0, 20.0, 200.0] {
        let vm = VonMises::new(0.7, kappa).unwrap();
        let h = 2.0 * PI / points as f64;
        let weights: Vec<f64> = (0..points).map(|g| (kappa * ((g as f64 * h - PI - 0.7).cos() - 1.0)).exp()).collect();
        let norm: f64 = weights.iter().sum();
        for m in 1..=32 {
            let q: Complex64 = weights
                .iter()
                .enumerate()
                .map(|(g, w)| Complex64::from_polar(*w, m as f64 * (g as f64 * h - PI)))
                .sum::<Complex64>()
                / norm;
            worst = worst.max((circular_moment(&vm, m).unwrap() - q).norm());
        }
    }
    check(worst <= 1e-8, format!("max deviation {worst:.2e} from {points}-point quadrature"))
}

fn small_scenario(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        components: 3,
        samples: 20,
        snapshots: 8,
        candidates: 20,
        snr_db: 10.0,
        rng_seed: seed,
        ..ScenarioConfig::default()
    }
}

fn parallel_equivalence() -> Outcome {
    let cfg = small_scenario(5);
    let executors = [Executor::new(1).unwrap(), Executor::new(2).unwrap(), Executor::new(8).unwrap()];
    let priors = PriorConfig::uninformative(cfg.candidates).unwrap();
    let mut worst: f64 = 0.0;
    for t in 0..50 {
        let (y, _) = generate_trial(&cfg, &mut cfg.rng_for_trial(t)).unwrap();
        let batch = run(&y, &priors, &Options::default()).unwrap();
        let mut first: Option<mvalse::Estimate> = None;
        for ex in &executors {
            let par = run_parallel(&y, &priors, &Options::default(), ex).unwrap();
            if par.support_history != batch.support_history {
                return Err(format!("trial {t}: support trajectory differs with {} workers", ex.workers()));
            }
            let scale = batch.x_hat.norm().max(f64::MIN_POSITIVE);
            worst = worst.max((&par.x_hat - &batch.x_hat).norm() / scale);
            match &first {
                None => first = Some(par),
                Some(f) if *f != par => return Err(format!("trial {t}: result depends on worker count")),
                Some(_) => {}
            }
        }
    }
    check(
        worst <= 1e-8,
        format!("max relative X̂ deviation {worst:.2e}, identical trajectories, worker-count independent"),
    )
}

fn sequential_degeneracy() -> Outcome {
    let cfg = small_scenario(6);
    let priors = PriorConfig::uninformative(cfg.candidates).unwrap();
    for t in 0..20 {
        let (y, _) = generate_trial(&cfg, &mut cfg.rng_for_trial(t)).unwrap();
        let batch = run(&y, &priors, &Options::default()).unwrap();
        let seq = run_sequential(&y, &priors, &partition(y.snapshots(), 1).unwrap(), &SequentialOptions::default()).unwrap();
        if seq != batch {
            return Err(format!("trial {t} differs"));
        }
    }
    check(true, "20/20 bit-identical".into())
}

fn overestimation_rate() -> Outcome {
    let start = Instant::now();
    let cfg = Preset::Overestimation.scenario();
    let sweep = Sweep::single(SweepVariable::Snapshots, vec![1.0, 5.0, 7.0]);
    let rows = run_monte_carlo(&cfg, &sweep, &executor(), false).map_err(|e| e.to_string())?;
    let p: Vec<f64> = rows.iter().map(|r| r.p_over).collect();
    let secs = start.elapsed().as_secs_f64();
    check(
        p[2] <= 0.02 && p[1] <= 0.05 && p[0] >= 0.15 && secs < 600.0,
        format!(
            "P(K̂>K) = {:.1}% (L=1), {:.1}% (L=5), {:.1}% (L=7) over {} trials, {secs:.0} s",
            100.0 * p[0],
            100.0 * p[1],
            100.0 * p[2],
            cfg.trials
        ),
    )
}

fn high_snr_recovery() -> Outcome {
    let cfg = ScenarioConfig {
        snr_db: 20.0,
        trials: 200,
        rng_seed: 8,
        ..ScenarioConfig::default()
    };
    let rows = run_monte_carlo(&cfg, &Sweep::default(), &executor(), false).map_err(|e| e.to_string())?;
    let r = &rows[0];
    let median = r.median_nmse_theta_db.unwrap_or(f64::INFINITY);
    check(
        r.p_correct >= 0.9 && median <= -45.0,
        format!("P(K̂=K) = {:.1}%, median NMSE(θ̂) = {median:.1} dB", 100.0 * r.p_correct),
    )
}

fn nonincreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

fn monotone_trends() -> Outcome {
    let ex = executor();
    let cfg = ScenarioConfig {
        trials: 200,
        rng_seed: 9,
        ..ScenarioConfig::default()
    };
    let snr = run_monte_carlo(&cfg, &Sweep::single(SweepVariable::SnrDb, vec![-5.0, 0.0, 5.0, 10.0]), &ex, false)
        .map_err(|e| e.to_string())?;
    let by_snr: Vec<f64> = snr.iter().map(|r| r.nmse_x_db.unwrap()).collect();
    let cfg = ScenarioConfig {
        snr_db: 4.0,
        ..cfg
    };
    let snaps = run_monte_carlo(&cfg, &Sweep::single(SweepVariable::Snapshots, vec![1.0, 2.0, 4.0, 8.0]), &ex, false)
        .map_err(|e| e.to_string())?;
    let by_l: Vec<f64> = snaps.iter().map(|r| r.nmse_x_db.unwrap()).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ");
    check(
        nonincreasing(&by_snr) && nonincreasing(&by_l),
        format!("NMSE(X̂) by SNR [{}] dB, by L [{}] dB", fmt(&by_snr), fmt(&by_l)),
    )
}

fn prior_benefit() -> Outcome {
    let cfg = ScenarioConfig {
        snr_db: 0.0,
        snapshots: 8,
        trials: 200,
        rng_seed: 10,
        frequency_source: FrequencySource::VonMisesGrid { kappa0: 1e4 },
        ..ScenarioConfig::default()
    };
    let sweep = Sweep::single(SweepVariable::PriorKappa0, vec![EstimatorPrior::Grid { kappa0: 1e4 }.kappa0(), 0.0]);
    let rows = run_monte_carlo(&cfg, &sweep, &executor(), false).map_err(|e| e.to_string())?;
    let with = rows[0].nmse_theta_db.unwrap();
    let without = rows[1].nmse_theta_db.unwrap();
    check(
        with < without,
        format!("mean NMSE(θ̂) {with:.2} dB with grid prior, {without:.2} dB without"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("flip evidence matches evidence differences", flip_oracle),
        ("rank-one flips match direct weight updates", rank_one_consistency),
        ("greedy support is a one-flip local maximum", exhaustive_search),
        ("circular moments match quadrature", moment_quadrature),
        ("snapshot-parallel run matches batch run", parallel_equivalence),
        ("single-group sequential run is bit-identical", sequential_degeneracy),
        ("overestimation rate with grid prior", overestimation_rate),
        ("high-SNR recovery", high_snr_recovery),
        ("signal error decreases with SNR and snapshots", monotone_trends),
        ("informative prior lowers frequency error", prior_benefit),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {id:>2} {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id:>2} {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
