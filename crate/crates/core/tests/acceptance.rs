//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always show.
//! Pass criterion numbers to run a subset:
//! `cargo test --release --test acceptance -- 4 9`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use skillkit::dmin::{
    dmin_reward, softplus, train_discriminator, BinaryDiscriminator, DiscriminatorLoss, DminTransform,
};
use skillkit::envcore::EnvState;
use skillkit::experiment::{run, ExperimentConfig, Learner, Quiet, SweepSpec, Trainer};
use skillkit::metrics::{
    collect_episodes, energy_distance, final_goal_distances, histogram_entropy, lgr, particle_mi_from_groups,
    sample_goals, Controller, FnController, HistogramSpec, PdController, MI, NEG_ENERGY_DISTANCE,
};
use skillkit::mimax::{Mimax, MimaxConfig, Skill};
use skillkit::neural::{Activation, Mlp};

type Outcome = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(configs().join(name), &[]).expect("shipped config loads")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn trained(config: &ExperimentConfig, seed: u64) -> Trainer {
    let mut t = Trainer::new(config, seed).unwrap();
    for _ in 0..t.total_batches() {
        t.train_batch().unwrap();
    }
    t
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ")
}

// 1. Closed-form identities of the reward transforms and the energy distance.
fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let l: f64 = rng.gen_range(-10.0..10.0);
        let airl = dmin_reward(DminTransform::Airl, l, None, 0.0).unwrap();
        // log D - log(1 - D) with log D = -softplus(-l) and log(1 - D) = -softplus(l).
        let reference = softplus(l) - softplus(-l);
        worst = worst.max((airl - reference).abs() / (4.0 * f64::EPSILON * (1.0 + l.abs())));
    }
    let offset = 10.0;
    let gail_half = dmin_reward(DminTransform::Gail, 0.0, None, offset).unwrap();
    let gail_err = (gail_half - (0.5f64.ln() + offset)).abs();
    let x = Array2::from_shape_fn((50, 2), |_| rng.sample::<f64, _>(StandardNormal));
    let same = energy_distance(x.view(), x.view()).unwrap();
    let (a, b) = (array![[0.3, -1.2]], array![[2.1, 0.4]]);
    let single = energy_distance(a.view(), b.view()).unwrap();
    let single_err = (single - 2.0 * (1.8f64.powi(2) + 1.6f64.powi(2)).sqrt()).abs();
    check(
        worst <= 1.0 && gail_err < 1e-12 && same.abs() < 1e-12 && single_err < 1e-12,
        format!(
            "AIRL err {worst:.2} x 4eps(1+|l|), GAIL(1/2) err {gail_err:.1e}, ED(x,x) {same:.1e}, ED singletons err {single_err:.1e}"
        ),
    )
}

// 2. Estimators against oracles.
fn estimator_calibration() -> Outcome {
    let spec = HistogramSpec::uniform(16, (-4.0, 4.0), 2).unwrap();
    let groups: Vec<Array2<f64>> = (0..8)
        .map(|k| Array2::from_shape_fn((40, 2), |(_, j)| if j == 0 { -3.75 + k as f64 } else { 0.1 }))
        .collect();
    let views: Vec<_> = groups.iter().map(|g| g.view()).collect();
    let mi = particle_mi_from_groups(&views, &spec).unwrap().mi;
    let mi_err = (mi - 8f64.ln()).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bins = 32;
    let u = Array2::from_shape_fn((100_000, 1), |_| rng.gen_range(0.0..1.0));
    let h = histogram_entropy(u.view(), &HistogramSpec::uniform(bins, (0.0, 1.0), 1).unwrap())
        .unwrap()
        .entropy;
    let h_err = (h - (bins as f64).ln()).abs();

    // Two unit Gaussians in 2D, the second shifted by 1 along x.
    let gauss =
        |rng: &mut ChaCha8Rng, shift: f64| [rng.sample::<f64, _>(StandardNormal) + shift, rng.sample(StandardNormal)];
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut oracle_rng = ChaCha8Rng::seed_from_u64(3);
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    let n_oracle = 1_000_000;
    for _ in 0..n_oracle {
        let (x1, x2) = (gauss(&mut oracle_rng, 0.0), gauss(&mut oracle_rng, 0.0));
        let (y1, y2) = (gauss(&mut oracle_rng, 1.0), gauss(&mut oracle_rng, 1.0));
        xy += dist(x1, y1);
        xx += dist(x1, x2);
        yy += dist(y1, y2);
    }
    let oracle = (2.0 * xy - xx - yy) / n_oracle as f64;
    let n = 4000;
    let p = Array2::from_shape_fn((n, 2), |_| rng.sample::<f64, _>(StandardNormal));
    let q = Array2::from_shape_fn((n, 2), |(_, j)| {
        rng.sample::<f64, _>(StandardNormal) + if j == 0 { 1.0 } else { 0.0 }
    });
    let ed = energy_distance(p.view(), q.view()).unwrap();
    let ed_err = (ed - oracle).abs();
    check(
        mi_err < 1e-12 && h_err < 0.02 && ed_err < 0.02,
        format!(
            "MI {mi:.6} vs ln 8 {:.6}; H {h:.4} vs ln {bins} {:.4}; ED {ed:.4} vs MC oracle {oracle:.4}",
            8f64.ln(),
            (bins as f64).ln()
        ),
    )
}

// 3. Backprop against central differences on random networks.
fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let acts = [Activation::Swish, Activation::Tanh, Activation::Identity];
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let depth = rng.gen_range(2..5);
        let sizes: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..9)).collect();
        let hidden = acts[rng.gen_range(0..2)];
        let mut net = Mlp::new(&sizes, hidden, &mut rng)
            .unwrap()
            .with_output_activation(acts[rng.gen_range(0..3)]);
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let up: Vec<f64> = (0..sizes[depth - 1]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |net: &Mlp| -> f64 { net.forward(&x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum() };
        let (grads, _) = net.grad(&x, &up).unwrap();
        let analytic: Vec<f64> = grads.slices().iter().flat_map(|s| s.iter().copied()).collect();
        let mut k = 0;
        for layer in 0..net.params_mut().len() {
            for j in 0..net.params_mut()[layer].len() {
                let orig = net.params_mut()[layer][j];
                let h = 1e-5;
                net.params_mut()[layer][j] = orig + h;
                let plus = f(&net);
                net.params_mut()[layer][j] = orig - h;
                let minus = f(&net);
                net.params_mut()[layer][j] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let rel = (analytic[k] - numeric).abs() / (analytic[k].abs() + numeric.abs()).max(1e-6);
                worst = worst.max(rel);
                k += 1;
            }
        }
    }
    check(worst < 1e-4, format!("worst relative error {worst:.2e} over 50 nets"))
}

fn mean_return(env: &skillkit::envcore::Environment, ctrl: &dyn Controller) -> f64 {
    let eps = collect_episodes(env, ctrl, &[Skill::None], 16, env.horizon(), 99).unwrap();
    eps[0].iter().map(|e| e.total_reward()).sum::<f64>() / eps[0].len() as f64
}

// 4. PPO against a scripted PD controller on the goal task.
fn ppo_sanity() -> Outcome {
    let config = load("ppo_point_goal.json");
    let mut scores = Vec::new();
    let mut physics = 0;
    for seed in 0..3 {
        let t = trained(&config, seed);
        physics = physics.max(t.physics_steps());
        let env = t.env();
        let scripted = mean_return(env, &PdController::new(vec![0, 1], vec![2, 3], vec![2.0, 1.0]));
        let idle = mean_return(env, &FnController(|_: &[f64], _: &Skill| vec![0.0, 0.0]));
        scores.push((mean_return(env, &t.controller()) - idle) / (scripted - idle));
    }
    check(
        physics <= 200_000 && scores.iter().all(|&s| s >= 0.9),
        format!(
            "normalized return [{}] (>= 0.90 each), {physics} env steps (<= 200000)",
            fmt(&scores)
        ),
    )
}

fn final_mis(config: &ExperimentConfig) -> (Vec<f64>, usize) {
    let mut physics = 0;
    let mis = (0..10)
        .map(|seed| {
            let t = trained(config, seed);
            physics = physics.max(t.physics_steps());
            t.evaluate().unwrap().get(MI).unwrap()
        })
        .collect();
    (mis, physics)
}

// 5. Skill discovery: DIAYN separation and the cDIAYN spectral-norm ablation.
fn mimax_analogue(budget: Duration) -> Outcome {
    let start = Instant::now();
    let (diayn, physics) = final_mis(&load("diayn_point.json"));
    let diayn_time = start.elapsed();
    let passing = diayn.iter().filter(|&&m| m >= 1.5).count();

    let cdiayn = load("cdiayn_point.json");
    assert!(cdiayn.mimax.spectral_norm);
    let start = Instant::now();
    let (sn, _) = final_mis(&cdiayn);
    let sn_time = start.elapsed();
    let mut no_sn_config = cdiayn.clone();
    no_sn_config.mimax.spectral_norm = false;
    let start = Instant::now();
    let (no_sn, _) = final_mis(&no_sn_config);
    let no_sn_time = start.elapsed();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m_sn, m_no) = (mean(&sn), mean(&no_sn));
    let slowest = diayn_time.max(sn_time).max(no_sn_time);
    check(
        passing >= 7 && physics <= 500_000 && m_sn >= 1.0 && m_no < m_sn && slowest < budget,
        format!(
            "DIAYN MI [{}] {passing}/10 >= 1.5 after {physics} steps; cDIAYN mean MI SN {m_sn:.3} (>= 1.0) vs no SN {m_no:.3}; slowest variant {:.0} s",
            fmt(&diayn),
            slowest.as_secs_f64()
        ),
    )
}

// 6. Goal reaching on held-out goals and latent goal reaching vs an untrained policy.
fn gcrl_lgr() -> Outcome {
    let config = load("gcrl_point.json");
    let untrained = Trainer::new(&config, 0).unwrap();
    let t = trained(&config, 0);
    let Learner::Mimax(m) = t.learner() else {
        return Err("gcrl config is not MI-max".into());
    };
    let (env, fx) = (t.env(), t.features());
    let goals = sample_goals(fx.dim(), 10, 12345);
    let tol = 0.1 * env.arena_half_width().unwrap();
    let d = final_goal_distances(env, &t.controller(), fx, &goals, &m.head, env.horizon(), 7).unwrap();
    let reached = d.iter().filter(|&&x| x < tol).count();
    let before = lgr(
        env,
        &untrained.controller(),
        fx,
        &goals,
        &m.head,
        1.0,
        1,
        env.horizon(),
        7,
    )
    .unwrap();
    let after = lgr(env, &t.controller(), fx, &goals, &m.head, 1.0, 1, env.horizon(), 7).unwrap();
    let ratio = before / after;
    check(
        reached >= 8 && ratio >= 3.0,
        format!(
            "{reached}/10 goals within {tol:.2} m (distances [{}]); LGR {before:.3} -> {after:.3}, {ratio:.1}x",
            fmt(&d)
        ),
    )
}

// 7. GAIL against the bimodal target, and the matched-batch discriminator loss.
fn dmin_analogue() -> Outcome {
    let config = load("gail_bimodal.json");
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let before = -Trainer::new(&config, seed)
            .unwrap()
            .evaluate()
            .unwrap()
            .get(NEG_ENERGY_DISTANCE)
            .unwrap();
        let after = -trained(&config, seed)
            .evaluate()
            .unwrap()
            .get(NEG_ENERGY_DISTANCE)
            .unwrap();
        ratios.push(after / before);
    }
    let passing = ratios.iter().filter(|&&r| r <= 1.0 / 3.0).count();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array2::from_shape_fn((256, 2), |_| rng.gen_range(-2.0..2.0));
    let mut d = BinaryDiscriminator::new(2, &[32, 32], 0.0, &mut rng).unwrap();
    let mut last = DiscriminatorLoss::default();
    for _ in 0..300 {
        last = train_discriminator(&mut d, x.view(), x.view(), 1e-3, &mut rng).unwrap();
    }
    let loss_err = (last.cross_entropy - 4f64.ln()).abs();
    check(
        passing >= 7 && loss_err <= 0.05,
        format!(
            "ED trained/untrained [{}] {passing}/10 <= 1/3; matched loss {:.4} vs ln 4 {:.4}",
            fmt(&ratios),
            last.cross_entropy,
            4f64.ln()
        ),
    )
}

// 8. Offsets shift rewards exactly; reward sweeps never touch the score.
fn offset_and_score() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let base = MimaxConfig {
        obs_indices: Some(vec![0, 1]),
        ..MimaxConfig::default()
    };
    let mut shifted_ok = true;
    for c in [0.5, 1.0, 3.25, 17.0] {
        let m0 = Mimax::new(
            MimaxConfig {
                offset: Some(0.0),
                ..base.clone()
            },
            4,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        let mc = Mimax::new(
            MimaxConfig {
                offset: Some(c),
                ..base.clone()
            },
            4,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        for _ in 0..100 {
            let o: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let z = Skill::Discrete(rng.gen_range(0..8));
            shifted_ok &= mc.reward(&o, &z).unwrap() == m0.reward(&o, &z).unwrap() + c;
            let l = rng.gen_range(-12.0..12.0);
            for t in [DminTransform::Gail, DminTransform::Gail2, DminTransform::Airl] {
                shifted_ok &= dmin_reward(t, l, None, c).unwrap() == dmin_reward(t, l, None, 0.0).unwrap() + c;
            }
        }
    }

    let spec = SweepSpec::load(configs().join("sweeps/push_reward_scale.json"), &[]).unwrap();
    let envs: Vec<_> = spec
        .variants()
        .iter()
        .map(|a| spec.variant_config(a).unwrap().environment().unwrap())
        .collect();
    let n = envs[0].descriptor().components.len();
    let (mut score_same, mut reward_differs) = (true, false);
    for _ in 0..500 {
        let mut p = || [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let s = EnvState {
            positions: (0..n).map(|_| p()).collect(),
            velocities: (0..n).map(|_| p()).collect(),
            step_index: 0,
            rng_state: 0,
        };
        for e in &envs[1..] {
            score_same &=
                e.score(&s) == envs[0].score(&s) && e.layout().score_channels == envs[0].layout().score_channels;
            reward_differs |= e.reward(&s) != envs[0].reward(&s);
        }
    }
    check(
        shifted_ok && score_same && reward_differs,
        format!(
            "offset shift exact: {shifted_ok}; score identical across {} sweep variants: {score_same}; rewards differ: {reward_differs}",
            envs.len()
        ),
    )
}

// 9. Same seed, same bytes.
fn determinism() -> Outcome {
    let mut config = load("diayn_point.json");
    config.seeds = vec![4];
    config.ppo.total_steps = 8000;
    config.eval_every = 3;
    let tmp = tempfile::tempdir().unwrap();
    let read = |dir: &Path, f: &str| std::fs::read(dir.join("seed_4").join(f)).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&config, Some(&a), &mut Quiet).unwrap();
    run(&config, Some(&b), &mut Quiet).unwrap();
    let files = ["metrics.jsonl", "stats.jsonl", "trajectories.csv", "checkpoint.bin"];
    let same: Vec<bool> = files.iter().map(|f| read(&a, f) == read(&b, f)).collect();
    let lines = String::from_utf8(read(&a, "metrics.jsonl")).unwrap().lines().count();
    check(
        same.iter().all(|&s| s) && lines >= 2,
        format!(
            "byte-identical {:?} ({lines} metric reports)",
            files.iter().zip(&same).collect::<Vec<_>>()
        ),
    )
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, Duration, &dyn Fn() -> Outcome); 9] = [
        (1, "metric identities", Duration::from_secs(1), &metric_identities),
        (
            2,
            "estimator calibration",
            Duration::from_secs(30),
            &estimator_calibration,
        ),
        (
            3,
            "gradient correctness",
            Duration::from_secs(10),
            &gradient_correctness,
        ),
        (4, "PPO sanity", Duration::from_secs(300), &ppo_sanity),
        // Per-variant budget of 15 min is checked inside; three variants run here.
        (5, "MI-max analogue", Duration::from_secs(3 * 900), &|| {
            mimax_analogue(Duration::from_secs(900))
        }),
        (6, "GCRL / LGR", Duration::from_secs(600), &gcrl_lgr),
        (7, "D-min analogue", Duration::from_secs(900), &dmin_analogue),
        (
            8,
            "offset / score invariants",
            Duration::from_secs(60),
            &offset_and_score,
        ),
        (9, "determinism", Duration::from_secs(120), &determinism),
    ];
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(d) if secs >= budget.as_secs_f64() => Err(format!("{d}; over time budget")),
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} {n} {name}: {detail} [{secs:.1} s < {} s]", budget.as_secs());
        failed += outcome.is_err() as usize;
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
