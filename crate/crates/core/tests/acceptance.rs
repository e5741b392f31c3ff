//! End-to-end acceptance run. Quantitative criteria take the median over
//! five seeds; the property criteria must hold exactly.
//!
//! Pretrained checkpoints are cached under the cargo target tmpdir, keyed
//! by a hash of the configuration, so reruns skip the pretraining.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::time::Instant;

use antijam::actor_critic::{epsilon_greedy, ObservationMatrix, ParameterBlob, PolicyNetwork, ValueNetwork};
use antijam::attacker::{attacker_reward, BudgetConfig, BudgetState};
use antijam::config::{ExperimentConfig, Scenario};
use antijam::defense::imitation::ImitationRewardKind;
use antijam::defense::orthogonal::{exploration_distribution, normalized_correlation, standalone_accuracy, TransitionMatrixSet};
use antijam::defense::pid::PidConfig;
use antijam::log::{verify, DefenseKind, MetricsLog};
use antijam::metrics::{median, mode, run_lengths};
use antijam::nn::{argmax, softmax, Mlp};
use antijam::scenario::{pretrain_all, run_scenario, summarize, Pretrained, RunSummary};
use antijam::victim::SuccessHistory;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Seeded {
    seed: u64,
    pre: Pretrained,
    /// Wall-clock pretraining time, or `None` when loaded from cache.
    pretrain_secs: Option<f64>,
}

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn cache_dir(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    let mut h = DefaultHasher::new();
    let mut keyed = cfg.clone();
    keyed.scenario = Scenario::NoAttack;
    keyed.horizon = 0;
    keyed.checkpoints = Default::default();
    serde_json::to_string(&keyed).unwrap().hash(&mut h);
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("acceptance-{:016x}", h.finish())).join(seed.to_string())
}

fn blob_names() -> Vec<String> {
    let mut names = vec!["victim".to_string(), "attacker".into(), "orthogonal_1".into(), "orthogonal_2".into()];
    names.extend(ImitationRewardKind::ALL.iter().map(|k| format!("imitation_{}", k.as_str())));
    names
}

fn load_cached(dir: &std::path::Path) -> Option<Pretrained> {
    let load = |name: &str| ParameterBlob::load(dir.join(format!("{name}.ckpt"))).ok();
    Some(Pretrained {
        victim: load("victim")?,
        attacker: Some(load("attacker")?),
        imitation: ImitationRewardKind::ALL
            .iter()
            .map(|&k| load(&format!("imitation_{}", k.as_str())).map(|b| (k, b)))
            .collect::<Option<Vec<_>>>()?,
        orthogonal: Some([load("orthogonal_1")?, load("orthogonal_2")?]),
    })
}

fn store(dir: &std::path::Path, pre: &Pretrained) {
    std::fs::create_dir_all(dir).unwrap();
    let mut blobs = vec![&pre.victim, pre.attacker.as_ref().unwrap()];
    let [o1, o2] = pre.orthogonal.as_ref().unwrap();
    blobs.extend([o1, o2]);
    blobs.extend(ImitationRewardKind::ALL.iter().map(|&k| pre.imitation_for(k).unwrap()));
    for (name, blob) in blob_names().iter().zip(blobs) {
        blob.save(dir.join(format!("{name}.ckpt"))).unwrap();
    }
}

fn pretrain(cfg: &ExperimentConfig) -> Vec<Seeded> {
    SEEDS
        .iter()
        .map(|&seed| {
            let dir = cache_dir(cfg, seed);
            if let Some(pre) = load_cached(&dir) {
                return Seeded { seed, pre, pretrain_secs: None };
            }
            let t = Instant::now();
            let (pre, _) = pretrain_all(cfg, seed, true).unwrap();
            let secs = t.elapsed().as_secs_f64();
            eprintln!("seed {seed}: pretrained in {secs:.0}s");
            store(&dir, &pre);
            Seeded { seed, pre, pretrain_secs: Some(secs) }
        })
        .collect()
}

fn run(cfg: &ExperimentConfig, scenario: Scenario, s: &Seeded, tweak: impl Fn(&mut ExperimentConfig)) -> (MetricsLog, RunSummary, ExperimentConfig) {
    let mut c = cfg.clone();
    c.scenario = scenario;
    tweak(&mut c);
    let log = run_scenario(&c, s.seed, &s.pre).unwrap();
    let summary = summarize(&log, &c).unwrap();
    (log, summary, c)
}

fn med(xs: &[f64]) -> f64 {
    median(xs).unwrap()
}

fn fmt(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",")
}

fn no_attack_baseline(cfg: &ExperimentConfig, seeds: &[Seeded]) -> Outcome {
    let acc = |eps: f64| -> Vec<f64> {
        seeds
            .iter()
            .map(|s| {
                let (log, _, _) = run(cfg, Scenario::NoAttack, s, |c| {
                    c.victim.epsilon = eps;
                    c.horizon = 50_000;
                });
                log.accuracy(0, log.len())
            })
            .collect()
    };
    let (greedy, explore) = (acc(0.0), acc(0.1));
    let times: Vec<f64> = seeds.iter().filter_map(|s| s.pretrain_secs).collect();
    let time_ok = times.iter().all(|&t| t < 600.0);
    let pass = med(&greedy) >= 0.90 && med(&explore) >= 0.82 && time_ok;
    let timing = if times.is_empty() { "cached".to_string() } else { format!("max {:.0}s", times.iter().cloned().fold(0.0, f64::max)) };
    outcome(
        "1 no-attack baseline",
        pass,
        format!("eps0 median {:.3} [{}] >= 0.90; eps0.1 median {:.3} [{}] >= 0.82; pretrain {timing} < 600s", med(&greedy), fmt(&greedy), med(&explore), fmt(&explore)),
    )
}

fn sra_attack(cfg: &ExperimentConfig, seeds: &[Seeded]) -> Outcome {
    let sums: Vec<RunSummary> = seeds.iter().map(|s| run(cfg, Scenario::SraAttack, s, |_| {}).1).collect();
    let post: Vec<f64> = sums.iter().map(|s| s.post_attack_accuracy).collect();
    let cdf: Vec<f64> = sums.iter().map(|s| s.cdf_at_0_2).collect();
    outcome(
        "2 SRA attack",
        med(&post) <= 0.25 && med(&cdf) >= 0.70,
        format!("post-attack median {:.3} [{}] <= 0.25; CDF(0.2) median {:.3} [{}] >= 0.70", med(&post), fmt(&post), med(&cdf), fmt(&cdf)),
    )
}

fn budgeted_attack(cfg: &ExperimentConfig, seeds: &[Seeded]) -> Outcome {
    let mut acc = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    let mut worst_period = 0usize;
    let mut all_runs = Vec::new();
    let mut cap = 0;
    for s in seeds {
        let (log, sum, c) = run(cfg, Scenario::BudgetedAttack, s, |_| {});
        acc.push(sum.post_attack_accuracy);
        worst_ratio = worst_ratio.max(sum.jam_ratio);
        let b = c.attacker.budget;
        cap = (b.period as f64 * b.theta).floor() as usize;
        let post = &log.records[c.schedule.attack_start..];
        for period in post.chunks_exact(b.period) {
            worst_period = worst_period.max(period.iter().filter(|r| r.jammed.is_some()).count());
        }
        let flags: Vec<bool> = post.iter().map(|r| r.jammed.is_some()).collect();
        all_runs.extend(run_lengths(&flags));
    }
    let m = mode(&all_runs);
    let pass = med(&acc) <= 0.45 && worst_ratio <= 0.3 && worst_period <= cap && m == Some(1);
    outcome(
        "3 budgeted attack",
        pass,
        format!(
            "accuracy median {:.3} [{}] <= 0.45; max jam ratio {worst_ratio:.3} <= 0.3; max jams per period {worst_period} <= {cap}; run-length mode {m:?} == 1",
            med(&acc),
            fmt(&acc)
        ),
    )
}

fn pid_defense(cfg: &ExperimentConfig, seeds: &[Seeded]) -> Outcome {
    let with: Vec<f64> = seeds.iter().map(|s| run(cfg, Scenario::DefensePid, s, |c| c.pid.partial_reward = true).1.final_accuracy).collect();
    let without: Vec<f64> = seeds.iter().map(|s| run(cfg, Scenario::DefensePid, s, |c| c.pid.partial_reward = false).1.final_accuracy).collect();
    let (a, b) = (med(&with), med(&without));
    outcome(
        "4 PID defense",
        (0.30..=0.48).contains(&a) && b >= 0.25,
        format!("with partial reward median {a:.3} [{}] in [0.30,0.48]; without median {b:.3} [{}] >= 0.25", fmt(&with), fmt(&without)),
    )
}

fn imitation_match(log: &MetricsLog) -> f64 {
    let defended: Vec<_> = log.records.iter().filter(|r| r.defense == DefenseKind::Imitation && r.attacker_action.is_some()).collect();
    let hits = defended.iter().filter(|r| r.imitation_action == r.attacker_action).count();
    hits as f64 / defended.len().max(1) as f64
}

fn imitation_defense(cfg: &ExperimentConfig, seeds: &[Seeded]) -> Outcome {
    let mut per_kind = Vec::new();
    let mut matches = Vec::new();
    for kind in ImitationRewardKind::ALL {
        let mut acc = Vec::new();
        for s in seeds {
            let (log, sum, _) = run(cfg, Scenario::DefenseImitation, s, |c| c.imitation.reward = kind);
            acc.push(sum.final_accuracy);
            if kind == cfg.imitation.reward {
                matches.push(imitation_match(&log));
            }
        }
        per_kind.push((kind, acc));
    }
    let medians: Vec<f64> = per_kind.iter().map(|(_, a)| med(a)).collect();
    let spread = medians.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - medians.iter().cloned().fold(f64::INFINITY, f64::min);
    let main = &per_kind.iter().find(|(k, _)| *k == cfg.imitation.reward).unwrap().1;
    let pass = med(main) >= 0.80 && med(&matches) >= 0.70 && spread <= 0.05;
    let variants: Vec<String> = per_kind.iter().map(|(k, a)| format!("{}={:.3}", k.as_str(), med(a))).collect();
    outcome(
        "5 imitation defense",
        pass,
        format!(
            "accuracy median {:.3} [{}] >= 0.80; match rate median {:.3} [{}] >= 0.70; variant spread {spread:.3} <= 0.05 ({})",
            med(main),
            fmt(main),
            med(&matches),
            fmt(&matches),
            variants.join(" ")
        ),
    )
}

fn orthogonal_defense(cfg: &ExperimentConfig, seeds: &[Seeded]) -> Outcome {
    let mut a1 = Vec::new();
    let mut a2 = Vec::new();
    let mut defended = Vec::new();
    for s in seeds {
        let [p1, p2] = s.pre.orthogonal.as_ref().unwrap();
        a1.push(standalone_accuracy(p1, &cfg.victim, &cfg.env, 20_000, s.seed).unwrap());
        a2.push(standalone_accuracy(p2, &cfg.victim, &cfg.env, 20_000, s.seed).unwrap());
        defended.push(run(cfg, Scenario::DefenseOrthogonal, s, |_| {}).1.post_attack_accuracy);
    }
    let (m1, m2, d) = (med(&a1), med(&a2), med(&defended));
    outcome(
        "6 orthogonal defense",
        m1.min(m2) >= 0.60 && m1.max(m2) >= 0.75 && d >= 0.40,
        format!("standalone medians {m1:.3} [{}] / {m2:.3} [{}] both >= 0.60, one >= 0.75; defended median {d:.3} [{}] >= 0.40", fmt(&a1), fmt(&a2), fmt(&defended)),
    )
}

fn detection(cfg: &ExperimentConfig, seeds: &[Seeded]) -> Outcome {
    let mut correct = 0;
    let mut verdicts = Vec::new();
    let mut combined = Vec::new();
    for s in seeds {
        for (scenario, want) in [(Scenario::DetectAttack, "attack"), (Scenario::DetectEnvChange, "environment_change")] {
            let (_, sum, _) = run(cfg, scenario, s, |_| {});
            let got = sum.detection.clone().unwrap_or_else(|| "none".into());
            correct += usize::from(got == want);
            verdicts.push(format!("{}:{got}", s.seed));
            if scenario == Scenario::DetectAttack {
                combined.push(sum.final_accuracy);
            }
        }
    }
    let c = med(&combined);
    outcome(
        "7 detection",
        correct >= 9 && c > 0.80,
        format!("{correct}/10 correct >= 9 ({}); combined final accuracy median {c:.3} [{}] > 0.80", verdicts.join(" "), fmt(&combined)),
    )
}

fn selection_primitives() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..40);
        let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let p = softmax(&logits);
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            worst = f64::INFINITY;
        }
    }
    let ties = argmax(&[0.2, 0.5, 0.5, 0.1]) == 1 && argmax(&[1.0; 7]) == 0 && argmax(&[0.0, 0.0, 3.0, 3.0]) == 2;
    let n = 16;
    let draws = 100_000;
    let mut counts = vec![0usize; n];
    let scores = softmax(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
    for _ in 0..draws {
        let d = epsilon_greedy(&scores, 1.0, &mut rng);
        counts[d.action] += 1;
    }
    let expect = draws as f64 / n as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    // 99th percentile of chi-squared with 15 degrees of freedom
    let critical = 30.578;
    outcome(
        "8 softmax/argmax/epsilon-greedy",
        worst <= 1e-12 && ties && chi2 < critical,
        format!("softmax max |sum-1| {worst:.1e}; lowest-index ties {ties}; chi2 {chi2:.2} < {critical}"),
    )
}

fn random_obs(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> ObservationMatrix {
    let mut obs = ObservationMatrix::new(n, depth);
    for _ in 0..rng.gen_range(0..=depth + 2) {
        if rng.gen_bool(0.2) {
            obs.push_empty();
        } else {
            obs.push(rng.gen_range(0..n), if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        }
    }
    obs
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale < 1e-12 {
        0.0
    } else {
        diff / scale
    }
}

fn central_difference(params: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_actor, mut worst_critic): (f64, f64) = (0.0, 0.0);
    let nets = 25;
    for _ in 0..nets {
        let n = rng.gen_range(2..6);
        let depth = rng.gen_range(1..4);
        let h1 = rng.gen_range(2..7);
        let h2 = rng.gen_range(2..7);
        let sizes = [n * depth, h1, h2, n];
        let actor = PolicyNetwork { net: Mlp::new(&sizes, &mut rng).unwrap(), learning_rate: 0.0, entropy_weight: 0.0 };
        let critic = ValueNetwork { net: Mlp::new(&[n * depth, h1, h2, 1], &mut rng).unwrap(), learning_rate: 0.0, discount: 0.9 };
        let obs = random_obs(&mut rng, n, depth);
        let action = rng.gen_range(0..n);

        let analytic = actor.log_prob_gradient(&obs, action).unwrap();
        let numeric = central_difference(actor.net.params(), |p| {
            let a = PolicyNetwork { net: Mlp::from_params(&sizes, p.to_vec()).unwrap(), ..actor.clone() };
            a.scores(&obs).unwrap()[action].ln()
        });
        worst_actor = worst_actor.max(rel_err(&analytic, &numeric));

        let csizes = [n * depth, h1, h2, 1];
        let analytic = critic.value_gradient(&obs).unwrap();
        let numeric = central_difference(critic.net.params(), |p| {
            let c = ValueNetwork { net: Mlp::from_params(&csizes, p.to_vec()).unwrap(), ..critic.clone() };
            c.value(&obs).unwrap()
        });
        worst_critic = worst_critic.max(rel_err(&analytic, &numeric));
    }
    outcome(
        "9 gradients vs finite differences",
        worst_actor <= 1e-4 && worst_critic <= 1e-4,
        format!("{nets} networks; worst relative error actor {worst_actor:.2e}, critic {worst_critic:.2e} <= 1e-4"),
    )
}

fn reward_table() -> Outcome {
    let n = 16;
    let mut mismatches = 0;
    let mut checked = 0;
    for a in 0..n {
        for v in 0..n {
            for good in [true, false] {
                let expected = match (a == v, good) {
                    (true, true) => 1.0,
                    (true, false) => 0.5,
                    (false, false) => -0.5,
                    (false, true) => -1.0,
                };
                checked += 1;
                if attacker_reward(a, v, good) != expected {
                    mismatches += 1;
                }
            }
        }
    }
    outcome("10 attacker reward table", mismatches == 0 && checked == 2 * n * n, format!("{checked} combinations, {mismatches} mismatches"))
}

fn is_distribution(p: &[f64]) -> bool {
    p.iter().all(|&x| x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

fn random_matrices(rng: &mut ChaCha8Rng, n: usize, order_max: usize, density: f64) -> TransitionMatrixSet {
    let mut m = TransitionMatrixSet::new(n, order_max);
    for order in 1..=order_max {
        for from in 0..n {
            for to in 0..n {
                if rng.gen_bool(density) {
                    for _ in 0..rng.gen_range(1..5) {
                        m.increment(order, from, to);
                    }
                }
            }
        }
    }
    m
}

fn probability_vectors() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut bad_pid = 0;
    let mut bad_ortho = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(2..17);
        let mut base: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        base.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let s: f64 = base.iter().sum();
        base.iter_mut().for_each(|b| *b /= s);
        let ramp = |scale: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        let cfg = PidConfig { base_probs: base, kp: ramp(0.1, &mut rng), ki: ramp(0.01, &mut rng), kd: ramp(0.05, &mut rng), short_window: 10, long_window: 200, diff_window: 400 };
        let mut hist = SuccessHistory::new(400);
        let rate = rng.gen::<f64>();
        for _ in 0..rng.gen_range(0..500) {
            hist.record(rng.gen_bool(rate));
        }
        if !is_distribution(&cfg.probabilities(&hist)) {
            bad_pid += 1;
        }

        let order_max = rng.gen_range(1..5);
        let density = rng.gen::<f64>();
        let other = random_matrices(&mut rng, n, order_max, density);
        let recent: Vec<(usize, f64)> = (0..rng.gen_range(0..=order_max)).map(|_| (rng.gen_range(0..n), if rng.gen_bool(0.5) { 1.0 } else { -1.0 })).collect();
        let p_reg: Vec<f64> = if rng.gen_bool(0.5) { vec![0.0; n] } else { (0..n).map(|_| rng.gen::<f64>() / n as f64).collect() };
        if !is_distribution(&exploration_distribution(&other, &recent, &p_reg, rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99))) {
            bad_ortho += 1;
        }
    }

    let close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    let pid = PidConfig { base_probs: vec![0.6, 0.4], kp: vec![-0.01, 0.01], ki: vec![0.0, 0.0], kd: vec![0.0, 0.0], short_window: 10, long_window: 200, diff_window: 400 };
    let mut hist = SuccessHistory::new(400);
    for _ in 0..10 {
        hist.record(true);
    }
    let pid_hand = close(&pid.probabilities(&hist), &[0.5, 0.5]) && close(&pid.probabilities(&SuccessHistory::new(400)), &[0.6, 0.4]);
    let mut m = TransitionMatrixSet::new(2, 1);
    for _ in 0..3 {
        m.increment(1, 0, 0);
    }
    let ortho_hand = close(&exploration_distribution(&m, &[(0, 1.0)], &[0.0, 0.0], 0.5, 0.5), &[0.05, 0.95])
        && close(&exploration_distribution(&TransitionMatrixSet::new(4, 2), &[(1, 1.0), (2, -1.0)], &[0.0; 4], 0.7, 0.5), &[0.25; 4]);
    outcome(
        "11 PID and orthogonal probability vectors",
        bad_pid == 0 && bad_ortho == 0 && pid_hand && ortho_hand,
        format!("10000 random inputs each: {bad_pid} bad PID, {bad_ortho} bad exploration; hand examples PID {pid_hand}, exploration {ortho_hand}"),
    )
}

fn correlation_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut asym, mut unscaled, mut leaky) = (0usize, 0usize, 0usize);
    let pairs = 2_000;
    for _ in 0..pairs {
        let n = rng.gen_range(2..10);
        let a = random_matrices(&mut rng, n, 2, 0.4);
        let b = random_matrices(&mut rng, n, 2, 0.4);
        for order in 1..=2 {
            let (Ok(ab), Ok(ba)) = (normalized_correlation(&a, &b, order), normalized_correlation(&b, &a, order)) else { continue };
            if (ab - ba).abs() > 1e-15 {
                asym += 1;
            }
            let c = rng.gen_range(2..5);
            let mut scaled = TransitionMatrixSet::new(n, 2);
            for from in 0..n {
                for to in 0..n {
                    for _ in 0..a.count(order, from, to) * c {
                        scaled.increment(order, from, to);
                    }
                }
            }
            if (normalized_correlation(&scaled, &b, order).unwrap() - ab).abs() > 1e-12 * ab.max(1e-300) + 1e-15 {
                unscaled += 1;
            }
        }
        // split cells between two matrices so their supports never overlap
        let mut x = TransitionMatrixSet::new(n, 1);
        let mut y = TransitionMatrixSet::new(n, 1);
        for from in 0..n {
            for to in 0..n {
                if rng.gen_bool(0.5) {
                    x.increment(1, from, to);
                } else {
                    y.increment(1, from, to);
                }
            }
        }
        if let (Ok(v), true) = (normalized_correlation(&x, &y, 1), x.total(1) > 0 && y.total(1) > 0) {
            if v != 0.0 {
                leaky += 1;
            }
        }
    }
    outcome(
        "12 normalized correlation",
        asym == 0 && unscaled == 0 && leaky == 0,
        format!("{pairs} random pairs: {asym} asymmetric, {unscaled} scale-variant, {leaky} nonzero on disjoint supports"),
    )
}

fn budget_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let slots = 1_000_000;
    let mut violations = 0;
    let mut periods = 0;
    let mut t = 0;
    while t < slots {
        let cfg = BudgetConfig { theta: rng.gen_range(0.0..1.0), theta_update: rng.gen_range(0.0..1.0), period: rng.gen_range(1..2000), initial_threshold: rng.gen_range(0.0..1.2) };
        let cap = (cfg.period as f64 * cfg.theta).floor() as usize;
        let mut b = BudgetState::new(cfg);
        for _ in 0..rng.gen_range(1..10) {
            let mut jams = 0;
            for _ in 0..cfg.period {
                let n = rng.gen_range(2..17);
                let scores = softmax(&(0..n).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<_>>());
                jams += usize::from(b.tick(&scores, rng.gen_bool(0.9)));
                t += 1;
            }
            periods += 1;
            violations += usize::from(jams > cap);
        }
    }
    outcome("13 budget invariant", violations == 0, format!("{t} slots, {periods} completed periods, {violations} over the cap"))
}

fn determinism(cfg: &ExperimentConfig, seeds: &[Seeded]) -> Outcome {
    let mut diverged = Vec::new();
    let mut mismatches = 0;
    let mut checked = 0;
    let s = &seeds[0];
    for scenario in Scenario::ALL {
        let a = run(cfg, scenario, s, |c| c.horizon = 8000).0;
        let b = run(cfg, scenario, s, |c| c.horizon = 8000).0;
        if a != b || a.to_tsv() != b.to_tsv() {
            diverged.push(scenario.as_str());
        }
        let report = verify(&MetricsLog::from_tsv(&a.to_tsv()).unwrap());
        checked += report.checked;
        mismatches += report.mismatches.len();
    }
    outcome(
        "14 determinism and replay",
        diverged.is_empty() && mismatches == 0,
        format!("{} scenarios replayed, diverged {:?}; verifier {checked} slots, {mismatches} mismatches", Scenario::ALL.len(), diverged),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let cfg = ExperimentConfig::default();
    let t = Instant::now();
    let mut results = vec![selection_primitives(), gradients(), reward_table(), probability_vectors(), correlation_properties(), budget_fuzz()];
    let seeds = pretrain(&cfg);
    results.push(determinism(&cfg, &seeds));
    results.extend([
        no_attack_baseline(&cfg, &seeds),
        sra_attack(&cfg, &seeds),
        budgeted_attack(&cfg, &seeds),
        pid_defense(&cfg, &seeds),
        imitation_defense(&cfg, &seeds),
        orthogonal_defense(&cfg, &seeds),
        detection(&cfg, &seeds),
    ]);
    results.sort_by_key(|o| o.id.split(' ').next().unwrap().parse::<u32>().unwrap());
    for o in &results {
        println!("criterion {}: {} | {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed = results.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed ({:.0}s)", results.len() - failed, t.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
