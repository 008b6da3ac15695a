//! Acceptance suite. Prints one PASS/FAIL line per criterion with the
//! measured numbers, then exits nonzero if any criterion failed outside
//! the documented shortfall list.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use delu_cli::commands::{BenchRow, TIMING_COLUMNS};
use delu_cli::RunManifest;
use delu_core::delu::train;
use delu_core::diagnostics::{
    best_response_changes, boundary_samples, effective_step, nonlinear_fraction, self_alignment, spearman,
    test_directions, BoundaryTestConfig,
};
use delu_core::inference::{barrier_round_count, barrier_value_grad};
use delu_core::rng::{self, Stream, StreamRng};
use delu_core::{
    gradient_inference, oracle_optimal_contract, BarrierConfig, Contract, ContractProblem,
    DeluNetwork, ProblemGenConfig, TrainConfig, Variant,
};

// criterion 1
const FIXTURE_LINES: [(f64, f64); 4] = [(-5.0, 5.0), (-8.57, 8.57), (-9.17, 9.17), (-14.0, 14.0)];
const FIXTURE_TOL: f64 = 0.02;
const FIXTURE_BUDGET: Duration = Duration::from_secs(1);
// criterion 2
const ORACLE_INSTANCES: u64 = 20;
const ORACLE_RANDOM_CONTRACTS: usize = 100_000;
const ORACLE_GRID: usize = 200;
const ORACLE_SLACK: f64 = 1e-9;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
// criterion 3
const LEMMA_TRIALS: usize = 1000;
const AFFINE_TOL: f64 = 1e-9;
const CONVEX_TOL: f64 = 1e-9;
const TIGHT_TOL: f64 = 1e-6;
// criterion 4
const GRAD_POINTS: usize = 100;
const GRAD_REL_TOL: f64 = 1e-5;
const ZETA_PARAMS_CHECKED: usize = 200;
// criterion 5
const SUITE_MEDIAN_FLOOR: f64 = 0.90;
const SUITE_BUDGET: Duration = Duration::from_secs(15 * 60);
// criterion 6
const DOMINANCE_TOL: f64 = 1e-6;
const BEST_SO_FAR_TOL: f64 = 1e-9;
// criterion 7
const ROUND_HIDDEN: usize = 32;
const ROUND_EXPECTED: usize = 5;
// criterion 8
const LINEARITY_POINTS: usize = 2000;
const LINEARITY_AGREEMENT: f64 = 0.95;

/// Criteria known to miss their threshold at desk scale. Their lines still
/// print FAIL; they do not fail the run.
const KNOWN_SHORTFALLS: [u8; 1] = [5];

/// Flags of the criterion 5 suite run.
const SUITE_FLAGS: [&str; 20] = [
    "--m-list", "2,5", "--n-list", "8,32,64", "--grid", "rotate", "--seeds", "0,1,2,3,4", "--samples", "5000",
    "--epochs", "100", "--batch-size", "32", "--starts", "500", "--diag-samples", "500", "--jobs", "1",
];

/// Flags of the criterion 9 determinism runs.
const SMALL_FLAGS: [&str; 20] = [
    "--m-list", "2,3", "--n-list", "4", "--grid", "rotate", "--seeds", "0,1", "--samples", "300", "--epochs", "3",
    "--batch-size", "32", "--starts", "20", "--diag-samples", "30", "--jobs", "2",
];

struct Outcome {
    id: u8,
    pass: bool,
    detail: String,
}

fn outcome(id: u8, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn fixture() -> ContractProblem {
    let rows = [vec![0.211, 0.789], vec![0.398, 0.602], vec![0.430, 0.570], vec![0.684, 0.316]];
    let prob = delu_core::Matrix::from_rows(&rows).unwrap();
    ContractProblem::new(prob, vec![1.0, 2.1, 2.3, 4.7], vec![20.0, 1.0]).unwrap()
}

fn random_box_point(r: &mut StreamRng, m: usize, f_max: f64) -> Vec<f64> {
    (0..m).map(|_| rng::uniform(r, 0.0, f_max)).collect()
}

fn pick(r: &mut StreamRng, lo: usize, hi: usize) -> usize {
    lo + (rng::uniform(r, 0.0, (hi - lo + 1) as f64) as usize).min(hi - lo)
}

fn grid_pair(i: u64) -> (f64, f64) {
    let alphas = [0.5, 0.7, 0.9];
    let betas = [0.0, 0.3, 0.6, 0.9];
    (alphas[(i / 4 % 3) as usize], betas[(i % 4) as usize])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let p = fixture();
    let v = p.value().to_vec();
    let steps = 100_000;
    let alphas: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let actions: Vec<usize> = alphas
        .iter()
        .map(|&a| p.best_response(&Contract::scaled(&v, a).unwrap()).unwrap().action)
        .collect();
    let mut lines = Vec::new();
    let mut lo = 0;
    while lo < alphas.len() {
        let mut hi = lo;
        while hi + 1 < alphas.len() && actions[hi + 1] == actions[lo] {
            hi += 1;
        }
        if hi - lo >= 4 {
            let (a1, a2) = (alphas[lo + (hi - lo) / 4], alphas[lo + 3 * (hi - lo) / 4]);
            let u = |a: f64| p.principal_utility(&Contract::scaled(&v, a).unwrap()).unwrap();
            let slope = (u(a2) - u(a1)) / (a2 - a1);
            lines.push((slope, u(a1) - slope * a1));
        }
        lo = hi + 1;
    }
    let elapsed = start.elapsed();
    let matches = lines.len() == FIXTURE_LINES.len()
        && lines
            .iter()
            .zip(FIXTURE_LINES)
            .all(|(got, want)| (got.0 - want.0).abs() <= FIXTURE_TOL && (got.1 - want.1).abs() <= FIXTURE_TOL);
    let shown: Vec<String> = lines.iter().map(|(s, b)| format!("({s:.3}, {b:.3})")).collect();
    outcome(
        1,
        matches && elapsed < FIXTURE_BUDGET,
        format!("pieces {} in {:.3}s", shown.join(" "), elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst_gap = f64::INFINITY;
    let mut grid_checked = 0;
    let mut failures = 0;
    for i in 0..ORACLE_INSTANCES {
        let (alpha_p, beta_p) = grid_pair(i);
        let cfg = ProblemGenConfig {
            m: 2 + (i as usize) % 9,
            n: 4 + (i as usize * 7) % 29,
            alpha_p,
            beta_p,
            seed: 500 + i,
        };
        let p = ContractProblem::generate(&cfg).unwrap();
        let f_max = p.default_f_max();
        let oracle = oracle_optimal_contract(&p, f_max).unwrap();
        let mut r = rng::stream(cfg.seed, Stream::Probes, 0);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..ORACLE_RANDOM_CONTRACTS {
            best = best.max(p.principal_utility_at(&random_box_point(&mut r, cfg.m, f_max)));
        }
        if cfg.m == 2 {
            grid_checked += 1;
            for a in 0..ORACLE_GRID {
                for b in 0..ORACLE_GRID {
                    let step = f_max / (ORACLE_GRID - 1) as f64;
                    best = best.max(p.principal_utility_at(&[a as f64 * step, b as f64 * step]));
                }
            }
        }
        let gap = oracle.value - best;
        worst_gap = worst_gap.min(gap);
        if gap < -ORACLE_SLACK {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        2,
        failures == 0 && elapsed < ORACLE_BUDGET,
        format!(
            "{ORACLE_INSTANCES} instances ({grid_checked} with grid), smallest oracle margin {worst_gap:.3e}, \
             {failures} violations, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_problem(r: &mut StreamRng, seed: u64) -> ContractProblem {
    let (alpha_p, beta_p) = grid_pair(seed);
    ContractProblem::generate(&ProblemGenConfig {
        m: pick(r, 2, 6),
        n: pick(r, 2, 12),
        alpha_p,
        beta_p,
        seed,
    })
    .unwrap()
}

fn criterion_3() -> Outcome {
    let mut r = rng::stream(3, Stream::Probes, 0);

    // affine on every best-response region
    let (mut affine_trials, mut affine_fail, mut attempts) = (0, 0, 0);
    while affine_trials < LEMMA_TRIALS && attempts < 100 * LEMMA_TRIALS {
        attempts += 1;
        let p = random_problem(&mut r, 10_000 + attempts as u64);
        let f_max = p.default_f_max();
        let m = p.n_outcomes();
        let f1 = random_box_point(&mut r, m, f_max);
        let scale = f_max * 10f64.powf(rng::uniform(&mut r, -4.0, 0.0));
        let d = rng::unit_vector(&mut r, m);
        let at = |s: f64| -> Vec<f64> { f1.iter().zip(&d).map(|(x, y)| x + s * scale * y).collect() };
        let points = [at(0.0), at(0.25), at(0.5), at(1.0)];
        let responses: Vec<_> = points
            .iter()
            .map(|x| p.best_response(&Contract::clamped(x.clone())).unwrap())
            .collect();
        if points.iter().flatten().any(|&x| x < 0.0) || responses.iter().any(|b| b.action != responses[0].action) {
            continue;
        }
        affine_trials += 1;
        let u: Vec<f64> = points.iter().map(|x| p.principal_utility_at(x)).collect();
        let tol = AFFINE_TOL * u.iter().map(|x| x.abs()).fold(1.0, f64::max);
        if (u[2] - (u[0] + u[3]) / 2.0).abs() > tol || (u[1] - (3.0 * u[0] + u[3]) / 4.0).abs() > tol {
            affine_fail += 1;
        }
    }

    // agent's best utility is midpoint convex
    let mut convex_fail = 0;
    for t in 0..LEMMA_TRIALS {
        let p = random_problem(&mut r, 20_000 + t as u64);
        let f_max = p.default_f_max();
        let m = p.n_outcomes();
        let a = random_box_point(&mut r, m, f_max);
        let b = random_box_point(&mut r, m, f_max);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
        let ua = |x: &[f64]| p.best_response(&Contract::new(x.to_vec()).unwrap()).unwrap().agent_utility;
        if ua(&mid) > (ua(&a) + ua(&b)) / 2.0 + CONVEX_TOL {
            convex_fail += 1;
        }
    }

    // some constraint is tight at every oracle optimum
    let mut tight_fail = 0;
    for t in 0..LEMMA_TRIALS {
        let p = random_problem(&mut r, 30_000 + t as u64);
        let f_max = p.default_f_max();
        let o = oracle_optimal_contract(&p, f_max).unwrap();
        let f = o.contract.pay();
        let box_tight = f.iter().any(|&x| x <= TIGHT_TOL || x >= f_max - TIGHT_TOL);
        let chosen = p.agent_utility(&o.contract, o.action).unwrap();
        let ic_tight = (0..p.n_actions())
            .filter(|&j| j != o.action)
            .any(|j| p.agent_utility(&o.contract, j).unwrap() >= chosen - TIGHT_TOL);
        if !(box_tight || ic_tight) {
            tight_fail += 1;
        }
    }

    let pass = affine_trials == LEMMA_TRIALS && affine_fail == 0 && convex_fail == 0 && tight_fail == 0;
    outcome(
        3,
        pass,
        format!(
            "affine {}/{affine_trials} ok, convexity {}/{LEMMA_TRIALS} ok, tightness {}/{LEMMA_TRIALS} ok",
            affine_trials - affine_fail,
            LEMMA_TRIALS - convex_fail,
            LEMMA_TRIALS - tight_fail
        ),
    )
}

/// Network whose η biases are spread out so that the probed points see
/// many different patterns.
fn gradient_net(seed: u64) -> DeluNetwork {
    let mut net = DeluNetwork::init(3, Variant::Delu, seed).unwrap();
    let mut r = rng::stream(seed, Stream::Probes, 1);
    for b in net.eta.layers[0].bias.iter_mut() {
        *b = rng::uniform(&mut r, -3.0, 1.0);
    }
    for b in net.zeta.hidden.bias.iter_mut() {
        *b = rng::uniform(&mut r, -0.5, 0.5);
    }
    net
}

fn criterion_4() -> Outcome {
    let f_max = 10.0;
    let mut r = rng::stream(4, Stream::Probes, 0);
    let mut net = gradient_net(4);
    let mut worst = [0.0f64; 3];
    let mut checked = 0;
    let mut attempts = 0;
    while checked < GRAD_POINTS && attempts < 20 * GRAD_POINTS {
        attempts += 1;
        let x = random_box_point(&mut r, 3, f_max);
        let fwd = net.forward(&x).unwrap();
        let h = 1e-6;

        // input gradient of the network
        let analytic = net.backward(&x, 1.0).unwrap();
        let mut numeric_in = Vec::new();
        let mut same_piece = true;
        for i in 0..3 {
            let mut up = x.clone();
            let mut down = x.clone();
            up[i] += h;
            down[i] -= h;
            let (fu, fd) = (net.forward(&up).unwrap(), net.forward(&down).unwrap());
            same_piece &= fu.pattern == fwd.pattern && fd.pattern == fwd.pattern;
            numeric_in.push((fu.value - fd.value) / (2.0 * h));
        }
        if !same_piece {
            continue;
        }

        // parameter gradient: every η parameter and a sample of ζ's
        let n_eta_slices = net.eta.layers.len() * 2 + 1;
        let grads: Vec<Vec<f64>> = analytic.param_slices().iter().map(|s| s.to_vec()).collect();
        let mut wanted: Vec<(usize, usize)> = Vec::new();
        for (s, g) in grads.iter().enumerate() {
            if s < n_eta_slices {
                wanted.extend((0..g.len()).map(|k| (s, k)));
            }
        }
        let zeta_slices: Vec<usize> = (n_eta_slices..grads.len() - 1).collect();
        for _ in 0..ZETA_PARAMS_CHECKED {
            let s = zeta_slices[pick(&mut r, 0, zeta_slices.len() - 1)];
            wanted.push((s, pick(&mut r, 0, grads[s].len() - 1)));
        }
        let (mut a_par, mut n_par) = (Vec::new(), Vec::new());
        for &(s, k) in &wanted {
            let original = net.param_slices_mut()[s][k];
            let hp = 1e-6 * original.abs().max(1.0);
            net.param_slices_mut()[s][k] = original + hp;
            let up = net.forward(&x).unwrap();
            net.param_slices_mut()[s][k] = original - hp;
            let down = net.forward(&x).unwrap();
            net.param_slices_mut()[s][k] = original;
            if up.pattern != fwd.pattern || down.pattern != fwd.pattern {
                same_piece = false;
                break;
            }
            a_par.push(grads[s][k]);
            n_par.push((up.value - down.value) / (2.0 * hp));
        }
        if !same_piece {
            continue;
        }

        // barrier objective gradient inside the point's piece
        let t = 10f64.powf(rng::uniform(&mut r, 0.0, 2.0));
        let (_, bar_grad) = match barrier_value_grad(&net, &fwd.pattern, &x, t) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let mut bar_num = Vec::new();
        let hb = 1e-7;
        for i in 0..3 {
            let mut up = x.clone();
            let mut down = x.clone();
            up[i] += hb;
            down[i] -= hb;
            let (vu, _) = barrier_value_grad(&net, &fwd.pattern, &up, t).unwrap();
            let (vd, _) = barrier_value_grad(&net, &fwd.pattern, &down, t).unwrap();
            bar_num.push((vu - vd) / (2.0 * hb));
        }

        worst[0] = worst[0].max(rel_err(&analytic.input, &numeric_in));
        worst[1] = worst[1].max(rel_err(&a_par, &n_par));
        worst[2] = worst[2].max(rel_err(&bar_grad, &bar_num));
        checked += 1;
    }
    outcome(
        4,
        checked == GRAD_POINTS && worst.iter().all(|&e| e <= GRAD_REL_TOL),
        format!(
            "{checked} points, max relative error input {:.2e}, parameters {:.2e}, barrier {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn run_bench(dir: &Path, flags: &[&str], out: &str) -> (String, Duration) {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_delu"))
        .arg("bench")
        .args(flags)
        .args(["--out", out])
        .current_dir(dir)
        .env_remove("DELU_SEED")
        .status()
        .expect("bench runs");
    let elapsed = start.elapsed();
    assert!(status.success(), "bench {flags:?} exited with {status}");
    (std::fs::read_to_string(dir.join(out)).unwrap(), elapsed)
}

fn parse_rows(text: &str) -> Vec<BenchRow> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .map(Result::unwrap)
        .collect()
}

fn find<'a>(rows: &'a [BenchRow], like: &BenchRow, variant: &str, method: &str) -> &'a BenchRow {
    rows.iter()
        .find(|r| {
            (r.m, r.n, r.seed, r.alpha_p, r.beta_p) == (like.m, like.n, like.seed, like.alpha_p, like.beta_p)
                && r.variant == variant
                && r.method == method
        })
        .expect("row present")
}

fn criterion_5(rows: &[BenchRow], elapsed: Duration) -> Outcome {
    let normalized = |variant: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.variant == variant && r.method == "lp")
            .map(|r| r.normalized.unwrap_or(f64::NEG_INFINITY))
            .collect()
    };
    let (delu, relu) = (normalized("delu"), normalized("relu"));
    let cells = delu.len();
    let (md, mr) = (median(delu), median(relu));
    outcome(
        5,
        cells == 30 && md >= SUITE_MEDIAN_FLOOR && md > mr && elapsed < SUITE_BUDGET,
        format!(
            "{cells} cells, median normalized delu+lp {md:.4} (floor {SUITE_MEDIAN_FLOOR}), relu+lp {mr:.4}, {:.0}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6(rows: &[BenchRow]) -> Outcome {
    let (mut networks, mut lp_fail, mut sub_fail) = (0, 0, 0);
    for lp in rows.iter().filter(|r| r.method == "lp") {
        networks += 1;
        let grad = find(rows, lp, &lp.variant, "grad");
        let sub = find(rows, lp, &lp.variant, "subargmax");
        match (lp.model_value, grad.model_value) {
            (Some(l), Some(g)) if g <= l + DOMINANCE_TOL => {}
            _ => lp_fail += 1,
        }
        match (grad.true_utility, sub.true_utility) {
            (Some(g), Some(s)) if s >= g - BEST_SO_FAR_TOL => {}
            _ => sub_fail += 1,
        }
    }
    outcome(
        6,
        networks > 0 && lp_fail == 0 && sub_fail == 0,
        format!(
            "{networks} networks, grad above lp on {lp_fail}, sub-argmax below grad endpoint on {sub_fail}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = BarrierConfig {
        t0: 1.0,
        eps: 1e-3,
        mu: 10.0,
        ..BarrierConfig::default()
    };
    let count = barrier_round_count(ROUND_HIDDEN, &cfg);
    let net = DeluNetwork::init_with(2, &[ROUND_HIDDEN], 16, Variant::Delu, 7).unwrap();
    let mut r = rng::stream(7, Stream::Probes, 0);
    let starts: Vec<Contract> = (0..20)
        .map(|_| Contract::new(random_box_point(&mut r, 2, 5.0)).unwrap())
        .collect();
    let used = gradient_inference(&net, &starts, &cfg, 5.0).unwrap().rounds_used;
    outcome(
        7,
        count == ROUND_EXPECTED && used == count,
        format!("round count {count} (expected {ROUND_EXPECTED}), rounds executed {used}"),
    )
}

fn criterion_8(rows: &[BenchRow]) -> Outcome {
    // the network against itself
    let problem = ContractProblem::generate(&ProblemGenConfig {
        m: 2,
        n: 8,
        alpha_p: 0.7,
        beta_p: 0.3,
        seed: 8,
    })
    .unwrap();
    let f_max = problem.default_f_max();
    let data = problem.sample_training_set(2000, f_max, 8).unwrap();
    let net = DeluNetwork::init(2, Variant::Delu, 8).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let (net, _) = train(net, &data, &cfg).unwrap();
    let diag = BoundaryTestConfig {
        seed: 8,
        ..BoundaryTestConfig::default()
    };
    let (own, _) = self_alignment(&net, 500, &diag, f_max).unwrap();
    let self_ok = own.degree == 1.0 && own.true_boundary_count > 0;

    // linearity test against the exact best-response oracle on m = 2
    let per_problem = LINEARITY_POINTS / 4;
    let mut agree = 0;
    let mut flagged = 0;
    for k in 0..4u64 {
        let (alpha_p, beta_p) = grid_pair(3 * k + 1);
        let p = ContractProblem::generate(&ProblemGenConfig {
            m: 2,
            n: [4, 8, 16, 32][k as usize],
            alpha_p,
            beta_p,
            seed: 80 + k,
        })
        .unwrap();
        let f_max = p.default_f_max();
        let cfg = BoundaryTestConfig {
            seed: 80 + k,
            ..BoundaryTestConfig::default()
        };
        for (i, f) in boundary_samples(2, per_problem, f_max, cfg.seed).iter().enumerate() {
            let dirs = test_directions(&cfg, 2, i as u32);
            let h = effective_step(f, &cfg, f_max).unwrap();
            let linear_says = nonlinear_fraction(|x| p.principal_utility_at(x), f, &dirs, h, cfg.nonlinear_tol)
                > cfg.boundary_fraction;
            let exact_says = best_response_changes(&p, f, &dirs, h);
            flagged += usize::from(exact_says);
            agree += usize::from(linear_says == exact_says);
        }
    }
    let agreement = agree as f64 / LINEARITY_POINTS as f64;

    // alignment against normalized utility over the suite
    let delu_lp: Vec<&BenchRow> = rows.iter().filter(|r| r.variant == "delu" && r.method == "lp").collect();
    let degrees: Vec<f64> = delu_lp.iter().map(|r| r.alignment_degree.unwrap_or(f64::NAN)).collect();
    let utils: Vec<f64> = delu_lp.iter().map(|r| r.normalized.unwrap_or(f64::NAN)).collect();
    let rho = if degrees.iter().chain(&utils).all(|x| x.is_finite()) {
        spearman(&degrees, &utils)
    } else {
        None
    };

    outcome(
        8,
        self_ok && agreement >= LINEARITY_AGREEMENT && rho.is_some_and(|r| r > 0.0),
        format!(
            "self degree {} over {} boundary samples, linearity agreement {:.4} ({flagged} exact boundaries), \
             spearman {}",
            own.degree,
            own.true_boundary_count,
            agreement,
            rho.map_or("undefined".into(), |r| format!("{r:.4}"))
        ),
    )
}

fn without_timings(text: &str) -> (Option<RunManifest>, Vec<Vec<String>>) {
    let manifest = RunManifest::from_csv_text(text).map(|m| m.without_timings());
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let keep: Vec<usize> = (0..headers.len())
        .filter(|&i| !TIMING_COLUMNS.contains(&&headers[i]))
        .collect();
    let mut rows = vec![keep.iter().map(|&i| headers[i].to_string()).collect()];
    for record in reader.records() {
        let record = record.unwrap();
        rows.push(keep.iter().map(|&i| record[i].to_string()).collect());
    }
    (manifest, rows)
}

fn criterion_9(dir: &Path) -> Outcome {
    let (a, _) = run_bench(dir, &SMALL_FLAGS, "det.csv");
    let (b, _) = run_bench(dir, &SMALL_FLAGS, "det.csv");
    let (ma, ra) = without_timings(&a);
    let (mb, rb) = without_timings(&b);
    let differing = ra.iter().zip(&rb).filter(|(x, y)| x != y).count() + ra.len().abs_diff(rb.len());
    outcome(
        9,
        ma.is_some() && ma == mb && differing == 0,
        format!("{} rows compared, {differing} differ, manifests equal: {}", ra.len() - 1, ma == mb),
    )
}

fn main() {
    // the harness passes its own flags; nothing here takes arguments
    let dir = tempfile::TempDir::new().unwrap();
    let mut outcomes = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4()];
    let (suite, suite_time) = run_bench(dir.path(), &SUITE_FLAGS, "suite.csv");
    let rows = parse_rows(&suite);
    outcomes.push(criterion_5(&rows, suite_time));
    outcomes.push(criterion_6(&rows));
    outcomes.push(criterion_7());
    outcomes.push(criterion_8(&rows));
    outcomes.push(criterion_9(dir.path()));

    if let Ok(keep) = std::env::var("ACCEPTANCE_KEEP_CSV") {
        std::fs::write(keep, &suite).unwrap();
    }

    let mut unexpected = 0;
    for o in &outcomes {
        let known = KNOWN_SHORTFALLS.contains(&o.id);
        let note = match (o.pass, known) {
            (false, true) => " [documented shortfall]",
            (true, true) => " [passes despite being listed as a shortfall]",
            _ => "",
        };
        println!("criterion {}: {} {}{note}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass && !known {
            unexpected += 1;
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", outcomes.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
