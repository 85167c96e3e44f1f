//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Tolerances are pinned below.

use std::path::Path;
use std::time::{Duration, Instant};

use glm_bandit::design::DesignState;
use glm_bandit::environment::{ContextDistribution, NoiseModel};
use glm_bandit::harness::{run_experiment, run_replication, simulate, Algorithm, ExperimentConfig, Variant};
use glm_bandit::linalg::identity_residual;
use glm_bandit::mle::MleOptions;
use glm_bandit::policy::{StageAssignment, SupCbGlm};
use glm_bandit::validation::{
    lemma3_width_sum_check, lemma4_event_coverage, probe_directions, proposition1_growth,
    theorem1_coverage, ucb_glm_trajectories, SampleSpec, UcbTrajectory,
};
use glm_bandit::{
    mle_fit, Environment, LinkFunction, Observation, Purpose, SeedStreams,
};
use nalgebra::{DMatrix, DVector};

const MLE_ORACLE_TOL: f64 = 1e-6;
const MLE_BUDGET: Duration = Duration::from_secs(30);
const SM_TOL: f64 = 1e-8;
const THEOREM1_BUDGET: Duration = Duration::from_secs(300);
const REGRET_BUDGET: Duration = Duration::from_secs(600);
const SE_SLACK: f64 = 3.0;
const SUPCB_BAND: f64 = 3.0;
const GROWTH_BAND: (f64, f64) = (0.18, 0.22);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json, Path::new("acceptance")).expect("valid config")
}

/// Plain gradient ascent on the logistic log-likelihood with step
/// `1/(L_μ·λ_max(V))`, which never overshoots.
fn gradient_ascent_oracle(obs: &[Observation], d: usize) -> DVector<f64> {
    let mut v = DMatrix::zeros(d, d);
    for o in obs {
        v += o.x.as_vector() * o.x.as_vector().transpose();
    }
    let lmax = v.symmetric_eigenvalues().max();
    let step = 1.0 / (0.25 * lmax);
    let mut theta = DVector::zeros(d);
    for _ in 0..2_000_000 {
        let mut g = DVector::zeros(d);
        for o in obs {
            let z = o.x.dot(&theta);
            g += o.x.as_vector() * (o.y - 1.0 / (1.0 + (-z).exp()));
        }
        if g.amax() < 1e-11 {
            break;
        }
        theta += g * step;
    }
    theta
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for inst in 0..100u64 {
        let seeds = SeedStreams::new(1001, inst);
        let mut rng = seeds.stream(Purpose::Validation);
        use rand::Rng;
        let d = rng.random_range(1..=5);
        let n = rng.random_range(100..=200);
        let theta_star = ContextDistribution::Sphere.sample(d, 0, &mut rng);
        let mut obs = Vec::with_capacity(n);
        for _ in 0..n {
            let x = ContextDistribution::UniformBall.sample(d, 0, &mut rng);
            let p = LinkFunction::Logistic.eval(x.dot(theta_star.as_vector()));
            let y = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
            obs.push(Observation { x, y });
        }
        let newton = mle_fit(LinkFunction::Logistic, &obs, &DVector::zeros(d), &MleOptions::default())
            .and_then(|f| f.require_converged());
        let oracle = gradient_ascent_oracle(&obs, d);
        match newton {
            Ok(f) => worst = worst.max((f.theta_hat - oracle).amax()),
            Err(_) => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && worst <= MLE_ORACLE_TOL && elapsed < MLE_BUDGET,
        format!(
            "max ℓ∞ gap {worst:.2e} (tol {MLE_ORACLE_TOL:.0e}), {failures} nonconvergent, {:.1}s (budget {}s)",
            elapsed.as_secs_f64(),
            MLE_BUDGET.as_secs()
        ),
    )
}

fn criterion2() -> Outcome {
    let d = 10;
    let mut rng = SeedStreams::new(2002, 0).stream(Purpose::Contexts);
    let mut design = DesignState::new(d);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        design.rank_one_update(ContextDistribution::UniformBall.sample(d, 0, &mut rng), 0.0);
        if let Some(inv) = design.inverse() {
            worst = worst.max(identity_residual(design.gram(), inv));
        }
    }
    // Drift injection: corrupt the inverse, then keep updating until the
    // next scheduled refactorization.
    design.perturb_inverse(1e-3);
    let drifted = identity_residual(design.gram(), design.inverse().unwrap());
    let mut recovered_after = None;
    for i in 1..=1000 {
        design.rank_one_update(ContextDistribution::UniformBall.sample(d, 0, &mut rng), 0.0);
        if identity_residual(design.gram(), design.inverse().unwrap()) <= SM_TOL {
            recovered_after = Some(i);
            break;
        }
    }
    outcome(
        worst <= SM_TOL && drifted > SM_TOL && recovered_after.is_some(),
        format!(
            "max ‖V·V⁻¹ − I‖∞ over 10⁴ updates {worst:.2e} (tol {SM_TOL:.0e}); injected drift {drifted:.2e} cleared after {recovered_after:?} updates"
        ),
    )
}

fn criterion3() -> Outcome {
    let start = Instant::now();
    let spec = SampleSpec {
        link: LinkFunction::Identity,
        d: 3,
        n: 2000,
        noise: NoiseModel::Gaussian { sigma: 0.1 },
        theta_star: vec![0.6, -0.3, 0.2],
        contexts: ContextDistribution::UniformBall,
        delta: 0.05,
        replications: 1000,
        master_seed: 3003,
    };
    let dirs = probe_directions(3, 100, spec.master_seed);
    let r = theorem1_coverage(&spec, &dirs, 1).expect("theorem1 run");
    let c = &r.coverage;
    let floor = c.nominal - SE_SLACK * c.binomial_stderr;
    let elapsed = start.elapsed();
    outcome(
        c.empirical_coverage >= floor && elapsed < THEOREM1_BUDGET && c.replications == 1000,
        format!(
            "coverage {:.4} ({}/{}) vs floor {floor:.4}, {} directions, condition met in {}, {:.1}s",
            c.empirical_coverage,
            c.hits,
            c.replications,
            r.directions,
            c.condition_met_replications,
            elapsed.as_secs_f64()
        ),
    )
}

fn lemma4_trajectories() -> Vec<UcbTrajectory> {
    let cfg = config(r#"{"d": 3, "k": 5, "horizon": 2000, "delta": 0.05, "replications": 200, "master_seed": 4004}"#);
    let tuning = Variant::new(Algorithm::UcbGlm, cfg.clone()).tuning().unwrap();
    let c = tuning.constants;
    ucb_glm_trajectories(
        &cfg.environment().unwrap(),
        tuning.policy.as_ref().unwrap(),
        cfg.replications,
        cfg.master_seed,
        (c.sigma, c.kappa, cfg.delta),
        1,
    )
    .expect("lemma4 runs")
}

fn criterion4(trajs: &[UcbTrajectory]) -> Outcome {
    let r = lemma4_event_coverage(trajs, 0.05);
    let floor = r.nominal - SE_SLACK * r.binomial_stderr;
    outcome(
        r.empirical_coverage >= floor && r.replications == 200,
        format!(
            "all-t coverage {:.4} ({}/{}) vs floor {floor:.4}, max ‖Δ_t‖/radius {:.3}",
            r.empirical_coverage,
            r.hits,
            r.replications,
            trajs.iter().map(|t| t.max_delta_ratio).fold(0.0, f64::max)
        ),
    )
}

fn criterion5(trajs: &[UcbTrajectory]) -> Outcome {
    let reports: Vec<_> = trajs.iter().map(|t| lemma3_width_sum_check(&t.played, t.tau)).collect();
    let checked = reports.iter().filter(|r| r.applicable).count();
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let max_ratio = reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    outcome(
        checked >= 50 && violations == 0,
        format!("{checked} runs checked at every n, {violations} violations, max sum/bound {max_ratio:.3}"),
    )
}

fn criterion6() -> Outcome {
    let start = Instant::now();
    let cfg = config(
        r#"{"d": 5, "k": 10, "horizon": 10000, "replications": 20, "master_seed": 6006,
            "algorithms": ["ucb_glm", "uniform_random"], "record_every": 1000}"#,
    );
    let r = run_experiment(&cfg, 1).expect("regret run");
    let ucb = r.variant("ucb_glm").unwrap();
    let uni = r.variant("uniform_random").unwrap();
    let p = ucb.tuning.policy.as_ref().unwrap();
    let c = ucb.tuning.constants;
    let rt = ucb.mean_regret_at(10_000).unwrap();
    let r1k = ucb.mean_regret_at(1_000).unwrap();
    let (t, d) = (10_000f64, 5f64);
    let bound = p.tau as f64 + 2.0 * c.lipschitz * c.sigma * d / c.kappa * (t / (d * cfg.delta)).ln() * t.sqrt();
    let a = rt / t < 0.5 * (r1k / 1000.0);
    let b = rt < uni.mean_final_regret() / 3.0;
    let cc = rt < bound;
    let elapsed = start.elapsed();
    outcome(
        a && b && cc && elapsed < REGRET_BUDGET,
        format!(
            "α = {:.2}, τ = {}: (a) R_T/T {:.4} vs R_1000/1000 {:.4} [{}]; (b) R_T {rt:.1} vs uniform {:.1} [{}]; (c) bound {bound:.0} [{}]; {:.0}s",
            p.alpha,
            p.tau,
            rt / t,
            r1k / 1000.0,
            pass_word(a),
            uni.mean_final_regret(),
            pass_word(b),
            pass_word(cc),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion7() -> Outcome {
    let cfg = config(
        r#"{"d": 3, "k": 5, "horizon": 5000, "replications": 20, "master_seed": 7007,
            "link": "identity", "sigma": 0.1, "record_every": 5000}"#,
    );
    let sup = Variant::new(Algorithm::SupcbGlm, cfg.clone());
    let sup_t = sup.tuning().unwrap();
    let ucb = Variant::new(Algorithm::UcbGlm, cfg.clone());
    let ucb_t = ucb.tuning().unwrap();
    let mut partition_failures = 0;
    let mut width_failures = 0;
    let (mut sup_sum, mut ucb_sum) = (0.0, 0.0);
    for rep in 0..cfg.replications {
        let seeds = SeedStreams::new(cfg.master_seed, rep as u64);
        let mut env = Environment::new(cfg.environment().unwrap(), &seeds).unwrap();
        let mut policy = SupCbGlm::new(sup_t.policy.clone().unwrap()).unwrap();
        let mut rng = seeds.stream(Purpose::Policy);
        let trace = simulate(&mut env, &mut policy, cfg.horizon, cfg.record_every, &mut rng, |t, p: &SupCbGlm, d, _| {
            if !p.partition().covers_exactly(t) {
                partition_failures += 1;
            }
            // A round that joined Ψ_s for s ≥ 1 must have had width above 2^{-s}.
            if let (Some(StageAssignment::Stage(s)), Some(w)) = (d.assignment, d.width) {
                if s >= 1 && w <= 0.5f64.powi(s as i32) {
                    width_failures += 1;
                }
            }
        })
        .expect("supcb run");
        sup_sum += trace.final_regret;
        ucb_sum += run_replication(&ucb, &ucb_t, rep).expect("ucb run").final_regret;
    }
    let n = cfg.replications as f64;
    let (sup_mean, ucb_mean) = (sup_sum / n, ucb_sum / n);
    let ratio = sup_mean / ucb_mean;
    outcome(
        partition_failures == 0 && width_failures == 0 && ratio <= SUPCB_BAND && ratio >= 1.0 / SUPCB_BAND,
        format!(
            "partition violations {partition_failures}, stage-width violations {width_failures} over 20×5000 rounds; SupCB-GLM R_T {sup_mean:.1} (α {:.2}) vs UCB-GLM {ucb_mean:.1} (α {:.2}), ratio {ratio:.2} (band {SUPCB_BAND}×)",
            sup_t.policy.as_ref().unwrap().alpha,
            ucb_t.policy.as_ref().unwrap().alpha
        ),
    )
}

fn criterion8() -> Outcome {
    let r = proposition1_growth(&ContextDistribution::UniformBall, 3, &[10_000], 100, 8008, 1)
        .expect("growth run");
    let m = r.points[0].ratio.unwrap().median;
    outcome(
        m >= GROWTH_BAND.0 && m <= GROWTH_BAND.1,
        format!("median λ_min(V_n)/n = {m:.4} (band [{}, {}])", GROWTH_BAND.0, GROWTH_BAND.1),
    )
}

fn criterion9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("spec.json");
    std::fs::write(
        &cfg_path,
        r#"{"d": 3, "k": 5, "horizon": 600, "replications": 8, "master_seed": 9009,
            "algorithms": ["ucb_glm", "supcb_glm", "epsilon_greedy", "uniform_random"],
            "tau": 40, "record_every": 7}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let out = dir.path().join(format!("w{workers}"));
        let code = glm_bandit::cli::cli_main(
            [
                "glm-bandit",
                "--workers",
                workers,
                "run",
                "--config",
                cfg_path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            &mut std::io::sink(),
            &mut std::io::stderr(),
        );
        assert_eq!(code, 0);
        let mut files: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let contents: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
            .collect();
        outputs.push(contents);
    }
    let csv_count = outputs[0].len();
    let identical = outputs[0] == outputs[1];
    outcome(
        identical && csv_count == 1 + 4 * 8,
        format!("{csv_count} CSV files byte-identical at 1 and 8 workers: {identical}"),
    )
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!(
            "{} criterion {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((name, o));
    };
    run("1 (MLE vs gradient-ascent oracle)", &mut criterion1);
    run("2 (Sherman-Morrison consistency)", &mut criterion2);
    run("3 (per-direction MLE bound coverage)", &mut criterion3);
    let t0 = Instant::now();
    let trajs = lemma4_trajectories();
    let sim_secs = t0.elapsed().as_secs_f64();
    run("4 (all-t estimation error event)", &mut || {
        let mut o = criterion4(&trajs);
        o.detail.push_str(&format!(", 200 runs simulated in {sim_secs:.1}s"));
        o
    });
    run("5 (width-sum inequality)", &mut || criterion5(&trajs));
    run("6 (sublinear UCB-GLM regret)", &mut criterion6);
    run("7 (SupCB-GLM partition and regret band)", &mut criterion7);
    run("8 (λ_min linear growth)", &mut criterion8);
    run("9 (determinism across worker counts)", &mut criterion9);
    let failed: Vec<_> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
