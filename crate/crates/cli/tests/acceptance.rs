//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Run with `cargo test -p fogscale-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::ChainSolution;
use fogscale_cli::cmd_simulate;
use fogscale_cli::scenario::{PointEntry, ScenarioFile};
use fogscale_core::analytics::{mean_tasks, steady_state_p0, wait_probability, ClassMix, QueueParameters};
use fogscale_core::controller::{
    class1_wait, controller_step, evaluate_sct_placement, ScalingPolicy, ScalingState,
};
use fogscale_core::harness::{
    default_validation_grid, find_sct_switch, power_consumption, run_sweep,
    validate_against_des, Metric, Scenario, Scheme, ValidationSettings,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (elapsed < limit, format!("{:.3}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()))
}

fn ac1_baseline_power() -> Outcome {
    let t = Instant::now();
    let base = run_sweep(Scheme::Baseline, &Scenario::table1()).unwrap();
    let p = power_consumption(&base, None).unwrap();
    let (fast, time) = within(t.elapsed(), Duration::from_secs(1));
    outcome(
        p.total_power == 252.0 && fast,
        format!("baseline total {}P, expected exactly 252P; {time}", p.total_power),
    )
}

fn ac2_scalable_power() -> Outcome {
    let t = Instant::now();
    let s = Scenario::table1();
    let base = run_sweep(Scheme::Baseline, &s).unwrap();
    let prop = run_sweep(Scheme::Proposed, &s).unwrap();
    let p = power_consumption(&prop, Some(&base)).unwrap();
    let (fast, time) = within(t.elapsed(), Duration::from_secs(1));
    let reduction = p.reduction_percent.unwrap();
    let total_ok = (p.total_power - 220.0).abs() <= 0.05 * 220.0;
    let reduction_ok = (reduction - 14.5).abs() <= 2.0;
    let trace: Vec<String> = prop
        .points
        .iter()
        .map(|q| format!("{}:{}", q.lambda, q.chosen_m))
        .collect();
    outcome(
        total_ok && reduction_ok && fast,
        format!(
            "proposed {}P (220P +/- 5%), reduction {reduction:.2}% (14.5 +/- 2 pp; {:.2}% of baseline), nodes [{}]; {time}",
            p.total_power,
            p.baseline_share_saved_percent.unwrap(),
            trace.join(" ")
        ),
    )
}

fn ac3_threshold_compliance() -> Outcome {
    let t = Instant::now();
    let s = Scenario::table1();
    let prop = run_sweep(Scheme::Proposed, &s).unwrap();
    let prio = run_sweep(Scheme::PriorityOnly, &s).unwrap();
    let base = run_sweep(Scheme::Baseline, &s).unwrap();
    let (fast, time) = within(t.elapsed(), Duration::from_secs(1));
    let worst = prop
        .points
        .iter()
        .map(|p| p.w1.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let compliant = worst <= 0.01;
    let ordered = prio
        .points
        .iter()
        .zip(&base.points)
        .all(|(p, b)| matches!((p.w1, b.w1), (Some(x), Some(y)) if x <= y));
    outcome(
        compliant && ordered && fast,
        format!(
            "max proposed W1 {worst:.6}s <= 0.01s: {compliant}; priority-only W1 <= baseline everywhere: {ordered}; {time}"
        ),
    )
}

fn ac4_sct_switch() -> Outcome {
    let s = Scenario::table1();
    let prop = run_sweep(Scheme::Proposed, &s).unwrap();
    let Some(lambda) = find_sct_switch(&prop).unwrap() else {
        return outcome(false, "no SCT switch in the sweep");
    };
    let i = prop.points.iter().position(|p| p.lambda == lambda).unwrap();
    if i == 0 {
        return outcome(false, "switch at the first point; no preceding load to compare");
    }
    let before = prop.points[i - 1].w2.unwrap();
    let at = prop.points[i].w2.unwrap();
    let fires = evaluate_sct_placement(at, &s.policy);
    outcome(
        before < 0.02 && fires,
        format!("lambda* = {lambda}; W2 at previous point {before:.6}s < 0.02s, W2 at lambda* {at:.6}s, rule fires: {fires}"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng) -> (f64, ScalingPolicy, ScalingState, ClassMix) {
    let m_min = rng.random_range(1..20u32);
    let m_max = m_min + rng.random_range(0..15u32);
    let policy = ScalingPolicy {
        m_min,
        m_max,
        w1_threshold: rng.random_range(0.001..0.5),
        w_sct_threshold: rng.random_range(0.001..0.5),
        pool_size: m_max + rng.random_range(0..3u32),
    };
    let lambda = rng.random_range(0.05..1.2) * f64::from(m_max);
    let state = ScalingState {
        current_m: rng.random_range(m_min..=m_max),
        sct_in_class1: rng.random(),
        effective_m_max: m_max,
    };
    let alpha = rng.random_range(0.0..0.8);
    let beta = rng.random_range(0.0..0.2);
    (lambda, policy, state, ClassMix::new(alpha, beta, false).unwrap())
}

fn minimal(
    lambda: f64,
    mu: f64,
    m: u32,
    placed: &ClassMix,
    policy: &ScalingPolicy,
) -> bool {
    class1_wait(lambda, mu, m, placed) <= policy.w1_threshold
        && (m == policy.m_min || class1_wait(lambda, mu, m - 1, placed) > policy.w1_threshold)
}

fn ac5_controller_minimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut violations = Vec::new();
    for i in 0..200 {
        let (lambda, policy, state, mix) = random_instance(&mut rng);
        let (_, d) = controller_step(state, lambda, 1.0, &mix, &policy).unwrap();
        if d.feasible {
            checked += 1;
            let placed = mix.with_sct_in_class1(d.evaluated_sct_in_class1);
            if !minimal(lambda, 1.0, d.chosen_m, &placed, &policy) {
                violations.push(format!("random #{i}"));
            }
        }
    }
    let s = Scenario::table1();
    let mut state = ScalingState::initial(s.m_init, &s.policy).unwrap();
    for &lambda in &s.lambdas {
        let (next, d) = controller_step(state, lambda, s.service_rate, &s.mix, &s.policy).unwrap();
        if d.feasible {
            checked += 1;
            let placed = s.mix.with_sct_in_class1(d.evaluated_sct_in_class1);
            if !minimal(lambda, s.service_rate, d.chosen_m, &placed, &s.policy) {
                violations.push(format!("table1 lambda={lambda}"));
            }
        }
        state = next;
    }
    outcome(
        violations.is_empty() && checked > 0,
        format!("{checked} feasible decisions checked, violations: {violations:?}"),
    )
}

fn ac6_chain_oracle() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for m in 1..=25u32 {
        for rho in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let lambda = rho * f64::from(m);
            let chain = ChainSolution::solve(lambda, 1.0, m as usize, 1e-13);
            let p = QueueParameters::new(lambda, 1.0, m).unwrap();
            worst = worst
                .max((steady_state_p0(&p).unwrap() - chain.p0()).abs())
                .max((wait_probability(&p).unwrap() - chain.p_wait()).abs())
                .max((mean_tasks(&p).unwrap() - chain.mean_tasks()).abs());
        }
    }
    let (fast, time) = within(t.elapsed(), Duration::from_secs(30));
    outcome(
        worst <= 1e-9 && fast,
        format!("max |closed form - chain| over 125 cases = {worst:.3e} (tol 1e-9); {time}"),
    )
}

fn ac7_and_8_des() -> (Outcome, Outcome) {
    let t = Instant::now();
    let grid = default_validation_grid();
    let settings = ValidationSettings::default();
    let report = validate_against_des(&grid, &settings).unwrap();
    let (fast, time) = within(t.elapsed(), Duration::from_secs(300));

    let mut delay_fail = Vec::new();
    let mut little_fail = Vec::new();
    for pv in &report.points {
        let label = format!("lambda={} m={}", pv.point.lambda, pv.point.m);
        for metric in [Metric::W1, Metric::W2] {
            match pv.check(metric) {
                Some(c) if c.pass => {}
                Some(c) => delay_fail.push(format!(
                    "{label} {}: analytic {:.6} sim {:.6} se {:.2e}",
                    metric.name(),
                    c.analytic,
                    c.simulated,
                    c.std_error
                )),
                None => delay_fail.push(format!("{label} {}: missing", metric.name())),
            }
        }
        match pv.check(Metric::LittlesLaw) {
            Some(c) if (c.simulated).abs() <= 3.0 * c.std_error => {}
            Some(c) => little_fail.push(format!("{label}: gap {:.3e} se {:.2e}", c.simulated, c.std_error)),
            None => little_fail.push(format!("{label}: missing")),
        }
    }
    let ac7 = outcome(
        delay_fail.is_empty() && fast && report.points.len() == 10,
        format!(
            "{} points, {} reps x {} tasks, max(5% rel, 3 SE); failures {:?}; {time}",
            report.points.len(),
            settings.replications,
            settings.measured_tasks,
            delay_fail
        ),
    );
    let ac8 = outcome(
        little_fail.is_empty(),
        format!("L = lambda * S within 3 SE at all {} runs; failures {little_fail:?}", report.points.len()),
    );
    (ac7, ac8)
}

fn ac9_mm1_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho: f64 = rng.random_range(0.0001..0.9999);
        let p = QueueParameters::new(rho, 1.0, 1).unwrap();
        let k = rho / (1.0 - rho);
        worst = worst
            .max((steady_state_p0(&p).unwrap() - (1.0 - rho)).abs())
            .max((wait_probability(&p).unwrap() - rho).abs())
            .max((mean_tasks(&p).unwrap() - k).abs() / k.max(1.0));
    }
    outcome(worst <= 1e-12, format!("max deviation over 100 random rho = {worst:.3e} (tol 1e-12)"))
}

fn ac10_reproducible_simulate() -> Outcome {
    let file = ScenarioFile {
        replications: 4,
        tasks_per_replication: 10_000,
        validation_points: vec![
            PointEntry {
                lambda: 1.0,
                m: 2,
                mu: 1.0,
                alpha: 0.2,
                beta: 0.0,
                sct_in_class1: false,
            },
            PointEntry {
                lambda: 10.0,
                m: 15,
                mu: 1.0,
                alpha: 0.2,
                beta: 0.1,
                sct_in_class1: true,
            },
        ],
        seed: 42,
        ..ScenarioFile::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut sink = Vec::new();
    let ra = cmd_simulate(&file, a.path(), &mut sink);
    let rb = cmd_simulate(&file, b.path(), &mut sink);
    let mut same = ra == rb;
    for name in ["validation.csv", "manifest.toml"] {
        let x = fs::read(a.path().join(name));
        let y = fs::read(b.path().join(name));
        same &= matches!((&x, &y), (Ok(x), Ok(y)) if x == y);
    }
    outcome(same, "two cmd_simulate runs (seed 42) produce byte-identical validation.csv and manifest")
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("AC1 baseline power exactness", ac1_baseline_power()),
        ("AC2 scalable power", ac2_scalable_power()),
        ("AC3 threshold compliance", ac3_threshold_compliance()),
        ("AC4 SCT switching", ac4_sct_switch()),
        ("AC5 controller minimality", ac5_controller_minimality()),
        ("AC6 closed form vs chain oracle", ac6_chain_oracle()),
    ];
    let (ac7, ac8) = ac7_and_8_des();
    results.push(("AC7 DES vs analytics", ac7));
    results.push(("AC8 Little's law", ac8));
    results.push(("AC9 M/M/1 reduction", ac9_mm1_reduction()));
    results.push(("AC10 reproducibility", ac10_reproducible_simulate()));

    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
