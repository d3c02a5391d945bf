mod common;

use approx::assert_relative_eq;
use common::ChainSolution;
use fogscale_core::analytics::{
    class_delays, class_utilizations, full_report, mean_tasks, steady_state_p0,
    wait_probability, ClassMix, QueueParameters,
};
use proptest::prelude::*;

fn q(lambda: f64, m: u32) -> QueueParameters {
    QueueParameters::new(lambda, 1.0, m).unwrap()
}

#[test]
fn closed_forms_match_truncated_chain() {
    for m in 1..=25u32 {
        for rho in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let lambda = rho * f64::from(m);
            let chain = ChainSolution::solve(lambda, 1.0, m as usize, 1e-14);
            let p = q(lambda, m);
            let ctx = format!("m={m} rho={rho}");
            assert!((steady_state_p0(&p).unwrap() - chain.p0()).abs() < 1e-9, "{ctx}");
            assert!((wait_probability(&p).unwrap() - chain.p_wait()).abs() < 1e-9, "{ctx}");
            assert!((mean_tasks(&p).unwrap() - chain.mean_tasks()).abs() < 1e-9, "{ctx}");
        }
    }
}

#[test]
fn chain_oracle_worked_points() {
    let chain = ChainSolution::solve(1.0, 1.0, 2, 1e-14);
    assert_relative_eq!(chain.p0(), 1.0 / 3.0, epsilon = 1e-12);
    let chain = ChainSolution::solve(14.0, 1.0, 20, 1e-14);
    assert_relative_eq!(chain.p_wait(), 0.0936, epsilon = 1e-4);
    let chain = ChainSolution::solve(10.0, 1.0, 15, 1e-14);
    assert_relative_eq!(chain.p0(), steady_state_p0(&q(10.0, 15)).unwrap(), max_relative = 1e-9);
    assert_relative_eq!(chain.mean_tasks(), mean_tasks(&q(10.0, 15)).unwrap(), epsilon = 1e-9);
}

#[test]
fn w1_and_w2_fall_as_nodes_are_added() {
    let mix = ClassMix::new(0.2, 0.1, true).unwrap();
    for lambda in [1.0, 5.0, 10.0, 14.0] {
        let first = (lambda as u32) + 1;
        let mut last = (f64::INFINITY, f64::INFINITY);
        for m in first..=40 {
            let r = full_report(&q(lambda, m), &mix).unwrap();
            assert!(r.w1 <= last.0 && r.w2 <= last.1, "lambda={lambda} m={m}");
            last = (r.w1, r.w2);
        }
    }
}

proptest! {
    #[test]
    fn single_server_reduces_to_mm1(rho in 0.001f64..0.999) {
        let p = q(rho, 1);
        prop_assert!((steady_state_p0(&p).unwrap() - (1.0 - rho)).abs() < 1e-12);
        prop_assert!((wait_probability(&p).unwrap() - rho).abs() < 1e-12);
        let k = rho / (1.0 - rho);
        prop_assert!((mean_tasks(&p).unwrap() - k).abs() <= 1e-12 * k.max(1.0));
    }

    #[test]
    fn class_split_conserves_load(
        rho in 0.0f64..0.99,
        alpha in 0.0f64..1.0,
        beta_share in 0.0f64..1.0,
        sct in any::<bool>(),
    ) {
        let beta = (1.0 - alpha) * beta_share;
        let mix = ClassMix::new(alpha, beta, sct).unwrap();
        let u = class_utilizations(rho, &mix).unwrap();
        prop_assert!(u.rho1 >= 0.0 && u.rho2 >= -1e-15);
        prop_assert!((u.rho1 + u.rho2 - rho).abs() <= 1e-12);
    }

    #[test]
    fn class_one_never_waits_longer(
        m in 1u32..40,
        rho in 0.01f64..0.98,
        alpha in 0.0f64..1.0,
        beta_share in 0.0f64..1.0,
        sct in any::<bool>(),
    ) {
        let beta = (1.0 - alpha) * beta_share;
        let mix = ClassMix::new(alpha, beta, sct).unwrap();
        let r = full_report(&q(rho * f64::from(m), m), &mix).unwrap();
        prop_assert!(r.w1 <= r.w2);
        if r.utilization.rho2 > 1e-9 {
            prop_assert!(r.w1 < r.w2);
        }
        prop_assert!(r.p0 > 0.0 && r.p0 <= 1.0);
        prop_assert!(r.p_wait >= 0.0 && r.p_wait < 1.0);
        prop_assert!(r.mean_tasks >= f64::from(m) * rho - 1e-12);
        let (w1, w2) = class_delays(r.residual, &r.utilization).unwrap();
        prop_assert_eq!((w1, w2), (r.w1, r.w2));
    }
}

#[test]
fn no_overflow_at_five_hundred_servers() {
    let r = full_report(&q(495.0, 500), &ClassMix::new(0.2, 0.1, false).unwrap()).unwrap();
    assert!(r.p0 > 0.0 && r.p_wait.is_finite() && r.w2.is_finite());
    let chain = ChainSolution::solve(495.0, 1.0, 500, 1e-14);
    assert_relative_eq!(r.p_wait, chain.p_wait(), epsilon = 1e-9);
}
