mod common;

use proptest::prelude::*;
use tdmpc_core::certificates::{epsilon_of_tau, tau_star};
use tdmpc_core::closed_loop::*;
use tdmpc_core::gap::*;

fn brute_force(rates: &[f64]) -> Vec<f64> {
    let t = rates.len();
    (0..t).map(|k| (k..t).map(|i| rates[k..=i].iter().product::<f64>()).sum()).collect()
}

#[test]
fn equilibrium_tail_is_negligible() {
    let inst = common::pendulum(5);
    let opts = RunOptions { timing: false, repeats: 1 };
    let run = run_tdmpc(
        &inst.model,
        &inst.qp,
        &inst.cfg,
        &common::X0,
        &[0.0; 5],
        &IterationSchedule::Constant(40),
        400,
        opts,
    )
    .unwrap();
    let pv = run.path_vectors();
    let rv = eta_tilde_mpc(inst.cfg.rate(), run.ells.as_ref().unwrap()).unwrap();
    let total = path_rate_product(&pv.delta, &rv).unwrap();
    let settle = pv.delta.iter().position(|&d| d < 1e-10).expect("run settles");
    assert!(pv.delta[settle..].iter().all(|&d| d < 1e-10));
    assert!(rv.tilde[settle + 1..].iter().all(|&t| t > 0.0));
    let tail: f64 = pv.delta[settle..].iter().zip(&rv.tilde[settle + 1..]).map(|(d, t)| d * t).sum();
    assert!(tail <= 1e-8 * total, "tail {tail} of {total}");
}

#[test]
fn limit_cycle_surrogate_nulls_tail() {
    let inst = common::pendulum(5);
    let opts = RunOptions { timing: false, repeats: 1 };
    let j_bar = 10;
    let mut ells = vec![6usize; 30];
    for l in ells.iter_mut().skip(j_bar) {
        *l = 1 << 40;
    }
    let run =
        run_tdmpc(&inst.model, &inst.qp, &inst.cfg, &common::X0, &[0.0; 5], &IterationSchedule::Constant(6), 30, opts)
            .unwrap();
    let pv = run.path_vectors();
    let rv = eta_tilde_mpc(inst.cfg.rate(), &ells).unwrap();
    assert!(rv.tilde[j_bar..].iter().all(|&t| t == 0.0));
    let total = path_rate_product(&pv.delta, &rv).unwrap();
    let partial: f64 = (1..j_bar).map(|k| pv.delta[k - 1] * rv.tilde[k]).sum();
    assert_eq!(total, partial);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn recursion_matches_double_loop(rates in proptest::collection::vec(0.0f64..0.999, 1..40)) {
        let rv = eta_tilde(&rates).unwrap();
        let bf = brute_force(&rates);
        for (a, b) in rv.tilde.iter().zip(&bf) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()) * rates.len() as f64);
        }
    }

    #[test]
    fn zero_suffix_gives_zero_tail(rates in proptest::collection::vec(0.0f64..0.99, 2..30), cut in 0usize..30) {
        let cut = cut % rates.len();
        let mut rates = rates;
        for r in rates.iter_mut().skip(cut) {
            *r = 0.0;
        }
        let rv = eta_tilde(&rates).unwrap();
        prop_assert!(rv.tilde[cut..].iter().all(|&t| t == 0.0));
    }

    #[test]
    fn mixed_schedule_matches_direct_rates(eta in 0.0f64..0.999, ells in proptest::collection::vec(1usize..200, 1..30)) {
        let a = eta_tilde_mpc(eta, &ells).unwrap();
        let rates: Vec<f64> = ells.iter().map(|&l| eta.powi(l as i32)).collect();
        let b = eta_tilde(&rates).unwrap();
        for (x, y) in a.tilde.iter().zip(&b.tilde) {
            prop_assert!((x - y).abs() <= 1e-14 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn constant_rate_closed_form(eta in 0.0f64..0.99, t in 1usize..40) {
        let rv = eta_tilde(&vec![eta; t]).unwrap();
        for (k, v) in rv.tilde.iter().enumerate() {
            let closed = eta * (1.0 - eta.powi((t - k) as i32)) / (1.0 - eta);
            prop_assert!((v - closed).abs() <= 1e-13 * (1.0 + closed));
        }
    }

    #[test]
    fn complexity_dominates_inner_product(eta in 0.0f64..0.99, delta in proptest::collection::vec(0.0f64..3.0, 1..30)) {
        let rv = eta_tilde(&vec![eta; delta.len() + 1]).unwrap();
        let s_t: f64 = delta.iter().sum();
        let inner = path_rate_product(&delta, &rv).unwrap();
        prop_assert!(inner <= constant_rate_complexity(eta, s_t, 0.0).unwrap() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn tau_star_is_optimal_and_balanced(beta in 0.05f64..0.99, kappa in 0.01f64..5.0, sigma in 0.01f64..5.0, omega in 1.0f64..5.0, e in 1e-6f64..0.9, probes in proptest::collection::vec(1e-3f64..1e3, 100)) {
        let t = tau_star(beta, kappa, sigma, omega, e);
        prop_assert!(t.tau > 0.0 && t.tau.is_finite());
        let a = kappa * e * t.tau * t.tau + (beta - omega * e) * t.tau - sigma;
        prop_assert!(a.abs() <= 1e-10 * (1.0 + sigma + t.tau * t.tau));
        for p in probes {
            prop_assert!(t.epsilon <= epsilon_of_tau(beta, kappa, sigma, omega, e, p) * (1.0 + 1e-12));
        }
    }
}
