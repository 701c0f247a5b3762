use klmdp::chains::{ergodicity_report, invariant_distribution, span_seminorm};
use klmdp::eval::{best_in_hindsight, monte_carlo, sample_policy_pool, steady_state_comparator_cost};
use klmdp::online::{make_schedule, run_episode, OnlineConfig, ReplayStream};
use klmdp::policy::{optimal_policy, steady_state_cost, twisted_kernel};
use klmdp::spectral::{acoe_residual, solve_mpe, solve_mpe_log_domain};
use klmdp::world::{build_passive, grid_graph, make_tracking_env};
use klmdp::{Cost, Cost32, ExperimentSettings, Kernel, Kernel32, SolverSettings};
use proptest::prelude::*;

/// Irreducible aperiodic kernels on 2..=6 states with some zero entries.
fn ergodic_kernel() -> impl Strategy<Value = Kernel> {
    (2usize..=6)
        .prop_flat_map(|n| prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], n), n))
        .prop_filter_map("not ergodic", |rows| {
            let p = Kernel::new_renormalized(rows).ok()?;
            let r = ergodicity_report(&p);
            (r.irreducible && r.aperiodic).then_some(p)
        })
}

fn kernel_and_cost() -> impl Strategy<Value = (Kernel, Cost)> {
    ergodic_kernel().prop_flat_map(|p| {
        let n = p.n();
        (Just(p), prop::collection::vec(0.0f64..1.0, n).prop_map(|v| Cost::new(v).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solution_is_certified((p, f) in kernel_and_cost()) {
        let sol = solve_mpe(&p, &f, &SolverSettings::default()).unwrap();
        let (lo, hi) = sol.bracket;
        prop_assert!(lo <= hi);
        prop_assert!(-hi.ln() <= sol.lambda + 1e-12 && sol.lambda <= -lo.ln() + 1e-12);
        prop_assert_eq!(sol.h[0], 0.0);
        prop_assert!(acoe_residual(&p, &f, &sol).unwrap() <= 1e-8);
        let logd = solve_mpe_log_domain(&p, &f, &SolverSettings::default()).unwrap();
        prop_assert!((logd.lambda - sol.lambda).abs() <= 1e-9);
        prop_assert!(f.values().iter().cloned().fold(f64::INFINITY, f64::min) <= sol.lambda + 1e-12);
        prop_assert!(sol.lambda <= f.max() + 1e-12);
    }

    #[test]
    fn twisted_kernels_keep_support((p, f) in kernel_and_cost(), shift in -5.0f64..5.0) {
        let phi: Vec<f64> = f.values().iter().map(|v| 3.0 * v).collect();
        let a = twisted_kernel(&p, &phi).unwrap();
        for x in 0..p.n() {
            prop_assert_eq!(a.kernel().support(x), p.support(x));
            prop_assert!(a.control_cost()[x].finite().is_some());
        }
        let shifted: Vec<f64> = phi.iter().map(|v| v + shift).collect();
        let b = twisted_kernel(&p, &shifted).unwrap();
        for (u, v) in a.kernel().rows().flatten().zip(b.kernel().rows().flatten()) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn invariant_distribution_is_stationary(p in ergodic_kernel()) {
        let pi = invariant_distribution(&p).unwrap();
        let next = pi.propagate(&p).unwrap();
        for (a, b) in pi.weights().iter().zip(next.weights()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn optimal_policy_attains_lambda((p, f) in kernel_and_cost()) {
        let (sol, pol) = optimal_policy(&p, &f, &SolverSettings::default()).unwrap();
        prop_assert!((steady_state_cost(&f, &pol).unwrap() - sol.lambda).abs() <= 1e-8);
    }

    #[test]
    fn schedule_invariants(eps in 0.001f64..0.333, horizon in 1usize..5000) {
        let s = make_schedule(eps, horizon).unwrap();
        prop_assert!(*s.tau_cum.last().unwrap() >= horizon);
        prop_assert!(s.tau.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((s.complete_phases() as f64) <= s.phase_count_bound());
        let mut acc = 0;
        for (t, c) in s.tau.iter().zip(&s.tau_cum) {
            acc += t;
            prop_assert_eq!(acc, *c);
        }
    }

    #[test]
    fn f32_tracks_f64((p, f) in kernel_and_cost()) {
        let sol = solve_mpe(&p, &f, &SolverSettings::default()).unwrap();
        let p32 = Kernel32::new_renormalized(
            p.to_rows().into_iter().map(|r| r.into_iter().map(|v| v as f32).collect()).collect(),
        ).unwrap();
        let f32c = Cost32::new(f.values().iter().map(|&v| v as f32).collect()).unwrap();
        let sol32 = solve_mpe(&p32, &f32c, &SolverSettings::default()).unwrap();
        prop_assert!((sol32.lambda as f64 - sol.lambda).abs() <= 1e-3);
    }
}

#[test]
fn relative_value_span_is_bounded_by_k1() {
    let g = grid_graph(4, 4).unwrap();
    let p: Kernel = build_passive(&g, 0.01, 0.01, 0).unwrap();
    let report = ergodicity_report(&p);
    let k1 = report.theta.unwrap().recip().ln() + report.nbar.unwrap() as f64;
    for target in 0..16 {
        let mut f = vec![1.0; 16];
        f[target] = 0.0;
        let sol = solve_mpe(&p, &Cost::new(f).unwrap(), &SolverSettings::default()).unwrap();
        assert!(span_seminorm(&sol.h).unwrap() <= k1);
    }
}

#[test]
fn first_phase_is_passive_and_policies_change_only_at_boundaries() {
    let g = grid_graph(3, 3).unwrap();
    let p: Kernel = build_passive(&g, 0.01, 0.01, 0).unwrap();
    let mut env = make_tracking_env(&g, 3, 1.0, 200).unwrap();
    let trace = run_episode(&p, &mut env, 200, 0, 11, &OnlineConfig::default()).unwrap();
    let schedule = make_schedule(0.05, 200).unwrap();
    assert_eq!(trace.control_costs[0], 0.0);
    let expected: Vec<usize> = std::iter::once(0)
        .chain(schedule.tau_cum.iter().copied().take_while(|&c| c < 200))
        .collect();
    assert_eq!(trace.phase_boundaries, expected);
    for (t, &ph) in trace.phases.iter().enumerate() {
        assert_eq!(ph, schedule.phase_of_step(t));
    }
    assert!(trace.max_drift().is_finite());
    assert!(trace.control_costs.iter().all(|c| c.is_finite() && *c >= 0.0));
}

#[test]
fn cost_stream_ignores_the_agent() {
    let g = grid_graph(3, 3).unwrap();
    let p: Kernel = build_passive(&g, 0.01, 0.01, 0).unwrap();
    let reference = make_tracking_env::<f64>(&g, 9, 1.0, 100).unwrap().target_path().to_vec();
    for agent_seed in [1, 2, 3] {
        let mut env = make_tracking_env(&g, 9, 1.0, 100).unwrap();
        run_episode(&p, &mut env, 100, agent_seed as usize % 9, agent_seed, &OnlineConfig::default()).unwrap();
        assert_eq!(env.target_path()[..100], reference[..]);
    }
}

#[test]
fn constant_costs_leave_the_policy_passive() {
    let g = grid_graph(2, 3).unwrap();
    let p: Kernel = build_passive(&g, 0.2, 0.1, 0).unwrap();
    let mut env = ReplayStream::constant(Cost::constant(6, 0.4).unwrap());
    let trace = run_episode(&p, &mut env, 300, 0, 5, &OnlineConfig::default()).unwrap();
    assert!(trace.control_costs.iter().all(|&c| c == 0.0));
    assert!((trace.cumulative[299] - 0.4 * 300.0).abs() <= 1e-9);
}

#[test]
fn comparator_costs_split_additively() {
    let g = grid_graph(3, 3).unwrap();
    let p: Kernel = build_passive(&g, 0.01, 0.01, 0).unwrap();
    let costs = make_tracking_env::<f64>(&g, 4, 1.0, 120).unwrap().costs(120).unwrap();
    let pol = best_in_hindsight(&p, &costs, &SolverSettings::default()).unwrap();
    let whole = steady_state_comparator_cost(&pol, &costs).unwrap();
    let head = steady_state_comparator_cost(&pol, &costs[..50]).unwrap();
    let tail = steady_state_comparator_cost(&pol, &costs[50..]).unwrap();
    for (t, w) in whole.iter().enumerate() {
        let split = if t < 50 { head[t] } else { head[49] + tail[t - 50] };
        assert!((w - split).abs() <= 1e-9);
    }
}

#[test]
fn hindsight_beats_every_pooled_policy_in_steady_state() {
    let g = grid_graph(3, 3).unwrap();
    let p: Kernel = build_passive(&g, 0.01, 0.01, 0).unwrap();
    let costs = make_tracking_env::<f64>(&g, 8, 1.0, 100).unwrap().costs(100).unwrap();
    let best = best_in_hindsight(&p, &costs, &SolverSettings::default()).unwrap();
    let own = *steady_state_comparator_cost(&best, &costs).unwrap().last().unwrap();
    for q in sample_policy_pool(&p, 200, 21).unwrap() {
        let other = *steady_state_comparator_cost(&q, &costs).unwrap().last().unwrap();
        assert!(own <= other + 1e-9);
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let mut s = ExperimentSettings::new(grid_graph(3, 3).unwrap());
    s.horizon = 60;
    s.pool_size = 10;
    let a = monte_carlo(&s, 3, 42).unwrap();
    let b = monte_carlo(&s, 3, 42).unwrap();
    assert_eq!(a, b);
    assert!(a.hindsight.stddev.iter().all(|&v| v >= 0.0));
}
