use itn_core::integrator::{integrate_cost, ControlGrid, TimeGrid};
use itn_core::model::TABLE_B_VALUES;
use itn_core::sweep::{convergence_test, solve_adjoint, solve_state, tracked};
use itn_core::verify::{cross_validate, finite_difference_gradient_check, DirectConfig};
use itn_core::{fbs_solve, AdjointMode, AdjointVec, CostKind, Error, Execution, ModelParams, StateVec, SweepConfig};

fn grid(n: usize) -> TimeGrid {
    TimeGrid::new(0.0, 100.0, n).unwrap()
}

#[test]
fn every_iterate_is_admissible_and_transversal() {
    let p = ModelParams::default();
    let g = grid(1000);
    for iters in 1..=6 {
        let cfg = SweepConfig { max_iters: iters, tol: 1e-12, ..Default::default() };
        let r = match fbs_solve(&p, StateVec::TABLE_INITIAL, &g, &cfg) {
            Err(Error::NotConverged(r)) => *r,
            other => panic!("{other:?}"),
        };
        assert!(r.control.values().iter().all(|u| (0.0..=1.0).contains(u)));
        assert_eq!(r.adjoint_traj.last(), AdjointVec::ZERO);
        assert_eq!(r.cost_history.len(), iters + 1);
    }
}

#[test]
fn converged_control_is_a_fixed_point() {
    let p = ModelParams::default();
    let g = grid(2000);
    for mode in [AdjointMode::PaperStated, AdjointMode::Exact] {
        let cfg = SweepConfig { adjoint_mode: mode, ..Default::default() };
        let r = fbs_solve(&p, StateVec::TABLE_INITIAL, &g, &cfg).unwrap();
        // one more sweep from the converged triple
        let u = itn_core::sweep::update_control(&r.control, &r.state_traj, &r.adjoint_traj, &p, cfg.relaxation)
            .unwrap();
        let x = solve_state(&p, StateVec::TABLE_INITIAL, &u).unwrap();
        let l = solve_adjoint(&p, &x, &u, mode, CostKind::J1).unwrap();
        let before = tracked(&r.state_traj, &r.adjoint_traj, &r.control);
        let after = tracked(&x, &l, &u);
        assert!(convergence_test(&before, &after, cfg.tol), "{mode:?}");
    }
}

#[test]
fn optimal_control_beats_null_and_saturated() {
    let p = ModelParams::default();
    let g = grid(5000);
    let r = fbs_solve(&p, StateVec::TABLE_INITIAL, &g, &SweepConfig::default()).unwrap();
    for level in [0.0, 1.0] {
        let u = ControlGrid::constant(g, level);
        let x = solve_state(&p, StateVec::TABLE_INITIAL, &u).unwrap();
        let j = integrate_cost(&p, &x, &u, CostKind::J1);
        assert!(r.cost_value <= j, "u = {level}: {} vs {j}", r.cost_value);
    }
}

#[test]
fn table_control_starts_high_and_decays() {
    let p = ModelParams::default();
    let g = grid(5000);
    let r = fbs_solve(&p, StateVec::TABLE_INITIAL, &g, &SweepConfig::default()).unwrap();
    let u = r.control.values();
    assert!(u[0] > 0.99);
    // non-increasing after the saturated phase, zero at the horizon
    let peak = u.iter().copied().fold(0.0, f64::max);
    assert!((u[0] - peak).abs() < 1e-12);
    assert!(u.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert_eq!(u[u.len() - 1], 0.0);
}

#[test]
fn sweep_and_direct_costs_agree_for_every_table_b() {
    let g = grid(500);
    let gaps = Execution::Parallel.map(TABLE_B_VALUES.to_vec(), |b| {
        let p = ModelParams { b, ..Default::default() };
        let cfg = SweepConfig { adjoint_mode: AdjointMode::Exact, ..Default::default() };
        (b, cross_validate(&p, StateVec::TABLE_INITIAL, &g, &cfg, &DirectConfig::default()).unwrap())
    });
    for (b, rep) in gaps {
        assert!(rep.rel_gap <= 0.01, "b = {b}: {rep:?}");
    }
}

#[test]
fn direct_cost_sequence_is_monotone_for_every_table_b() {
    let g = grid(500);
    for b in TABLE_B_VALUES {
        let p = ModelParams { b, ..Default::default() };
        let r = itn_core::verify::direct_solve_projected_gradient(
            &p,
            StateVec::TABLE_INITIAL,
            &g,
            CostKind::J1,
            &DirectConfig::default(),
        )
        .unwrap();
        assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0]), "b = {b}");
    }
}

#[test]
fn gradient_is_consistent_for_every_table_b() {
    let g = grid(2000);
    let u = ControlGrid::constant(g, 0.5);
    for (i, b) in TABLE_B_VALUES.into_iter().enumerate() {
        let p = ModelParams { b, ..Default::default() };
        let rep = finite_difference_gradient_check(
            &p,
            StateVec::TABLE_INITIAL,
            &u,
            &g,
            CostKind::J1,
            20,
            1e-5,
            100 + i as u64,
            Execution::Parallel,
        )
        .unwrap();
        assert!(rep.fraction_within(1e-3) >= 0.95, "b = {b}: {rep:?}");
    }
}

#[test]
fn exact_sweep_gradient_vanishes_where_control_is_interior() {
    let p = ModelParams::default();
    let g = grid(2000);
    let cfg = SweepConfig { adjoint_mode: AdjointMode::Exact, tol: 1e-8, max_iters: 2000, ..Default::default() };
    let r = fbs_solve(&p, StateVec::TABLE_INITIAL, &g, &cfg).unwrap();
    let grad =
        itn_core::verify::cost_gradient_adjoint(&p, StateVec::TABLE_INITIAL, &r.control, &g, CostKind::J1).unwrap();
    for (gk, uk) in grad.iter().zip(r.control.values()) {
        if *uk > 1e-6 && *uk < 1.0 - 1e-6 {
            assert!(gk.abs() < 1e-4 * p.c, "u = {uk}, grad = {gk}");
        }
    }
}

#[test]
fn rk4_is_fourth_order_on_the_full_system() {
    let p = ModelParams::default();
    let terminal = |n: usize| {
        let u = ControlGrid::constant(grid(n), 0.6);
        solve_state(&p, StateVec::TABLE_INITIAL, &u).unwrap().last()
    };
    let n = 200;
    let reference = terminal(64 * n);
    let err = |m| {
        (terminal(m) - reference)
            .to_array()
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()))
    };
    let ratio = err(n) / err(2 * n);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn forward_trajectory_shape() {
    let p = ModelParams::default();
    for n in [1, 7, 100] {
        let g = TimeGrid::new(0.0, 1.0, n).unwrap();
        let x = solve_state(&p, StateVec::TABLE_INITIAL, &ControlGrid::constant(g, 0.0)).unwrap();
        assert_eq!(x.samples.len(), n + 1);
        assert_eq!(x.first(), StateVec::TABLE_INITIAL);
    }
}
