//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary (`harness = false`) and exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use itn_core::integrator::{ControlGrid, TimeGrid};
use itn_core::model::TABLE_B_VALUES;
use itn_core::scenario::run::{extinction_day, infectious_burden, pointwise_discrepancy, state_discrepancy};
use itn_core::sweep::solve_state;
use itn_core::verify::{cross_validate, finite_difference_gradient_check, DirectConfig};
use itn_core::{
    fbs_solve, AdjointMode, AdjointVec, CostKind, Error, Execution, ModelParams, StateVec, SweepConfig,
};

const DEFAULT_N: usize = 5000;
const TF: f64 = 100.0;

// criterion 1 and 2 extinction windows, days
const CONTROLLED_WINDOW: (f64, f64) = (20.0, 40.0);
const UNCONTROLLED_WINDOW: (f64, f64) = (55.0, 85.0);
// criterion 3
const STATE_AGREEMENT: f64 = 0.05;
const CONTROL_SLACK: f64 = 1e-6;
// criterion 4
const ORACLE_N: usize = 1000;
const ORACLE_GAP: f64 = 0.01;
// criterion 5
const GRADIENT_N: usize = 2000;
const GRADIENT_DIRECTIONS: usize = 20;
const GRADIENT_EPS: f64 = 1e-5;
const GRADIENT_TIGHT: f64 = 1e-3;
const GRADIENT_TIGHT_SHARE: f64 = 0.95;
const GRADIENT_LOOSE: f64 = 1e-2;
const GRADIENT_SEED: u64 = 2024;
// criterion 6
const ORDER_N: usize = 100;
const ORDER_BAND: (f64, f64) = (12.0, 20.0);
// criterion 8
const BALANCE_SAMPLES: usize = 1000;
const BALANCE_ULPS: f64 = 16.0;
const VECTOR_SETTLE: f64 = 1e-3;

type Check = fn() -> Result<Outcome, Error>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome, Error> {
    Ok(Outcome { pass, detail })
}

fn table() -> ModelParams {
    ModelParams::default()
}

fn grid(n: usize) -> TimeGrid {
    TimeGrid::new(0.0, TF, n).expect("valid grid")
}

fn in_window(day: Option<f64>, (lo, hi): (f64, f64)) -> bool {
    day.is_some_and(|d| (lo..=hi).contains(&d))
}

fn fmt_day(day: Option<f64>) -> String {
    day.map_or("never".into(), |d| format!("{d:.2} d"))
}

fn extinction_with_control() -> Result<Outcome, Error> {
    let r = fbs_solve(&table(), StateVec::TABLE_INITIAL, &grid(DEFAULT_N), &SweepConfig::default())?;
    let day = extinction_day(&r.state_traj);
    outcome(
        in_window(day, CONTROLLED_WINDOW),
        format!("I_h < 1 at {} after {} sweeps, J1 = {:.2}", fmt_day(day), r.iterations, r.cost_value),
    )
}

fn extinction_without_control() -> Result<Outcome, Error> {
    let x = solve_state(&table(), StateVec::TABLE_INITIAL, &ControlGrid::constant(grid(DEFAULT_N), 0.0))?;
    let day = extinction_day(&x);
    outcome(in_window(day, UNCONTROLLED_WINDOW), format!("I_h < 1 at {}", fmt_day(day)))
}

fn cost_comparison() -> Result<Outcome, Error> {
    let solve = |mode, cost| {
        let cfg = SweepConfig { adjoint_mode: mode, cost, ..Default::default() };
        fbs_solve(&table(), StateVec::TABLE_INITIAL, &grid(DEFAULT_N), &cfg)
    };
    let mut detail = Vec::new();
    let mut pass = true;
    for (label, mode) in [("exact", AdjointMode::Exact), ("paper", AdjointMode::PaperStated)] {
        let (r1, r2) = (solve(mode, CostKind::J1)?, solve(mode, CostKind::J2)?);
        let states = state_discrepancy(&r1.state_traj, &r2.state_traj);
        let pointwise = pointwise_discrepancy(&r1.state_traj, &r2.state_traj);
        let excess: Vec<f64> =
            r1.control.values().iter().zip(r2.control.values()).map(|(a, b)| b - a).collect();
        let min_excess = excess.iter().copied().fold(f64::INFINITY, f64::min);
        let max_excess = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let worst_state = states.iter().copied().fold(0.0, f64::max);
        let ok = worst_state <= STATE_AGREEMENT && min_excess >= -CONTROL_SLACK && max_excess > CONTROL_SLACK;
        // the exact costate is the primary reading; the published one is shown alongside
        if mode == AdjointMode::Exact {
            pass = ok;
        }
        detail.push(format!(
            "{label}: state gap {:.2}% of range (pointwise I_h {:.1}%, I_v {:.1}%), u_J2 - u_J1 in [{min_excess:.2e}, {max_excess:.3}]",
            100.0 * worst_state,
            100.0 * pointwise[1],
            100.0 * pointwise[3],
        ));
    }
    outcome(pass, detail.join("; "))
}

fn dual_method() -> Result<Outcome, Error> {
    let cfg = SweepConfig { adjoint_mode: AdjointMode::Exact, ..Default::default() };
    let rep = cross_validate(&table(), StateVec::TABLE_INITIAL, &grid(ORACLE_N), &cfg, &DirectConfig::default())?;
    outcome(
        rep.rel_gap <= ORACLE_GAP,
        format!(
            "J_fbs = {:.3}, J_direct = {:.3}, gap {:.2e}, ||u_fbs - u_direct|| = {:.2e}",
            rep.j_fbs, rep.j_direct, rep.rel_gap, rep.control_l2_distance
        ),
    )
}

fn gradient_consistency() -> Result<Outcome, Error> {
    let g = grid(GRADIENT_N);
    let rep = finite_difference_gradient_check(
        &table(),
        StateVec::TABLE_INITIAL,
        &ControlGrid::constant(g, 0.5),
        &g,
        CostKind::J1,
        GRADIENT_DIRECTIONS,
        GRADIENT_EPS,
        GRADIENT_SEED,
        Execution::Parallel,
    )?;
    let tight = rep.fraction_within(GRADIENT_TIGHT);
    outcome(
        rep.directions_tested == GRADIENT_DIRECTIONS
            && tight >= GRADIENT_TIGHT_SHARE
            && rep.max_rel_error <= GRADIENT_LOOSE,
        format!(
            "{} directions, {:.0}% within {GRADIENT_TIGHT:e}, max rel error {:.2e}",
            rep.directions_tested,
            100.0 * tight,
            rep.max_rel_error
        ),
    )
}

fn rk4_order() -> Result<Outcome, Error> {
    let terminal = |n: usize| -> Result<StateVec, Error> {
        Ok(solve_state(&table(), StateVec::TABLE_INITIAL, &ControlGrid::constant(grid(n), 0.0))?.last())
    };
    let reference = terminal(64 * ORDER_N)?;
    let err = |n| -> Result<f64, Error> {
        Ok((terminal(n)? - reference).to_array().iter().fold(0.0f64, |a, v| a.max(v.abs())))
    };
    let (coarse, fine) = (err(ORDER_N)?, err(2 * ORDER_N)?);
    let ratio = coarse / fine;
    outcome(
        (ORDER_BAND.0..=ORDER_BAND.1).contains(&ratio),
        format!("error {coarse:.3e} -> {fine:.3e}, ratio {ratio:.2}"),
    )
}

fn b_sweep_ordering() -> Result<Outcome, Error> {
    let burdens = Execution::Parallel.map(TABLE_B_VALUES.to_vec(), |b| {
        let p = ModelParams { b, ..table() };
        fbs_solve(&p, StateVec::TABLE_INITIAL, &grid(DEFAULT_N), &SweepConfig::default())
            .map(|r| infectious_burden(&r.state_traj))
    });
    let burdens = burdens.into_iter().collect::<Result<Vec<_>, _>>()?;
    let decreasing = burdens.windows(2).all(|w| w[1] < w[0]);
    let listed: Vec<String> = TABLE_B_VALUES.iter().zip(&burdens).map(|(b, v)| format!("{b}:{v:.1}")).collect();
    outcome(decreasing, format!("burden by b = [{}]", listed.join(", ")))
}

fn structural_invariants() -> Result<Outcome, Error> {
    let p = table();
    let mut failures = Vec::new();

    for iters in 1..=5 {
        let cfg = SweepConfig { max_iters: iters, tol: 1e-12, ..Default::default() };
        let r = match fbs_solve(&p, StateVec::TABLE_INITIAL, &grid(DEFAULT_N), &cfg) {
            Err(Error::NotConverged(r)) => *r,
            Ok(r) => r,
            Err(e) => return Err(e),
        };
        if !r.control.values().iter().all(|u| (0.0..=1.0).contains(u)) {
            failures.push(format!("inadmissible u after {iters} sweeps"));
        }
        if r.adjoint_traj.last() != AdjointVec::ZERO {
            failures.push(format!("lambda(tf) != 0 after {iters} sweeps"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tol = |scale: f64| BALANCE_ULPS * f64::EPSILON * scale;
    let mut host_worst = 0.0f64;
    let mut vector_worst = 0.0f64;
    let vp = ModelParams { p2: 1.0, ..p };
    for _ in 0..BALANCE_SAMPLES {
        let x = StateVec::new(
            rng.gen_range(0.0..2000.0),
            rng.gen_range(0.0..2000.0),
            rng.gen_range(0.0..1e4),
            rng.gen_range(0.0..1e4),
        );
        let u = rng.gen_range(0.0..=1.0);
        let d = p.state_rhs(&x, u)?;
        let (lam_h, lam_v) = p.forces_of_infection(&x)?;
        let host = d.s_h + d.i_h - (p.lambda_h_rec - p.mu_h * x.n_h() - p.delta_h * x.i_h);
        let host_scale = p.lambda_h_rec + lam_h * x.s_h + (p.gamma_h + p.mu_h + p.delta_h) * x.n_h();
        host_worst = host_worst.max(host.abs() / tol(host_scale));

        let d = vp.state_rhs(&x, u)?;
        let mu_vb = vp.vector_mortality();
        let vector = d.s_v + d.i_v - (vp.lambda_v_rec - mu_vb * x.n_v());
        let vector_scale = vp.lambda_v_rec + lam_v * x.s_v + 2.0 * mu_vb * x.n_v();
        vector_worst = vector_worst.max(vector.abs() / tol(vector_scale));
    }
    if host_worst > 1.0 {
        failures.push(format!("host balance off by {host_worst:.1} rounding allowances"));
    }
    if vector_worst > 1.0 {
        failures.push(format!("vector balance off by {vector_worst:.1} rounding allowances"));
    }

    let dfe = p.disease_free_state();
    let cfg = SweepConfig::default();
    let r = fbs_solve(&p, dfe, &grid(DEFAULT_N), &cfg)?;
    if !r.state_traj.samples.iter().all(|x| x.i_h == 0.0 && x.i_v == 0.0) || r.control.values().iter().any(|u| *u != 0.0) {
        failures.push("disease-free start picked up infection or control".into());
    }

    let long = TimeGrid::new(0.0, 200.0, 2 * DEFAULT_N)?;
    let x = solve_state(&p, StateVec::TABLE_INITIAL, &ControlGrid::constant(long, 0.0))?;
    let target = p.lambda_v_rec / p.vector_mortality();
    let settle = (x.last().n_v() - target).abs() / target;
    if settle > VECTOR_SETTLE {
        failures.push(format!("N_v(200) off equilibrium by {:.3}%", 100.0 * settle));
    }

    let detail = if failures.is_empty() {
        format!(
            "admissible + transversal over 5 sweeps, balances within {:.2}/{:.2} of {BALANCE_ULPS} ulp, N_v(200) within {:.1e}",
            host_worst, vector_worst, settle
        )
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn main() -> ExitCode {
    // libtest-style flags are ignored; this target always runs every criterion
    let criteria: [(&str, u64, Check); 8] = [
        ("extinction with control", 10, extinction_with_control),
        ("extinction without control", 1, extinction_without_control),
        ("J1 vs J2 states and effort", 30, cost_comparison),
        ("sweep vs direct oracle", 60, dual_method),
        ("adjoint gradient vs finite differences", 60, gradient_consistency),
        ("RK4 fourth order", 10, rk4_order),
        ("burden ordering across b", 60, b_sweep_ordering),
        ("structural invariants", 10, structural_invariants),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let within = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && within, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "[{}] {}. {name}: {detail} ({:.2} s of {budget} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
