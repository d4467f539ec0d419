use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use itn_core::model::TABLE_B_VALUES;
use itn_core::scenario::{self, load_config, parse_override, ScenarioConfig};
use itn_core::{Error, Execution};

#[derive(Parser)]
#[command(name = "itnctl", version, about = "Optimal supervision control for ITN malaria interventions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set gamma_h=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Proportion of ITN usage.
    #[arg(long, global = true)]
    b: Option<f64>,
    /// Final time in days.
    #[arg(long, global = true)]
    tf: Option<f64>,
    /// Number of grid intervals.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    cost: Option<CostArg>,
    #[arg(long, global = true)]
    adjoint: Option<AdjointArg>,
    /// Run independent jobs on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    J1,
    J2,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdjointArg {
    Paper,
    Exact,
}

#[derive(Subcommand)]
enum Command {
    /// Forward integration with no control.
    Simulate,
    /// Forward-backward sweep for the optimal control.
    Solve,
    /// One solve per net-usage level in `sweep_b` (default: the seven
    /// tabulated levels).
    Sweep,
    /// Solve under J1 and J2 and compare.
    CompareCosts,
    /// Finite-difference gradient check and direct-method cross-validation.
    Verify {
        #[arg(long, default_value_t = 20)]
        directions: usize,
        #[arg(long, default_value_t = 2000)]
        gradient_grid: usize,
        #[arg(long, default_value_t = 500)]
        oracle_grid: usize,
    },
}

fn resolve(common: &Common, control_enabled: Option<bool>) -> Result<ScenarioConfig, Error> {
    let mut overrides = common
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut push = |k: &str, v: String| overrides.push((k.to_string(), v));
    if let Some(out) = &common.out {
        push("output_dir", out.display().to_string());
    }
    if let Some(b) = common.b {
        push("b", b.to_string());
    }
    if let Some(tf) = common.tf {
        push("tf", tf.to_string());
    }
    if let Some(n) = common.grid {
        push("n", n.to_string());
    }
    if let Some(c) = common.cost {
        push("cost", match c {
            CostArg::J1 => "j1",
            CostArg::J2 => "j2",
        }
        .into());
    }
    if let Some(a) = common.adjoint {
        push("adjoint_mode", match a {
            AdjointArg::Paper => "paper_stated",
            AdjointArg::Exact => "exact",
        }
        .into());
    }
    if let Some(on) = control_enabled {
        push("control_enabled", on.to_string());
    }
    load_config(common.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> Result<u8, Error> {
    let exec = if cli.common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Simulate | Command::Solve => {
            let solve = matches!(cli.command, Command::Solve);
            let cfg = resolve(&cli.common, Some(solve))?;
            let name = format!("{}_b{}", if solve { "solve" } else { "simulate" }, cfg.params.b);
            let m = scenario::run_scenario(&cfg, &name)?;
            println!(
                "{name}: cost {:.6} iterations {} converged {} burden {:.4} extinction {}",
                m.cost_value,
                m.iterations,
                m.converged,
                m.infectious_burden,
                m.extinction_day.map_or("none".into(), |d| format!("day {d}")),
            );
            for a in &m.artifacts {
                println!("  {}", a.display());
            }
        }
        Command::Sweep => {
            let mut cfg = resolve(&cli.common, Some(true))?;
            cfg.sweep_b.get_or_insert_with(|| TABLE_B_VALUES.to_vec());
            let report = scenario::run_sweep(&cfg, exec)?;
            for m in &report.members {
                match (&m.manifest, &m.error) {
                    (Some(r), _) => println!(
                        "b = {}: cost {:.6} burden {:.4} iterations {}",
                        m.b, r.cost_value, r.infectious_burden, r.iterations
                    ),
                    (None, Some(e)) => eprintln!("b = {}: failed: {e}", m.b),
                    _ => {}
                }
            }
            if let Some(code) = report.failures().filter_map(|m| m.exit_code).max() {
                return Ok(code as u8);
            }
        }
        Command::CompareCosts => {
            let cfg = resolve(&cli.common, Some(true))?;
            let c = scenario::compare_costs(&cfg, exec)?;
            println!("J1 cost {:.6}, J2 cost {:.6}", c.j1.cost_value, c.j2.cost_value);
            println!("max state discrepancy, fraction of plotted range (S_h, I_h, S_v, I_v): {:?}", c.max_state_discrepancy);
            println!("max pointwise relative discrepancy (S_h, I_h, S_v, I_v): {:?}", c.max_pointwise_discrepancy);
            println!(
                "u_J2 - u_J1 ranges over [{:.3e}, {:.3e}]",
                c.min_control_excess, c.max_control_excess
            );
        }
        Command::Verify { directions, gradient_grid, oracle_grid } => {
            let cfg = resolve(&cli.common, None)?;
            let r = scenario::run_verify(&cfg, gradient_grid, oracle_grid, directions, exec)?;
            let g = &r.gradient;
            println!(
                "gradient check (n = {}): {} directions, max rel error {:.3e}, {:.0}% within 1e-3",
                r.gradient_grid_n,
                g.directions_tested,
                g.max_rel_error,
                100.0 * g.fraction_within(1e-3)
            );
            let x = &r.cross_validation;
            println!(
                "cross-validation (n = {}): J_fbs {:.6} J_direct {:.6} rel gap {:.3e} control L2 distance {:.3e}",
                r.oracle_grid_n, x.j_fbs, x.j_direct, x.rel_gap, x.control_l2_distance
            );
            println!("report: {}", r.report_path.display());
            let ok = g.fraction_within(1e-3) >= 0.95 && g.max_rel_error <= 1e-2 && x.rel_gap <= 0.01;
            if !ok {
                eprintln!("verification thresholds not met");
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
