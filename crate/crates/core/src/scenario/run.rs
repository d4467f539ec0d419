//! Reproduction runs: single scenarios, net-usage sweeps, cost-functional
//! comparisons, and the verification suite.
//!
//! Each run writes into the configured output directory under a run name.
//! Files produced by a run that fails are deleted again before the error is
//! returned.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_cost, trapezoid, ControlGrid, Trajectory};
use crate::model::{AdjointMode, CostKind, StateVec};
use crate::parallel::Execution;
use crate::scenario::config::ScenarioConfig;
use crate::scenario::csv::{write_control_csv, write_csv};
use crate::scenario::plot::{render_plots, Curve, FigureSpec};
use crate::sweep::{fbs_solve, solve_adjoint, solve_state, SolveResult};
use crate::verify::{cross_validate, finite_difference_gradient_check, CrossValidationReport, DirectConfig, GradCheckReport};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub config: ScenarioConfig,
    /// Resolved configuration in config-file syntax.
    pub config_text: String,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Vec<f64>,
    pub cost_value: f64,
    /// `int I_h dt` over the horizon.
    pub infectious_burden: f64,
    /// First grid time with fewer than one infectious human.
    pub extinction_day: Option<f64>,
    pub duration_secs: f64,
    pub artifacts: Vec<PathBuf>,
    pub tool_version: String,
}

/// Deletes every tracked file on drop unless committed.
struct Artifacts {
    files: Vec<PathBuf>,
    committed: bool,
}

impl Artifacts {
    fn new() -> Self {
        Self { files: Vec::new(), committed: false }
    }

    fn track(&mut self, path: PathBuf) -> PathBuf {
        self.files.push(path.clone());
        path
    }

    fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if !self.committed {
            for f in &self.files {
                let _ = std::fs::remove_file(f);
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("manifest types serialize");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// `int I_h dt` by the trapezoidal rule.
pub fn infectious_burden(x: &Trajectory<StateVec>) -> f64 {
    trapezoid(x.grid.step(), x.samples.iter().map(|s| s.i_h).collect::<Vec<_>>().into_iter())
}

/// First grid time at which `I_h < 1`.
pub fn extinction_day(x: &Trajectory<StateVec>) -> Option<f64> {
    x.iter().find(|(_, s)| s.i_h < 1.0).map(|(t, _)| t)
}

/// State under `u = 0`, with the costate of the configured cost attached.
fn uncontrolled(cfg: &ScenarioConfig) -> Result<SolveResult> {
    let u = ControlGrid::constant(cfg.grid()?, 0.0);
    let x = solve_state(&cfg.params, cfg.x0, &u)?;
    let l = solve_adjoint(&cfg.params, &x, &u, cfg.adjoint_mode, cfg.cost)?;
    let cost = integrate_cost(&cfg.params, &x, &u, cfg.cost);
    Ok(SolveResult {
        state_traj: x,
        adjoint_traj: l,
        control: u,
        cost_value: cost,
        iterations: 0,
        converged: true,
        per_iteration_residuals: Vec::new(),
        cost_history: vec![cost],
    })
}

fn curve(label: &str, csv: &Path, column: &str, dashed: bool) -> Curve {
    Curve {
        label: label.to_string(),
        csv: csv.to_path_buf(),
        column: column.to_string(),
        dashed,
    }
}

/// Runs one scenario and returns its manifest together with the solution.
pub fn run_scenario_detailed(cfg: &ScenarioConfig, name: &str) -> Result<(RunManifest, SolveResult)> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let mut artifacts = Artifacts::new();

    let (result, baseline) = if cfg.control_enabled {
        let grid = cfg.grid()?;
        let solved = fbs_solve(&cfg.params, cfg.x0, &grid, &cfg.sweep_config())?;
        (solved, Some(uncontrolled(cfg)?))
    } else {
        (uncontrolled(cfg)?, None)
    };

    let main_csv = artifacts.track(dir.join(format!("{name}.csv")));
    write_csv(&result.state_traj, &result.control, &result.adjoint_traj, &main_csv)?;
    let control_csv = artifacts.track(dir.join(format!("{name}_control.csv")));
    write_control_csv(&result.control, &control_csv)?;
    let config_file = artifacts.track(dir.join(format!("{name}.cfg")));
    std::fs::write(&config_file, cfg.to_config_text()).map_err(|e| Error::io(&config_file, e))?;

    let baseline_csv = match &baseline {
        Some(b) => {
            let path = artifacts.track(dir.join(format!("{name}_baseline.csv")));
            write_csv(&b.state_traj, &b.control, &b.adjoint_traj, &path)?;
            Some(path)
        }
        None => None,
    };

    let (main_label, base_label) = if cfg.control_enabled {
        ("with control", "without control")
    } else {
        ("without control", "")
    };
    let mut figures = Vec::new();
    for (kind, title, cols) in [
        ("humans", "Susceptible and infectious humans", ["S_h", "I_h"]),
        ("mosquitoes", "Susceptible and infectious mosquitoes", ["S_v", "I_v"]),
    ] {
        let mut curves = Vec::new();
        for col in cols {
            curves.push(curve(&format!("{col} {main_label}"), &main_csv, col, false));
            if let Some(b) = &baseline_csv {
                curves.push(curve(&format!("{col} {base_label}"), b, col, true));
            }
        }
        figures.push(FigureSpec {
            file: artifacts.track(dir.join(format!("{name}_{kind}.svg"))),
            title: format!("{title}, b = {}", cfg.params.b),
            y_label: "individuals".into(),
            y_range: None,
            curves,
        });
    }
    if cfg.control_enabled {
        figures.push(FigureSpec {
            file: artifacts.track(dir.join(format!("{name}_control.svg"))),
            title: format!("Optimal control u, b = {}", cfg.params.b),
            y_label: "u (dimensionless)".into(),
            y_range: Some((0.0, 1.0)),
            curves: vec![curve("u", &main_csv, "u", false)],
        });
    }
    render_plots(&figures)?;

    let manifest_path = artifacts.track(dir.join(format!("{name}_manifest.json")));
    let mut manifest = RunManifest {
        scenario: name.to_string(),
        config: cfg.clone(),
        config_text: cfg.to_config_text(),
        iterations: result.iterations,
        converged: result.converged,
        residuals: result.per_iteration_residuals.clone(),
        cost_value: result.cost_value,
        infectious_burden: infectious_burden(&result.state_traj),
        extinction_day: extinction_day(&result.state_traj),
        duration_secs: 0.0,
        artifacts: artifacts.files.clone(),
        tool_version: TOOL_VERSION.to_string(),
    };
    manifest.duration_secs = start.elapsed().as_secs_f64();
    write_json(&manifest, &manifest_path)?;
    artifacts.commit();
    Ok((manifest, result))
}

/// Sweep solves when `control_enabled`, otherwise a forward run with `u = 0`.
pub fn run_scenario(cfg: &ScenarioConfig, name: &str) -> Result<RunManifest> {
    run_scenario_detailed(cfg, name).map(|(m, _)| m)
}

fn b_label(b: f64) -> String {
    format!("b{b}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMember {
    pub b: f64,
    pub manifest: Option<RunManifest>,
    pub error: Option<String>,
    /// Exit code the failure would map to on its own.
    pub exit_code: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub members: Vec<SweepMember>,
    pub artifacts: Vec<PathBuf>,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = &SweepMember> {
        self.members.iter().filter(|m| m.error.is_some())
    }
}

/// One run per entry of `sweep_b` (all other settings shared), followed by
/// a summary CSV, overlay plots, and an index written once all members are
/// done. A failing member is recorded and does not stop the others.
pub fn run_sweep(cfg: &ScenarioConfig, exec: Execution) -> Result<SweepReport> {
    cfg.validate()?;
    let bs = cfg
        .sweep_b
        .clone()
        .ok_or_else(|| Error::invariant("sweep_b", "sweep needs a nonempty sweep_b list"))?;
    ensure_dir(&cfg.output_dir)?;

    let members = exec.map(bs, |b| {
        let mut member_cfg = cfg.clone();
        member_cfg.params.b = b;
        member_cfg.sweep_b = None;
        match run_scenario(&member_cfg, &format!("sweep_{}", b_label(b))) {
            Ok(m) => SweepMember { b, manifest: Some(m), error: None, exit_code: None },
            Err(e) => SweepMember { b, manifest: None, error: Some(e.to_string()), exit_code: Some(e.exit_code()) },
        }
    });

    let dir = &cfg.output_dir;
    let mut artifacts = Artifacts::new();
    let summary = artifacts.track(dir.join("sweep_summary.csv"));
    let mut text = String::from("b,converged,iterations,cost,infectious_burden,extinction_day\n");
    for m in &members {
        if let Some(r) = &m.manifest {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                m.b,
                r.converged,
                r.iterations,
                r.cost_value,
                r.infectious_burden,
                r.extinction_day.map(|d| d.to_string()).unwrap_or_default()
            ));
        }
    }
    std::fs::write(&summary, text).map_err(|e| Error::io(&summary, e))?;

    let ok: Vec<(f64, PathBuf)> = members
        .iter()
        .filter(|m| m.manifest.is_some())
        .map(|m| (m.b, dir.join(format!("sweep_{}.csv", b_label(m.b)))))
        .collect();
    if !ok.is_empty() {
        let overlay = |kind: &str, title: &str, column: &str, y_label: &str, y_range| FigureSpec {
            file: dir.join(format!("sweep_{kind}.svg")),
            title: title.to_string(),
            y_label: y_label.to_string(),
            y_range,
            curves: ok.iter().map(|(b, csv)| curve(&format!("b = {b}"), csv, column, false)).collect(),
        };
        let figures = vec![
            overlay("susceptible", "Susceptible humans", "S_h", "individuals", None),
            overlay("infectious", "Infectious humans", "I_h", "individuals", None),
            overlay("control", "Optimal control u", "u", "u (dimensionless)", Some((0.0, 1.0))),
        ];
        for f in &figures {
            artifacts.track(f.file.clone());
        }
        render_plots(&figures)?;
    }
    let index = artifacts.track(dir.join("sweep_index.json"));
    let mut report = SweepReport { members, artifacts: artifacts.files.clone() };
    write_json(&report, &index)?;
    report.artifacts = artifacts.commit();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub j1: RunManifest,
    pub j2: RunManifest,
    /// Per compartment `(S_h, I_h, S_v, I_v)`: the largest
    /// `|x_J1(t) - x_J2(t)|` as a fraction of the compartment's plotted range
    /// `max_t max(|x_J1|, |x_J2|)`.
    pub max_state_discrepancy: [f64; 4],
    /// Per compartment: the largest `|x_J1 - x_J2| / max(|x_J1|, |x_J2|, 1)`.
    pub max_pointwise_discrepancy: [f64; 4],
    /// `min_t (u_J2 - u_J1)`
    pub min_control_excess: f64,
    /// `max_t (u_J2 - u_J1)`
    pub max_control_excess: f64,
    pub artifacts: Vec<PathBuf>,
}

/// Largest difference per compartment relative to the compartment's peak
/// over both trajectories.
pub fn state_discrepancy(a: &Trajectory<StateVec>, b: &Trajectory<StateVec>) -> [f64; 4] {
    let mut worst = [0.0f64; 4];
    let mut peak = [0.0f64; 4];
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        for (i, (x, y)) in sa.to_array().into_iter().zip(sb.to_array()).enumerate() {
            worst[i] = worst[i].max((x - y).abs());
            peak[i] = peak[i].max(x.abs()).max(y.abs());
        }
    }
    std::array::from_fn(|i| if peak[i] > 0.0 { worst[i] / peak[i] } else { 0.0 })
}

/// Pointwise relative discrepancy with a floor of one individual in the
/// denominator.
pub fn pointwise_discrepancy(a: &Trajectory<StateVec>, b: &Trajectory<StateVec>) -> [f64; 4] {
    let mut worst = [0.0f64; 4];
    for (sa, sb) in a.samples.iter().zip(&b.samples) {
        for (i, (x, y)) in sa.to_array().into_iter().zip(sb.to_array()).enumerate() {
            let d = (x - y).abs() / x.abs().max(y.abs()).max(1.0);
            worst[i] = worst[i].max(d);
        }
    }
    worst
}

/// Solves under J1 and under J2 (everything else shared) and plots the two
/// side by side.
pub fn compare_costs(cfg: &ScenarioConfig, exec: Execution) -> Result<CostComparison> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let mut runs = exec.map(vec![CostKind::J1, CostKind::J2], |cost| {
        let run_cfg = ScenarioConfig { cost, control_enabled: true, sweep_b: None, ..cfg.clone() };
        let name = match cost {
            CostKind::J1 => "compare_j1",
            CostKind::J2 => "compare_j2",
        };
        run_scenario_detailed(&run_cfg, name)
    });
    let (m2, r2) = runs.pop().expect("two runs")?;
    let (m1, r1) = runs.pop().expect("two runs")?;

    let excess: Vec<f64> = r1
        .control
        .values()
        .iter()
        .zip(r2.control.values())
        .map(|(a, b)| b - a)
        .collect();

    let dir = &cfg.output_dir;
    let (c1, c2) = (dir.join("compare_j1.csv"), dir.join("compare_j2.csv"));
    let mut artifacts = Artifacts::new();
    let mut figures = Vec::new();
    for (kind, title, cols) in [
        ("humans", "Humans under J1 and J2", ["S_h", "I_h"]),
        ("mosquitoes", "Mosquitoes under J1 and J2", ["S_v", "I_v"]),
    ] {
        figures.push(FigureSpec {
            file: artifacts.track(dir.join(format!("compare_{kind}.svg"))),
            title: title.into(),
            y_label: "individuals".into(),
            y_range: None,
            curves: cols
                .iter()
                .flat_map(|c| [curve(&format!("{c} J1"), &c1, c, false), curve(&format!("{c} J2"), &c2, c, true)])
                .collect(),
        });
    }
    figures.push(FigureSpec {
        file: artifacts.track(dir.join("compare_control.svg")),
        title: "Optimal control under J1 and J2".into(),
        y_label: "u (dimensionless)".into(),
        y_range: Some((0.0, 1.0)),
        curves: vec![curve("u J1", &c1, "u", false), curve("u J2", &c2, "u", true)],
    });
    render_plots(&figures)?;

    let mut out = CostComparison {
        j1: m1,
        j2: m2,
        max_state_discrepancy: state_discrepancy(&r1.state_traj, &r2.state_traj),
        max_pointwise_discrepancy: pointwise_discrepancy(&r1.state_traj, &r2.state_traj),
        min_control_excess: excess.iter().copied().fold(f64::INFINITY, f64::min),
        max_control_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        artifacts: artifacts.files.clone(),
    };
    let summary = artifacts.track(dir.join("compare_summary.json"));
    out.artifacts.push(summary.clone());
    write_json(&out, &summary)?;
    artifacts.commit();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub gradient_grid_n: usize,
    pub gradient: GradCheckReport,
    pub oracle_grid_n: usize,
    pub cross_validation: CrossValidationReport,
    pub report_path: PathBuf,
}

/// Gradient check at `u = 0.5` and sweep-versus-direct cross-validation,
/// both with the exact costate.
pub fn run_verify(
    cfg: &ScenarioConfig,
    gradient_n: usize,
    oracle_n: usize,
    n_directions: usize,
    exec: Execution,
) -> Result<VerifyReport> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let grad_grid = crate::integrator::TimeGrid::new(cfg.t0, cfg.tf, gradient_n)?;
    let gradient = finite_difference_gradient_check(
        &cfg.params,
        cfg.x0,
        &ControlGrid::constant(grad_grid, 0.5),
        &grad_grid,
        cfg.cost,
        n_directions,
        1e-5,
        cfg.seed,
        exec,
    )?;
    let oracle_grid = crate::integrator::TimeGrid::new(cfg.t0, cfg.tf, oracle_n)?;
    let sweep = crate::sweep::SweepConfig { adjoint_mode: AdjointMode::Exact, ..cfg.sweep_config() };
    let cross_validation = cross_validate(&cfg.params, cfg.x0, &oracle_grid, &sweep, &DirectConfig::default())?;
    let report = VerifyReport {
        gradient_grid_n: gradient_n,
        gradient,
        oracle_grid_n: oracle_n,
        cross_validation,
        report_path: cfg.output_dir.join("verify_report.json"),
    };
    write_json(&report, &report.report_path)?;
    Ok(report)
}
