//! Scenario-driven command line for the sugar-bait transmission models.
//!
//! Every verb reads the same flat `key = value` scenario format (all keys
//! optional; missing ones fall back to the baseline parameter set) and
//! writes CSV and/or SVG artifacts into `--out`. Exit code 0 on success,
//! 1 on scenario/parameter problems, 2 on failures while computing or
//! writing results.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use baitsim::allocation::{
    brute_force_allocate, greedy_allocate, proportional_constraints, BaitAllocation,
};
use baitsim::analytics::{
    critical_bait_density, r0_heterogeneous, r0_homogeneous, r0_proportional_targeted,
    stability_probe, Mixing, R0Result,
};
use baitsim::dde::{integrate_heterogeneous, integrate_homogeneous, HeterogeneousState, Trajectory};
use baitsim::output::{line_chart, mean_trajectory_to_csv, trajectory_to_csv, Series};
use baitsim::scenario::{BaitMode, MixMode, Scenario};
use baitsim::stochastic::run_ensemble;
use baitsim::AttractivenessProfile;

#[derive(Parser)]
#[command(name = "baitsim", version, about = "Malaria transmission under sugar-bait interventions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the reproduction number and its intermediate quantities.
    R0(CommonArgs),
    /// Sweep one parameter over a grid and plot r0 per series.
    Sweep(CommonArgs),
    /// Integrate the delay-differential system and write the trajectory.
    Integrate(CommonArgs),
    /// Run the stochastic ensemble and overlay its mean on the DDE solution.
    Simulate(CommonArgs),
    /// Allocate baits across attractiveness classes and report the result.
    Allocate(CommonArgs),
    /// Probe the disease-free equilibrium for a positive real eigenvalue.
    Stability(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file; omitted means the baseline parameter set.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Directory for CSV/SVG artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides sim.seed from the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides sim.runs from the scenario.
    #[arg(long)]
    runs: Option<u64>,
    /// Overrides sim.dt from the scenario (days).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

impl Format {
    fn wants_csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
    fn wants_svg(self) -> bool {
        matches!(self, Format::Svg | Format::Both)
    }
}

/// Distinguishes bad input (exit 1) from failures during the run (exit 2).
enum CliError {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn or_invalid(self) -> Result<T, CliError>;
    fn or_runtime(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_invalid(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Validation(e.into()))
    }
    fn or_runtime(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::R0(args) => cmd_r0(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Integrate(args) => cmd_integrate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Allocate(args) => cmd_allocate(args),
        Command::Stability(args) => cmd_stability(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_scenario(args: &CommonArgs) -> Result<Scenario, CliError> {
    let mut scenario = match &args.scenario {
        Some(path) => Scenario::from_file(path)
            .with_context(|| format!("scenario file {}", path.display()))
            .or_invalid()?,
        None => Scenario::default(),
    };
    if let Some(seed) = args.seed {
        scenario.sim.rng_seed = seed;
    }
    if let Some(runs) = args.runs {
        scenario.sim.n_runs = runs;
    }
    if let Some(dt) = args.dt {
        if !(dt > 0.0) {
            return Err(CliError::Validation(anyhow!("--dt must be positive")));
        }
        scenario.sim.dt = dt;
    }
    Ok(scenario)
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .or_runtime()?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .or_runtime()?;
    println!("wrote {}", path.display());
    Ok(())
}

/// The closed-form r0 a scenario calls for, plus the profile when one is
/// involved.
fn scenario_r0(scenario: &Scenario) -> Result<(R0Result, Option<AttractivenessProfile>), CliError> {
    match scenario.mode {
        MixMode::Homogeneous => Ok((r0_homogeneous(&scenario.params), None)),
        MixMode::Heterogeneous => {
            let profile = scenario.build_profile().or_invalid()?;
            let res = match scenario.bait_mode {
                BaitMode::Uniform => r0_heterogeneous(&scenario.params, &profile),
                BaitMode::TargetedProportional => r0_proportional_targeted(
                    &scenario.params,
                    &profile,
                    scenario.params.bait_density,
                ),
            };
            Ok((res, Some(profile)))
        }
    }
}

fn mixing_of(scenario: &Scenario) -> Mixing {
    match (scenario.mode, scenario.bait_mode) {
        (MixMode::Homogeneous, _) => Mixing::Homogeneous,
        (MixMode::Heterogeneous, BaitMode::Uniform) => Mixing::HeterogeneousUniform,
        (MixMode::Heterogeneous, BaitMode::TargetedProportional) => Mixing::HeterogeneousTargeted,
    }
}

fn cmd_r0(args: &CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(args)?;
    let (res, profile) = scenario_r0(&scenario)?;
    println!("scenario: {:?}", res.scenario);
    if let Some(profile) = &profile {
        println!(
            "profile: {} classes, k_mean = {:.6}, kappa = {:.6}",
            profile.class_count(),
            profile.k_mean(),
            profile.kappa()
        );
    }
    println!("bait density x = {}", scenario.params.bait_density);
    println!("r0 = {:.6}", res.r0);
    println!("exposed decay rate = {:.6} /day", res.lambda_eff);
    println!("disease-free removed fraction = {:.6}", res.removed_frac);
    if res.r0 > 1.0 {
        println!("verdict: r0 > 1, outbreak possible");
    } else {
        println!("verdict: r0 <= 1, no outbreak");
    }
    match critical_bait_density(&scenario.params, mixing_of(&scenario), profile.as_ref()) {
        Ok(crit) if crit.already_subcritical => {
            println!("critical bait density: none needed (subcritical at x = 0)")
        }
        Ok(crit) => println!("critical bait density x* = {:.6}", crit.x_star),
        Err(e) => println!("critical bait density: {e}"),
    }
    Ok(())
}

fn cmd_sweep(args: &CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(args)?;
    let sweep = scenario
        .sweep
        .clone()
        .ok_or_else(|| CliError::Validation(anyhow!("scenario defines no sweep.* keys")))?;
    if sweep.points < 2 {
        return Err(CliError::Validation(anyhow!(
            "sweep needs at least 2 grid points, got {}",
            sweep.points
        )));
    }
    // Bare variable names refer to the params section.
    let variable = if sweep.variable.contains('.') {
        sweep.variable.clone()
    } else {
        format!("params.{}", sweep.variable)
    };
    let grid: Vec<f64> = (0..sweep.points)
        .map(|i| sweep.min + (sweep.max - sweep.min) * i as f64 / (sweep.points - 1) as f64)
        .collect();
    let series_overrides: Vec<String> = if sweep.series.is_empty() {
        vec![String::new()]
    } else {
        sweep.series.clone()
    };

    let mut labels = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for overrides in &series_overrides {
        let base = scenario.with_overrides(overrides).or_invalid()?;
        let label = if overrides.is_empty() {
            "r0".to_string()
        } else {
            overrides.replace("params.", "").replace(' ', "")
        };
        let mut column = Vec::with_capacity(grid.len());
        for &v in &grid {
            let point = base
                .with_overrides(&format!("{variable}={v}"))
                .or_invalid()?;
            let (res, _) = scenario_r0(&point)?;
            column.push(res.r0);
        }
        labels.push(label);
        columns.push(column);
    }

    let short = variable.trim_start_matches("params.");
    if args.format.wants_csv() {
        let mut csv = format!("{short},{}\n", labels.join(","));
        for (i, &v) in grid.iter().enumerate() {
            let row: Vec<String> = columns.iter().map(|c| c[i].to_string()).collect();
            csv.push_str(&format!("{v},{}\n", row.join(",")));
        }
        write_artifact(&args.out, "sweep.csv", &csv)?;
    }
    if args.format.wants_svg() {
        let series: Vec<Series> = labels
            .iter()
            .zip(&columns)
            .map(|(label, col)| Series {
                label,
                points: grid.iter().copied().zip(col.iter().copied()).collect(),
            })
            .collect();
        let svg = line_chart(
            &format!("Reproduction number vs. {short}"),
            short,
            "r0",
            &series,
            Some(1.0),
        );
        write_artifact(&args.out, "sweep.svg", &svg)?;
    }
    for (label, col) in labels.iter().zip(&columns) {
        match crossing_point(&grid, col, 1.0) {
            Some(x) => println!("{label}: crosses r0 = 1 at {short} = {x:.4}"),
            None => println!("{label}: no r0 = 1 crossing on the grid"),
        }
    }
    Ok(())
}

fn crossing_point(grid: &[f64], values: &[f64], level: f64) -> Option<f64> {
    values.windows(2).zip(grid.windows(2)).find_map(|(v, x)| {
        if (v[0] - level) * (v[1] - level) < 0.0 {
            let t = (level - v[0]) / (v[1] - v[0]);
            Some(x[0] + t * (x[1] - x[0]))
        } else {
            None
        }
    })
}

/// The bait allocation a scenario implies: proportional caps, all filled.
fn scenario_allocation(
    scenario: &Scenario,
    profile: &AttractivenessProfile,
) -> Result<BaitAllocation, CliError> {
    let constraints = proportional_constraints(profile, scenario.params.bait_density);
    BaitAllocation::new(profile, constraints.clone(), constraints).or_invalid()
}

fn integrate_scenario(scenario: &Scenario) -> Result<Trajectory, CliError> {
    let params = &scenario.params;
    let dt = scenario.sim.dt;
    let t_end = scenario.sim.t_end;
    let seed_fraction =
        scenario.sim.initial_infected_hosts as f64 / params.n_hosts as f64;
    match scenario.mode {
        MixMode::Homogeneous => {
            let init = baitsim::HomogeneousState {
                i_h: seed_fraction,
                i_m: 0.0,
                r_m: 0.0,
            };
            integrate_homogeneous(params, init, dt, t_end).or_invalid()
        }
        MixMode::Heterogeneous => {
            let profile = scenario.build_profile().or_invalid()?;
            let alloc = match scenario.bait_mode {
                BaitMode::Uniform => None,
                BaitMode::TargetedProportional => Some(scenario_allocation(&scenario, &profile)?),
            };
            let mut init = HeterogeneousState::disease_free(profile.class_count());
            // Seed the infection in the most attractive nonempty class, the
            // same convention the stochastic simulator uses.
            let seed_class = profile
                .classes()
                .iter()
                .enumerate()
                .filter(|(_, &(_, n))| n > 0)
                .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                .map(|(i, _)| i)
                .ok_or_else(|| CliError::Validation(anyhow!("profile has no hosts")))?;
            let class_n = profile.classes()[seed_class].1 as f64;
            init.i_h_by_class[seed_class] =
                (scenario.sim.initial_infected_hosts as f64 / class_n).min(1.0);
            integrate_heterogeneous(params, &profile, alloc.as_ref(), &init, dt, t_end)
                .or_invalid()
        }
    }
}

fn cmd_integrate(args: &CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(args)?;
    let traj = integrate_scenario(&scenario)?;
    println!(
        "integrated {} steps of dt = {} up to t = {}",
        traj.times.len() - 1,
        traj.dt,
        traj.times.last().unwrap()
    );
    let last = traj.final_state();
    for (label, value) in traj.labels.iter().zip(last).rev().take(4).rev() {
        println!("final {label} = {value:.6}");
    }
    if traj.clamp_events > 0 {
        println!("clamp events: {}", traj.clamp_events);
    }
    write_artifact(&args.out, "trajectory.csv", &trajectory_to_csv(&traj))
}

/// Total infected-host fraction of a trajectory: the i_h column when present,
/// otherwise the population-weighted sum of the per-class columns.
fn infected_fraction(traj: &Trajectory, profile: Option<&AttractivenessProfile>) -> Vec<f64> {
    if let Some(col) = traj.column("i_h") {
        return col;
    }
    let profile = profile.expect("per-class trajectory needs its profile");
    let n = profile.n_hosts() as f64;
    traj.rows
        .iter()
        .map(|row| {
            profile
                .classes()
                .iter()
                .enumerate()
                .map(|(c, &(_, n_c))| row[c] * n_c as f64 / n)
                .sum::<f64>()
        })
        .collect()
}

fn cmd_simulate(args: &CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(args)?;
    let profile = match scenario.mode {
        MixMode::Homogeneous => {
            AttractivenessProfile::single_class(1.0, scenario.params.n_hosts).or_invalid()?
        }
        MixMode::Heterogeneous => scenario.build_profile().or_invalid()?,
    };
    let alloc = match scenario.bait_mode {
        BaitMode::Uniform => None,
        BaitMode::TargetedProportional => Some(scenario_allocation(&scenario, &profile)?),
    };
    for warning in scenario
        .sim
        .check_probabilities(&scenario.params)
        .or_invalid()?
    {
        eprintln!("warning: {warning}");
    }
    println!(
        "running {} realizations, master seed {}",
        scenario.sim.n_runs, scenario.sim.rng_seed
    );
    let ensemble =
        run_ensemble(&scenario.sim, &scenario.params, &profile, alloc.as_ref()).or_runtime()?;
    let dde = integrate_scenario(&scenario)?;

    if args.format.wants_csv() {
        write_artifact(&args.out, "ensemble.csv", &mean_trajectory_to_csv(&ensemble))?;
        write_artifact(&args.out, "dde.csv", &trajectory_to_csv(&dde))?;
    }
    if args.format.wants_svg() {
        let mean_ih: Vec<f64> = ensemble
            .labels
            .iter()
            .position(|l| l == "i_h")
            .map(|idx| ensemble.mean.iter().map(|row| row[idx]).collect())
            .ok_or_else(|| CliError::Runtime(anyhow!("ensemble lacks an i_h column")))?;
        let dde_ih = infected_fraction(&dde, Some(&profile));
        let series = [
            Series {
                label: "ensemble mean i_h",
                points: ensemble.times.iter().copied().zip(mean_ih).collect(),
            },
            Series {
                label: "deterministic i_h",
                points: dde.times.iter().copied().zip(dde_ih).collect(),
            },
        ];
        let svg = line_chart(
            "Infected host fraction: ensemble mean vs. deterministic",
            "t (days)",
            "i_h",
            &series,
            None,
        );
        write_artifact(&args.out, "overlay.svg", &svg)?;
    }
    Ok(())
}

fn cmd_allocate(args: &CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(args)?;
    let profile = scenario.build_profile().or_invalid()?;
    let x = scenario.params.bait_density;
    let constraints = proportional_constraints(&profile, x);
    let budget: u64 = constraints.iter().sum();
    let alloc = greedy_allocate(&profile, &constraints, budget).or_invalid()?;
    print!("{}", alloc.to_text(&profile));
    println!("budget = {}, baits placed = {}", budget, alloc.total_baits());
    println!("effective density y = {:.6} (x = {x})", alloc.effective_y());
    let res = r0_proportional_targeted(&scenario.params, &profile, x);
    println!("targeted r0 = {:.6}", res.r0);

    // Confirm against the exhaustive search when the instance is small
    // enough to enumerate.
    let space: f64 = constraints.iter().map(|&c| (c + 1) as f64).product();
    if profile.class_count() <= 8 && space <= 1e6 {
        let oracle = brute_force_allocate(&profile, &constraints, budget).or_runtime()?;
        let agrees = oracle.allocation.baits() == alloc.baits();
        println!(
            "exhaustive check: optimum objective = {:.6}, {}{}",
            oracle.objective,
            if agrees { "matches greedy" } else { "DISAGREES with greedy" },
            if oracle.unique { " (unique)" } else { " (ties exist)" },
        );
        if !agrees {
            return Err(CliError::Runtime(anyhow!(
                "greedy allocation differs from the exhaustive optimum"
            )));
        }
    }
    if args.format.wants_csv() {
        write_artifact(&args.out, "allocation.txt", &alloc.to_text(&profile))?;
    }
    Ok(())
}

fn cmd_stability(args: &CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(args)?;
    let profile = match scenario.mode {
        MixMode::Homogeneous => None,
        MixMode::Heterogeneous => Some(scenario.build_profile().or_invalid()?),
    };
    let verdict = stability_probe(&scenario.params, mixing_of(&scenario), profile.as_ref());
    println!("r0 = {:.6}", verdict.r0);
    println!("F(0) = {:.6e}", verdict.f_at_zero);
    println!("linear factor root = {:.6}", verdict.linear_factor_root);
    match verdict.root {
        Some(root) => println!("positive real root at lambda = {root:.6}"),
        None => println!("no positive real root (F is positive on [0, inf))"),
    }
    println!(
        "verdict: disease-free equilibrium is {}",
        if verdict.unstable { "unstable" } else { "locally stable" }
    );
    Ok(())
}
