use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use krein_runner::scenario::{revalidate, AsymptSpec, Scenario, ScenarioFile};
use krein_runner::{resolve, run, summary_lines, AsymptCheck, RunOptions, RunReport};

/// Environment variable naming the solution cache directory.
const CACHE_ENV: &str = "KREIN_CACHE_DIR";

#[derive(Parser)]
#[command(name = "krein", version, about = "Krein systems, spectral transforms and scattering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print the full report as JSON instead of the summary.
    #[arg(long, global = true)]
    json: bool,
    /// Override the solver's substep factor.
    #[arg(long, global = true)]
    osc_factor: Option<f64>,
    /// Override the threshold below which |Pi| counts as a zero.
    #[arg(long, global = true)]
    zero_threshold: Option<f64>,
    /// Directory for CSV artifacts and report.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Target {
    /// Scenario file, or the name of a bundled scenario.
    scenario: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Oracle {
    Spectral,
    Fd,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the Krein system on the scenario grid and build Pi.
    Solve(Target),
    /// Print the spectral density on the scenario grid as CSV.
    Sigma(Target),
    /// Structural identities and the step-halving study.
    Identities(Target),
    /// Plancherel defects of the P, E and psi transforms.
    Transform(Target),
    /// Maximal-function ratios and tail oscillation.
    MrCheck(Target),
    /// Wave-operator iterates and the propagator cross-check.
    Scatter {
        #[command(flatten)]
        target: Target,
        /// Replace the scenario's time ladder.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "spectral")]
        oracle: Oracle,
    },
    /// Fresnel, stationary-phase and free-evolution checks.
    Asympt {
        /// Scenario providing `[asympt]` settings; defaults are used without one.
        scenario: Option<String>,
        #[arg(long, value_enum)]
        check: Option<AsymptCheck>,
    },
    /// Every experiment the scenario declares.
    Run(Target),
    /// List the bundled scenarios.
    List,
}

fn load(arg: &str) -> anyhow::Result<Scenario> {
    resolve(arg).map_err(|e| anyhow::anyhow!("{e}"))
}

fn asympt_only() -> Scenario {
    let file = ScenarioFile {
        name: "asympt".into(),
        description: None,
        seed: 0,
        coefficient: toml::from_str("kind = \"zero\"").expect("static coefficient"),
        grid: None,
        solver: Default::default(),
        identities: None,
        plancherel: None,
        normalization: None,
        mr_check: None,
        scatter: None,
        propagator: None,
        asympt: Some(AsymptSpec::default()),
    };
    Scenario { file, shape: krein_core::coefficient::Shape::Zero, source: None }
}

fn only(names: &[&str]) -> Option<Vec<String>> {
    Some(names.iter().map(|s| s.to_string()).collect())
}

fn execute(cli: &Cli) -> anyhow::Result<Option<RunReport>> {
    let mut opts = RunOptions {
        cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
        out_dir: cli.out.clone(),
        osc_factor: cli.osc_factor,
        zero_threshold: cli.zero_threshold,
        ..Default::default()
    };
    let sc = match &cli.command {
        Command::List => {
            for name in krein_runner::scenario::bundled_names() {
                println!("{name}");
            }
            return Ok(None);
        }
        Command::Solve(t) => {
            opts.only = only(&["solve"]);
            load(&t.scenario)?
        }
        Command::Sigma(t) => {
            print_sigma(&load(&t.scenario)?, &opts)?;
            return Ok(None);
        }
        Command::Identities(t) => {
            opts.only = only(&["identities"]);
            load(&t.scenario)?
        }
        Command::Transform(t) => {
            opts.only = only(&["plancherel", "normalization"]);
            load(&t.scenario)?
        }
        Command::MrCheck(t) => {
            opts.only = only(&["mr_check"]);
            load(&t.scenario)?
        }
        Command::Scatter { target, times, oracle } => {
            let mut sc = load(&target.scenario)?;
            opts.only = match oracle {
                Oracle::Spectral => only(&["scatter"]),
                Oracle::Fd => only(&["propagator"]),
                Oracle::Both => only(&["scatter", "propagator"]),
            };
            if let Some(times) = times {
                if let Some(s) = sc.file.scatter.as_mut() {
                    s.times = times.clone();
                }
                if let Some(p) = sc.file.propagator.as_mut() {
                    p.times = times.clone();
                }
                revalidate(&sc).map_err(|e| anyhow::anyhow!("{e}"))?;
            }
            sc
        }
        Command::Asympt { scenario, check } => {
            opts.only = only(&["asympt"]);
            opts.asympt_check = *check;
            match scenario {
                Some(s) => {
                    let mut sc = load(s)?;
                    sc.file.asympt.get_or_insert_with(AsymptSpec::default);
                    sc
                }
                None => asympt_only(),
            }
        }
        Command::Run(t) => load(&t.scenario)?,
    };
    Ok(Some(run(&sc, &opts)?))
}

fn print_sigma(sc: &Scenario, opts: &RunOptions) -> anyhow::Result<()> {
    let mut solver = sc.file.solver.clone();
    solver.osc_factor = opts.osc_factor.unwrap_or(solver.osc_factor);
    solver.zero_threshold = opts.zero_threshold.unwrap_or(solver.zero_threshold);
    let Some(g) = &sc.file.grid else {
        anyhow::bail!("scenario {} has no [grid] section", sc.file.name);
    };
    let s = krein_runner::experiments::solve_and_measure(
        &sc.shape,
        krein_core::RadialGrid::with_extent(g.r_step, g.r_extent)?,
        krein_core::SpectralGrid::new(g.k_half_width, g.k_step)?,
        &solver,
        opts.cache_dir.as_deref(),
    )?;
    println!("k,density");
    for (k, d) in s.m.grid().nodes().zip(s.m.density()) {
        println!("{k},{d}");
    }
    for pm in s.m.point_masses() {
        eprintln!("point mass {} at k = {}", pm.weight, pm.location);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(report)) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                for line in summary_lines(&report) {
                    println!("{line}");
                }
            }
            if report.global_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
