//! Command-line front end for simulating panels, fitting the recency model
//! and running the simulation study.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or parse
//! error, 3 convergence-gate failure of a single fit.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serorecency::bayes::{FitData, FollowUp, ModelSpec};
use serorecency::mcmc::io::{read_chain_output, read_fit_info, write_chain_output, write_fit_info, FitInfo};
use serorecency::mcmc::{multi_chain_ess, run_chain, split_rhat, SamplerConfig};
use serorecency::recency::{self, DEFAULT_GRID, DEFAULT_RHAT_GATE};
use serorecency::simgen::{read_dataset, read_scenario, write_dataset, write_scenario};
use serorecency::simgen::{simulate_dataset, Role, ScenarioConfig, ScenarioName};
use serorecency::study::{run_study, StudyConfig, SUMMARY_FILE};
use serorecency::{Error, ModelId};

#[derive(Parser)]
#[command(name = "serorecency", version, about = "Bayesian estimation of HIV seroconversion recency from biomarker growth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replicate panel datasets.
    Simulate(SimulateArgs),
    /// Fit one model to one dataset, inferring one new individual's offset.
    Fit(FitArgs),
    /// Summarize the offset draws of a fit.
    Recency(RecencyArgs),
    /// Run the full simulation study.
    Study(StudyArgs),
    /// Print R-hat and effective sample sizes of a fit.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Clone)]
struct SamplerArgs {
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    #[arg(long, default_value_t = 10_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    /// Length of the adaptation window in iterations.
    #[arg(long, default_value_t = 5_000)]
    adapt: usize,
}

impl SamplerArgs {
    fn config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            n_chains: self.chains,
            iterations: self.iterations,
            burn_in: self.burn_in,
            thinning: self.thin,
            adaptation_window: self.adapt,
            seed,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "realistic")]
    scenario: ScenarioName,
    /// Model whose parameter block generates the data.
    #[arg(long)]
    model: ModelId,
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Scenario file overriding the built-in scenario (and its seed).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset file written by `simulate`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: ModelId,
    /// Identifier of the out-of-sample individual; the first one by default.
    #[arg(long)]
    individual: Option<usize>,
    #[arg(long, default_value = "diagnosis")]
    truncate_followup: FollowUp,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Length of the seroconversion interval in years.
    #[arg(long, default_value_t = 1.0)]
    sero_interval: f64,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long, default_value_t = DEFAULT_RHAT_GATE)]
    rhat_gate: f64,
    /// Output directory for chain files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RecencyArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    chains: PathBuf,
    /// Recency horizons in months.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 4.0, 6.0])]
    months: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_RHAT_GATE)]
    rhat_gate: f64,
    /// Directory for the summary and density files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, default_value = "realistic")]
    scenario: ScenarioName,
    /// Models to fit; all seven when omitted.
    #[arg(long, value_delimiter = ',')]
    model: Vec<ModelId>,
    #[arg(long, default_value_t = 20)]
    replicates: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "diagnosis")]
    truncate_followup: FollowUp,
    /// Positions (0-4) of the out-of-sample individuals to fit; all by default.
    #[arg(long, value_delimiter = ',')]
    individuals: Vec<usize>,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long, default_value_t = DEFAULT_RHAT_GATE)]
    rhat_gate: f64,
    #[arg(long)]
    quiet: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    chains: PathBuf,
}

enum Failure {
    Usage(String),
    Data(String),
    Gate(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let config = match &a.config {
        Some(path) => read_scenario(path)?,
        None => ScenarioConfig::for_scenario(a.scenario, a.seed),
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    write_scenario(&a.out.join("scenario.toml"), &config)?;
    for r in 0..a.replicates {
        let panel = simulate_dataset(&config, a.model, r)?;
        let name = format!("{}_{}_rep{r}.csv", config.name, a.model.name().replace('&', "_"));
        write_dataset(&a.out.join(&name), &panel)?;
        println!("{}", a.out.join(name).display());
    }
    Ok(())
}

fn tau_gate(chains: &[Vec<f64>], gate: f64) -> Option<f64> {
    if chains.len() < 2 {
        return None;
    }
    split_rhat(chains).ok().map(|r| r.value).filter(|v| !(*v < gate))
}

fn fit(a: FitArgs) -> Result<(), Failure> {
    let panel = read_dataset(&a.data)?;
    let spec = ModelSpec::new(a.model.growth_specs(), a.sero_interval)?;
    let new = match a.individual {
        Some(id) => panel
            .individuals
            .iter()
            .find(|i| i.id == id && i.role == Role::OutOfSample)
            .ok_or_else(|| Failure::Data(format!("no out-of-sample individual with id {id}")))?,
        None => panel
            .out_of_sample()
            .next()
            .ok_or_else(|| Failure::Data("the dataset has no out-of-sample individual".into()))?,
    };
    let data = FitData::from_panel(&panel, new.id, a.truncate_followup, &spec)?;
    let output = run_chain(&data, &spec, &a.sampler.config(a.seed))?;
    write_chain_output(&a.out, &output)?;
    write_fit_info(
        &a.out,
        &FitInfo {
            model: a.model.name().to_string(),
            scenario: panel.scenario.clone(),
            replicate: panel.replicate,
            individual: new.id,
            tau_truth: new.tau,
            followup: a.truncate_followup,
            sero_interval: a.sero_interval,
        },
    )?;
    for (c, e) in output.failures() {
        eprintln!("chain {c} failed: {e}");
    }
    let chains = output.offset_chains();
    if chains.is_empty() {
        return Err(Failure::Data("every chain failed".into()));
    }
    println!("wrote {} chains to {}", chains.len(), a.out.display());
    if let Some(r) = tau_gate(&chains, a.rhat_gate) {
        return Err(Failure::Gate(format!("offset R-hat {r} is not below {}", a.rhat_gate)));
    }
    Ok(())
}

fn recency_cmd(a: RecencyArgs) -> Result<(), Failure> {
    let output = read_chain_output(&a.chains)?;
    let info = read_fit_info(&a.chains)?;
    let upper = info.as_ref().map_or(1.0, |i| i.sero_interval);
    let xs: Vec<f64> = a.months.iter().map(|m| m / 12.0).collect();
    let summary = recency::summarize(&output, &xs, upper, a.rhat_gate)?;
    let (replicate, model, scenario, tau) = match &info {
        Some(i) => (i.replicate, i.model.clone(), i.scenario.clone(), i.tau_truth),
        None => (0, "NA".into(), "NA".into(), None),
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    let rows = recency::summary_rows(&summary, replicate, &model, &scenario, tau);
    recency::write_summary_rows(&a.out.join("recency.csv"), &rows)?;
    recency::write_density(&a.out.join("density.csv"), &summary.density)?;
    for (x, p) in &summary.p_x {
        println!("P(tau <= {x}) = {p}");
    }
    println!(
        "95% HPD [{}, {}], median {}, {} draws ({} density points)",
        summary.hpd95.low, summary.hpd95.high, summary.median, summary.n_draws, DEFAULT_GRID
    );
    if !summary.convergence.passed {
        let r = summary.convergence.rhat.map_or(f64::NAN, |r| r.value);
        eprintln!("warning: offset R-hat {r} fails the gate {}", a.rhat_gate);
        return Err(Failure::Gate(format!("offset R-hat {r} is not below {}", a.rhat_gate)));
    }
    Ok(())
}

fn study(a: StudyArgs) -> Result<(), Failure> {
    let config = StudyConfig {
        scenario: a.scenario,
        models: if a.model.is_empty() { ModelId::ALL.to_vec() } else { a.model },
        replicates: a.replicates,
        followup: a.truncate_followup,
        sampler: a.sampler.config(a.seed),
        out_dir: a.out,
        master_seed: a.seed,
        rhat_gate: a.rhat_gate,
        individuals: (!a.individuals.is_empty()).then_some(a.individuals),
        progress: !a.quiet,
        ..StudyConfig::default()
    };
    let result = run_study(&config)?;
    let failed = result.fits.iter().filter(|f| f.summary().is_none()).count();
    println!(
        "{} fits, {} failed; summary in {}",
        result.fits.len(),
        failed,
        config.out_dir.join(SUMMARY_FILE).display()
    );
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> Result<(), Failure> {
    let output = read_chain_output(&a.chains)?;
    let mut table = String::from("parameter,rhat,ess\n");
    for name in &output.param_names {
        let chains = output.chains_of(name)?;
        let rhat = if chains.len() >= 2 { split_rhat(&chains).ok().map(|r| r.value) } else { None };
        let ess = multi_chain_ess(&chains).ok().map(|e| e.value);
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
        table.push_str(&format!("{name},{},{}\n", fmt(rhat), fmt(ess)));
    }
    let _ = std::io::stdout().write_all(table.as_bytes());
    for (c, e) in output.failures() {
        eprintln!("chain {c} failed: {e}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Recency(a) => recency_cmd(a),
        Command::Study(a) => study(a),
        Command::Diagnose(a) => diagnose(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Gate(m)) => {
            eprintln!("convergence gate failed: {m}");
            ExitCode::from(3)
        }
    }
}
