use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qtlnet::mcmc::SummaryRule;
use qtlnet::simulate::SignalStrength;
use qtlnet_cli::*;

#[derive(Parser)]
#[command(name = "qtlnet", version, about = "Causal phenotype networks from F2 crosses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an F2 cross from a preset or a serialized model.
    Simulate(SimulateArgs),
    /// Genome scan of one trait, optionally conditioned on others.
    Scan(ScanArgs),
    /// Sample network structures and write the pooled posterior.
    Qtlnet(QtlnetArgs),
    /// Summarize a posterior into a consensus network.
    Summarize(SummarizeArgs),
    /// Decompose QTL-to-trait correlations into directed paths.
    Paths(PathsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Strong,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Max,
    Threshold,
}

#[derive(Args)]
struct CrossArgs {
    /// Cross CSV (phenotype columns, then marker columns).
    #[arg(long)]
    cross: PathBuf,
    /// Optional map CSV overriding the marker positions in the cross file.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Pseudomarker grid step in cM.
    #[arg(long, default_value_t = 2.0)]
    step: f64,
    /// Genotyping error rate for the HMM.
    #[arg(long = "error-rate", default_value_t = 1e-4)]
    error_rate: f64,
}

impl CrossArgs {
    fn input(&self) -> CrossInput {
        CrossInput {
            cross: self.cross.clone(),
            map: self.map.clone(),
            step: self.step,
            error_rate: self.error_rate,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, conflicts_with = "model")]
    preset: Option<Preset>,
    /// Model JSON (a bare model); requires --map.
    #[arg(long, requires = "map")]
    model: Option<PathBuf>,
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Omit timestamps so reruns are byte-identical.
    #[arg(long)]
    reproducible: bool,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    cross: CrossArgs,
    #[arg(long = "trait")]
    trait_name: String,
    /// Comma-separated conditioning traits.
    #[arg(long, value_delimiter = ',')]
    conditioning: Vec<String>,
    #[arg(long, default_value_t = qtlnet::mapping::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct QtlnetArgs {
    #[command(flatten)]
    cross: CrossArgs,
    #[arg(long, default_value_t = qtlnet::mapping::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 30_000)]
    iterations: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    #[arg(long, default_value_t = 300)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    reproducible: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    posterior: PathBuf,
    #[arg(long, value_enum, default_value_t = Rule::Max)]
    rule: Rule,
    /// Minimum posterior for an arc under the threshold rule.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    reproducible: bool,
}

#[derive(Args)]
struct PathsArgs {
    /// Model JSON, either bare or as written to truth.json.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn run(cli: Cli) -> qtlnet::Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let source = match (a.preset, a.model, a.map) {
                (_, Some(model), Some(map)) => ModelSource::File { model, map },
                (Some(Preset::Weak), None, _) => ModelSource::Preset(SignalStrength::Weak),
                _ => ModelSource::Preset(SignalStrength::Strong),
            };
            cmd_simulate(&SimulateConfig {
                source,
                n: a.n,
                seed: a.seed,
                out: a.out,
                reproducible: a.reproducible,
            })?;
        }
        Command::Scan(a) => {
            let chroms = cmd_scan(&ScanConfig {
                input: a.cross.input(),
                trait_name: a.trait_name,
                conditioning: a.conditioning,
                threshold: a.threshold,
                out: a.out,
            })?;
            println!("{}", chroms.join(","));
        }
        Command::Qtlnet(a) => {
            let doc = cmd_qtlnet(&QtlnetConfig {
                input: a.cross.input(),
                threshold: a.threshold,
                iterations: a.iterations,
                thin: a.thin,
                burnin: a.burnin,
                chains: a.chains,
                seed: a.seed,
                out: a.out,
                reproducible: a.reproducible,
            })?;
            log::info!("{} samples retained across chains", doc.samples);
        }
        Command::Summarize(a) => {
            let rule = match a.rule {
                Rule::Max => SummaryRule::Max,
                Rule::Threshold => SummaryRule::Threshold { tau: a.tau },
            };
            cmd_summarize(&SummarizeConfig {
                posterior: a.posterior,
                rule,
                out: a.out,
                reproducible: a.reproducible,
            })?;
        }
        Command::Paths(a) => {
            cmd_paths(&PathsConfig {
                model: a.model,
                target: a.target,
                out: a.out,
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
