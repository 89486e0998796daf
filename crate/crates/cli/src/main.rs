use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use embedlab::aggregate::{aggregate, write_summary};
use embedlab::config::{CheckName, ExperimentConfig, Format};
use embedlab::manifest::manifest_path;
use embedlab::report::{write_rows, Row};
use embedlab::runner::{self, with_pool};
use embedlab::suites::{self, SUITES};
use embedlab_core::rng::{derive_seed, substream};
use embedlab_core::vector_models::RandomVectorModel;

#[derive(Parser)]
#[command(name = "embedlab", version, about = "Random column-embedding experiments")]
struct Cli {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw vectors from the configured model, one per row.
    Sample {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Thin-shell and moment-equivalence estimates.
    Suitability,
    /// Distortion of the configured set and extremal singular values.
    Distort,
    /// Sparse overlap statistics: assumption fit, dimension reduction, self-bounding, order tail.
    Sparse,
    /// Decoupling identity, telescope, moment and chaining checks.
    Decouple,
    /// Every check listed in the config.
    Run,
    /// Runs an acceptance suite by name or number, or `all`.
    Verify { suite: String },
    /// Pass rates and ratio quantiles over report files.
    Aggregate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn family(cmd: &Command, cfg: &ExperimentConfig) -> Vec<CheckName> {
    use CheckName::*;
    let finite = cfg.set.is_finite();
    let members: Vec<CheckName> = match cmd {
        Command::Suitability => vec![ThinShell, Suitability],
        Command::Distort => vec![DistortionFinite, DistortionSphere, SingularValues],
        Command::Sparse => vec![OverlapFit, DimensionReduction, SelfBounding, OrderStatisticTail],
        Command::Decouple => vec![DecouplingIdentity, Bilinearity, BernoulliMoments, ChainDiagnostics],
        _ => return cfg.checks.clone(),
    };
    let chosen: Vec<CheckName> = cfg.checks.iter().copied().filter(|c| members.contains(c)).collect();
    if !chosen.is_empty() {
        return chosen;
    }
    members
        .into_iter()
        .filter(|c| !(c.needs_points() && !finite) && !(*c == DistortionSphere && finite))
        .collect()
}

fn open_out(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let Some(path) = &cli.config else {
        bail!("this command needs --config <path>");
    };
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.path = Some(out.clone());
    }
    if let Some(format) = cli.format {
        cfg.output.format = format;
    }
    Ok(cfg)
}

fn emit(rows: &[Row], format: Format, out: Option<&Path>) -> anyhow::Result<()> {
    let mut w = open_out(out)?;
    write_rows(rows, format, &mut w)?;
    w.flush()?;
    Ok(())
}

fn sample(cfg: &ExperimentConfig, count: usize, out: Option<&Path>) -> anyhow::Result<()> {
    let mut model = RandomVectorModel::new(cfg.model.kind, cfg.matrix.m, derive_seed(cfg.master_seed, "sample", 0));
    if let Some(dof) = cfg.model.dof {
        model = model.with_dof(dof);
    }
    let sampler = model.sampler()?;
    let mut rng = substream(cfg.master_seed, "sample_draws", 0);
    let draws: Vec<Vec<f64>> = (0..count).map(|_| sampler.draw(&mut rng)).collect();
    let mut w = open_out(out)?;
    match cfg.output.format {
        Format::Csv => {
            let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(&mut w);
            for d in &draws {
                csv.serialize(d)?;
            }
            csv.flush()?;
        }
        Format::Json => {
            serde_json::to_writer(&mut w, &draws)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    match &cli.command {
        Command::Verify { suite } => {
            let ids: Vec<usize> = if suite == "all" {
                (1..=SUITES.len()).collect()
            } else {
                vec![suites::resolve(suite)?]
            };
            let seed = cli.seed.unwrap_or(suites::DEFAULT_SEED);
            let outcomes = with_pool(cli.jobs, || {
                ids.iter().map(|&id| suites::run_suite(id, seed)).collect::<embedlab::Result<Vec<_>>>()
            })??;
            for o in &outcomes {
                eprintln!("{}", o.line());
            }
            let rows: Vec<Row> = outcomes.iter().flat_map(|o| o.rows.clone()).collect();
            emit(&rows, cli.format.unwrap_or_default(), cli.out.as_deref())?;
            Ok(outcomes.iter().all(|o| o.passed))
        }
        Command::Aggregate { paths } => {
            let summary = aggregate(paths)?;
            let mut w = open_out(cli.out.as_deref())?;
            match cli.format.unwrap_or_default() {
                Format::Csv => write_summary(&summary, &mut w)?,
                Format::Json => {
                    serde_json::to_writer_pretty(&mut w, &summary)?;
                    writeln!(w)?;
                }
            }
            w.flush()?;
            Ok(true)
        }
        Command::Sample { count } => {
            let cfg = load_config(cli)?;
            sample(&cfg, count.unwrap_or(cfg.matrix.n), cfg.output.path.as_deref())?;
            Ok(true)
        }
        cmd => {
            let cfg = load_config(cli)?;
            let checks = family(cmd, &cfg);
            let mut output = runner::run(&cfg, &checks, cli.jobs)?;
            let out = cfg.output.path.as_deref();
            emit(&output.rows, cfg.output.format, out)?;
            if let Some(path) = out {
                output.manifest.report = Some(path.to_path_buf());
                output.manifest.write(&manifest_path(path))?;
            }
            Ok(output.all_pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
