use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use enp_lab::eval::report;
use enp_lab::harness::csv::{fmt_f64, write_gaps, write_oracle, write_results, write_table};
use enp_lab::harness::fig2::SUMMARY_HEADER;
use enp_lab::harness::{default_gap_config, gen_gap, run, summarize, ExperimentConfig, Panel};
use enp_lab::objectives::{train, train_enp_pipeline, Method, ModelKind, ObjectiveSpec, Source, TrainConfig};
use enp_lab::predictors::{format_model, load_model, save_model, Model, Routing};
use enp_lab::synthdata::{attach_annotations, format_dataset, load_dataset, sample_dataset, save_dataset};
use enp_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "enp-lab", version, about = "Two-context classification experiments")]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PanelArg {
    A,
    B,
    C,
    D,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from the configured parameters.
    Gen {
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Fraction of examples that carry a feature annotation.
        #[arg(long, default_value_t = 0.0)]
        fraction: f64,
    },
    /// Train one model on a dataset file.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// erm, irm, icc, condro or enp.
        #[arg(long)]
        method: String,
        #[arg(long, default_value = "linear")]
        model_kind: String,
    },
    /// Monte-Carlo accuracy of a saved model under the configured parameters.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        n_mc: usize,
        /// Route composite models with the true context instead of their router.
        #[arg(long)]
        oracle_routing: bool,
    },
    /// Closed-form accuracies and generalization bounds.
    Oracle {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
    /// Run every cell of the configured experiment.
    Run,
    /// Run a simulation panel with its default configuration.
    #[command(name = "repro-fig2")]
    ReproFig2 {
        #[arg(long, value_enum)]
        panel: PanelArg,
    },
    /// Measure minority-context generalization gaps.
    #[command(name = "gen-gap")]
    GenGap,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::from_toml_str("")?,
    };
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    Ok(cfg)
}

fn out_path(cli: &Cli, cfg: Option<&ExperimentConfig>) -> Option<PathBuf> {
    cli.out.clone().or_else(|| cfg.and_then(|c| c.output_path.clone()))
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen { n, fraction } => {
            let cfg = load_config(cli)?;
            let ds = attach_annotations(sample_dataset(&cfg.params, *n, cfg.base_seed)?, *fraction)?;
            match out_path(cli, Some(&cfg)) {
                Some(p) => save_dataset(&ds, p),
                None => {
                    print!("{}", format_dataset(&ds));
                    Ok(())
                }
            }
        }
        Command::Train {
            data,
            method,
            model_kind,
        } => {
            let cfg = load_config(cli)?;
            let ds = load_dataset(data)?;
            let kind = ModelKind::from_name(model_kind)
                .ok_or_else(|| Error::Config(format!("unknown model kind `{model_kind}`")))?;
            let tc = TrainConfig {
                seed: cfg.base_seed,
                model_kind: kind,
                ..cfg.train.clone()
            };
            let (model, steps) = if method == "enp" {
                let (pipe, steps) = train_enp_pipeline(&ds, cfg.mask_policy, &tc)?;
                (Model::Enp(pipe), steps)
            } else {
                let m = Method::from_name(method)
                    .ok_or_else(|| Error::Config(format!("unknown method `{method}`")))?;
                let t = train(&ObjectiveSpec::empirical(m), Source::Data(&ds), &tc)?;
                (t.model, t.steps)
            };
            log::info!("trained {method} in {steps} steps");
            match out_path(cli, None) {
                Some(p) => save_model(&model, p),
                None => {
                    print!("{}", format_model(&model));
                    Ok(())
                }
            }
        }
        Command::Eval {
            model,
            n_mc,
            oracle_routing,
        } => {
            let cfg = load_config(cli)?;
            let m = load_model(model)?;
            let routing = if *oracle_routing { Routing::Oracle } else { Routing::EndToEnd };
            let r = report(&m, &cfg.params, *n_mc, cfg.base_seed, routing)?;
            let row = vec![
                fmt_f64(r.acc_c1),
                fmt_f64(r.acc_c2),
                fmt_f64(r.balanced),
                fmt_f64(r.worst),
                r.n_eval.to_string(),
                fmt_f64(r.stderr_c1),
                fmt_f64(r.stderr_c2),
            ];
            write_table(
                output(out_path(cli, None).as_deref())?,
                &["acc_c1", "acc_c2", "balanced", "worst", "n_eval", "stderr_c1", "stderr_c2"],
                &[row],
            )
        }
        Command::Oracle { n, delta } => {
            let cfg = load_config(cli)?;
            write_oracle(output(out_path(cli, Some(&cfg)).as_deref())?, &cfg.params, *n, *delta)
        }
        Command::Run => {
            let cfg = load_config(cli)?;
            let rows = run(&cfg, cli.jobs)?;
            write_results(output(out_path(cli, Some(&cfg)).as_deref())?, &rows)
        }
        Command::ReproFig2 { panel } => {
            let panel = match panel {
                PanelArg::A => Panel::A,
                PanelArg::B => Panel::B,
                PanelArg::C => Panel::C,
                PanelArg::D => Panel::D,
            };
            let mut cfg = panel.config();
            if let Some(s) = cli.seed {
                cfg.base_seed = s;
            }
            let rows = run(&cfg, cli.jobs)?;
            let summary: Vec<_> = summarize(&rows, cfg.sweep.as_ref().map(|s| s.axis))
                .iter()
                .map(|s| s.record())
                .collect();
            let out = cli.out.clone();
            if let Some(p) = &out {
                let raw = p.with_extension("raw.csv");
                write_results(BufWriter::new(File::create(&raw)?), &rows)?;
                log::info!("per-seed rows written to {}", raw.display());
            }
            write_table(output(out.as_deref())?, &SUMMARY_HEADER, &summary)
        }
        Command::GenGap => {
            let mut cfg = match &cli.config {
                Some(_) => load_config(cli)?,
                None => default_gap_config(),
            };
            if let Some(s) = cli.seed {
                cfg.base_seed = s;
            }
            let rows = gen_gap(&cfg, cli.jobs)?;
            write_gaps(output(out_path(cli, Some(&cfg)).as_deref())?, &rows)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
