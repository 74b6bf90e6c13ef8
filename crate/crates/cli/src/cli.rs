//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sensekit::profiles::ProbeMode;
use sensekit::senselearn::ExportFormat;

use crate::commands::{self, Context, EvalTask};
use crate::config::PipelineConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sensekit", version, about = "Sense embeddings from layer-pooled contextual representations")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (overrides `workers`).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Random seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override a config field, e.g. `--set learn.level=synset`. Repeatable.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Wsd,
    Usm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Text,
    Binary,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LevelArg {
    Sensekey,
    Synset,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MergeArg {
    Average,
    Concat,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BaselineArg {
    Mfs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every layer by 1NN F1 on the validation corpus.
    Probe {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Build the configured sense profile.
    Profile {
        /// Also write a profile for every temperature in the sweep set.
        #[arg(long)]
        sweep: bool,
    },
    /// Learn, propagate and optionally gloss-merge sense embeddings.
    Learn {
        /// Overrides `learn.level`.
        #[arg(long, value_enum)]
        level: Option<LevelArg>,
        /// Overrides `learn.merge`.
        #[arg(long, value_enum)]
        merge: Option<MergeArg>,
    },
    /// Run an evaluation task.
    Evaluate {
        #[command(subcommand)]
        task: EvalCommand,
    },
    /// Print the top-k senses of store records as TSV.
    Match {
        /// Store files holding the query records.
        #[arg(long = "store", required = true)]
        stores: Vec<PathBuf>,
        /// Record keys to match; all non-gloss records when omitted.
        #[arg(long, value_delimiter = ',')]
        keys: Vec<String>,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
        /// Write the TSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convert sense embeddings between text and binary.
    Export {
        /// Input file; the learned embeddings when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Statistics, heatmaps, PCA coordinates and silhouettes.
    Analyze {
        /// Maximum number of embeddings used for PCA and silhouettes.
        #[arg(long, default_value_t = 2000)]
        sample: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// All-words WSD on every configured test corpus.
    Wsd {
        #[arg(long, value_enum)]
        baseline: Option<BaselineArg>,
    },
    /// Uninformed sense matching against the whole index.
    Usm,
    /// Word-in-context binary classification.
    Wic,
    /// Graded word similarity in context.
    Gwcs,
    /// Contextual word similarity.
    Scws,
    /// Sense-level similarity on reduced embeddings.
    Sid,
}

impl Command {
    /// Config overrides implied by command flags; they apply after `--set`.
    fn overrides(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Command::Learn { level, merge } = self {
            if let Some(level) = level {
                let name = match level {
                    LevelArg::Sensekey => "sensekey",
                    LevelArg::Synset => "synset",
                };
                out.push(format!("learn.level={name}"));
            }
            if let Some(merge) = merge {
                let name = match merge {
                    MergeArg::Average => "average",
                    MergeArg::Concat => "concat",
                };
                out.push(format!("learn.merge={name}"));
            }
        }
        out
    }
}

impl GlobalArgs {
    pub fn load_config(&self) -> Result<PipelineConfig, CliError> {
        self.load_config_with(&[])
    }

    fn load_config_with(&self, extra: &[String]) -> Result<PipelineConfig, CliError> {
        let mut overrides = self.overrides.clone();
        overrides.extend_from_slice(extra);
        if let Some(out) = &self.out {
            overrides.push(format!("out_dir={}", toml_string(&out.to_string_lossy())));
        }
        if let Some(w) = self.workers {
            overrides.push(format!("workers={w}"));
        }
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        let config = PipelineConfig::load(self.config.as_deref(), &overrides)?;
        config.validate()?;
        Ok(config)
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Runs one command inside a worker pool of the configured size.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.global.load_config_with(&cli.command.overrides())?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Internal(e.to_string()))?;
    let mut ctx = Context::new(config);
    pool.install(|| dispatch(&mut ctx, cli.command))
}

fn dispatch(ctx: &mut Context, command: Command) -> Result<(), CliError> {
    match command {
        Command::Probe { mode } => commands::probe(
            ctx,
            mode.map(|m| match m {
                ModeArg::Wsd => ProbeMode::Wsd,
                ModeArg::Usm => ProbeMode::Usm,
            }),
        ),
        Command::Profile { sweep } => commands::profile(ctx, sweep),
        Command::Learn { .. } => commands::learn(ctx),
        Command::Evaluate { task } => {
            let task = match task {
                EvalCommand::Wsd { baseline } => EvalTask::Wsd { mfs: baseline.is_some() },
                EvalCommand::Usm => EvalTask::Usm,
                EvalCommand::Wic => EvalTask::Wic,
                EvalCommand::Gwcs => EvalTask::Gwcs,
                EvalCommand::Scws => EvalTask::Scws,
                EvalCommand::Sid => EvalTask::Sid,
            };
            commands::evaluate(ctx, task)
        }
        Command::Match { stores, keys, k, output } => {
            commands::match_records(ctx, &stores, &keys, k, output.as_deref())
        }
        Command::Export { input, format, output } => {
            let format = match format {
                FormatArg::Text => ExportFormat::Text,
                FormatArg::Binary => ExportFormat::Binary,
            };
            commands::export(ctx, input.as_deref(), format, &output)
        }
        Command::Analyze { sample } => commands::analyze(ctx, sample),
    }
}
