use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use algforge::commands::{
    cmd_bench, cmd_continual, cmd_eval, cmd_export, cmd_features, cmd_infer, cmd_train,
    BenchCommand, EvalCommand, ExportCommand, FeaturesCommand, InferCommand, TrainCommand,
};
use algforge::config::Overrides;

/// Learned design of metaheuristic algorithms.
#[derive(Parser)]
#[command(name = "algforge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TrainArgs {
    /// Problem family (with --dims) or a full key like `onemax:100`
    #[arg(long)]
    problem: Option<String>,
    /// Training dimensions, e.g. `--dims 100,225,400`
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Seed for problem-instance construction
    #[arg(long, default_value_t = 1)]
    instance_seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    ppo_iters: Option<usize>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    runs_per_instance: Option<usize>,
    /// Function-evaluation budget per training run
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    pop_size: Option<usize>,
    #[arg(long)]
    lr0: Option<f64>,
    #[arg(long)]
    ewc_lambda: Option<f64>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Allow event conditions during sampling
    #[arg(long)]
    allow_events: bool,
    #[arg(long)]
    k_infer: Option<usize>,
}

impl TrainArgs {
    fn into_command(self) -> TrainCommand {
        TrainCommand {
            problem: self.problem,
            dims: self.dims,
            config: self.config,
            out: self.out,
            workers: self.workers,
            instance_seed: self.instance_seed,
            overrides: Overrides {
                epochs: self.epochs,
                batch: self.batch,
                ppo_iters: self.ppo_iters,
                clip: self.clip,
                runs_per_instance: self.runs_per_instance,
                budget: self.budget,
                pop_size: self.pop_size,
                lr0: self.lr0,
                ewc_lambda: self.ewc_lambda,
                seed: self.seed,
                allow_events: if self.allow_events { Some(true) } else { None },
                k_infer: self.k_infer,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy on one problem and infer the best program
    Train(TrainArgs),
    /// Train a task series with consolidation (needs --config)
    Continual(TrainArgs),
    /// Sample programs from a checkpoint and print the best one
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        problem: String,
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        instance_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 16)]
        k_infer: usize,
        #[arg(long, default_value_t = 5)]
        runs_per_instance: usize,
        #[arg(long, default_value_t = 5000)]
        budget: usize,
        #[arg(long, default_value_t = 50)]
        pop_size: usize,
        /// Also write the program text to this file
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Run one program repeatedly on one instance, CSV report
    Eval {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        #[arg(long, default_value_t = 50000)]
        budget: usize,
        #[arg(long, default_value_t = 50)]
        pop_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        instance_seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the baselines (and optionally a program) on one instance
    Bench {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        #[arg(long, default_value_t = 50000)]
        budget: usize,
        #[arg(long, default_value_t = 50)]
        pop_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        instance_seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Landscape-factor embedding of one instance
    Features {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        instance_seed: u64,
        /// CSV instead of JSON
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export internal tables
    Export {
        /// Dump the token vocabulary as JSON
        #[arg(long)]
        vocab: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(&args.into_command()).map(|_| ()),
        Command::Continual(args) => cmd_continual(&args.into_command()).map(|_| ()),
        Command::Infer {
            checkpoint,
            problem,
            dims,
            instance_seed,
            seed,
            workers,
            k_infer,
            runs_per_instance,
            budget,
            pop_size,
            save,
        } => cmd_infer(&InferCommand {
            checkpoint,
            problem,
            dims,
            instance_seed,
            seed,
            workers,
            k_infer,
            runs_per_instance,
            budget,
            pop_size,
            save,
        })
        .map(|_| ()),
        Command::Eval {
            program,
            problem,
            runs,
            budget,
            pop_size,
            seed,
            instance_seed,
            workers,
            out,
        } => cmd_eval(&EvalCommand {
            program,
            problem,
            runs,
            budget,
            pop_size,
            seed,
            instance_seed,
            workers,
            out,
        })
        .map(|_| ()),
        Command::Bench {
            problem,
            runs,
            budget,
            pop_size,
            seed,
            instance_seed,
            workers,
            program,
            out,
        } => cmd_bench(&BenchCommand {
            problem,
            runs,
            budget,
            pop_size,
            seed,
            instance_seed,
            workers,
            program,
            out,
        })
        .map(|_| ()),
        Command::Features {
            problem,
            seed,
            instance_seed,
            csv,
            out,
        } => cmd_features(&FeaturesCommand {
            problem,
            seed,
            instance_seed,
            csv,
            out,
        })
        .map(|_| ()),
        Command::Export { vocab, out } => cmd_export(&ExportCommand { vocab, out }).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
