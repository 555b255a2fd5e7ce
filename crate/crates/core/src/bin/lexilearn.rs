use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lexilearn::config::PipelineConfig;
use lexilearn::measures::ModelTag;
use lexilearn::pipeline::{self, TrainTarget, DEFAULT_MEASURES};
use lexilearn::Error;

#[derive(Parser)]
#[command(name = "lexilearn", version, about = "Discriminative lexicon measures and predictor table")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config file (`key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides LEXILEARN_THREADS
    #[arg(long, env = "LEXILEARN_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build cue inventory, form matrix and semantic matrix
    Encode {
        #[command(flatten)]
        common: Common,
    },
    /// Fit mappings and the co-occurrence network
    Train {
        #[command(flatten)]
        common: Common,
        /// Any of endstate, fil, fiddl, wh, cind (default: endstate,fil,fiddl,cind)
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        which: Vec<String>,
    },
    /// Target correlations and accuracies per trained model
    Measures {
        #[command(flatten)]
        common: Common,
        /// Any of endstate, fil, fiddl, wh (default: endstate,fil,fiddl)
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        which: Vec<String>,
    },
    /// Write the per-word predictor table
    Export {
        #[command(flatten)]
        common: Common,
    },
}

fn setup(common: &Common) -> Result<PipelineConfig, Error> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr<Err = Error> + Copy>(items: &[String], default: &[T]) -> Result<Vec<T>, Error> {
    if items.is_empty() {
        return Ok(default.to_vec());
    }
    items.iter().map(|s| s.trim().parse()).collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Encode { common } => {
            let cfg = setup(&common)?;
            let m = pipeline::cmd_encode(&cfg)?;
            println!(
                "encoded {} words, {} cues",
                m.details.get("words").map_or("?", String::as_str),
                m.details.get("cues").map_or("?", String::as_str)
            );
        }
        Command::Train { common, which } => {
            let targets: Vec<TrainTarget> = parse_list(&which, &TrainTarget::DEFAULT)?;
            let cfg = setup(&common)?;
            for m in pipeline::cmd_train(&cfg, &targets)? {
                match m.details.get("parameters") {
                    Some(p) => println!("{}: {p} parameters", m.stage),
                    None => println!("{}: done", m.stage),
                }
            }
        }
        Command::Measures { common, which } => {
            let tags: Vec<ModelTag> = parse_list(&which, &DEFAULT_MEASURES)?;
            let cfg = setup(&common)?;
            for e in pipeline::cmd_measures(&cfg, &tags)? {
                println!(
                    "{}: type accuracy {:.4}, token accuracy {:.4}",
                    e.model_tag,
                    e.type_accuracy,
                    e.token_accuracy.unwrap_or(f64::NAN)
                );
            }
        }
        Command::Export { common } => {
            let cfg = setup(&common)?;
            pipeline::cmd_export(&cfg)?;
            println!("wrote {}", cfg.output(pipeline::PREDICTORS_FILE).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
