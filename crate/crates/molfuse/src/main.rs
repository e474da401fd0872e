use clap::{Parser, Subcommand};
use molfuse::cli::{self, Overrides};
use molfuse::encoders::View;
use molfuse::fusion::FusionMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "molfuse",
    about = "Multi-featurization molecular embeddings: contrastive pretraining and property-prediction fine-tuning",
    version
)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Flat key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override train.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comma-separated view subset (2d,3d,fp,sm).
    #[arg(long, global = true, value_delimiter = ',')]
    views: Option<Vec<String>>,

    /// Fusion mode: attention, mean, max, or frozen.
    #[arg(long, global = true)]
    fusion: Option<String>,

    /// Validate configuration and print the plan without computing.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and featurize a dataset, populating the cache.
    Featurize,
    /// Contrastive pretraining over the enabled views.
    Pretrain,
    /// Fine-tune a pretrained checkpoint on a labeled dataset.
    Finetune,
    /// Evaluate a fine-tuned checkpoint on a dataset.
    Eval,
    /// Probe case studies (chirality AP, aromatic ring count MAE).
    CaseStudy,
    /// Export full-dataset fusion weights from a checkpoint.
    ExportAttention {
        /// Also write an SVG bar chart here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Train the tokenizer and write its vocabulary file.
    TokenizeTrain {
        /// Output path (default: <out_dir>/vocab.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_overrides(args: &Args) -> Result<Overrides, String> {
    let views = match &args.views {
        Some(raw) => {
            let mut views = Vec::new();
            for v in raw {
                views.push(View::parse(v).ok_or_else(|| format!("unknown view {v:?} (use 2d,3d,fp,sm)"))?);
            }
            views.sort();
            views.dedup();
            Some(views)
        }
        None => None,
    };
    let fusion = match &args.fusion {
        Some(raw) => {
            Some(FusionMode::parse(raw).ok_or_else(|| format!("unknown fusion mode {raw:?}"))?)
        }
        None => None,
    };
    Ok(Overrides { seed: args.seed, views, fusion })
}

fn run(args: Args) -> Result<(), String> {
    let overrides = parse_overrides(&args)?;
    let cfg = cli::load_config(args.config.as_deref(), &overrides).map_err(|e| e.to_string())?;
    let summary = match &args.command {
        Command::Featurize => {
            if args.dry_run {
                format!("dry run: would featurize {:?}", cfg.dataset_csv)
            } else {
                cli::cmd_featurize(&cfg).map_err(|e| e.to_string())?.to_string()
            }
        }
        Command::Pretrain => cli::cmd_pretrain(&cfg, args.dry_run).map_err(|e| e.to_string())?,
        Command::Finetune => cli::cmd_finetune(&cfg, args.dry_run).map_err(|e| e.to_string())?,
        Command::Eval => cli::cmd_eval(&cfg).map_err(|e| e.to_string())?,
        Command::CaseStudy => cli::cmd_case_study(&cfg).map_err(|e| e.to_string())?,
        Command::ExportAttention { plot } => {
            cli::cmd_export_attention(&cfg, plot.as_deref()).map_err(|e| e.to_string())?
        }
        Command::TokenizeTrain { out } => {
            cli::cmd_tokenize_train(&cfg, out.as_deref()).map_err(|e| e.to_string())?
        }
    };
    println!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
