use clap::{Parser, Subcommand, ValueEnum};
use jepa_fer::cli::{
    self, cmd_cross_eval, cmd_eval, cmd_gen_synth, cmd_gradcheck, cmd_pretrain, cmd_splits_verify,
    cmd_train_probe, ModeChoice, PcaChoice, VotingChoice,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "jepa-fer",
    about = "Self-supervised video pre-training and frozen-encoder facial-expression classification",
    version
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VotingArg {
    Mv,
    Pbv,
    Both,
}

impl From<VotingArg> for VotingChoice {
    fn from(v: VotingArg) -> Self {
        match v {
            VotingArg::Mv => VotingChoice::Mv,
            VotingArg::Pbv => VotingChoice::Pbv,
            VotingArg::Both => VotingChoice::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Drop,
    Merge,
    Both,
}

impl From<ModeArg> for ModeChoice {
    fn from(v: ModeArg) -> Self {
        match v {
            ModeArg::Drop => ModeChoice::Drop,
            ModeArg::Merge => ModeChoice::Merge,
            ModeArg::Both => ModeChoice::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PcaArg {
    Attentive,
    Average,
    Both,
}

impl From<PcaArg> for PcaChoice {
    fn from(v: PcaArg) -> Self {
        match v {
            PcaArg::Attentive => PcaChoice::Attentive,
            PcaArg::Average => PcaChoice::Average,
            PcaArg::Both => PcaChoice::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (RVT1 videos + manifest.csv)
    GenSynth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Self-supervised pre-training; writes loss log and checkpoints
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train attentive probes on a frozen encoder, one per fold
    TrainProbe {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fold: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Whole-video evaluation with MV/PBV voting
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        voting: VotingArg,
        #[arg(long)]
        fold: Option<usize>,
        /// Also export 2-D PCA of pooled clip embeddings
        #[arg(long, value_enum)]
        pca: Option<PcaArg>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate probes on the dataset they were not trained on
    CrossEval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "pbv")]
        voting: VotingArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Finite-difference check of every differentiable primitive
    Gradcheck {
        /// Random draws per primitive
        #[arg(long, default_value = "20")]
        seeds: u64,
    },
    /// Verify a fold plan (built-in CREMA-D plan by default)
    SplitsVerify {
        /// Fold plan JSON; omit for the built-in plan
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Manifest to check coverage against
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn run() -> jepa_fer::Result<()> {
    let args = Args::parse();
    match args.command {
        Command::GenSynth { out, config, seed } => {
            let cfg = cli::load_config(config.as_deref(), seed)?;
            cmd_gen_synth(&cfg, &out)
        }
        Command::Pretrain { data, out, config, seed } => {
            let cfg = cli::load_config(config.as_deref(), seed)?;
            cmd_pretrain(&cfg, &data, &out)
        }
        Command::TrainProbe { data, encoder, out, fold, config, seed } => {
            let cfg = cli::load_config(config.as_deref(), seed)?;
            cmd_train_probe(&cfg, &data, &encoder, &out, fold)
        }
        Command::Eval { data, encoder, probes, out, voting, fold, pca, config, seed } => {
            let cfg = cli::load_config(config.as_deref(), seed)?;
            cmd_eval(
                &cfg,
                &data,
                &encoder,
                &probes,
                &out,
                voting.into(),
                fold,
                pca.map(Into::into),
            )
        }
        Command::CrossEval { data, encoder, probes, out, mode, voting, config, seed } => {
            let cfg = cli::load_config(config.as_deref(), seed)?;
            cmd_cross_eval(&cfg, &data, &encoder, &probes, &out, mode.into(), voting.into())
        }
        Command::Gradcheck { seeds } => cmd_gradcheck(seeds),
        Command::SplitsVerify { plan, manifest } => {
            cmd_splits_verify(plan.as_deref(), manifest.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    jepa_fer::init_thread_pool_from_env();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
