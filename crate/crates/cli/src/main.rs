use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use warmsplat::rig::Split;
use warmsplat_cli::{cmd_ab, cmd_archive_info, cmd_eval, cmd_generate, cmd_render, cmd_train, exit_code, with_workers, View};

#[derive(Parser)]
#[command(name = "warmsplat", version, about = "Fixed-budget dynamic Gaussian splatting")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic multi-view dataset bundle.
    Generate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Extra export, e.g. `colmap:surface`, `depth`, `nerf`. Repeatable.
        #[arg(long = "export")]
        exports: Vec<String>,
    },
    /// Train the warm-start chain and write an archive.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one archived time step.
    Render {
        archive: PathBuf,
        #[arg(long)]
        t: i64,
        /// Camera name from `--dataset`.
        #[arg(long, requires = "dataset", conflicts_with = "track")]
        camera: Option<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Camera track JSON; writes one PNG per track camera into `--out`.
        #[arg(long)]
        track: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an archive against a dataset split.
    Eval {
        archive: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify an archive and report its layout.
    ArchiveInfo {
        archive: PathBuf,
        /// Per-frame timing CSV written by `train`.
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Write per-frame stats here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Static/dynamic decomposition run.
    Ab {
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Command) -> warmsplat::Result<()> {
    match cmd {
        Command::Generate { config, out, exports } => cmd_generate(&config, &out, &exports).map(drop),
        Command::Train { dataset, config, out } => cmd_train(&dataset, &config, &out).map(drop),
        Command::Render {
            archive,
            t,
            camera,
            dataset,
            track,
            out,
        } => {
            let view = match (camera, dataset, track) {
                (_, _, Some(track)) => View::Track(track),
                (Some(name), Some(dataset), None) => View::Camera { dataset, name },
                _ => return Err(warmsplat::Error::InvalidInput("render needs --camera with --dataset, or --track".into())),
            };
            cmd_render(&archive, t, &view, &out).map(drop)
        }
        Command::Eval {
            archive,
            dataset,
            split,
            out,
        } => cmd_eval(&archive, &dataset, Split::parse(&split)?, &out).map(drop),
        Command::ArchiveInfo { archive, frames, csv } => cmd_archive_info(&archive, frames.as_deref(), csv.as_deref()).map(drop),
        Command::Ab { dataset, config, out } => cmd_ab(&dataset, &config, &out).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match with_workers(cli.workers, || run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
