use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shvc::ans::CodingMode;
use shvc::container::{compress_chained, compress_image, decompress_chained, decompress_image, Container};
use shvc::image::{load_image, save_image};
use shvc::model::{Mode, ModelConfig, ModelWeights, ShvcModel};
use shvc::selftest::{self, SelftestOptions};
use shvc::stats::{aggregate_bpd, collect_images, compute_stats, ImageStats, STATS_HEADER};
use shvc::{Error, Result};

#[derive(Parser)]
#[command(name = "shvc", version, about = "Lossless image compression with a hierarchical latent model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// Weight file; without it a seeded lite model is used.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Latent layers of the seeded model.
    #[arg(long, default_value_t = 2)]
    layers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Compress an image (or, in chained mode, a directory of images).
    Compress {
        input: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "shvc")]
        mode: CodingMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Restore the original image bytes from a container.
    Decompress {
        input: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Output file (a directory for chained containers). PPM/PGM when the
        /// name ends in .ppm/.pgm, raw planar with a .dims sidecar otherwise.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Per-image rates for every image in a directory.
    Stats {
        dir: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "shvc")]
        mode: CodingMode,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the built-in invariant checks.
    Selftest {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, hide = true)]
        inject_corruption: bool,
    },
    /// Write the weights of a seeded model.
    InitWeights {
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Build the model without the ArIB dependency restrictions.
        #[arg(long)]
        plain: bool,
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn seeded_config(layers: usize) -> ModelConfig {
    ModelConfig::lite(layers, Mode::Arib)
}

fn load_model(args: &ModelArgs) -> Result<ShvcModel> {
    match &args.model {
        Some(p) => ShvcModel::new(&ModelWeights::from_bytes(&fs::read(p)?)?),
        None => ShvcModel::seeded(&seeded_config(args.layers)),
    }
}

fn stats_line(file: &str, dims: usize, report: shvc::ans::OverheadReport) -> String {
    ImageStats { file: file.to_owned(), dims, report }.line()
}

fn default_output(input: &Path, ext: &str) -> PathBuf {
    let mut s = input.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compress { input, model, mode, seed, output } => {
            let m = load_model(&model)?;
            let output = output.unwrap_or_else(|| default_output(&input, ".shvc"));
            let (container, dims, report) = if input.is_dir() {
                if mode != CodingMode::Chained {
                    return Err(Error::UnsupportedImage("directories can only be compressed in chained mode".into()));
                }
                let set = collect_images(&input)?;
                for (name, e) in &set.skipped {
                    eprintln!("warning: skipping {name}: {e}");
                }
                let images: Vec<_> = set.images.into_iter().map(|(_, t)| t).collect();
                let dims = images.iter().map(|t| t.data().len()).sum();
                let (c, r) = compress_chained(&images, &m, seed)?;
                (c, dims, r)
            } else {
                let x = load_image(&input)?;
                let (c, r) = compress_image(&x, &m, mode, seed)?;
                (c, x.data().len(), r)
            };
            fs::write(&output, container.to_bytes())?;
            println!("{STATS_HEADER}");
            println!("{}", stats_line(&input.display().to_string(), dims, report));
        }
        Command::Decompress { input, model, output } => {
            let container = Container::from_bytes(&fs::read(&input)?)?;
            let args = ModelArgs { model: model.model, layers: usize::from(container.layers) };
            let m = load_model(&args)?;
            let stem = input.with_extension("");
            if container.mode == CodingMode::Chained {
                let dir = output.unwrap_or_else(|| default_output(&stem, ".d"));
                let images = decompress_chained(&container, &m)?;
                fs::create_dir_all(&dir)?;
                for (j, img) in images.iter().enumerate() {
                    let ext = if matches!(img.channels(), 1 | 3) { "ppm" } else { "raw" };
                    save_image(&dir.join(format!("{j:04}.{ext}")), img)?;
                }
            } else {
                let img = decompress_image(&container, &m)?;
                let out = output.unwrap_or_else(|| if stem == input { default_output(&input, ".ppm") } else { stem });
                save_image(&out, &img)?;
            }
        }
        Command::Stats { dir, model, mode, jobs, seed } => {
            let m = load_model(&model)?;
            let set = collect_images(&dir)?;
            for (name, e) in &set.skipped {
                eprintln!("warning: skipping {name}: {e}");
            }
            let rows = compute_stats(&set.images, &m, mode, jobs, seed)?;
            println!("{STATS_HEADER}");
            for r in &rows {
                println!("{}", r.line());
            }
            println!("# images={} skipped={} aggregate_bpd={:.6}", rows.len(), set.skipped.len(), aggregate_bpd(&rows));
        }
        Command::Selftest { model, seed, inject_corruption } => {
            let m = model.map(|p| -> Result<ShvcModel> { ShvcModel::new(&ModelWeights::from_bytes(&fs::read(p)?)?) }).transpose()?;
            let outcomes = selftest::run(&SelftestOptions { model: m.as_ref(), inject_table_corruption: inject_corruption, seed })?;
            let mut failed = 0;
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
                failed += usize::from(!o.passed);
            }
            if failed > 0 {
                return Err(Error::InvalidConfig(format!("{failed} selftest check(s) failed")));
            }
        }
        Command::InitWeights { layers, seed, plain, output } => {
            let mode = if plain { Mode::Shvc } else { Mode::Arib };
            let w = ModelWeights::init_seeded(&ModelConfig::lite(layers, mode).with_seed(seed))?;
            fs::write(&output, w.to_bytes())?;
            println!("{} parameters, hash {:#018x}", w.parameter_count(), w.hash());
        }
    }
    Ok(())
}

/// Distinct exit codes for the container checks a caller may want to tell
/// apart.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BadMagic => 3,
        Error::BadVersion(_) => 4,
        Error::ModelHashMismatch { .. } => 5,
        Error::CrcMismatch { .. } => 6,
        Error::CorruptStream(_) => 7,
        Error::UnsupportedImage(_) => 8,
        Error::Io(_) => 9,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
