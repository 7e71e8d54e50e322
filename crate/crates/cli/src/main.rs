//! `defocus`: relative defocus blur estimation from the command line.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use defocus_core::RunConfig;

#[derive(Parser)]
#[command(
    name = "defocus",
    version,
    about = "Relative defocus blur estimation between image pairs"
)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

/// Run configuration shared by every subcommand.
#[derive(Args)]
struct ConfigArgs {
    /// Number of candidate sigmas
    #[arg(long = "sigma-count", global = true, default_value_t = 50)]
    m: usize,
    /// Number of radial samples
    #[arg(long = "radial-count", global = true, default_value_t = 100)]
    n: usize,
    #[arg(long, global = true, default_value_t = 0.1)]
    sigma_min: f64,
    #[arg(long, global = true, default_value_t = 5.0)]
    sigma_max: f64,
    /// Residual slack for accepting a candidate sigma
    #[arg(long, global = true, default_value_t = 1e-4)]
    tie_tol: f64,
    /// Sharpness difference below which two pixels count as equal
    #[arg(long, global = true, default_value_t = 1e-6)]
    eq_tol: f64,
    /// Side of the disambiguation window (odd)
    #[arg(long, global = true, default_value_t = 5)]
    window: usize,
    /// Decimate inputs by this factor before estimating
    #[arg(long, global = true, default_value_t = 1)]
    decimation: usize,
    /// Worker threads, 0 for one per core
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Directory for artifacts and report.json
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

impl ConfigArgs {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            m: self.m,
            n: self.n,
            sigma_min: self.sigma_min,
            sigma_max: self.sigma_max,
            tie_tol: self.tie_tol,
            eq_tol: self.eq_tol,
            window: self.window,
            decimation_factor: self.decimation,
            worker_count: self.workers,
            output_dir: self.out.clone(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Horizontal,
    Vertical,
}

#[derive(Subcommand)]
enum Command {
    /// Blur an image with a linear sigma ramp, estimate it back and score
    SynthEval {
        #[arg(long)]
        image: PathBuf,
        /// Sigma at the start and end of the ramp, as START:END
        #[arg(long, default_value = "1:2", value_parser = parse_range)]
        range: (f64, f64),
        #[arg(long, value_enum, default_value = "vertical")]
        axis: AxisArg,
    },
    /// Estimate the blur taking a sharper image to a blurrier one
    Estimate {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
    },
    /// Score a focus pair and print a results table
    EvaluatePair {
        /// Image focused on the background
        #[arg(
            long,
            required_unless_present = "manifest",
            conflicts_with = "manifest"
        )]
        ib: Option<PathBuf>,
        /// Image focused on the foreground
        #[arg(
            long = "if",
            required_unless_present = "manifest",
            conflicts_with = "manifest"
        )]
        i_f: Option<PathBuf>,
        /// Row label; defaults to the file stem of --ib
        #[arg(long)]
        id: Option<String>,
        /// CSV with columns dataset_id,ib,if; paths relative to the manifest
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Blur budget of a camera setting
    Optics {
        /// Focal length in mm
        #[arg(long)]
        f: f64,
        /// f-number
        #[arg(long = "fn")]
        f_number: f64,
        /// Focus (foreground) distance in mm
        #[arg(long)]
        df: f64,
        /// Background distance in mm, or "inf"
        #[arg(long, default_value = "inf", value_parser = parse_distance)]
        db: commands::BackDistance,
        /// Pixel pitch in micrometres
        #[arg(long)]
        pitch: f64,
        /// Relative depth bound in (0, 1)
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Low-pass and subsample an image
    Decimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        factor: usize,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:END, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_distance(s: &str) -> Result<commands::BackDistance, String> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(commands::BackDistance::Infinity),
        t => t
            .parse::<f64>()
            .map(commands::BackDistance::Finite)
            .map_err(|e| format!("{s:?}: {e}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = cli.config.to_config();
    let result = match cli.command {
        Command::SynthEval { image, range, axis } => {
            let axis = match axis {
                AxisArg::Horizontal => defocus_core::synth::Axis::Horizontal,
                AxisArg::Vertical => defocus_core::synth::Axis::Vertical,
            };
            commands::synth_eval(&config, &image, range, axis)
        }
        Command::Estimate { left, right } => commands::estimate(&config, &left, &right),
        Command::EvaluatePair {
            ib,
            i_f,
            id,
            manifest,
        } => {
            let pairs = match (manifest, ib, i_f) {
                (Some(m), _, _) => commands::read_manifest(&m),
                (None, Some(ib), Some(i_f)) => {
                    let id = id.unwrap_or_else(|| {
                        ib.file_stem()
                            .map_or_else(|| "pair".into(), |s| s.to_string_lossy().into_owned())
                    });
                    Ok(vec![commands::PairInput { id, ib, i_f }])
                }
                _ => unreachable!("clap enforces --ib/--if or --manifest"),
            };
            pairs.and_then(|p| commands::evaluate_pairs(&config, &p))
        }
        Command::Optics {
            f,
            f_number,
            df,
            db,
            pitch,
            eta,
        } => commands::optics(&config, f, f_number, df, db, pitch, eta),
        Command::Decimate {
            input,
            output,
            factor,
        } => {
            config.decimation_factor = factor;
            commands::decimate(&config, &input, &output)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("defocus: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
