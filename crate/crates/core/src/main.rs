use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use segfuse::dbst::{AugmentConfig, JitterConfig, SynthConfig};
use segfuse::pipeline::commands::Branch;
use segfuse::pipeline::fixtures::FixtureSpec;
use segfuse::pipeline::{
    cmd_eval, cmd_fixtures, cmd_fuse, cmd_synth, cmd_weights, EvalSource, FuseOptions, Manifest,
    RunConfig, RunReport, SynthOptions, WeightsFile, WeightsOptions,
};
use segfuse::{ClassTable, Error, WeightMode, DEFAULT_DELTA, DEFAULT_TEMPERATURE};

#[derive(Parser)]
#[command(
    name = "segfuse",
    version,
    about = "Pseudo-label fusion and depth-based sample synthesis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Class table: a preset name (cityscapes19, synseq12) or a TOML file.
    #[arg(long, default_value = "cityscapes19")]
    classes: String,
    /// Comma-separated things classes (names or ids) overriding the table's.
    #[arg(long, value_delimiter = ',')]
    things: Option<Vec<String>>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
    /// Raw depth PNG units per metre.
    #[arg(long, default_value_t = 256.0)]
    depth_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Compute class frequencies and fusion weights from ground-truth labels.
    Weights {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        /// Keep the unnormalized UDA weights.
        #[arg(long)]
        raw_weights: bool,
    },
    /// Fuse both prediction branches into pseudo-labels.
    Fuse {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
        temperature: f64,
        /// Also write fused score tensors.
        #[arg(long)]
        scores: bool,
        /// Also write palette PNGs of the fused labels.
        #[arg(long)]
        colorize: bool,
    },
    /// Composite and augment new training samples.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 2)]
        n_images: usize,
        #[arg(long, default_value_t = 0.8)]
        percentile: f64,
        #[arg(long, default_value_t = 4)]
        samples_per_base: usize,
        /// Scale range as MIN,MAX.
        #[arg(long, default_value = "0.75,1.5")]
        scale_range: String,
        #[arg(long, default_value = "1024x512")]
        crop: String,
        /// Color jitter strengths as BRIGHTNESS,CONTRAST,SATURATION,HUE.
        #[arg(long, default_value = "0.2,0.2,0.2,0.05")]
        jitter: String,
        #[arg(long)]
        no_augment: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Do not let the base image's own pixels be selected.
        #[arg(long)]
        exclude_base: bool,
    },
    /// Score predictions against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of `<id>.png` predictions.
        #[arg(long, conflicts_with = "branch")]
        predictions: Option<PathBuf>,
        #[arg(long, value_enum)]
        branch: Option<BranchArg>,
        /// Weights file, for `--branch fused`.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
        temperature: f64,
    },
    /// Write a synthetic dataset with two complementary prediction branches.
    Fixtures {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        scenes: usize,
        #[arg(long, default_value = "256x128")]
        size: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        dep_corruption: f64,
        #[arg(long, default_value_t = 0.5)]
        uda_corruption: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Dep,
    Uda,
    Fused,
}

fn parse_dims(s: &str) -> Result<(usize, usize), Error> {
    let bad = || Error::Domain(format!("expected WIDTHxHEIGHT, got `{s}`"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        w.trim().parse().map_err(|_| bad())?,
        h.trim().parse().map_err(|_| bad())?,
    ))
}

fn parse_floats(s: &str, n: usize, what: &str) -> Result<Vec<f64>, Error> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::Domain(format!("{what}: cannot parse `{s}`")))?;
    if v.len() != n {
        return Err(Error::Domain(format!(
            "{what}: expected {n} comma-separated numbers"
        )));
    }
    Ok(v)
}

fn run_config(c: &Common) -> Result<RunConfig, Error> {
    let mut classes = ClassTable::resolve(&c.classes)?;
    if let Some(things) = &c.things {
        classes = classes.with_things(things)?;
    }
    Ok(RunConfig {
        classes,
        workers: c.workers,
        out_dir: c.out.clone(),
        depth_scale: c.depth_scale,
    })
}

fn run(cli: Cli) -> Result<RunReport, Error> {
    match cli.command {
        Command::Weights {
            common,
            manifest,
            delta,
            raw_weights,
        } => {
            let run = run_config(&common)?;
            let opts = WeightsOptions {
                delta,
                mode: if raw_weights {
                    WeightMode::Raw
                } else {
                    WeightMode::Normalized
                },
            };
            let (report, _) = cmd_weights(&run, &Manifest::read(&manifest)?, &opts)?;
            Ok(report)
        }
        Command::Fuse {
            common,
            manifest,
            weights,
            temperature,
            scores,
            colorize,
        } => {
            let run = run_config(&common)?;
            let opts = FuseOptions {
                weights: WeightsFile::read(&weights)?,
                temperature,
                save_scores: scores,
                colorize,
            };
            cmd_fuse(&run, &Manifest::read(&manifest)?, &opts)
        }
        Command::Synth {
            common,
            manifest,
            n_images,
            percentile,
            samples_per_base,
            scale_range,
            crop,
            jitter,
            no_augment,
            seed,
            exclude_base,
        } => {
            let run = run_config(&common)?;
            let sr = parse_floats(&scale_range, 2, "--scale-range")?;
            let j = parse_floats(&jitter, 4, "--jitter")?;
            let synth = SynthConfig {
                n_images,
                percentile,
                things: run.classes.things(),
                samples_per_base,
                seed,
                include_base: !exclude_base,
                augment: AugmentConfig {
                    enabled: !no_augment,
                    scale_range: (sr[0], sr[1]),
                    crop: parse_dims(&crop)?,
                    jitter: JitterConfig {
                        brightness: j[0],
                        contrast: j[1],
                        saturation: j[2],
                        hue: j[3],
                    },
                },
            };
            cmd_synth(&run, &Manifest::read(&manifest)?, &SynthOptions { synth })
        }
        Command::Eval {
            common,
            manifest,
            predictions,
            branch,
            weights,
            temperature,
        } => {
            let run = run_config(&common)?;
            let source = match (predictions, branch) {
                (Some(dir), _) => EvalSource::Predictions(dir),
                (None, Some(BranchArg::Dep)) => EvalSource::Branch(Branch::Dep),
                (None, Some(BranchArg::Uda)) => EvalSource::Branch(Branch::Uda),
                (None, Some(BranchArg::Fused)) => {
                    let path = weights
                        .ok_or_else(|| Error::Domain("--branch fused needs --weights".into()))?;
                    EvalSource::Fused {
                        weights: WeightsFile::read(&path)?,
                        temperature,
                    }
                }
                (None, None) => {
                    return Err(Error::Domain("give --predictions or --branch".into()));
                }
            };
            let (report, summary) = cmd_eval(&run, &Manifest::read(&manifest)?, &source)?;
            println!(
                "mIoU {:.2}  Acc {:.2}",
                100.0 * summary.miou,
                100.0 * summary.acc
            );
            Ok(report)
        }
        Command::Fixtures {
            common,
            scenes,
            size,
            seed,
            dep_corruption,
            uda_corruption,
        } => {
            let run = run_config(&common)?;
            let (width, height) = parse_dims(&size)?;
            let spec = FixtureSpec {
                width,
                height,
                scenes,
                seed,
                dep_corruption,
                uda_corruption,
                ..FixtureSpec::default()
            };
            cmd_fixtures(&run, &spec)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) if report.is_complete() => ExitCode::SUCCESS,
        Ok(report) => {
            eprintln!("{} record(s) failed:", report.failures.len());
            for f in &report.failures {
                eprintln!("  {}: {}", f.id, f.message);
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
