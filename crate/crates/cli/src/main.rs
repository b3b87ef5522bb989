use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sblabel::ingestion::{generate_synthetic, write_bids_csv, DurationKey, SynthConfig};
use sblabel::pipeline::{
    files, report, run_all, stage_cluster, stage_features, stage_ingest, stage_label, stage_optk,
    stage_partition, stage_sweep, ClusterOverrides, InputKind, InstanceSource, PipelineConfig,
    Stage, StageError,
};
use sblabel::Error;

/// Label shill-bidding instances by clustering them with CURE.
#[derive(Parser)]
#[command(name = "sblabel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and clean a raw bid log.
    Ingest(Common),
    /// Compute the eight behaviour features per (auction, bidder).
    Features(Common),
    /// Split instances by auction duration and compute per-subset statistics.
    Partition {
        #[command(flatten)]
        common: Common,
        /// Duration for instance rows without a duration_days column.
        #[arg(long)]
        default_duration_days: Option<u32>,
    },
    /// Choose the number of clusters per subset by silhouette.
    Optk(Common),
    /// Grid-search CURE's representative count and shrinking factor.
    Sweep(Common),
    /// Run CURE per subset with the chosen or given settings.
    Cluster {
        #[command(flatten)]
        common: Common,
        /// Representative count, overriding the sweep's choice.
        #[arg(long)]
        rp: Option<usize>,
        /// Shrinking factor, overriding the sweep's choice.
        #[arg(long)]
        alpha: Option<f64>,
        /// Cluster count, overriding the silhouette choice.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Label clusters and write the summary.
    Label(Common),
    /// Run every stage.
    Run {
        #[command(flatten)]
        common: Common,
        /// Force the input kind instead of detecting it from the header.
        #[arg(long, value_parser = parse_kind)]
        input_kind: Option<InputKind>,
        #[arg(long)]
        default_duration_days: Option<u32>,
        /// Dissolve tiny clusters part-way through CURE and reattach their points.
        #[arg(long)]
        outliers: bool,
    },
    /// Write a synthetic bid log.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Destination file; defaults to bids.csv in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        auctions: Option<usize>,
        #[arg(long)]
        shill_fraction: Option<f64>,
        /// Use the reference dataset's auction and instance counts.
        #[arg(long)]
        full_scale: bool,
    },
    /// Collect stage artifacts into report tables.
    Report(Common),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Comma-separated representative counts.
    #[arg(long, value_delimiter = ',')]
    reps: Option<Vec<usize>>,
    /// Comma-separated shrinking factors.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
}

fn parse_kind(s: &str) -> Result<InputKind, String> {
    match s {
        "auto" => Ok(InputKind::Auto),
        "bids" => Ok(InputKind::Bids),
        "instances" => Ok(InputKind::Instances),
        _ => Err(format!("unknown input kind `{s}` (auto, bids, instances)")),
    }
}

fn config_error(e: Error) -> StageError {
    StageError::new(Stage::Config, e)
}

impl Common {
    fn config(&self) -> Result<PipelineConfig, StageError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path).map_err(config_error)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.seed = Some(v);
        }
        if let Some(v) = self.k_min {
            cfg.optk.k_min = v;
        }
        if let Some(v) = self.k_max {
            cfg.optk.k_max = v;
        }
        if let Some(v) = &self.reps {
            cfg.cure.reps = v.clone();
        }
        if let Some(v) = &self.alphas {
            cfg.cure.alphas = v.clone();
        }
        Ok(cfg)
    }
}

fn out_dir(cfg: &PipelineConfig) -> Result<PathBuf, StageError> {
    cfg.output_dir().map(PathBuf::from).map_err(config_error)
}

fn input(cfg: &PipelineConfig) -> Result<PathBuf, StageError> {
    cfg.input
        .clone()
        .ok_or_else(|| config_error(Error::Config("--input is required".into())))
}

fn validated(common: &Common) -> Result<(PipelineConfig, PathBuf), StageError> {
    let cfg = common.config()?;
    cfg.validate().map_err(config_error)?;
    let out = out_dir(&cfg)?;
    Ok((cfg, out))
}

fn execute(command: Command) -> Result<(), StageError> {
    match command {
        Command::Ingest(common) => {
            let cfg = common.config()?;
            let out = out_dir(&cfg)?;
            let clean = stage_ingest(&input(&cfg)?, &out)?;
            let agg = clean.aggregates();
            println!(
                "ingest: {} bids, {} auctions -> {}",
                agg.records,
                agg.auctions,
                out.join(files::CLEAN_BIDS).display()
            );
        }
        Command::Features(common) => {
            let out = out_dir(&common.config()?)?;
            let set = stage_features(&out)?;
            println!(
                "features: {} instances ({} auctions skipped) -> {}",
                set.instances.len(),
                set.skipped_auctions,
                out.join(files::INSTANCES).display()
            );
        }
        Command::Partition {
            common,
            default_duration_days,
        } => {
            let cfg = common.config()?;
            let out = out_dir(&cfg)?;
            let default_duration = default_duration_days.or(cfg.default_duration_days);
            let source = match &cfg.input {
                Some(path) => InstanceSource::File {
                    path: path.clone(),
                    default_duration: default_duration.map(DurationKey::from_days),
                },
                None => InstanceSource::Computed,
            };
            let stats = stage_partition(&out, &source)?;
            for (d, s) in &stats {
                println!(
                    "partition {d}: avg_means {:.4}, avg_stds {:.4}",
                    s.avg_means, s.avg_stds
                );
            }
        }
        Command::Optk(common) => {
            let (cfg, out) = validated(&common)?;
            for (d, choice) in stage_optk(&out, &cfg)? {
                match &choice.curve {
                    Some(c) => println!(
                        "optk {d}: k = {} (silhouette {:.4})",
                        choice.k, c.best_score
                    ),
                    None => println!("optk {d}: k = {} (distinct points)", choice.k),
                }
            }
        }
        Command::Sweep(common) => {
            let (cfg, out) = validated(&common)?;
            for (d, o) in stage_sweep(&out, &cfg)? {
                let sizes: Vec<usize> = o.clusters.iter().map(|c| c.len()).collect();
                println!("sweep {d}: rp {} alpha {} sizes {sizes:?}", o.rp, o.alpha);
            }
        }
        Command::Cluster {
            common,
            rp,
            alpha,
            k,
        } => {
            let (cfg, out) = validated(&common)?;
            let overrides = ClusterOverrides { rp, alpha, k };
            for (d, clusters) in stage_cluster(&out, &cfg, &overrides)? {
                let sizes: Vec<usize> = clusters.iter().map(|c| c.len()).collect();
                println!("cluster {d}: sizes {sizes:?}");
            }
        }
        Command::Label(common) => {
            let out = out_dir(&common.config()?)?;
            let labeled = stage_label(&out)?;
            print_summary(&labeled.summary)?;
        }
        Command::Run {
            common,
            input_kind,
            default_duration_days,
            outliers,
        } => {
            let mut cfg = common.config()?;
            if let Some(kind) = input_kind {
                cfg.input_kind = kind;
            }
            if default_duration_days.is_some() {
                cfg.default_duration_days = default_duration_days;
            }
            if outliers {
                cfg.outliers.enabled = true;
            }
            let output = run_all(&cfg)?;
            print_summary(&output.labeled.summary)?;
            for notice in &output.report.notices {
                eprintln!("note: {notice}");
            }
        }
        Command::Synth {
            common,
            output,
            auctions,
            shill_fraction,
            full_scale,
        } => {
            let cfg = common.config()?;
            let seed = cfg.seed().map_err(config_error)?;
            let dest = match output {
                Some(p) => p,
                None => out_dir(&cfg)?.join("bids.csv"),
            };
            let mut synth = if full_scale {
                SynthConfig::full_scale()
            } else {
                SynthConfig::default()
            };
            if let Some(n) = auctions {
                if full_scale {
                    return Err(config_error(Error::Config(
                        "--auctions cannot be combined with --full-scale".into(),
                    )));
                }
                synth.auctions = n;
            }
            if let Some(f) = shill_fraction {
                synth.shill_fraction = f;
            }
            let ds = generate_synthetic(&synth, seed).map_err(config_error)?;
            if let Some(dir) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| {
                    StageError::new(
                        Stage::Ingest,
                        Error::Io {
                            path: dir.into(),
                            source: e,
                        },
                    )
                })?;
            }
            write_bids_csv(&dest, ds.records()).map_err(|e| StageError::new(Stage::Ingest, e))?;
            println!(
                "synth: {} bids, {} auctions -> {}",
                ds.records().len(),
                ds.auctions().len(),
                dest.display()
            );
        }
        Command::Report(common) => {
            let out = out_dir(&common.config()?)?;
            let outcome = report(&out)?;
            for path in &outcome.written {
                println!("report: {}", path.display());
            }
            for notice in &outcome.notices {
                eprintln!("note: {notice}");
            }
        }
    }
    Ok(())
}

fn print_summary(summary: &sblabel::labeling::Summary) -> Result<(), StageError> {
    summary
        .write_csv(std::io::stdout().lock())
        .map_err(|e| StageError::new(Stage::Report, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
