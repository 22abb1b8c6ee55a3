//! Command-line surface of the `essloc` binary.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::bench::{run_bench, write_bench_csv, BenchSpec};
use crate::config::{ConfigFile, Method, PipelineConfig, SceneKind, CONFIG_ENV};
use crate::error::{Error, Result};
use crate::eval::{evaluate_results, EvalSummary};
use crate::io::{
    parse_dataset, read_essentials, read_poses, read_results, write_dataset, write_essentials,
    write_results, DatasetLayout,
};
use crate::localizer::PairSource;
use crate::pipeline::{
    default_method, estimate_dataset, localize_dataset, simulate_dataset, SimulationSpec,
};
use crate::simulator::{Geometry, NoiseSpec};

#[derive(Debug, Parser)]
#[command(name = "essloc", version, about = "Absolute pose from relative essential matrices")]
pub struct Cli {
    /// TOML config file; defaults to $ESSLOC_CONFIG when set.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Threshold and pair-window preset.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<PresetArg>,
    /// Method whose thresholds `--preset` applies.
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Indoor,
    Outdoor,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Essnet,
    Sift5pt,
    LearnableMatching,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GeometryArg {
    General,
    Collinear,
}

impl From<PresetArg> for SceneKind {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Indoor => SceneKind::Indoor,
            PresetArg::Outdoor => SceneKind::Outdoor,
        }
    }
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Essnet => Method::EssNet,
            MethodArg::Sift5pt => Method::Sift5Pt,
            MethodArg::LearnableMatching => Method::LearnableMatching,
        }
    }
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::General => Geometry::General,
            GeometryArg::Collinear => Geometry::Collinear,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate essential matrices from the dataset's pixel matches.
    Estimate {
        #[arg(long)]
        dataset: PathBuf,
        /// Defaults to the dataset's essentials file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Localize every query that has essential matrices.
    Localize {
        #[arg(long)]
        dataset: PathBuf,
        /// Essentials file to use instead of the dataset's own.
        #[arg(long)]
        essentials: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write a synthetic dataset.
    Simulate(SimulateArgs),
    /// Median errors of result files against ground truth.
    Evaluate {
        /// One per scene.
        #[arg(long, required = true)]
        results: Vec<PathBuf>,
        /// Ground-truth poses file, one per `--results`.
        #[arg(long = "ground-truth", required = true)]
        ground_truth: Vec<PathBuf>,
        /// Scene names; default to the result file stems.
        #[arg(long)]
        name: Vec<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Monte-Carlo sweep over direction noise and outlier fraction.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub scenes: usize,
    #[arg(long, default_value_t = 5)]
    pub db_images: usize,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, value_enum, default_value = "general")]
    pub geometry: GeometryArg,
    #[arg(long, default_value_t = 0.0)]
    pub pixel_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_matches: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_pairs: f64,
    /// Degrees.
    #[arg(long, default_value_t = 0.0)]
    pub rotation_noise: f64,
    /// Degrees.
    #[arg(long, default_value_t = 0.0)]
    pub direction_noise: f64,
    /// Skip writing pixel matches.
    #[arg(long)]
    pub no_matches: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 5)]
    pub db_images: usize,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[arg(long, value_enum, default_value = "general")]
    pub geometry: GeometryArg,
    #[arg(long, default_value_t = 0.0)]
    pub rotation_noise: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,5")]
    pub direction_noise: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4")]
    pub outlier_pairs: Vec<f64>,
}

impl Cli {
    fn config_path(&self) -> Option<PathBuf> {
        self.config
            .clone()
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
    }

    /// Effective configuration; `method` applies when `--method` is absent.
    pub fn resolve_config(&self, method: Method) -> Result<PipelineConfig> {
        let file = self.config_path().map(|p| ConfigFile::load(&p)).transpose()?;
        let method = self.method.map(Method::from).unwrap_or(method);
        let preset = self.preset.map(|p| (SceneKind::from(p), method));
        PipelineConfig::resolve(preset, file.as_ref(), self.seed)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn header(command: &str, dataset: &str, cfg: &PipelineConfig) -> String {
    format!("essloc {command}\ndataset = {dataset}\n{cfg}")
}

pub fn run(cli: &Cli) -> Result<()> {
    let layout = DatasetLayout::default();
    match &cli.command {
        Command::Estimate { dataset, out } => {
            let ds = parse_dataset(dataset, &layout)?;
            let cfg = cli.resolve_config(Method::Sift5Pt)?;
            let report = estimate_dataset(&ds, &cfg)?;
            let out = out.clone().unwrap_or_else(|| dataset.join(&layout.essentials));
            write_essentials(
                &out,
                &report.essentials,
                PairSource::Solver,
                &header("estimate", &ds.name, &cfg),
            )?;
            println!(
                "{} essential matrices written to {}, {} pairs failed",
                report.essentials.len(),
                out.display(),
                report.failures.len()
            );
        }
        Command::Localize {
            dataset,
            essentials,
            out,
            threads,
        } => {
            let mut ds = parse_dataset(dataset, &layout)?;
            if let Some(path) = essentials {
                (ds.essentials, ds.essential_source) = read_essentials(path)?;
                ds.validate()?;
            }
            let cfg = cli.resolve_config(default_method(ds.essential_source))?;
            let results = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(*n)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?
                    .install(|| localize_dataset(&ds, &cfg))?,
                None => localize_dataset(&ds, &cfg)?,
            };
            write_results(out, &results, &header("localize", &ds.name, &cfg))?;
            let ok = results.iter().filter(|r| r.pose().is_some()).count();
            println!("{ok}/{} queries localized, results in {}", results.len(), out.display());
        }
        Command::Simulate(args) => {
            let cfg = cli.resolve_config(Method::EssNet)?;
            let spec = SimulationSpec {
                scenes: args.scenes,
                db_images: args.db_images,
                points: args.points,
                geometry: args.geometry.into(),
                noise: NoiseSpec {
                    pixel_sigma: args.pixel_sigma,
                    outlier_match_fraction: args.outlier_matches,
                    outlier_pair_fraction: args.outlier_pairs,
                    rotation_noise: args.rotation_noise,
                    direction_noise: args.direction_noise,
                    seed: cfg.seed,
                },
                matches: !args.no_matches,
            };
            let name = args
                .out
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sim".into());
            let ds = simulate_dataset(&name, &spec, cfg.seed)?;
            write_dataset(&args.out, &ds, &layout)?;
            println!(
                "{} scene(s), {} database images written to {}",
                args.scenes,
                ds.images.len(),
                args.out.display()
            );
        }
        Command::Evaluate {
            results,
            ground_truth,
            name,
            csv,
        } => {
            if results.len() != ground_truth.len() {
                return Err(Error::Config(format!(
                    "{} result files but {} ground-truth files",
                    results.len(),
                    ground_truth.len()
                )));
            }
            if !name.is_empty() && name.len() != results.len() {
                return Err(Error::Config("give one --name per --results or none".into()));
            }
            let mut scenes = Vec::new();
            for (i, (rp, gp)) in results.iter().zip(ground_truth).enumerate() {
                let scene = name.get(i).cloned().unwrap_or_else(|| {
                    rp.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default()
                });
                scenes.push(evaluate_results(&scene, &read_results(rp)?, &read_poses(gp)?)?);
            }
            let summary = EvalSummary::new(scenes)?;
            print!("{summary}");
            if let Some(path) = csv {
                summary.write_csv(create(path)?)?;
                info!("summary written to {}", path.display());
            }
        }
        Command::Bench(args) => {
            let cfg = cli.resolve_config(Method::EssNet)?;
            let spec = BenchSpec {
                trials: args.trials,
                db_images: args.db_images,
                points: args.points,
                geometry: args.geometry.into(),
                rotation_noise: args.rotation_noise,
                direction_noise: args.direction_noise.clone(),
                outlier_fraction: args.outlier_pairs.clone(),
            };
            let rows = run_bench(&spec, &cfg.localizer, cfg.seed)?;
            write_bench_csv(&rows, create(&args.out)?)?;
            println!("{} grid cells written to {}", rows.len(), args.out.display());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).unwrap()
    }

    #[test]
    fn indoor_preset_on_solver_path() {
        let cli = parse(&["essloc", "--preset", "indoor", "estimate", "--dataset", "d"]);
        let cfg = cli.resolve_config(Method::Sift5Pt).unwrap();
        assert_eq!(cfg.solver.t1_pixels, 0.5);
        assert_eq!(cfg.localizer.alpha_max_t2, 15.0);
        assert_eq!(
            (cfg.localizer.min_pair_distance_a, cfg.localizer.max_pair_distance_b),
            (0.05, 10.0)
        );
        assert_eq!(cfg.localizer.top_k, 5);
    }

    #[test]
    fn outdoor_preset_on_solver_path() {
        let cli = parse(&["essloc", "estimate", "--dataset", "d", "--preset", "outdoor"]);
        let cfg = cli.resolve_config(Method::Sift5Pt).unwrap();
        assert_eq!(cfg.solver.t1_pixels, 0.5);
        assert_eq!(cfg.localizer.alpha_max_t2, 5.0);
        assert_eq!(
            (cfg.localizer.min_pair_distance_a, cfg.localizer.max_pair_distance_b),
            (3.0, 50.0)
        );
    }

    #[test]
    fn explicit_method_wins() {
        let cli = parse(&[
            "essloc", "--preset", "indoor", "--method", "learnable-matching", "localize",
            "--dataset", "d", "--out", "r.txt",
        ]);
        let cfg = cli.resolve_config(Method::EssNet).unwrap();
        assert_eq!((cfg.solver.t1_pixels, cfg.localizer.alpha_max_t2), (5.5, 20.0));
    }

    #[test]
    fn config_file_overrides_preset_and_seed_flag_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 1\n[localizer]\nt2_degrees = 9\n").unwrap();
        let p = path.to_str().unwrap();
        let cli = parse(&["essloc", "--config", p, "--preset", "outdoor", "--seed", "2", "bench", "--out", "x.csv"]);
        let cfg = cli.resolve_config(Method::EssNet).unwrap();
        assert_eq!(cfg.localizer.alpha_max_t2, 9.0);
        assert_eq!(cfg.localizer.min_pair_distance_a, 3.0);
        assert_eq!(cfg.seed, 2);
    }

    #[test]
    fn bench_grid_lists() {
        let cli = parse(&["essloc", "bench", "--out", "x.csv", "--direction-noise", "0,3", "--outlier-pairs", "0.2"]);
        let Command::Bench(args) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(args.direction_noise, [0.0, 3.0]);
        assert_eq!(args.outlier_pairs, [0.2]);
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(Cli::try_parse_from(["essloc", "--preset", "space", "bench", "--out", "x"]).is_err());
    }
}
