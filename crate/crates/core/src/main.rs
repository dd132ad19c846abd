use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use reloc_core::bench::{ablation_smad, ablation_tam, emit_heatmap, run_trials, write_json, HeatmapKind, HeatmapSpec, TrialSpec};
use reloc_core::map::{load_map, save_map};
use reloc_core::pipeline::{relocalize, PipelineConfig};
use reloc_core::scan::{load_scan, save_scan};
use reloc_core::sim::{generate_map, simulate_scan, LidarModel, MapKind};
use reloc_core::{Pose, RelocError, Result};

/// Passive global relocalization on 2-D occupancy grids.
#[derive(Debug, Parser)]
#[command(name = "reloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AblationWhich {
    Smad,
    Tam,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the pose of a single scan on a map.
    Relocalize {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scan: PathBuf,
        /// Pipeline configuration JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-hypothesis CSV trace.
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Omit wall-clock timings so repeated runs are byte-identical.
        #[arg(long)]
        reproducible: bool,
    },
    /// Simulate a lidar scan at a pose.
    Simulate {
        #[arg(long)]
        map: PathBuf,
        /// Pose as `x,y,theta` (meters, radians).
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        pose: Pose,
        #[arg(long)]
        lidar: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic map and write its YAML descriptor and PGM raster.
    Genmap {
        #[arg(long)]
        kind: MapKind,
        /// Extent as `WxH` in meters.
        #[arg(long, value_parser = parse_size, default_value = "30x20")]
        size: (f64, f64),
        #[arg(long, default_value_t = 0.05)]
        res: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Descriptor path; the raster is written next to it with a `.pgm` extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a batch of simulated kidnapped-robot trials.
    Trial {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Skip wall-clock measurements (and budget checks) for byte-identical output.
        #[arg(long)]
        reproducible: bool,
    },
    /// Compare pipeline variants on identical trials.
    Ablation {
        #[arg(long, value_enum)]
        which: AblationWhich,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        reproducible: bool,
    },
    /// Write a metric heatmap CSV.
    Heatmap {
        #[arg(long)]
        kind: HeatmapKind,
        /// Scenario JSON; the built-in door scenario is used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_pose(s: &str) -> std::result::Result<Pose, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,theta but got `{s}`"));
    }
    let mut v = [0.0f64; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|e| format!("bad number `{part}`: {e}"))?;
        if !slot.is_finite() {
            return Err(format!("non-finite value `{part}`"));
        }
    }
    Ok(Pose::new(v[0], v[1], v[2]))
}

fn parse_size(s: &str) -> std::result::Result<(f64, f64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH but got `{s}`"))?;
    let w: f64 = w.trim().parse().map_err(|e| format!("bad width: {e}"))?;
    let h: f64 = h.trim().parse().map_err(|e| format!("bad height: {e}"))?;
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err("width and height must be positive".into());
    }
    Ok((w, h))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| RelocError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| RelocError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Relocalize {
            map,
            scan,
            config,
            seed,
            out,
            audit,
            reproducible,
        } => {
            let grid = load_map(&map)?;
            let scan = load_scan(&scan)?;
            let cfg = match config {
                Some(path) => read_json::<PipelineConfig>(&path)?,
                None => PipelineConfig::default(),
            };
            cfg.validate()?;
            let result = relocalize(&grid, &scan, &cfg, seed)?;
            write_json(&result.to_file(&cfg, !reproducible), &out)?;
            if let Some(path) = audit {
                result.write_audit_csv(path)?;
            }
            println!(
                "pose {:.4} {:.4} {:.4} confidence {:.4} batches {}",
                result.pose.x, result.pose.y, result.pose.theta, result.confidence, result.batches_processed
            );
        }
        Command::Simulate {
            map,
            pose,
            lidar,
            seed,
            out,
        } => {
            let grid = load_map(&map)?;
            let model = match lidar {
                Some(path) => read_json::<LidarModel>(&path)?,
                None => LidarModel::default(),
            };
            let scan = simulate_scan(&grid, &pose, &model, seed)?;
            save_scan(&scan, &out)?;
        }
        Command::Genmap {
            kind,
            size,
            res,
            seed,
            out,
        } => {
            let grid = generate_map(kind, size, res, seed)?;
            save_map(&grid, &out)?;
        }
        Command::Trial {
            spec,
            out_dir,
            reproducible,
        } => {
            let spec: TrialSpec = read_json(&spec)?;
            spec.validate()?;
            let run = run_trials(&spec, !reproducible)?;
            run.write(&out_dir)?;
            let s = &run.report.overall;
            println!("trials {} successes {} sr {:.1}%", s.trials, s.successes, s.sr);
        }
        Command::Ablation {
            which,
            spec,
            out_dir,
            reproducible,
        } => {
            let spec: TrialSpec = read_json(&spec)?;
            spec.validate()?;
            create_dir(&out_dir)?;
            match which {
                AblationWhich::Smad => {
                    let report = ablation_smad(&spec, !reproducible)?;
                    write_json(&report, out_dir.join("smad_ablation.json"))?;
                    for v in &report.variants {
                        println!("{} sr {:.1}% mean batches {:?}", v.name, v.summary.sr, v.summary.mean_batches);
                    }
                }
                AblationWhich::Tam => {
                    let report = ablation_tam(&spec, !reproducible)?;
                    write_json(&report, out_dir.join("tam_ablation.json"))?;
                    for r in &report.rows {
                        println!("rho {} {:?} sr {:.1}%", r.rho, r.metric, r.summary.sr);
                    }
                }
            }
        }
        Command::Heatmap { kind, spec, out } => {
            let spec = match spec {
                Some(path) => read_json::<HeatmapSpec>(&path)?,
                None => HeatmapSpec::default(),
            };
            let rows = emit_heatmap(kind, &spec, &out)?;
            println!("{rows} rows");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
