use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use physcon_core::eval::evaluate_scene;
use physcon_core::io::{
    collision_report, load_correspondences, load_ground_truth, load_point_cloud, load_scene_with_config,
    load_symmetries, read_report, write_eval_csv, write_ground_truth, write_json_atomic, write_report,
    write_scene,
};
use physcon_core::optimizer::{refine_scene, OptimizerConfig, Termination};
use physcon_core::scenegeom::{estimate_scene_geometry, SceneGeomParams};
use physcon_core::synth::{generate_synthetic_scene, NoiseModel};
use physcon_core::{Error, Pose, Scene};

#[derive(Parser)]
#[command(name = "physcon", version, about = "Physically consistent refinement of multi-object pose estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refine the poses of a scene and write a JSON report.
    Refine {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        smoothed_collisions: bool,
    },
    /// Estimate metric scale, support plane and gravity from a point cloud.
    SceneGeom {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        corr: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        scale_iters: usize,
        #[arg(long, default_value_t = 1000)]
        plane_iters: usize,
        /// Plane inlier distance in millimeters.
        #[arg(long, default_value_t = 5.0)]
        inlier_mm: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute MSSD and MSPD against ground truth.
    Eval {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        symmetries: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Refinement report whose final poses are evaluated. Without it the
        /// scene's initial poses are.
        #[arg(long)]
        poses: Option<PathBuf>,
    },
    /// Generate a synthetic tabletop scene and its ground truth.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        objects: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Write priors equal to the ground truth.
        #[arg(long)]
        no_noise: bool,
    },
    /// Print every penetrating part pair, deepest first.
    Collisions {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        poses: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Refine {
            scene,
            out,
            max_iters,
            step,
            seed,
            smoothed_collisions,
        } => {
            let (scene, mut config) = load_scene_with_config(&scene)?;
            apply_overrides(&mut config, max_iters, step, seed, smoothed_collisions);
            let report = refine_scene(&scene, &config)?;
            write_report(&out, &report)?;
            println!(
                "{} iterations, {:?}, cost {:.6} -> {:.6}",
                report.iterations, report.termination, report.initial_cost, report.final_cost
            );
            if report.termination == Termination::NonFiniteCost {
                eprintln!("error: cost became non-finite; last finite poses written");
                return Ok(ExitCode::from(2));
            }
        }
        Command::SceneGeom {
            cloud,
            corr,
            out,
            scale_iters,
            plane_iters,
            inlier_mm,
            seed,
        } => {
            let cloud = load_point_cloud(&cloud)?;
            let pairs = load_correspondences(&corr)?;
            let params = SceneGeomParams {
                scale_iterations: scale_iters,
                plane_iterations: plane_iters,
                inlier_threshold: inlier_mm * 1e-3,
                seed,
                ..SceneGeomParams::default()
            };
            let geom = estimate_scene_geometry(&cloud, &pairs, &params)?;
            write_json_atomic(&out, &geom)?;
            println!(
                "scale {:.6}, plane normal {:?} offset {:.4}, {} inliers",
                geom.scale,
                geom.plane.normal.as_slice(),
                geom.plane.offset,
                geom.plane.inliers
            );
        }
        Command::Eval {
            scene,
            gt,
            symmetries,
            out,
            poses,
        } => {
            let (scene, _) = load_scene_with_config(&scene)?;
            let estimates = estimates(&scene, poses)?;
            let truth = load_ground_truth(&gt)?;
            let syms = match symmetries {
                Some(p) => load_symmetries(&p)?,
                None => BTreeMap::new(),
            };
            let records = evaluate_scene(&scene, &estimates, &truth, &syms)?;
            write_eval_csv(&out, &records)?;
            for r in &records {
                println!("{}\t{:.6}\t{:.3}", r.object_id, r.mssd_m, r.mspd_px);
            }
        }
        Command::Synth {
            seed,
            objects,
            out,
            gt,
            no_noise,
        } => {
            let noise = if no_noise { NoiseModel::none() } else { NoiseModel::default() };
            let s = generate_synthetic_scene(seed, objects, &noise)?;
            let config = OptimizerConfig {
                seed,
                ..OptimizerConfig::default()
            };
            write_scene(&out, &s.scene, &config)?;
            let names: Vec<String> = s.scene.movables.iter().map(|m| m.name.clone()).collect();
            write_ground_truth(&gt, &names, &s.ground_truth)?;
            info!("wrote {} objects", objects);
        }
        Command::Collisions { scene, poses } => {
            let (mut scene, _) = load_scene_with_config(&scene)?;
            let p = estimates(&scene, poses)?;
            scene.set_poses(&p);
            let rows = collision_report(&scene)?;
            println!("{:<16} {:>5} {:<16} {:>5} {:>12}", "object_a", "part", "object_b", "part", "depth_m");
            for r in &rows {
                println!(
                    "{:<16} {:>5} {:<16} {:>5} {:>12.3e}",
                    r.object_a, r.part_a, r.object_b, r.part_b, r.depth
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn apply_overrides(
    config: &mut OptimizerConfig,
    max_iters: Option<usize>,
    step: Option<f64>,
    seed: Option<u64>,
    smoothed: bool,
) {
    if let Some(n) = max_iters {
        config.max_iterations = n;
    }
    if let Some(s) = step {
        config.step_size = s;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    if smoothed {
        config.smoothed_collisions = true;
    }
}

fn estimates(scene: &Scene, report: Option<PathBuf>) -> Result<Vec<Pose>, Error> {
    let Some(path) = report else {
        return Ok(scene.poses());
    };
    let report = read_report(&path)?;
    if report.final_poses.len() != scene.movables.len() {
        return Err(Error::InvalidConfig(format!(
            "report has {} poses, scene has {} objects",
            report.final_poses.len(),
            scene.movables.len()
        )));
    }
    Ok(report.final_poses)
}
