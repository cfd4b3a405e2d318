use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use graspkit::geometry::{empty_space_ratio, ray_aabb, Aabb, Point3, PointCloud, PointLabel, Ray, RigidTransform, Vector3};
use graspkit::io::{read_cloud, write_ply, write_trajectory_csv, write_trajectory_ply, HandFile, HAND_SCHEMA_VERSION};
use graspkit::kinematics::{dls_ik, HandModel, IkSettings, JointConfig};
use graspkit::perception::{Bvh, DEFAULT_LEAF_CAPACITY};
use graspkit::pipeline::{batch_evaluate, run_pipeline, synthesize_scene, write_metrics_csv, BatchConfig, MetricsRow, PipelineConfig, SCHEMA_VERSION};
use graspkit::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_GRASP: u8 = 3;
const EXIT_IK: u8 = 4;

const AFTER_HELP: &str = concat!(
    "Config files are JSON with \"schema_version\": 1 (pipeline and batch configs) and hand files carry \"schema_version\": 1.\n",
    "Exit codes: 0 success, 2 config or validation error, 3 grasp failure, 4 IK non-convergence."
);

/// Per-finger grasp planning on synthetic point-cloud scenes.
#[derive(Parser, Debug)]
#[command(name = "graspkit", version, after_help = AFTER_HELP)]
struct Cli {
    /// Only print errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Log planner progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Pipeline or batch config (JSON, schema_version 1). Defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for output files, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides every random seed in the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a labeled scene: writes scene.ply and truth.json.
    #[command(after_help = AFTER_HELP)]
    GenScene {
        #[command(flatten)]
        common: Common,
    },
    /// Run the full pipeline on one scene: writes result.json, trajectories.csv and trajectories.ply.
    #[command(after_help = AFTER_HELP)]
    Run {
        #[command(flatten)]
        common: Common,
        /// Hand model JSON; the built-in synthetic hand when omitted.
        #[arg(long, value_name = "PATH")]
        hand: Option<PathBuf>,
    },
    /// Objects x cameras x trials sweep: writes metrics.csv (aggregate) and trials.csv.
    #[command(after_help = AFTER_HELP)]
    Bench {
        #[command(flatten)]
        common: Common,
        /// Hand model JSON; the built-in synthetic hand when omitted.
        #[arg(long, value_name = "PATH")]
        hand: Option<PathBuf>,
        /// Overrides the trial count of the batch config.
        #[arg(long, value_name = "N")]
        trials: Option<usize>,
    },
    /// Inspect a point cloud (ASCII PLY or CSV) through the spatial index.
    #[command(after_help = AFTER_HELP)]
    Query {
        /// Cloud file (.ply or .csv).
        cloud: PathBuf,
        /// Also write the answer to DIR/query.json.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(subcommand)]
        op: QueryOp,
    },
    /// Solve IK for one finger toward a target pose.
    #[command(after_help = AFTER_HELP)]
    IkSolve {
        /// Hand model JSON; the built-in synthetic hand when omitted.
        #[arg(long, value_name = "PATH")]
        hand: Option<PathBuf>,
        /// Finger index, 0 is the thumb.
        #[arg(long)]
        finger: usize,
        /// Target as "x y z" (position only) or 12 values: rotation row-major then translation.
        #[arg(long, value_name = "VALUES", allow_hyphen_values = true)]
        target: String,
        /// Initial joint values; the middle of each joint range when omitted.
        #[arg(long, value_name = "VALUES", allow_hyphen_values = true)]
        init: Option<String>,
        /// IK settings JSON (w_theta, lambda, max_iters, pos_tol, ang_tol, step_scale).
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Also write the solution to DIR/ik.json.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum QueryOp {
    /// Nearest cloud point to (x, y, z).
    Nearest {
        #[arg(allow_hyphen_values = true)]
        x: f64,
        #[arg(allow_hyphen_values = true)]
        y: f64,
        #[arg(allow_hyphen_values = true)]
        z: f64,
    },
    /// Ray against the cloud bounding box.
    Ray {
        #[arg(num_args = 6, allow_hyphen_values = true, value_names = ["OX", "OY", "OZ", "DX", "DY", "DZ"])]
        values: Vec<f64>,
    },
    /// Bounding box, volume, surface area and empty-space ratio.
    Stats,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

fn context<'a>(what: &'a str, path: &'a Path) -> impl FnOnce(Error) -> Failure + 'a {
    move |e| Failure::config(format!("{what} {}: {e}", path.display()))
}

fn read_text(what: &str, path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {what} {}: {e}", path.display())))
}

fn load_pipeline(common: &Common) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::from_json(&read_text("config", p)?).map_err(context("invalid config", p))?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg = cfg.with_seed(s);
    }
    Ok(cfg)
}

fn load_hand(path: Option<&Path>) -> Result<HandModel<f64>, Failure> {
    match path {
        Some(p) => HandFile::from_json(&read_text("hand model", p)?).and_then(|h| h.to_model()).map_err(context("invalid hand model", p)),
        None => Ok(HandModel::synthetic()),
    }
}

fn out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<fs::File, Failure> {
    fs::File::create(path).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| Failure::config(format!("cannot write {}: {e}", path.display()))
}

fn parse_values(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Failure::config(format!("{what}: '{s}' is not a finite number"))))
        .collect()
}

fn gen_scene(common: &Common, quiet: bool) -> Result<u8, Failure> {
    let cfg = load_pipeline(common)?;
    let scene = synthesize_scene(&cfg.scene).map_err(|e| Failure::config(format!("invalid scene: {e}")))?;
    out_dir(&common.out)?;
    let ply = common.out.join("scene.ply");
    write_ply(&scene.cloud, create(&ply)?).map_err(io_err(&ply))?;
    write_json(&common.out.join("truth.json"), &scene.truth)?;
    if !quiet {
        println!("scene: {} seen from {} (seed {})", cfg.scene.object.label(), cfg.scene.camera.label(), cfg.scene.rng_seed);
        for label in [PointLabel::Object, PointLabel::Plane, PointLabel::Outlier] {
            println!("  {:<8} {:>6}", format!("{label:?}").to_lowercase(), scene.cloud.indices_with_label(label).len());
        }
        println!("  {:<8} {:>6}", "total", scene.cloud.len());
        println!("wrote {} and truth.json", ply.display());
    }
    Ok(0)
}

fn run(common: &Common, hand: Option<&Path>, quiet: bool) -> Result<u8, Failure> {
    let cfg = load_pipeline(common)?;
    let hand = load_hand(hand)?;
    let res = run_pipeline(&cfg, &hand).map_err(|e| Failure::config(format!("invalid configuration: {e}")))?;
    out_dir(&common.out)?;
    write_json(&common.out.join("result.json"), &res)?;
    let selected: Vec<_> = res
        .hypothesis
        .iter()
        .flat_map(|h| &h.fingers)
        .filter_map(|p| p.selection.map(|s| &p.trajectories[s.trajectory]))
        .collect();
    let csv = common.out.join("trajectories.csv");
    write_trajectory_csv(&selected, create(&csv)?).map_err(io_err(&csv))?;
    let ply = common.out.join("trajectories.ply");
    write_trajectory_ply(&selected, create(&ply)?).map_err(io_err(&ply))?;

    if !quiet {
        println!("object {}  camera {}  seed {}", res.object, res.camera, res.seed);
        println!("segmentation accuracy  {:.2} %  ({} of {} points kept)", res.segmentation_accuracy, res.counts.segmented, res.counts.total);
        if let Some(e) = res.pose_estimation_error {
            println!("pose estimation error  {:.2} mm", e * 1e3);
        }
        if let Some(eta) = res.eta_empty {
            println!("empty-space ratio      {eta:.3}");
        }
        println!("planning {:.1} ms  ik {:.3} ms  total {:.1} ms", res.planning_time_ms, res.ik_time_ms, res.end_to_end_latency_ms);
        for (f, d) in res.contact_distances.iter().enumerate() {
            let gap = d.map_or("-".to_string(), |d| format!("{:+.2} mm", d * 1e3));
            println!("  finger {f}: gap {gap:>10}  contact {}", if res.tactile_confirmed[f] { "yes" } else { "no" });
        }
        for r in &res.relaxations {
            println!("  replanned with {r:?}");
        }
    }
    match res.failure_reason {
        None => {
            if !quiet {
                println!("grasp: success");
            }
            Ok(0)
        }
        Some(reason) => {
            println!("grasp: FAILED ({}) {}", reason.as_str(), res.failure_detail.as_deref().unwrap_or(""));
            Ok(EXIT_GRASP)
        }
    }
}

fn bench(common: &Common, hand: Option<&Path>, trials: Option<usize>, quiet: bool) -> Result<u8, Failure> {
    let mut cfg = match &common.config {
        Some(p) => BatchConfig::from_json(&read_text("config", p)?).map_err(context("invalid config", p))?,
        None => BatchConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.base_seed = s;
        cfg.pipeline = cfg.pipeline.with_seed(s);
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    cfg.validate().map_err(|e| Failure::config(format!("invalid config: {e}")))?;
    let hand = load_hand(hand)?;
    let report = batch_evaluate(&cfg.scenes(), cfg.trials, &cfg.pipeline, &hand).map_err(|e| Failure::config(e.to_string()))?;
    out_dir(&common.out)?;
    let metrics = common.out.join("metrics.csv");
    write_metrics_csv(&report.aggregate_rows, create(&metrics)?).map_err(io_err(&metrics))?;
    let per_trial = common.out.join("trials.csv");
    write_metrics_csv(&report.trial_rows, create(&per_trial)?).map_err(io_err(&per_trial))?;
    if !quiet {
        print_table(&report.aggregate_rows);
        println!(
            "overall: SA {:.2} %  GSR {:.2} %  pose error {:.2} mm over {} runs",
            report.mean_segmentation_accuracy(),
            report.grasp_success_rate(),
            report.mean_pose_error() * 1e3,
            report.results.len()
        );
        println!("wrote {} and {}", metrics.display(), per_trial.display());
    }
    Ok(0)
}

fn print_table(rows: &[MetricsRow]) {
    println!("{:<10} {:<22} {:>7} {:>7} {:>9} {:>11} {:>9}", "object", "camera", "SA %", "GSR %", "pose mm", "plan ms", "ik ms");
    for r in rows {
        println!(
            "{:<10} {:<22} {:>7.2} {:>7.2} {:>9.2} {:>11.1} {:>9.2}",
            r.object, r.camera, r.sa_percent, r.gsr_percent, r.pose_error_mm, r.planning_ms_mean, r.ik_ms_mean
        );
    }
}

#[derive(Serialize)]
#[serde(tag = "query", rename_all = "snake_case")]
enum QueryAnswer {
    Nearest { index: usize, distance: f64, point: [f64; 3] },
    Ray { hit: bool, t_enter: Option<f64>, t_exit: Option<f64> },
    Stats { points: usize, min: [f64; 3], max: [f64; 3], volume: f64, surface_area: f64, hull_volume: f64, eta_empty: f64, degenerate: bool },
}

fn arr(p: &Point3<f64>) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn query(cloud_path: &Path, op: &QueryOp, out: Option<&Path>) -> Result<u8, Failure> {
    let cloud: PointCloud<f64> = read_cloud(cloud_path).map_err(context("cannot parse cloud", cloud_path))?;
    let invalid = |e: Error| Failure::config(format!("{}: {e}", cloud_path.display()));
    let answer = match op {
        QueryOp::Nearest { x, y, z } => {
            let bvh = Bvh::build(&cloud, DEFAULT_LEAF_CAPACITY).map_err(invalid)?;
            let hit = bvh.nearest(&Point3::new(*x, *y, *z));
            println!("nearest index {}  distance {}", hit.index, hit.distance);
            QueryAnswer::Nearest { index: hit.index, distance: hit.distance, point: arr(&cloud.points[hit.index]) }
        }
        QueryOp::Ray { values: v } => {
            let bounds = Aabb::from_cloud(&cloud).map_err(invalid)?;
            let ray = Ray::new(Point3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5])).map_err(|e| Failure::config(format!("invalid ray: {e}")))?;
            match ray_aabb(&ray, &bounds) {
                Some(h) => {
                    println!("hit  t_enter {}  t_exit {}", h.t_enter, h.t_exit);
                    QueryAnswer::Ray { hit: true, t_enter: Some(h.t_enter), t_exit: Some(h.t_exit) }
                }
                None => {
                    println!("miss");
                    QueryAnswer::Ray { hit: false, t_enter: None, t_exit: None }
                }
            }
        }
        QueryOp::Stats => {
            let bounds = Aabb::from_cloud(&cloud).map_err(invalid)?;
            let eta = empty_space_ratio(&cloud, &bounds).map_err(invalid)?;
            println!("points {}", cloud.len());
            println!("min    {} {} {}", bounds.min.x, bounds.min.y, bounds.min.z);
            println!("max    {} {} {}", bounds.max.x, bounds.max.y, bounds.max.z);
            println!("V      {}", bounds.volume());
            println!("S      {}", bounds.surface_area());
            println!("hull   {}", eta.hull_volume);
            println!("eta    {}{}", eta.eta, if eta.degenerate { "  (degenerate box)" } else { "" });
            QueryAnswer::Stats {
                points: cloud.len(),
                min: arr(&bounds.min),
                max: arr(&bounds.max),
                volume: bounds.volume(),
                surface_area: bounds.surface_area(),
                hull_volume: eta.hull_volume,
                eta_empty: eta.eta,
                degenerate: eta.degenerate,
            }
        }
    };
    if let Some(dir) = out {
        out_dir(dir)?;
        write_json(&dir.join("query.json"), &answer)?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct IkReport {
    finger: usize,
    q: Vec<f64>,
    converged: bool,
    iterations: usize,
    pos_residual: f64,
    ang_residual: f64,
}

struct IkRequest<'a> {
    hand: Option<&'a Path>,
    finger: usize,
    target: &'a str,
    init: Option<&'a str>,
    config: Option<&'a Path>,
    out: Option<&'a Path>,
}

fn ik_solve(req: IkRequest, quiet: bool) -> Result<u8, Failure> {
    let hand = load_hand(req.hand)?;
    let chain = hand.finger(req.finger).map_err(|e| Failure::config(format!("invalid finger: {e}")))?;
    let mut settings = match req.config {
        Some(p) => serde_json::from_str::<IkSettings<f64>>(&read_text("IK settings", p)?).map_err(|e| Failure::config(format!("invalid IK settings {}: {e}", p.display())))?,
        None => IkSettings::default(),
    };
    let v = parse_values(req.target, "target")?;
    let target = match v.len() {
        3 => {
            settings.w_theta = 0.0;
            settings.ang_tol = f64::INFINITY;
            RigidTransform::from_translation(Vector3::new(v[0], v[1], v[2]))
        }
        12 => {
            let vals: [f64; 12] = v.try_into().expect("length checked");
            RigidTransform::from_row_major(&vals).map_err(|e| Failure::config(format!("invalid target pose: {e}")))?
        }
        n => return Err(Failure::config(format!("target needs 3 or 12 values, got {n}"))),
    };
    settings.validate().map_err(|e| Failure::config(format!("invalid IK settings: {e}")))?;
    let q0 = match req.init {
        Some(text) => {
            let q = parse_values(text, "init")?;
            if q.len() != chain.dof() {
                return Err(Failure::config(format!("init needs {} values, got {}", chain.dof(), q.len())));
            }
            JointConfig::from_vec(q)
        }
        None => chain.mid_config(),
    };
    let sol = dls_ik(chain, &target, &settings, &q0).map_err(|e| Failure::config(e.to_string()))?;
    let report = IkReport {
        finger: req.finger,
        q: sol.q.as_slice().to_vec(),
        converged: sol.converged,
        iterations: sol.iterations,
        pos_residual: sol.pos_residual,
        ang_residual: sol.ang_residual,
    };
    if let Some(dir) = req.out {
        out_dir(dir)?;
        write_json(&dir.join("ik.json"), &report)?;
    }
    if !quiet || !sol.converged {
        let q: Vec<String> = report.q.iter().map(|x| format!("{x:.6}")).collect();
        println!("finger {} ({})  q* = [{}]", req.finger, chain.name, q.join(", "));
        println!("position residual {:.4} mm  angular residual {:.4} deg  iterations {}", sol.pos_residual * 1e3, sol.ang_residual.to_degrees(), sol.iterations);
        println!("converged: {}", sol.converged);
    }
    Ok(if sol.converged { 0 } else { EXIT_IK })
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    let quiet = cli.quiet;
    match &cli.command {
        Command::GenScene { common } => gen_scene(common, quiet),
        Command::Run { common, hand } => run(common, hand.as_deref(), quiet),
        Command::Bench { common, hand, trials } => bench(common, hand.as_deref(), *trials, quiet),
        Command::Query { cloud, out, op } => query(cloud, op, out.as_deref()),
        Command::IkSolve { hand, finger, target, init, config, out } => ik_solve(
            IkRequest { hand: hand.as_deref(), finger: *finger, target, init: init.as_deref(), config: config.as_deref(), out: out.as_deref() },
            quiet,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new().filter_level(level).init();
    log::debug!("config schema {SCHEMA_VERSION}, hand schema {HAND_SCHEMA_VERSION}");
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
