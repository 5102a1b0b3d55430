use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use splatforge::compress::{compress, decompress, CompressOptions, PruneSchedule};
use splatforge::container::{read_compressed, write_compressed};
use splatforge::image::{psnr, Image};
use splatforge::perf::{model_frame, write_histogram_csv, PerfConfig, PerfReport};
use splatforge::ply::{load_ply, save_ply};
use splatforge::preprocess::{JacobianPath, Precision, ProjectOptions};
use splatforge::raster::{render_frame, FrameStats, RenderOptions, RenderParams};
use splatforge::scene::{parse_trajectory, trajectory_to_json, CameraView, GaussianCloud};
use splatforge::sort::{sort_tile, sorter_cycles, DepthCode, SortKey, SortOrder, SorterConfig};
use splatforge::synthetic::{gen_synthetic, orbit_views, SceneKind};

#[derive(Parser)]
#[command(name = "splatforge", version, about = "Gaussian splatting accelerator model")]
struct Cli {
    /// Worker threads (output does not depend on this).
    #[arg(long, global = true, env = "SPLATFORGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render views of a scene to images and reports.
    Render(RenderArgs),
    /// Compress a PLY scene into an SPLC container.
    Compress(CompressArgs),
    /// Expand an SPLC container back to PLY.
    Decompress {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Culling, termination and tile-density statistics with the cycle model.
    Analyze(AnalyzeArgs),
    /// Sort random tiles on the EVT sorter and check them against a reference sort.
    Sortbench {
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
    /// PSNR between two images, in dB.
    Psnr { a: PathBuf, b: PathBuf },
    /// Write a synthetic scene.
    Gen {
        #[arg(long, value_parser = parse_kind, default_value = "sphere")]
        kind: SceneKind,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write an orbit trajectory with this many views.
        #[arg(long)]
        cameras: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        views: usize,
        #[command(flatten)]
        size: SizeArgs,
    },
}

#[derive(Args, Clone)]
struct SizeArgs {
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 360)]
    height: u32,
}

#[derive(Args)]
struct SceneArgs {
    /// `.ply` scene or `.splc` container.
    input: PathBuf,
    /// Camera trajectory JSON; defaults to an orbit around the origin.
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Views in the default orbit.
    #[arg(long, default_value_t = 1)]
    views: usize,
    #[command(flatten)]
    size: SizeArgs,
}

#[derive(Copy, Clone, ValueEnum)]
enum PathArg {
    Full,
    Zeroskip,
}

#[derive(Copy, Clone, ValueEnum)]
enum PrecisionArg {
    F32,
    /// Round after every projection operation.
    Fp16,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value_t = 1e-4)]
    tau: f32,
    #[arg(long, default_value_t = 1.0 / 255.0)]
    alpha_min: f32,
    /// Background color `r,g,b` in [0, 1].
    #[arg(long, default_value = "0,0,0", value_parser = parse_rgb)]
    background: [f32; 3],
    #[arg(long, value_enum, default_value = "zeroskip")]
    path: PathArg,
    #[arg(long, value_enum, default_value = "f32")]
    precision: PrecisionArg,
    #[arg(long, default_value_t = 16)]
    tile_size: u32,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output image (`.ppm` or `.png`); several views get a `_<i>` suffix.
    #[arg(short, long)]
    out: PathBuf,
    /// JSON with frame statistics and the cycle model, one entry per view.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 800e6)]
    clock: f64,
}

#[derive(Args)]
struct CompressArgs {
    input: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Comma-separated pruning rates, or `none`.
    #[arg(long, default_value = "0.4,0.4,0.4,0.2")]
    schedule: String,
    #[arg(long, default_value_t = 1)]
    degree: u8,
    #[arg(long, default_value_t = 256)]
    k_dc: usize,
    #[arg(long, default_value_t = 256)]
    k_sh: usize,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Views used for significance scoring; defaults to an 8-view orbit.
    #[arg(long)]
    camera: Option<PathBuf>,
    #[command(flatten)]
    size: SizeArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Tile-density histogram of the first view.
    #[arg(long)]
    histogram_csv: Option<PathBuf>,
    /// Per-stage cycle table of the first view.
    #[arg(long)]
    stages_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 800e6)]
    clock: f64,
}

fn parse_kind(s: &str) -> Result<SceneKind, String> {
    s.parse()
}

fn parse_rgb(s: &str) -> Result<[f32; 3], String> {
    let parts: Vec<f32> = s.split(',').map(|p| p.trim().parse::<f32>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    match parts[..] {
        [r, g, b] if parts.iter().all(|v| (0.0..=1.0).contains(v)) => Ok([r, g, b]),
        _ => Err("expected three values in [0, 1], e.g. 0.1,0.2,0.3".into()),
    }
}

fn load_scene(path: &Path) -> Result<GaussianCloud> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("splc")) {
        let model = read_compressed(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(decompress(&model)?)
    } else {
        load_ply(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load_views(camera: Option<&Path>, views: usize, size: &SizeArgs) -> Result<Vec<CameraView>> {
    let views = match camera {
        Some(p) => parse_trajectory(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => orbit_views(views, 4.0, 1.5, size.width, size.height)?,
    };
    if views.is_empty() {
        bail!("no camera views");
    }
    Ok(views)
}

fn render_options(p: &PipelineArgs) -> Result<RenderOptions> {
    if p.tile_size == 0 {
        bail!("tile size must be at least 1");
    }
    if !(0.0..=1.0).contains(&p.tau) || !(0.0..=1.0).contains(&p.alpha_min) {
        bail!("thresholds must lie in [0, 1]");
    }
    let path = match p.path {
        PathArg::Full => JacobianPath::Full,
        PathArg::Zeroskip => JacobianPath::ZeroSkip,
    };
    Ok(RenderOptions {
        project: ProjectOptions {
            path,
            precision: match p.precision {
                PrecisionArg::F32 => Precision::F32,
                PrecisionArg::Fp16 => Precision::Fp16,
            },
            tile_size: p.tile_size,
        },
        params: RenderParams { tau: p.tau, alpha_min: p.alpha_min, background: p.background, ..Default::default() },
        ..Default::default()
    })
}

fn indexed_path(path: &Path, i: usize, count: usize) -> PathBuf {
    if count == 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("ppm");
    path.with_file_name(format!("{stem}_{i}.{ext}"))
}

#[derive(Serialize)]
struct ViewReport {
    view: usize,
    stats: FrameStats,
    perf: PerfReport,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn run_views(scene: &SceneArgs, pipeline: &PipelineArgs, clock: f64, mut each: impl FnMut(usize, usize, &Image) -> Result<()>) -> Result<Vec<ViewReport>> {
    let cloud = load_scene(&scene.input)?;
    let views = load_views(scene.camera.as_deref(), scene.views, &scene.size)?;
    let opts = render_options(pipeline)?;
    let cfg = PerfConfig { clock_hz: clock, path: opts.project.path, ..Default::default() };
    views
        .iter()
        .enumerate()
        .map(|(i, cam)| {
            let frame = render_frame(&cloud, cam, &opts);
            each(i, views.len(), &frame.image)?;
            let perf = model_frame(&frame.stats, &cfg)?;
            Ok(ViewReport { view: i, stats: frame.stats, perf })
        })
        .collect()
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    let reports = run_views(&a.scene, &a.pipeline, a.clock, |i, n, img| {
        let path = indexed_path(&a.out, i, n);
        img.save(&path).with_context(|| format!("writing {}", path.display()))
    })?;
    for r in &reports {
        println!(
            "view {}: {} splats, {} tiles, {:.1} FPS modeled",
            r.view,
            r.stats.splats,
            r.perf.tiles,
            r.perf.fps
        );
    }
    if let Some(p) = &a.report {
        write_json(p, &reports)?;
    }
    Ok(())
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let reports = run_views(&a.scene, &a.pipeline, a.clock, |_, _, _| Ok(()))?;
    for r in &reports {
        let rates = &r.perf.rates;
        println!(
            "view {}: culled {}/{} ({:.4}), terminated pairs {}/{} ({:.4}), max tile keys {}",
            r.view,
            rates.culled,
            rates.gaussians,
            rates.culling_rate,
            rates.terminated_pairs,
            rates.presented_pairs,
            rates.early_termination_rate,
            r.perf.sorter.max_tile_keys
        );
    }
    let first = &reports[0].perf;
    if let Some(p) = &a.histogram_csv {
        write_histogram_csv(&first.rates.histogram, fs::File::create(p)?)?;
    }
    if let Some(p) = &a.stages_csv {
        first.write_stage_csv(fs::File::create(p)?)?;
    }
    if let Some(p) = &a.report {
        write_json(p, &reports)?;
    }
    Ok(())
}

fn cmd_compress(a: &CompressArgs) -> Result<()> {
    let cloud = load_ply(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let schedule = if a.schedule.trim() == "none" {
        None
    } else {
        let rates = a
            .schedule
            .split(',')
            .map(|r| r.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .context("parsing --schedule")?;
        Some(PruneSchedule::new(rates)?)
    };
    let views = load_views(a.camera.as_deref(), 8, &a.size)?;
    let opts = CompressOptions { schedule, target_degree: a.degree, k_dc: a.k_dc, k_sh: a.k_sh, vq_iters: a.iters, seed: a.seed };
    let (model, report) = compress(&cloud, &views, &opts)?;
    write_compressed(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{} -> {} Gaussians, {} -> {} bytes ({:.2}x)",
        report.input_gaussians, report.output_gaussians, report.sizes.raw, report.sizes.container, report.ratio
    );
    if let Some(p) = &a.report {
        fs::write(p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SortbenchReport {
    trial: usize,
    n: usize,
    correct: bool,
    cycles: u64,
    local: u64,
    global: u64,
    overflow_beyond_capacity: u64,
}

fn cmd_sortbench(n: usize, seed: u64, trials: usize) -> Result<()> {
    let cfg = SorterConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all_ok = true;
    for trial in 0..trials {
        // A narrow value range forces duplicate depths.
        let span = rng.gen_range(1..=DepthCode::MAX.bits());
        let keys: Vec<SortKey> = (0..n)
            .map(|i| SortKey {
                tile_id: 0,
                depth: DepthCode::from_bits(rng.gen_range(1..=span)).expect("in range"),
                value: i as u32,
            })
            .collect();
        let got = sort_tile(&keys, &cfg, SortOrder::FrontToBack);
        let mut expect = keys.clone();
        expect.sort_by_key(|k| k.depth);
        let correct = got.values.iter().eq(expect.iter().map(|k| &k.value));
        all_ok &= correct;
        let report = SortbenchReport {
            trial,
            n,
            correct,
            cycles: sorter_cycles(n, &cfg),
            local: got.occupancy.local,
            global: got.occupancy.global,
            overflow_beyond_capacity: got.occupancy.overflow_beyond_capacity,
        };
        println!("{}", serde_json::to_string(&report)?);
    }
    if !all_ok {
        bail!("sorter output disagrees with the reference sort");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().context("configuring threads")?;
    }
    match cli.command {
        Command::Render(a) => cmd_render(&a),
        Command::Compress(a) => cmd_compress(&a),
        Command::Decompress { input, out } => {
            let model = read_compressed(&input).with_context(|| format!("reading {}", input.display()))?;
            save_ply(&decompress(&model)?, &out).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Sortbench { n, seed, trials } => cmd_sortbench(n, seed, trials),
        Command::Psnr { a, b } => {
            let db = psnr(&Image::load(&a)?, &Image::load(&b)?)?;
            if db.is_infinite() {
                println!("inf");
            } else {
                println!("{db:.4}");
            }
            Ok(())
        }
        Command::Gen { kind, n, seed, out, cameras, views, size } => {
            save_ply(&gen_synthetic(kind, n, seed), &out).with_context(|| format!("writing {}", out.display()))?;
            if let Some(p) = cameras {
                let traj = orbit_views(views, 4.0, 1.5, size.width, size.height)?;
                fs::write(&p, trajectory_to_json(&traj)).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
