//! `fstk`: disparity estimation, view synthesis and evaluation for
//! equisolid fisheye stereo pairs.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 contract
//! violation (mismatched sizes, wrong disparity domain, invalid parameters).

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fstk_core::io::{self, DisparityMeta};
use fstk_core::{
    average_psnr, build_fov_mask, estimate_disparity_fisheye, estimate_disparity_horizontal,
    ground_truth_disparity, psnr_masked, render_fisheye_view, synthesize_conventional,
    synthesize_fisheye, visibility_mask, DisparityMap, FovMask, Interpolation, LumaImage,
    MatchConfig, SceneSpec, SynthesisConfig,
};

const THREADS_ENV: &str = "FSTK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fstk", version, about = "Fisheye stereo toolkit")]
struct Cli {
    /// Worker threads (default: all cores, or FSTK_THREADS when set).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a disparity map from the right view to the left view.
    Estimate(EstimateArgs),
    /// Synthesize an intermediate view from the right view and a disparity map.
    Synthesize(SynthesizeArgs),
    /// Masked PSNR between a test and a reference image.
    Evaluate(EvaluateArgs),
    /// Render a view or the ground-truth disparity of a synthetic scene.
    Render(RenderArgs),
    /// Render, estimate, synthesize and evaluate both modes on a scene.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Horizontal,
    Fisheye,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Horizontal => "horizontal",
            Mode::Fisheye => "fisheye",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Interp {
    Linear,
    Cubic,
}

impl From<Interp> for Interpolation {
    fn from(i: Interp) -> Self {
        match i {
            Interp::Linear => Interpolation::Linear,
            Interp::Cubic => Interpolation::Cubic,
        }
    }
}

#[derive(Debug, Args)]
struct MatchArgs {
    /// Block half-width w; blocks are (2w+1) x (2w+1).
    #[arg(long, default_value_t = fstk_core::matching::DEFAULT_SUPPORT_WIDTH)]
    support_width: usize,
    /// Largest candidate disparity s; candidates are 0..=s.
    #[arg(long, default_value_t = fstk_core::matching::DEFAULT_SEARCH_RANGE)]
    search_range: usize,
}

impl MatchArgs {
    fn config(&self) -> MatchConfig {
        MatchConfig::new(self.support_width, self.search_range)
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[command(flatten)]
    matching: MatchArgs,
    /// Camera config (key=value); required in fisheye mode.
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    disparity: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Camera config; defaults to the camera recorded with the disparity map.
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Interp::Linear)]
    interp: Interp,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(
        long,
        required_unless_present = "pairs",
        conflicts_with = "pairs",
        requires = "reference"
    )]
    test: Option<PathBuf>,
    #[arg(long = "ref", requires = "test")]
    reference: Option<PathBuf>,
    /// File listing `test ref` path pairs, one per line.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// With --pairs: write `pair_id,psnr_db` rows here.
    #[arg(long, requires = "pairs")]
    csv: Option<PathBuf>,
    /// Camera config defining the field-of-view mask.
    #[arg(long, required_unless_present = "no_mask")]
    camera: Option<PathBuf>,
    /// Evaluate every pixel.
    #[arg(long, conflicts_with = "camera")]
    no_mask: bool,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Camera displacement along the baseline, in scene units.
    #[arg(
        long,
        required_unless_present = "gt_disparity",
        conflicts_with = "gt_disparity"
    )]
    offset: Option<f64>,
    /// Write the right view's ground-truth disparity instead of an image.
    #[arg(long)]
    gt_disparity: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Scene config; defaults to the built-in single-plane scene.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[command(flatten)]
    matching: MatchArgs,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Interp::Linear)]
    interp: Interp,
    /// Also write renders, disparity maps and synthesized views here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(fstk_core::Error),
}

impl From<fstk_core::Error> for CliError {
    fn from(e: fstk_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_contract_violation() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fstk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn thread_count(flag: Option<u16>) -> CliResult<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n as usize));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> CliResult {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.threads)? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Synthesize(a) => synthesize(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Render(a) => render(a),
        Command::Pipeline(a) => pipeline(a),
    })
}

fn estimate(a: EstimateArgs) -> CliResult {
    let left = io::read_image(&a.left)?;
    let right = io::read_image(&a.right)?;
    let cfg = a.matching.config();
    let camera = match (&a.camera, a.mode) {
        (Some(path), _) => Some(io::load_camera(path, right.height(), right.width())?),
        (None, Mode::Fisheye) => {
            return Err(CliError::Usage(
                "--camera is required in fisheye mode".into(),
            ))
        }
        (None, Mode::Horizontal) => None,
    };
    let map = match a.mode {
        Mode::Horizontal => estimate_disparity_horizontal(&left, &right, &cfg)?,
        Mode::Fisheye => estimate_disparity_fisheye(&left, &right, &cfg, camera.as_ref().unwrap())?,
    };
    let meta = DisparityMeta {
        support_width: Some(cfg.support_width),
        search_range: Some(cfg.search_range),
        camera,
        extra: vec![("mode".into(), a.mode.to_string())],
    };
    io::write_disparity(&a.out, &map, &meta)?;
    Ok(())
}

fn synthesize(a: SynthesizeArgs) -> CliResult {
    let right = io::read_image(&a.right)?;
    let (map, meta) = io::read_disparity(&a.disparity)?;
    let cfg = SynthesisConfig::new(a.alpha, a.interp.into())?;
    let out = match a.mode {
        Mode::Horizontal => synthesize_conventional(&right, &map, &cfg)?,
        Mode::Fisheye => {
            let camera = match (&a.camera, meta.camera) {
                (Some(path), _) => io::load_camera(path, right.height(), right.width())?,
                (None, Some(cam)) => cam,
                (None, None) => {
                    return Err(CliError::Usage(
                        "--camera is required: the disparity map records no camera".into(),
                    ))
                }
            };
            synthesize_fisheye(&right, &map, &cfg, &camera)?
        }
    };
    io::write_image_with_comments(&a.out, &out, &synthesis_comments(a.mode, &cfg))?;
    Ok(())
}

fn synthesis_comments(mode: Mode, cfg: &SynthesisConfig) -> Vec<String> {
    vec![
        format!("mode={mode}"),
        format!("interp={}", cfg.interpolation),
        format!("alpha={}", cfg.alpha),
    ]
}

fn format_psnr(db: f64) -> String {
    if db.is_infinite() {
        "inf".into()
    } else {
        format!("{db:.4}")
    }
}

fn evaluation_mask(a: &EvaluateArgs, image: &LumaImage) -> CliResult<FovMask> {
    let (h, w) = image.dims();
    match &a.camera {
        Some(path) => Ok(build_fov_mask(&io::load_camera(path, h, w)?, h, w)),
        None => Ok(FovMask::full(h, w)),
    }
}

fn evaluate(a: EvaluateArgs) -> CliResult {
    if let Some(list) = &a.pairs {
        return evaluate_pairs(&a, list);
    }
    let test = io::read_image(a.test.as_ref().unwrap())?;
    let reference = io::read_image(a.reference.as_ref().unwrap())?;
    let mask = evaluation_mask(&a, &reference)?;
    println!(
        "PSNR_dB={}",
        format_psnr(psnr_masked(&test, &reference, &mask)?)
    );
    Ok(())
}

fn evaluate_pairs(a: &EvaluateArgs, list: &Path) -> CliResult {
    let text = std::fs::read_to_string(list).map_err(|e| fstk_core::Error::Io {
        path: list.into(),
        source: e,
    })?;
    let base = list.parent().unwrap_or(Path::new(""));
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [test, reference] = fields[..] else {
            return Err(fstk_core::Error::Config {
                path: list.display().to_string(),
                line: i + 1,
                message: format!("expected `test ref`, got {line:?}"),
            }
            .into());
        };
        let test = io::read_image(&base.join(test))?;
        let reference = io::read_image(&base.join(reference))?;
        let mask = evaluation_mask(a, &reference)?;
        let psnr = psnr_masked(&test, &reference, &mask)?;
        let id = rows.len() + 1;
        println!("pair={id} PSNR_dB={}", format_psnr(psnr));
        rows.push((id, psnr));
    }
    let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let avg = average_psnr(&values);
    if avg.skipped_infinite > 0 {
        eprintln!(
            "warning: {} identical pair(s) with infinite PSNR left out of the mean",
            avg.skipped_infinite
        );
    }
    match avg.mean_db {
        Some(mean) => println!("mean_PSNR_dB={}", format_psnr(mean)),
        None => println!("mean_PSNR_dB=inf"),
    }
    if let Some(csv) = &a.csv {
        let mut out = String::from("pair_id,psnr_db\n");
        for (id, psnr) in &rows {
            out += &format!("{id},{}\n", format_psnr(*psnr));
        }
        io::write_atomic(csv, out.as_bytes())?;
    }
    Ok(())
}

fn render(a: RenderArgs) -> CliResult {
    let scene = io::load_scene(&a.scene)?;
    if a.gt_disparity {
        let map = ground_truth_disparity(&scene);
        let meta = DisparityMeta {
            camera: Some(scene.camera),
            extra: vec![("baseline".into(), format!("{:?}", scene.baseline))],
            ..DisparityMeta::default()
        };
        io::write_disparity(&a.out, &map, &meta)?;
    } else {
        let offset = a.offset.unwrap();
        let comments = vec![format!("offset={offset}")];
        io::write_image_with_comments(&a.out, &render_fisheye_view(&scene, offset), &comments)?;
    }
    Ok(())
}

struct ModeResult {
    disparity: DisparityMap,
    view: LumaImage,
    psnr: f64,
}

fn pipeline(a: PipelineArgs) -> CliResult {
    let scene = match &a.scene {
        Some(path) => io::load_scene(path)?,
        None => SceneSpec::default_fixture(),
    };
    let left = render_fisheye_view(&scene, 0.0);
    let right = render_fisheye_view(&scene, scene.baseline);
    let middle = render_fisheye_view(&scene, 0.5 * scene.baseline);
    let (h, w) = right.dims();
    // Only pixels the right view can supply are scored; the rest of the
    // middle view is disoccluded by the frame border.
    let mask = visibility_mask(&scene, 0.5 * scene.baseline, scene.baseline)
        .intersect(&build_fov_mask(&scene.camera, h, w))?;
    let cfg = a.matching.config();
    let syn = SynthesisConfig::new(a.alpha, a.interp.into())?;

    let run_mode = |mode: Mode| -> CliResult<ModeResult> {
        let (disparity, view) = match mode {
            Mode::Fisheye => {
                let d = estimate_disparity_fisheye(&left, &right, &cfg, &scene.camera)?;
                let v = synthesize_fisheye(&right, &d, &syn, &scene.camera)?;
                (d, v)
            }
            Mode::Horizontal => {
                let d = estimate_disparity_horizontal(&left, &right, &cfg)?;
                let v = synthesize_conventional(&right, &d, &syn)?;
                (d, v)
            }
        };
        let psnr = psnr_masked(&view, &middle, &mask)?;
        Ok(ModeResult {
            disparity,
            view,
            psnr,
        })
    };
    let fisheye = run_mode(Mode::Fisheye)?;
    let horizontal = run_mode(Mode::Horizontal)?;

    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| fstk_core::Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        io::write_image(&dir.join("left.pgm"), &left)?;
        io::write_image(&dir.join("right.pgm"), &right)?;
        io::write_image(&dir.join("middle.pgm"), &middle)?;
        for (mode, r) in [(Mode::Fisheye, &fisheye), (Mode::Horizontal, &horizontal)] {
            let meta = DisparityMeta {
                support_width: Some(cfg.support_width),
                search_range: Some(cfg.search_range),
                camera: Some(scene.camera),
                extra: vec![("mode".into(), mode.to_string())],
            };
            io::write_disparity(
                &dir.join(format!("disparity_{mode}.pfm")),
                &r.disparity,
                &meta,
            )?;
            io::write_image_with_comments(
                &dir.join(format!("synth_{mode}.pgm")),
                &r.view,
                &synthesis_comments(mode, &syn),
            )?;
        }
    }

    println!("mode=fisheye PSNR_dB={}", format_psnr(fisheye.psnr));
    println!("mode=horizontal PSNR_dB={}", format_psnr(horizontal.psnr));
    println!("gain_dB={:.4}", fisheye.psnr - horizontal.psnr);
    println!("evaluated_pixels={}", mask.count());
    Ok(())
}
