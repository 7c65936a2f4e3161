use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::manifest::{load_alignment_result, AlignmentResult};
use super::{export_scene, load_config, write_glb, RunConfig, WorldKeyframe};
use crate::alignment::{align_levels, make_transform, AlignConfig, AlignmentParams};
use crate::citymodel::{build_accel, build_city_model, ExtrudeOutput, RayAccel};
use crate::flood::{load_scenario, scenario_step};
use crate::geom::Vec2;
use crate::ingest::{
    load_dem, load_endpoints, load_footprints, load_masks, load_slam, write_indexed_png, CameraTrajectory, DemGrid,
    FootprintOptions, FootprintSet, MaskLabel, MASK_PALETTE,
};
use crate::spherical::{debug_index, render_with_grid, world_pose, PixelLabel, RayGrid};
use crate::synth::gen_scene;
use crate::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(name = "floodwalk", version, about = "City models from footprints, aligned to 360-degree walkthrough video")]
struct Cli {
    /// JSON file overriding any tunable (height, align, synth sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extrude footprints over the DEM and write the mesh as GLB.
    BuildModel(BuildModelArgs),
    /// Align a SLAM trajectory to the city model.
    Align(AlignArgs),
    /// Render the sampled frames under an alignment, overlaid with their masks.
    RenderDebug(RenderDebugArgs),
    /// Write the viewer scene bundle.
    Export(ExportArgs),
    /// Generate a synthetic input set with ground truth.
    Synth(SynthArgs),
    /// Print the scenario status of an avatar position at a time.
    ScenarioCheck(ScenarioCheckArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    footprints: PathBuf,
    #[arg(long)]
    dem: PathBuf,
    /// Building height in meters.
    #[arg(long)]
    height: Option<f64>,
    /// Accept footprints whose coordinates look like degrees.
    #[arg(long)]
    allow_geographic: bool,
}

#[derive(Args, Debug)]
struct BuildModelArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Output GLB; the building sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    slam: PathBuf,
    #[arg(long)]
    masks: PathBuf,
    #[arg(long)]
    endpoints: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of keyframes rendered per evaluation.
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args, Debug)]
struct RenderDebugArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    slam: PathBuf,
    #[arg(long)]
    masks: PathBuf,
    /// Alignment result JSON written by `align`.
    #[arg(long)]
    alignment: PathBuf,
    /// Output directory for `overlay_<id>.png` and `render_<id>.png`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    slam: PathBuf,
    #[arg(long)]
    alignment: PathBuf,
    /// Directory holding `frame_<id>.jpg` for every keyframe.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    keyframes: Option<usize>,
}

#[derive(Args, Debug)]
struct ScenarioCheckArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    dem: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long)]
    t: f64,
}

/// Run the CLI on `args` (program name first) and return the exit code:
/// 0 on success, 1 on invalid input or usage, 2 on runtime failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Runtime => 2,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    let cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::BuildModel(a) => build_model(&cfg, &a),
        Command::Align(a) => run_align(&cfg, &a),
        Command::RenderDebug(a) => render_debug(&cfg, &a),
        Command::Export(a) => export(&cfg, &a),
        Command::Synth(a) => synth(&cfg, &a),
        Command::ScenarioCheck(a) => scenario_check(&a),
    }
}

struct Model {
    dem: DemGrid,
    output: ExtrudeOutput,
}

fn load_model(cfg: &RunConfig, a: &ModelArgs) -> Result<Model, Error> {
    let height = a.height.unwrap_or(cfg.height);
    if !(height > 0.0 && height.is_finite()) {
        return Err(Error::Config(format!("height {height} must be positive")));
    }
    let opts = FootprintOptions {
        allow_geographic: a.allow_geographic,
    };
    let footprints: FootprintSet = load_footprints(&a.footprints, opts)?;
    let dem = load_dem(&a.dem)?;
    let output = build_city_model(&footprints, &dem, height);
    log::info!(
        "extruded {} of {} footprints at {height} m ({} triangles)",
        footprints.footprints.len() - output.skipped.len(),
        footprints.footprints.len(),
        output.mesh.triangle_count()
    );
    Ok(Model { dem, output })
}

fn sidecar_path(glb: &Path) -> PathBuf {
    glb.with_extension("buildings.json")
}

fn ensure_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn build_model(cfg: &RunConfig, a: &BuildModelArgs) -> Result<(), Error> {
    let model = load_model(cfg, &a.model)?;
    ensure_parent(&a.out)?;
    let sidecar = write_glb(&a.out, &model.output.mesh)?;
    crate::json::write_file(&sidecar_path(&a.out), &sidecar)
}

fn align_config(cfg: &RunConfig, seed: Option<u64>, frames: Option<usize>) -> AlignConfig {
    let mut c = cfg.align.clone();
    if let Some(s) = seed {
        c.seed = s;
    }
    if let Some(f) = frames {
        c.frames = f;
    }
    c
}

fn run_align(cfg: &RunConfig, a: &AlignArgs) -> Result<(), Error> {
    let acfg = align_config(cfg, a.seed, a.frames);
    acfg.validate()?;
    let model = load_model(cfg, &a.model)?;
    let (traj, cloud) = load_slam(&a.slam)?;
    let endpoints = load_endpoints(&a.endpoints)?;
    let sampled = crate::alignment::sample_frames(&traj, acfg.frames);
    let masks = load_masks(&a.masks, &sampled)?;
    let accel = build_accel(model.output.mesh)?;
    let init = AlignmentParams::from_endpoints(&endpoints, &model.dem, acfg.camera_height)?;
    let outcome = align_levels(&traj, &cloud, &masks, &accel, &init, &acfg)?;
    ensure_parent(&a.out)?;
    crate::json::write_file(&a.out, &AlignmentResult::from_outcome(&outcome))
}

fn load_aligned(
    cfg: &RunConfig,
    model: &ModelArgs,
    slam: &Path,
    alignment: &Path,
) -> Result<(RayAccel, CameraTrajectory, AlignmentResult), Error> {
    let model = load_model(cfg, model)?;
    let (traj, _) = load_slam(slam)?;
    let result = load_alignment_result(alignment)?;
    Ok((build_accel(model.output.mesh)?, traj, result))
}

fn render_debug(cfg: &RunConfig, a: &RenderDebugArgs) -> Result<(), Error> {
    let acfg = &cfg.align;
    acfg.validate()?;
    let (accel, traj, result) = load_aligned(cfg, &a.model, &a.slam, &a.alignment)?;
    let tf = make_transform(&result.params(), &traj)?;
    let ids = crate::alignment::sample_frames(&traj, acfg.frames);
    let masks = load_masks(&a.masks, &ids)?;
    let grid = RayGrid::new(acfg.render_width, acfg.render_height)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for id in ids {
        let render = render_with_grid(&accel, &world_pose(&traj, &tf, id)?, &grid);
        let mask = masks[&id].resample(grid.width(), grid.height())?;
        let indices: Vec<u8> = render.labels().iter().map(|&l| debug_index(l)).collect();
        write_indexed_png(
            &a.out.join(format!("render_{id}.png")),
            grid.width(),
            grid.height(),
            &indices,
            &MASK_PALETTE,
        )?;
        // Blend render and mask colors; counted pixels that disagree on
        // Ground are painted yellow.
        let mut rgb = Vec::with_capacity(indices.len() * 3);
        for (&r, &m) in render.labels().iter().zip(mask.labels()) {
            let mismatch = m != MaskLabel::Other && (m == MaskLabel::Ground) != (r == PixelLabel::Ground);
            if mismatch {
                rgb.extend_from_slice(&[255, 220, 0]);
            } else {
                let rc = MASK_PALETTE[debug_index(r) as usize];
                let mc = MASK_PALETTE[m as usize];
                rgb.extend((0..3).map(|k| ((rc[k] as u16 + mc[k] as u16) / 2) as u8));
            }
        }
        write_rgb_png(&a.out.join(format!("overlay_{id}.png")), grid.width(), grid.height(), &rgb)?;
    }
    Ok(())
}

fn write_rgb_png(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<(), Error> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(rgb).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

fn export(cfg: &RunConfig, a: &ExportArgs) -> Result<(), Error> {
    let (accel, traj, result) = load_aligned(cfg, &a.model, &a.slam, &a.alignment)?;
    let tf = make_transform(&result.params(), &traj)?;
    let world: Vec<WorldKeyframe> = traj
        .keyframes()
        .iter()
        .map(|k| {
            let pose = world_pose(&traj, &tf, k.id)?;
            Ok(WorldKeyframe {
                id: k.id,
                video_time: k.video_time,
                position: pose.position,
                orientation: pose.orientation,
            })
        })
        .collect::<Result<_, Error>>()?;
    let scenario = a.scenario.as_deref().map(load_scenario).transpose()?;
    export_scene(
        &a.out,
        accel.mesh(),
        &world,
        &a.frames,
        scenario.as_ref(),
        Some(&result.provenance()),
    )?;
    Ok(())
}

fn synth(cfg: &RunConfig, a: &SynthArgs) -> Result<(), Error> {
    let mut scfg = cfg.synth.clone();
    if let Some(s) = a.seed {
        scfg.seed = s;
    }
    if let Some(b) = a.blocks {
        scfg.blocks = b;
    }
    if let Some(k) = a.keyframes {
        scfg.keyframes = k;
    }
    let scene = gen_scene(&scfg)?;
    scene.write(&a.out)
}

fn scenario_check(a: &ScenarioCheckArgs) -> Result<(), Error> {
    let scenario = load_scenario(&a.scenario)?;
    let dem = load_dem(&a.dem)?;
    let status = scenario_step(&scenario, &dem, Vec2::new(a.x, a.y), a.t)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", crate::json::to_string(&status)).map_err(|e| Error::io("<stdout>", e))
}
