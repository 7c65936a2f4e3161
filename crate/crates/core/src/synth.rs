//! Synthetic street scenes with known ground-truth alignment.
//!
//! A straight street is lined with rectangular buildings on a gently sloped
//! DEM. A camera walks down the street; its trajectory is mapped into an
//! arbitrary local SLAM frame by the inverse of a random similarity plus a
//! linear vertical drift. Masks are rendered from the ground-truth poses, so
//! the alignment loss is exactly zero at the true parameters.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::alignment::{make_transform, AlignmentParams, WorldTransform};
use crate::citymodel::{build_city_model, build_accel, terrain_elevation, RayAccel, SurfaceLabel, DEFAULT_HEIGHT};
use crate::flood::{EvacuationPoint, EvacuationScenario, FloodSchedule, DEFAULT_DROWN_DEPTH};
use crate::geom::{leveling_rotation, yaw_rotation, Quat, Vec2, Vec3};
use crate::ingest::{
    write_dem, write_endpoints, write_footprints, write_mask, write_slam, CameraTrajectory, DemGrid, Footprint,
    FootprintSet, Keyframe, MapEndpoints, MaskLabel, SegMask, SlamPoint, SlamPointCloud, MASK_PALETTE,
};
use crate::spherical::{render_with_grid, CameraPose, LabelImage, PixelLabel, RayGrid};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthNoise {
    /// Vertical SLAM drift accumulated over the whole walk, meters.
    pub z_drift: f64,
    /// Standard deviation of the Gaussian noise on SLAM points, meters.
    pub point_sigma: f64,
    /// Half-width of the uniform error on the map-annotated endpoints, meters.
    pub endpoint: f64,
}

impl Default for SynthNoise {
    fn default() -> Self {
        SynthNoise {
            z_drift: 0.0,
            point_sigma: 0.0,
            endpoint: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Blocks along the street; each block holds a row of buildings on
    /// both sides and ends at a cross street.
    pub blocks: usize,
    pub street_width: f64,
    /// Nominal building frontage and depth, meters.
    pub building_size: f64,
    pub building_height: f64,
    pub keyframes: usize,
    pub points_per_kf: usize,
    pub noise: SynthNoise,
    pub mask_width: usize,
    pub mask_height: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            blocks: 2,
            street_width: 12.0,
            building_size: 15.0,
            building_height: DEFAULT_HEIGHT,
            keyframes: 24,
            points_per_kf: 40,
            noise: SynthNoise::default(),
            mask_width: 512,
            mask_height: 256,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.blocks == 0 || self.keyframes < 2 {
            return bad("blocks must be at least 1 and keyframes at least 2");
        }
        let positive = [self.street_width, self.building_size, self.building_height];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("street width, building size and height must be positive");
        }
        let n = self.noise;
        if [n.z_drift, n.point_sigma, n.endpoint].iter().any(|v| !v.is_finite()) || n.point_sigma < 0.0 || n.endpoint < 0.0 {
            return bad("noise magnitudes must be finite and non-negative");
        }
        if self.mask_width == 0 || self.mask_width != 2 * self.mask_height {
            return bad("mask size must be positive with a 2:1 aspect");
        }
        Ok(())
    }
}

/// Time limit of [`SynthScene::demo_scenario`], seconds.
pub const DEMO_TIME_LIMIT: f64 = 120.0;

/// Camera height above terrain along the synthetic walk.
pub const CAMERA_HEIGHT: f64 = 1.6;

#[derive(Debug)]
pub struct SynthScene {
    pub config: SynthConfig,
    pub footprints: FootprintSet,
    pub dem: DemGrid,
    pub accel: RayAccel,
    /// Local SLAM trajectory and points, as an external SLAM system would
    /// report them.
    pub trajectory: CameraTrajectory,
    pub cloud: SlamPointCloud,
    pub masks: BTreeMap<u64, SegMask>,
    pub endpoints: MapEndpoints,
    pub truth: AlignmentParams,
    pub truth_transform: WorldTransform,
    /// Ground-truth world camera poses in keyframe order.
    pub world_poses: Vec<CameraPose>,
}

struct Street {
    origin: Vec2,
    along: Vec2,
    across: Vec2,
}

impl Street {
    fn at(&self, a: f64, b: f64) -> Vec2 {
        self.origin + self.along * a + self.across * b
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Rectangular footprints on both sides of the street, returned with the
/// street length.
fn lay_out_buildings(cfg: &SynthConfig, street: &Street, rng: &mut ChaCha8Rng) -> Result<(Vec<Footprint>, f64), Error> {
    let size = cfg.building_size;
    let block_len = 2.5 * size;
    let length = cfg.blocks as f64 * (block_len + cfg.street_width) - cfg.street_width;
    let mut out = Vec::new();
    for side in [1.0, -1.0] {
        for block in 0..cfg.blocks {
            let a_start = block as f64 * (block_len + cfg.street_width);
            let mut a = a_start + uniform(rng, 0.0, 2.0);
            loop {
                let width = uniform(rng, 0.4, 1.0) * size;
                let end = (a + width).min(a_start + block_len);
                if end - a < 0.3 * size {
                    break;
                }
                let near = cfg.street_width / 2.0 + 1.5 + uniform(rng, 0.0, 2.5);
                let far = near + uniform(rng, 0.6, 1.0) * size;
                let corners = [(a, near), (end, near), (end, far), (a, far)];
                let ring: Vec<Vec2> = corners.iter().map(|&(ca, cb)| street.at(ca, side * cb)).collect();
                let id = format!("b{}", out.len());
                out.push(Footprint::new(id, ring, Vec::new())?);
                a = end + uniform(rng, 1.0, 4.0);
            }
        }
    }
    Ok((out, length))
}

fn terrain(street: &Street, length: f64, footprints: &[Footprint], rng: &mut ChaCha8Rng) -> Result<DemGrid, Error> {
    let spacing = 5.0;
    let margin = 20.0;
    let mut lo = street.at(0.0, 0.0);
    let mut hi = lo;
    for p in footprints.iter().flat_map(|f| f.exterior.iter()).chain([street.at(length, 0.0)].iter()) {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let origin = ((lo - Vec2::repeat(margin)) / spacing).map(f64::floor) * spacing;
    let ncols = ((hi.x + margin - origin.x) / spacing).ceil() as usize + 1;
    let nrows = ((hi.y + margin - origin.y) / spacing).ceil() as usize + 1;
    let base = uniform(rng, 5.0, 60.0);
    let slope = Vec2::new(uniform(rng, -0.02, 0.02), uniform(rng, -0.02, 0.02));
    let bump = uniform(rng, 0.0, 0.6);
    let (o, phase) = (street.origin, uniform(rng, 0.0, TAU));
    let dem = DemGrid::from_fn(origin, spacing, ncols, nrows, |x, y| {
        let d = Vec2::new(x - o.x, y - o.y);
        base + slope.dot(&d) + bump * (d.x / 37.0 + phase).sin() * (d.y / 53.0).cos()
    })?;
    Ok(dem)
}

fn to_mask(render: &LabelImage) -> SegMask {
    let labels = render
        .labels()
        .iter()
        .map(|l| match l {
            PixelLabel::Sky => MaskLabel::Other,
            PixelLabel::Ground => MaskLabel::Ground,
            PixelLabel::Building => MaskLabel::Building,
        })
        .collect();
    SegMask::new(render.width(), render.height(), labels).expect("render dimensions are valid")
}

/// Generate a scene. Deterministic per `cfg.seed`.
pub fn gen_scene(cfg: &SynthConfig) -> Result<SynthScene, Error> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let bearing = uniform(&mut rng, -PI, PI);
    let along = Vec2::new(bearing.cos(), bearing.sin());
    let street = Street {
        origin: Vec2::new(uniform(&mut rng, 20_000.0, 21_000.0), uniform(&mut rng, 30_000.0, 31_000.0)),
        along,
        across: Vec2::new(-along.y, along.x),
    };
    let (footprints, length) = lay_out_buildings(cfg, &street, &mut rng)?;
    let dem = terrain(&street, length, &footprints, &mut rng)?;
    let footprints = FootprintSet { footprints };
    let model = build_city_model(&footprints, &dem, cfg.building_height);
    if let Some(s) = model.skipped.first() {
        return Err(Error::Config(format!("synth footprint {} failed: {}", s.id, s.reason)));
    }
    let accel = build_accel(model.mesh)?;

    // World walk down the street center with a slight lateral sway.
    let n = cfg.keyframes;
    let (a0, a1) = (3.0, length - 3.0);
    let sway = uniform(&mut rng, 0.0, 0.4);
    let mut world = Vec::with_capacity(n);
    let mut headings = Vec::with_capacity(n);
    for i in 0..n {
        let a = a0 + (a1 - a0) * i as f64 / (n - 1) as f64;
        let xy = street.at(a, sway * (a / 9.0).sin());
        let z = terrain_elevation(&dem, xy.x, xy.y)? + CAMERA_HEIGHT;
        world.push(Vec3::new(xy.x, xy.y, z));
        headings.push(bearing + uniform(&mut rng, -0.05, 0.05));
    }
    let mut horiz = vec![0.0; n];
    for i in 1..n {
        horiz[i] = horiz[i - 1] + (world[i].xy() - world[i - 1].xy()).norm();
    }
    let u: Vec<f64> = horiz.iter().map(|h| h / horiz[n - 1]).collect();

    // Hidden similarity between world and local frames.
    let scale = (uniform(&mut rng, 0.3f64.ln(), 3.0f64.ln())).exp();
    let yaw = uniform(&mut rng, -PI, PI);
    let tilt = uniform(&mut rng, 0.0, FRAC_PI_2);
    let azimuth = uniform(&mut rng, -PI, PI);
    let gravity = Vec3::new(tilt.sin() * azimuth.cos(), tilt.sin() * azimuth.sin(), tilt.cos());
    let offset = Vec3::new(
        uniform(&mut rng, -20.0, 20.0),
        uniform(&mut rng, -20.0, 20.0),
        uniform(&mut rng, -20.0, 20.0),
    );
    let to_local = leveling_rotation(&gravity).inverse() * yaw_rotation(-yaw);
    let keyframes: Vec<Keyframe> = (0..n)
        .map(|i| {
            let mut w = world[i] - world[0];
            w.z -= cfg.noise.z_drift * u[i];
            Keyframe {
                id: i as u64,
                position: to_local * (w / scale + offset),
                orientation: to_local * yaw_rotation(headings[i]),
                video_time: 0.5 * i as f64,
            }
        })
        .collect();
    let trajectory = CameraTrajectory::new(keyframes, gravity)?;

    let truth = AlignmentParams::new(world[0], world[n - 1], 0.0);
    let truth_transform = make_transform(&truth, &trajectory)?;
    let world_poses: Vec<CameraPose> = trajectory
        .ids()
        .map(|id| crate::spherical::world_pose(&trajectory, &truth_transform, id))
        .collect::<Result<_, _>>()?;

    let grid = RayGrid::new(cfg.mask_width, cfg.mask_height)?;
    let masks: BTreeMap<u64, SegMask> = trajectory
        .ids()
        .zip(&world_poses)
        .map(|(id, pose)| (id, to_mask(&render_with_grid(&accel, pose, &grid))))
        .collect();

    let cloud = sample_points(cfg, &trajectory, &truth_transform, &world_poses, &accel, &mut rng)?;

    let e = cfg.noise.endpoint;
    let mut jitter = |p: Vec3| p.xy() + Vec2::new(uniform(&mut rng, -e, e), uniform(&mut rng, -e, e));
    let endpoints = MapEndpoints::new(jitter(truth.v_s), jitter(truth.v_e))?;

    Ok(SynthScene {
        config: cfg.clone(),
        footprints,
        dem,
        accel,
        trajectory,
        cloud,
        masks,
        endpoints,
        truth,
        truth_transform,
        world_poses,
    })
}

/// Wall points visible from each keyframe, expressed in the local frame.
fn sample_points(
    cfg: &SynthConfig,
    traj: &CameraTrajectory,
    tf: &WorldTransform,
    poses: &[CameraPose],
    accel: &RayAccel,
    rng: &mut ChaCha8Rng,
) -> Result<SlamPointCloud, Error> {
    let noise = Normal::new(0.0, cfg.noise.point_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut points = Vec::new();
    for (index, (kf, pose)) in traj.keyframes().iter().zip(poses).enumerate() {
        let u = tf.arc_fraction(index);
        let mut kept = 0;
        for _ in 0..cfg.points_per_kf * 20 {
            if kept == cfg.points_per_kf {
                break;
            }
            let az = uniform(rng, -PI, PI);
            let el = uniform(rng, -0.15, 0.7);
            let d = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            let Some(hit) = accel.raycast(&pose.position, &d)? else {
                continue;
            };
            if hit.label != SurfaceLabel::Building {
                continue;
            }
            let exact = pose.position + d * hit.t;
            // Skip hits whose round trip through the local frame lands on a
            // different surface (silhouette edges).
            let local = tf.invert(&exact, u);
            let back = tf.apply(&local, u);
            let c = tf.apply(&kf.position, u);
            match crate::alignment::point_residual(accel, &c, &back, f64::INFINITY) {
                Some(r) if r < 1e-7 => {}
                _ => continue,
            }
            let world = if cfg.noise.point_sigma > 0.0 {
                exact + Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng))
            } else {
                exact
            };
            points.push(SlamPoint {
                position: if cfg.noise.point_sigma > 0.0 { tf.invert(&world, u) } else { local },
                keyframe_id: kf.id,
            });
            kept += 1;
        }
    }
    Ok(SlamPointCloud { points })
}

/// Add uniform noise in `[-pos, pos]` to each coordinate of both endpoints
/// and in `[-yaw, yaw]` to the residual yaw.
pub fn perturb(params: &AlignmentParams, pos: f64, yaw: f64, seed: u64) -> AlignmentParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = params.to_array();
    for v in a.iter_mut().take(6) {
        *v += pos * uniform(&mut rng, -1.0, 1.0);
    }
    a[6] += yaw * uniform(&mut rng, -1.0, 1.0);
    AlignmentParams::from_array(&a)
}

#[derive(Serialize)]
struct TruthDoc<'a> {
    seed: u64,
    v_s: [f64; 3],
    v_e: [f64; 3],
    lambda: f64,
    world_trajectory: Vec<PoseDoc>,
    config: &'a SynthConfig,
}

#[derive(Serialize)]
struct PoseDoc {
    id: u64,
    position: [f64; 3],
    orientation: [f64; 4],
}

/// Color image of a rendered view, used as a stand-in video frame.
pub fn frame_image(render: &LabelImage) -> image::RgbImage {
    image::RgbImage::from_fn(render.width() as u32, render.height() as u32, |u, v| {
        let (u, v) = (u as usize, v as usize);
        let base = MASK_PALETTE[crate::spherical::debug_index(render.get(u, v)) as usize];
        // Darken with distance so walls and streets show some texture.
        let d = render.depth_at(u, v);
        let shade = if d.is_finite() { 1.0 - 0.5 * (d / 120.0).min(1.0) } else { 1.0 };
        image::Rgb(base.map(|c| (c as f64 * shade).round() as u8))
    })
}

impl SynthScene {
    /// Demo scenario: reach the end of the street within two minutes. The
    /// water stays below every cell until the limit, then steps to 2 m above
    /// the highest one.
    pub fn demo_scenario(&self) -> EvacuationScenario {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..self.dem.nrows() {
            for i in 0..self.dem.ncols() {
                if let Some(z) = self.dem.get(i, j) {
                    lo = lo.min(z);
                    hi = hi.max(z);
                }
            }
        }
        let goal = EvacuationPoint {
            name: "street end".into(),
            position: self.truth.v_e.xy(),
            radius: 8.0,
        };
        let schedule = FloodSchedule::step(DEMO_TIME_LIMIT, lo - 1.0, hi + 2.0).expect("finite step");
        EvacuationScenario::new(vec![goal], DEMO_TIME_LIMIT, schedule, DEFAULT_DROWN_DEPTH).expect("valid demo")
    }

    /// Write a complete input set for the CLI:
    /// `footprints.geojson`, `dem.asc`, `slam.json`, `endpoints.json`,
    /// `masks/mask_<id>.png`, `frames/frame_<id>.jpg`, `truth.json` and
    /// `scenario.json`.
    pub fn write(&self, dir: &Path) -> Result<(), Error> {
        let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        mkdir(dir)?;
        mkdir(&dir.join("masks"))?;
        mkdir(&dir.join("frames"))?;
        write_footprints(&dir.join("footprints.geojson"), &self.footprints)?;
        write_dem(&dir.join("dem.asc"), &self.dem)?;
        write_slam(&dir.join("slam.json"), &self.trajectory, &self.cloud)?;
        write_endpoints(&dir.join("endpoints.json"), &self.endpoints)?;
        for (id, mask) in &self.masks {
            write_mask(&dir.join("masks").join(format!("mask_{id}.png")), mask)?;
        }
        let grid = RayGrid::new(self.config.mask_width, self.config.mask_height)?;
        for (kf, pose) in self.trajectory.keyframes().iter().zip(&self.world_poses) {
            let path = dir.join("frames").join(format!("frame_{}.jpg", kf.id));
            let img = frame_image(&render_with_grid(&self.accel, pose, &grid));
            write_jpeg(&path, &img)?;
        }
        let doc = TruthDoc {
            seed: self.config.seed,
            v_s: self.truth.v_s.into(),
            v_e: self.truth.v_e.into(),
            lambda: self.truth.lambda,
            world_trajectory: self
                .trajectory
                .ids()
                .zip(&self.world_poses)
                .map(|(id, p)| PoseDoc {
                    id,
                    position: p.position.into(),
                    orientation: quat_wxyz(&p.orientation),
                })
                .collect(),
            config: &self.config,
        };
        crate::json::write_file(&dir.join("truth.json"), &doc)?;
        crate::flood::write_scenario(&dir.join("scenario.json"), &self.demo_scenario())
    }
}

pub(crate) fn quat_wxyz(q: &Quat) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

pub(crate) fn write_jpeg(path: &Path, img: &image::RgbImage) -> Result<(), Error> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut w, 90)
        .encode_image(img)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            blocks: 1,
            keyframes: 6,
            points_per_kf: 10,
            mask_width: 128,
            mask_height: 64,
            seed: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn truth_transform_reproduces_world_walk() {
        let scene = gen_scene(&small()).unwrap();
        for (i, kf) in scene.trajectory.keyframes().iter().enumerate() {
            let w = scene.truth_transform.apply(&kf.position, scene.truth_transform.arc_fraction(i));
            assert!((w - scene.world_poses[i].position).norm() < 1e-9);
            let z = terrain_elevation(&scene.dem, w.x, w.y).unwrap() + CAMERA_HEIGHT;
            assert!((w.z - z).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let a = gen_scene(&small()).unwrap();
        let b = gen_scene(&small()).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.masks, b.masks);
        let c = gen_scene(&SynthConfig { seed: 4, ..small() }).unwrap();
        assert_ne!(a.trajectory, c.trajectory);
    }

    #[test]
    fn drift_shows_up_in_local_end_height() {
        let cfg = SynthConfig {
            noise: SynthNoise {
                z_drift: 0.5,
                ..SynthNoise::default()
            },
            ..small()
        };
        let drifted = gen_scene(&cfg).unwrap();
        let clean = gen_scene(&small()).unwrap();
        let tf = &clean.truth_transform;
        let level = |s: &SynthScene, i: usize| {
            let p = s.trajectory.keyframes()[i].position;
            tf.rotation() * p * tf.scale
        };
        let n = clean.trajectory.len() - 1;
        let gap_end = (level(&clean, n) - level(&clean, 0)).z - (level(&drifted, n) - level(&drifted, 0)).z;
        assert!((gap_end - 0.5).abs() < 1e-9);
        assert!((drifted.truth_transform.z1 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn perturb_bounds_and_determinism() {
        let p = AlignmentParams::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(9.0, 8.0, 7.0), 0.0);
        assert_eq!(perturb(&p, 0.0, 0.0, 5), p);
        let q = perturb(&p, 5.0, 0.2, 5);
        assert_eq!(q, perturb(&p, 5.0, 0.2, 5));
        for (a, b) in p.to_array()[..6].iter().zip(&q.to_array()[..6]) {
            assert!((a - b).abs() <= 5.0);
        }
        assert!(q.lambda.abs() <= 0.2);
    }
}
