use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{is_ground, point_tally, GroundTally, LossWeights, PointTally};
use super::{filter_building_points, make_transform, sample_frames, AlignError, AlignmentParams, WorldTransform};
use crate::citymodel::RayAccel;
use crate::cmaes::{CmaConfig, CmaState, Termination, MAX_RESAMPLES};
use crate::ingest::{CameraTrajectory, MaskLabel, SegMask, SlamPointCloud};
use crate::spherical::RayGrid;

/// A preliminary search at reduced render resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignLevel {
    pub render_width: usize,
    pub render_height: usize,
    pub population: Option<usize>,
    pub sigma0: f64,
    pub tol_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    /// Number of keyframes rendered per loss evaluation.
    pub frames: usize,
    pub render_width: usize,
    pub render_height: usize,
    /// Camera height above terrain for the initial guess, meters.
    pub camera_height: f64,
    pub weights: LossWeights,
    /// Initial step size in normalized units.
    pub sigma0: f64,
    /// Meters per normalized unit for the six position parameters.
    pub position_scale: f64,
    /// Radians per normalized unit for the yaw parameter.
    pub yaw_scale: f64,
    pub max_evaluations: usize,
    pub population: Option<usize>,
    pub target_loss: Option<f64>,
    /// Stop once the search spread falls below this many normalized units.
    pub tol_sigma: f64,
    pub seed: u64,
    /// Searches run in order before the final one; each starts from the
    /// previous result. The fields above describe the final search.
    pub coarse: Vec<AlignLevel>,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            frames: 8,
            render_width: 512,
            render_height: 256,
            camera_height: 1.6,
            weights: LossWeights::default(),
            sigma0: 0.05,
            position_scale: 5.0,
            yaw_scale: 0.1,
            max_evaluations: 20000,
            population: None,
            target_loss: None,
            tol_sigma: 2e-2,
            seed: 0,
            coarse: vec![AlignLevel {
                render_width: 128,
                render_height: 64,
                population: Some(24),
                sigma0: 1.0,
                tol_sigma: 1e-2,
            }],
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        self.weights.validate()?;
        let bad = |m: &str| Err(AlignError::Config(m.to_string()));
        if self.frames == 0 {
            return bad("frames must be positive");
        }
        if self.render_width == 0 || self.render_width != 2 * self.render_height {
            return bad("render size must be positive with a 2:1 aspect");
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad("sigma0 must be positive");
        }
        if !(self.position_scale > 0.0 && self.yaw_scale > 0.0) {
            return bad("parameter scales must be positive");
        }
        if !(self.tol_sigma >= 0.0) || !self.camera_height.is_finite() {
            return bad("tol_sigma must be non-negative and camera_height finite");
        }
        if self.population.is_some_and(|p| p < 2) {
            return bad("population must be at least 2");
        }
        if self.coarse.is_empty() {
            return Ok(());
        }
        self.levels().iter().try_for_each(AlignConfig::validate)
    }

    /// One single-level config per search, the final one last.
    pub fn levels(&self) -> Vec<AlignConfig> {
        let mut out: Vec<AlignConfig> = self
            .coarse
            .iter()
            .enumerate()
            .map(|(i, l)| AlignConfig {
                render_width: l.render_width,
                render_height: l.render_height,
                population: l.population,
                sigma0: l.sigma0,
                tol_sigma: l.tol_sigma,
                seed: self.seed.wrapping_add(i as u64),
                coarse: Vec::new(),
                ..self.clone()
            })
            .collect();
        out.push(AlignConfig {
            seed: self.seed.wrapping_add(self.coarse.len() as u64),
            coarse: Vec::new(),
            ..self.clone()
        });
        out
    }

    fn scales(&self) -> [f64; 7] {
        let p = self.position_scale;
        [p, p, p, p, p, p, self.yaw_scale]
    }

    /// Parameters at normalized offset `x` from `init`.
    pub fn denormalize(&self, init: &AlignmentParams, x: &[f64]) -> AlignmentParams {
        let base = init.to_array();
        let scales = self.scales();
        let a: Vec<f64> = (0..7).map(|i| base[i] + x[i] * scales[i]).collect();
        AlignmentParams::from_array(&a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub ground: f64,
    /// Mean point residual, meters (before normalization).
    pub point: f64,
    pub total: f64,
    pub ground_tally: GroundTally,
    pub point_tally: PointTally,
}

#[derive(Debug)]
struct FrameData {
    index: usize,
    /// Linear pixel index with the mask's Ground flag in the top bit.
    pixels: Vec<u32>,
}

const GROUND_BIT: u32 = 1 << 31;

/// Everything fixed across loss evaluations: the sampled frames with their
/// masks at render resolution, the filtered point cloud and the ray grid.
#[derive(Debug)]
pub struct AlignmentProblem<'a> {
    traj: &'a CameraTrajectory,
    accel: &'a RayAccel,
    weights: LossWeights,
    grid: RayGrid,
    frame_ids: Vec<u64>,
    frames: Vec<FrameData>,
    points: SlamPointCloud,
}

impl<'a> AlignmentProblem<'a> {
    /// `masks` must cover every sampled keyframe; it may hold more.
    pub fn new(
        traj: &'a CameraTrajectory,
        cloud: &SlamPointCloud,
        masks: &BTreeMap<u64, SegMask>,
        accel: &'a RayAccel,
        cfg: &AlignConfig,
    ) -> Result<Self, crate::Error> {
        cfg.validate()?;
        let frame_ids = sample_frames(traj, cfg.frames);
        let grid = RayGrid::new(cfg.render_width, cfg.render_height)?;
        let mut frames = Vec::with_capacity(frame_ids.len());
        let mut used = BTreeMap::new();
        for &id in &frame_ids {
            let mask = masks.get(&id).ok_or(AlignError::MissingMask(id))?;
            used.insert(id, mask.clone());
            let m = mask.resample(cfg.render_width, cfg.render_height)?;
            let pixels = m
                .labels()
                .iter()
                .enumerate()
                .filter(|(_, &l)| l != MaskLabel::Other)
                .map(|(i, &l)| i as u32 | if l == MaskLabel::Ground { GROUND_BIT } else { 0 })
                .collect();
            frames.push(FrameData {
                index: traj.index_of(id).expect("sampled id exists"),
                pixels,
            });
        }
        let points = filter_building_points(cloud, traj, &used);
        log::info!(
            "alignment uses {} frames and {} of {} points",
            frame_ids.len(),
            points.len(),
            cloud.len()
        );
        Ok(AlignmentProblem {
            traj,
            accel,
            weights: cfg.weights,
            grid,
            frame_ids,
            frames,
            points,
        })
    }

    pub fn frame_ids(&self) -> &[u64] {
        &self.frame_ids
    }

    pub fn points(&self) -> &SlamPointCloud {
        &self.points
    }

    pub fn trajectory(&self) -> &CameraTrajectory {
        self.traj
    }

    fn frame_tally(&self, frame: &FrameData, tf: &WorldTransform) -> GroundTally {
        let kf = &self.traj.keyframes()[frame.index];
        let origin = tf.apply(&kf.position, tf.arc_fraction(frame.index));
        let rot = (tf.rotation() * kf.orientation).to_rotation_matrix();
        let mut mismatched = 0;
        for &p in &frame.pixels {
            let d = rot * self.grid.dir((p & !GROUND_BIT) as usize);
            let rendered = is_ground(self.accel, self.accel.nearest(&origin, &d, f64::INFINITY));
            if rendered != (p & GROUND_BIT != 0) {
                mismatched += 1;
            }
        }
        GroundTally {
            mismatched,
            counted: frame.pixels.len(),
        }
    }

    pub fn evaluate_transform(&self, tf: &WorldTransform) -> LossReport {
        let ground_tally = self
            .frames
            .par_iter()
            .map(|f| self.frame_tally(f, tf))
            .reduce(GroundTally::default, |mut a, b| {
                a.add(b);
                a
            });
        // Chunk results are summed in order so the total is reproducible.
        let chunks: Vec<PointTally> = self
            .points
            .points
            .par_chunks(256)
            .map(|chunk| point_tally(chunk, self.traj, tf, self.accel, self.weights.d_max))
            .collect();
        let mut point_tally = PointTally::default();
        chunks.into_iter().for_each(|c| point_tally.add(c));
        let ground = ground_tally.fraction();
        let point = point_tally.mean();
        LossReport {
            ground,
            point,
            total: self.weights.combine(ground, point),
            ground_tally,
            point_tally,
        }
    }

    pub fn evaluate(&self, params: &AlignmentParams) -> Result<LossReport, AlignError> {
        params.validate()?;
        let tf = make_transform(params, self.traj)?;
        Ok(self.evaluate_transform(&tf))
    }
}

#[derive(Debug, Clone)]
pub struct AlignmentOutcome {
    pub params: AlignmentParams,
    pub loss: LossReport,
    pub initial_loss: LossReport,
    /// Best total loss after the initial evaluation and after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub generations: usize,
    pub termination: Termination,
}

/// Run every level of `cfg` in order, each from the previous best. The
/// evaluation budget is shared. `history` concatenates the levels, so its
/// entries are only comparable within a level; `loss` and `initial_loss` are
/// measured at the final resolution.
pub fn align_levels(
    traj: &CameraTrajectory,
    cloud: &SlamPointCloud,
    masks: &BTreeMap<u64, SegMask>,
    accel: &RayAccel,
    init: &AlignmentParams,
    cfg: &AlignConfig,
) -> Result<AlignmentOutcome, crate::Error> {
    cfg.validate()?;
    let levels = cfg.levels();
    let last = levels.len() - 1;
    let final_problem = AlignmentProblem::new(traj, cloud, masks, accel, &levels[last])?;
    let initial_loss = final_problem.evaluate(init)?;
    let mut evaluations = 1;
    let mut generations = 0;
    let mut history = Vec::new();
    let mut current = *init;
    for (i, level) in levels.iter().enumerate() {
        let mut level = level.clone();
        level.max_evaluations = cfg.max_evaluations.saturating_sub(evaluations);
        if level.max_evaluations == 0 {
            break;
        }
        let coarse_problem;
        let problem = if i == last {
            &final_problem
        } else {
            coarse_problem = AlignmentProblem::new(traj, cloud, masks, accel, &level)?;
            &coarse_problem
        };
        let out = align(problem, &current, &level)?;
        log::info!(
            "level {i} at {}x{}: {} evaluations, loss {:.6}",
            level.render_width,
            level.render_height,
            out.evaluations,
            out.loss.total
        );
        evaluations += out.evaluations;
        generations += out.generations;
        history.extend(out.history);
        current = out.params;
        if i == last {
            return Ok(AlignmentOutcome {
                params: out.params,
                loss: out.loss,
                initial_loss,
                history,
                evaluations,
                generations,
                termination: out.termination,
            });
        }
    }
    // Budget ran out before the final level.
    let loss = final_problem.evaluate(&current)?;
    Ok(AlignmentOutcome {
        params: current,
        loss,
        initial_loss,
        history,
        evaluations: evaluations + 1,
        generations,
        termination: Termination::MaxEvaluations,
    })
}

/// Minimize the total loss with CMA-ES starting at `init`, at the problem's
/// resolution only. The returned parameters are the best ever evaluated,
/// `init` included.
pub fn align(problem: &AlignmentProblem, init: &AlignmentParams, cfg: &AlignConfig) -> Result<AlignmentOutcome, AlignError> {
    cfg.validate()?;
    let initial_loss = problem.evaluate(init)?;
    if !initial_loss.total.is_finite() {
        return Err(AlignError::Divergence(format!("initial loss is {}", initial_loss.total)));
    }
    let mut best = (*init, initial_loss);
    let mut history = vec![initial_loss.total];

    let cma = CmaConfig {
        x0: vec![0.0; 7],
        sigma0: cfg.sigma0,
        population: cfg.population,
        max_evaluations: cfg.max_evaluations.saturating_sub(1),
        target: cfg.target_loss.unwrap_or(f64::NEG_INFINITY),
        tol_sigma: cfg.tol_sigma,
        seed: cfg.seed,
    };
    let mut state = CmaState::new(&cma)?;
    let mut evaluations = 1;
    let eval = |x: &DVector<f64>| -> Result<Option<LossReport>, AlignError> {
        let params = cfg.denormalize(init, x.as_slice());
        match problem.evaluate(&params) {
            Ok(r) if r.total.is_finite() => Ok(Some(r)),
            Ok(r) => Err(AlignError::Divergence(format!("loss {} at {:?}", r.total, params.to_array()))),
            Err(AlignError::InvalidParams(_) | AlignError::ZeroChord(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let termination = loop {
        if best.1.total <= cma.target {
            break Termination::TargetReached;
        }
        if let Some(reason) = state.should_stop(&cma) {
            break reason;
        }
        let mut candidates = state.ask();
        let mut reports = candidates.par_iter().map(eval).collect::<Result<Vec<_>, _>>()?;
        evaluations += candidates.len();
        for i in 0..candidates.len() {
            let mut tries = 0;
            while reports[i].is_none() && tries < MAX_RESAMPLES {
                candidates[i] = state.resample(i)?;
                reports[i] = eval(&candidates[i])?;
                evaluations += 1;
                tries += 1;
            }
        }
        let fitness: Vec<f64> = reports.iter().map(|r| r.map_or(f64::INFINITY, |r| r.total)).collect();
        for (x, r) in candidates.iter().zip(&reports) {
            if let Some(r) = r {
                if r.total < best.1.total {
                    best = (cfg.denormalize(init, x.as_slice()), *r);
                }
            }
        }
        state.tell(&candidates, &fitness)?;
        history.push(best.1.total);
        log::debug!(
            "generation {} best {:.6} sigma {:.3e}",
            state.generation(),
            best.1.total,
            state.sigma()
        );
    };
    log::info!(
        "alignment stopped ({termination:?}) after {evaluations} evaluations: loss {:.6} -> {:.6}",
        initial_loss.total,
        best.1.total
    );
    Ok(AlignmentOutcome {
        params: best.0,
        loss: best.1,
        initial_loss,
        history,
        evaluations,
        generations: state.generation(),
        termination,
    })
}
