//! Equirectangular 360° camera model.
//!
//! Camera frame: forward = +x, left = +y, up = +z. Pixel `(u, v)` is
//! evaluated at its center; azimuth grows to the right and elevation
//! upwards:
//!
//! ```text
//! alpha = 2 pi ((u + 0.5) / width - 0.5)
//! beta  = pi (0.5 - (v + 0.5) / height)
//! dir   = (cos beta cos alpha, -cos beta sin alpha, sin beta)
//! ```

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rayon::prelude::*;

use crate::alignment::WorldTransform;
use crate::citymodel::{RayAccel, SurfaceLabel};
use crate::geom::{Quat, Vec3};
use crate::ingest::{write_indexed_png, CameraTrajectory, MASK_PALETTE};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    PixelOutOfRange {
        u: usize,
        v: usize,
        width: usize,
        height: usize,
    },
    #[error("cannot project a zero-length direction")]
    ZeroDirection,
    #[error("equirectangular image must be 2:1, got {width}x{height}")]
    Aspect { width: usize, height: usize },
    #[error("keyframe {0} is not in the trajectory")]
    UnknownKeyframe(u64),
}

/// World pose of a 360° camera; `orientation` maps camera to world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub orientation: Quat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PixelLabel {
    Sky = 0,
    Ground = 1,
    Building = 2,
}

impl From<SurfaceLabel> for PixelLabel {
    fn from(l: SurfaceLabel) -> Self {
        match l {
            SurfaceLabel::Ground => PixelLabel::Ground,
            SurfaceLabel::Building => PixelLabel::Building,
        }
    }
}

/// Rendered labels and hit distances; depth is infinite exactly on Sky.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelImage {
    width: usize,
    height: usize,
    labels: Vec<PixelLabel>,
    depth: Vec<f64>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize, labels: Vec<PixelLabel>, depth: Vec<f64>) -> Result<Self, ProjectionError> {
        check_aspect(width, height)?;
        assert_eq!(labels.len(), width * height);
        assert_eq!(depth.len(), width * height);
        Ok(LabelImage {
            width,
            height,
            labels,
            depth,
        })
    }

    /// All pixels one label, depth 1 unless Sky.
    pub fn filled(width: usize, height: usize, label: PixelLabel) -> Result<Self, ProjectionError> {
        let d = if label == PixelLabel::Sky { f64::INFINITY } else { 1.0 };
        Self::new(width, height, vec![label; width * height], vec![d; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[PixelLabel] {
        &self.labels
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    pub fn get(&self, u: usize, v: usize) -> PixelLabel {
        self.labels[v * self.width + u]
    }

    pub fn depth_at(&self, u: usize, v: usize) -> f64 {
        self.depth[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, label: PixelLabel, depth: f64) {
        self.labels[v * self.width + u] = label;
        self.depth[v * self.width + u] = depth;
    }

    /// Pixel counts for Sky, Ground, Building.
    pub fn histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

fn check_aspect(width: usize, height: usize) -> Result<(), ProjectionError> {
    if height == 0 || width != 2 * height {
        return Err(ProjectionError::Aspect { width, height });
    }
    Ok(())
}

#[inline]
fn center_dir(u: usize, v: usize, width: usize, height: usize) -> Vec3 {
    let alpha = TAU * ((u as f64 + 0.5) / width as f64 - 0.5);
    let beta = PI * (0.5 - (v as f64 + 0.5) / height as f64);
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Vec3::new(cb * ca, -cb * sa, sb)
}

/// Camera-frame unit direction through the center of pixel `(u, v)`.
pub fn pixel_to_dir(u: usize, v: usize, width: usize, height: usize) -> Result<Vec3, ProjectionError> {
    if u >= width || v >= height {
        return Err(ProjectionError::PixelOutOfRange { u, v, width, height });
    }
    Ok(center_dir(u, v, width, height))
}

/// Continuous pixel coordinates of a camera-frame direction; the inverse of
/// [`pixel_to_dir`]. `u` lies in `(-0.5, width - 0.5]`, `v` in
/// `[-0.5, height - 0.5]`.
pub fn dir_to_pixel(dir: &Vec3, width: usize, height: usize) -> Result<(f64, f64), ProjectionError> {
    let horizontal = dir.x.hypot(dir.y);
    if horizontal == 0.0 && dir.z == 0.0 {
        return Err(ProjectionError::ZeroDirection);
    }
    let alpha = (-dir.y).atan2(dir.x);
    let beta = dir.z.atan2(horizontal);
    let u = width as f64 * (alpha / TAU + 0.5) - 0.5;
    let v = height as f64 * (0.5 - beta / PI) - 0.5;
    Ok((u, v))
}

/// Integer pixel containing a direction: azimuth wraps, elevation clamps.
pub fn dir_to_pixel_index(dir: &Vec3, width: usize, height: usize) -> Result<(usize, usize), ProjectionError> {
    let (u, v) = dir_to_pixel(dir, width, height)?;
    let ui = ((u + 0.5).floor() as i64).rem_euclid(width as i64) as usize;
    let vi = ((v + 0.5).floor().max(0.0) as usize).min(height - 1);
    Ok((ui, vi))
}

/// Precomputed camera-frame directions for every pixel of one resolution.
#[derive(Debug, Clone)]
pub struct RayGrid {
    width: usize,
    height: usize,
    dirs: Vec<Vec3>,
}

impl RayGrid {
    pub fn new(width: usize, height: usize) -> Result<Self, ProjectionError> {
        check_aspect(width, height)?;
        let dirs = (0..height)
            .flat_map(|v| (0..width).map(move |u| center_dir(u, v, width, height)))
            .collect();
        Ok(RayGrid { width, height, dirs })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Direction of the pixel with linear index `v * width + u`.
    #[inline]
    pub fn dir(&self, index: usize) -> &Vec3 {
        &self.dirs[index]
    }
}

/// World pose of keyframe `kf_id` under `tf`. The transform's vertical
/// correction moves the camera but never tilts it.
pub fn world_pose(traj: &CameraTrajectory, tf: &WorldTransform, kf_id: u64) -> Result<CameraPose, ProjectionError> {
    let index = traj.index_of(kf_id).ok_or(ProjectionError::UnknownKeyframe(kf_id))?;
    let kf = &traj.keyframes()[index];
    Ok(CameraPose {
        position: tf.apply(&kf.position, tf.arc_fraction(index)),
        orientation: tf.rotation() * kf.orientation,
    })
}

pub fn render_labels(accel: &RayAccel, pose: &CameraPose, width: usize, height: usize) -> Result<LabelImage, ProjectionError> {
    let grid = RayGrid::new(width, height)?;
    Ok(render_with_grid(accel, pose, &grid))
}

pub fn render_with_grid(accel: &RayAccel, pose: &CameraPose, grid: &RayGrid) -> LabelImage {
    let width = grid.width;
    let rot = pose.orientation.to_rotation_matrix();
    let rows: Vec<(Vec<PixelLabel>, Vec<f64>)> = (0..grid.height)
        .into_par_iter()
        .map(|v| {
            let mut labels = Vec::with_capacity(width);
            let mut depth = Vec::with_capacity(width);
            for u in 0..width {
                let d = rot * grid.dir(v * width + u);
                match accel.nearest(&pose.position, &d, f64::INFINITY) {
                    Some((t, tri)) => {
                        labels.push(accel.label_of(tri).into());
                        depth.push(t);
                    }
                    None => {
                        labels.push(PixelLabel::Sky);
                        depth.push(f64::INFINITY);
                    }
                }
            }
            (labels, depth)
        })
        .collect();
    let (labels, depth): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    LabelImage {
        width,
        height: grid.height,
        labels: labels.concat(),
        depth: depth.concat(),
    }
}

/// Palette index of a rendered label in debug PNGs (Sky is 3).
pub fn debug_index(label: PixelLabel) -> u8 {
    match label {
        PixelLabel::Sky => 3,
        PixelLabel::Ground => 1,
        PixelLabel::Building => 2,
    }
}

pub fn write_label_png(path: &Path, image: &LabelImage) -> Result<(), crate::Error> {
    let indices: Vec<u8> = image.labels.iter().map(|&l| debug_index(l)).collect();
    write_indexed_png(path, image.width, image.height, &indices, &MASK_PALETTE)
}
