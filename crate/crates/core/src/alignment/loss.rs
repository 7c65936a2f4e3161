use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AlignError, WorldTransform};
use crate::citymodel::{RayAccel, SurfaceLabel};
use crate::ingest::{CameraTrajectory, MaskLabel, SegMask, SlamPoint, SlamPointCloud};
use crate::spherical::{dir_to_pixel_index, LabelImage, PixelLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub ground: f64,
    pub point: f64,
    /// Point loss is divided by this many meters before weighting.
    pub point_norm: f64,
    /// Range assigned to point rays that miss the mesh, meters.
    pub d_max: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            ground: 1.0,
            point: 1.0,
            point_norm: 10.0,
            d_max: 200.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), AlignError> {
        let ok = self.ground.is_finite()
            && self.ground >= 0.0
            && self.point.is_finite()
            && self.point >= 0.0
            && self.point_norm.is_finite()
            && self.point_norm > 0.0
            && self.d_max.is_finite()
            && self.d_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(AlignError::Config(format!("invalid loss weights {self:?}")))
        }
    }

    pub fn combine(&self, ground: f64, point: f64) -> f64 {
        self.ground * ground + self.point * point / self.point_norm
    }
}

/// Ground-mismatch tally: pixels whose mask is Ground or Building are
/// counted; a counted pixel mismatches when exactly one of mask and render
/// says Ground.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GroundTally {
    pub mismatched: usize,
    pub counted: usize,
}

impl GroundTally {
    pub fn add(&mut self, other: GroundTally) {
        self.mismatched += other.mismatched;
        self.counted += other.counted;
    }

    pub fn fraction(&self) -> f64 {
        if self.counted == 0 {
            0.0
        } else {
            self.mismatched as f64 / self.counted as f64
        }
    }
}

pub fn ground_tally(mask: &SegMask, render: &LabelImage) -> Result<GroundTally, AlignError> {
    if mask.width() != render.width() || mask.height() != render.height() {
        return Err(AlignError::SizeMismatch {
            mask: (mask.width(), mask.height()),
            render: (render.width(), render.height()),
        });
    }
    let mut tally = GroundTally::default();
    for (&m, &r) in mask.labels().iter().zip(render.labels()) {
        if m == MaskLabel::Other {
            continue;
        }
        tally.counted += 1;
        if (m == MaskLabel::Ground) != (r == PixelLabel::Ground) {
            tally.mismatched += 1;
        }
    }
    Ok(tally)
}

/// Fraction of counted pixels, pooled over all frames, whose ground labels
/// disagree between mask and render.
pub fn ground_loss(masks: &[SegMask], renders: &[LabelImage]) -> Result<f64, AlignError> {
    if masks.len() != renders.len() {
        return Err(AlignError::FrameCount {
            masks: masks.len(),
            renders: renders.len(),
        });
    }
    let mut total = GroundTally::default();
    for (m, r) in masks.iter().zip(renders) {
        total.add(ground_tally(m, r)?);
    }
    Ok(total.fraction())
}

/// Keep the points that project onto a Building pixel of their own
/// keyframe's mask. Points of keyframes without a mask are dropped.
pub fn filter_building_points(
    cloud: &SlamPointCloud,
    traj: &CameraTrajectory,
    masks: &BTreeMap<u64, SegMask>,
) -> SlamPointCloud {
    let points = cloud
        .points
        .iter()
        .filter(|p| projects_onto_building(p, traj, masks))
        .cloned()
        .collect();
    SlamPointCloud { points }
}

fn projects_onto_building(p: &SlamPoint, traj: &CameraTrajectory, masks: &BTreeMap<u64, SegMask>) -> bool {
    let (Some(kf), Some(mask)) = (traj.get(p.keyframe_id), masks.get(&p.keyframe_id)) else {
        return false;
    };
    let d = kf.orientation.inverse() * (p.position - kf.position);
    match dir_to_pixel_index(&d, mask.width(), mask.height()) {
        Ok((u, v)) => mask.get(u, v) == MaskLabel::Building,
        Err(_) => false,
    }
}

/// Sum and count of point residuals `|range along ray - point distance|`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PointTally {
    pub sum: f64,
    pub count: usize,
}

impl PointTally {
    pub fn add(&mut self, other: PointTally) {
        self.sum += other.sum;
        self.count += other.count;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

/// Residual of one world-space point seen from world camera `c`. Points at
/// the camera center carry no ray and yield `None`.
pub(crate) fn point_residual(accel: &RayAccel, c: &crate::geom::Vec3, p: &crate::geom::Vec3, d_max: f64) -> Option<f64> {
    let d = p - c;
    let dist = d.norm();
    if !(dist > 0.0) {
        return None;
    }
    let range = accel.nearest(c, &(d / dist), f64::INFINITY).map_or(d_max, |h| h.0);
    Some((range - dist).abs())
}

pub fn point_tally(
    points: &[SlamPoint],
    traj: &CameraTrajectory,
    tf: &WorldTransform,
    accel: &RayAccel,
    d_max: f64,
) -> PointTally {
    let mut tally = PointTally::default();
    for p in points {
        let Some(index) = traj.index_of(p.keyframe_id) else {
            continue;
        };
        let u = tf.arc_fraction(index);
        let c = tf.apply(&traj.keyframes()[index].position, u);
        let w = tf.apply(&p.position, u);
        if let Some(r) = point_residual(accel, &c, &w, d_max) {
            tally.sum += r;
            tally.count += 1;
        }
    }
    tally
}

/// Mean point residual in meters over the cloud under `tf`.
pub fn point_loss(
    cloud: &SlamPointCloud,
    traj: &CameraTrajectory,
    tf: &WorldTransform,
    accel: &RayAccel,
    d_max: f64,
) -> f64 {
    point_tally(&cloud.points, traj, tf, accel, d_max).mean()
}

pub(crate) fn is_ground(accel: &RayAccel, hit: Option<(f64, u32)>) -> bool {
    hit.is_some_and(|(_, tri)| accel.label_of(tri) == SurfaceLabel::Ground)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Quat, Vec3};
    use crate::ingest::Keyframe;

    fn mask(labels: &[u8]) -> SegMask {
        SegMask::from_indices(4, 2, labels).unwrap()
    }

    fn render(labels: &[PixelLabel]) -> LabelImage {
        LabelImage::new(4, 2, labels.to_vec(), vec![1.0; 8]).unwrap()
    }

    #[test]
    fn ground_loss_counts_only_labelled_pixels() {
        use PixelLabel::*;
        let m = mask(&[0, 0, 1, 1, 2, 2, 1, 2]);
        let r = render(&[Ground, Sky, Ground, Building, Building, Ground, Sky, Sky]);
        // counted: indices 2..8 (6 pixels); mismatches at 3, 5, 6.
        let t = ground_tally(&m, &r).unwrap();
        assert_eq!(t, GroundTally { mismatched: 3, counted: 6 });
        assert_eq!(ground_loss(std::slice::from_ref(&m), std::slice::from_ref(&r)).unwrap(), 0.5);
        assert_eq!(ground_loss(&[m.clone(), m], &[r.clone(), r]).unwrap(), 0.5);
    }

    #[test]
    fn ground_loss_rejects_size_mismatch() {
        let m = SegMask::filled(8, 4, MaskLabel::Ground).unwrap();
        let r = render(&[PixelLabel::Ground; 8]);
        assert!(ground_loss(&[m], &[r]).is_err());
    }

    #[test]
    fn all_other_masks_give_zero() {
        let m = SegMask::filled(4, 2, MaskLabel::Other).unwrap();
        let r = render(&[PixelLabel::Ground; 8]);
        assert_eq!(ground_loss(&[m], &[r]).unwrap(), 0.0);
    }

    #[test]
    fn filter_uses_own_keyframe_mask() {
        let kfs = vec![
            Keyframe {
                id: 0,
                position: Vec3::zeros(),
                orientation: Quat::identity(),
                video_time: 0.0,
            },
            Keyframe {
                id: 1,
                position: Vec3::new(1.0, 0.0, 0.0),
                orientation: Quat::identity(),
                video_time: 1.0,
            },
        ];
        let traj = CameraTrajectory::new(kfs, Vec3::z()).unwrap();
        // Upper half Building, lower half Ground.
        let mut m = SegMask::filled(8, 4, MaskLabel::Ground).unwrap();
        for u in 0..8 {
            m.set(u, 0, MaskLabel::Building);
            m.set(u, 1, MaskLabel::Building);
        }
        let masks = BTreeMap::from([(0, m)]);
        let cloud = SlamPointCloud {
            points: vec![
                SlamPoint {
                    position: Vec3::new(5.0, 0.0, 3.0),
                    keyframe_id: 0,
                },
                SlamPoint {
                    position: Vec3::new(5.0, 0.0, -3.0),
                    keyframe_id: 0,
                },
                SlamPoint {
                    position: Vec3::new(5.0, 0.0, 3.0),
                    keyframe_id: 1,
                },
                SlamPoint {
                    position: Vec3::zeros(),
                    keyframe_id: 0,
                },
            ],
        };
        let kept = filter_building_points(&cloud, &traj, &masks);
        assert_eq!(kept.points, vec![cloud.points[0]]);
        assert_eq!(filter_building_points(&kept, &traj, &masks), kept);
    }
}
