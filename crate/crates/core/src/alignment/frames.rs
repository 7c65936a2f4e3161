use crate::ingest::CameraTrajectory;

/// Pick up to `n` keyframes spread uniformly by 3D path length.
///
/// Target `k` sits at fraction `k / (n - 1)` of the total length and takes
/// the keyframe nearest in arc length (the lower one on ties). Duplicates
/// are dropped, so short trajectories yield every keyframe.
pub fn sample_frames(traj: &CameraTrajectory, n: usize) -> Vec<u64> {
    let kfs = traj.keyframes();
    if n == 0 {
        return Vec::new();
    }
    if kfs.len() <= n {
        return traj.ids().collect();
    }
    let mut acc = vec![0.0; kfs.len()];
    for i in 1..kfs.len() {
        acc[i] = acc[i - 1] + (kfs[i].position - kfs[i - 1].position).norm();
    }
    let total = acc[kfs.len() - 1];
    let mut out: Vec<u64> = Vec::with_capacity(n);
    for k in 0..n {
        let target = if n == 1 { 0.0 } else { total * k as f64 / (n - 1) as f64 };
        let upper = acc.partition_point(|&a| a < target).min(kfs.len() - 1);
        let pick = if upper > 0 && target - acc[upper - 1] <= acc[upper] - target {
            upper - 1
        } else {
            upper
        };
        let id = kfs[pick].id;
        if out.last() != Some(&id) {
            out.push(id);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Quat, Vec3};
    use crate::ingest::Keyframe;

    fn traj(xs: &[f64]) -> CameraTrajectory {
        let kfs = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| Keyframe {
                id: 10 + i as u64,
                position: Vec3::new(x, 0.0, 0.0),
                orientation: Quat::identity(),
                video_time: i as f64,
            })
            .collect();
        CameraTrajectory::new(kfs, Vec3::z()).unwrap()
    }

    #[test]
    fn uniform_spacing() {
        let t = traj(&(0..9).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(sample_frames(&t, 3), vec![10, 14, 18]);
        assert_eq!(sample_frames(&t, 5), vec![10, 12, 14, 16, 18]);
    }

    #[test]
    fn fewer_keyframes_than_requested() {
        let t = traj(&[0.0, 1.0, 2.0]);
        assert_eq!(sample_frames(&t, 8), vec![10, 11, 12]);
    }

    #[test]
    fn ties_take_lower_and_duplicates_drop() {
        // Targets at 0, 1.5, 3 over positions 0, 1, 2, 3: 1.5 ties between 1 and 2.
        let t = traj(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(sample_frames(&t, 3), vec![10, 11, 13]);
        // A long gap pulls several targets onto the same keyframe.
        let t = traj(&[0.0, 0.1, 0.2, 0.3, 10.0]);
        assert_eq!(sample_frames(&t, 4), vec![10, 13, 14]);
    }

    #[test]
    fn endpoints_always_included() {
        let t = traj(&[0.0, 0.3, 2.0, 2.1, 5.0, 9.0]);
        let s = sample_frames(&t, 4);
        assert_eq!(s.first(), Some(&10));
        assert_eq!(s.last(), Some(&15));
    }
}
