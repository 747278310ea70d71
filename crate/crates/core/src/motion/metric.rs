use crate::error::{Error, Result};
use crate::quat::quat_log_distance_sq;
use crate::scalar::Real;

use super::SkeletonPose;

/// Sum over joints of the squared geodesic rotation distance. Root
/// displacement does not contribute.
pub fn pose_distance<T: Real>(a: &SkeletonPose<T>, b: &SkeletonPose<T>) -> Result<T> {
    pose_distance_weighted(a, b, None)
}

/// [`pose_distance`] with optional per-joint weights (uniform when `None`).
pub fn pose_distance_weighted<T: Real>(
    a: &SkeletonPose<T>,
    b: &SkeletonPose<T>,
    weights: Option<&[T]>,
) -> Result<T> {
    if a.rotations.len() != b.rotations.len() {
        return Err(Error::SkeletonMismatch(format!(
            "{} vs {} joints",
            a.rotations.len(),
            b.rotations.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != a.rotations.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} joints",
                w.len(),
                a.rotations.len()
            )));
        }
    }
    let mut sum = T::zero();
    for (l, (qa, qb)) in a.rotations.iter().zip(&b.rotations).enumerate() {
        let d = quat_log_distance_sq(*qa, *qb)?;
        sum = sum + weights.map_or(d, |w| w[l] * d);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{Quaternion, Vec3};
    use proptest::prelude::*;

    fn random_pose(seed: &[(f64, f64, f64)]) -> SkeletonPose<f64> {
        SkeletonPose {
            root_displacement: Vec3::zero(),
            rotations: seed.iter().map(|&(a, b, c)| Quaternion::from_rotation_vector(Vec3::new(a, b, c))).collect(),
        }
    }

    #[test]
    fn single_joint_difference() {
        let a = SkeletonPose::<f64>::identity(8);
        let mut b = a.clone();
        b.rotations[5] = Quaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        // scalar oracle: half angle squared
        let oracle = (std::f64::consts::FRAC_PI_2 / 2.0).powi(2);
        assert!((pose_distance(&a, &b).unwrap() - oracle).abs() < 1e-12);
        assert_eq!(pose_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn mismatch_is_error() {
        assert!(matches!(
            pose_distance(&SkeletonPose::<f64>::identity(2), &SkeletonPose::identity(3)),
            Err(Error::SkeletonMismatch(_))
        ));
    }

    #[test]
    fn weights_scale_terms() {
        let a = SkeletonPose::<f64>::identity(2);
        let mut b = a.clone();
        b.rotations[1] = Quaternion::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), 1.0);
        let w = [3.0, 2.0];
        let d = pose_distance_weighted(&a, &b, Some(&w)).unwrap();
        assert!((d - 2.0 * 0.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_and_antipodal_invariant(r in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 10)) {
            let a = random_pose(&r[..5]);
            let b = random_pose(&r[5..]);
            let ab = pose_distance(&a, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - pose_distance(&b, &a).unwrap()).abs() < 1e-12);
            let mut flipped = b.clone();
            for q in flipped.rotations.iter_mut() { *q = -*q; }
            prop_assert!((ab - pose_distance(&a, &flipped).unwrap()).abs() < 1e-12);
        }
    }
}
