use crate::quat::{Quaternion, Vec3};
use crate::scalar::Real;

use super::{Skeleton, SkeletonPose};

/// World-space joint and end-site state for one pose.
#[derive(Debug, Clone)]
pub struct FkResult<T> {
    pub positions: Vec<Vec3<T>>,
    pub rotations: Vec<Quaternion<T>>,
    pub end_sites: Vec<Vec3<T>>,
}

/// World positions of all joints. The root sits at `root_position`; its
/// skeleton offset is not added.
pub fn forward_kinematics<T: Real>(
    pose: &SkeletonPose<T>,
    skeleton: &Skeleton<T>,
    root_position: Vec3<T>,
) -> Vec<Vec3<T>> {
    forward_kinematics_full(pose, skeleton, root_position).positions
}

pub fn forward_kinematics_full<T: Real>(
    pose: &SkeletonPose<T>,
    skeleton: &Skeleton<T>,
    root_position: Vec3<T>,
) -> FkResult<T> {
    let joints = skeleton.joints();
    let mut positions = Vec::with_capacity(joints.len());
    let mut rotations: Vec<Quaternion<T>> = Vec::with_capacity(joints.len());
    for (i, joint) in joints.iter().enumerate() {
        let local = pose.rotations[i];
        match joint.parent {
            None => {
                positions.push(root_position);
                rotations.push(local);
            }
            Some(p) => {
                positions.push(positions[p] + rotations[p].rotate(joint.offset));
                rotations.push(rotations[p] * local);
            }
        }
    }
    let end_sites = skeleton
        .end_sites()
        .iter()
        .map(|e| positions[e.parent] + rotations[e.parent].rotate(e.offset))
        .collect();
    FkResult {
        positions,
        rotations,
        end_sites,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{Channel, EndSite, Joint};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn skel(offsets: &[[f64; 3]]) -> Skeleton<f64> {
        let joints = offsets
            .iter()
            .enumerate()
            .map(|(i, o)| Joint {
                name: format!("j{i}"),
                parent: i.checked_sub(1),
                offset: Vec3::new(o[0], o[1], o[2]),
                channels: vec![Channel::Zrotation, Channel::Xrotation, Channel::Yrotation],
            })
            .collect();
        Skeleton::new(joints, vec![EndSite { name: "tip".into(), parent: offsets.len() - 1, offset: Vec3::new(0.0, 1.0, 0.0) }]).unwrap()
    }

    #[test]
    fn identity_rotations_accumulate_offsets() {
        let s = skel(&[[9.0, 9.0, 9.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]);
        let pose = SkeletonPose::identity(4);
        let r = forward_kinematics_full(&pose, &s, Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(r.positions[1], Vec3::new(2.0, 1.0, 1.0));
        assert_eq!(r.positions[2], Vec3::new(2.0, 3.0, 1.0));
        assert_eq!(r.positions[3], Vec3::new(2.0, 3.0, 4.0));
        assert_eq!(r.end_sites[0], Vec3::new(2.0, 4.0, 4.0));
    }

    #[test]
    fn root_quarter_turn_moves_child() {
        let s = skel(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let mut pose = SkeletonPose::identity(2);
        pose.rotations[0] = Quaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let root = Vec3::new(5.0, -2.0, 0.5);
        let p = forward_kinematics(&pose, &s, root);
        let d = p[1] - root;
        assert_relative_eq!(d.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(d.y, 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.z, 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn bone_lengths_preserved(angles in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 4)) {
            let s = skel(&[[0.0, 0.0, 0.0], [1.0, 2.0, 0.0], [0.0, 2.0, -1.0], [0.5, 0.0, 3.0]]);
            let pose = SkeletonPose {
                root_displacement: Vec3::zero(),
                rotations: angles.iter().map(|&(a, b, c)| Quaternion::from_rotation_vector(Vec3::new(a, b, c))).collect(),
            };
            let p = forward_kinematics(&pose, &s, Vec3::new(0.3, 0.2, 0.1));
            for (i, j) in s.joints().iter().enumerate().skip(1) {
                let len = (p[i] - p[j.parent.unwrap()]).norm();
                prop_assert!((len - j.offset.norm()).abs() < 1e-9);
            }
        }
    }
}
