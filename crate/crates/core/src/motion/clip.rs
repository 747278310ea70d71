use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::{Quaternion, Vec3};
use crate::scalar::Real;

use super::Skeleton;

/// One frame: world-frame root displacement from the previous frame plus one
/// local rotation per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonPose<T> {
    pub root_displacement: Vec3<T>,
    pub rotations: Vec<Quaternion<T>>,
}

impl<T: Real> SkeletonPose<T> {
    pub fn identity(joints: usize) -> Self {
        Self {
            root_displacement: Vec3::zero(),
            rotations: vec![Quaternion::identity(); joints],
        }
    }

    /// Flattened `[root(3), q_0(4), ..., q_{J-1}(4)]`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(3 + 4 * self.rotations.len());
        v.extend_from_slice(&self.root_displacement.to_array());
        for q in &self.rotations {
            v.extend_from_slice(&q.to_array());
        }
        v
    }

    pub fn from_slice(v: &[T]) -> Result<Self> {
        if v.len() < 3 || (v.len() - 3) % 4 != 0 {
            return Err(Error::InvalidArgument(format!("pose vector of length {}", v.len())));
        }
        Ok(Self {
            root_displacement: Vec3::from_slice(&v[..3]),
            rotations: v[3..].chunks_exact(4).map(Quaternion::from_slice).collect(),
        })
    }

    pub fn validate(&self, tol: T) -> Result<()> {
        if !self.root_displacement.is_finite() {
            return Err(Error::NonFinite("root displacement"));
        }
        for q in &self.rotations {
            if !q.is_finite() {
                return Err(Error::NonFinite("joint rotation"));
            }
            if (q.norm() - T::one()).abs() > tol {
                return Err(Error::DegenerateQuaternion(q.norm().to_f64_lossy()));
            }
        }
        Ok(())
    }
}

/// A pose sequence bound to a skeleton.
///
/// The root's world position at frame `t` is `root_origin` plus the sum of
/// displacements of frames `0..=t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionClip<T> {
    pub skeleton: Arc<Skeleton<T>>,
    pub frames: Vec<SkeletonPose<T>>,
    pub fps: f64,
    pub root_origin: Vec3<T>,
}

impl<T: Real> MotionClip<T> {
    pub fn new(skeleton: Arc<Skeleton<T>>, frames: Vec<SkeletonPose<T>>, fps: f64) -> Self {
        Self {
            skeleton,
            frames,
            fps,
            root_origin: Vec3::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Accumulated root world positions, one per frame.
    pub fn root_positions(&self) -> Vec<Vec3<T>> {
        let mut p = self.root_origin;
        self.frames
            .iter()
            .map(|f| {
                p += f.root_displacement;
                p
            })
            .collect()
    }

    /// Checks unit quaternions and joint counts.
    pub fn validate(&self) -> Result<()> {
        let j = self.skeleton.joint_count();
        for f in &self.frames {
            if f.rotations.len() != j {
                return Err(Error::SkeletonMismatch(format!(
                    "frame has {} rotations, skeleton has {j} joints",
                    f.rotations.len()
                )));
            }
            f.validate(T::lit(1e-6).max(T::epsilon() * T::lit(16.0)))?;
        }
        Ok(())
    }

    /// Frames `[start, end)` as a new clip whose origin is the root position
    /// just before `start`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let origin = if start == 0 {
            self.root_origin
        } else {
            self.root_positions()[start - 1]
        };
        Self {
            skeleton: self.skeleton.clone(),
            frames: self.frames[start..end].to_vec(),
            fps: self.fps,
            root_origin: origin,
        }
    }
}

/// Removes quaternion sign flips: frame 0 is moved to `w >= 0`, and every later
/// frame takes the sign closest (Euclidean) to the previous frame.
pub fn antipodal_correct<T: Real>(clip: &MotionClip<T>) -> Result<MotionClip<T>> {
    clip.validate()?;
    let mut out = clip.clone();
    correct_frames(&mut out.frames);
    Ok(out)
}

pub(crate) fn correct_frames<T: Real>(frames: &mut [SkeletonPose<T>]) {
    let Some(first) = frames.first_mut() else {
        return;
    };
    for q in first.rotations.iter_mut() {
        *q = q.canonical();
    }
    for t in 1..frames.len() {
        let (prev, cur) = frames.split_at_mut(t);
        let prev = &prev[t - 1];
        for (q, p) in cur[0].rotations.iter_mut().zip(&prev.rotations) {
            // |q - p|^2 > |-q - p|^2  <=>  q.p < 0
            if q.dot(*p) < T::zero() {
                *q = -*q;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{forward_kinematics, Joint, Channel};

    fn chain(n: usize) -> Arc<Skeleton<f64>> {
        let joints = (0..n)
            .map(|i| Joint {
                name: format!("j{i}"),
                parent: i.checked_sub(1),
                offset: Vec3::new(0.0, if i == 0 { 0.0 } else { 1.0 }, 0.3),
                channels: vec![Channel::Zrotation, Channel::Xrotation, Channel::Yrotation],
            })
            .collect();
        Arc::new(Skeleton::new(joints, vec![]).unwrap())
    }

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion<f64> {
        Quaternion::new(w, x, y, z).normalized().unwrap()
    }

    #[test]
    fn removes_sign_flips() {
        let a = q(0.5, 0.5, -0.5, 0.5);
        let frames = [a, -a, a]
            .into_iter()
            .map(|r| SkeletonPose { root_displacement: Vec3::zero(), rotations: vec![r] })
            .collect();
        let clip = MotionClip::new(chain(1), frames, 30.0);
        let out = antipodal_correct(&clip).unwrap();
        for f in &out.frames {
            assert_eq!(f.rotations[0], a);
        }
    }

    #[test]
    fn continuous_sequence_unchanged_and_idempotent() {
        let frames: Vec<_> = (0..10)
            .map(|t| SkeletonPose {
                root_displacement: Vec3::new(0.1, 0.0, 0.0),
                rotations: vec![q(1.0, 0.05 * t as f64, 0.0, 0.0), q(0.9, 0.0, 0.1, 0.0)],
            })
            .collect();
        let clip = MotionClip::new(chain(2), frames, 30.0);
        let once = antipodal_correct(&clip).unwrap();
        assert_eq!(once, clip);
        assert_eq!(antipodal_correct(&once).unwrap(), once);
    }

    #[test]
    fn fk_unchanged_by_correction() {
        let mut frames = Vec::new();
        let mut seed = 7u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..20 {
            let rotations = (0..4).map(|_| q(rnd(), rnd(), rnd(), rnd())).collect();
            frames.push(SkeletonPose { root_displacement: Vec3::zero(), rotations });
        }
        let clip = MotionClip::new(chain(4), frames, 30.0);
        let out = antipodal_correct(&clip).unwrap();
        for (a, b) in clip.frames.iter().zip(&out.frames) {
            let pa = forward_kinematics(a, &clip.skeleton, Vec3::zero());
            let pb = forward_kinematics(b, &clip.skeleton, Vec3::zero());
            for (x, y) in pa.iter().zip(&pb) {
                assert!((*x - *y).norm() < 1e-6);
            }
        }
        for w in out.frames.windows(2) {
            for (a, b) in w[0].rotations.iter().zip(&w[1].rotations) {
                assert!(a.dot(*b) >= 0.0);
            }
        }
        assert!(out.frames[0].rotations.iter().all(|r| r.w >= 0.0));
    }

    #[test]
    fn root_positions_accumulate() {
        let frames = (0..3)
            .map(|_| SkeletonPose { root_displacement: Vec3::new(1.0, 0.0, 0.0), rotations: vec![Quaternion::identity()] })
            .collect();
        let mut clip = MotionClip::new(chain(1), frames, 30.0);
        clip.root_origin = Vec3::new(0.0, 5.0, 0.0);
        let p = clip.root_positions();
        assert_eq!(p[2], Vec3::new(3.0, 5.0, 0.0));
        let s = clip.slice(1, 3);
        assert_eq!(s.root_positions(), p[1..].to_vec());
    }
}
