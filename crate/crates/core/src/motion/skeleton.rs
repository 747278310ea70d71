use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Vec3;
use crate::scalar::Real;

/// BVH channel kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "xposition" => Self::Xposition,
            "yposition" => Self::Yposition,
            "zposition" => Self::Zposition,
            "xrotation" => Self::Xrotation,
            "yrotation" => Self::Yrotation,
            "zrotation" => Self::Zrotation,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Xposition => "Xposition",
            Self::Yposition => "Yposition",
            Self::Zposition => "Zposition",
            Self::Xrotation => "Xrotation",
            Self::Yrotation => "Yrotation",
            Self::Zrotation => "Zrotation",
        }
    }

    /// Axis index for rotation channels.
    pub fn rotation_axis(self) -> Option<usize> {
        match self {
            Self::Xrotation => Some(0),
            Self::Yrotation => Some(1),
            Self::Zrotation => Some(2),
            _ => None,
        }
    }

    pub fn position_axis(self) -> Option<usize> {
        match self {
            Self::Xposition => Some(0),
            Self::Yposition => Some(1),
            Self::Zposition => Some(2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint<T> {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: Vec3<T>,
    pub channels: Vec<Channel>,
}

/// Terminal point of a chain (BVH `End Site`). Carries no rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndSite<T> {
    pub name: String,
    pub parent: usize,
    pub offset: Vec3<T>,
}

/// Joint hierarchy in topological order: the root is joint 0 and every other
/// joint's parent has a smaller index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton<T> {
    joints: Vec<Joint<T>>,
    end_sites: Vec<EndSite<T>>,
    /// Length unit label, e.g. `cm`. Never converted implicitly.
    pub units: String,
}

impl<T: Real> Skeleton<T> {
    pub fn new(joints: Vec<Joint<T>>, end_sites: Vec<EndSite<T>>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidSkeleton("no joints".into()));
        }
        let roots = joints.iter().filter(|j| j.parent.is_none()).count();
        if roots != 1 || joints[0].parent.is_some() {
            return Err(Error::InvalidSkeleton(format!(
                "expected exactly one root at index 0, found {roots}"
            )));
        }
        for (i, j) in joints.iter().enumerate().skip(1) {
            match j.parent {
                Some(p) if p < i => {}
                _ => {
                    return Err(Error::InvalidSkeleton(format!(
                        "joint {i} (`{}`) is not in topological order",
                        j.name
                    )))
                }
            }
        }
        for e in &end_sites {
            if e.parent >= joints.len() {
                return Err(Error::InvalidSkeleton(format!(
                    "end site `{}` has parent {} out of range",
                    e.name, e.parent
                )));
            }
        }
        Ok(Self {
            joints,
            end_sites,
            units: "cm".to_string(),
        })
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = units.into();
        self
    }

    pub fn joints(&self) -> &[Joint<T>] {
        &self.joints
    }

    pub fn end_sites(&self) -> &[EndSite<T>] {
        &self.end_sites
    }

    /// Number of rotating joints (`J`).
    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn root_index(&self) -> usize {
        0
    }

    /// Pose dimensionality `3 + 4J`.
    pub fn pose_dim(&self) -> usize {
        3 + 4 * self.joints.len()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn end_site_index(&self, name: &str) -> Option<usize> {
        self.end_sites.iter().position(|e| e.name == name)
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.joints[joint].parent
    }

    pub fn children(&self, joint: usize) -> impl Iterator<Item = usize> + '_ {
        self.joints
            .iter()
            .enumerate()
            .filter(move |(_, j)| j.parent == Some(joint))
            .map(|(i, _)| i)
    }

    /// Same topology and offsets within `tol`.
    pub fn is_compatible(&self, other: &Self, tol: T) -> bool {
        self.joints.len() == other.joints.len()
            && self.joints.iter().zip(&other.joints).all(|(a, b)| {
                a.parent == b.parent && (a.offset - b.offset).norm() <= tol
            })
    }

    /// Joint indices from the root down to `joint`, inclusive.
    pub fn chain_to_root(&self, joint: usize) -> Vec<usize> {
        let mut chain = vec![joint];
        let mut cur = joint;
        while let Some(p) = self.joints[cur].parent {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        chain
    }

    pub fn cast<U: Real>(&self) -> Skeleton<U> {
        Skeleton {
            joints: self
                .joints
                .iter()
                .map(|j| Joint {
                    name: j.name.clone(),
                    parent: j.parent,
                    offset: j.offset.cast(),
                    channels: j.channels.clone(),
                })
                .collect(),
            end_sites: self
                .end_sites
                .iter()
                .map(|e| EndSite {
                    name: e.name.clone(),
                    parent: e.parent,
                    offset: e.offset.cast(),
                })
                .collect(),
            units: self.units.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joint(name: &str, parent: Option<usize>) -> Joint<f64> {
        Joint {
            name: name.into(),
            parent,
            offset: Vec3::new(0.0, 1.0, 0.0),
            channels: vec![Channel::Zrotation, Channel::Xrotation, Channel::Yrotation],
        }
    }

    #[test]
    fn rejects_bad_topology() {
        assert!(Skeleton::new(vec![joint("a", None), joint("b", None)], vec![]).is_err());
        assert!(Skeleton::new(vec![joint("a", None), joint("b", Some(2)), joint("c", Some(0))], vec![]).is_err());
        assert!(Skeleton::<f64>::new(vec![], vec![]).is_err());
    }

    #[test]
    fn dims_and_lookup() {
        let s = Skeleton::new(
            vec![joint("hips", None), joint("knee", Some(0)), joint("ankle", Some(1))],
            vec![EndSite { name: "ankle_End".into(), parent: 2, offset: Vec3::zero() }],
        )
        .unwrap();
        assert_eq!(s.pose_dim(), 15);
        assert_eq!(s.joint_index("knee"), Some(1));
        assert_eq!(s.end_site_index("ankle_End"), Some(0));
        assert_eq!(s.chain_to_root(2), vec![0, 1, 2]);
        assert_eq!(s.children(0).collect::<Vec<_>>(), vec![1]);
    }
}
