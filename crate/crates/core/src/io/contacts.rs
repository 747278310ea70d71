use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{forward_kinematics_full, MotionClip, Skeleton};
use crate::quat::Vec3;
use crate::scalar::Real;

/// Per-frame `[left, right]` ground-contact flags, each 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FootContactLabels {
    pub frames: Vec<[u8; 2]>,
}

impl FootContactLabels {
    pub fn new(frames: Vec<[u8; 2]>) -> Result<Self> {
        if frames.iter().flatten().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("contact labels must be 0 or 1".into()));
        }
        Ok(Self { frames })
    }

    pub fn zeros(n: usize) -> Self {
        Self { frames: vec![[0, 0]; n] }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Maximal runs `[start, end)` where `side` (0 left, 1 right) is in contact.
    pub fn spans(&self, side: usize) -> Vec<(usize, usize)> {
        let mut spans = Vec::new();
        let mut start = None;
        for (t, f) in self.frames.iter().enumerate() {
            match (f[side] == 1, start) {
                (true, None) => start = Some(t),
                (false, Some(s)) => {
                    spans.push((s, t));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push((s, self.frames.len()));
        }
        spans
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self { frames: self.frames[start..end].to_vec() }
    }
}

/// A point whose world position is tracked: a joint or an end site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FootPoint {
    Joint(usize),
    EndSite(usize),
}

impl FootPoint {
    pub fn resolve<T: Real>(skeleton: &Skeleton<T>, name: &str) -> Result<Self> {
        skeleton
            .joint_index(name)
            .map(FootPoint::Joint)
            .or_else(|| skeleton.end_site_index(name).map(FootPoint::EndSite))
            .ok_or_else(|| Error::UnknownJoint(name.to_string()))
    }

    /// Joint carrying this point (the end site's parent for end sites).
    pub fn joint<T: Real>(self, skeleton: &Skeleton<T>) -> usize {
        match self {
            FootPoint::Joint(j) => j,
            FootPoint::EndSite(e) => skeleton.end_sites()[e].parent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactConfig {
    pub left_foot: String,
    pub right_foot: String,
    /// World units above the ground plane.
    pub height_threshold: f64,
    /// World units per frame, measured at 30 fps.
    pub speed_threshold: f64,
    /// Index of the vertical axis (1 = y-up).
    pub up_axis: usize,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            left_foot: "LeftToe".into(),
            right_foot: "RightToe".into(),
            height_threshold: 3.0,
            speed_threshold: 0.5,
            up_axis: 1,
        }
    }
}

impl ContactConfig {
    /// Picks foot points by name: a toe joint if present, otherwise the ankle
    /// (or foot) joint, otherwise the ankle's end site.
    pub fn for_skeleton<T: Real>(skeleton: &Skeleton<T>) -> Self {
        let find = |side: &str| -> Option<String> {
            let names: Vec<&str> = skeleton.joints().iter().map(|j| j.name.as_str()).collect();
            let has = |n: &&str, part: &str| {
                let l = n.to_ascii_lowercase();
                l.contains(&side.to_ascii_lowercase()) && l.contains(part)
            };
            for part in ["toe", "ankle", "foot"] {
                if let Some(n) = names.iter().find(|n| has(n, part)) {
                    return Some(n.to_string());
                }
            }
            skeleton
                .end_sites()
                .iter()
                .find(|e| e.name.to_ascii_lowercase().contains(&side.to_ascii_lowercase()))
                .map(|e| e.name.clone())
        };
        let d = Self::default();
        Self {
            left_foot: find("left").unwrap_or(d.left_foot.clone()),
            right_foot: find("right").unwrap_or(d.right_foot.clone()),
            ..d
        }
    }
}

/// World positions of a foot point for every frame of the clip.
pub fn foot_trajectory<T: Real>(clip: &MotionClip<T>, point: FootPoint) -> Vec<Vec3<T>> {
    clip.frames
        .iter()
        .zip(clip.root_positions())
        .map(|(f, root)| {
            let fk = forward_kinematics_full(f, &clip.skeleton, root);
            match point {
                FootPoint::Joint(j) => fk.positions[j],
                FootPoint::EndSite(e) => fk.end_sites[e],
            }
        })
        .collect()
}

/// Contact = height below threshold and speed below threshold.
pub fn detect_foot_contacts<T: Real>(clip: &MotionClip<T>, config: &ContactConfig) -> Result<FootContactLabels> {
    let points = [
        FootPoint::resolve(&clip.skeleton, &config.left_foot)?,
        FootPoint::resolve(&clip.skeleton, &config.right_foot)?,
    ];
    if config.up_axis > 2 {
        return Err(Error::InvalidArgument(format!("up axis {}", config.up_axis)));
    }
    // speed threshold is per 30 fps frame
    let speed_limit = config.speed_threshold * 30.0 / clip.fps.max(f64::MIN_POSITIVE);
    let mut frames = vec![[0u8; 2]; clip.len()];
    for (side, point) in points.into_iter().enumerate() {
        let traj = foot_trajectory(clip, point);
        for t in 0..traj.len() {
            let height = traj[t].to_array()[config.up_axis].to_f64_lossy();
            let speed = match traj.len() {
                1 => 0.0,
                _ if t == 0 => (traj[1] - traj[0]).norm().to_f64_lossy(),
                _ => (traj[t] - traj[t - 1]).norm().to_f64_lossy(),
            };
            if height < config.height_threshold && speed < speed_limit {
                frames[t][side] = 1;
            }
        }
    }
    Ok(FootContactLabels { frames })
}
