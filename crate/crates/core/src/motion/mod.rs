//! Skeletal data model: skeletons, poses, clips, forward kinematics and the
//! rotation metric used by stitching and training losses.

mod clip;
mod kinematics;
mod metric;
mod skeleton;

pub use clip::{antipodal_correct, MotionClip, SkeletonPose};
pub use kinematics::{forward_kinematics, forward_kinematics_full, FkResult};
pub use metric::{pose_distance, pose_distance_weighted};
pub use skeleton::{Channel, EndSite, Joint, Skeleton};
