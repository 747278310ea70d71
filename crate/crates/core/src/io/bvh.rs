//! BVH reader and writer.
//!
//! Rotation channels are composed in the order they are listed, so
//! `Zrotation Xrotation Yrotation` gives `Rz * Rx * Ry`. The root's position
//! channels become the clip origin plus per-frame displacements (frame 0 has
//! zero displacement). End sites are kept on the skeleton and named
//! `<parent>_End`.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::motion::{Channel, EndSite, Joint, MotionClip, Skeleton, SkeletonPose};
use crate::quat::{Quaternion, Vec3};
use crate::scalar::Real;

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
            .collect();
        Self { items, pos: 0 }
    }

    fn line(&self) -> usize {
        self.items
            .get(self.pos)
            .or_else(|| self.items.last())
            .map_or(0, |(l, _)| *l)
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|(_, t)| *t)
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        let item = self.items.get(self.pos).copied().ok_or_else(|| Error::Bvh {
            line: self.line(),
            message: "unexpected end of file".into(),
        })?;
        self.pos += 1;
        Ok(item)
    }

    fn expect(&mut self, want: &str) -> Result<usize> {
        let (line, tok) = self.next()?;
        if tok.eq_ignore_ascii_case(want) {
            Ok(line)
        } else {
            Err(err(line, format!("expected `{want}`, found `{tok}`")))
        }
    }

    fn number(&mut self) -> Result<f64> {
        let (line, tok) = self.next()?;
        tok.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(line, format!("expected a number, found `{tok}`")))
    }
}

fn err(line: usize, message: String) -> Error {
    Error::Bvh { line, message }
}

struct Parsed {
    joints: Vec<Joint<f64>>,
    end_sites: Vec<EndSite<f64>>,
}

fn parse_joint(tok: &mut Tokens, parent: Option<usize>, out: &mut Parsed) -> Result<()> {
    let (line, name) = tok.next()?;
    tok.expect("{")?;
    tok.expect("OFFSET")?;
    let offset = Vec3::new(tok.number()?, tok.number()?, tok.number()?);
    let cl = tok.expect("CHANNELS")?;
    let n = tok.number()?;
    if n < 0.0 || n.fract() != 0.0 || n > 6.0 {
        return Err(err(cl, format!("invalid channel count {n}")));
    }
    let mut channels = Vec::with_capacity(n as usize);
    for _ in 0..n as usize {
        let (l, c) = tok.next()?;
        channels.push(Channel::parse(c).ok_or_else(|| err(l, format!("unknown channel `{c}`")))?);
    }
    let rot: Vec<usize> = channels.iter().filter_map(|c| c.rotation_axis()).collect();
    let distinct = rot.len() == 3 && rot[0] != rot[1] && rot[1] != rot[2] && rot[0] != rot[2];
    if !(rot.is_empty() || distinct) {
        return Err(err(cl, "joint must have zero or three distinct rotation channels".into()));
    }
    let index = out.joints.len();
    if out.joints.iter().any(|j| j.name == name) {
        return Err(err(line, format!("duplicate joint name `{name}`")));
    }
    out.joints.push(Joint {
        name: name.to_string(),
        parent,
        offset,
        channels,
    });
    loop {
        let (l, t) = tok.next()?;
        match t {
            "}" => return Ok(()),
            t if t.eq_ignore_ascii_case("JOINT") => parse_joint(tok, Some(index), out)?,
            t if t.eq_ignore_ascii_case("End") => {
                tok.expect("Site")?;
                tok.expect("{")?;
                tok.expect("OFFSET")?;
                let offset = Vec3::new(tok.number()?, tok.number()?, tok.number()?);
                tok.expect("}")?;
                let count = out.end_sites.iter().filter(|e| e.parent == index).count();
                let name = if count == 0 {
                    format!("{}_End", out.joints[index].name)
                } else {
                    format!("{}_End{}", out.joints[index].name, count)
                };
                out.end_sites.push(EndSite {
                    name,
                    parent: index,
                    offset,
                });
            }
            other => return Err(err(l, format!("unexpected `{other}` in joint block"))),
        }
    }
}

fn axis_quat(axis: usize, degrees: f64) -> Quaternion<f64> {
    let mut a = Vec3::zero();
    match axis {
        0 => a.x = 1.0,
        1 => a.y = 1.0,
        _ => a.z = 1.0,
    }
    Quaternion::from_axis_angle(a, degrees.to_radians())
}

/// Composes Euler angles (degrees) given in channel order.
pub fn euler_to_quat<T: Real>(axes: [usize; 3], degrees: [f64; 3]) -> Quaternion<T> {
    (axis_quat(axes[0], degrees[0]) * axis_quat(axes[1], degrees[1]) * axis_quat(axes[2], degrees[2])).cast()
}

/// Decomposes `q` into Euler angles (degrees) for `R = R_a0 * R_a1 * R_a2`.
pub fn quat_to_euler<T: Real>(q: Quaternion<T>, axes: [usize; 3]) -> [f64; 3] {
    let m = q.cast::<f64>().normalized_or_identity().to_matrix();
    let [i, j, k] = axes;
    // even permutations of (0, 1, 2) have sign +1
    let s = if (j + 3 - i) % 3 == 1 { 1.0 } else { -1.0 };
    let sb = (s * m[i][k]).clamp(-1.0, 1.0);
    let b = sb.asin();
    let (a, c) = if sb.abs() < 1.0 - 1e-12 {
        ((-s * m[j][k]).atan2(m[k][k]), (-s * m[i][j]).atan2(m[i][i]))
    } else {
        ((s * m[k][j]).atan2(m[j][j]), 0.0)
    };
    [a.to_degrees(), b.to_degrees(), c.to_degrees()]
}

fn rotation_axes(channels: &[Channel]) -> Option<[usize; 3]> {
    let r: Vec<usize> = channels.iter().filter_map(|c| c.rotation_axis()).collect();
    (r.len() == 3).then(|| [r[0], r[1], r[2]])
}

/// Parses BVH text into a clip. Errors carry the offending line.
pub fn parse_bvh<T: Real>(text: &str) -> Result<MotionClip<T>> {
    let mut tok = Tokens::new(text);
    tok.expect("HIERARCHY")?;
    tok.expect("ROOT")?;
    let mut parsed = Parsed {
        joints: Vec::new(),
        end_sites: Vec::new(),
    };
    parse_joint(&mut tok, None, &mut parsed)?;
    let line = tok.line();
    if tok.peek().is_some_and(|t| !t.eq_ignore_ascii_case("MOTION")) {
        return Err(err(line, "expected `MOTION` after hierarchy (multiple roots?)".into()));
    }
    tok.expect("MOTION")?;
    tok.expect("Frames:")?;
    let nf = tok.number()?;
    if nf < 0.0 || nf.fract() != 0.0 {
        return Err(err(tok.line(), format!("invalid frame count {nf}")));
    }
    let nf = nf as usize;
    tok.expect("Frame")?;
    let fl = tok.expect("Time:")?;
    let frame_time = tok.number()?;
    if frame_time <= 0.0 {
        return Err(err(fl, format!("non-positive frame time {frame_time}")));
    }
    let fps = (1.0 / frame_time).round();

    let skeleton = Skeleton::new(parsed.joints, parsed.end_sites)
        .map_err(|e| err(1, e.to_string()))?
        .cast::<T>();
    let total: usize = skeleton.joints().iter().map(|j| j.channels.len()).sum();

    // motion rows: every row must sit on its own line with exactly `total` values
    let rest = &tok.items[tok.pos..];
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    for &(l, t) in rest {
        match rows.last_mut() {
            Some((rl, v)) if *rl == l => v.push(t),
            _ => rows.push((l, vec![t])),
        }
    }
    if rows.len() != nf {
        let l = rows.last().map_or(tok.line(), |r| r.0);
        return Err(err(l, format!("declared {nf} frames, found {} motion rows", rows.len())));
    }

    let mut frames = Vec::with_capacity(nf);
    let mut root_origin = Vec3::zero();
    let mut prev_root = Vec3::<T>::zero();
    for (fi, (line, vals)) in rows.iter().enumerate() {
        if vals.len() != total {
            return Err(err(*line, format!("expected {total} channel values, found {}", vals.len())));
        }
        let mut values = Vec::with_capacity(total);
        for v in vals {
            let x = v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(*line, format!("non-numeric motion value `{v}`")))?;
            values.push(x);
        }
        let mut cursor = 0;
        let mut rotations = Vec::with_capacity(skeleton.joint_count());
        let mut root_pos = skeleton.joints()[0].offset;
        for (ji, joint) in skeleton.joints().iter().enumerate() {
            let ch = &values[cursor..cursor + joint.channels.len()];
            cursor += joint.channels.len();
            let mut euler = [0.0; 3];
            let mut k = 0;
            for (c, v) in joint.channels.iter().zip(ch) {
                if c.rotation_axis().is_some() {
                    euler[k] = *v;
                    k += 1;
                } else if ji == 0 {
                    let v = T::lit(*v);
                    match c.position_axis() {
                        Some(0) => root_pos.x = v,
                        Some(1) => root_pos.y = v,
                        _ => root_pos.z = v,
                    }
                }
            }
            rotations.push(match rotation_axes(&joint.channels) {
                Some(axes) => euler_to_quat(axes, euler),
                None => Quaternion::identity(),
            });
        }
        let root_displacement = if fi == 0 {
            root_origin = root_pos;
            Vec3::zero()
        } else {
            root_pos - prev_root
        };
        prev_root = root_pos;
        frames.push(SkeletonPose {
            root_displacement,
            rotations,
        });
    }

    Ok(MotionClip {
        skeleton: Arc::new(skeleton),
        frames,
        fps,
        root_origin,
    })
}

fn fmt_num(out: &mut String, v: f64) {
    // avoid "-0.000000"
    let s = format!("{v:.6}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        out.push_str(&s.trim_start_matches('-').to_string());
    } else {
        out.push_str(&s);
    }
}

fn write_joint<T: Real>(out: &mut String, skel: &Skeleton<T>, ji: usize, depth: usize, order: &mut Vec<usize>) {
    let pad = "\t".repeat(depth);
    let joint = &skel.joints()[ji];
    let kw = if joint.parent.is_none() { "ROOT" } else { "JOINT" };
    order.push(ji);
    let _ = writeln!(out, "{pad}{kw} {}", joint.name);
    let _ = writeln!(out, "{pad}{{");
    let o = joint.offset.cast::<f64>();
    out.push_str(&format!("{pad}\tOFFSET "));
    fmt_num(out, o.x);
    out.push(' ');
    fmt_num(out, o.y);
    out.push(' ');
    fmt_num(out, o.z);
    out.push('\n');
    let names: Vec<&str> = joint.channels.iter().map(|c| c.name()).collect();
    let _ = writeln!(out, "{pad}\tCHANNELS {} {}", names.len(), names.join(" "));
    for child in skel.children(ji).collect::<Vec<_>>() {
        write_joint(out, skel, child, depth + 1, order);
    }
    for e in skel.end_sites().iter().filter(|e| e.parent == ji) {
        let o = e.offset.cast::<f64>();
        let _ = writeln!(out, "{pad}\tEnd Site");
        let _ = writeln!(out, "{pad}\t{{");
        out.push_str(&format!("{pad}\t\tOFFSET "));
        fmt_num(out, o.x);
        out.push(' ');
        fmt_num(out, o.y);
        out.push(' ');
        fmt_num(out, o.z);
        out.push('\n');
        let _ = writeln!(out, "{pad}\t}}");
    }
    let _ = writeln!(out, "{pad}}}");
}

/// Serialises a clip. Joints are emitted depth-first (children in index
/// order), values with six decimals, `Frame Time` as `1 / fps`.
pub fn write_bvh<T: Real>(clip: &MotionClip<T>) -> String {
    let skel = &clip.skeleton;
    let mut out = String::from("HIERARCHY\n");
    let mut order = Vec::with_capacity(skel.joint_count());
    write_joint(&mut out, skel, 0, 0, &mut order);
    out.push_str("MOTION\n");
    let _ = writeln!(out, "Frames: {}", clip.frames.len());
    out.push_str("Frame Time: ");
    fmt_num(&mut out, 1.0 / clip.fps);
    out.push('\n');
    let roots = clip.root_positions();
    for (frame, root) in clip.frames.iter().zip(roots) {
        let mut first = true;
        for &ji in &order {
            let joint = &skel.joints()[ji];
            let euler = rotation_axes(&joint.channels).map(|axes| quat_to_euler(frame.rotations[ji], axes));
            let mut k = 0;
            for c in &joint.channels {
                let v = if let Some(axis) = c.position_axis() {
                    let p = if ji == 0 { root.cast::<f64>() } else { joint.offset.cast::<f64>() };
                    p.to_array()[axis]
                } else {
                    let v = euler.map_or(0.0, |e| e[k]);
                    k += 1;
                    v
                };
                if !first {
                    out.push(' ');
                }
                first = false;
                fmt_num(&mut out, v);
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TWO_JOINT: &str = "HIERARCHY
ROOT Hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Spine
  {
    OFFSET 0 10 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 5 0
    }
  }
}
MOTION
Frames: 3
Frame Time: 0.033333
0 90 0 0 0 0 0 0 0
1 90 0 0 0 0 0 0 0
3 90 0 0 0 0 0 0 0
";

    #[test]
    fn parses_identity_clip() {
        let clip = parse_bvh::<f64>(TWO_JOINT).unwrap();
        assert_eq!(clip.len(), 3);
        assert_eq!(clip.fps, 30.0);
        assert_eq!(clip.skeleton.joint_count(), 2);
        assert_eq!(clip.skeleton.end_sites()[0].name, "Spine_End");
        for f in &clip.frames {
            for q in &f.rotations {
                assert_eq!(*q, Quaternion::identity());
            }
        }
        assert_eq!(clip.root_origin, Vec3::new(0.0, 90.0, 0.0));
        assert_eq!(clip.frames[2].root_displacement, Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn zxy_euler_converts() {
        let text = TWO_JOINT.replace("0 90 0 0 0 0 0 0 0\n1", "0 90 0 90 0 0 0 0 0\n1");
        let clip = parse_bvh::<f64>(&text).unwrap();
        // independent oracle: quarter turn about z
        let h = std::f64::consts::FRAC_PI_4;
        let q = clip.frames[0].rotations[0];
        assert_relative_eq!(q.w, h.cos(), epsilon = 1e-6);
        assert_relative_eq!(q.z, h.sin(), epsilon = 1e-6);
        assert_relative_eq!(q.x, 0.0, epsilon = 1e-6);
        assert_relative_eq!(q.y, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = TWO_JOINT.replace("1 90 0 0 0 0 0 0 0", "1 90 0 0 abc 0 0 0 0");
        match parse_bvh::<f64>(&bad) {
            Err(Error::Bvh { line, .. }) => assert_eq!(line, 20),
            other => panic!("unexpected {other:?}"),
        }
        let short = TWO_JOINT.replace("3 90 0 0 0 0 0 0 0", "3 90 0 0 0 0 0 0");
        assert!(matches!(parse_bvh::<f64>(&short), Err(Error::Bvh { line: 21, .. })));
        let missing = TWO_JOINT.replace("Frames: 3", "Frames: 4");
        assert!(matches!(parse_bvh::<f64>(&missing), Err(Error::Bvh { .. })));
        let header = TWO_JOINT.replace("OFFSET 0 10 0", "OFFSET 0 x 0");
        assert!(matches!(parse_bvh::<f64>(&header), Err(Error::Bvh { line: 8, .. })));
        assert!(parse_bvh::<f64>("").is_err());
    }

    #[test]
    fn writes_zero_frames_and_identity() {
        let mut clip = parse_bvh::<f64>(TWO_JOINT).unwrap();
        clip.frames.truncate(1);
        let text = write_bvh(&clip);
        assert!(text.contains("Frame Time: 0.033333"));
        let last = text.lines().last().unwrap();
        assert_eq!(last, "0.000000 90.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000 0.000000");
        clip.frames.clear();
        let text = write_bvh(&clip);
        assert!(text.contains("Frames: 0\n"));
        let back = parse_bvh::<f64>(&text).unwrap();
        assert!(back.is_empty());
    }

    fn orders() -> Vec<[usize; 3]> {
        vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
    }

    proptest! {
        #[test]
        fn euler_roundtrip_all_orders(a in -179.0f64..179.0, b in -89.0f64..89.0, c in -179.0f64..179.0) {
            for axes in orders() {
                let q: Quaternion<f64> = euler_to_quat(axes, [a, b, c]);
                let e = quat_to_euler(q, axes);
                prop_assert!((e[0] - a).abs() < 1e-7 && (e[1] - b).abs() < 1e-7 && (e[2] - c).abs() < 1e-7,
                    "{:?}: {:?} vs {:?}", axes, e, [a, b, c]);
            }
        }

        #[test]
        fn gimbal_lock_still_same_rotation(a in -179.0f64..179.0, c in -179.0f64..179.0) {
            for axes in orders() {
                let q: Quaternion<f64> = euler_to_quat(axes, [a, 90.0, c]);
                let back: Quaternion<f64> = euler_to_quat(axes, quat_to_euler(q, axes));
                prop_assert!(crate::quat::quat_log_distance_sq(q, back).unwrap() < 1e-12);
            }
        }
    }
}
