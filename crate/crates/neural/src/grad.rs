//! Forward/backward pairs for the scalar operations the network and losses
//! are built from. Quaternions are `[w, x, y, z]`.
//!
//! Every `*_back` function takes the upstream gradient of the output and
//! returns gradients of the inputs.

pub type Q = [f64; 4];
pub type V = [f64; 3];

pub fn conj(q: Q) -> Q {
    [q[0], -q[1], -q[2], -q[3]]
}

pub fn qmul(a: Q, b: Q) -> Q {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

/// Gradients of `a * b` with respect to `a` and `b`.
pub fn qmul_back(a: Q, b: Q, g: Q) -> (Q, Q) {
    (qmul(g, conj(b)), qmul(conj(a), g))
}

pub fn dot4(a: Q, b: Q) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

pub fn dot3(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: V, b: V) -> V {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn add3(a: V, b: V) -> V {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale3(a: V, s: f64) -> V {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `v + 2w (u x v) + 2 u x (u x v)`, the unit-quaternion rotation formula
/// (evaluated as written for any `q`).
pub fn rotate(q: Q, v: V) -> V {
    let u = [q[1], q[2], q[3]];
    let t = scale3(cross(u, v), 2.0);
    add3(add3(v, scale3(t, q[0])), cross(u, t))
}

pub fn rotate_back(q: Q, v: V, g: V) -> (Q, V) {
    let w = q[0];
    let u = [q[1], q[2], q[3]];
    let ug = cross(u, g);
    let gv = add3(add3(g, scale3(ug, -2.0 * w)), scale3(cross(u, ug), 2.0));
    let gw = 2.0 * dot3(g, cross(u, v));
    let uv = dot3(u, v);
    let gu_dot = dot3(g, u);
    let gv_dot = dot3(g, v);
    let vg = cross(v, g);
    let mut gu = [0.0; 3];
    for k in 0..3 {
        gu[k] = 2.0 * w * vg[k] + 2.0 * (g[k] * uv + v[k] * gu_dot - 2.0 * gv_dot * u[k]);
    }
    ([gw, gu[0], gu[1], gu[2]], gv)
}

/// Unit quaternion and the input norm.
pub fn normalize(q: Q) -> (Q, f64) {
    let n = dot4(q, q).sqrt();
    if n > 1e-12 {
        ([q[0] / n, q[1] / n, q[2] / n, q[3] / n], n)
    } else {
        ([1.0, 0.0, 0.0, 0.0], n)
    }
}

/// Backward of [`normalize`] given its output and the input norm.
pub fn normalize_back(out: Q, norm: f64, g: Q) -> Q {
    if norm <= 1e-12 {
        return [0.0; 4];
    }
    let d = dot4(out, g);
    [
        (g[0] - out[0] * d) / norm,
        (g[1] - out[1] * d) / norm,
        (g[2] - out[2] * d) / norm,
        (g[3] - out[3] * d) / norm,
    ]
}

/// `|log(conj(a) b)|^2` on the `w >= 0` hemisphere, i.e. `(theta / 2)^2`,
/// and its gradient with respect to `a`.
pub fn geodesic_sq(a: Q, b: Q) -> (f64, Q) {
    let r = qmul(conj(a), b);
    let s = (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt();
    let (w, sign) = if r[0] < 0.0 { (-r[0], -1.0) } else { (r[0], 1.0) };
    let phi = s.atan2(w);
    let den = s * s + w * w;
    // 2 phi dphi/dv = 2 (phi / s) (w / den) v, with phi / s -> 1 / w as s -> 0
    let phi_over_s = if s > 1e-9 { phi / s } else { 1.0 / w.max(1e-300) };
    let cv = 2.0 * phi_over_s * w / den;
    let gr = [-2.0 * phi * s / den * sign, cv * r[1], cv * r[2], cv * r[3]];
    // r = R(b) conj(a)  =>  grad conj(a) = gr * conj(b)
    let gca = qmul(gr, conj(b));
    (phi * phi, conj(gca))
}

/// Cached intermediates of [`slerp`].
#[derive(Debug, Clone, Copy)]
pub struct SlerpCache {
    sign: f64,
    linear: bool,
    d: f64,
    theta: f64,
    wa: f64,
    wb: f64,
    norm: f64,
}

/// Shortest-arc interpolation, matching the engine's time-scaling.
pub fn slerp(p: Q, q: Q, t: f64) -> (Q, SlerpCache) {
    let mut d = dot4(p, q);
    let sign = if d < 0.0 { -1.0 } else { 1.0 };
    d *= sign;
    let b = [q[0] * sign, q[1] * sign, q[2] * sign, q[3] * sign];
    let linear = d > 1.0 - 1e-9;
    let (theta, wa, wb) = if linear {
        (0.0, 1.0 - t, t)
    } else {
        let theta = d.min(1.0).acos();
        let s = theta.sin();
        (theta, ((1.0 - t) * theta).sin() / s, (t * theta).sin() / s)
    };
    let v = [
        wa * p[0] + wb * b[0],
        wa * p[1] + wb * b[1],
        wa * p[2] + wb * b[2],
        wa * p[3] + wb * b[3],
    ];
    let (out, norm) = normalize(v);
    (out, SlerpCache { sign, linear, d, theta, wa, wb, norm })
}

pub fn slerp_back(p: Q, q: Q, t: f64, out: Q, c: &SlerpCache, g: Q) -> (Q, Q) {
    let b = [q[0] * c.sign, q[1] * c.sign, q[2] * c.sign, q[3] * c.sign];
    let gv = normalize_back(out, c.norm, g);
    let mut gp = [0.0; 4];
    let mut gb = [0.0; 4];
    for k in 0..4 {
        gp[k] = c.wa * gv[k];
        gb[k] = c.wb * gv[k];
    }
    if !c.linear {
        let s = c.theta.sin();
        let cs = c.theta.cos();
        let a1 = (1.0 - t) * c.theta;
        let a2 = t * c.theta;
        let dwa = ((1.0 - t) * a1.cos() * s - a1.sin() * cs) / (s * s);
        let dwb = (t * a2.cos() * s - a2.sin() * cs) / (s * s);
        let gtheta = dot4(gv, p) * dwa + dot4(gv, b) * dwb;
        let gd = -gtheta / (1.0 - c.d * c.d).sqrt();
        for k in 0..4 {
            gp[k] += gd * b[k];
            gb[k] += gd * p[k];
        }
    }
    (gp, [gb[0] * c.sign, gb[1] * c.sign, gb[2] * c.sign, gb[3] * c.sign])
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `y`, computed from the logit.
/// Returns the loss and its derivative with respect to `z`.
pub fn bce_logit(z: f64, y: f64) -> (f64, f64) {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    (softplus - y * z, sigmoid(z) - y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use choreo_core::quat::{quat_log_distance_sq, Quaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rq(rng: &mut ChaCha8Rng) -> Q {
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
    }

    fn rv(rng: &mut ChaCha8Rng) -> V {
        [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
    }

    fn fd4(f: impl Fn(Q) -> f64, x: Q) -> Q {
        let h = 1e-6;
        let mut g = [0.0; 4];
        for k in 0..4 {
            let mut a = x;
            let mut b = x;
            a[k] += h;
            b[k] -= h;
            g[k] = (f(a) - f(b)) / (2.0 * h);
        }
        g
    }

    fn fd3(f: impl Fn(V) -> f64, x: V) -> V {
        let h = 1e-6;
        let mut g = [0.0; 3];
        for k in 0..3 {
            let mut a = x;
            let mut b = x;
            a[k] += h;
            b[k] -= h;
            g[k] = (f(a) - f(b)) / (2.0 * h);
        }
        g
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol * (1.0 + y.abs()), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn qmul_matches_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = (rq(&mut rng), rq(&mut rng));
        let c = Quaternion::from_slice(&a) * Quaternion::from_slice(&b);
        close(&qmul(a, b), &c.to_array(), 1e-15);
    }

    #[test]
    fn rotate_matches_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = normalize(rq(&mut rng)).0;
        let v = rv(&mut rng);
        let core = Quaternion::from_slice(&q).rotate(choreo_core::quat::Vec3::from_slice(&v));
        close(&rotate(q, v), &core.to_array(), 1e-15);
    }

    #[test]
    fn geodesic_matches_core_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = normalize(rq(&mut rng)).0;
            let b = normalize(rq(&mut rng)).0;
            let core = quat_log_distance_sq(Quaternion::from_slice(&a), Quaternion::from_slice(&b)).unwrap();
            assert!((geodesic_sq(a, b).0 - core).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_passes_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let (a, b, g4) = (rq(&mut rng), rq(&mut rng), rq(&mut rng));
            let (ga, gb) = qmul_back(a, b, g4);
            close(&ga, &fd4(|x| dot4(qmul(x, b), g4), a), 1e-7);
            close(&gb, &fd4(|x| dot4(qmul(a, x), g4), b), 1e-7);

            let (v, g3) = (rv(&mut rng), rv(&mut rng));
            let (gq, gv) = rotate_back(a, v, g3);
            close(&gq, &fd4(|x| dot3(rotate(x, v), g3), a), 1e-7);
            close(&gv, &fd3(|x| dot3(rotate(a, x), g3), v), 1e-7);

            let (out, n) = normalize(a);
            close(&normalize_back(out, n, g4), &fd4(|x| dot4(normalize(x).0, g4), a), 1e-6);

            let bu = normalize(b).0;
            let au = normalize(a).0;
            close(&geodesic_sq(au, bu).1, &fd4(|x| geodesic_sq(x, bu).0, au), 1e-6);

            let t: f64 = rng.random_range(0.0..1.0);
            let (o, c) = slerp(au, bu, t);
            let (gp, gq) = slerp_back(au, bu, t, o, &c, g4);
            close(&gp, &fd4(|x| dot4(slerp(x, bu, t).0, g4), au), 1e-6);
            close(&gq, &fd4(|x| dot4(slerp(au, x, t).0, g4), bu), 1e-6);
        }
    }

    #[test]
    fn geodesic_gradient_near_identity_is_finite() {
        let a = normalize([1.0, 1e-12, 0.0, 0.0]).0;
        let (v, g) = geodesic_sq(a, [1.0, 0.0, 0.0, 0.0]);
        assert!(v < 1e-20 && g.iter().all(|x| x.is_finite() && x.abs() < 1e-9));
    }

    #[test]
    fn slerp_matches_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = normalize(rq(&mut rng)).0;
            let b = normalize(rq(&mut rng)).0;
            let t = rng.random_range(0.0..1.0);
            let core = Quaternion::from_slice(&a).slerp(Quaternion::from_slice(&b), t);
            close(&slerp(a, b, t).0, &core.to_array(), 1e-12);
        }
    }

    #[test]
    fn bce_is_stable_for_large_logits() {
        let (l, g) = bce_logit(800.0, 1.0);
        assert!(l.abs() < 1e-12 && g.abs() < 1e-12);
        let (l, _) = bce_logit(-800.0, 1.0);
        assert!((l - 800.0).abs() < 1e-9);
        assert!((bce_logit(0.0, 0.0).0 - 2f64.ln()).abs() < 1e-15);
    }
}
