use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Inertia after every update step.
    pub inertia: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the closest centroid; ties go to the lowest index.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn inertia(points: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points.iter().zip(assignments).map(|(p, &a)| squared_distance(p, &centroids[a])).sum()
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        // all remaining points coincide with a centroid: take the first unused
        let pick = rng::sample_index(&d2, rng).unwrap_or(0);
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm with seeded k-means++ initialisation. Stops when an
/// assignment pass changes nothing or after `max_iters` update steps. A
/// cluster left empty is re-seeded with the point farthest from its own
/// centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::TooFew(format!("{} points for K = {k}", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("points must be finite and share a dimension".into()));
    }
    run(points, k, &mut rng::seeded(seed), max_iters)
}

fn run(points: &[Vec<f64>], k: usize, r: &mut rng::Rng, max_iters: usize) -> Result<KMeans> {
    let mut centroids = plus_plus(points, k, r);
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    reseed_empty(points, &mut centroids, &mut assignments);
    loop {
        update(points, &mut centroids, &assignments);
        trace.push(inertia(points, &centroids, &assignments));
        iterations += 1;
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        reseed_empty(points, &mut centroids, &mut next);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        if iterations >= max_iters {
            break;
        }
    }
    Ok(KMeans { centroids, assignments, inertia: trace, iterations, converged })
}

/// Best of `restarts` runs (lowest final inertia, earliest on ties); run `r`
/// uses the stream `derived(seed, r)`, run 0 is [`kmeans`] itself.
pub fn kmeans_restarts(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize, restarts: usize) -> Result<KMeans> {
    let mut best = kmeans(points, k, seed, max_iters)?;
    for r in 1..restarts as u64 {
        let run = run(points, k, &mut rng::derived(seed, r), max_iters)?;
        if run.inertia.last() < best.inertia.last() {
            best = run;
        }
    }
    Ok(best)
}

fn reseed_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignments: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        assignments.iter().for_each(|&a| counts[a] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        let far = (0..points.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .map(|i| (i, squared_distance(&points[i], &centroids[assignments[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((i, _)) = far else { return };
        centroids[empty] = points[i].clone();
        assignments[i] = empty;
    }
}

fn update(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignments: &[usize]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
        if n > 0 {
            *c = s.into_iter().map(|v| v / n as f64).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut r = rng::seeded(seed);
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let c = centers[i % 3];
            pts.push(vec![c[0] + r.random_range(-1.0..1.0), c[1] + r.random_range(-1.0..1.0)]);
            labels.push(i % 3);
        }
        (pts, labels)
    }

    #[test]
    fn recovers_separated_blobs() {
        for seed in 0..10 {
            let (pts, labels) = blobs(seed);
            let km = kmeans(&pts, 3, seed, 100).unwrap();
            assert!(km.converged);
            // same partition up to relabelling
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    assert_eq!(labels[i] == labels[j], km.assignments[i] == km.assignments[j]);
                }
            }
        }
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let (pts, _) = blobs(1);
        let km = kmeans(&pts, 1, 0, 10).unwrap();
        for d in 0..2 {
            let mean = pts.iter().map(|p| p[d]).sum::<f64>() / pts.len() as f64;
            assert!((km.centroids[0][d] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_go_to_lowest_id() {
        assert_eq!(nearest(&[0.0], &[vec![1.0], vec![-1.0]]).0, 0);
    }

    #[test]
    fn duplicates_still_fill_clusters() {
        let pts = vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0]];
        let km = kmeans(&pts, 3, 0, 10).unwrap();
        let mut counts = [0; 3];
        km.assignments.iter().for_each(|&a| counts[a] += 1);
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn too_few_points() {
        assert!(kmeans(&[vec![0.0]], 2, 0, 10).is_err());
    }

    proptest! {
        #[test]
        fn inertia_never_increases(seed in 0u64..200, k in 1usize..8) {
            let mut r = rng::seeded(seed);
            let pts: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
            let a = kmeans(&pts, k, seed, 50).unwrap();
            for w in a.inertia.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            prop_assert_eq!(a, kmeans(&pts, k, seed, 50).unwrap());
        }
    }
}
