//! Spherical k-means: unit vectors, cosine distance `1 - x·c`, centroids
//! renormalized after every update.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::seed::rng_for;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Total cosine distance after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }

    /// Point indices of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centroids.len()];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - dot(a, b)).max(0.0)
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = dot(&v, &v).sqrt();
    (n > 0.0).then(|| {
        v.iter_mut().for_each(|x| *x /= n);
        v
    })
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut nearest: Vec<f64> = points.iter().map(|p| distance(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let weights: Vec<f64> = nearest.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && r < *w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            // guard against the rounding tail landing on a zero-weight point
            if weights[pick] == 0.0 {
                pick = weights.iter().rposition(|&w| w > 0.0).expect("total > 0");
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(pick);
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(distance(p, &points[pick]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Lloyd iterations from k-means++ seeding. Stops after `max_iters`
/// assignment steps or when assignments stop changing. An emptied cluster
/// takes the point farthest from its centroid among clusters with more than
/// one member. Ties in assignment go to the lower cluster index.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult, CorpusError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(CorpusError::InvalidClusters { k, n });
    }
    let mut rng = rng_for(seed, "kmeans");
    let mut centroids = plus_plus(points, k, &mut rng);
    let mut assignments: Vec<usize> = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        let mut next: Vec<usize> = points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_dot = f64::NEG_INFINITY;
                for (j, c) in centroids.iter().enumerate() {
                    let d = dot(p, c);
                    if d > best_dot {
                        best = j;
                        best_dot = d;
                    }
                }
                best
            })
            .collect();
        let mut sizes = vec![0usize; k];
        next.iter().for_each(|&c| sizes[c] += 1);
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[next[i]] > 1)
                .max_by(|&a, &b| {
                    distance(&points[a], &centroids[next[a]])
                        .total_cmp(&distance(&points[b], &centroids[next[b]]))
                        .then(b.cmp(&a))
                })
                .expect("k <= n leaves a cluster with two members");
            sizes[next[far]] -= 1;
            sizes[empty] = 1;
            next[far] = empty;
            centroids[empty] = points[far].clone();
        }
        history.push(points.iter().zip(&next).map(|(p, &c)| distance(p, &centroids[c])).sum());
        let stable = next == assignments;
        assignments = next;
        if stable {
            break;
        }
        for (j, c) in centroids.iter_mut().enumerate() {
            let mut sum = vec![0.0; c.len()];
            for (p, _) in points.iter().zip(&assignments).filter(|(_, &a)| a == j) {
                sum.iter_mut().zip(p).for_each(|(s, x)| *s += x);
            }
            if let Some(u) = normalized(sum) {
                *c = u;
            }
        }
    }
    Ok(KMeansResult {
        assignments,
        centroids,
        inertia_history: history,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        normalized(v).unwrap()
    }

    fn blobs(rng: &mut ChaCha8Rng, per: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let centers = [vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]];
        let mut pts = vec![];
        let mut labels = vec![];
        for (l, c) in centers.iter().enumerate() {
            for _ in 0..per {
                pts.push(unit(c.iter().map(|x| x + rng.gen_range(-0.1..0.1)).collect()));
                labels.push(l);
            }
        }
        (pts, labels)
    }

    /// Best spherical inertia over every split into two non-empty parts.
    fn exhaustive_two_partition(points: &[Vec<f64>]) -> (f64, Vec<usize>) {
        let n = points.len();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << n) - 1 {
            let labels: Vec<usize> = (0..n).map(|i| (mask >> i & 1) as usize).collect();
            let cost: f64 = (0..2)
                .map(|c| {
                    let mut sum = vec![0.0; points[0].len()];
                    for (p, _) in points.iter().zip(&labels).filter(|(_, &l)| l == c) {
                        sum.iter_mut().zip(p).for_each(|(s, x)| *s += x);
                    }
                    let centroid = normalized(sum).unwrap();
                    points
                        .iter()
                        .zip(&labels)
                        .filter(|(_, &l)| l == c)
                        .map(|(p, _)| distance(p, &centroid))
                        .sum::<f64>()
                })
                .sum();
            if cost < best.0 {
                best = (cost, labels);
            }
        }
        best
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x == &a[0]) == (y == &b[0]))
    }

    #[test]
    fn two_blobs_match_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..5 {
            let (pts, labels) = blobs(&mut rng, 6);
            let r = kmeans(&pts, 2, trial, 50).unwrap();
            let (best_cost, best_labels) = exhaustive_two_partition(&pts);
            assert!(same_partition(&r.assignments, &labels));
            assert!(same_partition(&best_labels, &labels));
            assert!((r.inertia() - best_cost).abs() < 1e-12);
        }
    }

    #[test]
    fn one_cluster_per_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..7)
            .map(|_| unit((0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let r = kmeans(&pts, 7, 3, 20).unwrap();
        let mut seen = r.assignments.clone();
        seen.sort();
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
        assert!(r.inertia().abs() < 1e-12);
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let p = unit(vec![1.0, 2.0, 3.0]);
        let pts = vec![p.clone(), p.clone(), p.clone(), unit(vec![3.0, 2.0, 1.0])];
        let r = kmeans(&pts, 3, 0, 10).unwrap();
        assert!(r.members().iter().all(|m| !m.is_empty()));
    }

    #[test]
    fn inertia_never_increases_and_seed_determines_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| unit((0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let r = kmeans(&pts, 6, 4, 100).unwrap();
        for w in r.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", r.inertia_history);
        }
        assert_eq!(r, kmeans(&pts, 6, 4, 100).unwrap());
        assert!(kmeans(&pts, 0, 4, 10).is_err());
        assert!(kmeans(&pts[..3], 4, 4, 10).is_err());
    }
}
