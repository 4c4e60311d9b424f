//! Lloyd's k-means with k-means++ seeding, used to derive class labels
//! for unlabeled binary datasets.
//!
//! Distances are squared Euclidean on the raw 0/1 features, which on
//! binary data coincides with Hamming distance against binary points;
//! centroids are real-valued means.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KMeansConfig {
    /// Cluster count, which becomes the class count C.
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop when the inertia improvement falls below this.
    pub tol: f64,
    /// Independent k-means++ runs; the lowest-inertia run wins.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 2,
            max_iters: 100,
            seed: 0,
            tol: 1e-6,
            restarts: 8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KMeansResult {
    /// k centroids of width m, real-valued.
    pub centroids: Vec<Vec<f64>>,
    /// Per-record cluster index, in record order.
    pub assignments: Vec<usize>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
    /// Inertia after each Lloyd iteration, non-increasing.
    pub inertia_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by squared Euclidean distance, ties to the lowest
/// index.
pub fn assign(centroids: &[Vec<f64>], x: &BitVector) -> Result<usize> {
    if centroids.is_empty() {
        return Err(Error::Domain("no centroids".into()));
    }
    if centroids[0].len() != x.width() {
        return Err(Error::Schema(format!(
            "centroid width {} does not match vector width {}",
            centroids[0].len(),
            x.width()
        )));
    }
    Ok(assign_dense(centroids, &x.to_dense()))
}

fn assign_dense(centroids: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(&centroids[0], x);
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(c, x);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Run Lloyd's algorithm and return centroids, assignments and the
/// inertia trace. Deterministic under the config seed.
pub fn kmeans_label(data: &Dataset, cfg: &KMeansConfig) -> Result<KMeansResult> {
    if cfg.k < 1 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    if cfg.k > data.len() {
        return Err(Error::Domain(format!(
            "k = {} exceeds record count {}",
            cfg.k,
            data.len()
        )));
    }
    let dense: Vec<Vec<f64>> = data.records().iter().map(|r| r.to_dense()).collect();
    let restarts = cfg.restarts.max(1);
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts {
        let seed = crate::seeding::child_seed(cfg.seed, "kmeans-restart", r as u64);
        let run = lloyd_run(&dense, cfg, seed);
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// One seeded k-means++ Lloyd run over pre-densified records.
fn lloyd_run(dense: &[Vec<f64>], cfg: &KMeansConfig, seed: u64) -> KMeansResult {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(dense, cfg.k, &mut rng);

    let mut assignments = vec![0usize; dense.len()];
    let mut inertia_trace = Vec::new();
    let mut prev_inertia = f64::INFINITY;

    for _ in 0..cfg.max_iters {
        // assignment step: centroids are read-only, records independent
        let assigned: Vec<(usize, f64)> = exec::map_slice(dense, |x| {
            let j = assign_dense(&centroids, x);
            (j, sq_dist(&centroids[j], x))
        });
        let mut inertia = 0.0;
        for (i, &(j, d)) in assigned.iter().enumerate() {
            assignments[i] = j;
            inertia += d;
        }

        // update step
        let mut sums = vec![vec![0.0; dense[0].len()]; cfg.k];
        let mut counts = vec![0usize; cfg.k];
        for (x, &(j, _)) in dense.iter().zip(&assigned) {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..cfg.k {
            if counts[j] > 0 {
                for s in sums[j].iter_mut() {
                    *s /= counts[j] as f64;
                }
                centroids[j] = std::mem::take(&mut sums[j]);
            } else {
                // empty cluster: seize the point currently farthest from
                // its centroid so k stays fixed
                let far = assigned
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                    .map(|(i, _)| i)
                    .unwrap();
                centroids[j] = dense[far].clone();
            }
        }

        inertia_trace.push(inertia);
        if prev_inertia - inertia < cfg.tol {
            break;
        }
        prev_inertia = inertia;
    }

    // final assignment against the last centroid update
    let assigned: Vec<(usize, f64)> = exec::map_slice(dense, |x| {
        let j = assign_dense(&centroids, x);
        (j, sq_dist(&centroids[j], x))
    });
    let mut inertia = 0.0;
    for (i, &(j, d)) in assigned.iter().enumerate() {
        assignments[i] = j;
        inertia += d;
    }

    KMeansResult {
        centroids,
        assignments,
        inertia,
        inertia_trace,
    }
}

/// k-means++ seeding: first centroid uniform, each next weighted by
/// squared distance to the nearest chosen centroid.
fn plus_plus_init(dense: &[Vec<f64>], k: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
    let n = dense.len();
    let first = rand::Rng::gen_range(rng, 0..n);
    let mut centroids = vec![dense[first].clone()];
    let mut min_d: Vec<f64> = dense.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = min_d.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a centroid
            rand::Rng::gen_range(rng, 0..n)
        } else {
            WeightedIndex::new(&min_d).unwrap().sample(rng)
        };
        centroids.push(dense[next].clone());
        for (d, x) in min_d.iter_mut().zip(dense) {
            let nd = sq_dist(x, centroids.last().unwrap());
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Schema;

    fn schema(width: usize) -> Schema {
        Schema {
            width,
            classes: 0,
            name: "test".into(),
        }
    }

    fn bv(s: &str) -> BitVector {
        BitVector::from_bit_str(s).unwrap()
    }

    #[test]
    fn separated_duplicates_form_pure_clusters() {
        let mut records = Vec::new();
        for _ in 0..5 {
            records.push(bv("0000"));
        }
        for _ in 0..5 {
            records.push(bv("1111"));
        }
        let d = Dataset::new(records, schema(4)).unwrap();
        let cfg = KMeansConfig {
            k: 2,
            seed: 1,
            ..Default::default()
        };
        let res = kmeans_label(&d, &cfg).unwrap();
        assert!(res.inertia.abs() < 1e-12);
        assert_eq!(res.assignments[..5], [res.assignments[0]; 5]);
        assert_eq!(res.assignments[5..], [res.assignments[5]; 5]);
        assert_ne!(res.assignments[0], res.assignments[5]);
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let d = Dataset::new(vec![bv("0001"), bv("0010"), bv("0100")], schema(4)).unwrap();
        let cfg = KMeansConfig {
            k: 3,
            seed: 2,
            ..Default::default()
        };
        let res = kmeans_label(&d, &cfg).unwrap();
        assert!(res.inertia.abs() < 1e-12);
    }

    #[test]
    fn k_larger_than_n_is_domain_error() {
        let d = Dataset::new(vec![bv("0001")], schema(4)).unwrap();
        let cfg = KMeansConfig {
            k: 2,
            ..Default::default()
        };
        assert!(matches!(kmeans_label(&d, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn inertia_trace_is_non_increasing() {
        use rand::SeedableRng;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let records: Vec<BitVector> = (0..200)
            .map(|_| crate::bits::random_vec(32, &mut rng))
            .collect();
        let d = Dataset::new(records, schema(32)).unwrap();
        for seed in 0..10 {
            let cfg = KMeansConfig {
                k: 4,
                seed,
                ..Default::default()
            };
            let res = kmeans_label(&d, &cfg).unwrap();
            for w in res.inertia_trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-9,
                    "inertia increased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn final_assignments_are_nearest_centroids() {
        use rand::SeedableRng;
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let records: Vec<BitVector> = (0..100)
            .map(|_| crate::bits::random_vec(24, &mut rng))
            .collect();
        let d = Dataset::new(records, schema(24)).unwrap();
        let cfg = KMeansConfig {
            k: 5,
            seed: 3,
            ..Default::default()
        };
        let res = kmeans_label(&d, &cfg).unwrap();
        for (i, r) in d.records().iter().enumerate() {
            assert_eq!(res.assignments[i], assign(&res.centroids, r).unwrap());
        }
    }

    #[test]
    fn assign_matches_brute_force_and_tie_rule() {
        // equidistant point between two centroids goes to the lower index
        let centroids = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let x = BitVector::from_bools(&[true, false]);
        assert_eq!(assign(&centroids, &x).unwrap(), 0);
        // exact centroid match
        let y = BitVector::from_bools(&[true, true]);
        assert_eq!(assign(&centroids, &y).unwrap(), 1);

        use rand::SeedableRng;
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let cents: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                (0..16)
                    .map(|_| rand::Rng::gen_range(&mut rng, 0.0..1.0))
                    .collect()
            })
            .collect();
        for _ in 0..100 {
            let x = crate::bits::random_vec(16, &mut rng);
            let got = assign(&cents, &x).unwrap();
            // naive full scan
            let dense = x.to_dense();
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in cents.iter().enumerate() {
                let d = sq_dist(c, &dense);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            assert_eq!(got, best);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        use rand::SeedableRng;
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let records: Vec<BitVector> = (0..150)
            .map(|_| crate::bits::random_vec(20, &mut rng))
            .collect();
        let d = Dataset::new(records, schema(20)).unwrap();
        let cfg = KMeansConfig {
            k: 4,
            seed: 42,
            ..Default::default()
        };
        let a = kmeans_label(&d, &cfg).unwrap();
        let b = kmeans_label(&d, &cfg).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.inertia, b.inertia);
    }
}
