//! Distance-stratified AUC machinery: rank-based AUC, Hamming distance
//! histograms, synthetic non-member generation, and the
//! confidence-vs-distance profile.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use itertools::Itertools;
use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::mlp::MlpModel;
use crate::seeding;

/// Rank-based AUC with ties counted half, equal to the probability that
/// a random positive outranks a random negative (ties as 1/2) and to
/// the trapezoidal area under the ROC curve.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Domain("auc requires non-empty score lists".into()));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = all.len();
    // average ranks over exact-tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let np = pos.len() as f64;
    let nn = neg.len() as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    Ok(u / (np * nn))
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Domain("spearman requires equal-length inputs".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Domain("spearman requires at least 2 points".into()));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Domain("spearman undefined for constant input".into()));
    }
    Ok(cov / (vx * vy).sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            out[k] = avg;
        }
        i = j;
    }
    out
}

/// Non-member confidences grouped by their min-distance to the training
/// set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceBucket {
    pub distance: usize,
    pub confidences: Vec<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BucketAuc {
    pub distance: usize,
    /// None when the bucket is below the min_bucket floor.
    pub auc: Option<f64>,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StratifiedAucReport {
    pub member_confidences: Vec<f64>,
    pub buckets: Vec<DistanceBucket>,
    pub per_bucket_auc: Vec<BucketAuc>,
    pub iterations: usize,
}

impl StratifiedAucReport {
    /// CSV rows: distance, n, auc (empty when below the floor).
    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("distance,n,auc\n");
        for b in &self.per_bucket_auc {
            match b.auc {
                Some(a) => out.push_str(&format!("{},{},{}\n", b.distance, b.n, a)),
                None => out.push_str(&format!("{},{},\n", b.distance, b.n)),
            }
        }
        let mut f =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// (distance, auc) pairs for buckets that met the floor.
    pub fn scored_buckets(&self) -> Vec<(usize, f64)> {
        self.per_bucket_auc
            .iter()
            .filter_map(|b| b.auc.map(|a| (b.distance, a)))
            .collect()
    }
}

/// Pools member confidences and per-distance non-member confidences
/// across iterations; the AUC is computed once on the aggregate.
#[derive(Clone, Debug, Default)]
pub struct StratifiedPool {
    member_confidences: Vec<f64>,
    buckets: BTreeMap<usize, Vec<f64>>,
    iterations: usize,
}

impl StratifiedPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_iteration(
        &mut self,
        member_confidences: impl IntoIterator<Item = f64>,
        nonmembers: impl IntoIterator<Item = (usize, f64)>,
    ) {
        self.member_confidences.extend(member_confidences);
        for (d, c) in nonmembers {
            self.buckets.entry(d).or_default().push(c);
        }
        self.iterations += 1;
    }

    pub fn finalize(self, min_bucket: usize) -> Result<StratifiedAucReport> {
        if self.member_confidences.is_empty() {
            return Err(Error::Domain("no member confidences pooled".into()));
        }
        let mut buckets = Vec::new();
        let mut per_bucket_auc = Vec::new();
        for (distance, confidences) in self.buckets {
            let n = confidences.len();
            let bucket_auc = if n >= min_bucket {
                Some(auc(&self.member_confidences, &confidences)?)
            } else {
                None
            };
            per_bucket_auc.push(BucketAuc {
                distance,
                auc: bucket_auc,
                n,
            });
            buckets.push(DistanceBucket {
                distance,
                confidences,
                count: n,
            });
        }
        Ok(StratifiedAucReport {
            member_confidences: self.member_confidences,
            buckets,
            per_bucket_auc,
            iterations: self.iterations,
        })
    }
}

/// Histogram of min-distances of non-members from the training set.
/// Counts sum to the non-member count.
pub fn distance_histogram(nonmembers: &Dataset, train: &Dataset) -> Result<BTreeMap<usize, usize>> {
    let distances = train.distances_to(nonmembers.records())?;
    let mut hist = BTreeMap::new();
    for d in distances {
        *hist.entry(d).or_insert(0usize) += 1;
    }
    Ok(hist)
}

/// Member confidences vs non-member confidences bucketed by distance to
/// the training set; one AUC per bucket of size ≥ `min_bucket`.
pub fn distance_stratified_auc(
    model: &MlpModel,
    members: &Dataset,
    nonmembers: &Dataset,
    train: &Dataset,
    min_bucket: usize,
) -> Result<StratifiedAucReport> {
    let member_conf = model.max_confidences(members.records())?;
    let nonmember_conf = model.max_confidences(nonmembers.records())?;
    let distances = train.distances_to(nonmembers.records())?;
    let mut pool = StratifiedPool::new();
    pool.add_iteration(member_conf, distances.into_iter().zip(nonmember_conf));
    pool.finalize(min_bucket)
}

/// Synthetic non-members generated by bit-flipping training members,
/// bucketed by their recomputed min-distance to the training set.
#[derive(Debug)]
pub struct SyntheticNeighbors {
    pub buckets: BTreeMap<usize, Dataset>,
    /// Per-(member, nominal distance) generation failures.
    pub warnings: Vec<String>,
}

/// For `member_sample` members and each nominal distance, flip that many
/// uniformly chosen bits `variants_per_distance` times, discarding
/// collisions with the training set. Vectors are bucketed by their
/// actual distance-to-dataset, which can be lower than the nominal flip
/// count when another member is closer.
pub fn generate_synthetic_neighbors(
    train: &Dataset,
    member_sample: usize,
    distances: &[usize],
    variants_per_distance: usize,
    seed: u64,
) -> Result<SyntheticNeighbors> {
    if train.is_empty() {
        return Err(Error::Domain("training set is empty".into()));
    }
    if member_sample == 0 || member_sample > train.len() {
        return Err(Error::Domain(format!(
            "member_sample {} out of range 1..={}",
            member_sample,
            train.len()
        )));
    }
    if let Some(&d) = distances.iter().find(|&&d| d == 0 || d > train.width()) {
        return Err(Error::Domain(format!(
            "nominal distance {d} out of range 1..={}",
            train.width()
        )));
    }
    let index = train.index();
    let mut pick_rng = ChaCha20Rng::seed_from_u64(seeding::stage_seed(seed, "synthetic-members"));
    let picked = index_sample(&mut pick_rng, train.len(), member_sample).into_vec();

    struct MemberOutput {
        vectors: Vec<BitVector>,
        warnings: Vec<String>,
    }

    let outputs: Vec<MemberOutput> = exec::map_indexed(picked.len(), |i| {
        let member = train.record(picked[i]);
        let mut rng =
            ChaCha20Rng::seed_from_u64(seeding::child_seed(seed, "synthetic-neighbors", i as u64));
        let mut vectors = Vec::new();
        let mut warnings = Vec::new();
        for &d in distances {
            let mut produced = 0;
            let mut attempts = 0;
            // collisions are resampled; the attempt budget scales with
            // the request so dense small spaces fail loudly, not slowly
            let budget = variants_per_distance * crate::dataset::NEIGHBOR_RESAMPLE_CAP;
            while produced < variants_per_distance && attempts < budget {
                attempts += 1;
                let candidate = member.random_neighbor(d, &mut rng);
                if !index.contains(&candidate) {
                    vectors.push(candidate);
                    produced += 1;
                }
            }
            if produced < variants_per_distance {
                warnings.push(format!(
                    "member {}: only {produced}/{variants_per_distance} variants at nominal distance {d}",
                    picked[i]
                ));
            }
        }
        MemberOutput { vectors, warnings }
    });

    let mut all_vectors = Vec::new();
    let mut warnings = Vec::new();
    for o in outputs {
        all_vectors.extend(o.vectors);
        warnings.extend(o.warnings);
    }
    // bucket by actual min-distance
    let actual = train.distances_to(&all_vectors)?;
    let mut grouped: BTreeMap<usize, Vec<BitVector>> = BTreeMap::new();
    for (v, d) in all_vectors.into_iter().zip(actual) {
        grouped.entry(d).or_default().push(v);
    }
    let mut buckets = BTreeMap::new();
    for (d, vecs) in grouped {
        debug_assert!(d >= 1, "generated vector collides with the training set");
        buckets.insert(d, Dataset::new(vecs, train.schema().clone())?);
    }
    Ok(SyntheticNeighbors { buckets, warnings })
}

/// One row of the confidence-vs-distance profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileRow {
    pub distance: usize,
    /// Fraction of sampled completions whose max confidence strictly
    /// exceeds the target's own.
    pub fraction_above: f64,
    pub n: usize,
}

/// Sampling floor: enumerate all C(m', d) flip subsets when that count
/// is at most this, otherwise draw this many uniform samples.
pub const PROFILE_EXHAUSTIVE_CAP: usize = 1024;

/// For each target and each d in 1..=m', compare the confidence of
/// completions at exactly Hamming distance d (within the unknown
/// indices) against the target's own confidence.
pub fn confidence_vs_distance_profile(
    model: &MlpModel,
    targets: &Dataset,
    unknown: &[usize],
    seed: u64,
    samples_per_distance: usize,
) -> Result<Vec<ProfileRow>> {
    if targets.is_empty() {
        return Err(Error::Domain("no targets".into()));
    }
    if unknown.is_empty() {
        return Err(Error::Domain("unknown part must be non-empty".into()));
    }
    let m_prime = unknown.len();
    let per_target: Vec<Vec<(usize, usize)>> = exec::map_indexed(targets.len(), |i| {
        let target = targets.record(i);
        let own_conf = model
            .forward_dense(&target.to_dense())
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut rng =
            ChaCha20Rng::seed_from_u64(seeding::child_seed(seed, "conf-profile", i as u64));
        let mut rows = Vec::with_capacity(m_prime);
        for d in 1..=m_prime {
            let mut above = 0usize;
            let mut n = 0usize;
            let exhaustive = binomial(m_prime, d) <= samples_per_distance as u128;
            let mut eval = |flip: &[usize]| {
                let flipped: Vec<usize> = flip.iter().map(|&j| unknown[j]).collect();
                let v = target.with_flipped(&flipped);
                let conf = model
                    .forward_dense(&v.to_dense())
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                if conf > own_conf {
                    above += 1;
                }
                n += 1;
            };
            if exhaustive {
                for combo in (0..m_prime).combinations(d) {
                    eval(&combo);
                }
            } else {
                for _ in 0..samples_per_distance {
                    let subset = index_sample(&mut rng, m_prime, d).into_vec();
                    eval(&subset);
                }
            }
            rows.push((above, n));
        }
        rows
    });

    let mut out = Vec::with_capacity(m_prime);
    for (di, d) in (1..=m_prime).enumerate() {
        let mut above = 0usize;
        let mut n = 0usize;
        for rows in &per_target {
            above += rows[di].0;
            n += rows[di].1;
        }
        out.push(ProfileRow {
            distance: d,
            fraction_above: above as f64 / n as f64,
            n,
        });
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}
