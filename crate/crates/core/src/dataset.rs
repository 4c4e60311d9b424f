//! Datasets of binary feature vectors: CSV IO, splits, sampling, and the
//! minimum-distance scan.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::exec;

/// How many resample attempts before a neighbor draw gives up.
pub const NEIGHBOR_RESAMPLE_CAP: usize = 1000;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Schema {
    /// Feature count m.
    pub width: usize,
    /// Class count C (0 when unknown/unlabeled).
    pub classes: usize,
    pub name: String,
}

/// An ordered multiset of equal-width binary records, optionally labeled.
#[derive(Clone, Debug)]
pub struct Dataset {
    records: Vec<BitVector>,
    labels: Option<Vec<usize>>,
    schema: Schema,
}

impl Dataset {
    pub fn new(records: Vec<BitVector>, schema: Schema) -> Result<Self> {
        for r in &records {
            if r.width() != schema.width {
                return Err(Error::Schema(format!(
                    "record width {} does not match schema width {}",
                    r.width(),
                    schema.width
                )));
            }
        }
        Ok(Dataset {
            records,
            labels: None,
            schema,
        })
    }

    pub fn with_labels(records: Vec<BitVector>, labels: Vec<usize>, schema: Schema) -> Result<Self> {
        if labels.len() != records.len() {
            return Err(Error::Schema(format!(
                "{} labels for {} records",
                labels.len(),
                records.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= schema.classes) {
            return Err(Error::Schema(format!(
                "label {bad} out of range for {} classes",
                schema.classes
            )));
        }
        let mut d = Dataset::new(records, schema)?;
        d.labels = Some(labels);
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn width(&self) -> usize {
        self.schema.width
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn records(&self) -> &[BitVector] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &BitVector {
        &self.records[i]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[i])
    }

    /// Replace labels wholesale (used after clustering assigns classes).
    pub fn set_labels(&mut self, labels: Vec<usize>, classes: usize) -> Result<()> {
        if labels.len() != self.records.len() {
            return Err(Error::Schema(format!(
                "{} labels for {} records",
                labels.len(),
                self.records.len()
            )));
        }
        self.schema.classes = classes;
        self.labels = Some(labels);
        Ok(())
    }

    /// New dataset from record positions (multiset semantics: positions,
    /// not distinct values).
    pub fn subset(&self, positions: &[usize]) -> Dataset {
        let records = positions.iter().map(|&i| self.records[i].clone()).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| positions.iter().map(|&i| l[i]).collect());
        Dataset {
            records,
            labels,
            schema: self.schema.clone(),
        }
    }

    /// min over all members of the Hamming distance to `x`; 0 iff `x`
    /// is a member.
    pub fn distance_to(&self, x: &BitVector) -> Result<usize> {
        self.check_width(x)?;
        if self.records.is_empty() {
            return Err(Error::Domain("distance to empty dataset".into()));
        }
        Ok(self.distance_to_unchecked(x))
    }

    #[inline]
    pub fn distance_to_unchecked(&self, x: &BitVector) -> usize {
        self.records
            .iter()
            .map(|r| r.hamming_unchecked(x))
            .min()
            .unwrap()
    }

    /// Distance-to-dataset for a batch of queries (parallel over queries).
    pub fn distances_to(&self, queries: &[BitVector]) -> Result<Vec<usize>> {
        for q in queries {
            self.check_width(q)?;
        }
        if self.records.is_empty() {
            return Err(Error::Domain("distance to empty dataset".into()));
        }
        Ok(exec::map_slice(queries, |q| self.distance_to_unchecked(q)))
    }

    /// Sequential batch scan, kept for the bench suite.
    pub fn distances_to_seq(&self, queries: &[BitVector]) -> Result<Vec<usize>> {
        for q in queries {
            self.check_width(q)?;
        }
        if self.records.is_empty() {
            return Err(Error::Domain("distance to empty dataset".into()));
        }
        Ok(exec::seq::map_slice(queries, |q| self.distance_to_unchecked(q)))
    }

    /// Hash index over record values for O(1) membership checks.
    pub fn index(&self) -> DatasetIndex {
        DatasetIndex {
            set: self.records.iter().cloned().collect(),
            width: self.schema.width,
        }
    }

    pub fn check_width(&self, x: &BitVector) -> Result<()> {
        if x.width() != self.schema.width {
            return Err(Error::Schema(format!(
                "query width {} does not match dataset width {}",
                x.width(),
                self.schema.width
            )));
        }
        Ok(())
    }

    /// Read the headerless CSV format: one record per row, `width`
    /// comma-separated 0/1 values, optional trailing integer label column.
    pub fn from_csv(path: impl AsRef<Path>, labeled: bool, name: &str) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let reader = BufReader::new(file);
        let mut records = Vec::new();
        let mut labels = Vec::new();
        let mut width = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
            let (bit_fields, label) = if labeled {
                if fields.len() < 2 {
                    return Err(Error::Format(format!(
                        "row {}: labeled row needs at least 2 columns",
                        lineno + 1
                    )));
                }
                let label: usize = fields[fields.len() - 1].parse().map_err(|_| {
                    Error::Format(format!(
                        "row {}: invalid label `{}`",
                        lineno + 1,
                        fields[fields.len() - 1]
                    ))
                })?;
                (&fields[..fields.len() - 1], Some(label))
            } else {
                (&fields[..], None)
            };
            match width {
                None => width = Some(bit_fields.len()),
                Some(w) if w != bit_fields.len() => {
                    return Err(Error::Format(format!(
                        "row {}: expected {} feature columns, found {}",
                        lineno + 1,
                        w,
                        bit_fields.len()
                    )));
                }
                _ => {}
            }
            let mut bits = Vec::with_capacity(bit_fields.len());
            for (col, f) in bit_fields.iter().enumerate() {
                match *f {
                    "0" => bits.push(false),
                    "1" => bits.push(true),
                    other => {
                        return Err(Error::Format(format!(
                            "row {}, column {}: expected 0 or 1, found `{other}`",
                            lineno + 1,
                            col + 1
                        )));
                    }
                }
            }
            records.push(BitVector::from_bools(&bits));
            if let Some(l) = label {
                labels.push(l);
            }
        }
        let width = width.ok_or_else(|| Error::Format("empty dataset file".into()))?;
        let classes = if labeled {
            labels.iter().max().map_or(0, |&m| m + 1)
        } else {
            0
        };
        let schema = Schema {
            width,
            classes,
            name: name.to_string(),
        };
        if labeled {
            Dataset::with_labels(records, labels, schema)
        } else {
            Dataset::new(records, schema)
        }
    }

    /// Write the CSV format; the label column is appended when labels
    /// are present.
    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file =
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        for (i, r) in self.records.iter().enumerate() {
            let mut row = String::with_capacity(2 * self.schema.width + 8);
            for j in 0..self.schema.width {
                if j > 0 {
                    row.push(',');
                }
                row.push(if r.get(j) { '1' } else { '0' });
            }
            if let Some(labels) = &self.labels {
                row.push(',');
                row.push_str(&labels[i].to_string());
            }
            row.push('\n');
            w.write_all(row.as_bytes())
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        w.flush().map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Value-level membership index over a dataset.
pub struct DatasetIndex {
    set: HashSet<BitVector>,
    width: usize,
}

impl DatasetIndex {
    pub fn empty(width: usize) -> Self {
        DatasetIndex {
            set: HashSet::new(),
            width,
        }
    }

    pub fn contains(&self, x: &BitVector) -> bool {
        self.set.contains(x)
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// Draw a uniform r-neighbor of `x` that is not in `exclude`, resampling
/// on collision up to [`NEIGHBOR_RESAMPLE_CAP`] attempts.
pub fn sample_neighbor<R: Rng + ?Sized>(
    x: &BitVector,
    r: usize,
    exclude: &DatasetIndex,
    rng: &mut R,
) -> Result<BitVector> {
    if r == 0 || r > x.width() {
        return Err(Error::Domain(format!(
            "neighbor radius {r} out of range 1..={}",
            x.width()
        )));
    }
    for _ in 0..NEIGHBOR_RESAMPLE_CAP {
        let candidate = x.random_neighbor(r, rng);
        if !exclude.contains(&candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::Exhausted {
        attempts: NEIGHBOR_RESAMPLE_CAP,
        context: format!("all sampled {r}-neighbors collided with the excluded set"),
    })
}

/// Split and sampling parameters for one experiment iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    /// Optional cap on the number of records drawn from the dataset
    /// before splitting.
    pub cap: Option<usize>,
    pub member_sample: usize,
    pub nonmember_sample: usize,
    pub seed: u64,
}

pub struct SplitOutput {
    pub train: Dataset,
    pub test: Dataset,
    pub members: Dataset,
    pub nonmembers: Dataset,
    /// Positions (within `train`) of the sampled members.
    pub member_positions: Vec<usize>,
}

/// Disjoint train/test partition with member/non-member subsamples,
/// deterministic under the spec seed.
pub fn split_and_sample(data: &Dataset, spec: &SplitSpec) -> Result<SplitOutput> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train_fraction {} must be in (0, 1)",
            spec.train_fraction
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut positions: Vec<usize> = (0..data.len()).collect();
    positions.shuffle(&mut rng);
    if let Some(cap) = spec.cap {
        positions.truncate(cap);
    }
    let n = positions.len();
    let train_n = (n as f64 * spec.train_fraction).round() as usize;
    if train_n == 0 || train_n >= n {
        return Err(Error::Domain(format!(
            "split of {n} records at fraction {} leaves an empty partition",
            spec.train_fraction
        )));
    }
    let (train_pos, test_pos) = positions.split_at(train_n);
    if spec.member_sample > train_pos.len() {
        return Err(Error::Domain(format!(
            "member_sample {} exceeds train partition size {}",
            spec.member_sample,
            train_pos.len()
        )));
    }
    if spec.nonmember_sample > test_pos.len() {
        return Err(Error::Domain(format!(
            "nonmember_sample {} exceeds test partition size {}",
            spec.nonmember_sample,
            test_pos.len()
        )));
    }
    // Positions within the train/test partitions, sampled without
    // replacement.
    let member_local = rand::seq::index::sample(&mut rng, train_pos.len(), spec.member_sample)
        .into_vec();
    let nonmember_local = rand::seq::index::sample(&mut rng, test_pos.len(), spec.nonmember_sample)
        .into_vec();
    let member_global: Vec<usize> = member_local.iter().map(|&i| train_pos[i]).collect();
    let nonmember_global: Vec<usize> = nonmember_local.iter().map(|&i| test_pos[i]).collect();
    Ok(SplitOutput {
        train: data.subset(train_pos),
        test: data.subset(test_pos),
        members: data.subset(&member_global),
        nonmembers: data.subset(&nonmember_global),
        member_positions: member_local,
    })
}
