//! Deterministic generator of clustered binary datasets: k random
//! prototype vectors plus i.i.d. per-bit noise. A stand-in for the
//! access-restricted real datasets, with generation ground truth kept
//! in a sidecar (labels are still re-derived by k-means downstream).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::dataset::{Dataset, Schema};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Feature count.
    pub m: usize,
    /// Cluster count.
    pub k: usize,
    /// Record count.
    pub n: usize,
    /// Per-bit noise around the cluster prototype.
    pub flip_prob: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::validation("synth.m", "feature count must be positive"));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::validation(
                "synth.k",
                format!("cluster count must be in 1..={}", self.n),
            ));
        }
        if !(self.flip_prob > 0.0 && self.flip_prob < 0.5) {
            return Err(Error::validation(
                "synth.flip_prob",
                format!("{} is outside (0, 0.5)", self.flip_prob),
            ));
        }
        Ok(())
    }
}

/// Generation ground truth: not exposed as labels, only for evaluating
/// the clustering step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthMetadata {
    pub spec: SynthSpec,
    pub prototypes: Vec<BitVector>,
    /// True prototype index per record.
    pub assignments: Vec<usize>,
}

impl SynthMetadata {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("metadata serialization failed: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("malformed metadata: {e}")))
    }
}

/// Generate an unlabeled clustered dataset, deterministic under the
/// spec seed.
pub fn generate(spec: &SynthSpec) -> Result<(Dataset, SynthMetadata)> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let prototypes: Vec<BitVector> = (0..spec.k)
        .map(|_| {
            let bits: Vec<bool> = (0..spec.m).map(|_| rng.gen_bool(0.5)).collect();
            BitVector::from_bools(&bits)
        })
        .collect();
    let mut records = Vec::with_capacity(spec.n);
    let mut assignments = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let c = rng.gen_range(0..spec.k);
        let mut v = prototypes[c].clone();
        for j in 0..spec.m {
            if rng.gen_bool(spec.flip_prob) {
                v.flip(j);
            }
        }
        records.push(v);
        assignments.push(c);
    }
    let dataset = Dataset::new(
        records,
        Schema {
            width: spec.m,
            classes: 0,
            name: format!("synth-m{}-k{}-n{}", spec.m, spec.k, spec.n),
        },
    )?;
    Ok((
        dataset,
        SynthMetadata {
            spec: spec.clone(),
            prototypes,
            assignments,
        },
    ))
}
