//! Experiment configuration: a single TOML document with full
//! defaulting, plus stable run-directory naming by config hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::KMeansConfig;
use crate::mlp::{Activation, MlpArchitecture, Optimizer, TrainConfig};
use crate::seeding;
use crate::synth::SynthSpec;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub master_seed: u64,
    pub dataset: DatasetSection,
    pub clustering: ClusteringSection,
    pub split: SplitSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub attack: AttackSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("runs"),
            master_seed: 42,
            dataset: DatasetSection::default(),
            clustering: ClusteringSection::default(),
            split: SplitSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            attack: AttackSection::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// CSV path; mutually exclusive with `synth`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Whether the CSV carries a trailing label column.
    #[serde(default)]
    pub labeled: bool,
    #[serde(default = "default_dataset_name")]
    pub name: String,
    /// Defaults to the standard synthetic benchmark when no path is
    /// given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSection>,
}

fn default_dataset_name() -> String {
    "dataset".into()
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            path: None,
            labeled: false,
            name: "dataset".into(),
            synth: Some(SynthSection::default()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub flip_prob: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            m: 100,
            k: 10,
            n: 5000,
            flip_prob: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringSection {
    /// Class count derived by k-means.
    pub k: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Independent k-means++ runs; lowest inertia wins.
    pub restarts: usize,
    /// Label the full available data before sampling (as opposed to the
    /// sampled subset only).
    pub label_full_data: bool,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        ClusteringSection {
            k: 10,
            max_iters: 100,
            tol: 1e-6,
            restarts: 8,
            label_full_data: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    pub member_sample: usize,
    pub nonmember_sample: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train_fraction: 0.2,
            cap: Some(10_000),
            member_sample: 1000,
            nonmember_sample: 1000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: vec![512, 512, 512, 512, 512],
            activation: Activation::Relu,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub min_epochs: usize,
    pub target_train_accuracy: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            min_epochs: 0,
            target_train_accuracy: 0.99,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    /// Threshold for the basic MIA game.
    pub mia_threshold: f64,
    /// Neighbor radii for the strong-MIA game.
    pub r_grid: Vec<usize>,
    pub strong_mia_trials: usize,
    /// Unknown-part size for the AIA games.
    pub m_prime: usize,
    /// Approximate-AIA distance parameter.
    pub alpha: usize,
    /// How many member targets the AIA games attack.
    pub aia_targets: usize,
    /// Nominal flip distances for synthetic neighbor generation.
    pub distance_grid: Vec<usize>,
    pub variants_per_distance: usize,
    /// Resample/retrain rounds pooled into one AUC.
    pub iterations: usize,
    /// Minimum bucket size to report a per-distance AUC.
    pub min_bucket: usize,
    /// Completion samples per distance in the confidence profile.
    pub samples_per_distance: usize,
}

impl Default for AttackSection {
    fn default() -> Self {
        let mut distance_grid: Vec<usize> = (1..=30).collect();
        distance_grid.extend([40, 50, 75, 100, 150, 200, 250, 300]);
        AttackSection {
            mia_threshold: 0.9,
            r_grid: vec![1, 2, 5, 10, 20],
            strong_mia_trials: 500,
            m_prime: 10,
            alpha: 3,
            aia_targets: 200,
            distance_grid,
            variants_per_distance: 5,
            iterations: 1,
            min_bucket: 20,
            samples_per_distance: 1024,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::Format(format!("config parse error: {e}")))?;
        if cfg.dataset.path.is_none() && cfg.dataset.synth.is_none() {
            cfg.dataset.synth = Some(SynthSection::default());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Resolved (post-defaulting) document, sufficient to replay the run.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset.path, &self.dataset.synth) {
            (Some(_), Some(_)) => {
                return Err(Error::validation(
                    "dataset",
                    "specify either `path` or `synth`, not both",
                ));
            }
            (None, None) => {
                return Err(Error::validation(
                    "dataset",
                    "one of `path` or `synth` is required",
                ));
            }
            _ => {}
        }
        if let Some(s) = &self.dataset.synth {
            self.synth_spec_with(s).validate()?;
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::validation(
                "split.train_fraction",
                format!("{} is outside (0, 1)", self.split.train_fraction),
            ));
        }
        if self.split.member_sample == 0 || self.split.nonmember_sample == 0 {
            return Err(Error::validation(
                "split.member_sample",
                "sample counts must be positive",
            ));
        }
        if self.clustering.k < 2 {
            return Err(Error::validation("clustering.k", "k must be at least 2"));
        }
        if self.model.hidden.is_empty() || self.model.hidden.iter().any(|&h| h == 0) {
            return Err(Error::validation(
                "model.hidden",
                "hidden layers must be non-empty with positive widths",
            ));
        }
        if self.train.learning_rate <= 0.0 {
            return Err(Error::validation(
                "train.learning_rate",
                "learning rate must be positive",
            ));
        }
        if self.train.batch_size == 0 {
            return Err(Error::validation(
                "train.batch_size",
                "batch size must be positive",
            ));
        }
        if !(self.train.target_train_accuracy > 0.0 && self.train.target_train_accuracy <= 1.0) {
            return Err(Error::validation(
                "train.target_train_accuracy",
                "target accuracy must be in (0, 1]",
            ));
        }
        if self.attack.iterations == 0 {
            return Err(Error::validation(
                "attack.iterations",
                "iterations must be at least 1",
            ));
        }
        if self.attack.m_prime == 0 || self.attack.m_prime > crate::attacks::MAX_UNKNOWN {
            return Err(Error::validation(
                "attack.m_prime",
                format!("m' must be in 1..={}", crate::attacks::MAX_UNKNOWN),
            ));
        }
        if self.attack.r_grid.is_empty() || self.attack.distance_grid.is_empty() {
            return Err(Error::validation(
                "attack.r_grid",
                "r_grid and distance_grid must be non-empty",
            ));
        }
        Ok(())
    }

    fn synth_spec_with(&self, s: &SynthSection) -> SynthSpec {
        SynthSpec {
            m: s.m,
            k: s.k,
            n: s.n,
            flip_prob: s.flip_prob,
            seed: seeding::stage_seed(self.master_seed, "synth"),
        }
    }

    pub fn synth_spec(&self) -> Option<SynthSpec> {
        self.dataset.synth.as_ref().map(|s| self.synth_spec_with(s))
    }

    pub fn kmeans_config(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.clustering.k,
            max_iters: self.clustering.max_iters,
            seed: seeding::stage_seed(self.master_seed, "kmeans"),
            tol: self.clustering.tol,
            restarts: self.clustering.restarts,
        }
    }

    /// Split spec for resample iteration `iter`.
    pub fn split_spec(&self, iter: u64) -> crate::dataset::SplitSpec {
        crate::dataset::SplitSpec {
            train_fraction: self.split.train_fraction,
            cap: self.split.cap,
            member_sample: self.split.member_sample,
            nonmember_sample: self.split.nonmember_sample,
            seed: seeding::child_seed(self.master_seed, "split", iter),
        }
    }

    /// Training config for reinit iteration `iter`.
    pub fn train_config(&self, iter: u64) -> TrainConfig {
        TrainConfig {
            optimizer: self.train.optimizer,
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            min_epochs: self.train.min_epochs,
            target_train_accuracy: self.train.target_train_accuracy,
            seed: seeding::child_seed(self.master_seed, "train", iter),
        }
    }

    pub fn architecture(&self, input_dim: usize, classes: usize) -> MlpArchitecture {
        MlpArchitecture {
            input_dim,
            hidden: self.model.hidden.clone(),
            output_dim: classes,
            activation: self.model.activation,
        }
    }

    /// Distance grid restricted to the dataset width.
    pub fn distance_grid_for(&self, width: usize) -> Vec<usize> {
        self.attack
            .distance_grid
            .iter()
            .copied()
            .filter(|&d| d >= 1 && d <= width)
            .collect()
    }

    /// Run directory under `output_dir`, named by the hash of the
    /// resolved config. The output directory itself is excluded from
    /// the hash so moving a run tree does not rename its runs.
    pub fn run_dir(&self) -> PathBuf {
        let mut normalized = self.clone();
        normalized.output_dir = PathBuf::new();
        let hash = seeding::fnv1a(normalized.to_toml_string().as_bytes());
        self.output_dir.join(format!("run-{hash:016x}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.master_seed, 42);
        assert!(cfg.dataset.synth.is_some());
        cfg.validate().unwrap();
    }

    #[test]
    fn resolved_round_trip_is_stable() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string();
        let reparsed = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(text, reparsed.to_toml_string());
        assert_eq!(cfg.run_dir(), reparsed.run_dir());
    }

    #[test]
    fn invalid_flip_prob_is_a_field_error() {
        let text = "[dataset.synth]\nflip_prob = 0.7\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "synth.flip_prob"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn path_and_synth_together_are_rejected() {
        let text = "[dataset]\npath = \"x.csv\"\n[dataset.synth]\nm = 10\n";
        assert!(matches!(
            ExperimentConfig::from_toml_str(text),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = "nonsense = 1\n";
        assert!(matches!(
            ExperimentConfig::from_toml_str(text),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn run_dir_depends_on_config_content() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        b.master_seed = 43;
        assert_ne!(a.run_dir(), b.run_dir());
    }

    #[test]
    fn seeds_differ_per_stage_and_iteration() {
        let cfg = ExperimentConfig::default();
        assert_ne!(cfg.split_spec(0).seed, cfg.split_spec(1).seed);
        assert_ne!(cfg.split_spec(0).seed, cfg.train_config(0).seed);
    }
}
