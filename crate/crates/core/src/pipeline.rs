//! Experiment harness: stages wiring data → clustering → training →
//! attacks → reports, all under one run directory named by the config
//! hash. Every stage is idempotent given the same config and master
//! seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, confidence_vs_distance_profile, distance_histogram, generate_synthetic_neighbors,
    ProfileRow, StratifiedAucReport, StratifiedPool,
};
use crate::attacks::{self, AiaResult, GameOutcome};
use crate::config::ExperimentConfig;
use crate::dataset::{split_and_sample, Dataset, SplitOutput};
use crate::error::{Error, Result};
use crate::kmeans;
use crate::mlp::{self, MlpModel};
use crate::mrmr;
use crate::seeding;
use crate::synth;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackKind {
    Mia,
    StrongMia,
    Aia,
    ApproxAia,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyzeKind {
    DistAuc,
    Histogram,
    SyntheticAuc,
    ConfProfile,
}

pub struct Pipeline {
    cfg: ExperimentConfig,
    run_dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
pub struct MiaReport {
    pub iterations: usize,
    pub threshold: f64,
    /// AUC of pooled member vs non-member confidences across all
    /// iterations.
    pub pooled_auc: f64,
    /// Game outcome at the threshold, last iteration's model.
    pub outcome: GameOutcome,
}

#[derive(Serialize, Deserialize)]
pub struct StrongMiaReport {
    pub per_radius: Vec<StrongMiaEntry>,
}

#[derive(Serialize, Deserialize)]
pub struct StrongMiaEntry {
    pub r: usize,
    pub accuracy: f64,
    pub outcome: GameOutcome,
}

#[derive(Serialize, Deserialize)]
pub struct AiaReport {
    pub unknown_features: Vec<usize>,
    pub outcome: GameOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<AiaResult>,
}

impl Pipeline {
    /// Create (or reuse) the run directory and persist the resolved
    /// config inside it.
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let run_dir = cfg.run_dir();
        std::fs::create_dir_all(&run_dir)
            .map_err(|e| Error::io(run_dir.display().to_string(), e))?;
        let resolved = run_dir.join("config.toml");
        std::fs::write(&resolved, cfg.to_toml_string())
            .map_err(|e| Error::io(resolved.display().to_string(), e))?;
        Ok(Pipeline { cfg, run_dir })
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    fn path(&self, name: &str) -> PathBuf {
        self.run_dir.join(name)
    }

    fn require(&self, name: &str, produced_by: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.exists() {
            return Err(Error::io(
                p.display().to_string(),
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("missing artifact; run `{produced_by}` first"),
                ),
            ));
        }
        Ok(p)
    }

    fn grid_hash(&self) -> u64 {
        let text = format!("{:?}", self.cfg.attack.distance_grid);
        seeding::fnv1a(text.as_bytes())
    }

    fn stamped(&self, stem: &str, ext: &str) -> String {
        format!(
            "{stem}_{}_s{}_g{:08x}.{ext}",
            self.cfg.dataset.name,
            self.cfg.master_seed,
            self.grid_hash() as u32
        )
    }

    /// Stage 1: materialize data.csv (synthetic generation, or
    /// validated copy of the configured CSV).
    pub fn generate(&self) -> Result<()> {
        let out = self.path("data.csv");
        match (&self.cfg.dataset.path, self.cfg.synth_spec()) {
            (Some(src), None) => {
                let data = Dataset::from_csv(src, self.cfg.dataset.labeled, &self.cfg.dataset.name)?;
                data.to_csv(&out)?;
            }
            (None, Some(spec)) => {
                let (data, meta) = synth::generate(&spec)?;
                data.to_csv(&out)?;
                meta.save_json(self.path("synth_meta.json"))?;
            }
            _ => unreachable!("validated config"),
        }
        Ok(())
    }

    fn load_data(&self) -> Result<Dataset> {
        let path = self.require("data.csv", "generate")?;
        Dataset::from_csv(path, self.cfg.dataset.labeled, &self.cfg.dataset.name)
    }

    /// Stage 2: derive class labels by k-means (or keep supplied
    /// labels) and write labeled.csv.
    pub fn label(&self) -> Result<()> {
        let data = self.load_data()?;
        let labeled = if self.cfg.dataset.labeled {
            data
        } else {
            let mut data = data;
            let result = kmeans::kmeans_label(&data, &self.cfg.kmeans_config())?;
            data.set_labels(result.assignments.clone(), self.cfg.clustering.k)?;
            let summary = serde_json::json!({
                "k": self.cfg.clustering.k,
                "inertia": result.inertia,
                "iterations": result.inertia_trace.len(),
            });
            self.write_json("kmeans.json", &summary)?;
            data
        };
        labeled.to_csv(self.path("labeled.csv"))
    }

    fn load_labeled(&self) -> Result<Dataset> {
        let path = self.require("labeled.csv", "label")?;
        Dataset::from_csv(path, true, &self.cfg.dataset.name)
    }

    fn split_iteration(&self, data: &Dataset, iter: u64) -> Result<SplitOutput> {
        split_and_sample(data, &self.cfg.split_spec(iter))
    }

    fn train_iteration(&self, data: &Dataset, iter: u64) -> Result<(MlpModel, SplitOutput)> {
        let split = self.split_iteration(data, iter)?;
        let arch = self
            .cfg
            .architecture(data.width(), data.schema().classes);
        let model = mlp::train(
            &split.train,
            Some(&split.test),
            &arch,
            &self.cfg.train_config(iter),
        )?;
        Ok((model, split))
    }

    /// Stage 3: train the target model on iteration 0's split and
    /// persist it.
    pub fn train(&self) -> Result<()> {
        let data = self.load_labeled()?;
        let (model, _) = self.train_iteration(&data, 0)?;
        model.save(self.path("model.json"))?;
        let meta = serde_json::to_value(&model.train_meta)
            .map_err(|e| Error::Format(e.to_string()))?;
        self.write_json("train_meta.json", &meta)?;
        Ok(())
    }

    fn load_model(&self) -> Result<MlpModel> {
        let path = self.require("model.json", "train")?;
        MlpModel::load(path)
    }

    /// Iteration-0 model: reuse the persisted one when present (it is
    /// identical by determinism), train otherwise.
    fn model_for_iteration(&self, data: &Dataset, iter: u64) -> Result<(MlpModel, SplitOutput)> {
        if iter == 0 && self.path("model.json").exists() {
            let model = self.load_model()?;
            let split = self.split_iteration(data, 0)?;
            Ok((model, split))
        } else {
            self.train_iteration(data, iter)
        }
    }

    pub fn attack(&self, kind: AttackKind) -> Result<()> {
        match kind {
            AttackKind::Mia => self.attack_mia(),
            AttackKind::StrongMia => self.attack_strong_mia(),
            AttackKind::Aia => self.attack_aia(),
            AttackKind::ApproxAia => self.attack_approx_aia(),
        }
    }

    /// Threshold MIA, pooled over `iterations` resample+retrain rounds.
    fn attack_mia(&self) -> Result<()> {
        let data = self.load_labeled()?;
        let iterations = self.cfg.attack.iterations;
        let mut member_conf = Vec::new();
        let mut nonmember_conf = Vec::new();
        let mut last: Option<(MlpModel, SplitOutput)> = None;
        for iter in 0..iterations {
            let (model, split) = self.model_for_iteration(&data, iter as u64)?;
            member_conf.extend(model.max_confidences(split.members.records())?);
            nonmember_conf.extend(model.max_confidences(split.nonmembers.records())?);
            last = Some((model, split));
        }
        let (model, split) = last.expect("iterations >= 1");
        let pooled_auc = analysis::auc(&member_conf, &nonmember_conf)?;
        let outcome = attacks::run_mia_game(
            &model,
            &split.members,
            &split.nonmembers,
            self.cfg.attack.mia_threshold,
        )?;
        let report = MiaReport {
            iterations,
            threshold: self.cfg.attack.mia_threshold,
            pooled_auc,
            outcome,
        };
        self.write_json_t("mia.json", &report)
    }

    fn attack_strong_mia(&self) -> Result<()> {
        let data = self.load_labeled()?;
        let (model, split) = self.model_for_iteration(&data, 0)?;
        let mut per_radius = Vec::new();
        for &r in &self.cfg.attack.r_grid {
            if r > data.width() {
                continue;
            }
            let seed = seeding::child_seed(self.cfg.master_seed, "strong-mia-r", r as u64);
            let outcome = attacks::run_strong_mia_game(
                &model,
                &split.train,
                r,
                self.cfg.attack.strong_mia_trials,
                seed,
            )?;
            per_radius.push(StrongMiaEntry {
                r,
                accuracy: outcome.success_rate(),
                outcome,
            });
        }
        self.write_json_t("strong_mia.json", &StrongMiaReport { per_radius })
    }

    /// mRMR-ranked unknown part, computed on the training partition.
    fn unknown_features(&self, train: &Dataset) -> Result<Vec<usize>> {
        let ranking = mrmr::mrmr_rank(train, self.cfg.attack.m_prime)?;
        ranking.to_csv(self.path("mrmr.csv"))?;
        Ok(ranking.indices())
    }

    fn aia_targets<'a>(&self, split: &'a SplitOutput) -> Dataset {
        let n = self.cfg.attack.aia_targets.min(split.members.len());
        let positions: Vec<usize> = (0..n).collect();
        split.members.subset(&positions)
    }

    fn attack_aia(&self) -> Result<()> {
        let data = self.load_labeled()?;
        let (model, split) = self.model_for_iteration(&data, 0)?;
        let unknown = self.unknown_features(&split.train)?;
        let targets = self.aia_targets(&split);
        let outcome = attacks::run_exact_aia(&model, &targets, &unknown)?;
        self.write_json_t(
            "aia.json",
            &AiaReport {
                unknown_features: unknown,
                outcome,
                detail: None,
            },
        )
    }

    fn attack_approx_aia(&self) -> Result<()> {
        let data = self.load_labeled()?;
        let (model, split) = self.model_for_iteration(&data, 0)?;
        let unknown = self.unknown_features(&split.train)?;
        let targets = self.aia_targets(&split);
        let (outcome, detail) =
            attacks::run_approx_aia(&model, &targets, &unknown, self.cfg.attack.alpha)?;
        // per-target distances as CSV for the distance-distribution plot
        let mut csv = String::from("target,m_prime,best_confidence,tie_count,avg_hamming\n");
        for r in &detail.per_target {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                r.target, r.m_prime, r.best_confidence, r.tie_count, r.avg_hamming_to_truth
            ));
        }
        let csv_path = self.path("approx_aia_detail.csv");
        std::fs::write(&csv_path, csv).map_err(|e| Error::io(csv_path.display().to_string(), e))?;
        self.write_json_t(
            "approx_aia.json",
            &AiaReport {
                unknown_features: unknown,
                outcome,
                detail: Some(detail),
            },
        )
    }

    pub fn analyze(&self, kind: AnalyzeKind, full: bool) -> Result<()> {
        match kind {
            AnalyzeKind::DistAuc => self.analyze_dist_auc(full),
            AnalyzeKind::Histogram => self.analyze_histogram(),
            AnalyzeKind::SyntheticAuc => self.analyze_synthetic_auc(full),
            AnalyzeKind::ConfProfile => self.analyze_conf_profile(),
        }
    }

    /// Distance-stratified AUC of the actual non-member sample, pooled
    /// over iterations.
    fn analyze_dist_auc(&self, full: bool) -> Result<()> {
        let data = self.load_labeled()?;
        let mut pool = StratifiedPool::new();
        for iter in 0..self.cfg.attack.iterations {
            let (model, split) = self.model_for_iteration(&data, iter as u64)?;
            let member_conf = model.max_confidences(split.members.records())?;
            let nonmember_conf = model.max_confidences(split.nonmembers.records())?;
            let distances = split.train.distances_to(split.nonmembers.records())?;
            pool.add_iteration(member_conf, distances.into_iter().zip(nonmember_conf));
        }
        let report = pool.finalize(self.cfg.attack.min_bucket)?;
        self.write_stratified("dist_auc", &report, full)
    }

    fn analyze_histogram(&self) -> Result<()> {
        let data = self.load_labeled()?;
        let split = self.split_iteration(&data, 0)?;
        let hist = distance_histogram(&split.nonmembers, &split.train)?;
        if hist.keys().all(|&d| d == 0) {
            eprintln!("warning: every non-member is at distance 0 (degenerate overlap)");
        }
        let mut csv = String::from("distance,count\n");
        for (d, c) in &hist {
            csv.push_str(&format!("{d},{c}\n"));
        }
        let path = self.path(&self.stamped("histogram", "csv"));
        std::fs::write(&path, csv).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Fig-3 style stratified AUC over synthetic neighbors of training
    /// members, on the persisted model.
    fn analyze_synthetic_auc(&self, full: bool) -> Result<()> {
        let data = self.load_labeled()?;
        let (model, split) = self.model_for_iteration(&data, 0)?;
        let grid = self.cfg.distance_grid_for(data.width());
        let member_sample = self.cfg.split.member_sample.min(split.train.len());
        let seed = seeding::stage_seed(self.cfg.master_seed, "synthetic");
        let neighbors = generate_synthetic_neighbors(
            &split.train,
            member_sample,
            &grid,
            self.cfg.attack.variants_per_distance,
            seed,
        )?;
        for w in &neighbors.warnings {
            eprintln!("warning: {w}");
        }
        let member_conf = model.max_confidences(split.members.records())?;
        let mut pool = StratifiedPool::new();
        let mut pairs = Vec::new();
        for (&d, bucket) in &neighbors.buckets {
            let confs = model.max_confidences(bucket.records())?;
            pairs.extend(confs.into_iter().map(move |c| (d, c)));
        }
        pool.add_iteration(member_conf, pairs);
        let report = pool.finalize(self.cfg.attack.min_bucket)?;
        self.write_stratified("synthetic_auc", &report, full)
    }

    fn analyze_conf_profile(&self) -> Result<()> {
        let data = self.load_labeled()?;
        let (model, split) = self.model_for_iteration(&data, 0)?;
        let unknown = self.unknown_features(&split.train)?;
        let targets = self.aia_targets(&split);
        let seed = seeding::stage_seed(self.cfg.master_seed, "conf-profile");
        let rows = confidence_vs_distance_profile(
            &model,
            &targets,
            &unknown,
            seed,
            self.cfg.attack.samples_per_distance,
        )?;
        let mut csv = String::from("distance,fraction_above,n\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{}\n", r.distance, r.fraction_above, r.n));
        }
        let path = self.path("conf_profile.csv");
        std::fs::write(&path, csv).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.write_json_t("conf_profile.json", &rows)
    }

    fn write_stratified(&self, stem: &str, report: &StratifiedAucReport, full: bool) -> Result<()> {
        report.to_csv(self.path(&self.stamped(stem, "csv")))?;
        if full {
            self.write_json_t(&self.stamped(stem, "json"), report)?;
        }
        Ok(())
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<()> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    fn write_json_t<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Collate whatever artifacts exist into one machine-readable
    /// summary.
    pub fn report(&self) -> Result<serde_json::Value> {
        use serde_json::{json, Value};
        let mut summary = serde_json::Map::new();
        summary.insert("dataset".into(), json!(self.cfg.dataset.name));
        summary.insert("master_seed".into(), json!(self.cfg.master_seed));
        summary.insert(
            "run_dir".into(),
            json!(self.run_dir.file_name().unwrap().to_string_lossy()),
        );

        if let Ok(text) = std::fs::read_to_string(self.path("train_meta.json")) {
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("train_meta.json: {e}")))?;
            summary.insert("train_meta".into(), v);
        }
        if let Ok(text) = std::fs::read_to_string(self.path("mia.json")) {
            let v: MiaReport = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("mia.json: {e}")))?;
            summary.insert(
                "mia".into(),
                json!({
                    "iterations": v.iterations,
                    "threshold": v.threshold,
                    "pooled_auc": v.pooled_auc,
                    "advantage": v.outcome.advantage,
                }),
            );
        }
        if let Ok(text) = std::fs::read_to_string(self.path("strong_mia.json")) {
            let v: StrongMiaReport = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("strong_mia.json: {e}")))?;
            let entries: Vec<Value> = v
                .per_radius
                .iter()
                .map(|e| {
                    json!({"r": e.r, "accuracy": e.accuracy, "advantage": e.outcome.advantage})
                })
                .collect();
            summary.insert("strong_mia".into(), json!(entries));
        }
        if let Ok(text) = std::fs::read_to_string(self.path("aia.json")) {
            let v: AiaReport = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("aia.json: {e}")))?;
            summary.insert(
                "exact_aia".into(),
                json!({
                    "unknown_features": v.unknown_features,
                    "success_rate": v.outcome.success_rate(),
                }),
            );
        }
        if let Ok(text) = std::fs::read_to_string(self.path("approx_aia.json")) {
            let v: AiaReport = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("approx_aia.json: {e}")))?;
            let detail = v.detail.as_ref();
            summary.insert(
                "approx_aia".into(),
                json!({
                    "unknown_features": v.unknown_features,
                    "success_rate": v.outcome.success_rate(),
                    "mean_avg_hamming": detail.map(|d| d.summary.mean_avg_hamming),
                    "baseline": detail.map(|d| d.summary.baseline),
                }),
            );
        }
        for stem in ["dist_auc", "synthetic_auc"] {
            let path = self.path(&self.stamped(stem, "csv"));
            if let Ok(text) = std::fs::read_to_string(&path) {
                summary.insert(format!("{stem}_csv"), json!(text));
            }
        }
        if let Ok(text) = std::fs::read_to_string(self.path("conf_profile.json")) {
            let v: Vec<ProfileRow> = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("conf_profile.json: {e}")))?;
            summary.insert(
                "conf_profile".into(),
                serde_json::to_value(&v).map_err(|e| Error::Format(e.to_string()))?,
            );
        }
        let value = Value::Object(summary);
        self.write_json("summary.json", &value)?;
        Ok(value)
    }
}
