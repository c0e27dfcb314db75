//! Benchmark protocol driver: pretrain and oracle ensembles, unlearning,
//! margin extraction and KLoM reports, cached per model in a [`MarginStore`].

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{GaussianMixture, LabeledDataset};
use crate::error::{Error, Result};
use crate::forget::{pca_forget, random_forget, ForgetSpec, SelectionStrategy};
use crate::metrics::{clip_value, klom_set, KlomReport, MarginTensor, Split};
use crate::model::{compute_margins, train, Architecture, TrainConfig};
use crate::rng::mix_seed;
use crate::store::{
    group_dir, sha256_hex, EnsembleKind, EnsembleRecord, ForgetSpecEntry, MarginStore, Phase,
    Status, FORMAT_VERSION,
};
use crate::unlearn::{MethodRegistry, UnlearnConfig};

pub const DEFAULT_N_MODELS: usize = 100;
pub const MAX_MODELS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum DatasetSource {
    GaussianMixture(GaussianMixture),
    /// Header-less CSV files: feature columns followed by an integer label.
    Csv {
        train: PathBuf,
        val: PathBuf,
        n_classes: usize,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<(LabeledDataset, LabeledDataset)> {
        match self {
            DatasetSource::GaussianMixture(g) => g.generate(),
            DatasetSource::Csv {
                train,
                val,
                n_classes,
            } => Ok((
                LabeledDataset::from_csv(train, Some(*n_classes))?,
                LabeledDataset::from_csv(val, Some(*n_classes))?,
            )),
        }
    }

    /// Content description used for hashing: CSV inputs are identified by
    /// file digests, not paths.
    pub fn descriptor(&self) -> Result<serde_json::Value> {
        Ok(match self {
            DatasetSource::GaussianMixture(g) => serde_json::json!({ "gaussian_mixture": g }),
            DatasetSource::Csv {
                train,
                val,
                n_classes,
            } => serde_json::json!({
                "csv": {
                    "train_sha256": sha256_hex(&std::fs::read(train)?),
                    "val_sha256": sha256_hex(&std::fs::read(val)?),
                    "n_classes": n_classes,
                }
            }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum ForgetSource {
    Random { size: usize, seed: u64 },
    Pca { size: usize },
    Explicit { indices: Vec<usize> },
}

/// A forget set as named in a plan; resolved against the training set on use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForgetDef {
    pub id: String,
    #[serde(flatten)]
    pub source: ForgetSource,
}

impl ForgetDef {
    pub fn from_spec(spec: &ForgetSpec) -> Self {
        Self {
            id: spec.name.clone(),
            source: ForgetSource::Explicit {
                indices: spec.indices.clone(),
            },
        }
    }

    pub fn resolve(&self, train: &LabeledDataset) -> Result<ForgetSpec> {
        let spec = match &self.source {
            ForgetSource::Random { size, seed } => random_forget(train, *size, *seed)?,
            ForgetSource::Pca { size } => pca_forget(train, *size)?,
            ForgetSource::Explicit { indices } => {
                ForgetSpec::new(&self.id, SelectionStrategy::Random, indices.clone())
            }
        };
        spec.validate(train.len())?;
        Ok(spec.with_name(&self.id))
    }
}

/// Shipped forget sets: ids 1-3 are random subsets of size 100, 10 and 400,
/// ids 4-6 are PCA extremes of the same sizes.
pub fn builtin_forget_sets() -> Vec<ForgetDef> {
    let sizes = [100, 10, 400];
    let random = sizes.iter().enumerate().map(|(i, &size)| ForgetDef {
        id: (i + 1).to_string(),
        source: ForgetSource::Random {
            size,
            seed: i as u64 + 1,
        },
    });
    let pca = sizes.iter().enumerate().map(|(i, &size)| ForgetDef {
        id: (i + 4).to_string(),
        source: ForgetSource::Pca { size },
    });
    random.chain(pca).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: DatasetSource,
    pub hidden: Vec<usize>,
    /// Shared by pretrain and oracle models; `seed` is replaced per member.
    pub train: TrainConfig,
    pub seed: u64,
    pub n_models: usize,
    pub forget_sets: Vec<ForgetDef>,
    pub methods: Vec<UnlearnConfig>,
}

impl Default for ExperimentPlan {
    /// The desk benchmark: 2000 training points, d = 20, K = 4, one hidden
    /// layer of 64 units, 100 models per ensemble.
    fn default() -> Self {
        Self {
            dataset: DatasetSource::GaussianMixture(GaussianMixture::default()),
            hidden: vec![64],
            train: TrainConfig {
                epochs: 60,
                ..TrainConfig::default()
            },
            seed: 0,
            n_models: DEFAULT_N_MODELS,
            forget_sets: builtin_forget_sets(),
            methods: Vec::new(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_MODELS).contains(&self.n_models) {
            return Err(Error::invalid(format!(
                "n_models must be in 2..={MAX_MODELS}, got {}",
                self.n_models
            )));
        }
        self.train.validate()?;
        let mut ids: Vec<&str> = self.forget_sets.iter().map(|f| f.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("forget set ids must be unique"));
        }
        if ids
            .iter()
            .any(|id| id.is_empty() || id.contains(['/', '\\']) || *id == "full")
        {
            return Err(Error::invalid(
                "forget set ids must be non-empty, path-free and not `full`",
            ));
        }
        Ok(())
    }

    /// Identity of everything that determines trained models. The ensemble
    /// size, forget sets and methods are excluded: each cached group keys
    /// on its own inputs, so growing N or adding a forget set reuses work.
    pub fn identity(&self) -> Result<serde_json::Value> {
        Ok(serde_json::json!({
            "format_version": FORMAT_VERSION,
            "dataset": self.dataset.descriptor()?,
            "hidden": self.hidden,
            "train": self.train.with_seed(0),
            "seed": self.seed,
        }))
    }

    pub fn plan_hash(&self) -> Result<String> {
        Ok(sha256_hex(&serde_json::to_vec(&self.identity()?)?))
    }

    pub fn pretrain_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }

    /// Oracle seeds live in a block above `2^32` selected by the forget id,
    /// so they never meet pretrain seeds `seed..seed + N`.
    pub fn oracle_seed(&self, forget_id: &str, i: usize) -> u64 {
        let digest = Sha256::digest(forget_id.as_bytes());
        let block = 1 + u64::from(u16::from_le_bytes([digest[0], digest[1]]));
        self.seed.wrapping_add(block << 32).wrapping_add(i as u64)
    }

    pub fn method(&self, name: &str) -> Option<&UnlearnConfig> {
        self.methods.iter().find(|m| m.method_name == name)
    }
}

/// A persisted ensemble. Oracle and unlearned ensembles carry a forget id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHandle {
    pub kind: EnsembleKind,
    pub forget_id: Option<String>,
    pub seeds: Vec<u64>,
    /// Checkpoint directory relative to the experiment root.
    pub location: String,
    key: String,
    /// Members trained by the call that produced this handle; the rest
    /// came from the cache.
    pub computed: usize,
}

impl EnsembleHandle {
    pub fn n_models(&self) -> usize {
        self.seeds.len()
    }
}

/// Pretrain-vs-oracle KLoM with the oracle ensemble as reference.
pub fn baseline_klom(
    pretrain: &MarginTensor,
    oracle: &MarginTensor,
    n_models: usize,
) -> Result<KlomReport> {
    klom_set(oracle, pretrain, n_models)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScores {
    pub split: Split,
    pub method: KlomReport,
    pub baseline: KlomReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub plan_hash: String,
    pub forget_id: String,
    pub n_models: usize,
    pub config: UnlearnConfig,
    pub splits: Vec<SplitScores>,
}

impl RunReport {
    pub fn split(&self, split: Split) -> Option<&SplitScores> {
        self.splits.iter().find(|s| s.split == split)
    }

    pub fn location(forget_id: &str, method: &str) -> String {
        format!("reports/{forget_id}/{method}.json")
    }
}

#[derive(Clone, Copy)]
struct Group<'a> {
    kind: &'a EnsembleKind,
    forget_id: Option<&'a str>,
    phase: Phase,
}

/// An opened experiment: loaded data, artifact store and worker pool.
pub struct Experiment {
    plan: ExperimentPlan,
    plan_hash: String,
    train: LabeledDataset,
    val: LabeledDataset,
    arch: Architecture,
    store: MarginStore,
    registry: MethodRegistry,
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment")
            .field("plan_hash", &self.plan_hash)
            .field("root", &self.store.root())
            .finish_non_exhaustive()
    }
}

/// Directory of a plan's artifacts under an artifact root.
pub fn experiment_dir(root: &Path, plan: &ExperimentPlan) -> Result<PathBuf> {
    Ok(root.join(format!("plan-{}", &plan.plan_hash()?[..16])))
}

fn digest_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

fn indices_digest(indices: &[usize]) -> String {
    let bytes: Vec<u8> = indices
        .iter()
        .flat_map(|&i| (i as u64).to_le_bytes())
        .collect();
    sha256_hex(&bytes)
}

impl Experiment {
    /// Opens (or creates) the experiment directory for `plan` under `root`.
    /// `workers = 0` uses every core. With `force`, cached artifacts are
    /// ignored and overwritten.
    pub fn open(plan: ExperimentPlan, root: &Path, workers: usize, force: bool) -> Result<Self> {
        Self::with_registry(plan, root, workers, force, MethodRegistry::with_builtins())
    }

    pub fn with_registry(
        plan: ExperimentPlan,
        root: &Path,
        workers: usize,
        force: bool,
        registry: MethodRegistry,
    ) -> Result<Self> {
        plan.validate()?;
        let (train, val) = plan.dataset.load()?;
        if train.dim() != val.dim() || train.n_classes() != val.n_classes() {
            return Err(Error::invalid(
                "train and val splits disagree on dimension or classes",
            ));
        }
        let mut widths = vec![train.dim()];
        widths.extend(&plan.hidden);
        widths.push(train.n_classes());
        let arch = Architecture::classifier(widths)?;
        let plan_hash = plan.plan_hash()?;
        let dir = experiment_dir(root, &plan)?;
        let store = MarginStore::open(&dir, &plan_hash, plan.identity()?, force)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
        Ok(Self {
            plan,
            plan_hash,
            train,
            val,
            arch,
            store,
            registry,
            pool,
        })
    }

    pub fn plan(&self) -> &ExperimentPlan {
        &self.plan
    }

    pub fn plan_hash(&self) -> &str {
        &self.plan_hash
    }

    pub fn store(&self) -> &MarginStore {
        &self.store
    }

    pub fn registry(&self) -> &MethodRegistry {
        &self.registry
    }

    pub fn train_set(&self) -> &LabeledDataset {
        &self.train
    }

    pub fn val_set(&self) -> &LabeledDataset {
        &self.val
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    /// Resolves a forget id and records it in the manifest.
    pub fn forget_spec(&self, forget_id: &str) -> Result<ForgetSpec> {
        let def = self
            .plan
            .forget_sets
            .iter()
            .find(|f| f.id == forget_id)
            .ok_or_else(|| Error::NotFound {
                what: format!("forget set `{forget_id}`"),
                available: self.plan.forget_sets.iter().map(|f| f.id.clone()).collect(),
            })?;
        let spec = def.resolve(&self.train)?;
        self.store.set_forget_spec(
            forget_id,
            ForgetSpecEntry {
                name: spec.name.clone(),
                strategy: spec.strategy.to_string(),
                size: spec.size,
                indices_digest: indices_digest(&spec.indices),
            },
        );
        Ok(spec)
    }

    /// Brings a group of per-model artifacts up to `seeds.len()` members.
    /// Members already stored under the same key are verified and reused.
    fn ensure_group<F>(
        &self,
        Group {
            kind,
            forget_id,
            phase,
        }: Group<'_>,
        key: &str,
        seeds: &[u64],
        has: impl Fn(usize) -> bool + Sync,
        compute: F,
    ) -> Result<usize>
    where
        F: Fn(usize, u64) -> Result<()> + Sync,
    {
        let group = group_dir(kind, forget_id, phase);
        let previous = self.store.record(&group).filter(|r| r.key == key);
        let all_seeds = match &previous {
            Some(r) if r.seeds.len() > seeds.len() && r.seeds.starts_with(seeds) => r.seeds.clone(),
            _ => seeds.to_vec(),
        };
        let record = |n_models, status| EnsembleRecord {
            kind: kind.clone(),
            forget_id: forget_id.map(str::to_string),
            phase,
            key: key.to_string(),
            seeds: all_seeds.clone(),
            n_models,
            status,
        };
        let todo: Vec<usize> = (0..seeds.len()).filter(|&i| !has(i)).collect();
        if todo.is_empty() {
            if previous.is_none() {
                self.store
                    .set_record(&group, record(all_seeds.len(), Status::Complete));
                self.store.flush()?;
            }
            return Ok(0);
        }
        self.store
            .set_record(&group, record(seeds.len() - todo.len(), Status::Incomplete));
        self.store.flush()?;
        let outcome = self.pool.install(|| {
            todo.par_iter().try_for_each(|&i| {
                compute(i, seeds[i]).map_err(|e| Error::MemberFailed {
                    kind: kind.to_string(),
                    model_id: i,
                    seed: seeds[i],
                    source: Box::new(e),
                })
            })
        });
        let n = (0..all_seeds.len()).filter(|&i| has(i)).count();
        let status = if outcome.is_ok() && n == all_seeds.len() {
            Status::Complete
        } else {
            Status::Incomplete
        };
        self.store.set_record(&group, record(n, status));
        self.store.flush()?;
        outcome.map(|()| todo.len())
    }

    fn pretrain_key(&self) -> String {
        sha256_hex(format!("{}/pretrain", self.plan_hash).as_bytes())
    }

    /// Trains (or reuses) `plan.n_models` models on the full training set
    /// with seeds `seed..seed + N`.
    pub fn train_pretrain_ensemble(&self) -> Result<EnsembleHandle> {
        let kind = EnsembleKind::Pretrain;
        let key = self.pretrain_key();
        let seeds: Vec<u64> = (0..self.plan.n_models)
            .map(|i| self.plan.pretrain_seed(i))
            .collect();
        let computed = self.ensure_group(
            Group {
                kind: &kind,
                forget_id: None,
                phase: Phase::Checkpoints,
            },
            &key,
            &seeds,
            |i| self.store.has_checkpoint(&kind, None, i),
            |i, seed| {
                let params = train(&self.arch, &self.train, &self.plan.train.with_seed(seed))?;
                self.store
                    .save_checkpoint(&params, &kind, None, i)
                    .map(drop)
            },
        )?;
        Ok(EnsembleHandle {
            location: group_dir(&kind, None, Phase::Checkpoints),
            kind,
            forget_id: None,
            seeds,
            key,
            computed,
        })
    }

    /// Trains (or reuses) `plan.n_models` oracles from scratch on the retain
    /// set of `forget_id`.
    pub fn train_oracle_ensemble(&self, forget_id: &str) -> Result<EnsembleHandle> {
        let spec = self.forget_spec(forget_id)?;
        let kind = EnsembleKind::Oracle;
        let retain = spec.retain_indices(self.train.len());
        let key = sha256_hex(
            format!(
                "{}/oracle/{}",
                self.plan_hash,
                indices_digest(&spec.indices)
            )
            .as_bytes(),
        );
        let seeds: Vec<u64> = (0..self.plan.n_models)
            .map(|i| self.plan.oracle_seed(forget_id, i))
            .collect();
        let computed = self.ensure_group(
            Group {
                kind: &kind,
                forget_id: Some(forget_id),
                phase: Phase::Checkpoints,
            },
            &key,
            &seeds,
            |i| self.store.has_checkpoint(&kind, Some(forget_id), i),
            |i, seed| {
                let params = crate::model::train_subset(
                    &self.arch,
                    &self.train,
                    &retain,
                    &self.plan.train.with_seed(seed),
                )?;
                self.store
                    .save_checkpoint(&params, &kind, Some(forget_id), i)
                    .map(drop)
            },
        )?;
        Ok(EnsembleHandle {
            location: group_dir(&kind, Some(forget_id), Phase::Checkpoints),
            kind,
            forget_id: Some(forget_id.to_string()),
            seeds,
            key,
            computed,
        })
    }

    /// Applies the configured method independently to every pretrain member.
    /// Member `i` runs with seed `mix(config.seed, pretrain seed i)`; the
    /// retrain recipe is always the plan's training configuration.
    pub fn apply_unlearning(
        &self,
        pretrain: &EnsembleHandle,
        config: &UnlearnConfig,
        forget_id: &str,
    ) -> Result<EnsembleHandle> {
        if pretrain.kind != EnsembleKind::Pretrain {
            return Err(Error::invalid(format!(
                "expected a pretrain ensemble, got {}",
                pretrain.kind
            )));
        }
        self.registry.get(&config.method_name)?;
        let config = UnlearnConfig {
            retrain: self.plan.train.clone(),
            ..config.clone()
        };
        config.validate()?;
        let spec = self.forget_spec(forget_id)?;
        if method_path_unsafe(&config.method_name) {
            return Err(Error::invalid(format!(
                "method name `{}` is not usable as a path",
                config.method_name
            )));
        }
        let kind = EnsembleKind::Unlearned(config.method_name.clone());
        let key = digest_json(&serde_json::json!({
            "pretrain": pretrain.key,
            "forget": indices_digest(&spec.indices),
            "config": config,
        }))?;
        let seeds: Vec<u64> = pretrain
            .seeds
            .iter()
            .map(|&s| mix_seed(config.seed, s))
            .collect();
        let computed = self.ensure_group(
            Group {
                kind: &kind,
                forget_id: Some(forget_id),
                phase: Phase::Checkpoints,
            },
            &key,
            &seeds,
            |i| self.store.has_checkpoint(&kind, Some(forget_id), i),
            |i, seed| {
                let original = self
                    .store
                    .load_checkpoint(&pretrain.kind, None, i, &self.arch)?;
                let member_config = UnlearnConfig {
                    seed,
                    ..config.clone()
                };
                let out = self
                    .registry
                    .apply(&original, &self.train, &spec, &member_config)?;
                self.store
                    .save_checkpoint(&out, &kind, Some(forget_id), i)
                    .map(drop)
            },
        )?;
        Ok(EnsembleHandle {
            location: group_dir(&kind, Some(forget_id), Phase::Checkpoints),
            kind,
            forget_id: Some(forget_id.to_string()),
            seeds,
            key,
            computed,
        })
    }

    /// Columns of `split` as (dataset, indices) for `forget_id`.
    fn split_points(&self, split: Split, spec: &ForgetSpec) -> (&LabeledDataset, Vec<usize>) {
        match split {
            Split::Forget => (&self.train, spec.indices.clone()),
            Split::Retain => (&self.train, spec.retain_indices(self.train.len())),
            Split::Val => (&self.val, (0..self.val.len()).collect()),
        }
    }

    /// Clipped margins of every member on `split`, persisted per model.
    /// Pretrain val margins are shared by all forget ids.
    pub fn extract_margins(
        &self,
        handle: &EnsembleHandle,
        split: Split,
        forget_id: &str,
    ) -> Result<MarginTensor> {
        if let Some(own) = &handle.forget_id {
            if own != forget_id {
                return Err(Error::invalid(format!(
                    "{} ensemble belongs to forget set `{own}`, not `{forget_id}`",
                    handle.kind
                )));
            }
        }
        let spec = self.forget_spec(forget_id)?;
        let scope = margin_scope(&handle.kind, split, forget_id);
        let (dataset, indices) = self.split_points(split, &spec);
        let key = sha256_hex(
            format!(
                "{}/{}/{}",
                handle.key,
                split,
                if split == Split::Val {
                    String::new()
                } else {
                    indices_digest(&spec.indices)
                }
            )
            .as_bytes(),
        );
        let kind = &handle.kind;
        self.ensure_group(
            Group {
                kind,
                forget_id: scope,
                phase: split.into(),
            },
            &key,
            &handle.seeds,
            |i| self.store.has_margins(kind, scope, split, i),
            |i, _| {
                let params =
                    self.store
                        .load_checkpoint(kind, handle.forget_id.as_deref(), i, &self.arch)?;
                let row: Vec<f32> = compute_margins(&params, dataset, &indices)?
                    .into_iter()
                    .map(|m| clip_value(m) as f32)
                    .collect();
                self.store
                    .save_margin_row(&row, kind, scope, split, i)
                    .map(drop)
            },
        )?;
        self.store
            .load_margins(kind, split, scope, 0..handle.n_models())
    }

    /// Pretrain-vs-oracle KLoM on one split, training whatever is missing.
    pub fn baseline(&self, forget_id: &str, split: Split, n_models: usize) -> Result<KlomReport> {
        let pretrain = self.train_pretrain_ensemble()?;
        let oracle = self.train_oracle_ensemble(forget_id)?;
        baseline_klom(
            &self.extract_margins(&pretrain, split, forget_id)?,
            &self.extract_margins(&oracle, split, forget_id)?,
            n_models,
        )
    }

    /// Full pipeline for one method: unlearn, extract all three splits,
    /// score against the oracles next to the baseline, and persist the report.
    pub fn run(&self, config: &UnlearnConfig, forget_id: &str) -> Result<RunReport> {
        let n = self.plan.n_models;
        let pretrain = self.train_pretrain_ensemble()?;
        let oracle = self.train_oracle_ensemble(forget_id)?;
        let unlearned = self.apply_unlearning(&pretrain, config, forget_id)?;
        let splits = Split::ALL
            .iter()
            .map(|&split| {
                let oracle_m = self.extract_margins(&oracle, split, forget_id)?;
                Ok(SplitScores {
                    split,
                    method: klom_set(
                        &oracle_m,
                        &self.extract_margins(&unlearned, split, forget_id)?,
                        n,
                    )?,
                    baseline: baseline_klom(
                        &self.extract_margins(&pretrain, split, forget_id)?,
                        &oracle_m,
                        n,
                    )?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let report = RunReport {
            plan_hash: self.plan_hash.clone(),
            forget_id: forget_id.to_string(),
            n_models: n,
            config: UnlearnConfig {
                retrain: self.plan.train.clone(),
                ..config.clone()
            },
            splits,
        };
        self.store.save_json(
            &RunReport::location(forget_id, &config.method_name),
            &report,
        )?;
        self.store.flush()?;
        Ok(report)
    }

    /// Every stored run report for `forget_id`.
    pub fn reports(&self, forget_id: &str) -> Result<Vec<RunReport>> {
        self.store
            .artifacts_under(&format!("reports/{forget_id}/"))
            .iter()
            .map(|rel| self.store.load_json(rel))
            .collect()
    }
}

/// Where margins of `kind` on `split` live: pretrain val margins are shared
/// by every forget id.
pub fn margin_scope<'a>(kind: &EnsembleKind, split: Split, forget_id: &'a str) -> Option<&'a str> {
    match (kind, split) {
        (EnsembleKind::Pretrain, Split::Val) => None,
        _ => Some(forget_id),
    }
}

/// Every stored margin row of one group, without running any model.
pub fn stored_margins(
    store: &MarginStore,
    kind: &EnsembleKind,
    split: Split,
    forget_id: &str,
) -> Result<MarginTensor> {
    let scope = margin_scope(kind, split, forget_id);
    let group = group_dir(kind, scope, split.into());
    let record = store.record(&group).ok_or_else(|| Error::NotFound {
        what: format!("margins `{group}`"),
        available: store
            .manifest()
            .ensembles
            .keys()
            .filter(|k| !k.ends_with("checkpoints"))
            .cloned()
            .collect(),
    })?;
    store.load_margins(kind, split, scope, 0..record.n_models)
}

fn method_path_unsafe(name: &str) -> bool {
    name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.')
}
