//! On-disk artifacts: margin rows, checkpoints and the experiment manifest.
//!
//! Layout under an experiment root:
//!
//! ```text
//! manifest.json
//! {kind}/{forget_id | "full"}/{phase}/model_{id}.bin    margins, f32 LE
//! {kind}/{forget_id | "full"}/{phase}/model_{id}.json   sidecar
//! {kind}/{forget_id | "full"}/checkpoints/model_{id}.ckpt
//! ```
//!
//! Margin files: magic `KLMG`, then `version`, `rows`, `cols` as u32 LE,
//! then `rows * cols` f32 LE values row-major. Checkpoints: magic `KLCK`,
//! u32 LE `version`, `kind` (0 classifier, 1 autoregressive), `vocab`,
//! `context`, `n_widths`, the widths, then u64 LE `seed` and `n_params`,
//! then f64 LE parameters. Every artifact's SHA-256 is kept in the manifest
//! and checked on load.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{MarginTensor, Split};
use crate::model::{Architecture, ModelKind, ModelParams};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const MARGIN_MAGIC: &[u8; 4] = b"KLMG";
const CHECKPOINT_MAGIC: &[u8; 4] = b"KLCK";
const MARGIN_HEADER_LEN: usize = 16;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EnsembleKind {
    Pretrain,
    Oracle,
    Unlearned(String),
}

impl EnsembleKind {
    pub fn dir_name(&self) -> String {
        match self {
            EnsembleKind::Pretrain => "pretrain".into(),
            EnsembleKind::Oracle => "oracle".into(),
            EnsembleKind::Unlearned(method) => format!("unlearned-{method}"),
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dir_name())
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(EnsembleKind::Pretrain),
            "oracle" => Ok(EnsembleKind::Oracle),
            other => match other.strip_prefix("unlearned-") {
                Some(method) if !method.is_empty() => Ok(EnsembleKind::Unlearned(method.to_string())),
                _ => Err(Error::invalid(format!(
                    "unknown ensemble kind `{other}` (expected pretrain, oracle or unlearned-<method>)"
                ))),
            },
        }
    }
}

impl From<EnsembleKind> for String {
    fn from(k: EnsembleKind) -> Self {
        k.dir_name()
    }
}

impl TryFrom<String> for EnsembleKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// What a stored row or checkpoint belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Checkpoints,
    Forget,
    Retain,
    Val,
}

impl From<Split> for Phase {
    fn from(s: Split) -> Self {
        match s {
            Split::Forget => Phase::Forget,
            Split::Retain => Phase::Retain,
            Split::Val => Phase::Val,
        }
    }
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Checkpoints => "checkpoints",
            Phase::Forget => "forget",
            Phase::Retain => "retain",
            Phase::Val => "val",
        }
    }
}

/// Directory holding one group of per-model artifacts.
pub fn group_dir(kind: &EnsembleKind, forget_id: Option<&str>, phase: Phase) -> String {
    format!(
        "{}/{}/{}",
        kind.dir_name(),
        forget_id.unwrap_or("full"),
        phase.as_str()
    )
}

fn margin_path(
    kind: &EnsembleKind,
    forget_id: Option<&str>,
    split: Split,
    model_id: usize,
) -> String {
    format!(
        "{}/model_{model_id}.bin",
        group_dir(kind, forget_id, split.into())
    )
}

fn checkpoint_path(kind: &EnsembleKind, forget_id: Option<&str>, model_id: usize) -> String {
    format!(
        "{}/model_{model_id}.ckpt",
        group_dir(kind, forget_id, Phase::Checkpoints)
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForgetSpecEntry {
    pub name: String,
    pub strategy: String,
    pub size: usize,
    pub indices_digest: String,
}

/// One group of per-model artifacts (checkpoints or one split's margins).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub kind: EnsembleKind,
    pub forget_id: Option<String>,
    pub phase: Phase,
    /// Digest of every input the group depends on; a changed key
    /// invalidates the stored members.
    pub key: String,
    pub seeds: Vec<u64>,
    pub n_models: usize,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub plan_hash: String,
    pub plan: serde_json::Value,
    pub forget_specs: BTreeMap<String, ForgetSpecEntry>,
    pub ensembles: BTreeMap<String, EnsembleRecord>,
    /// Relative artifact path to SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(plan_hash: impl Into<String>, plan: serde_json::Value) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            plan_hash: plan_hash.into(),
            plan,
            forget_specs: BTreeMap::new(),
            ensembles: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    /// Up to five stored keys sharing the longest prefix with `key`.
    pub fn nearest_keys(&self, key: &str) -> Vec<String> {
        let common = |a: &str| {
            a.bytes()
                .zip(key.bytes())
                .take_while(|(x, y)| x == y)
                .count()
        };
        let mut keys: Vec<(usize, &String)> =
            self.artifacts.keys().map(|k| (common(k), k)).collect();
        keys.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        keys.into_iter().take(5).map(|(_, k)| k.clone()).collect()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn manifest_bytes(manifest: &Manifest) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `manifest.json` via a temporary file and rename.
pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    write_atomic(&root.join(MANIFEST_FILE), &manifest_bytes(manifest)?)
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    let path = root.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound {
            what: format!("manifest {}", path.display()),
            available: Vec::new(),
        },
        _ => e.into(),
    })?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    Ok(serde_json::from_value(value)?)
}

#[derive(Serialize, Deserialize)]
struct MarginSidecar {
    format_version: u32,
    kind: EnsembleKind,
    forget_id: Option<String>,
    phase: Split,
    model_id: usize,
    rows: u32,
    cols: u32,
    dtype: String,
    sha256: String,
}

pub fn encode_margins(row: &[f32]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(MARGIN_HEADER_LEN + 4 * row.len());
    bytes.extend_from_slice(MARGIN_MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.extend_from_slice(&(row.len() as u32).to_le_bytes());
    for v in row {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

fn u32_at(bytes: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(bytes.get(at..at + 4)?.try_into().ok()?))
}

fn u64_at(bytes: &[u8], at: usize) -> Option<u64> {
    Some(u64::from_le_bytes(bytes.get(at..at + 8)?.try_into().ok()?))
}

pub fn decode_margins(bytes: &[u8], path: &Path) -> Result<Vec<f32>> {
    let malformed = |reason: &str| Error::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < MARGIN_HEADER_LEN || &bytes[..4] != MARGIN_MAGIC {
        return Err(malformed("missing margin header"));
    }
    let version = u32_at(bytes, 4).unwrap();
    if version != FORMAT_VERSION {
        return Err(malformed(&format!(
            "unsupported margin format version {version}"
        )));
    }
    let rows = u32_at(bytes, 8).unwrap() as usize;
    let cols = u32_at(bytes, 12).unwrap() as usize;
    let payload = &bytes[MARGIN_HEADER_LEN..];
    if payload.len() != rows * cols * 4 {
        return Err(malformed(&format!(
            "payload has {} bytes, header says {rows}x{cols}",
            payload.len()
        )));
    }
    Ok(payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let arch = params.arch();
    let (tag, vocab, context) = match arch.kind() {
        ModelKind::Classifier => (0u32, 0u32, 0u32),
        ModelKind::Autoregressive { vocab, context } => (1, vocab as u32, context as u32),
    };
    let mut bytes = Vec::with_capacity(64 + 8 * params.values().len());
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [
        FORMAT_VERSION,
        tag,
        vocab,
        context,
        arch.widths().len() as u32,
    ] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for &w in arch.widths() {
        bytes.extend_from_slice(&(w as u32).to_le_bytes());
    }
    bytes.extend_from_slice(&params.seed().to_le_bytes());
    bytes.extend_from_slice(&(params.values().len() as u64).to_le_bytes());
    for v in params.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<ModelParams> {
    let malformed = |reason: &str| Error::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 24 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(malformed("missing checkpoint header"));
    }
    let field = |i: usize| u32_at(bytes, 4 + 4 * i).ok_or_else(|| malformed("truncated header"));
    let version = field(0)?;
    if version != FORMAT_VERSION {
        return Err(malformed(&format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let (tag, vocab, context, n_widths) = (
        field(1)?,
        field(2)? as usize,
        field(3)? as usize,
        field(4)? as usize,
    );
    let widths = (0..n_widths)
        .map(|i| field(5 + i).map(|w| w as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut at = 4 + 4 * (5 + n_widths);
    let seed = u64_at(bytes, at).ok_or_else(|| malformed("truncated seed"))?;
    let n_params =
        u64_at(bytes, at + 8).ok_or_else(|| malformed("truncated parameter count"))? as usize;
    at += 16;
    let payload = &bytes[at..];
    if payload.len() != n_params * 8 {
        return Err(malformed("parameter payload length mismatch"));
    }
    let arch = match tag {
        0 => Architecture::classifier(widths)?,
        1 => {
            let hidden = &widths[1..widths.len().saturating_sub(1)];
            let arch = Architecture::autoregressive(vocab, context, hidden)?;
            if arch.widths() != widths.as_slice() {
                return Err(malformed("autoregressive widths inconsistent"));
            }
            arch
        }
        other => return Err(malformed(&format!("unknown model kind tag {other}"))),
    };
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ModelParams::from_values(arch, seed, values)
}

/// Artifact store rooted at one experiment directory. Safe to share across
/// worker threads; manifest updates are serialized and `flush` writes it
/// atomically.
#[derive(Debug)]
pub struct MarginStore {
    root: PathBuf,
    manifest: Mutex<Manifest>,
}

impl MarginStore {
    /// Opens `root`, reusing its manifest when the plan hash matches.
    /// A manifest from a different plan is an error unless `fresh` is set,
    /// in which case the old manifest is discarded.
    pub fn open(
        root: &Path,
        plan_hash: &str,
        plan: serde_json::Value,
        fresh: bool,
    ) -> Result<Self> {
        fs::create_dir_all(root)?;
        let manifest = if fresh || !root.join(MANIFEST_FILE).exists() {
            Manifest::new(plan_hash, plan)
        } else {
            let existing = read_manifest(root)?;
            if existing.plan_hash != plan_hash {
                return Err(Error::invalid(format!(
                    "{} holds plan {}, not {plan_hash}",
                    root.display(),
                    existing.plan_hash
                )));
            }
            existing
        };
        let store = Self {
            root: root.to_path_buf(),
            manifest: Mutex::new(manifest),
        };
        store.flush()?;
        Ok(store)
    }

    /// Opens an existing experiment directory read-mostly.
    pub fn open_existing(root: &Path) -> Result<Self> {
        Ok(Self {
            root: root.to_path_buf(),
            manifest: Mutex::new(read_manifest(root)?),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> MutexGuard<'_, Manifest> {
        self.manifest.lock().expect("manifest lock poisoned")
    }

    pub fn flush(&self) -> Result<()> {
        let manifest = self.manifest();
        write_manifest(&self.root, &manifest)
    }

    fn put(&self, rel: &str, bytes: &[u8]) -> Result<String> {
        write_atomic(&self.root.join(rel), bytes)?;
        let digest = sha256_hex(bytes);
        self.manifest()
            .artifacts
            .insert(rel.to_string(), digest.clone());
        Ok(digest)
    }

    fn get(&self, rel: &str) -> Result<Vec<u8>> {
        let expected = {
            let manifest = self.manifest();
            match manifest.artifacts.get(rel) {
                Some(d) => d.clone(),
                None => {
                    return Err(Error::NotFound {
                        what: format!("artifact `{rel}`"),
                        available: manifest.nearest_keys(rel),
                    })
                }
            }
        };
        let path = self.root.join(rel);
        let bytes = fs::read(&path)?;
        let found = sha256_hex(&bytes);
        if found != expected {
            return Err(Error::Corruption {
                path,
                expected,
                found,
            });
        }
        Ok(bytes)
    }

    /// True when `rel` is recorded and its bytes still match the digest.
    pub fn verify(&self, rel: &str) -> bool {
        self.get(rel).is_ok()
    }

    pub fn has_margins(
        &self,
        kind: &EnsembleKind,
        forget_id: Option<&str>,
        split: Split,
        model_id: usize,
    ) -> bool {
        self.verify(&margin_path(kind, forget_id, split, model_id))
    }

    pub fn has_checkpoint(
        &self,
        kind: &EnsembleKind,
        forget_id: Option<&str>,
        model_id: usize,
    ) -> bool {
        self.verify(&checkpoint_path(kind, forget_id, model_id))
    }

    pub fn save_margin_row(
        &self,
        row: &[f32],
        kind: &EnsembleKind,
        forget_id: Option<&str>,
        split: Split,
        model_id: usize,
    ) -> Result<String> {
        let rel = margin_path(kind, forget_id, split, model_id);
        let digest = self.put(&rel, &encode_margins(row))?;
        let sidecar = MarginSidecar {
            format_version: FORMAT_VERSION,
            kind: kind.clone(),
            forget_id: forget_id.map(str::to_string),
            phase: split,
            model_id,
            rows: 1,
            cols: row.len() as u32,
            dtype: "f32le".into(),
            sha256: digest.clone(),
        };
        let mut json = serde_json::to_vec_pretty(&sidecar)?;
        json.push(b'\n');
        write_atomic(&self.root.join(rel.replace(".bin", ".json")), &json)?;
        Ok(digest)
    }

    pub fn load_margin_row(
        &self,
        kind: &EnsembleKind,
        forget_id: Option<&str>,
        split: Split,
        model_id: usize,
    ) -> Result<Vec<f32>> {
        let rel = margin_path(kind, forget_id, split, model_id);
        decode_margins(&self.get(&rel)?, &self.root.join(&rel))
    }

    /// Stores row `i` of `tensor` as model `first_model_id + i`.
    pub fn save_margins(
        &self,
        tensor: &MarginTensor,
        kind: &EnsembleKind,
        forget_id: Option<&str>,
        first_model_id: usize,
    ) -> Result<()> {
        for (i, row) in tensor.rows().enumerate() {
            self.save_margin_row(row, kind, forget_id, tensor.split(), first_model_id + i)?;
        }
        Ok(())
    }

    /// Stacks the rows of `models` in model-id order.
    pub fn load_margins(
        &self,
        kind: &EnsembleKind,
        split: Split,
        forget_id: Option<&str>,
        models: Range<usize>,
    ) -> Result<MarginTensor> {
        let rows = models
            .map(|m| self.load_margin_row(kind, forget_id, split, m))
            .collect::<Result<Vec<_>>>()?;
        MarginTensor::from_rows(&rows, split)
    }

    pub fn save_checkpoint(
        &self,
        params: &ModelParams,
        kind: &EnsembleKind,
        forget_id: Option<&str>,
        model_id: usize,
    ) -> Result<String> {
        self.put(
            &checkpoint_path(kind, forget_id, model_id),
            &encode_checkpoint(params),
        )
    }

    /// Loads a checkpoint and checks it was written for `arch`.
    pub fn load_checkpoint(
        &self,
        kind: &EnsembleKind,
        forget_id: Option<&str>,
        model_id: usize,
        arch: &Architecture,
    ) -> Result<ModelParams> {
        let rel = checkpoint_path(kind, forget_id, model_id);
        let params = decode_checkpoint(&self.get(&rel)?, &self.root.join(&rel))?;
        if params.arch() != arch {
            return Err(Error::Incompatible(format!(
                "`{rel}` was written for {:?}, expected {:?}",
                params.arch(),
                arch
            )));
        }
        Ok(params)
    }

    /// Stores a JSON document and records its digest.
    pub fn save_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<String> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put(rel, &bytes)
    }

    pub fn load_json<T: serde::de::DeserializeOwned>(&self, rel: &str) -> Result<T> {
        Ok(serde_json::from_slice(&self.get(rel)?)?)
    }

    /// Artifact keys starting with `prefix`.
    pub fn artifacts_under(&self, prefix: &str) -> Vec<String> {
        self.manifest()
            .artifacts
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect()
    }

    pub fn record(&self, group: &str) -> Option<EnsembleRecord> {
        self.manifest().ensembles.get(group).cloned()
    }

    /// Replaces a group's record. If its key changed, the group's stored
    /// artifacts are dropped from the manifest.
    pub fn set_record(&self, group: &str, record: EnsembleRecord) {
        let mut manifest = self.manifest();
        let stale = manifest
            .ensembles
            .get(group)
            .is_some_and(|old| old.key != record.key);
        if stale {
            let prefix = format!("{group}/");
            manifest.artifacts.retain(|k, _| !k.starts_with(&prefix));
        }
        manifest.ensembles.insert(group.to_string(), record);
    }

    pub fn set_forget_spec(&self, id: &str, entry: ForgetSpecEntry) {
        self.manifest().forget_specs.insert(id.to_string(), entry);
    }
}
