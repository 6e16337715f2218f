//! Pretrained encoder (BERT) and decoder (GPT-2) backbones with a 3-way
//! classification head, on candle.

pub mod bert;
pub mod checkpoint;
pub mod gpt2;
pub mod layers;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use aggrobench_core::evaluation::ModelKind;
use aggrobench_core::features::{
    encode_transformer, EncodingScheme, FeatureError, SubwordTokenizer, TokenizedBatch,
};
use candle_core::{DType, Device, IndexOp, Tensor, Var, D};
use candle_nn::{Linear, Module, VarBuilder, VarMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::recurrent::NUM_CLASSES;
use crate::ModelError;
use bert::{Bert, BertConfig};
use gpt2::{Gpt2, Gpt2Config};
use layers::{gather_positions, ids_tensor, mask_tensor};

const WEIGHTS_FILE: &str = "model.safetensors";
const META_FILE: &str = "classifier.json";
const TOKENIZER_FILES: [&str; 5] = [
    "tokenizer.json",
    "tokenizer_config.json",
    "vocab.txt",
    "vocab.json",
    "merges.txt",
];

enum Backbone {
    Bert(Bert),
    Gpt2(Gpt2),
}

/// Stored next to a fine-tuned checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMeta {
    pub kind: ModelKind,
    pub max_len: usize,
    pub tokenizer_fingerprint: String,
}

/// A transformer backbone plus linear head. BERT classifies from the `[CLS]`
/// position, GPT-2 from the last real token.
pub struct TransformerClassifier {
    kind: ModelKind,
    backbone: Backbone,
    head: Linear,
    varmap: VarMap,
    tokenizer: SubwordTokenizer,
    config: serde_json::Value,
    max_len: usize,
    prefix: &'static str,
    head_name: &'static str,
    source_dir: std::path::PathBuf,
    device: Device,
}

impl std::fmt::Debug for TransformerClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformerClassifier")
            .field("kind", &self.kind)
            .field("max_len", &self.max_len)
            .field("source_dir", &self.source_dir)
            .finish_non_exhaustive()
    }
}

impl TransformerClassifier {
    /// Builds the model described by `dir/config.json`, loads whatever
    /// weights `dir/model.safetensors` holds and initialises the rest (the
    /// head, normally) from `seed`. Any backbone tensor missing from a
    /// present weights file is an error.
    pub fn from_checkpoint(kind: ModelKind, dir: &Path, max_len: usize, seed: u64) -> Result<Self, ModelError> {
        if !kind.is_transformer() {
            return Err(ModelError::Config(format!("{} is not a transformer kind", kind.as_str())));
        }
        let config_path = dir.join("config.json");
        let raw = fs::read_to_string(&config_path).map_err(|e| ModelError::Io(config_path.display().to_string(), e))?;
        let config: serde_json::Value = serde_json::from_str(&raw)?;
        let model_type = config.get("model_type").and_then(|v| v.as_str()).unwrap_or_default();
        let expect = if kind == ModelKind::Gpt2Medium { "gpt2" } else { "bert" };
        if model_type != expect {
            return Err(ModelError::Checkpoint(format!(
                "{} expects a {expect} checkpoint, {} holds {model_type:?}",
                kind.as_str(),
                dir.display()
            )));
        }
        let tokenizer = SubwordTokenizer::from_dir(dir)?;
        let device = Device::Cpu;
        let varmap = VarMap::new();
        let vb = VarBuilder::from_varmap(&varmap, DType::F32, &device);
        let (backbone, hidden, positions, prefix, head_name) = if expect == "bert" {
            let cfg: BertConfig = serde_json::from_value(config.clone())?;
            let m = Bert::new(&cfg, vb.clone())?;
            (Backbone::Bert(m), cfg.hidden_size, cfg.max_position_embeddings, "bert.", "classifier")
        } else {
            let cfg: Gpt2Config = serde_json::from_value(config.clone())?;
            let m = Gpt2::new(&cfg, vb.clone())?;
            (Backbone::Gpt2(m), cfg.n_embd, cfg.n_positions, "transformer.", "score")
        };
        let head = candle_nn::linear(hidden, NUM_CLASSES, vb.pp(head_name))?;
        if tokenizer.vocab_size() > embedding_rows(&varmap, prefix)? {
            return Err(ModelError::Checkpoint(format!(
                "tokenizer has {} entries, embedding only {}",
                tokenizer.vocab_size(),
                embedding_rows(&varmap, prefix)?
            )));
        }
        init_vars(&varmap, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let weights = dir.join(WEIGHTS_FILE);
        if weights.is_file() {
            load_weights(&varmap, &weights, head_name, &device)?;
        }
        Ok(Self {
            kind,
            backbone,
            head,
            varmap,
            tokenizer,
            config,
            max_len: max_len.min(positions),
            prefix,
            head_name,
            source_dir: dir.to_path_buf(),
            device,
        })
    }

    /// Reopens a directory written by [`save`](Self::save).
    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let path = dir.join(META_FILE);
        let raw = fs::read_to_string(&path).map_err(|e| ModelError::Io(path.display().to_string(), e))?;
        let meta: ClassifierMeta = serde_json::from_str(&raw)?;
        let model = Self::from_checkpoint(meta.kind, dir, meta.max_len, 0)?;
        model.tokenizer.ensure_fingerprint(&meta.tokenizer_fingerprint)?;
        Ok(model)
    }

    /// Writes config, tokenizer files, all weights (head included) and the
    /// classifier metadata, in hub layout.
    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        fs::create_dir_all(dir).map_err(|e| ModelError::Io(dir.display().to_string(), e))?;
        let io = |p: &Path, e| ModelError::Io(p.display().to_string(), e);
        let config_path = dir.join("config.json");
        fs::write(&config_path, serde_json::to_string_pretty(&self.config)?).map_err(|e| io(&config_path, e))?;
        if self.source_dir != dir {
            for name in TOKENIZER_FILES {
                let src = self.source_dir.join(name);
                if src.is_file() {
                    let dst = dir.join(name);
                    fs::copy(&src, &dst).map_err(|e| io(&dst, e))?;
                }
            }
        }
        let tensors: HashMap<String, Tensor> = self
            .varmap
            .data()
            .lock()
            .expect("varmap lock")
            .iter()
            .map(|(k, v)| {
                let key = if k.starts_with(self.head_name) {
                    k.clone()
                } else {
                    format!("{}{k}", self.prefix)
                };
                (key, v.as_tensor().clone())
            })
            .collect();
        candle_core::safetensors::save(&tensors, dir.join(WEIGHTS_FILE))?;
        let meta = ClassifierMeta {
            kind: self.kind,
            max_len: self.max_len,
            tokenizer_fingerprint: self.tokenizer.fingerprint().to_string(),
        };
        let meta_path = dir.join(META_FILE);
        fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(|e| io(&meta_path, e))
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn tokenizer(&self) -> &SubwordTokenizer {
        &self.tokenizer
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Trainable variables, sorted by name.
    pub fn vars(&self) -> Vec<Var> {
        let data = self.varmap.data().lock().expect("varmap lock");
        let mut named: Vec<(&String, &Var)> = data.iter().collect();
        named.sort_by(|a, b| a.0.cmp(b.0));
        named.into_iter().map(|(_, v)| v.clone()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.vars().iter().map(|v| v.elem_count()).sum()
    }

    /// Snapshot of every variable, for restoring the best epoch.
    pub fn snapshot(&self) -> Result<HashMap<String, Tensor>, ModelError> {
        let data = self.varmap.data().lock().expect("varmap lock");
        data.iter()
            .map(|(k, v)| Ok((k.clone(), v.as_tensor().copy()?)))
            .collect()
    }

    pub fn restore(&self, snapshot: &HashMap<String, Tensor>) -> Result<(), ModelError> {
        let data = self.varmap.data().lock().expect("varmap lock");
        for (k, v) in data.iter() {
            if let Some(t) = snapshot.get(k) {
                v.set(t)?;
            }
        }
        Ok(())
    }

    pub fn encode(&self, texts: &[&str]) -> Result<TokenizedBatch, ModelError> {
        Ok(encode_transformer(texts, &self.tokenizer, self.max_len)?)
    }

    fn check_batch(&self, batch: &TokenizedBatch) -> Result<(), ModelError> {
        if batch.scheme != EncodingScheme::TransformerSubword {
            return Err(ModelError::SchemeMismatch {
                expected: EncodingScheme::TransformerSubword,
                found: batch.scheme,
            });
        }
        if batch.vocab_fingerprint != self.tokenizer.fingerprint() {
            return Err(ModelError::Feature(FeatureError::FingerprintMismatch {
                expected: self.tokenizer.fingerprint().to_string(),
                found: batch.vocab_fingerprint.clone(),
            }));
        }
        Ok(())
    }

    /// Backbone output `[B, W, H]`, where `W` is the longest row in the batch
    /// (shared padding beyond it is trimmed).
    pub fn hidden_states(&self, batch: &TokenizedBatch) -> Result<Tensor, ModelError> {
        self.check_batch(batch)?;
        let width = batch.lengths.iter().copied().max().unwrap_or(1).max(1);
        let ids: Vec<Vec<u32>> = batch.token_ids.iter().map(|r| r[..width].to_vec()).collect();
        let ids = ids_tensor(&ids, &self.device)?;
        Ok(match &self.backbone {
            Backbone::Bert(m) => {
                let mask: Vec<Vec<u8>> = batch.attention_mask.iter().map(|r| r[..width].to_vec()).collect();
                m.forward(&ids, &mask_tensor(&mask, &self.device)?)?
            }
            Backbone::Gpt2(m) => m.forward(&ids)?,
        })
    }

    /// `[B, 3]` logits.
    pub fn logits(&self, batch: &TokenizedBatch) -> Result<Tensor, ModelError> {
        if batch.is_empty() {
            self.check_batch(batch)?;
            return Ok(Tensor::zeros((0, NUM_CLASSES), DType::F32, &self.device)?);
        }
        let hidden = self.hidden_states(batch)?;
        let rep = match &self.backbone {
            Backbone::Bert(_) => hidden.i((.., 0))?,
            Backbone::Gpt2(_) => {
                let last: Vec<usize> = batch.lengths.iter().map(|&n| n.max(1) - 1).collect();
                gather_positions(&hidden, &last)?
            }
        };
        Ok(self.head.forward(&rep)?)
    }

    /// Mean cross-entropy against `labels` (class indices).
    pub fn loss(&self, batch: &TokenizedBatch, labels: &[u32]) -> Result<Tensor, ModelError> {
        let logits = self.logits(batch)?;
        let targets = Tensor::new(labels, &self.device)?;
        Ok(candle_nn::loss::cross_entropy(&logits, &targets)?)
    }

    pub fn probabilities(&self, batch: &TokenizedBatch) -> Result<Vec<[f64; NUM_CLASSES]>, ModelError> {
        let probs = candle_nn::ops::softmax(&self.logits(batch)?, D::Minus1)?;
        Ok(probs
            .to_dtype(DType::F64)?
            .to_vec2::<f64>()?
            .into_iter()
            .map(|r| [r[0], r[1], r[2]])
            .collect())
    }
}

fn embedding_rows(varmap: &VarMap, prefix: &str) -> Result<usize, ModelError> {
    let name = if prefix == "bert." { "embeddings.word_embeddings.weight" } else { "wte.weight" };
    let data = varmap.data().lock().expect("varmap lock");
    let var = data
        .get(name)
        .ok_or_else(|| ModelError::Checkpoint(format!("backbone has no {name}")))?;
    Ok(var.dims()[0])
}

/// Hub names → our names: drop the architecture prefix, map the old
/// `gamma`/`beta` LayerNorm names.
pub fn normalize_key(key: &str) -> String {
    let k = key
        .strip_prefix("bert.")
        .or_else(|| key.strip_prefix("transformer."))
        .unwrap_or(key);
    if let Some(stem) = k.strip_suffix(".gamma") {
        format!("{stem}.weight")
    } else if let Some(stem) = k.strip_suffix(".beta") {
        format!("{stem}.bias")
    } else {
        k.to_string()
    }
}

fn load_weights(varmap: &VarMap, path: &Path, head_name: &str, device: &Device) -> Result<(), ModelError> {
    let loaded = candle_core::safetensors::load(path, device)?;
    let loaded: HashMap<String, Tensor> = loaded.into_iter().map(|(k, v)| (normalize_key(&k), v)).collect();
    let data = varmap.data().lock().expect("varmap lock");
    let mut names: Vec<&String> = data.keys().collect();
    names.sort();
    for name in names {
        let var = &data[name];
        match loaded.get(name.as_str()) {
            Some(t) => {
                if t.dims() != var.dims() {
                    return Err(ModelError::Checkpoint(format!(
                        "{name}: checkpoint shape {:?}, model shape {:?}",
                        t.dims(),
                        var.dims()
                    )));
                }
                var.set(&t.to_dtype(DType::F32)?)?;
            }
            None if name.starts_with(head_name) => {}
            None => {
                return Err(ModelError::Checkpoint(format!(
                    "{} has no tensor for {name}",
                    path.display()
                )))
            }
        }
    }
    Ok(())
}

/// Deterministic initialisation, visiting variables in name order: LayerNorm
/// scales 1, biases 0, everything else N(0, 0.02).
pub fn init_vars(varmap: &VarMap, rng: &mut impl Rng) -> Result<(), ModelError> {
    let normal = Normal::new(0.0f32, 0.02).expect("valid normal");
    let data = varmap.data().lock().expect("varmap lock");
    let mut names: Vec<&String> = data.keys().collect();
    names.sort();
    for name in names {
        let var = &data[name];
        let n = var.elem_count();
        let is_norm = name.contains("LayerNorm") || name.contains("ln_");
        let values: Vec<f32> = if name.ends_with(".bias") {
            vec![0.0; n]
        } else if is_norm {
            vec![1.0; n]
        } else {
            (0..n).map(|_| normal.sample(rng)).collect()
        };
        var.set(&Tensor::from_vec(values, var.shape(), var.device())?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::checkpoint::{write_stand_in_checkpoint, StandInFamily};
    use super::*;

    fn stand_in(family: StandInFamily) -> (tempfile::TempDir, TransformerClassifier) {
        let tmp = tempfile::tempdir().unwrap();
        write_stand_in_checkpoint(tmp.path(), family, 7).unwrap();
        let kind = match family {
            StandInFamily::Bert => ModelKind::BertBase,
            StandInFamily::Gpt2 => ModelKind::Gpt2Medium,
        };
        let model = TransformerClassifier::from_checkpoint(kind, tmp.path(), 32, 1).unwrap();
        (tmp, model)
    }

    #[test]
    fn hub_keys_are_normalised() {
        assert_eq!(normalize_key("bert.embeddings.LayerNorm.gamma"), "embeddings.LayerNorm.weight");
        assert_eq!(normalize_key("transformer.h.0.ln_1.bias"), "h.0.ln_1.bias");
        assert_eq!(normalize_key("wte.weight"), "wte.weight");
    }

    #[test]
    fn padding_does_not_change_predictions() {
        for family in [StandInFamily::Bert, StandInFamily::Gpt2] {
            let (_tmp, model) = stand_in(family);
            let alone = model.encode(&["you idiot"]).unwrap();
            let padded = model.encode(&["you idiot", "go back home, you are a fool and a liar"]).unwrap();
            let a = model.probabilities(&alone).unwrap()[0];
            let b = model.probabilities(&padded).unwrap()[0];
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-5, "{family:?}: {a:?} vs {b:?}");
            }
            let s: f64 = a.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn save_and_load_round_trip() {
        for family in [StandInFamily::Bert, StandInFamily::Gpt2] {
            let (_tmp, model) = stand_in(family);
            let out = tempfile::tempdir().unwrap();
            model.save(out.path()).unwrap();
            let back = TransformerClassifier::load(out.path()).unwrap();
            let batch = model.encode(&["what a lovely day", "shut up"]).unwrap();
            assert_eq!(model.probabilities(&batch).unwrap(), back.probabilities(&batch).unwrap());
        }
    }

    #[test]
    fn head_init_depends_on_seed_backbone_does_not() {
        let tmp = tempfile::tempdir().unwrap();
        write_stand_in_checkpoint(tmp.path(), StandInFamily::Bert, 3).unwrap();
        let a = TransformerClassifier::from_checkpoint(ModelKind::BertBase, tmp.path(), 16, 1).unwrap();
        let b = TransformerClassifier::from_checkpoint(ModelKind::BertBase, tmp.path(), 16, 2).unwrap();
        let sa = a.snapshot().unwrap();
        let sb = b.snapshot().unwrap();
        let same = |k: &str| {
            let d = (&sa[k] - &sb[k]).unwrap().abs().unwrap().sum_all().unwrap();
            d.to_scalar::<f32>().unwrap() == 0.0
        };
        assert!(same("embeddings.word_embeddings.weight"));
        assert!(!same("classifier.weight"));
    }

    #[test]
    fn wrong_family_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write_stand_in_checkpoint(tmp.path(), StandInFamily::Gpt2, 0).unwrap();
        assert!(matches!(
            TransformerClassifier::from_checkpoint(ModelKind::BertMultilingual, tmp.path(), 16, 0),
            Err(ModelError::Checkpoint(_))
        ));
    }

    #[test]
    fn gradients_reach_every_variable() {
        let (_tmp, model) = stand_in(StandInFamily::Bert);
        let batch = model.encode(&["you idiot", "nice day"]).unwrap();
        let loss = model.loss(&batch, &[1, 0]).unwrap();
        let grads = loss.backward().unwrap();
        let missing: Vec<usize> = model
            .vars()
            .iter()
            .enumerate()
            .filter(|(_, v)| grads.get(v.as_tensor()).is_none())
            .map(|(i, _)| i)
            .collect();
        assert!(missing.is_empty(), "{missing:?}");
    }
}
