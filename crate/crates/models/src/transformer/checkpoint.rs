//! Locating pretrained checkpoints by id, and writing tiny offline stand-ins.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use candle_core::{DType, Device, Tensor};
use candle_nn::{VarBuilder, VarMap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::bert::{Bert, BertConfig};
use super::gpt2::{Gpt2, Gpt2Config};
use super::init_vars;
use crate::ModelError;

/// Environment variable naming the local pretrained-checkpoint cache.
pub const PRETRAINED_DIR_ENV: &str = "AGGROBENCH_PRETRAINED_DIR";

pub const DEFAULT_HUB_URL: &str = "https://huggingface.co";

const REQUIRED_FILES: [&str; 1] = ["config.json"];
const OPTIONAL_FILES: [&str; 6] = [
    "model.safetensors",
    "tokenizer.json",
    "tokenizer_config.json",
    "vocab.txt",
    "vocab.json",
    "merges.txt",
];

#[derive(Debug, Clone)]
pub struct CheckpointResolver {
    pub cache_dir: PathBuf,
    pub offline: bool,
    pub hub_url: String,
}

impl CheckpointResolver {
    pub fn new(cache_dir: impl Into<PathBuf>, offline: bool) -> Self {
        Self {
            cache_dir: cache_dir.into(),
            offline,
            hub_url: DEFAULT_HUB_URL.to_string(),
        }
    }

    /// Cache directory from `AGGROBENCH_PRETRAINED_DIR`, else `./pretrained`.
    pub fn from_env(offline: bool) -> Self {
        let dir = std::env::var_os(PRETRAINED_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("pretrained"));
        Self::new(dir, offline)
    }

    /// Where `id` lives in the cache. Hub ids like `org/name` keep their slash.
    pub fn cache_path(&self, id: &str) -> PathBuf {
        self.cache_dir.join(id)
    }

    /// An existing directory is used as is; otherwise the id is looked up in
    /// the cache and, when online, downloaded into it.
    pub fn resolve(&self, id: &str) -> Result<PathBuf, ModelError> {
        let direct = Path::new(id);
        if direct.join("config.json").is_file() {
            return Ok(direct.to_path_buf());
        }
        let cached = self.cache_path(id);
        if cached.join("config.json").is_file() {
            return Ok(cached);
        }
        if self.offline {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint {id} not found in {} and downloads are disabled",
                self.cache_dir.display()
            )));
        }
        self.download(id, &cached)?;
        Ok(cached)
    }

    fn download(&self, id: &str, dest: &Path) -> Result<(), ModelError> {
        fs::create_dir_all(dest).map_err(|e| ModelError::Io(dest.display().to_string(), e))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_connect(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        for (file, required) in REQUIRED_FILES
            .iter()
            .map(|f| (f, true))
            .chain(OPTIONAL_FILES.iter().map(|f| (f, false)))
        {
            let url = format!("{}/{id}/resolve/main/{file}", self.hub_url);
            let response = agent
                .get(&url)
                .call()
                .map_err(|e| ModelError::Checkpoint(format!("{url}: {e}")))?;
            let status = response.status().as_u16();
            if status == 404 && !required {
                continue;
            }
            if status != 200 {
                return Err(ModelError::Checkpoint(format!("{url}: HTTP {status}")));
            }
            let path = dest.join(file);
            let tmp = dest.join(format!("{file}.part"));
            let mut out = fs::File::create(&tmp).map_err(|e| ModelError::Io(tmp.display().to_string(), e))?;
            io::copy(&mut response.into_body().into_reader(), &mut out)
                .map_err(|e| ModelError::Io(tmp.display().to_string(), e))?;
            fs::rename(&tmp, &path).map_err(|e| ModelError::Io(path.display().to_string(), e))?;
        }
        Ok(())
    }
}

/// Which pretrained architecture a stand-in imitates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandInFamily {
    Bert,
    Gpt2,
}

const TINY_BERT_VOCAB: &str = include_str!("../../assets/tiny-bert/vocab.txt");
const TINY_BERT_TOKENIZER_CONFIG: &str = include_str!("../../assets/tiny-bert/tokenizer_config.json");
const TINY_GPT2_VOCAB: &str = include_str!("../../assets/tiny-gpt2/vocab.json");
const TINY_GPT2_MERGES: &str = include_str!("../../assets/tiny-gpt2/merges.txt");

/// Writes a small randomly initialised checkpoint (hidden 16, 2 layers,
/// 2 heads) with a real tokenizer, in the same layout as a hub download.
pub fn write_stand_in_checkpoint(dir: &Path, family: StandInFamily, seed: u64) -> Result<(), ModelError> {
    fs::create_dir_all(dir).map_err(|e| ModelError::Io(dir.display().to_string(), e))?;
    let write = |name: &str, contents: &str| {
        let p = dir.join(name);
        fs::write(&p, contents).map_err(|e| ModelError::Io(p.display().to_string(), e))
    };
    let device = Device::Cpu;
    let varmap = VarMap::new();
    let vb = VarBuilder::from_varmap(&varmap, DType::F32, &device);
    let prefix;
    match family {
        StandInFamily::Bert => {
            let vocab_size = TINY_BERT_VOCAB.lines().count();
            let cfg = BertConfig {
                vocab_size,
                hidden_size: 16,
                num_hidden_layers: 2,
                num_attention_heads: 2,
                intermediate_size: 32,
                max_position_embeddings: 160,
                type_vocab_size: 2,
                layer_norm_eps: 1e-12,
            };
            Bert::new(&cfg, vb)?;
            let mut config = serde_json::to_value(&cfg)?;
            config["model_type"] = json!("bert");
            write("config.json", &serde_json::to_string_pretty(&config)?)?;
            write("vocab.txt", TINY_BERT_VOCAB)?;
            write("tokenizer_config.json", TINY_BERT_TOKENIZER_CONFIG)?;
            prefix = "bert.";
        }
        StandInFamily::Gpt2 => {
            let vocab: serde_json::Map<String, serde_json::Value> = serde_json::from_str(TINY_GPT2_VOCAB)?;
            let cfg = Gpt2Config {
                vocab_size: vocab.len(),
                n_embd: 16,
                n_layer: 2,
                n_head: 2,
                n_positions: 160,
                layer_norm_epsilon: 1e-5,
            };
            Gpt2::new(&cfg, vb)?;
            let mut config = serde_json::to_value(&cfg)?;
            config["model_type"] = json!("gpt2");
            write("config.json", &serde_json::to_string_pretty(&config)?)?;
            write("vocab.json", TINY_GPT2_VOCAB)?;
            write("merges.txt", TINY_GPT2_MERGES)?;
            prefix = "transformer.";
        }
    }
    init_vars(&varmap, &mut ChaCha8Rng::seed_from_u64(seed))?;
    // Hub layout: backbone tensors carry the architecture prefix.
    let tensors: HashMap<String, Tensor> = varmap
        .data()
        .lock()
        .expect("varmap lock")
        .iter()
        .map(|(k, v)| (format!("{prefix}{k}"), v.as_tensor().clone()))
        .collect();
    let path = dir.join("model.safetensors");
    candle_core::safetensors::save(&tensors, &path)?;
    Ok(())
}
