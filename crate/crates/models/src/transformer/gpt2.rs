use candle_core::{Result, Tensor, D};
use candle_nn::{Embedding, Module, VarBuilder};
use serde::{Deserialize, Serialize};

use super::layers::{attention, causal_bias, Conv1D, LayerNorm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gpt2Config {
    pub vocab_size: usize,
    pub n_embd: usize,
    pub n_layer: usize,
    pub n_head: usize,
    pub n_positions: usize,
    #[serde(default = "gpt2_eps")]
    pub layer_norm_epsilon: f64,
}

fn gpt2_eps() -> f64 {
    1e-5
}

struct Block {
    ln_1: LayerNorm,
    c_attn: Conv1D,
    attn_proj: Conv1D,
    ln_2: LayerNorm,
    c_fc: Conv1D,
    mlp_proj: Conv1D,
    heads: usize,
}

impl Block {
    fn new(cfg: &Gpt2Config, vb: VarBuilder) -> Result<Self> {
        let h = cfg.n_embd;
        Ok(Self {
            ln_1: LayerNorm::new(h, cfg.layer_norm_epsilon, vb.pp("ln_1"))?,
            c_attn: Conv1D::new(h, 3 * h, vb.pp("attn").pp("c_attn"))?,
            attn_proj: Conv1D::new(h, h, vb.pp("attn").pp("c_proj"))?,
            ln_2: LayerNorm::new(h, cfg.layer_norm_epsilon, vb.pp("ln_2"))?,
            c_fc: Conv1D::new(h, 4 * h, vb.pp("mlp").pp("c_fc"))?,
            mlp_proj: Conv1D::new(4 * h, h, vb.pp("mlp").pp("c_proj"))?,
            heads: cfg.n_head,
        })
    }

    fn forward(&self, x: &Tensor, bias: &Tensor) -> Result<Tensor> {
        let h = x.dim(D::Minus1)?;
        let qkv = self.c_attn.forward(&self.ln_1.forward(x)?)?;
        let q = qkv.narrow(D::Minus1, 0, h)?;
        let k = qkv.narrow(D::Minus1, h, h)?;
        let v = qkv.narrow(D::Minus1, 2 * h, h)?;
        let ctx = attention(&q, &k, &v, self.heads, bias)?;
        let x = (x + self.attn_proj.forward(&ctx)?)?;
        let m = self.mlp_proj.forward(&self.c_fc.forward(&self.ln_2.forward(&x)?)?.gelu()?)?;
        x + m
    }
}

/// Causal decoder with HF parameter names (`wte`, `wpe`, `h.N.*`, `ln_f`).
pub struct Gpt2 {
    wte: Embedding,
    wpe: Embedding,
    blocks: Vec<Block>,
    ln_f: LayerNorm,
}

impl Gpt2 {
    pub fn new(cfg: &Gpt2Config, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            wte: candle_nn::embedding(cfg.vocab_size, cfg.n_embd, vb.pp("wte"))?,
            wpe: candle_nn::embedding(cfg.n_positions, cfg.n_embd, vb.pp("wpe"))?,
            blocks: (0..cfg.n_layer)
                .map(|i| Block::new(cfg, vb.pp("h").pp(i.to_string())))
                .collect::<Result<_>>()?,
            ln_f: LayerNorm::new(cfg.n_embd, cfg.layer_norm_epsilon, vb.pp("ln_f"))?,
        })
    }

    /// `[B, L]` ids → `[B, L, H]`. Padding sits after the content, so causal
    /// attention alone keeps it from influencing real positions.
    pub fn forward(&self, ids: &Tensor) -> Result<Tensor> {
        let (b, l) = ids.dims2()?;
        let positions = Tensor::arange(0u32, l as u32, ids.device())?
            .unsqueeze(0)?
            .broadcast_as((b, l))?
            .contiguous()?;
        let mut x = (self.wte.forward(ids)? + self.wpe.forward(&positions)?)?;
        let bias = causal_bias(l, ids.device())?;
        for block in &self.blocks {
            x = block.forward(&x, &bias)?;
        }
        self.ln_f.forward(&x)
    }
}
