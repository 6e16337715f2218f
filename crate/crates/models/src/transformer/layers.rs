use candle_core::{DType, Device, IndexOp, Result, Tensor, D};
use candle_nn::{Module, VarBuilder};

/// Layer normalisation built from differentiable primitives.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    weight: Tensor,
    bias: Tensor,
    eps: f64,
}

impl LayerNorm {
    pub fn new(size: usize, eps: f64, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            weight: vb.get_with_hints(size, "weight", candle_nn::Init::Const(1.0))?,
            bias: vb.get_with_hints(size, "bias", candle_nn::Init::Const(0.0))?,
            eps,
        })
    }
}

impl Module for LayerNorm {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        candle_nn::ops::layer_norm_slow(x, &self.weight, &self.bias, self.eps as f32)
    }
}

/// GPT-2's transposed linear layer: weight is `[in, out]`.
#[derive(Debug, Clone)]
pub struct Conv1D {
    weight: Tensor,
    bias: Tensor,
}

impl Conv1D {
    pub fn new(in_dim: usize, out_dim: usize, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            weight: vb.get((in_dim, out_dim), "weight")?,
            bias: vb.get(out_dim, "bias")?,
        })
    }
}

impl Module for Conv1D {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.broadcast_matmul(&self.weight)?.broadcast_add(&self.bias)
    }
}

/// Multi-head scaled dot-product attention over `[B, L, H]` projections.
/// `bias` is added to the `[B, heads, L, L]` scores before the softmax.
pub fn attention(q: &Tensor, k: &Tensor, v: &Tensor, heads: usize, bias: &Tensor) -> Result<Tensor> {
    let (b, l, h) = q.dims3()?;
    let hd = h / heads;
    let split = |t: &Tensor| t.reshape((b, l, heads, hd))?.transpose(1, 2)?.contiguous();
    let (q, k, v) = (split(q)?, split(k)?, split(v)?);
    let scores = (q.matmul(&k.t()?.contiguous()?)? / (hd as f64).sqrt())?;
    let probs = candle_nn::ops::softmax(&scores.broadcast_add(bias)?, D::Minus1)?;
    probs
        .matmul(&v)?
        .transpose(1, 2)?
        .contiguous()?
        .reshape((b, l, h))
}

/// `[B, 1, 1, L]` additive mask: 0 where attended, -1e4 where padded.
pub fn padding_bias(mask: &Tensor) -> Result<Tensor> {
    let (b, l) = mask.dims2()?;
    ((mask.ones_like()? - mask)? * -1e4)?.reshape((b, 1, 1, l))
}

/// `[1, 1, L, L]` additive causal mask.
pub fn causal_bias(l: usize, device: &Device) -> Result<Tensor> {
    let data: Vec<f32> = (0..l)
        .flat_map(|i| (0..l).map(move |j| if j > i { -1e4 } else { 0.0 }))
        .collect();
    Tensor::from_vec(data, (1, 1, l, l), device)
}

/// Hidden state of row `r` at position `positions[r]`.
pub fn gather_positions(hidden: &Tensor, positions: &[usize]) -> Result<Tensor> {
    let rows = positions
        .iter()
        .enumerate()
        .map(|(r, &p)| hidden.i((r, p)))
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack(&rows, 0)
}

pub fn ids_tensor(rows: &[Vec<u32>], device: &Device) -> Result<Tensor> {
    let l = rows.first().map_or(0, Vec::len);
    let flat: Vec<u32> = rows.iter().flatten().copied().collect();
    Tensor::from_vec(flat, (rows.len(), l), device)
}

pub fn mask_tensor(rows: &[Vec<u8>], device: &Device) -> Result<Tensor> {
    let l = rows.first().map_or(0, Vec::len);
    let flat: Vec<f32> = rows.iter().flatten().map(|&m| f32::from(m)).collect();
    Tensor::from_vec(flat, (rows.len(), l), device)?.to_dtype(DType::F32)
}
