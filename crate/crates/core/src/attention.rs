//! Multi-head attention with per-token geometric operators, plus the
//! low-rank spatial adapter that carries the camera encoding.
//!
//! Token features are `T × d` matrices, one row per token. Heads split the
//! columns evenly and every head uses the same per-token operator.
//!
//! With operators `D_t`, the encoded kinds compute
//!
//! ```text
//! CaPE:            O = Attn(Dᵀ ⊙ Q, D⁻¹ ⊙ K, V)
//! GTA/PRoPE/UCPE:  O = D ⊙ Attn(Dᵀ ⊙ Q, D⁻¹ ⊙ K, D⁻¹ ⊙ V)
//! ```
//!
//! Transposes are taken literally, also for non-orthogonal SE(3) blocks.

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encodings::{EncodingKind, OperatorLayout, TokenOperator};
use crate::error::AttentionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplyMode {
    Direct,
    Transpose,
    Inverse,
}

/// Operator with its three matrix forms precomputed.
struct Prepared<'a> {
    blocks: [Matrix4<f64>; 3],
    angles: &'a [f64],
    layout: OperatorLayout,
}

impl<'a> Prepared<'a> {
    fn new(op: &'a TokenOperator, index: usize) -> Result<Self, AttentionError> {
        let inv = op
            .ray_block
            .try_inverse()
            .ok_or(AttentionError::Singular(index))?;
        Ok(Self {
            blocks: [op.ray_block, op.ray_block.transpose(), inv],
            angles: &op.rope_angles,
            layout: op.layout,
        })
    }

    fn apply(&self, x: &mut [f64], mode: ApplyMode) {
        let block = &self.blocks[mode as usize];
        let (ray, rope) = x.split_at_mut(self.layout.ray_dims);
        for chunk in ray.chunks_exact_mut(4) {
            let y = block * Vector4::new(chunk[0], chunk[1], chunk[2], chunk[3]);
            chunk.copy_from_slice(y.as_slice());
        }
        let sign = if mode == ApplyMode::Direct { 1.0 } else { -1.0 };
        for (pair, angle) in rope.chunks_exact_mut(2).zip(self.angles) {
            let (s, c) = (sign * angle).sin_cos();
            let (a, b) = (pair[0], pair[1]);
            pair[0] = c * a - s * b;
            pair[1] = s * a + c * b;
        }
    }
}

fn check_layout(op: &TokenOperator, dim: usize) -> Result<(), AttentionError> {
    let l = op.layout;
    if l.head_dim() != dim
        || l.ray_dims % 4 != 0
        || l.rope_dims % 2 != 0
        || op.rope_angles.len() != l.rope_dims / 2
    {
        return Err(AttentionError::Shape(format!(
            "operator layout {}+{} with {} angles does not fit feature dim {dim}",
            l.ray_dims,
            l.rope_dims,
            op.rope_angles.len()
        )));
    }
    Ok(())
}

/// Applies one operator to a single head's feature vector in place.
pub fn apply_operator(op: &TokenOperator, x: &mut [f64], mode: ApplyMode) -> Result<(), AttentionError> {
    check_layout(op, x.len())?;
    Prepared::new(op, 0)?.apply(x, mode);
    Ok(())
}

/// Applies `ops[t]` to every head of row `t` of `x`.
pub fn apply_operators(
    ops: &[TokenOperator],
    x: &DMatrix<f64>,
    heads: usize,
    mode: ApplyMode,
) -> Result<DMatrix<f64>, AttentionError> {
    let prepared = prepare(ops, x.nrows(), x.ncols(), heads)?;
    Ok(apply_prepared(&prepared, x, heads, mode))
}

fn prepare<'a>(
    ops: &'a [TokenOperator],
    tokens: usize,
    dim: usize,
    heads: usize,
) -> Result<Vec<Prepared<'a>>, AttentionError> {
    if ops.len() != tokens {
        return Err(AttentionError::Shape(format!(
            "{} operators for {tokens} tokens",
            ops.len()
        )));
    }
    if heads == 0 || dim % heads != 0 {
        return Err(AttentionError::Shape(format!(
            "dim {dim} not divisible into {heads} heads"
        )));
    }
    ops.iter()
        .enumerate()
        .map(|(i, op)| {
            check_layout(op, dim / heads)?;
            Prepared::new(op, i)
        })
        .collect()
}

fn apply_prepared(ops: &[Prepared], x: &DMatrix<f64>, heads: usize, mode: ApplyMode) -> DMatrix<f64> {
    let dh = x.ncols() / heads;
    let mut out = x.clone();
    let mut buf = vec![0.0; dh];
    for (t, op) in ops.iter().enumerate() {
        for h in 0..heads {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = x[(t, h * dh + j)];
            }
            op.apply(&mut buf, mode);
            for (j, b) in buf.iter().enumerate() {
                out[(t, h * dh + j)] = *b;
            }
        }
    }
    out
}

/// Numerically stable softmax over a row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Plain scaled dot-product attention per head.
pub fn vanilla_attention(
    q: &DMatrix<f64>,
    k: &DMatrix<f64>,
    v: &DMatrix<f64>,
    heads: usize,
) -> Result<DMatrix<f64>, AttentionError> {
    check_qkv(q, k, v, heads)?;
    let (t, d) = (q.nrows(), q.ncols());
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = DMatrix::zeros(t, d);
    let mut row = vec![0.0; t];
    for h in 0..heads {
        let cols = h * dh..(h + 1) * dh;
        for i in 0..t {
            for (j, r) in row.iter_mut().enumerate() {
                *r = cols.clone().map(|c| q[(i, c)] * k[(j, c)]).sum::<f64>() * scale;
            }
            softmax_in_place(&mut row);
            for c in cols.clone() {
                out[(i, c)] = row.iter().enumerate().map(|(j, p)| p * v[(j, c)]).sum();
            }
        }
    }
    Ok(out)
}

fn check_qkv(q: &DMatrix<f64>, k: &DMatrix<f64>, v: &DMatrix<f64>, heads: usize) -> Result<(), AttentionError> {
    if q.shape() != k.shape() || q.shape() != v.shape() {
        return Err(AttentionError::Shape(format!(
            "q {:?}, k {:?}, v {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    if heads == 0 || q.ncols() % heads != 0 {
        return Err(AttentionError::Shape(format!(
            "dim {} not divisible into {heads} heads",
            q.ncols()
        )));
    }
    Ok(())
}

/// Attention with the operator injection of the given encoding kind.
pub fn attend(
    q: &DMatrix<f64>,
    k: &DMatrix<f64>,
    v: &DMatrix<f64>,
    ops: &[TokenOperator],
    kind: EncodingKind,
    heads: usize,
) -> Result<DMatrix<f64>, AttentionError> {
    check_qkv(q, k, v, heads)?;
    if kind == EncodingKind::None {
        return vanilla_attention(q, k, v, heads);
    }
    let prepared = prepare(ops, q.nrows(), q.ncols(), heads)?;
    let q2 = apply_prepared(&prepared, q, heads, ApplyMode::Transpose);
    let k2 = apply_prepared(&prepared, k, heads, ApplyMode::Inverse);
    if kind.transforms_values() {
        let v2 = apply_prepared(&prepared, v, heads, ApplyMode::Inverse);
        let o = vanilla_attention(&q2, &k2, &v2, heads)?;
        Ok(apply_prepared(&prepared, &o, heads, ApplyMode::Direct))
    } else {
        vanilla_attention(&q2, &k2, v, heads)
    }
}

/// Where the adapter sits relative to the frozen attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Parallel,
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    /// Adapter width is `model_dim / compression`.
    pub compression: usize,
    pub heads: usize,
    pub placement: Placement,
    pub latup_bias: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub model_dim: usize,
    pub heads: usize,
    /// Encoding used inside the adapter.
    pub kind: EncodingKind,
    pub adapter: AdapterConfig,
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<(), AttentionError> {
        let err = |m: String| Err(AttentionError::Config(m));
        if self.heads == 0 || self.model_dim == 0 || self.model_dim % self.heads != 0 {
            return err(format!("model dim {} not divisible by {} heads", self.model_dim, self.heads));
        }
        let a = &self.adapter;
        if a.compression == 0 || self.model_dim % a.compression != 0 {
            return err(format!("model dim {} not divisible by compression {}", self.model_dim, a.compression));
        }
        let adim = self.adapter_dim();
        if a.heads == 0 || adim % a.heads != 0 {
            return err(format!("adapter dim {adim} not divisible by {} heads", a.heads));
        }
        let ahd = adim / a.heads;
        let needed = match self.kind {
            EncodingKind::None => 1,
            EncodingKind::UcpeHybrid => 8,
            _ => 4,
        };
        if ahd % needed != 0 {
            return err(format!("adapter head dim {ahd} must be divisible by {needed} for {:?}", self.kind));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads
    }

    pub fn adapter_dim(&self) -> usize {
        self.model_dim / self.adapter.compression
    }

    pub fn adapter_head_dim(&self) -> usize {
        self.adapter_dim() / self.adapter.heads
    }
}

/// Projection weights; inputs multiply on the left (`X · W`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub wq: DMatrix<f64>,
    pub wk: DMatrix<f64>,
    pub wv: DMatrix<f64>,
    pub wo: DMatrix<f64>,
    pub pq: DMatrix<f64>,
    pub pk: DMatrix<f64>,
    pub pv: DMatrix<f64>,
    /// Adapter output projection, zero at initialization.
    pub up: DMatrix<f64>,
    /// Lat-Up bias projection, `3 × d`.
    pub latup: DMatrix<f64>,
}

impl WeightSet {
    /// Uniform weights in `±1/√fan_in`, with the adapter output zeroed.
    pub fn init<R: Rng>(cfg: &AttentionConfig, rng: &mut R) -> Self {
        let (d, a) = (cfg.model_dim, cfg.adapter_dim());
        let mut mat = |rows: usize, cols: usize| {
            let s = 1.0 / (rows as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-s..s))
        };
        Self {
            wq: mat(d, d),
            wk: mat(d, d),
            wv: mat(d, d),
            wo: mat(d, d),
            pq: mat(d, a),
            pk: mat(d, a),
            pv: mat(d, a),
            latup: mat(3, d),
            up: DMatrix::zeros(a, d),
        }
    }

    pub fn check(&self, cfg: &AttentionConfig) -> Result<(), AttentionError> {
        let (d, a) = (cfg.model_dim, cfg.adapter_dim());
        let expect = [
            ("wq", &self.wq, (d, d)),
            ("wk", &self.wk, (d, d)),
            ("wv", &self.wv, (d, d)),
            ("wo", &self.wo, (d, d)),
            ("pq", &self.pq, (d, a)),
            ("pk", &self.pk, (d, a)),
            ("pv", &self.pv, (d, a)),
            ("up", &self.up, (a, d)),
            ("latup", &self.latup, (3, d)),
        ];
        for (name, m, shape) in expect {
            if m.shape() != shape {
                return Err(AttentionError::Shape(format!("{name} is {:?}, expected {shape:?}", m.shape())));
            }
        }
        Ok(())
    }

    /// Named tensors in a fixed order, as stored in weight files.
    pub fn tensors(&self) -> [(&'static str, &DMatrix<f64>); 9] {
        [
            ("wq", &self.wq),
            ("wk", &self.wk),
            ("wv", &self.wv),
            ("wo", &self.wo),
            ("pq", &self.pq),
            ("pk", &self.pk),
            ("pv", &self.pv),
            ("up", &self.up),
            ("latup", &self.latup),
        ]
    }
}

/// One frozen attention layer with the camera adapter attached.
#[derive(Debug, Clone)]
pub struct SpatialBlock {
    pub cfg: AttentionConfig,
    pub weights: WeightSet,
}

impl SpatialBlock {
    pub fn new(cfg: AttentionConfig, weights: WeightSet) -> Result<Self, AttentionError> {
        cfg.validate()?;
        weights.check(&cfg)?;
        Ok(Self { cfg, weights })
    }

    /// The frozen path: vanilla multi-head attention with output projection.
    pub fn base(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, AttentionError> {
        let w = &self.weights;
        let o = vanilla_attention(&(x * &w.wq), &(x * &w.wk), &(x * &w.wv), self.cfg.heads)?;
        Ok(o * &w.wo)
    }

    /// Adapter branch. `latup` is `T × 3` and is only used when the config
    /// enables the Lat-Up bias.
    pub fn adapter(
        &self,
        x: &DMatrix<f64>,
        ops: &[TokenOperator],
        latup: Option<&DMatrix<f64>>,
    ) -> Result<DMatrix<f64>, AttentionError> {
        let w = &self.weights;
        let biased;
        let input = match latup {
            Some(l) if self.cfg.adapter.latup_bias => {
                if l.shape() != (x.nrows(), 3) {
                    return Err(AttentionError::Shape(format!(
                        "lat-up input {:?}, expected ({}, 3)",
                        l.shape(),
                        x.nrows()
                    )));
                }
                biased = x + l * &w.latup;
                &biased
            }
            _ => x,
        };
        let o = attend(
            &(input * &w.pq),
            &(input * &w.pk),
            &(input * &w.pv),
            ops,
            self.cfg.kind,
            self.cfg.adapter.heads,
        )?;
        Ok(o * &w.up)
    }

    pub fn forward(
        &self,
        x: &DMatrix<f64>,
        ops: &[TokenOperator],
        latup: Option<&DMatrix<f64>>,
    ) -> Result<DMatrix<f64>, AttentionError> {
        if x.ncols() != self.cfg.model_dim {
            return Err(AttentionError::Shape(format!(
                "input has {} features, model dim is {}",
                x.ncols(),
                self.cfg.model_dim
            )));
        }
        match self.cfg.adapter.placement {
            Placement::Parallel => Ok(self.base(x)? + self.adapter(x, ops, latup)?),
            Placement::Pre => {
                let shifted = x + self.adapter(x, ops, latup)?;
                self.base(&shifted)
            }
            Placement::Post => {
                let y = self.base(x)?;
                let delta = self.adapter(&y, ops, latup)?;
                Ok(y + delta)
            }
        }
    }
}

/// Parallel-placement combination of a precomputed frozen output with the
/// adapter branch evaluated on the block input.
pub fn adapter_block(
    x: &DMatrix<f64>,
    base_out: &DMatrix<f64>,
    ops: &[TokenOperator],
    latup: Option<&DMatrix<f64>>,
    block: &SpatialBlock,
) -> Result<DMatrix<f64>, AttentionError> {
    Ok(base_out + block.adapter(x, ops, latup)?)
}

/// Analytic parameter counts for a layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamCount {
    /// Adapter projections plus the Lat-Up projection, per layer.
    pub adapter_per_layer: usize,
    /// Full-width Q/K/V/O projections, per layer.
    pub attention_per_layer: usize,
    pub layers: usize,
}

impl ParamCount {
    /// Counts weights and biases of every linear layer.
    pub fn new(model_dim: usize, compression: usize, latup_bias: bool, layers: usize) -> Self {
        let (d, a) = (model_dim, model_dim / compression);
        let linear = |i: usize, o: usize| i * o + o;
        let mut adapter = 3 * linear(d, a) + linear(a, d);
        if latup_bias {
            adapter += linear(3, d);
        }
        Self {
            adapter_per_layer: adapter,
            attention_per_layer: 4 * linear(d, d),
            layers,
        }
    }

    pub fn adapter_total(&self) -> usize {
        self.adapter_per_layer * self.layers
    }

    pub fn attention_total(&self) -> usize {
        self.attention_per_layer * self.layers
    }
}

pub mod dense {
    //! Reference path that materializes the full block-diagonal operator
    //! matrices and applies them with ordinary matrix algebra. Quadratic in
    //! `T · d`, so only for small inputs.

    use super::*;

    /// Per-head `d_h × d_h` matrix of one token operator.
    pub fn operator_matrix(op: &TokenOperator) -> DMatrix<f64> {
        let l = op.layout;
        let mut m = DMatrix::zeros(l.head_dim(), l.head_dim());
        for b in 0..l.ray_dims / 4 {
            m.view_mut((4 * b, 4 * b), (4, 4)).copy_from(&op.ray_block);
        }
        for (p, angle) in op.rope_angles.iter().enumerate() {
            let (s, c) = angle.sin_cos();
            let o = l.ray_dims + 2 * p;
            m.view_mut((o, o), (2, 2)).copy_from(&Matrix2::new(c, -s, s, c));
        }
        m
    }

    /// `blkdiag(D_1, …, D_T)` for one head.
    pub fn block_diagonal(ops: &[TokenOperator]) -> DMatrix<f64> {
        let dh = ops.first().map_or(0, |o| o.layout.head_dim());
        let n = ops.len() * dh;
        let mut m = DMatrix::zeros(n, n);
        for (t, op) in ops.iter().enumerate() {
            m.view_mut((t * dh, t * dh), (dh, dh)).copy_from(&operator_matrix(op));
        }
        m
    }

    fn head_column(x: &DMatrix<f64>, h: usize, dh: usize) -> DMatrix<f64> {
        let t = x.nrows();
        DMatrix::from_fn(t * dh, 1, |i, _| x[(i / dh, h * dh + i % dh)])
    }

    /// Same contract as [`super::attend`], computed with dense matrices.
    pub fn attend(
        q: &DMatrix<f64>,
        k: &DMatrix<f64>,
        v: &DMatrix<f64>,
        ops: &[TokenOperator],
        kind: EncodingKind,
        heads: usize,
    ) -> Result<DMatrix<f64>, AttentionError> {
        check_qkv(q, k, v, heads)?;
        let (t, d) = (q.nrows(), q.ncols());
        let dh = d / heads;
        let identity = DMatrix::identity(t * dh, t * dh);
        let big = if kind == EncodingKind::None {
            identity
        } else {
            block_diagonal(ops)
        };
        if big.nrows() != t * dh {
            return Err(AttentionError::Shape("operator count or layout".into()));
        }
        let big_inv = big
            .clone()
            .try_inverse()
            .ok_or(AttentionError::Singular(0))?;
        let mut out = DMatrix::zeros(t, d);
        for h in 0..heads {
            let qh = big.transpose() * head_column(q, h, dh);
            let kh = &big_inv * head_column(k, h, dh);
            let vh = if kind.transforms_values() {
                &big_inv * head_column(v, h, dh)
            } else {
                head_column(v, h, dh)
            };
            // Reshape to T × d_h and run softmax(QKᵀ/√d_h)V.
            let qm = DMatrix::from_row_slice(t, dh, qh.as_slice());
            let km = DMatrix::from_row_slice(t, dh, kh.as_slice());
            let vm = DMatrix::from_row_slice(t, dh, vh.as_slice());
            let mut logits = &qm * km.transpose() / (dh as f64).sqrt();
            for i in 0..t {
                let mut row: Vec<f64> = logits.row(i).iter().copied().collect();
                softmax_in_place(&mut row);
                for (j, p) in row.into_iter().enumerate() {
                    logits[(i, j)] = p;
                }
            }
            let o = logits * vm;
            let mut flat = DMatrix::from_fn(t * dh, 1, |i, _| o[(i / dh, i % dh)]);
            if kind.transforms_values() {
                flat = &big * flat;
            }
            for i in 0..t * dh {
                out[(i / dh, h * dh + i % dh)] = flat[(i, 0)];
            }
        }
        Ok(out)
    }
}
