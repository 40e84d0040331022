//! Base score functions.
//!
//! Every model is written in "query" form: the head embedding and relation
//! are folded into a query vector `q`, and the score of a candidate tail `t`
//! is `⟨q, e_t⟩`. Scoring all tails at once is then one matrix-vector
//! product against the entity table.
//!
//! ComplEx vectors are laid out as `[re | im]`, so a ComplEx query and
//! entity row both have length `2H`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{dim_err, Error, Result};
use crate::fusion::FusionConfig;
use crate::numeric::conv::{conv2d, conv2d_backward, ConvShape};
use crate::numeric::ops::{self, DropoutMask};
use crate::numeric::{dot, Tensor};
use crate::par::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    DistMult,
    ComplEx,
    ConvE,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            "conve" => Ok(ModelKind::ConvE),
            other => Err(Error::Config(format!(
                "unknown model {:?} (expected distmult|complex|conve)",
                other
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
            ModelKind::ConvE => "conve",
        })
    }
}

/// ConvE geometry. Head and relation embeddings are each reshaped to
/// `reshape_height × reshape_width` and stacked vertically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSettings {
    pub filters: usize,
    pub kernel: usize,
    pub reshape_height: usize,
    pub reshape_width: usize,
}

impl ConvSettings {
    /// 32 filters of 3×3 over a `(H/10) × 10` reshape.
    pub fn for_dim(dim: usize) -> Self {
        ConvSettings {
            filters: 32,
            kernel: 3,
            reshape_height: dim / 10,
            reshape_width: 10,
        }
    }

    pub fn conv_shape(&self) -> ConvShape {
        ConvShape {
            in_h: 2 * self.reshape_height,
            in_w: self.reshape_width,
            kernel: self.kernel,
            filters: self.filters,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutRates {
    pub embedding: f64,
    pub feature_map: f64,
    pub projection: f64,
}

impl Default for DropoutRates {
    fn default() -> Self {
        DropoutRates {
            embedding: 0.2,
            feature_map: 0.2,
            projection: 0.3,
        }
    }
}

impl DropoutRates {
    pub fn none() -> Self {
        DropoutRates {
            embedding: 0.0,
            feature_map: 0.0,
            projection: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub dim: usize,
    pub conv: ConvSettings,
    pub dropout: DropoutRates,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, dim: usize) -> Self {
        ModelConfig {
            kind,
            dim,
            conv: ConvSettings::for_dim(dim),
            dropout: DropoutRates::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        for (name, r) in [
            ("embedding", self.dropout.embedding),
            ("feature-map", self.dropout.feature_map),
            ("projection", self.dropout.projection),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("{} dropout {} outside [0, 1)", name, r)));
            }
        }
        if self.kind == ModelKind::ConvE {
            let c = &self.conv;
            if c.reshape_height * c.reshape_width != self.dim {
                return Err(Error::Config(format!(
                    "ConvE reshape {}x{} does not hold {} values",
                    c.reshape_height, c.reshape_width, self.dim
                )));
            }
            c.conv_shape()
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Width of entity/relation rows and of queries: `H`, or `2H` for ComplEx.
    pub fn row_width(&self) -> usize {
        match self.kind {
            ModelKind::ComplEx => 2 * self.dim,
            _ => self.dim,
        }
    }

    /// Length of the flattened ConvE feature map.
    pub fn conv_flat_len(&self) -> usize {
        self.conv.conv_shape().out_len()
    }
}

/// `Σ e_i ⊙ e_j ⊙ r_k`, each term formed as `(e_i·e_j)·r_k` so that swapping
/// `e_i` and `e_j` gives the identical float.
pub fn score_distmult(e_i: &[f64], e_j: &[f64], r_k: &[f64]) -> Result<f64> {
    if e_i.len() != e_j.len() || e_i.len() != r_k.len() {
        return Err(dim_err(
            "score_distmult",
            format!("lengths {}, {}, {}", e_i.len(), e_j.len(), r_k.len()),
        ));
    }
    Ok(e_i
        .iter()
        .zip(e_j)
        .zip(r_k)
        .map(|((a, b), r)| (a * b) * r)
        .sum())
}

/// The four-term ComplEx score; the last term is subtracted.
pub fn score_complex(
    re_i: &[f64],
    im_i: &[f64],
    re_j: &[f64],
    im_j: &[f64],
    re_r: &[f64],
    im_r: &[f64],
) -> Result<f64> {
    let h = re_i.len();
    if [im_i, re_j, im_j, re_r, im_r].iter().any(|v| v.len() != h) {
        return Err(dim_err("score_complex", "all six vectors must have equal length"));
    }
    Ok(score_distmult(re_i, re_j, re_r)? + score_distmult(im_i, im_j, re_r)? + score_distmult(re_i, im_j, im_r)?
        - score_distmult(im_i, re_j, im_r)?)
}

/// ConvE weights: a `[filters, k, k]` bank and a `flat × H` projection.
#[derive(Clone, Copy, Debug)]
pub struct ConvParams<'a> {
    pub filters: &'a Tensor,
    pub projection: &'a Tensor,
}

/// Evaluation-mode ConvE score `relu(vec(relu([e_i; r_k] ∗ ω)) W) · e_j`.
pub fn score_conve(config: &ModelConfig, e_i: &[f64], e_j: &[f64], r_k: &[f64], params: ConvParams<'_>) -> Result<f64> {
    config.validate()?;
    if e_j.len() != config.dim {
        return Err(dim_err("score_conve", format!("tail length {} vs H={}", e_j.len(), config.dim)));
    }
    let (q, _) = conve_query(config, e_i, r_k, params, false, &mut NoRng)?;
    Ok(dot(&q, e_j))
}

/// Scores `(e_i, r_k)` against every row of `candidates`.
pub fn score_all_tails(
    config: &ModelConfig,
    e_i: &[f64],
    r_k: &[f64],
    candidates: &Tensor,
    conv: Option<ConvParams<'_>>,
) -> Result<Vec<f64>> {
    if config.kind == ModelKind::DistMult {
        return (0..candidates.rows())
            .map(|x| score_distmult(e_i, candidates.row(x), r_k))
            .collect();
    }
    let (q, _) = query_forward(config, e_i, r_k, conv, false, &mut NoRng)?;
    if candidates.cols() != q.len() {
        return Err(dim_err(
            "score_all_tails",
            format!("candidate width {} vs query {}", candidates.cols(), q.len()),
        ));
    }
    Ok((0..candidates.rows()).map(|x| dot(&q, candidates.row(x))).collect())
}

/// Intermediate values a query needs for its backward pass.
#[derive(Clone, Debug)]
pub enum QueryCache {
    DistMult { e: Vec<f64>, r: Vec<f64> },
    ComplEx { e: Vec<f64>, r: Vec<f64> },
    ConvE(Box<ConvCache>),
}

#[derive(Clone, Debug)]
pub struct ConvCache {
    grid: Vec<f64>,
    fmap: Vec<f64>,
    fmap_mask: DropoutMask,
    features: Tensor,
    proj_mask: DropoutMask,
    hidden: Tensor,
}

/// Gradients of a query with respect to its inputs and (for ConvE) weights.
#[derive(Clone, Debug)]
pub struct QueryGrads {
    pub d_e: Vec<f64>,
    pub d_r: Vec<f64>,
    pub d_filters: Option<Vec<f64>>,
    pub d_projection: Option<Tensor>,
}

/// Builds the query vector for head row `e` and relation row `r`.
///
/// `train` only matters for ConvE, whose feature-map and projection dropout
/// draw from `rng`.
pub fn query_forward<R: Rng + ?Sized>(
    config: &ModelConfig,
    e: &[f64],
    r: &[f64],
    conv: Option<ConvParams<'_>>,
    train: bool,
    rng: &mut R,
) -> Result<(Vec<f64>, QueryCache)> {
    let w = config.row_width();
    if e.len() != w || r.len() != w {
        return Err(dim_err(
            "query",
            format!("head {} / relation {} vs row width {}", e.len(), r.len(), w),
        ));
    }
    match config.kind {
        ModelKind::DistMult => {
            let q = e.iter().zip(r).map(|(a, b)| a * b).collect();
            Ok((q, QueryCache::DistMult { e: e.to_vec(), r: r.to_vec() }))
        }
        ModelKind::ComplEx => {
            let h = config.dim;
            let (er, ei) = e.split_at(h);
            let (rr, ri) = r.split_at(h);
            let mut q = Vec::with_capacity(2 * h);
            q.extend((0..h).map(|k| er[k] * rr[k] - ei[k] * ri[k]));
            q.extend((0..h).map(|k| ei[k] * rr[k] + er[k] * ri[k]));
            Ok((q, QueryCache::ComplEx { e: e.to_vec(), r: r.to_vec() }))
        }
        ModelKind::ConvE => {
            let params = conv.ok_or_else(|| Error::Config("ConvE query without conv parameters".into()))?;
            conve_query(config, e, r, params, train, rng)
        }
    }
}

fn conve_query<R: Rng + ?Sized>(
    config: &ModelConfig,
    e: &[f64],
    r: &[f64],
    params: ConvParams<'_>,
    train: bool,
    rng: &mut R,
) -> Result<(Vec<f64>, QueryCache)> {
    let shape = config.conv.conv_shape();
    if e.len() != config.dim || r.len() != config.dim {
        return Err(dim_err("score_conve", format!("inputs {} / {} vs H={}", e.len(), r.len(), config.dim)));
    }
    if params.projection.rows() != shape.out_len() || params.projection.cols() != config.dim {
        return Err(dim_err(
            "score_conve",
            format!("projection {:?} vs {}x{}", params.projection.shape(), shape.out_len(), config.dim),
        ));
    }
    // stacking the two reshaped grids vertically is plain concatenation
    let mut grid = Vec::with_capacity(2 * config.dim);
    grid.extend_from_slice(e);
    grid.extend_from_slice(r);
    let fmap = conv2d(shape, &grid, params.filters)?;
    let act = ops::relu(&Tensor::row_vector(&fmap));
    let (features, fmap_mask) = ops::dropout(&act, config.dropout.feature_map, train, rng)?;
    let proj = ops::affine(&features, params.projection, Exec::Sequential)?;
    let (hidden, proj_mask) = ops::dropout(&proj, config.dropout.projection, train, rng)?;
    let q = ops::relu(&hidden).into_vec();
    Ok((
        q,
        QueryCache::ConvE(Box::new(ConvCache {
            grid,
            fmap,
            fmap_mask,
            features,
            proj_mask,
            hidden,
        })),
    ))
}

/// Backward of [`query_forward`] given `∂loss/∂q`.
pub fn query_backward(
    config: &ModelConfig,
    cache: &QueryCache,
    d_q: &[f64],
    conv: Option<ConvParams<'_>>,
) -> Result<QueryGrads> {
    match cache {
        QueryCache::DistMult { e, r } => Ok(QueryGrads {
            d_e: d_q.iter().zip(r).map(|(g, r)| g * r).collect(),
            d_r: d_q.iter().zip(e).map(|(g, e)| g * e).collect(),
            d_filters: None,
            d_projection: None,
        }),
        QueryCache::ComplEx { e, r } => {
            let h = config.dim;
            let (er, ei) = e.split_at(h);
            let (rr, ri) = r.split_at(h);
            let (gr, gi) = d_q.split_at(h);
            let mut d_e = vec![0.0; 2 * h];
            let mut d_r = vec![0.0; 2 * h];
            for k in 0..h {
                d_e[k] = gr[k] * rr[k] + gi[k] * ri[k];
                d_e[h + k] = -gr[k] * ri[k] + gi[k] * rr[k];
                d_r[k] = gr[k] * er[k] + gi[k] * ei[k];
                d_r[h + k] = -gr[k] * ei[k] + gi[k] * er[k];
            }
            Ok(QueryGrads {
                d_e,
                d_r,
                d_filters: None,
                d_projection: None,
            })
        }
        QueryCache::ConvE(c) => {
            let params = conv.ok_or_else(|| Error::Config("ConvE backward without conv parameters".into()))?;
            let shape = config.conv.conv_shape();
            let d_hidden = ops::relu_backward(&c.hidden, &Tensor::row_vector(d_q))?;
            let d_proj = ops::dropout_backward(&c.proj_mask, &d_hidden)?;
            let (d_features, d_projection) =
                ops::affine_backward(&c.features, params.projection, &d_proj, Exec::Sequential)?;
            let d_act = ops::dropout_backward(&c.fmap_mask, &d_features)?;
            let d_fmap = ops::relu_backward(&Tensor::row_vector(&c.fmap), &d_act)?;
            let (d_grid, d_filters) = conv2d_backward(shape, &c.grid, params.filters, d_fmap.data())?;
            let (d_e, d_r) = d_grid.split_at(config.dim);
            Ok(QueryGrads {
                d_e: d_e.to_vec(),
                d_r: d_r.to_vec(),
                d_filters: Some(d_filters),
                d_projection: Some(d_projection),
            })
        }
    }
}

/// Parameter count per model family, biases excluded.
///
/// `n_relations` is the number of relation rows the model holds. Fusion adds
/// the size of `g`'s weights; ComplEx carries two independent fusions (real
/// and imaginary part), so its overhead is doubled.
pub fn parameter_count(config: &ModelConfig, n_entities: usize, n_relations: usize, n_data: usize, fusion: &FusionConfig) -> usize {
    let h = config.dim;
    let base = n_entities * h + n_relations * h;
    let gamma = match config.kind {
        ModelKind::DistMult => base,
        ModelKind::ComplEx => 2 * base,
        ModelKind::ConvE => base + conve_conv_params(config),
    };
    let per_g = fusion.weight_count(h, n_data);
    let copies = if config.kind == ModelKind::ComplEx { 2 } else { 1 };
    gamma + copies * per_g
}

/// `C`: filter bank plus projection.
pub fn conve_conv_params(config: &ModelConfig) -> usize {
    let c = &config.conv;
    c.filters * c.kernel * c.kernel + config.conv_flat_len() * config.dim
}

/// An RNG that must never be asked for randomness; used for evaluation-mode
/// forward passes.
pub(crate) struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("evaluation-mode forward drew randomness")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("evaluation-mode forward drew randomness")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("evaluation-mode forward drew randomness")
    }
    fn try_fill_bytes(&mut self, _: &mut [u8]) -> std::result::Result<(), rand::Error> {
        unreachable!("evaluation-mode forward drew randomness")
    }
}
