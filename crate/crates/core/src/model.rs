//! A parameterised link-prediction model: base score function + literal fusion.
//!
//! Parameter names in the store:
//!
//! - `entity`, `relation` (DistMult, ConvE) or `entity.re`, `entity.im`,
//!   `relation.re`, `relation.im` (ComplEx), each `rows × H`
//! - `conv.filters` `[F, k, k]` and `conv.proj` `flat × H` (ConvE)
//! - `fusion.w` or `fusion.w1`/`fusion.w2`; ComplEx has `fusion.re.*` and
//!   `fusion.im.*`
//!
//! The same `g` enriches an entity whether it appears as head or tail: the
//! fused entity table is computed once per batch and both roles read from it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::LiteralMatrix;
use crate::error::{dim_err, Error, Result};
use crate::fusion::{fuse, fuse_backward, FusionCache, FusionConfig, FusionKind, FusionWeights};
use crate::numeric::ops::{self, DropoutMask};
use crate::numeric::{dot, init_parameters, matmul, matmul_nt, matmul_tn, ParameterStore, Tensor};
use crate::par::Exec;
use crate::score::{self, ConvParams, ModelConfig, ModelKind, QueryCache};
use crate::train::bce_with_logits;

pub const CONV_FILTERS: &str = "conv.filters";
pub const CONV_PROJ: &str = "conv.proj";

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub fusion: FusionConfig,
    n_entities: usize,
    n_relations: usize,
    n_data: usize,
    pub params: ParameterStore,
    pub exec: Exec,
}

fn parts(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::ComplEx => &["re", "im"],
        _ => &[""],
    }
}

fn named(base: &str, part: &str) -> String {
    if part.is_empty() {
        base.to_owned()
    } else {
        format!("{}.{}", base, part)
    }
}

/// Parameter names and shapes for a configuration, in initialisation order.
pub fn parameter_shapes(
    config: &ModelConfig,
    fusion: &FusionConfig,
    n_entities: usize,
    n_relations: usize,
    n_data: usize,
) -> Vec<(String, Vec<usize>)> {
    let h = config.dim;
    let mut shapes = Vec::new();
    for p in parts(config.kind) {
        shapes.push((named("entity", p), vec![n_entities, h]));
    }
    for p in parts(config.kind) {
        shapes.push((named("relation", p), vec![n_relations, h]));
    }
    if config.kind == ModelKind::ConvE {
        let c = &config.conv;
        shapes.push((CONV_FILTERS.to_owned(), vec![c.filters, c.kernel, c.kernel]));
        shapes.push((CONV_PROJ.to_owned(), vec![config.conv_flat_len(), h]));
    }
    for p in parts(config.kind) {
        for (suffix, shape) in fusion.weight_shapes(h, n_data) {
            shapes.push((format!("{}.{}", named("fusion", p), suffix), shape));
        }
    }
    shapes
}

/// The fused entity table of one forward pass.
pub struct EntityTable {
    pub table: Tensor,
    caches: Vec<FusionCache>,
}

/// Per-example state carried from the forward to the backward pass.
struct ExampleForward {
    q: Vec<f64>,
    cache: QueryCache,
    e_mask: DropoutMask,
    r_mask: DropoutMask,
}

impl Model {
    /// A freshly initialised model. `n_relations` counts relation rows,
    /// reciprocals included.
    pub fn new(
        config: ModelConfig,
        fusion: FusionConfig,
        n_entities: usize,
        n_relations: usize,
        n_data: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        fusion.validate()?;
        let shapes = parameter_shapes(&config, &fusion, n_entities, n_relations, n_data);
        let params = init_parameters(&shapes, seed)?;
        Ok(Model {
            config,
            fusion,
            n_entities,
            n_relations,
            n_data,
            params,
            exec: Exec::default(),
        })
    }

    /// Wraps an existing store, checking that it holds exactly the expected
    /// entries.
    pub fn from_store(
        config: ModelConfig,
        fusion: FusionConfig,
        n_entities: usize,
        n_relations: usize,
        n_data: usize,
        params: ParameterStore,
    ) -> Result<Self> {
        config.validate()?;
        fusion.validate()?;
        let shapes = parameter_shapes(&config, &fusion, n_entities, n_relations, n_data);
        if shapes.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter entries, found {}",
                shapes.len(),
                params.len()
            )));
        }
        for (name, shape) in &shapes {
            let v = params
                .value(name)
                .map_err(|_| Error::Checkpoint(format!("missing entry {:?}", name)))?;
            if v.shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "entry {:?} has shape {:?}, expected {:?}",
                    name,
                    v.shape(),
                    shape
                )));
            }
        }
        Ok(Model {
            config,
            fusion,
            n_entities,
            n_relations,
            n_data,
            params,
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn parameter_count(&self) -> usize {
        score::parameter_count(&self.config, self.n_entities, self.n_relations, self.n_data, &self.fusion)
    }

    fn conv_params(&self) -> Option<ConvParams<'_>> {
        if self.config.kind != ModelKind::ConvE {
            return None;
        }
        Some(ConvParams {
            filters: self.params.value(CONV_FILTERS).ok()?,
            projection: self.params.value(CONV_PROJ).ok()?,
        })
    }

    fn fusion_weights(&self, part: &str) -> Result<FusionWeights<'_>> {
        let prefix = named("fusion", part);
        Ok(match self.fusion.kind {
            FusionKind::None => FusionWeights::none(),
            FusionKind::Mlp => FusionWeights::mlp(
                self.params.value(&format!("{}.w1", prefix))?,
                self.params.value(&format!("{}.w2", prefix))?,
            ),
            _ => FusionWeights::single(self.params.value(&format!("{}.w", prefix))?),
        })
    }

    fn literal_tensor(&self, literals: &LiteralMatrix) -> Result<Tensor> {
        if self.fusion.kind == FusionKind::None {
            return Ok(Tensor::zeros(&[self.n_entities, 0]));
        }
        if literals.n_entities() != self.n_entities || literals.n_data() != self.n_data {
            return Err(dim_err(
                "literal_matrix",
                format!(
                    "{}x{} literals for a model over {} entities and {} data relations",
                    literals.n_entities(),
                    literals.n_data(),
                    self.n_entities,
                    self.n_data
                ),
            ));
        }
        Ok(literals.to_tensor())
    }

    /// Fuses every entity embedding with its literal row.
    pub fn entity_table(&self, literals: &LiteralMatrix) -> Result<EntityTable> {
        let l = self.literal_tensor(literals)?;
        let mut outs = Vec::new();
        let mut caches = Vec::new();
        for p in parts(self.config.kind) {
            let e = self.params.value(&named("entity", p))?;
            let (out, cache) = fuse(self.fusion.kind, e, &l, self.fusion_weights(p)?, self.exec)?;
            outs.push(out);
            caches.push(cache);
        }
        let table = if outs.len() == 2 {
            ops::concat_cols(&outs[0], &outs[1])?
        } else {
            outs.pop().unwrap()
        };
        Ok(EntityTable { table, caches })
    }

    /// Relation row of width `H` (or `2H` for ComplEx).
    pub fn relation_row(&self, relation: usize) -> Result<Vec<f64>> {
        if relation >= self.n_relations {
            return Err(Error::Lookup(format!("relation {} of {}", relation, self.n_relations)));
        }
        let mut row = Vec::with_capacity(self.config.row_width());
        for p in parts(self.config.kind) {
            row.extend_from_slice(self.params.value(&named("relation", p))?.row(relation));
        }
        Ok(row)
    }

    fn check_entity(&self, e: usize) -> Result<()> {
        if e >= self.n_entities {
            return Err(Error::Lookup(format!("entity {} of {}", e, self.n_entities)));
        }
        Ok(())
    }

    /// Literal-enriched embedding of one entity, computed on its own.
    pub fn enriched_entity(&self, entity: usize, literals: &LiteralMatrix) -> Result<Vec<f64>> {
        self.check_entity(entity)?;
        let l = if self.fusion.kind == FusionKind::None {
            Tensor::zeros(&[1, 0])
        } else {
            Tensor::row_vector(self.literal_tensor(literals)?.row(entity))
        };
        let mut out = Vec::with_capacity(self.config.row_width());
        for p in parts(self.config.kind) {
            let e = Tensor::row_vector(self.params.value(&named("entity", p))?.row(entity));
            let (v, _) = fuse(self.fusion.kind, &e, &l, self.fusion_weights(p)?, Exec::Sequential)?;
            out.extend(v.into_vec());
        }
        Ok(out)
    }

    /// Score of one triple, `f(g(e_h, l_h), g(e_t, l_t), r)`, in evaluation
    /// mode. Uses the per-triple score functions rather than the 1-N path.
    pub fn score_triple(&self, head: usize, relation: usize, tail: usize, literals: &LiteralMatrix) -> Result<f64> {
        let eh = self.enriched_entity(head, literals)?;
        let et = self.enriched_entity(tail, literals)?;
        let r = self.relation_row(relation)?;
        let h = self.config.dim;
        match self.config.kind {
            ModelKind::DistMult => score::score_distmult(&eh, &et, &r),
            ModelKind::ComplEx => {
                score::score_complex(&eh[..h], &eh[h..], &et[..h], &et[h..], &r[..h], &r[h..])
            }
            ModelKind::ConvE => {
                score::score_conve(&self.config, &eh, &et, &r, self.conv_params().expect("ConvE parameters"))
            }
        }
    }

    /// Evaluation-mode scorer holding the fused entity table.
    pub fn scorer(&self, literals: &LiteralMatrix) -> Result<Scorer<'_>> {
        Ok(Scorer {
            model: self,
            table: self.entity_table(literals)?.table,
        })
    }

    fn example_forward(&self, table: &Tensor, head: usize, relation: usize, seed: Option<u64>) -> Result<ExampleForward> {
        self.check_entity(head)?;
        let e = table.row(head);
        let r = self.relation_row(relation)?;
        let rate = self.config.dropout.embedding;
        let (q, cache, e_mask, r_mask) = match seed {
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let e_mask = DropoutMask::sample(e.len(), rate, &mut rng)?;
                let r_mask = DropoutMask::sample(r.len(), rate, &mut rng)?;
                let (q, cache) = score::query_forward(
                    &self.config,
                    &e_mask.apply(e),
                    &r_mask.apply(&r),
                    self.conv_params(),
                    true,
                    &mut rng,
                )?;
                (q, cache, e_mask, r_mask)
            }
            None => {
                let (q, cache) =
                    score::query_forward(&self.config, e, &r, self.conv_params(), false, &mut score::NoRng)?;
                (q, cache, DropoutMask::identity(e.len()), DropoutMask::identity(r.len()))
            }
        };
        Ok(ExampleForward { q, cache, e_mask, r_mask })
    }

    /// 1-N forward and backward over a batch of `(head, relation)` queries.
    ///
    /// `targets[b]` is the (possibly smoothed) label vector of query `b`. The
    /// loss is the sigmoid binary cross-entropy averaged over candidates and
    /// then over the batch; its gradient is accumulated into `self.params`.
    /// With `train == false` no dropout is applied and `rng` is untouched.
    pub fn forward_backward(
        &mut self,
        batch: &[(usize, usize)],
        targets: &[Vec<f64>],
        literals: &LiteralMatrix,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        if batch.len() != targets.len() {
            return Err(dim_err("forward_backward", format!("{} queries, {} targets", batch.len(), targets.len())));
        }
        if batch.is_empty() {
            return Ok(0.0);
        }
        let exec = self.exec;
        let n_batch = batch.len();
        let width = self.config.row_width();
        let et = self.entity_table(literals)?;
        let seeds: Vec<Option<u64>> = batch.iter().map(|_| train.then(|| rng.next_u64())).collect();

        let this = &*self;
        let forwards = exec
            .map_range(n_batch, |b| this.example_forward(&et.table, batch[b].0, batch[b].1, seeds[b]))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;

        let mut queries = Tensor::zeros(&[n_batch, width]);
        for (b, f) in forwards.iter().enumerate() {
            queries.row_mut(b).copy_from_slice(&f.q);
        }
        let scores = matmul_nt(&queries, &et.table, exec)?;
        let losses = exec.map_range(n_batch, |b| bce_with_logits(scores.row(b), &targets[b]));
        let mut d_scores = Tensor::zeros(scores.shape());
        let mut total = 0.0;
        let inv_batch = 1.0 / n_batch as f64;
        for (b, res) in losses.into_iter().enumerate() {
            let (loss, grad) = res?;
            total += loss;
            d_scores
                .row_mut(b)
                .iter_mut()
                .zip(grad)
                .for_each(|(d, g)| *d = g * inv_batch);
        }

        let mut d_table = matmul_tn(&d_scores, &queries, exec)?;
        let d_queries = matmul(&d_scores, &et.table, exec)?;
        let conv = this.conv_params();
        let backs = exec
            .map_range(n_batch, |b| {
                score::query_backward(&this.config, &forwards[b].cache, d_queries.row(b), conv)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;

        let h = self.config.dim;
        let rel_parts = parts(self.config.kind);
        for (b, g) in backs.into_iter().enumerate() {
            let (head, relation) = batch[b];
            let d_e = forwards[b].e_mask.apply(&g.d_e);
            let d_r = forwards[b].r_mask.apply(&g.d_r);
            d_table
                .row_mut(head)
                .iter_mut()
                .zip(&d_e)
                .for_each(|(t, d)| *t += d);
            for (i, p) in rel_parts.iter().enumerate() {
                let grad = self.params.grad_mut(&named("relation", p))?;
                grad.row_mut(relation)
                    .iter_mut()
                    .zip(&d_r[i * h..(i + 1) * h])
                    .for_each(|(t, d)| *t += d);
            }
            if let Some(df) = g.d_filters {
                self.params.accumulate(CONV_FILTERS, &Tensor::from_vec(&[df.len()], df)?)?;
            }
            if let Some(dp) = g.d_projection {
                self.params.accumulate(CONV_PROJ, &dp)?;
            }
        }

        let d_parts = if rel_parts.len() == 2 {
            let (a, b) = ops::concat_cols_backward(&d_table, h)?;
            vec![a, b]
        } else {
            vec![d_table]
        };
        for ((p, d_out), cache) in rel_parts.iter().zip(d_parts).zip(&et.caches) {
            let e_name = named("entity", p);
            let grads = {
                let e = self.params.value(&e_name)?;
                fuse_backward(cache, e, self.fusion_weights(p)?, &d_out, exec)?
            };
            self.params.accumulate(&e_name, &grads.d_e)?;
            let prefix = named("fusion", p);
            match self.fusion.kind {
                FusionKind::None => {}
                FusionKind::Mlp => {
                    self.params.accumulate(&format!("{}.w1", prefix), grads.d_w.as_ref().unwrap())?;
                    self.params.accumulate(&format!("{}.w2", prefix), grads.d_w2.as_ref().unwrap())?;
                }
                _ => self.params.accumulate(&format!("{}.w", prefix), grads.d_w.as_ref().unwrap())?,
            }
        }
        Ok(total * inv_batch)
    }
}

/// Evaluation-mode 1-N scorer over a frozen model.
pub struct Scorer<'m> {
    model: &'m Model,
    table: Tensor,
}

impl<'m> Scorer<'m> {
    /// The fused entity table (`N_e × H`, or `N_e × 2H` for ComplEx).
    pub fn table(&self) -> &Tensor {
        &self.table
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    /// Scores of `(head, relation, x)` for every candidate `x`.
    pub fn scores(&self, head: usize, relation: usize) -> Result<Vec<f64>> {
        if self.model.config.kind == ModelKind::DistMult {
            self.model.check_entity(head)?;
            let e = self.table.row(head);
            let r = self.model.relation_row(relation)?;
            return (0..self.table.rows())
                .map(|x| score::score_distmult(e, self.table.row(x), &r))
                .collect();
        }
        let f = self.model.example_forward(&self.table, head, relation, None)?;
        Ok((0..self.table.rows()).map(|x| dot(&f.q, self.table.row(x))).collect())
    }
}
