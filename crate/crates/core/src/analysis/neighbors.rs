use std::fmt;
use std::str::FromStr;

use crate::data::{LiteralMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numeric::{dot, Tensor};

/// Which representation of an entity to compare.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// The learned embedding `e_i` (ComplEx: `[re | im]`).
    Embedding,
    /// The literal row `l_i`.
    Literal,
    /// The fused embedding `g(e_i, l_i)`.
    Enriched,
}

impl FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "embedding" => Ok(Space::Embedding),
            "literal" => Ok(Space::Literal),
            "enriched" => Ok(Space::Enriched),
            other => Err(Error::Config(format!(
                "unknown space {:?} (expected embedding|literal|enriched)",
                other
            ))),
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Embedding => "embedding",
            Space::Literal => "literal",
            Space::Enriched => "enriched",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborQuery {
    pub entity: String,
    pub space: Space,
    pub k: usize,
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// One row per entity in the requested space.
pub fn space_vectors(space: Space, model: &Model, literals: &LiteralMatrix) -> Result<Tensor> {
    match space {
        Space::Literal => Ok(literals.to_tensor()),
        Space::Enriched => Ok(model.entity_table(literals)?.table),
        Space::Embedding => {
            let parts: Vec<&Tensor> = if model.params.contains("entity") {
                vec![model.params.value("entity")?]
            } else {
                vec![model.params.value("entity.re")?, model.params.value("entity.im")?]
            };
            if parts.len() == 1 {
                Ok(parts[0].clone())
            } else {
                crate::numeric::ops::concat_cols(parts[0], parts[1])
            }
        }
    }
}

/// The `k` entities most cosine-similar to the query entity, excluding the
/// entity itself. Ties are broken by entity id.
pub fn nearest_neighbors(
    query: &NeighborQuery,
    vocab: &Vocabulary,
    model: &Model,
    literals: &LiteralMatrix,
) -> Result<Vec<(String, f64)>> {
    let id = vocab
        .entities
        .id(&query.entity)
        .ok_or_else(|| Error::Lookup(format!("unknown entity {:?}", query.entity)))?;
    let n = vocab.entities.len();
    if query.k == 0 || query.k >= n {
        return Err(Error::Config(format!("k = {} must lie in [1, {})", query.k, n)));
    }
    let vectors = space_vectors(query.space, model, literals)?;
    if vectors.rows() != n {
        return Err(Error::Dimension {
            op: "nearest_neighbors",
            detail: format!("{} vectors for {} entities", vectors.rows(), n),
        });
    }
    let target = vectors.row(id);
    let sims = model
        .exec
        .map_range(n, |x| cosine_similarity(target, vectors.row(x)));
    let mut order: Vec<usize> = (0..n).filter(|&x| x != id).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(query.k)
        .map(|x| (vocab.entities.name(x).unwrap_or("?").to_owned(), sims[x]))
        .collect())
}
