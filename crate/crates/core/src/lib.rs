//! Link prediction over knowledge graphs with literal-enriched entity embeddings.
//!
//! Three base score functions (DistMult, ComplEx, ConvE) are trained with 1-N
//! scoring and a sigmoid + binary cross-entropy loss. Any of them can be
//! wrapped with a learnable fusion `g(e, l)` that mixes an entity's embedding
//! with its row of numeric literals before scoring.
//!
//! Module map:
//! - [`data`]: TSV ingestion, vocabularies, triple indices, the literal matrix.
//! - [`numeric`]: dense arrays, primitives with analytic gradients, Adam, checkpoints.
//! - [`score`]: the base score functions, per-triple and batched.
//! - [`fusion`]: the literal fusion transforms.
//! - [`model`]: a parameterised model combining both, with 1-N forward/backward.
//! - [`train`]: loss, label smoothing, the epoch loop and early stopping.
//! - [`eval`]: raw and filtered ranking metrics.
//! - [`analysis`]: nearest neighbours and the synthetic literal benchmark.

pub mod analysis;
pub mod data;
mod error;
pub mod eval;
pub mod fusion;
pub mod model;
pub mod numeric;
pub mod par;
pub mod score;
pub mod train;

pub use error::{Error, Result};
