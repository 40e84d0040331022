//! Embedding-space inspection and the synthetic literal benchmark.

mod neighbors;
mod synthetic;

pub use neighbors::{cosine_similarity, nearest_neighbors, space_vectors, NeighborQuery, Space};
pub use synthetic::{
    generate_synthetic, generate_with, oracle_accuracy, Oracle, SplitUnit, SyntheticConfig, SyntheticDataset, KNOWS, POS_X, POS_Y,
    STUDIES_AT,
};
