//! Knowledge graph ingestion.
//!
//! A dataset directory holds `train.txt`, `valid.txt`, `test.txt`
//! (`head\trelation\ttail`) and optionally `numerical_literals.txt`
//! (`entity\tdata_relation\tvalue`). Files are read in that order, which fixes
//! the id assignment.

mod literals;
mod triples;
mod vocab;

use std::fmt;
use std::io::Write;
use std::path::Path;

pub use literals::{build_literal_matrix, parse_literals, parse_literals_str, LiteralMatrix, LiteralTriple};
pub use triples::{one_to_n_targets, parse_triples, parse_triples_str, Split, Triple, TripleStore};
pub use vocab::{Symbols, Vocabulary};

use crate::error::Result;

pub const TRAIN_FILE: &str = "train.txt";
pub const VALID_FILE: &str = "valid.txt";
pub const TEST_FILE: &str = "test.txt";
pub const LITERAL_FILE: &str = "numerical_literals.txt";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadOptions {
    pub min_frequency: usize,
    pub normalize: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            min_frequency: 5,
            normalize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub store: TripleStore,
    pub literals: LiteralMatrix,
}

impl Dataset {
    pub fn load(dir: &Path, opts: LoadOptions) -> Result<Self> {
        let mut vocab = Vocabulary::default();
        let train = parse_triples(&dir.join(TRAIN_FILE), &mut vocab)?;
        let valid = parse_triples(&dir.join(VALID_FILE), &mut vocab)?;
        let test = parse_triples(&dir.join(TEST_FILE), &mut vocab)?;
        let store = TripleStore::new(train, valid, test, vocab.entities.len(), vocab.relations.len())?;
        let lit_path = dir.join(LITERAL_FILE);
        let literals = if lit_path.exists() {
            let raw = parse_literals(&lit_path)?;
            build_literal_matrix(&raw, &mut vocab, opts.min_frequency, opts.normalize)?
        } else {
            LiteralMatrix::empty(vocab.entities.len())
        };
        Ok(Dataset { vocab, store, literals })
    }

    /// Writes the dataset back out in the directory layout [`Dataset::load`]
    /// reads. Literal values are written as stored (normalised if the matrix
    /// is).
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let ent = |i: usize| self.vocab.entities.name(i).unwrap_or("?");
        let rel = |i: usize| self.vocab.relations.name(i).unwrap_or("?");
        for (file, split) in [(TRAIN_FILE, Split::Train), (VALID_FILE, Split::Valid), (TEST_FILE, Split::Test)] {
            let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(file))?);
            for t in self.store.split(split) {
                writeln!(w, "{}\t{}\t{}", ent(t.head), rel(t.relation), ent(t.tail))?;
            }
            w.flush()?;
        }
        if self.literals.n_data() > 0 {
            let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(LITERAL_FILE))?);
            for i in 0..self.literals.n_entities() {
                for k in 0..self.literals.n_data() {
                    if self.literals.is_present(i, k) {
                        let d = self.vocab.data_relations.name(k).unwrap_or("?");
                        writeln!(w, "{}\t{}\t{}", ent(i), d, self.literals.get(i, k))?;
                    }
                }
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn stats(&self) -> DatasetStats {
        dataset_stats(&self.store, &self.literals)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub n_entities: usize,
    pub n_relations: usize,
    pub n_data_relations: usize,
    pub n_relational_triples: usize,
    pub n_literal_triples: usize,
}

pub fn dataset_stats(store: &TripleStore, literals: &LiteralMatrix) -> DatasetStats {
    DatasetStats {
        n_entities: store.n_entities(),
        n_relations: store.n_relations(),
        n_data_relations: literals.n_data(),
        n_relational_triples: store.n_relational_triples(),
        n_literal_triples: literals.n_literal_triples(),
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "entities\t{}", self.n_entities)?;
        writeln!(f, "relations\t{}", self.n_relations)?;
        writeln!(f, "data_relations\t{}", self.n_data_relations)?;
        writeln!(f, "relational_triples\t{}", self.n_relational_triples)?;
        write!(f, "literal_triples\t{}", self.n_literal_triples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dataset_stats_are_zero() {
        let store = TripleStore::new(vec![], vec![], vec![], 0, 0).unwrap();
        assert_eq!(dataset_stats(&store, &LiteralMatrix::empty(0)), DatasetStats::default());
    }

    #[test]
    fn load_is_deterministic_and_counts_match() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(TRAIN_FILE), "a\tr\tb\nb\tr\tc\na\ts\tc\n").unwrap();
        std::fs::write(dir.path().join(VALID_FILE), "c\tr\ta\n").unwrap();
        std::fs::write(dir.path().join(TEST_FILE), "c\ts\td\n").unwrap();
        std::fs::write(dir.path().join(LITERAL_FILE), "a\tyear\t1990\nd\tyear\t2000\nd\tyear\t1980\n").unwrap();
        let opts = LoadOptions { min_frequency: 1, normalize: true };
        let a = Dataset::load(dir.path(), opts).unwrap();
        let b = Dataset::load(dir.path(), opts).unwrap();
        assert_eq!(a, b);
        let s = a.stats();
        assert_eq!((s.n_entities, s.n_relations, s.n_data_relations), (4, 2, 1));
        assert_eq!((s.n_relational_triples, s.n_literal_triples), (5, 3));
        assert_eq!(a.literals.n_present(), 2);
        let d = a.vocab.entities.id("d").unwrap();
        assert_eq!(a.literals.get(d, 0), 1.0);
    }
}
