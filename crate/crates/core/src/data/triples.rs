use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple { head, relation, tail }
    }
}

/// Parses a `head\trelation\ttail` file, extending `vocab` with unseen symbols.
///
/// Blank lines are skipped. Duplicates are kept; [`TripleStore::new`] removes them.
pub fn parse_triples(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Triple>> {
    let text = std::fs::read_to_string(path)?;
    parse_triples_str(&text, path, vocab)
}

pub fn parse_triples_str(text: &str, source: &Path, vocab: &mut Vocabulary) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: source.to_path_buf(),
                line: i + 1,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let head = vocab.entities.get_or_insert(fields[0]);
        let relation = vocab.relations.get_or_insert(fields[1]);
        let tail = vocab.entities.get_or_insert(fields[2]);
        out.push(Triple { head, relation, tail });
    }
    Ok(out)
}

/// Deduplicated train/valid/test splits with the indices needed for 1-N
/// training and filtered ranking.
///
/// Relations are stored with their original ids `0..n_relations`. Internally
/// every relation `r` also has a reciprocal `r + n_relations`, so both
/// `hr_index` and the filter index are keyed over `0..2·n_relations`.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleStore {
    n_entities: usize,
    n_relations: usize,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    all_known: HashSet<Triple>,
    hr_index: BTreeMap<(usize, usize), BTreeSet<usize>>,
    known_index: BTreeMap<(usize, usize), BTreeSet<usize>>,
}

impl TripleStore {
    pub fn new(
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
        n_entities: usize,
        n_relations: usize,
    ) -> Result<Self> {
        let check = |t: &Triple| -> Result<()> {
            if t.head >= n_entities || t.tail >= n_entities || t.relation >= n_relations {
                return Err(Error::Lookup(format!(
                    "triple {:?} outside {} entities / {} relations",
                    t, n_entities, n_relations
                )));
            }
            Ok(())
        };
        let dedup = |v: Vec<Triple>| -> Result<Vec<Triple>> {
            let mut seen = HashSet::new();
            let mut out = Vec::with_capacity(v.len());
            for t in v {
                check(&t)?;
                if seen.insert(t) {
                    out.push(t);
                }
            }
            Ok(out)
        };
        let (train, valid, test) = (dedup(train)?, dedup(valid)?, dedup(test)?);

        let mut hr_index: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
        for t in &train {
            hr_index.entry((t.head, t.relation)).or_default().insert(t.tail);
            hr_index
                .entry((t.tail, t.relation + n_relations))
                .or_default()
                .insert(t.head);
        }
        let mut known_index: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
        let mut all_known = HashSet::new();
        for t in train.iter().chain(&valid).chain(&test) {
            all_known.insert(*t);
            known_index.entry((t.head, t.relation)).or_default().insert(t.tail);
            known_index
                .entry((t.tail, t.relation + n_relations))
                .or_default()
                .insert(t.head);
        }
        Ok(TripleStore {
            n_entities,
            n_relations,
            train,
            valid,
            test,
            all_known,
            hr_index,
            known_index,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    /// Number of original (non-reciprocal) relations.
    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    /// Number of relation rows a model needs: originals plus reciprocals.
    pub fn n_relation_rows(&self) -> usize {
        2 * self.n_relations
    }

    pub fn reciprocal(&self, relation: usize) -> usize {
        relation + self.n_relations
    }

    pub fn is_known(&self, t: &Triple) -> bool {
        self.all_known.contains(t)
    }

    pub fn n_known(&self) -> usize {
        self.all_known.len()
    }

    /// Training tails for `(head, relation)`; `relation` may be a reciprocal id.
    pub fn train_tails(&self, head: usize, relation: usize) -> Option<&BTreeSet<usize>> {
        self.hr_index.get(&(head, relation))
    }

    /// Tails known in any split for `(head, relation)`.
    pub fn known_tails(&self, head: usize, relation: usize) -> Option<&BTreeSet<usize>> {
        self.known_index.get(&(head, relation))
    }

    /// Distinct `(head, relation)` training keys in sorted order.
    pub fn training_pairs(&self) -> Vec<(usize, usize)> {
        self.hr_index.keys().copied().collect()
    }

    pub fn n_relational_triples(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// The multi-hot label vector over all candidate tails for `(head, relation)`.
pub fn one_to_n_targets(head: usize, relation: usize, store: &TripleStore, n_entities: usize) -> Result<Vec<f64>> {
    let tails = store.train_tails(head, relation).ok_or_else(|| {
        Error::Lookup(format!("no training tails for (head {}, relation {})", head, relation))
    })?;
    let mut y = vec![0.0; n_entities];
    for &t in tails {
        if t >= n_entities {
            return Err(Error::Lookup(format!("tail {} outside {} entities", t, n_entities)));
        }
        y[t] = 1.0;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn src() -> PathBuf {
        PathBuf::from("train.txt")
    }

    #[test]
    fn fresh_ids_on_empty_vocab() {
        let mut v = Vocabulary::default();
        let t = parse_triples_str("John\tstudiesAt\tDoeHighSchool\n", &src(), &mut v).unwrap();
        assert_eq!(t, vec![Triple::new(0, 0, 1)]);
        // head and relation both get id 0 in their own namespaces
        assert_eq!(v.entities.id("John"), Some(0));
        assert_eq!(v.relations.id("studiesAt"), Some(0));
    }

    #[test]
    fn duplicates_are_kept_by_parser() {
        let mut v = Vocabulary::default();
        let t = parse_triples_str("a\tr\tb\na\tr\tb\n", &src(), &mut v).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0], t[1]);
    }

    #[test]
    fn two_fields_is_a_parse_error_with_line() {
        let mut v = Vocabulary::default();
        let err = parse_triples_str("a\tr\tb\n\nx\ty\n", &src(), &mut v).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_file_is_empty_list() {
        let mut v = Vocabulary::default();
        assert!(parse_triples_str("", &src(), &mut v).unwrap().is_empty());
    }

    fn toy() -> TripleStore {
        let train = vec![Triple::new(0, 0, 2), Triple::new(1, 0, 0), Triple::new(1, 0, 3), Triple::new(1, 0, 3)];
        TripleStore::new(train, vec![Triple::new(2, 0, 3)], vec![], 4, 1).unwrap()
    }

    #[test]
    fn targets_from_index() {
        let s = toy();
        assert_eq!(s.train.len(), 3);
        assert_eq!(one_to_n_targets(0, 0, &s, 4).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(one_to_n_targets(1, 0, &s, 4).unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(one_to_n_targets(3, 0, &s, 4), Err(Error::Lookup(_))));
        // reciprocal direction
        assert_eq!(one_to_n_targets(3, 1, &s, 4).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn store_rejects_out_of_range_ids() {
        assert!(TripleStore::new(vec![Triple::new(0, 1, 0)], vec![], vec![], 2, 1).is_err());
    }

    #[test]
    fn every_train_triple_is_indexed() {
        let s = toy();
        for t in &s.train {
            assert!(s.train_tails(t.head, t.relation).unwrap().contains(&t.tail));
            assert!(s.train_tails(t.tail, s.reciprocal(t.relation)).unwrap().contains(&t.head));
        }
        assert!(s.is_known(&Triple::new(2, 0, 3)));
        assert!(s.train_tails(2, 0).is_none());
    }
}
