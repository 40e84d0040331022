use std::collections::HashMap;
use std::path::Path;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// One `(entity, data_relation, value)` line of a literal file.
#[derive(Clone, Debug, PartialEq)]
pub struct LiteralTriple {
    pub entity: String,
    pub data_relation: String,
    pub value: f64,
}

/// Parses an `entity\tdata_relation\tvalue` file.
pub fn parse_literals(path: &Path) -> Result<Vec<LiteralTriple>> {
    let text = std::fs::read_to_string(path)?;
    parse_literals_str(&text, path)
}

pub fn parse_literals_str(text: &str, source: &Path) -> Result<Vec<LiteralTriple>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: source.to_path_buf(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let value: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("{:?} is not a number", fields[2])))?;
        out.push(LiteralTriple {
            entity: fields[0].to_owned(),
            data_relation: fields[1].to_owned(),
            value,
        });
    }
    Ok(out)
}

/// The `N_e × N_d` literal matrix with a presence mask.
///
/// Absent entries hold 0. When normalised, each present value `v` in column
/// `k` is `(v − min_k)/(max_k − min_k)`, or 0.5 for a column of zero range.
#[derive(Clone, Debug, PartialEq)]
pub struct LiteralMatrix {
    n_entities: usize,
    n_data: usize,
    values: Vec<f64>,
    present: Vec<bool>,
    norm_params: Vec<(f64, f64)>,
    normalized: bool,
    n_literal_triples: usize,
}

impl LiteralMatrix {
    /// A matrix with no data relations.
    pub fn empty(n_entities: usize) -> Self {
        LiteralMatrix {
            n_entities,
            n_data: 0,
            values: Vec::new(),
            present: Vec::new(),
            norm_params: Vec::new(),
            normalized: false,
            n_literal_triples: 0,
        }
    }

    /// Builds a matrix directly from dense rows. `None` marks an absent entry.
    pub fn from_rows(rows: &[Vec<Option<f64>>], n_data: usize, normalize: bool) -> Result<Self> {
        let mut m = LiteralMatrix {
            n_entities: rows.len(),
            n_data,
            values: vec![0.0; rows.len() * n_data],
            present: vec![false; rows.len() * n_data],
            norm_params: Vec::new(),
            normalized: false,
            n_literal_triples: 0,
        };
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_data {
                return Err(Error::Dimension {
                    op: "literal_matrix",
                    detail: format!("row {} has {} columns, expected {}", i, row.len(), n_data),
                });
            }
            for (k, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    if !v.is_finite() {
                        return Err(Error::Literal {
                            entity: i.to_string(),
                            relation: k.to_string(),
                            msg: format!("non-finite value {}", v),
                        });
                    }
                    m.values[i * n_data + k] = *v;
                    m.present[i * n_data + k] = true;
                    m.n_literal_triples += 1;
                }
            }
        }
        m.finish(normalize);
        Ok(m)
    }

    fn finish(&mut self, normalize: bool) {
        self.norm_params = (0..self.n_data)
            .map(|k| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..self.n_entities {
                    if self.present[i * self.n_data + k] {
                        let v = self.values[i * self.n_data + k];
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                if lo > hi {
                    (0.0, 0.0)
                } else {
                    (lo, hi)
                }
            })
            .collect();
        if normalize {
            for i in 0..self.n_entities {
                for k in 0..self.n_data {
                    let idx = i * self.n_data + k;
                    if !self.present[idx] {
                        continue;
                    }
                    let (lo, hi) = self.norm_params[k];
                    self.values[idx] = if hi > lo {
                        (self.values[idx] - lo) / (hi - lo)
                    } else {
                        0.5
                    };
                }
            }
        }
        self.normalized = normalize;
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn row(&self, entity: usize) -> &[f64] {
        &self.values[entity * self.n_data..(entity + 1) * self.n_data]
    }

    pub fn get(&self, entity: usize, data_relation: usize) -> f64 {
        self.values[entity * self.n_data + data_relation]
    }

    pub fn is_present(&self, entity: usize, data_relation: usize) -> bool {
        self.present[entity * self.n_data + data_relation]
    }

    pub fn n_present(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    /// Per-column `(min, max)` of the raw present values.
    pub fn norm_params(&self) -> &[(f64, f64)] {
        &self.norm_params
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Literal triples that survived the frequency filter, before
    /// deduplication.
    pub fn n_literal_triples(&self) -> usize {
        self.n_literal_triples
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(&[self.n_entities, self.n_data], self.values.clone())
            .expect("shape by construction")
    }
}

/// Builds the literal matrix for the entities already in `vocab`.
///
/// Data relations occurring in fewer than `min_frequency` literal triples are
/// dropped before ids are assigned. When an `(entity, data_relation)` pair has
/// several values the first in input order wins. Literals of entities missing
/// from `vocab` are ignored.
pub fn build_literal_matrix(
    literal_triples: &[LiteralTriple],
    vocab: &mut Vocabulary,
    min_frequency: usize,
    normalize: bool,
) -> Result<LiteralMatrix> {
    for lt in literal_triples {
        if !lt.value.is_finite() {
            return Err(Error::Literal {
                entity: lt.entity.clone(),
                relation: lt.data_relation.clone(),
                msg: format!("non-finite value {}", lt.value),
            });
        }
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for lt in literal_triples {
        *freq.entry(lt.data_relation.as_str()).or_default() += 1;
    }
    let kept = |lt: &LiteralTriple| freq[lt.data_relation.as_str()] >= min_frequency;
    for lt in literal_triples.iter().filter(|lt| kept(lt)) {
        vocab.data_relations.get_or_insert(&lt.data_relation);
    }

    let n_entities = vocab.entities.len();
    let n_data = vocab.data_relations.len();
    let mut m = LiteralMatrix {
        n_entities,
        n_data,
        values: vec![0.0; n_entities * n_data],
        present: vec![false; n_entities * n_data],
        norm_params: Vec::new(),
        normalized: false,
        n_literal_triples: 0,
    };
    for lt in literal_triples.iter().filter(|lt| kept(lt)) {
        m.n_literal_triples += 1;
        let Some(e) = vocab.entities.id(&lt.entity) else {
            continue;
        };
        let k = vocab.data_relations.id(&lt.data_relation).expect("registered above");
        let idx = e * n_data + k;
        if !m.present[idx] {
            m.present[idx] = true;
            m.values[idx] = lt.value;
        }
    }
    m.finish(normalize);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(e: &str, d: &str, v: f64) -> LiteralTriple {
        LiteralTriple {
            entity: e.into(),
            data_relation: d.into(),
            value: v,
        }
    }

    fn vocab(entities: &[&str]) -> Vocabulary {
        let mut v = Vocabulary::default();
        for e in entities {
            v.entities.get_or_insert(e);
        }
        v
    }

    #[test]
    fn john_literal_row() {
        let mut v = vocab(&["John", "Jane", "Doe"]);
        // declare column order heightCm, birthYear, countryArea
        let lits = vec![
            lit("Jane", "heightCm", 170.0),
            lit("John", "birthYear", 2001.0),
            lit("Doe", "countryArea", 500.0),
        ];
        let m = build_literal_matrix(&lits, &mut v, 1, false).unwrap();
        assert_eq!(m.row(0), &[0.0, 2001.0, 0.0]);
        assert!(!m.is_present(0, 0));
    }

    #[test]
    fn rare_relation_dropped() {
        let mut v = vocab(&["a", "b", "c", "d", "e"]);
        let mut lits: Vec<_> = ["a", "b", "c", "d"].iter().map(|e| lit(e, "rare", 1.0)).collect();
        lits.extend(["a", "b", "c", "d", "e"].iter().map(|e| lit(e, "common", 2.0)));
        let m = build_literal_matrix(&lits, &mut v, 5, false).unwrap();
        assert_eq!(m.n_data(), 1);
        assert_eq!(v.data_relations.id("common"), Some(0));
        assert_eq!(v.data_relations.id("rare"), None);
        assert_eq!(m.n_literal_triples(), 5);
    }

    #[test]
    fn first_value_wins() {
        let mut v = vocab(&["x"]);
        let lits = vec![lit("x", "birthYear", 1999.0), lit("x", "birthYear", 2001.0)];
        let m = build_literal_matrix(&lits, &mut v, 1, false).unwrap();
        assert_eq!(m.get(0, 0), 1999.0);
        assert_eq!(m.n_present(), 1);
    }

    #[test]
    fn min_max_normalisation() {
        let mut v = vocab(&["a", "b", "c", "d"]);
        let lits = vec![lit("a", "k", 10.0), lit("b", "k", 20.0), lit("c", "k", 30.0), lit("a", "flat", 4.0), lit("c", "flat", 4.0)];
        let m = build_literal_matrix(&lits, &mut v, 1, true).unwrap();
        assert_eq!((m.get(0, 0), m.get(1, 0), m.get(2, 0)), (0.0, 0.5, 1.0));
        assert_eq!(m.get(3, 0), 0.0);
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.norm_params()[0], (10.0, 30.0));
    }

    #[test]
    fn non_finite_value_is_reported() {
        let mut v = vocab(&["a"]);
        let err = build_literal_matrix(&[lit("a", "k", f64::NAN)], &mut v, 1, true).unwrap_err();
        assert!(err.to_string().contains("(a, k)"));
    }

    #[test]
    fn unknown_entity_literals_ignored() {
        let mut v = vocab(&["a"]);
        let m = build_literal_matrix(&[lit("zz", "k", 1.0), lit("a", "k", 2.0)], &mut v, 1, false).unwrap();
        assert_eq!(v.entities.len(), 1);
        assert_eq!(m.row(0), &[2.0]);
    }

    #[test]
    fn parse_rejects_bad_number() {
        let err = parse_literals_str("a\tk\tabc\n", Path::new("lit.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
