use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{build_literal_matrix, Dataset, LiteralTriple, Triple, TripleStore, Vocabulary};
use crate::error::{Error, Result};

pub const KNOWS: &str = "knows";
pub const STUDIES_AT: &str = "studiesAt";
pub const POS_X: &str = "posX";
pub const POS_Y: &str = "posY";

/// Generator settings. Person `p` in cluster `c` sits at
/// `radius · (cos 2πc/K, sin 2πc/K)` plus uniform noise in `[-noise, noise]²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_entities: usize,
    pub n_clusters: usize,
    pub seed: u64,
    pub radius: f64,
    pub noise: f64,
    /// `knows(a, b)` needs the literal distance below this.
    pub threshold: f64,
    pub split: SplitUnit,
}

/// What the 80/10/10 shuffle partitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitUnit {
    /// People; every `knows` edge of a held-out person is held out.
    People,
    /// Individual `knows` edges.
    Edges,
}

impl SyntheticConfig {
    pub fn new(n_entities: usize, n_clusters: usize, seed: u64) -> Self {
        SyntheticConfig {
            n_entities,
            n_clusters,
            seed,
            radius: 10.0,
            noise: 0.3,
            threshold: 5.0,
            split: SplitUnit::People,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(Error::Config("need at least one cluster".into()));
        }
        if self.n_entities < 4 * self.n_clusters {
            return Err(Error::Config(format!(
                "{} entities cannot hold {} clusters (need at least {})",
                self.n_entities,
                self.n_clusters,
                4 * self.n_clusters
            )));
        }
        if !(self.noise >= 0.0 && self.threshold > 0.0 && self.radius >= 0.0) {
            return Err(Error::Config("radius, noise and threshold must be non-negative".into()));
        }
        Ok(())
    }
}

/// A generated dataset together with its ground truth.
#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub config: SyntheticConfig,
    /// Entity ids of the people, in generation order.
    pub people: Vec<usize>,
    /// Cluster of each entity; `None` for institutions.
    pub cluster: Vec<Option<usize>>,
    /// Institution index of each person; `None` for institutions.
    pub institution: Vec<Option<usize>>,
    /// Raw (unnormalised) 2-d position of each person.
    pub position: Vec<Option<[f64; 2]>>,
    /// People whose `knows` edges were all held out.
    pub held_out: BTreeSet<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Oracle {
    /// Knows the full training graph but no literals.
    Structure,
    /// Also reads the literals.
    StructureAndLiteral,
}

/// Builds the literal-dependent benchmark.
///
/// People belong to a latent cluster and independently study at one of
/// `n_clusters` institutions. Two people know each other exactly when they
/// share an institution and their positions lie within `threshold`; the
/// relation is symmetric, so both directions are emitted into the same split. People are
/// shuffled and split 80/10/10; every `knows` edge touching a test person goes
/// to test, otherwise one touching a validation person goes to validation.
/// `studiesAt` edges and all literals stay visible.
pub fn generate_synthetic(n_entities: usize, n_clusters: usize, seed: u64) -> Result<SyntheticDataset> {
    generate_with(SyntheticConfig::new(n_entities, n_clusters, seed))
}

pub fn generate_with(config: SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let k = config.n_clusters;
    let n_people = config.n_entities - k;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut vocab = Vocabulary::default();
    let institutions: Vec<usize> = (0..k)
        .map(|i| vocab.entities.get_or_insert(&format!("institution{}", i)))
        .collect();
    let people: Vec<usize> = (0..n_people)
        .map(|i| vocab.entities.get_or_insert(&format!("person{}", i)))
        .collect();
    let knows = vocab.relations.get_or_insert(KNOWS);
    let studies = vocab.relations.get_or_insert(STUDIES_AT);

    let mut cluster_of: Vec<usize> = (0..n_people).map(|i| i % k).collect();
    cluster_of.shuffle(&mut rng);
    let inst_of: Vec<usize> = (0..n_people).map(|_| rng.gen_range(0..k)).collect();
    let pos: Vec<[f64; 2]> = cluster_of
        .iter()
        .map(|&c| {
            let angle = 2.0 * PI * c as f64 / k as f64;
            [
                config.radius * angle.cos() + rng.gen_range(-1.0..=1.0) * config.noise,
                config.radius * angle.sin() + rng.gen_range(-1.0..=1.0) * config.noise,
            ]
        })
        .collect();

    let mut order: Vec<usize> = (0..n_people).collect();
    order.shuffle(&mut rng);
    let n_valid = ((n_people as f64) * 0.1).round().max(1.0) as usize;
    let n_test = n_valid;
    let test_people: BTreeSet<usize> = order[..n_test].iter().copied().collect();
    let valid_people: BTreeSet<usize> = order[n_test..n_test + n_valid].iter().copied().collect();

    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();
    for p in 0..n_people {
        train.push(Triple::new(people[p], studies, institutions[inst_of[p]]));
    }
    let mut edges = Vec::new();
    for a in 0..n_people {
        for b in a + 1..n_people {
            if inst_of[a] == inst_of[b] && distance(&pos[a], &pos[b]) < config.threshold {
                edges.push((a, b));
            }
        }
    }
    match config.split {
        SplitUnit::People => {
            for &(a, b) in &edges {
                let split = if test_people.contains(&a) || test_people.contains(&b) {
                    &mut test
                } else if valid_people.contains(&a) || valid_people.contains(&b) {
                    &mut valid
                } else {
                    &mut train
                };
                split.push(Triple::new(people[a], knows, people[b]));
                split.push(Triple::new(people[b], knows, people[a]));
            }
        }
        SplitUnit::Edges => {
            edges.shuffle(&mut rng);
            let n_hold = ((edges.len() as f64) * 0.1).round() as usize;
            for (i, &(a, b)) in edges.iter().enumerate() {
                let split = if i < n_hold {
                    &mut test
                } else if i < 2 * n_hold {
                    &mut valid
                } else {
                    &mut train
                };
                split.push(Triple::new(people[a], knows, people[b]));
                split.push(Triple::new(people[b], knows, people[a]));
            }
        }
    }
    if valid.is_empty() || test.is_empty() {
        return Err(Error::Config(format!(
            "{} entities / {} clusters leave an empty held-out split",
            config.n_entities, config.n_clusters
        )));
    }

    let n_e = vocab.entities.len();
    let store = TripleStore::new(train, valid, test, n_e, vocab.relations.len())?;
    let mut lits = Vec::with_capacity(2 * n_people);
    for p in 0..n_people {
        let name = vocab.entities.name(people[p]).unwrap_or_default().to_owned();
        lits.push(LiteralTriple {
            entity: name.clone(),
            data_relation: POS_X.into(),
            value: pos[p][0],
        });
        lits.push(LiteralTriple {
            entity: name,
            data_relation: POS_Y.into(),
            value: pos[p][1],
        });
    }
    let literals = build_literal_matrix(&lits, &mut vocab, 1, true)?;

    let mut cluster = vec![None; n_e];
    let mut institution = vec![None; n_e];
    let mut position = vec![None; n_e];
    for p in 0..n_people {
        cluster[people[p]] = Some(cluster_of[p]);
        institution[people[p]] = Some(inst_of[p]);
        position[people[p]] = Some(pos[p]);
    }
    let held_out = match config.split {
        SplitUnit::People => test_people.iter().chain(&valid_people).map(|&p| people[p]).collect(),
        SplitUnit::Edges => BTreeSet::new(),
    };
    Ok(SyntheticDataset {
        dataset: Dataset { vocab, store, literals },
        config,
        people,
        cluster,
        institution,
        position,
        held_out,
    })
}

fn distance(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Expected precision of an oracle that, for each held-out `knows` edge
/// `(a, b)`, picks uniformly among the people it cannot rule out for `a`.
/// Training neighbours of `a` are always ruled out. The structure oracle keeps
/// everyone at `a`'s institution; the literal oracle also drops people beyond
/// the distance threshold.
pub fn oracle_accuracy(synth: &SyntheticDataset, oracle: Oracle) -> f64 {
    let store = &synth.dataset.store;
    let knows = synth
        .dataset
        .vocab
        .relations
        .id(KNOWS)
        .expect("generator registers knows");
    let held: Vec<(usize, usize)> = store
        .valid
        .iter()
        .chain(&store.test)
        .filter(|t| t.relation == knows)
        .map(|t| (t.head, t.tail))
        .collect();
    let truth = |a: usize, c: usize| held.contains(&(a, c));
    let mut total = 0.0;
    for &(a, _) in &held {
        let train_nb = |c: usize| {
            store.train_tails(a, knows).is_some_and(|s| s.contains(&c))
                || store
                    .train_tails(a, store.reciprocal(knows))
                    .is_some_and(|s| s.contains(&c))
        };
        let candidates: Vec<usize> = synth
            .people
            .iter()
            .copied()
            .filter(|&c| c != a && synth.institution[c] == synth.institution[a] && !train_nb(c))
            .filter(|&c| match oracle {
                Oracle::Structure => true,
                Oracle::StructureAndLiteral => {
                    distance(&synth.position[a].unwrap(), &synth.position[c].unwrap()) < synth.config.threshold
                }
            })
            .collect();
        if !candidates.is_empty() {
            let hits = candidates.iter().filter(|&&c| truth(a, c)).count();
            total += hits as f64 / candidates.len() as f64;
        }
    }
    total / held.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_entities_rejected() {
        assert!(matches!(generate_synthetic(15, 4, 0), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic(120, 3, 5).unwrap();
        let b = generate_synthetic(120, 3, 5).unwrap();
        assert_eq!(a.dataset, b.dataset);
    }

    #[test]
    fn literal_oracle_dominates() {
        let s = generate_synthetic(200, 4, 1).unwrap();
        let st = oracle_accuracy(&s, Oracle::Structure);
        let lit = oracle_accuracy(&s, Oracle::StructureAndLiteral);
        assert!(lit > st, "{} vs {}", lit, st);
        assert_eq!(lit, 1.0);
    }

    #[test]
    fn held_out_people_have_no_training_edges() {
        let s = generate_synthetic(200, 4, 2).unwrap();
        for t in &s.dataset.store.train {
            if s.dataset.vocab.relations.name(t.relation) == Some(KNOWS) {
                assert!(!s.held_out.contains(&t.head) && !s.held_out.contains(&t.tail));
            }
        }
    }

    #[test]
    fn knows_edges_respect_the_distance_threshold() {
        let s = generate_synthetic(200, 4, 3).unwrap();
        let store = &s.dataset.store;
        let knows = s.dataset.vocab.relations.id(KNOWS).unwrap();
        let mut seen = 0;
        for t in store.train.iter().chain(&store.valid).chain(&store.test) {
            if t.relation == knows {
                let (a, b) = (s.position[t.head].unwrap(), s.position[t.tail].unwrap());
                assert!(distance(&a, &b) < s.config.threshold);
                assert_eq!(s.institution[t.head], s.institution[t.tail]);
                seen += 1;
            }
        }
        assert!(seen > 0);
    }
}
