use literale::analysis::{generate_synthetic, nearest_neighbors, NeighborQuery, Space};
use literale::fusion::{FusionConfig, FusionKind};
use literale::model::Model;
use literale::score::{ModelConfig, ModelKind};
use literale::train::{fit, TrainConfig};

#[test]
fn enriched_neighbors_recover_literal_clusters() {
    let synth = generate_synthetic(200, 4, 0).unwrap();
    let data = &synth.dataset;
    let mut model = Model::new(
        ModelConfig::new(ModelKind::DistMult, 32),
        FusionConfig::new(FusionKind::Linear),
        data.store.n_entities(),
        data.store.n_relation_rows(),
        data.literals.n_data(),
        0,
    )
    .unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.003,
        max_epochs: 200,
        eval_every: 50,
        patience: 100,
        ..TrainConfig::default()
    };
    let result = fit(&mut model, &data.store, &data.literals, &cfg).unwrap();
    model.params = result.best;

    let mut majority = 0;
    for &p in &synth.people {
        let query = NeighborQuery {
            entity: data.vocab.entities.name(p).unwrap().to_owned(),
            space: Space::Enriched,
            k: 5,
        };
        let found = nearest_neighbors(&query, &data.vocab, &model, &data.literals).unwrap();
        let same = found
            .iter()
            .filter(|(name, _)| {
                let id = data.vocab.entities.id(name).unwrap();
                synth.cluster[id] == synth.cluster[p]
            })
            .count();
        if same >= 3 {
            majority += 1;
        }
    }
    let share = majority as f64 / synth.people.len() as f64;
    println!("same-cluster majority in top-5 for {:.3} of people", share);
    assert!(share > 0.5, "{}", share);
}
