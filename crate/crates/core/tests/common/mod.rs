#![allow(dead_code)]

use literale::data::LiteralMatrix;
use literale::fusion::{fuse, fuse_backward, FusionConfig, FusionKind, FusionWeights};
use literale::model::Model;
use literale::numeric::conv::{conv2d, conv2d_backward, ConvShape};
use literale::numeric::ops;
use literale::numeric::Tensor;
use literale::par::Exec;
use literale::score::{ConvSettings, ModelConfig, ModelKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

pub const MODELS: [ModelKind; 3] = [ModelKind::DistMult, ModelKind::ComplEx, ModelKind::ConvE];
pub const FUSIONS: [FusionKind; 5] = [
    FusionKind::Linear,
    FusionKind::Tanh,
    FusionKind::Relu,
    FusionKind::Mlp,
    FusionKind::Gate,
];

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Central differences of `f` at `x`, compared entrywise with `analytic`.
/// Returns the largest relative error.
pub fn fd_check(x: &Tensor, analytic: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += FD_STEP;
        let mut minus = x.clone();
        minus.data_mut()[i] -= FD_STEP;
        let fd = (f(&plus) - f(&minus)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic.data()[i], fd));
    }
    worst
}

fn weighted(y: &Tensor, c: &Tensor) -> f64 {
    y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
}

/// Worst relative error over every primitive's backward pass, probing each
/// with the scalar loss `Σ c ⊙ f(x)`.
pub fn primitive_gradient_errors() -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut out = Vec::new();
    let x = random_tensor(&[3, 4], &mut rng);
    let c = random_tensor(&[3, 4], &mut rng);

    let y = ops::tanh(&x);
    let g = ops::tanh_backward(&y, &c).unwrap();
    out.push(("tanh", fd_check(&x, &g, |x| weighted(&ops::tanh(x), &c))));

    let g = ops::relu_backward(&x, &c).unwrap();
    out.push(("relu", fd_check(&x, &g, |x| weighted(&ops::relu(x), &c))));

    let y = ops::sigmoid(&x);
    let g = ops::sigmoid_backward(&y, &c).unwrap();
    out.push(("sigmoid", fd_check(&x, &g, |x| weighted(&ops::sigmoid(x), &c))));

    let y = ops::softmax_rows(&x);
    let g = ops::softmax_rows_backward(&y, &c).unwrap();
    out.push(("softmax", fd_check(&x, &g, |x| weighted(&ops::softmax_rows(x), &c))));

    let b = random_tensor(&[3, 4], &mut rng);
    let (ga, gb) = ops::mul_backward(&x, &b, &c).unwrap();
    out.push(("mul_a", fd_check(&x, &ga, |x| weighted(&ops::mul(x, &b).unwrap(), &c))));
    out.push(("mul_b", fd_check(&b, &gb, |b| weighted(&ops::mul(&x, b).unwrap(), &c))));

    let cs = random_tensor(&[3, 1], &mut rng);
    let g = ops::row_sum_backward(&cs, 4);
    out.push(("row_sum", fd_check(&x, &g, |x| weighted(&ops::row_sum(x), &cs))));

    let w = random_tensor(&[4, 5], &mut rng);
    let cw = random_tensor(&[3, 5], &mut rng);
    let (dx, dw) = ops::affine_backward(&x, &w, &cw, Exec::Sequential).unwrap();
    out.push(("affine_x", fd_check(&x, &dx, |x| weighted(&ops::affine(x, &w, Exec::Sequential).unwrap(), &cw))));
    out.push(("affine_w", fd_check(&w, &dw, |w| weighted(&ops::affine(&x, w, Exec::Sequential).unwrap(), &cw))));

    let b2 = random_tensor(&[3, 2], &mut rng);
    let cc = random_tensor(&[3, 6], &mut rng);
    let (da, db) = ops::concat_cols_backward(&cc, 4).unwrap();
    out.push(("concat_a", fd_check(&x, &da, |x| weighted(&ops::concat_cols(x, &b2).unwrap(), &cc))));
    out.push(("concat_b", fd_check(&b2, &db, |b| weighted(&ops::concat_cols(&x, b).unwrap(), &cc))));

    let ids = [2, 0, 2];
    let cl = random_tensor(&[3, 4], &mut rng);
    let mut dt = Tensor::zeros(&[3, 4]);
    ops::lookup_rows_backward(&mut dt, &ids, &cl).unwrap();
    out.push(("lookup", fd_check(&x, &dt, |t| weighted(&ops::lookup_rows(t, &ids).unwrap(), &cl))));

    let mask_rng = ChaCha8Rng::seed_from_u64(3);
    let (_, mask) = ops::dropout(&x, 0.4, true, &mut mask_rng.clone()).unwrap();
    let g = ops::dropout_backward(&mask, &c).unwrap();
    out.push((
        "dropout",
        fd_check(&x, &g, |x| weighted(&ops::dropout(x, 0.4, true, &mut mask_rng.clone()).unwrap().0, &c)),
    ));

    let shape = ConvShape { in_h: 4, in_w: 5, kernel: 3, filters: 2 };
    let input = random_tensor(&[20], &mut rng);
    let filters = random_tensor(&[2, 3, 3], &mut rng);
    let cf = random_tensor(&[shape.out_len()], &mut rng);
    let conv = |i: &Tensor, f: &Tensor| {
        let y = conv2d(shape, i.data(), f).unwrap();
        weighted(&Tensor::row_vector(&y), &cf)
    };
    let (di, df) = conv2d_backward(shape, input.data(), &filters, cf.data()).unwrap();
    let di = Tensor::from_vec(&[20], di).unwrap();
    let df = Tensor::from_vec(&[2, 3, 3], df).unwrap();
    out.push(("conv_input", fd_check(&input, &di, |i| conv(i, &filters))));
    out.push(("conv_filters", fd_check(&filters, &df, |f| conv(&input, f))));
    out
}

/// Worst relative error of `fuse_backward` for one fusion kind, over `e` and
/// every weight.
pub fn fusion_gradient_error(kind: FusionKind) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (n, h, nd) = (3, 4, 2);
    let cfg = FusionConfig::new(kind);
    let e = random_tensor(&[n, h], &mut rng);
    let l = random_tensor(&[n, nd], &mut rng);
    let c = random_tensor(&[n, h], &mut rng);
    let ws: Vec<Tensor> = cfg
        .weight_shapes(h, nd)
        .iter()
        .map(|(_, s)| random_tensor(s, &mut rng))
        .collect();
    fn weights(ws: &[Tensor]) -> FusionWeights<'_> {
        match ws.len() {
            0 => FusionWeights::none(),
            1 => FusionWeights::single(&ws[0]),
            _ => FusionWeights::mlp(&ws[0], &ws[1]),
        }
    }
    let loss = |e: &Tensor, ws: &[Tensor]| {
        let (y, _) = fuse(kind, e, &l, weights(ws), Exec::Sequential).unwrap();
        weighted(&y, &c)
    };
    let (_, cache) = fuse(kind, &e, &l, weights(&ws), Exec::Sequential).unwrap();
    let g = fuse_backward(&cache, &e, weights(&ws), &c, Exec::Sequential).unwrap();
    let mut worst = fd_check(&e, &g.d_e, |e| loss(e, &ws));
    let grads: Vec<&Tensor> = [g.d_w.as_ref(), g.d_w2.as_ref()].into_iter().flatten().collect();
    assert_eq!(grads.len(), ws.len());
    for (i, gw) in grads.into_iter().enumerate() {
        worst = worst.max(fd_check(&ws[i], gw, |w| {
            let mut ws2 = ws.clone();
            ws2[i] = w.clone();
            loss(&e, &ws2)
        }));
    }
    worst
}

/// H = 8; ConvE uses 2 filters of 3×3 over a 2×4 reshape.
pub fn small_config(kind: ModelKind) -> ModelConfig {
    let mut c = ModelConfig::new(kind, 8);
    c.conv = ConvSettings {
        filters: 2,
        kernel: 3,
        reshape_height: 2,
        reshape_width: 4,
    };
    c
}

pub fn random_literals(n_entities: usize, n_data: usize, seed: u64) -> LiteralMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<Option<f64>>> = (0..n_entities)
        .map(|_| (0..n_data).map(|_| Some(rng.gen_range(0.0..1.0))).collect())
        .collect();
    LiteralMatrix::from_rows(&rows, n_data, false).unwrap()
}

/// Worst relative error of the full 1-N loss gradient over every parameter
/// entry of a small model. With `train` set, dropout masks are held fixed by
/// reseeding the RNG for each evaluation.
pub fn model_gradient_error(kind: ModelKind, fusion: FusionKind, train: bool) -> f64 {
    let (n_e, n_r, n_d) = (5, 4, 3);
    let literals = random_literals(n_e, n_d, 5);
    let mut model = Model::new(small_config(kind), FusionConfig::new(fusion), n_e, n_r, n_d, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    // scale embeddings up so ReLU units sit away from their kink
    for (name, scale) in [("entity", 2.0), ("entity.re", 2.0), ("entity.im", 2.0)] {
        if let Ok(v) = model.params.value_mut(name) {
            v.data_mut().iter_mut().for_each(|x| *x *= scale);
        }
    }
    let batch = vec![(0, 1), (3, 0), (0, 3)];
    let targets: Vec<Vec<f64>> = batch
        .iter()
        .map(|_| (0..n_e).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let loss = |m: &mut Model| {
        let mut r = ChaCha8Rng::seed_from_u64(99);
        let l = m.forward_backward(&batch, &targets, &literals, train, &mut r).unwrap();
        m.params.zero_grads();
        l
    };
    model.params.zero_grads();
    let mut r = ChaCha8Rng::seed_from_u64(99);
    model.forward_backward(&batch, &targets, &literals, train, &mut r).unwrap();
    let names: Vec<String> = model.params.iter().map(|(n, _)| n.to_owned()).collect();
    let mut worst: f64 = 0.0;
    for name in names {
        let analytic = model.params.grad(&name).unwrap().clone();
        let value = model.params.value(&name).unwrap().clone();
        let mut probe = model.clone();
        worst = worst.max(fd_check(&value, &analytic, |v| {
            *probe.params.value_mut(&name).unwrap() = v.clone();
            loss(&mut probe)
        }));
    }
    worst
}

pub const TOY_TRAIN: &str = "\
a\tlikes\tb
a\tlikes\tc
b\tlikes\tc
c\tlikes\td
d\tlikes\te
e\tlikes\tf
a\tnear\tf
b\tnear\te
c\tnear\td
d\tnear\ta
e\tnear\tb
f\tnear\tc
";
pub const TOY_VALID: &str = "b\tlikes\td\nf\tnear\ta\n";
pub const TOY_TEST: &str = "c\tlikes\te\na\tnear\te\n";

/// The 6-entity, 2-relation, 12-triple toy graph with two random literal
/// columns.
pub fn toy_dataset() -> literale::data::Dataset {
    use literale::data::{parse_triples_str, Dataset, TripleStore, Vocabulary};
    use std::path::Path;
    let mut vocab = Vocabulary::default();
    let train = parse_triples_str(TOY_TRAIN, Path::new("train"), &mut vocab).unwrap();
    let valid = parse_triples_str(TOY_VALID, Path::new("valid"), &mut vocab).unwrap();
    let test = parse_triples_str(TOY_TEST, Path::new("test"), &mut vocab).unwrap();
    let store = TripleStore::new(train, valid, test, vocab.entities.len(), vocab.relations.len()).unwrap();
    vocab.data_relations.get_or_insert("height");
    vocab.data_relations.get_or_insert("age");
    let literals = random_literals(vocab.entities.len(), 2, 3);
    Dataset { vocab, store, literals }
}

pub fn model_for(data: &literale::data::Dataset, kind: ModelKind, fusion: FusionKind, seed: u64) -> Model {
    Model::new(
        small_config(kind),
        FusionConfig::new(fusion),
        data.store.n_entities(),
        data.store.n_relation_rows(),
        data.literals.n_data(),
        seed,
    )
    .unwrap()
}
