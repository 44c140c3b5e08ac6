//! Training behaviour on a 500-episode synthetic Type I set.

use blm_probe::data::{generate_synthetic, Category, DataType};
use blm_probe::harness::*;
use blm_probe::model::ModelKind;

fn corpus() -> Corpus {
    let (episodes, store) = generate_synthetic(0, 500, DataType::I).unwrap();
    let mut c = Corpus::new();
    c.insert(DataType::I, Dataset { episodes, store });
    c
}

fn dual(epochs: usize, seeds: &[u64]) -> TrainConfig {
    let mut c = TrainConfig::new(ModelKind::DualVae2d);
    c.epochs = Some(epochs);
    c.seeds = seeds.to_vec();
    c
}

#[test]
fn dual_vae_learns_the_rule() {
    let data = corpus();
    let c = dual(30, &[0]);
    let p = prepare(&c, &data).unwrap();
    let out = train(&c, 0, &p.split, p.train_store).unwrap();
    assert!(out.best_dev_f1 >= 0.95, "best dev {} at epoch {}", out.best_dev_f1, out.best_epoch);
}

#[test]
fn seeds_agree_once_trained() {
    let r = multi_run(&dual(40, &[0, 1, 2, 3, 4]), &corpus()).unwrap();
    let f1s: Vec<f64> = r.runs.iter().map(|s| s.f1).collect();
    assert!(r.std_f1 < 0.05, "F1 {f1s:?}, std {}", r.std_f1);
}

#[test]
fn more_data_does_not_hurt() {
    let data = corpus();
    let curve = learning_curve(&dual(12, &[0, 1]), &data, &[(DataType::I, DataType::I)], &[100, 450]).unwrap();
    let (small, large) = (&curve.points[0], &curve.points[1]);
    assert!(large.mean_f1 >= small.mean_f1 - 0.05, "{} -> {}", small.mean_f1, large.mean_f1);
}

#[test]
fn weak_model_errs_on_the_second_attractor() {
    let r = multi_run(&dual(3, &[0, 1, 2]), &corpus()).unwrap();
    let table = error_analysis(&[r]).unwrap();
    assert_eq!(table.dominant(0), Some(Category::Wn2), "{}", table.to_csv());
}
