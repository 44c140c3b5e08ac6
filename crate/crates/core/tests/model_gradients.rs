//! Finite-difference checks of every architecture's full training objective.

use blm_probe::harness::batch_loss;
use blm_probe::model::{build_model, Mode, Model, ModelKind, ModelSpec, Reshape, EMBED_DIM, SEQ_LEN};
use blm_probe::objectives::{DEFAULT_ALPHA, DEFAULT_BETA};
use blm_probe::tensor::gradcheck::check_params;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

pub const GRID: Reshape = Reshape { rows: 48, cols: 16 };

const BATCH: usize = 2;
const PER_PARAM: usize = 4;
const TOL: f64 = 1e-4;

pub fn check(kind: ModelKind, reshape: Option<Reshape>) {
    let spec = ModelSpec::new(kind, reshape).unwrap();
    let model: Model<f64> = build_model(&spec, 11).unwrap().cast();
    let mut r = common::rng(kind as u64 + 100);
    let context = common::uniform(&[BATCH, SEQ_LEN, EMBED_DIM], -1.0, 1.0, &mut r);
    let correct = common::uniform(&[BATCH, EMBED_DIM], -1.0, 1.0, &mut r);
    let wrong = common::uniform(&[BATCH * 5, EMBED_DIM], -1.0, 1.0, &mut r);

    let mut store = model.params().clone();
    let report = check_params(&mut store, PER_PARAM, 5, |g, params| {
        let m = Model::from_params(&spec, params.clone())?;
        let mut sampler = ChaCha8Rng::seed_from_u64(9);
        let (loss, br) = batch_loss(
            g,
            &m,
            context.clone(),
            correct.clone(),
            wrong.clone(),
            Mode::Train(&mut sampler),
            DEFAULT_ALPHA,
            DEFAULT_BETA,
        )?;
        assert_eq!(br.kl_loss.is_some(), kind.is_variational());
        assert_eq!(br.recon_loss.is_some(), kind.is_dual());
        Ok(loss)
    })
    .unwrap();
    assert!(report.checked >= PER_PARAM * 4);
    assert!(report.max_rel_error < TOL, "{}: {} at {}", spec.label(), report.max_rel_error, report.worst);
}

#[test]
fn baseline_ffnn() {
    check(ModelKind::BaselineFfnn, None);
}

#[test]
fn baseline_cnn_1d() {
    check(ModelKind::BaselineCnn1d, None);
}

#[test]
fn baseline_cnn_2d() {
    check(ModelKind::BaselineCnn2d, Some(Reshape { rows: 48, cols: 16 }));
}

#[test]
fn vae_1d() {
    check(ModelKind::Vae1d, None);
}

#[test]
fn vae_2d() {
    check(ModelKind::Vae2d, Some(Reshape { rows: 24, cols: 32 }));
}

#[test]
fn dual_vae_1d() {
    check(ModelKind::DualVae1d, None);
}

#[test]
fn dual_vae_2d() {
    check(ModelKind::DualVae2d, Some(Reshape { rows: 48, cols: 16 }));
}

pub fn check_all() {
    for kind in ModelKind::ALL {
        check(kind, kind.is_2d().then_some(GRID));
    }
}
