use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{assemble, candidate_vectors, context_tensor};
use super::config::TrainConfig;
use super::report::Evaluation;
use crate::data::{BlmEpisode, DataSplit, EmbeddingStore};
use crate::error::{Error, Result};
use crate::model::{build_model, Mode, Model};
use crate::objectives::{
    compose_loss, kl_standard_normal, max_margin_loss, reconstruction_loss, select_answer, LossBreakdown,
};
use crate::tensor::{AdamState, Graph, Real, Tensor, Var};

/// Episodes per forward pass during evaluation.
const EVAL_CHUNK: usize = 256;
/// Stream of the sampling generator, apart from the per-epoch shuffle streams.
const SAMPLING_STREAM: u64 = u64::MAX;

/// Mean loss terms over an epoch and the dev score after it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub answer_loss: f64,
    pub kl_loss: Option<f64>,
    pub recon_loss: Option<f64>,
    pub total: f64,
    pub dev_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev score.
    pub model: Model<f32>,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
}

fn numeric(answer: f64, kl: Option<f64>, recon: Option<f64>) -> Error {
    Error::Numeric { epoch: 0, batch: 0, answer, kl, recon }
}

/// Build the training objective of one batch for the model's family:
/// answer only for baselines, plus KL for VAEs, plus reconstruction for
/// dual VAEs.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss<T: Real>(
    g: &mut Graph<T>,
    model: &Model<T>,
    context: Tensor<T>,
    correct: Tensor<T>,
    wrong: Tensor<T>,
    mode: Mode<'_>,
    alpha: f64,
    beta: f64,
) -> Result<(Var, LossBreakdown)> {
    let x = g.input(context);
    let out = model.forward(g, x, mode)?;
    let correct = g.input(correct);
    let wrong = g.input(wrong);
    let answer = max_margin_loss(g, out.pred, correct, wrong)?;
    let kl = match out.latent {
        Some(code) => {
            if !g.value(code.mu).all_finite() || !g.value(code.logvar).all_finite() {
                let a = g.value(answer).item()?.as_f64();
                return Err(numeric(a, Some(f64::NAN), None));
            }
            Some(kl_standard_normal(g, code.mu, code.logvar)?)
        }
        None => None,
    };
    let recon = out.recon.map(|r| reconstruction_loss(g, x, r)).transpose()?;
    compose_loss(g, answer, kl, recon, alpha, beta)
}

/// Index of the chosen candidate for each episode.
pub fn predict_choices(model: &Model<f32>, episodes: &[BlmEpisode], store: &EmbeddingStore) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(episodes.len());
    for chunk in episodes.chunks(EVAL_CHUNK) {
        let refs: Vec<&BlmEpisode> = chunk.iter().collect();
        let pred = model.predict(context_tensor(&refs, store)?)?;
        let d = pred.shape()[1];
        for (i, ep) in chunk.iter().enumerate() {
            let cands = candidate_vectors(ep, store)?;
            out.push(select_answer(&pred.data()[i * d..(i + 1) * d], &cands)?);
        }
    }
    Ok(out)
}

/// Score a model on episodes: which candidate category it selects.
pub fn evaluate(model: &Model<f32>, episodes: &[BlmEpisode], store: &EmbeddingStore) -> Result<Evaluation> {
    let mut e = Evaluation::default();
    for (ep, choice) in episodes.iter().zip(predict_choices(model, episodes, store)?) {
        e.record(ep.candidates[choice].category);
    }
    Ok(e)
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Adam over shuffled minibatches, keeping the parameters of the epoch with
/// the best dev selection accuracy (earliest on ties).
pub fn train(config: &TrainConfig, seed: u64, split: &DataSplit, store: &EmbeddingStore) -> Result<TrainOutcome> {
    config.validate()?;
    if split.train.is_empty() || split.dev.is_empty() {
        return Err(Error::Config("training needs non-empty train and dev sets".into()));
    }
    let spec = config.spec()?;
    let mut model = build_model(&spec, seed)?;
    let mut adam = AdamState::new(config.lr);
    let mut sampler = ChaCha8Rng::seed_from_u64(seed);
    sampler.set_stream(SAMPLING_STREAM);

    let mut best = (model.clone(), 0, f64::NEG_INFINITY);
    let mut log = Vec::with_capacity(config.epochs());
    for epoch in 1..=config.epochs() {
        let mut order: Vec<&BlmEpisode> = split.train.iter().collect();
        order.shuffle(&mut epoch_rng(seed, epoch));
        let mut sums = (0.0, 0.0, 0.0, 0.0);
        let mut batches = 0;
        let mut last = None;
        for (b, chunk) in order.chunks(config.batch).enumerate() {
            let batch = assemble(chunk, store)?;
            let mut g = Graph::new();
            let loss = batch_loss(
                &mut g,
                &model,
                batch.context,
                batch.correct,
                batch.wrong,
                Mode::Train(&mut sampler),
                config.alpha,
                config.beta,
            );
            let (total, br) = match loss {
                Ok((_, br)) if !br.is_finite() => {
                    return Err(Error::Numeric {
                        epoch,
                        batch: b + 1,
                        answer: br.answer_loss,
                        kl: br.kl_loss,
                        recon: br.recon_loss,
                    })
                }
                Err(Error::Numeric { answer, kl, recon, .. }) => {
                    return Err(Error::Numeric { epoch, batch: b + 1, answer, kl, recon })
                }
                other => other?,
            };
            let grads = g.backward(total)?;
            drop(g);
            let params = model.params_mut();
            params.zero_grad();
            params.accumulate(&grads);
            adam.step(params)?;
            sums.0 += br.answer_loss;
            sums.1 += br.kl_loss.unwrap_or(0.0);
            sums.2 += br.recon_loss.unwrap_or(0.0);
            sums.3 += br.total;
            batches += 1;
            last = Some(br);
        }
        let n = batches as f64;
        let last = last.expect("train set is non-empty");
        let dev_f1 = evaluate(&model, &split.dev, store)?.f1();
        log::debug!("seed {seed} epoch {epoch}: loss {:.5} dev {dev_f1:.4}", sums.3 / n);
        log.push(EpochLog {
            epoch,
            answer_loss: sums.0 / n,
            kl_loss: last.kl_loss.map(|_| sums.1 / n),
            recon_loss: last.recon_loss.map(|_| sums.2 / n),
            total: sums.3 / n,
            dev_f1,
        });
        if dev_f1 > best.2 {
            best = (model.clone(), epoch, dev_f1);
        }
    }
    let (mut model, best_epoch, best_dev_f1) = best;
    model.params_mut().clear_grad();
    Ok(TrainOutcome { model, log, best_epoch, best_dev_f1 })
}
