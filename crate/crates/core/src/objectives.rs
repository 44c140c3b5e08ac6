//! Answer scoring, the three training-loss terms and latent sampling.
//!
//! The differentiable forms operate on a [`Graph`]; [`cosine_score`] and
//! [`select_answer`] are the plain evaluation-time counterparts.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Graph, Real, Tensor, Var};

/// Width of the variational bottleneck.
pub const LATENT_DIM: usize = 5;
/// Weight of the input-reconstruction term for dual models.
pub const DEFAULT_ALPHA: f64 = 0.01;
/// Weight of the KL term.
pub const DEFAULT_BETA: f64 = 1.0;

/// Cosine of the angle between two embeddings, computed in `f64`.
pub fn cosine_score<T: Real>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("cosine_score", format!("lengths {} and {}", a.len(), b.len())));
    }
    let (mut dot, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x.as_f64(), y.as_f64());
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::Degenerate("zero-norm embedding in cosine_score".into()));
    }
    Ok((dot / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// Index of the candidate with the highest cosine to `pred`; the lowest
/// index wins ties.
pub fn select_answer<T: Real, C: AsRef<[T]>>(pred: &[T], candidates: &[C]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Data("empty candidate set".into()));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let s = cosine_score(pred, c.as_ref())?;
        if s > best.1 {
            best = (i, s);
        }
    }
    Ok(best.0)
}

/// Per-episode hinge sum `sum_i [1 - cos(correct, pred) + cos(wrong_i, pred)]^+`.
///
/// `pred` and `correct` are `[B, D]`; `wrong` is `[B * k, D]` with the `k`
/// wrong answers of episode `b` in rows `b*k .. (b+1)*k`. Returns `[B]`.
pub fn max_margin_terms<T: Real>(g: &mut Graph<T>, pred: Var, correct: Var, wrong: Var) -> Result<Var> {
    let batch = g.shape(pred).first().copied().unwrap_or(0);
    let rows = g.shape(wrong).first().copied().unwrap_or(0);
    if batch == 0 || rows == 0 || rows % batch != 0 {
        return Err(Error::dim(
            "max_margin_loss",
            format!("pred {:?} with wrong answers {:?}", g.shape(pred), g.shape(wrong)),
        ));
    }
    let k = rows / batch;
    let s_correct = g.cosine(correct, pred)?;
    let pred_rep = g.expand_rows(pred, k)?;
    let s_wrong = g.cosine(wrong, pred_rep)?;
    let s_correct = g.reshape(s_correct, &[batch, 1])?;
    let s_correct = g.expand_rows(s_correct, k)?;
    let s_correct = g.reshape(s_correct, &[rows])?;
    let gap = g.sub(s_wrong, s_correct)?;
    let margin = g.add_scalar(gap, 1.0);
    let hinge = g.relu(margin);
    let hinge = g.reshape(hinge, &[batch, k])?;
    g.sum_last(hinge)
}

/// Batch mean of [`max_margin_terms`].
pub fn max_margin_loss<T: Real>(g: &mut Graph<T>, pred: Var, correct: Var, wrong: Var) -> Result<Var> {
    let terms = max_margin_terms(g, pred, correct, wrong)?;
    Ok(g.mean_all(terms))
}

/// `KL(N(mu, exp(logvar)) || N(0, I))`, summed over latent dimensions and
/// averaged over the batch. Operands are `[B, L]`.
pub fn kl_standard_normal<T: Real>(g: &mut Graph<T>, mu: Var, logvar: Var) -> Result<Var> {
    if g.shape(mu) != g.shape(logvar) {
        return Err(Error::dim("kl_standard_normal", format!("mu {:?}, logvar {:?}", g.shape(mu), g.shape(logvar))));
    }
    if !g.value(mu).all_finite() || !g.value(logvar).all_finite() {
        return Err(Error::Contract("non-finite latent statistics".into()));
    }
    let batch = g.shape(mu).first().copied().unwrap_or(1);
    let mu2 = g.mul(mu, mu)?;
    let var = g.exp(logvar);
    let s = g.add(mu2, var)?;
    let s = g.sub(s, logvar)?;
    let s = g.add_scalar(s, -1.0);
    let total = g.sum_all(s);
    Ok(g.scale(total, 0.5 / batch as f64))
}

/// Graph handles of the variational bottleneck.
#[derive(Clone, Copy, Debug)]
pub struct LatentCode {
    pub mu: Var,
    pub logvar: Var,
    pub sample: Var,
}

/// Reparameterized draw `mu + exp(logvar / 2) * eps`, `eps ~ N(0, I)`.
pub fn sample_latent<T: Real>(
    g: &mut Graph<T>,
    mu: Var,
    logvar: Var,
    rng: &mut (impl Rng + ?Sized),
) -> Result<LatentCode> {
    if g.shape(mu) != g.shape(logvar) {
        return Err(Error::dim("sample_latent", format!("mu {:?}, logvar {:?}", g.shape(mu), g.shape(logvar))));
    }
    let shape = g.shape(mu).to_vec();
    let eps = Tensor::from_fn(&shape, |_| T::of(Distribution::<f64>::sample(&StandardNormal, rng)));
    let eps = g.input(eps);
    let half = g.scale(logvar, 0.5);
    let std = g.exp(half);
    let noise = g.mul(std, eps)?;
    let sample = g.add(mu, noise)?;
    Ok(LatentCode { mu, logvar, sample })
}

/// Mean squared elementwise difference.
pub fn reconstruction_loss<T: Real>(g: &mut Graph<T>, x: Var, x_hat: Var) -> Result<Var> {
    let d = g.sub(x, x_hat).map_err(|_| {
        Error::dim("reconstruction_loss", format!("input {:?}, reconstruction {:?}", g.shape(x), g.shape(x_hat)))
    })?;
    let sq = g.mul(d, d)?;
    Ok(g.mean_all(sq))
}

/// Scalar values of the loss terms of one batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub answer_loss: f64,
    pub kl_loss: Option<f64>,
    pub recon_loss: Option<f64>,
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LossBreakdown {
    /// `answer + alpha * recon + beta * kl` evaluated in the element type
    /// the graph used, in the same order.
    pub fn recompose<T: Real>(&self) -> f64 {
        let mut t = T::of(self.answer_loss);
        if let Some(r) = self.recon_loss {
            t += T::of(self.alpha) * T::of(r);
        }
        if let Some(k) = self.kl_loss {
            t += T::of(self.beta) * T::of(k);
        }
        t.as_f64()
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
            && self.answer_loss.is_finite()
            && self.kl_loss.is_none_or(f64::is_finite)
            && self.recon_loss.is_none_or(f64::is_finite)
    }
}

/// Combine the terms present for a model family into the training objective.
pub fn compose_loss<T: Real>(
    g: &mut Graph<T>,
    answer: Var,
    kl: Option<Var>,
    recon: Option<Var>,
    alpha: f64,
    beta: f64,
) -> Result<(Var, LossBreakdown)> {
    let mut total = answer;
    if let Some(r) = recon {
        let weighted = g.scale(r, alpha);
        total = g.add(total, weighted)?;
    }
    if let Some(k) = kl {
        let weighted = g.scale(k, beta);
        total = g.add(total, weighted)?;
    }
    let item = |g: &Graph<T>, v: Var| g.value(v).item().map(Real::as_f64);
    let breakdown = LossBreakdown {
        answer_loss: item(g, answer)?,
        kl_loss: kl.map(|v| item(g, v)).transpose()?,
        recon_loss: recon.map(|v| item(g, v)).transpose()?,
        total: item(g, total)?,
        alpha,
        beta,
    };
    Ok((total, breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    fn unit(d: usize, i: usize) -> Vec<f64> {
        (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn cosine_basics() {
        let a = [0.3, -1.2, 2.0];
        assert!((cosine_score(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let twice: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
        assert!((cosine_score(&a, &twice).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_score(&unit(3, 0), &unit(3, 1)).unwrap(), 0.0);
        assert!(matches!(cosine_score(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn margin_is_zero_when_correct_matches_and_wrong_are_orthogonal() {
        let d = 6;
        let mut g = Graph::<f64>::new();
        let pred = g.input(t(&[1, d], &unit(d, 0)));
        let correct = g.input(t(&[1, d], &unit(d, 0)));
        let wrong: Vec<f64> = (1..6).flat_map(|i| unit(d, i)).collect();
        let wrong = g.input(t(&[5, d], &wrong));
        let l = max_margin_loss(&mut g, pred, correct, wrong).unwrap();
        assert_eq!(g.value(l).item().unwrap(), 0.0);
    }

    #[test]
    fn margin_direct_arithmetic() {
        // cos(correct, pred) = 0.5, cos(wrong, pred) = 0.7
        let mut g = Graph::<f64>::new();
        let pred = g.input(t(&[1, 2], &[1.0, 0.0]));
        let correct = g.input(t(&[1, 2], &[0.5, 0.75f64.sqrt()]));
        let wrong = g.input(t(&[1, 2], &[0.7, 0.51f64.sqrt()]));
        let l = max_margin_loss(&mut g, pred, correct, wrong).unwrap();
        assert!((g.value(l).item().unwrap() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn kl_closed_form_values() {
        let mut g = Graph::<f64>::new();
        let mu = g.input(Tensor::zeros(&[1, 5]));
        let lv = g.input(Tensor::zeros(&[1, 5]));
        let k = kl_standard_normal(&mut g, mu, lv).unwrap();
        assert_eq!(g.value(k).item().unwrap(), 0.0);
        let mu = g.input(t(&[1, 5], &[1.0, 0.0, 0.0, 0.0, 0.0]));
        let k = kl_standard_normal(&mut g, mu, lv).unwrap();
        assert!((g.value(k).item().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_rejects_non_finite() {
        let mut g = Graph::<f64>::new();
        let mu = g.input(t(&[1, 2], &[f64::NAN, 0.0]));
        let lv = g.input(Tensor::zeros(&[1, 2]));
        assert!(matches!(kl_standard_normal(&mut g, mu, lv), Err(Error::Contract(_))));
    }

    #[test]
    fn sample_collapses_to_mean_for_tiny_variance() {
        let mut g = Graph::<f64>::new();
        let mu_data = [0.4, -1.0, 2.5, 0.0, 3.0];
        let mu = g.input(t(&[1, 5], &mu_data));
        let lv = g.input(Tensor::from_fn(&[1, 5], |_| -30.0));
        let z = sample_latent(&mut g, mu, lv, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for (a, b) in g.value(z.sample).data().iter().zip(mu_data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn sample_is_deterministic_per_seed() {
        let draw = |seed| {
            let mut g = Graph::<f32>::new();
            let mu = g.input(Tensor::zeros(&[2, 5]));
            let lv = g.input(Tensor::zeros(&[2, 5]));
            let z = sample_latent(&mut g, mu, lv, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            g.value(z.sample).data().to_vec()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn sample_moments() {
        let n = 100_000;
        let mut g = Graph::<f64>::new();
        let mu = g.input(Tensor::zeros(&[n, 1]));
        let lv = g.input(Tensor::zeros(&[n, 1]));
        let z = sample_latent(&mut g, mu, lv, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let d = g.value(z.sample).data();
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn reconstruction_values() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::zeros(&[2, 3]));
        let ones = g.input(Tensor::from_fn(&[2, 3], |_| 1.0));
        let same = reconstruction_loss(&mut g, x, x).unwrap();
        assert_eq!(g.value(same).item().unwrap(), 0.0);
        let l = reconstruction_loss(&mut g, x, ones).unwrap();
        assert_eq!(g.value(l).item().unwrap(), 1.0);
        let other = g.input(Tensor::zeros(&[3, 2]));
        assert!(matches!(reconstruction_loss(&mut g, x, other), Err(Error::Dimension { .. })));
    }

    #[test]
    fn select_answer_picks_matching_candidate() {
        let pred = unit(6, 3);
        let cands: Vec<Vec<f64>> = (0..6).map(|i| unit(6, i)).collect();
        assert_eq!(select_answer(&pred, &cands).unwrap(), 3);
        let scaled: Vec<f64> = pred.iter().map(|x| 10.0 * x).collect();
        assert_eq!(select_answer(&scaled, &cands).unwrap(), 3);
    }

    #[test]
    fn select_answer_breaks_ties_low() {
        let pred = [1.0, 1.0];
        let cands = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(select_answer(&pred, &cands).unwrap(), 0);
    }

    #[test]
    fn breakdown_recomposes_exactly() {
        let mut g = Graph::<f32>::new();
        let a = g.input(Tensor::scalar(0.731));
        let k = g.input(Tensor::scalar(2.17));
        let r = g.input(Tensor::scalar(13.9));
        let (total, b) = compose_loss(&mut g, a, Some(k), Some(r), DEFAULT_ALPHA, DEFAULT_BETA).unwrap();
        assert_eq!(b.total, g.value(total).item().unwrap() as f64);
        assert_eq!(b.recompose::<f32>(), b.total);
        let (_, base) = compose_loss(&mut g, a, None, None, DEFAULT_ALPHA, DEFAULT_BETA).unwrap();
        assert_eq!(base.total, base.answer_loss);
    }
}
