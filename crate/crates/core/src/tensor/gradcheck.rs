//! Central finite-difference checks of reverse-mode gradients, in `f64`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, ParamStore, Tensor, Var};
use crate::error::Result;

/// Perturbation used for central differences.
pub const FD_STEP: f64 = 1e-6;
/// Gradient magnitudes below this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Description of the worst coordinate.
    pub worst: String,
}

impl GradCheck {
    fn record(&mut self, what: impl FnOnce() -> String, analytic: f64, numeric: f64) {
        self.checked += 1;
        let e = relative_error(analytic, numeric);
        if e > self.max_rel_error || self.checked == 1 {
            self.max_rel_error = e;
            self.worst = format!("{} (analytic {analytic:e}, numeric {numeric:e})", what());
        }
    }
}

fn coords(n: usize, limit: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match limit {
        Some(k) if k < n => {
            let mut v = sample(rng, n, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..n).collect(),
    }
}

/// Compare gradients of a scalar function of leaf tensors.
///
/// `f` receives one leaf per input. At most `limit` coordinates per input
/// are perturbed, chosen with `seed`.
pub fn check_leaves<F>(inputs: &[Tensor<f64>], limit: Option<usize>, seed: u64, mut f: F) -> Result<GradCheck>
where
    F: FnMut(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut eval = |xs: &[Tensor<f64>]| -> Result<(Graph<f64>, Vec<Var>, Var)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|t| g.leaf(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok((g, vars, out))
    };
    let (g, vars, out) = eval(inputs)?;
    let grads = g.backward(out)?;
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| grads.wrt(*v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheck::default();
    let mut xs = inputs.to_vec();
    for k in 0..xs.len() {
        for i in coords(xs[k].numel(), limit, &mut rng) {
            let orig = xs[k].data()[i];
            xs[k].data_mut()[i] = orig + FD_STEP;
            let (g, _, o) = eval(&xs)?;
            let plus = g.value(o).item()?;
            xs[k].data_mut()[i] = orig - FD_STEP;
            let (g, _, o) = eval(&xs)?;
            let minus = g.value(o).item()?;
            xs[k].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            report.record(|| format!("input {k}[{i}]"), analytic[k].data()[i], numeric);
        }
    }
    Ok(report)
}

/// Compare parameter gradients of a scalar loss built from `store`.
///
/// `f` must be deterministic given the store (reseed any sampling inside it).
pub fn check_params<F>(store: &mut ParamStore<f64>, per_param: usize, seed: u64, mut f: F) -> Result<GradCheck>
where
    F: FnMut(&mut Graph<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let mut g = Graph::new();
    let out = f(&mut g, store)?;
    let grads = g.backward(out)?;
    drop(g);
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    let analytic: Vec<Tensor<f64>> = ids
        .iter()
        .map(|id| grads.param(*id).cloned().unwrap_or_else(|| Tensor::zeros(store.get(*id).value().shape())))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheck::default();
    let mut loss_at = |store: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let o = f(&mut g, store)?;
        g.value(o).item()
    };
    for (k, id) in ids.iter().enumerate() {
        let n = store.get(*id).value().numel();
        for i in coords(n, Some(per_param), &mut rng) {
            let orig = store.get(*id).value().data()[i];
            store.get_mut(*id).value_mut().data_mut()[i] = orig + FD_STEP;
            let plus = loss_at(store)?;
            store.get_mut(*id).value_mut().data_mut()[i] = orig - FD_STEP;
            let minus = loss_at(store)?;
            store.get_mut(*id).value_mut().data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let name = &store.get(*id).name;
            report.record(|| format!("{name}[{i}]"), analytic[k].data()[i], numeric);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_a_wrong_gradient() {
        let x = Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap();
        let ok = check_leaves(std::slice::from_ref(&x), None, 0, |g, v| {
            let sq = g.mul(v[0], v[0])?;
            Ok(g.sum_all(sq))
        })
        .unwrap();
        assert_eq!(ok.checked, 3);
        assert!(ok.max_rel_error < 1e-6);
        // relu at a kink: analytic uses the one-sided derivative 0
        let kink = Tensor::new(vec![1], vec![0.0]).unwrap();
        let bad = check_leaves(&[kink], None, 0, |g, v| {
            let r = g.relu(v[0]);
            Ok(g.sum_all(r))
        })
        .unwrap();
        assert!(bad.max_rel_error > 0.1);
    }
}
