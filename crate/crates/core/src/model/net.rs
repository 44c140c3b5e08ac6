use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{architecture, BlockDef, BlockRole, LayerKind, Stage};
use super::{ModelSpec, EMBED_DIM, LEAKY_SLOPE, SEQ_LEN};
use crate::error::{Error, Result};
use crate::objectives::{sample_latent, LatentCode, LATENT_DIM};
use crate::tensor::{Graph, ParamId, ParamStore, Real, Tensor, Var};

/// How the variational bottleneck is traversed.
pub enum Mode<'a> {
    /// Draw a latent sample and run the mirror decoder when there is one.
    Train(&'a mut dyn RngCore),
    /// Decode the posterior mean; the mirror decoder is skipped.
    Eval,
}

#[derive(Clone, Copy, Debug)]
pub struct ForwardOutput {
    /// `[B, 768]`.
    pub pred: Var,
    pub latent: Option<LatentCode>,
    /// `[B, 7, 768]`, present for dual models in training mode.
    pub recon: Option<Var>,
}

#[derive(Clone, Debug)]
struct Block {
    def: BlockDef,
    /// Weight and bias of each stage that is a layer.
    params: Vec<Option<(ParamId, ParamId)>>,
}

/// A model instance: architecture plus parameters.
#[derive(Clone, Debug)]
pub struct Model<T> {
    spec: ModelSpec,
    params: ParamStore<T>,
    blocks: Vec<Block>,
}

/// Fresh `f32` model; weights uniform in `±1/sqrt(fan_in)`, biases zero.
pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<Model<f32>> {
    Model::build(spec, seed)
}

fn layer_names(defs: &[BlockDef]) -> Vec<Vec<Option<String>>> {
    defs.iter()
        .map(|b| {
            let mut n = 0;
            b.stages
                .iter()
                .map(|s| match s {
                    Stage::Layer(l) => {
                        n += 1;
                        Some(format!("{}.{}_{n}", b.role.prefix(), l.kind.type_name().to_lowercase()))
                    }
                    Stage::View(_) => None,
                })
                .collect()
        })
        .collect()
}

impl<T: Real> Model<T> {
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let defs = architecture(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let names = layer_names(&defs);
        let mut blocks = Vec::with_capacity(defs.len());
        for (def, names) in defs.into_iter().zip(names) {
            let mut params = Vec::with_capacity(def.stages.len());
            for (stage, name) in def.stages.iter().zip(names) {
                params.push(match (stage, name) {
                    (Stage::Layer(l), Some(name)) => {
                        let w = store.insert_uniform(
                            format!("{name}.weight"),
                            &l.kind.weight_shape(),
                            l.kind.fan_in(),
                            &mut rng,
                        )?;
                        let b = store.insert_zeros(format!("{name}.bias"), &[l.kind.bias_len()])?;
                        Some((w, b))
                    }
                    _ => None,
                });
            }
            blocks.push(Block { def, params });
        }
        Ok(Model { spec: *spec, params: store, blocks })
    }

    /// Attach existing parameters; names and shapes must match the
    /// architecture exactly and in order.
    pub fn from_params(spec: &ModelSpec, store: ParamStore<T>) -> Result<Self> {
        let template = Model::<T>::build(spec, 0)?;
        if template.params.len() != store.len() {
            return Err(Error::Contract(format!(
                "{} expects {} parameter tensors, got {}",
                spec,
                template.params.len(),
                store.len()
            )));
        }
        for ((_, want), (_, got)) in template.params.iter().zip(store.iter()) {
            if want.name != got.name || want.value().shape() != got.value().shape() {
                return Err(Error::Contract(format!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    got.name,
                    got.value().shape(),
                    want.name,
                    want.value().shape()
                )));
            }
        }
        Ok(Model { spec: *spec, params: store, blocks: template.blocks })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn blocks(&self) -> impl Iterator<Item = &BlockDef> {
        self.blocks.iter().map(|b| &b.def)
    }

    pub fn param_count(&self) -> usize {
        self.params.total_elements()
    }

    /// Same weights in another element type.
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model { spec: self.spec, params: self.params.cast(), blocks: self.blocks.clone() }
    }

    fn block(&self, role: BlockRole) -> Option<&Block> {
        self.blocks.iter().find(|b| b.def.role == role)
    }

    fn run_block(&self, g: &mut Graph<T>, block: &Block, mut x: Var) -> Result<Var> {
        let batch = g.shape(x)[0];
        for (stage, p) in block.def.stages.iter().zip(&block.params) {
            x = match (stage, p) {
                (Stage::View(shape), _) => {
                    let mut s = vec![batch];
                    s.extend_from_slice(shape);
                    g.reshape(x, &s)?
                }
                (Stage::Layer(l), Some((w, b))) => {
                    let w = g.param(&self.params, *w);
                    let b = g.param(&self.params, *b);
                    let y = match l.kind {
                        LayerKind::Linear { .. } => g.linear(x, w, b)?,
                        LayerKind::Conv2d { .. } => g.conv2d(x, w, b)?,
                        LayerKind::Conv3d { .. } => g.conv3d(x, w, b)?,
                        LayerKind::ConvTranspose2d { .. } => g.conv_transpose2d(x, w, b)?,
                        LayerKind::ConvTranspose3d { .. } => g.conv_transpose3d(x, w, b)?,
                    };
                    if l.activation {
                        g.leaky_relu(y, LEAKY_SLOPE)
                    } else {
                        y
                    }
                }
                (Stage::Layer(_), None) => unreachable!("layers always own parameters"),
            };
        }
        Ok(x)
    }

    /// Run the model on a `[B, 7, 768]` context stack.
    pub fn forward(&self, g: &mut Graph<T>, context: Var, mode: Mode<'_>) -> Result<ForwardOutput> {
        let shape = g.shape(context).to_vec();
        if shape.len() != 3 || shape[1] != SEQ_LEN || shape[2] != EMBED_DIM {
            return Err(Error::dim("forward", format!("expected context [B, {SEQ_LEN}, {EMBED_DIM}], got {shape:?}")));
        }
        let batch = shape[0];
        if let Some(trunk) = self.block(BlockRole::Trunk) {
            let pred = self.run_block(g, trunk, context)?;
            return Ok(ForwardOutput { pred, latent: None, recon: None });
        }

        let encoder = self.block(BlockRole::Encoder).expect("variational models have an encoder");
        let stats = self.run_block(g, encoder, context)?;
        let mu = g.narrow(stats, 0, LATENT_DIM)?;
        let logvar = g.narrow(stats, LATENT_DIM, LATENT_DIM)?;
        let (latent, recon) = match mode {
            Mode::Train(rng) => {
                let code = sample_latent(g, mu, logvar, rng)?;
                let recon = match self.block(BlockRole::DecoderMirror) {
                    Some(m) => {
                        let r = self.run_block(g, m, code.sample)?;
                        Some(g.reshape(r, &[batch, SEQ_LEN, EMBED_DIM])?)
                    }
                    None => None,
                };
                (code, recon)
            }
            Mode::Eval => (LatentCode { mu, logvar, sample: mu }, None),
        };
        let answer = self.block(BlockRole::DecoderAnswer).expect("variational models decode an answer");
        let pred = self.run_block(g, answer, latent.sample)?;
        let pred = g.reshape(pred, &[batch, EMBED_DIM])?;
        Ok(ForwardOutput { pred, latent: Some(latent), recon })
    }

    /// Evaluation-mode predictions for a `[B, 7, 768]` stack, `[B, 768]`.
    pub fn predict(&self, context: Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let x = g.input(context);
        let out = self.forward(&mut g, x, Mode::Eval)?;
        Ok(g.value(out.pred).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelKind, Reshape};

    fn context(batch: usize, seed: u64) -> Tensor<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(&[batch, SEQ_LEN, EMBED_DIM], |_| (rng.next_u32() as f64 / u32::MAX as f64 - 0.5) as f32)
    }

    #[test]
    fn same_seed_same_weights() {
        let spec = ModelSpec::new(ModelKind::Vae1d, None).unwrap();
        let a = build_model(&spec, 7).unwrap();
        let b = build_model(&spec, 7).unwrap();
        let c = build_model(&spec, 8).unwrap();
        let flat =
            |m: &Model<f32>| -> Vec<f32> { m.params().iter().flat_map(|(_, p)| p.value().data().to_vec()).collect() };
        assert_eq!(flat(&a), flat(&b));
        assert_ne!(flat(&a), flat(&c));
    }

    #[test]
    fn parameter_names_follow_blocks() {
        let spec = ModelSpec::new(ModelKind::DualVae2d, Some(Reshape { rows: 48, cols: 16 })).unwrap();
        let m = build_model(&spec, 0).unwrap();
        let names: Vec<_> = m.params().iter().map(|(_, p)| p.name.clone()).collect();
        assert_eq!(names[0], "encoder.conv3d_1.weight");
        assert_eq!(names[3], "encoder.linear_2.bias");
        assert_eq!(names[4], "decoder_mirror.linear_1.weight");
        assert_eq!(names.last().unwrap(), "decoder_answer.convtranspose3d_2.bias");
    }

    #[test]
    fn forward_output_shapes() {
        let x = context(2, 1);
        for (kind, reshape) in [
            (ModelKind::BaselineCnn1d, None),
            (ModelKind::Vae1d, None),
            (ModelKind::DualVae1d, None),
            (ModelKind::DualVae2d, Some(Reshape { rows: 48, cols: 16 })),
        ] {
            let spec = ModelSpec::new(kind, reshape).unwrap();
            let m = build_model(&spec, 3).unwrap();
            let mut g = Graph::new();
            let v = g.input(x.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let out = m.forward(&mut g, v, Mode::Train(&mut rng)).unwrap();
            assert_eq!(g.shape(out.pred), [2, EMBED_DIM]);
            assert_eq!(out.latent.is_some(), kind.is_variational());
            assert_eq!(out.recon.is_some(), kind.is_dual());
            if let Some(r) = out.recon {
                assert_eq!(g.shape(r), [2, SEQ_LEN, EMBED_DIM]);
            }
            if let Some(z) = out.latent {
                assert_eq!(g.shape(z.mu), [2, LATENT_DIM]);
            }
        }
    }

    #[test]
    fn eval_mode_is_deterministic_and_batch_independent() {
        let spec = ModelSpec::new(ModelKind::Vae1d, None).unwrap();
        let m = build_model(&spec, 5).unwrap();
        let x = context(3, 2);
        let all = m.predict(x.clone()).unwrap();
        assert_eq!(all.data(), m.predict(x.clone()).unwrap().data());
        let first = Tensor::new(vec![1, SEQ_LEN, EMBED_DIM], x.data()[..SEQ_LEN * EMBED_DIM].to_vec()).unwrap();
        let one = m.predict(first).unwrap();
        for (a, b) in one.data().iter().zip(&all.data()[..EMBED_DIM]) {
            assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn wrong_context_shape_is_rejected() {
        let spec = ModelSpec::new(ModelKind::BaselineFfnn, None).unwrap();
        let m = build_model(&spec, 0).unwrap();
        let bad = Tensor::zeros(&[1, 6, EMBED_DIM]);
        assert!(matches!(m.predict(bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn from_params_checks_layout() {
        let spec = ModelSpec::new(ModelKind::Vae1d, None).unwrap();
        let m = build_model(&spec, 1).unwrap();
        assert!(Model::from_params(&spec, m.params().clone()).is_ok());
        let other = ModelSpec::new(ModelKind::DualVae1d, None).unwrap();
        assert!(Model::from_params(&other, m.params().clone()).is_err());
    }
}
