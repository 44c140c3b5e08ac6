use super::{ModelKind, ModelSpec, EMBED_DIM, SEQ_LEN};
use crate::error::{Error, Result};
use crate::objectives::LATENT_DIM;

/// Kernel extent of the 2D-grid convolutions along the grid axes.
const GRID_KERNEL: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Linear { input: usize, output: usize },
    Conv2d { in_ch: usize, out_ch: usize, kernel: [usize; 2] },
    Conv3d { in_ch: usize, out_ch: usize, kernel: [usize; 3] },
    ConvTranspose2d { in_ch: usize, out_ch: usize, kernel: [usize; 2] },
    ConvTranspose3d { in_ch: usize, out_ch: usize, kernel: [usize; 3] },
}

impl LayerKind {
    pub fn type_name(&self) -> &'static str {
        match self {
            LayerKind::Linear { .. } => "Linear",
            LayerKind::Conv2d { .. } => "Conv2d",
            LayerKind::Conv3d { .. } => "Conv3d",
            LayerKind::ConvTranspose2d { .. } => "ConvTranspose2d",
            LayerKind::ConvTranspose3d { .. } => "ConvTranspose3d",
        }
    }

    fn kernel(&self) -> &[usize] {
        match self {
            LayerKind::Linear { .. } => &[],
            LayerKind::Conv2d { kernel, .. } | LayerKind::ConvTranspose2d { kernel, .. } => kernel,
            LayerKind::Conv3d { kernel, .. } | LayerKind::ConvTranspose3d { kernel, .. } => kernel,
        }
    }

    /// `[out, in]` for linear layers, `[narrow, wide, k..]` for convolutions.
    pub fn weight_shape(&self) -> Vec<usize> {
        let mut s = match *self {
            LayerKind::Linear { input, output } => vec![output, input],
            LayerKind::Conv2d { in_ch, out_ch, .. } | LayerKind::Conv3d { in_ch, out_ch, .. } => {
                vec![out_ch, in_ch]
            }
            LayerKind::ConvTranspose2d { in_ch, out_ch, .. } | LayerKind::ConvTranspose3d { in_ch, out_ch, .. } => {
                vec![in_ch, out_ch]
            }
        };
        s.extend_from_slice(self.kernel());
        s
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            LayerKind::Linear { output, .. } => output,
            LayerKind::Conv2d { out_ch, .. }
            | LayerKind::Conv3d { out_ch, .. }
            | LayerKind::ConvTranspose2d { out_ch, .. }
            | LayerKind::ConvTranspose3d { out_ch, .. } => out_ch,
        }
    }

    /// Inputs feeding one output unit, used to scale the initialization.
    pub fn fan_in(&self) -> usize {
        let w = self.weight_shape();
        w[1..].iter().product()
    }

    pub fn param_count(&self) -> usize {
        self.weight_shape().iter().product::<usize>() + self.bias_len()
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = || {
            Error::dim(
                "layer",
                format!("{} with weight {:?} cannot take input {input:?}", self.type_name(), self.weight_shape()),
            )
        };
        match *self {
            LayerKind::Linear { input: i, output } => {
                if input != [i] {
                    return Err(bad());
                }
                Ok(vec![output])
            }
            LayerKind::Conv2d { in_ch, out_ch, .. } | LayerKind::Conv3d { in_ch, out_ch, .. } => {
                let k = self.kernel();
                if input.len() != k.len() + 1 || input[0] != in_ch {
                    return Err(bad());
                }
                let mut out = vec![out_ch];
                for (x, k) in input[1..].iter().zip(k) {
                    if x < k {
                        return Err(bad());
                    }
                    out.push(x - k + 1);
                }
                Ok(out)
            }
            LayerKind::ConvTranspose2d { in_ch, out_ch, .. } | LayerKind::ConvTranspose3d { in_ch, out_ch, .. } => {
                let k = self.kernel();
                if input.len() != k.len() + 1 || input[0] != in_ch {
                    return Err(bad());
                }
                let mut out = vec![out_ch];
                out.extend(input[1..].iter().zip(k).map(|(x, k)| x + k - 1));
                Ok(out)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerDef {
    pub kind: LayerKind,
    /// Leaky ReLU after the layer.
    pub activation: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stage {
    Layer(LayerDef),
    /// Reinterpret the per-sample data with this shape.
    View(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockRole {
    /// Whole network of a baseline model.
    Trunk,
    Encoder,
    DecoderMirror,
    DecoderAnswer,
}

impl BlockRole {
    pub fn prefix(self) -> &'static str {
        match self {
            BlockRole::Trunk => "net",
            BlockRole::Encoder => "encoder",
            BlockRole::DecoderMirror => "decoder_mirror",
            BlockRole::DecoderAnswer => "decoder_answer",
        }
    }

    pub fn summary_name(self) -> &'static str {
        match self {
            BlockRole::Trunk => "Trunk",
            BlockRole::Encoder => "Encoder",
            BlockRole::DecoderMirror => "Decoder_mirror",
            BlockRole::DecoderAnswer => "Decoder_answer",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockDef {
    pub role: BlockRole,
    /// Per-sample input shape.
    pub input: Vec<usize>,
    pub stages: Vec<Stage>,
}

impl BlockDef {
    pub fn layers(&self) -> impl Iterator<Item = &LayerDef> {
        self.stages.iter().filter_map(|s| match s {
            Stage::Layer(l) => Some(l),
            Stage::View(_) => None,
        })
    }

    /// Output shape after every stage, in order.
    pub fn stage_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut cur = self.input.clone();
        let mut out = Vec::with_capacity(self.stages.len());
        for s in &self.stages {
            cur = match s {
                Stage::Layer(l) => l.kind.output_shape(&cur)?,
                Stage::View(v) => {
                    if v.iter().product::<usize>() != cur.iter().product::<usize>() {
                        return Err(Error::dim("view", format!("{cur:?} -> {v:?}")));
                    }
                    v.clone()
                }
            };
            out.push(cur.clone());
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.stage_shapes()?.pop().unwrap_or_else(|| self.input.clone()))
    }
}

fn layer(kind: LayerKind, activation: bool) -> Stage {
    Stage::Layer(LayerDef { kind, activation })
}

fn linear(input: usize, output: usize, activation: bool) -> Stage {
    layer(LayerKind::Linear { input, output }, activation)
}

fn seq_conv_trunk() -> Vec<Stage> {
    let conv = |in_ch, out_ch| layer(LayerKind::Conv2d { in_ch, out_ch, kernel: [3, 3] }, true);
    vec![Stage::View(vec![1, SEQ_LEN, EMBED_DIM]), conv(1, 4), conv(4, 8), conv(8, 16), Stage::View(vec![seq_flat()])]
}

fn seq_flat() -> usize {
    16 * (SEQ_LEN - 6) * (EMBED_DIM - 6)
}

fn grid_narrow(rows: usize, cols: usize) -> [usize; 3] {
    [SEQ_LEN - 2, rows + 1 - GRID_KERNEL, cols + 1 - GRID_KERNEL]
}

fn grid_conv_trunk(rows: usize, cols: usize) -> Vec<Stage> {
    let [d, h, w] = grid_narrow(rows, cols);
    vec![
        Stage::View(vec![1, SEQ_LEN, rows, cols]),
        layer(LayerKind::Conv3d { in_ch: 1, out_ch: 32, kernel: [3, GRID_KERNEL, GRID_KERNEL] }, true),
        Stage::View(vec![32 * d * h * w]),
    ]
}

fn seq_decoder(mirror: bool) -> Vec<Stage> {
    let kh = if mirror { 3 } else { 1 };
    let deconv = |in_ch, out_ch, act| layer(LayerKind::ConvTranspose2d { in_ch, out_ch, kernel: [kh, 3] }, act);
    vec![
        linear(LATENT_DIM, seq_flat(), true),
        Stage::View(vec![16, 1, EMBED_DIM - 6]),
        deconv(16, 8, true),
        deconv(8, 4, true),
        deconv(4, 1, false),
    ]
}

fn grid_decoder(rows: usize, cols: usize, mirror: bool) -> Vec<Stage> {
    let [d, h, w] = grid_narrow(rows, cols);
    let depth = if mirror { d } else { 1 };
    let kd = if mirror { 3 } else { 1 };
    vec![
        linear(LATENT_DIM, 32 * depth * h * w, true),
        Stage::View(vec![32, depth, h, w]),
        layer(LayerKind::ConvTranspose3d { in_ch: 32, out_ch: 1, kernel: [kd, GRID_KERNEL, GRID_KERNEL] }, false),
    ]
}

/// Block layout of a model, in parameter-declaration order.
pub fn architecture(spec: &ModelSpec) -> Result<Vec<BlockDef>> {
    spec.validate()?;
    let input = vec![SEQ_LEN, EMBED_DIM];
    let (rows, cols) = spec.reshape.map_or((0, 0), |r| (r.rows, r.cols));
    let trunk = |stages| BlockDef { role: BlockRole::Trunk, input: input.clone(), stages };
    let encoder = |mut stages: Vec<Stage>, flat: usize| {
        stages.push(linear(flat, 2 * LATENT_DIM, false));
        BlockDef { role: BlockRole::Encoder, input: input.clone(), stages }
    };
    let decoder = |role, stages| BlockDef { role, input: vec![LATENT_DIM], stages };
    let grid_flat = || {
        let [d, h, w] = grid_narrow(rows, cols);
        32 * d * h * w
    };

    let blocks = match spec.kind {
        ModelKind::BaselineFfnn => vec![trunk(vec![
            Stage::View(vec![SEQ_LEN * EMBED_DIM]),
            linear(SEQ_LEN * EMBED_DIM, 2 * EMBED_DIM, true),
            linear(2 * EMBED_DIM, 2 * EMBED_DIM, true),
            linear(2 * EMBED_DIM, EMBED_DIM, false),
        ])],
        ModelKind::BaselineCnn1d => {
            let mut s = seq_conv_trunk();
            s.push(linear(seq_flat(), EMBED_DIM, false));
            vec![trunk(s)]
        }
        ModelKind::BaselineCnn2d => {
            let mut s = grid_conv_trunk(rows, cols);
            s.push(linear(grid_flat(), EMBED_DIM, false));
            vec![trunk(s)]
        }
        ModelKind::Vae1d | ModelKind::DualVae1d => {
            let mut b = vec![encoder(seq_conv_trunk(), seq_flat())];
            if spec.kind.is_dual() {
                b.push(decoder(BlockRole::DecoderMirror, seq_decoder(true)));
            }
            b.push(decoder(BlockRole::DecoderAnswer, seq_decoder(false)));
            b
        }
        ModelKind::Vae2d | ModelKind::DualVae2d => {
            let mut b = vec![encoder(grid_conv_trunk(rows, cols), grid_flat())];
            if spec.kind.is_dual() {
                b.push(decoder(BlockRole::DecoderMirror, grid_decoder(rows, cols, true)));
            }
            b.push(decoder(BlockRole::DecoderAnswer, grid_decoder(rows, cols, false)));
            b
        }
    };
    for b in &blocks {
        b.stage_shapes()?;
    }
    Ok(blocks)
}
