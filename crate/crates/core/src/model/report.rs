use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::arch::{architecture, BlockRole, Stage};
use super::{ModelKind, ModelSpec, EMBED_DIM};
use crate::error::Result;
use crate::objectives::LATENT_DIM;

/// One row of the layer summary. Shapes exclude the batch axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    /// `Conv3d: 2-1` style label.
    pub label: String,
    pub depth: usize,
    pub output_shape: Vec<usize>,
    /// `None` for container rows.
    pub params: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamReport {
    pub spec: ModelSpec,
    pub rows: Vec<ReportRow>,
    pub total: usize,
}

fn top_level_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::BaselineFfnn => "BaselineFFNN",
        ModelKind::BaselineCnn1d => "BaselineCNN_1DxSeq",
        ModelKind::BaselineCnn2d => "BaselineCNN",
        _ => "VariationalAutoencoder",
    }
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Layer summary derived from the architecture alone.
pub fn parameter_report(spec: &ModelSpec) -> Result<ParamReport> {
    let blocks = architecture(spec)?;
    let variational = spec.kind.is_variational();
    let top_shape = if variational { vec![LATENT_DIM] } else { vec![EMBED_DIM] };
    let mut rows = vec![ReportRow {
        label: top_level_name(spec.kind).to_string(),
        depth: 0,
        output_shape: top_shape,
        params: None,
    }];
    let (mut outer, mut inner) = (0, 0);
    let mut total = 0;
    for block in &blocks {
        let depth = if block.role == BlockRole::Trunk {
            1
        } else {
            outer += 1;
            let shape = match block.role {
                BlockRole::Encoder => vec![LATENT_DIM],
                _ => block.output_shape()?,
            };
            rows.push(ReportRow {
                label: format!("{}: 1-{outer}", block.role.summary_name()),
                depth: 1,
                output_shape: shape,
                params: None,
            });
            2
        };
        for (stage, shape) in block.stages.iter().zip(block.stage_shapes()?) {
            if let Stage::Layer(l) = stage {
                let n = if depth == 1 {
                    outer += 1;
                    outer
                } else {
                    inner += 1;
                    inner
                };
                let count = l.kind.param_count();
                total += count;
                rows.push(ReportRow {
                    label: format!("{}: {depth}-{n}", l.kind.type_name()),
                    depth,
                    output_shape: shape,
                    params: Some(count),
                });
            }
        }
        if block.role == BlockRole::Encoder {
            outer += 1;
            rows.push(ReportRow {
                label: format!("simpleSampling: 1-{outer}"),
                depth: 1,
                output_shape: vec![LATENT_DIM],
                params: None,
            });
        }
    }
    Ok(ParamReport { spec: *spec, rows, total })
}

impl ParamReport {
    /// Rows that own parameters.
    pub fn layer_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.params.is_some())
    }

    /// Fixed-width table with shapes shown for the given batch size.
    pub fn render(&self, batch: usize) -> String {
        let rule = "=".repeat(83);
        let mut s = String::new();
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "{:<41}{:<26}Param #", "Layer (type:depth-idx)", "Output Shape");
        let _ = writeln!(s, "{rule}");
        for r in &self.rows {
            let indent = match r.depth {
                0 => "",
                1 => "--",
                _ => "     --",
            };
            let mut shape = vec![batch];
            shape.extend_from_slice(&r.output_shape);
            let shape = format!("{shape:?}");
            let params = r.params.map_or_else(|| "--".to_string(), thousands);
            let _ = writeln!(s, "{:<41}{:<26}{}", format!("{indent}{}", r.label), shape, params);
        }
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "Total params: {}", thousands(self.total));
        let _ = writeln!(s, "Trainable params: {}", thousands(self.total));
        let _ = writeln!(s, "Non-trainable params: 0");
        let _ = writeln!(s, "{rule}");
        s
    }
}
