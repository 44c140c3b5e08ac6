//! The seven probing architectures.
//!
//! Every model maps a `[B, 7, 768]` context stack to a `[B, 768]` predicted
//! answer. 2D variants reshape each sentence embedding row-major into a
//! `rows × cols` grid internally; inputs and predictions stay flat.

mod arch;
mod checkpoint;
mod net;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use arch::{architecture, BlockDef, BlockRole, LayerDef, LayerKind, Stage};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use net::{build_model, ForwardOutput, Mode, Model};
pub use report::{parameter_report, ParamReport, ReportRow};

pub const EMBED_DIM: usize = 768;
pub const SEQ_LEN: usize = 7;
/// Slope of the leaky ReLU applied after every hidden layer.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "Baseline_FFNN")]
    BaselineFfnn,
    #[serde(rename = "Baseline_CNN_1DxSeq")]
    BaselineCnn1d,
    #[serde(rename = "Baseline_CNN_2D")]
    BaselineCnn2d,
    #[serde(rename = "VAE_1DxSeq")]
    Vae1d,
    #[serde(rename = "VAE_2D")]
    Vae2d,
    #[serde(rename = "Dual_VAE_1DxSeq")]
    DualVae1d,
    #[serde(rename = "Dual_VAE_2D")]
    DualVae2d,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::BaselineFfnn,
        ModelKind::BaselineCnn1d,
        ModelKind::BaselineCnn2d,
        ModelKind::Vae1d,
        ModelKind::Vae2d,
        ModelKind::DualVae1d,
        ModelKind::DualVae2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::BaselineFfnn => "Baseline_FFNN",
            ModelKind::BaselineCnn1d => "Baseline_CNN_1DxSeq",
            ModelKind::BaselineCnn2d => "Baseline_CNN_2D",
            ModelKind::Vae1d => "VAE_1DxSeq",
            ModelKind::Vae2d => "VAE_2D",
            ModelKind::DualVae1d => "Dual_VAE_1DxSeq",
            ModelKind::DualVae2d => "Dual_VAE_2D",
        }
    }

    pub fn is_2d(self) -> bool {
        matches!(self, ModelKind::BaselineCnn2d | ModelKind::Vae2d | ModelKind::DualVae2d)
    }

    pub fn is_variational(self) -> bool {
        matches!(self, ModelKind::Vae1d | ModelKind::Vae2d | ModelKind::DualVae1d | ModelKind::DualVae2d)
    }

    pub fn is_dual(self) -> bool {
        matches!(self, ModelKind::DualVae1d | ModelKind::DualVae2d)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

/// Grid shape of a 2D-reshaped sentence embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Reshape {
    pub rows: usize,
    pub cols: usize,
}

impl Reshape {
    pub const ALLOWED: [Reshape; 4] = [
        Reshape { rows: 16, cols: 48 },
        Reshape { rows: 24, cols: 32 },
        Reshape { rows: 32, cols: 24 },
        Reshape { rows: 48, cols: 16 },
    ];

    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        let r = Reshape { rows, cols };
        if Reshape::ALLOWED.contains(&r) {
            Ok(r)
        } else {
            Err(Error::Config(format!("unsupported reshape {rows}x{cols}; expected one of 16x48, 24x32, 32x24, 48x16")))
        }
    }
}

impl fmt::Display for Reshape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for Reshape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed reshape {s:?}; expected ROWSxCOLS"));
        let (r, c) = s.split_once(['x', 'X', '×']).ok_or_else(bad)?;
        let r = r.trim().parse().map_err(|_| bad())?;
        let c = c.trim().parse().map_err(|_| bad())?;
        Reshape::new(r, c)
    }
}

impl TryFrom<String> for Reshape {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Reshape> for String {
    fn from(r: Reshape) -> String {
        r.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reshape: Option<Reshape>,
}

impl ModelSpec {
    /// Validated spec; `reshape` must be given exactly for the 2D kinds.
    pub fn new(kind: ModelKind, reshape: Option<Reshape>) -> Result<Self> {
        let spec = ModelSpec { kind, reshape };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind.is_2d(), self.reshape) {
            (true, None) => Err(Error::Config(format!("{} requires a reshape", self.kind))),
            (false, Some(r)) => {
                Err(Error::Config(format!("{} takes flat embeddings but reshape {r} was given", self.kind)))
            }
            (true, Some(r)) => Reshape::new(r.rows, r.cols).map(|_| ()),
            (false, None) => Ok(()),
        }
    }

    /// `Dual_VAE_2D@48x16` style label.
    pub fn label(&self) -> String {
        match self.reshape {
            Some(r) => format!("{}@{r}", self.kind),
            None => self.kind.to_string(),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip_through_names() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!(matches!("VAE_3D".parse::<ModelKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn reshape_parsing() {
        assert_eq!("48x16".parse::<Reshape>().unwrap(), Reshape { rows: 48, cols: 16 });
        assert_eq!("24×32".parse::<Reshape>().unwrap(), Reshape { rows: 24, cols: 32 });
        assert!(matches!("12x64".parse::<Reshape>(), Err(Error::Config(_))));
        assert!(matches!("48-16".parse::<Reshape>(), Err(Error::Config(_))));
    }

    #[test]
    fn reshape_presence_follows_kind() {
        let r = Some(Reshape { rows: 48, cols: 16 });
        assert!(ModelSpec::new(ModelKind::Vae2d, r).is_ok());
        assert!(ModelSpec::new(ModelKind::Vae2d, None).is_err());
        assert!(ModelSpec::new(ModelKind::Vae1d, r).is_err());
        let bad = ModelSpec { kind: ModelKind::Vae2d, reshape: Some(Reshape { rows: 64, cols: 12 }) };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
