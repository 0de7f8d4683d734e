//! Trainable relevance scorers.

pub mod rn1d;
pub mod rn2d;

pub use rn1d::{Rn1dEncoder, Rn1dScorer, EMBEDDING_DIM};
pub use rn2d::{bottleneck_bound, bottleneck_forward, BottleneckBlockParams, Rn2dModel, Rn2dScorer};

use crate::error::{Error, Result};
use crate::scorer::Scorer;
use crate::tensor::{BoundLayer, Checkpoint, Parameterized, Tape, Var};

/// A model that can be trained on triplets with the pairwise ranking loss.
pub trait PairModel: Parameterized + Send + Sync {
    /// Checkpoint tag for this model family.
    fn kind(&self) -> &'static str;

    /// Records `f(anchor, positive)` and `f(anchor, negative)` on the tape.
    fn triplet_scores(
        &self,
        tape: &mut Tape,
        bound: &[BoundLayer],
        anchor: &[f64],
        positive: &[f64],
        negative: &[f64],
    ) -> Result<(Var, Var)>;

    fn scorer(&self) -> Box<dyn Scorer + '_>;
}

/// Which trainable model family a checkpoint or command refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rn2d,
    Rn1d,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rn2d => "rn2d",
            ModelKind::Rn1d => "rn1d",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rn2d" => Ok(ModelKind::Rn2d),
            "rn1d" => Ok(ModelKind::Rn1d),
            other => Err(Error::Invalid(format!("unknown model kind {other:?}; expected rn2d or rn1d"))),
        }
    }
}

/// Either trainable model, as loaded from a checkpoint.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Rn2d(Rn2dModel),
    Rn1d(Rn1dEncoder),
}

impl AnyModel {
    pub fn init(kind: ModelKind, seed: u64) -> Self {
        match kind {
            ModelKind::Rn2d => AnyModel::Rn2d(Rn2dModel::new(seed)),
            ModelKind::Rn1d => AnyModel::Rn1d(Rn1dEncoder::new(seed)),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mut model = Self::init(ckpt.kind.parse()?, 0);
        model.as_pair_model_mut().load_params(ckpt)?;
        Ok(model)
    }

    pub fn as_pair_model(&self) -> &dyn PairModel {
        match self {
            AnyModel::Rn2d(m) => m,
            AnyModel::Rn1d(m) => m,
        }
    }

    pub fn as_pair_model_mut(&mut self) -> &mut dyn PairModel {
        match self {
            AnyModel::Rn2d(m) => m,
            AnyModel::Rn1d(m) => m,
        }
    }
}

pub(crate) fn check_layer_output(tape: &Tape, v: Var, layer: usize, name: &str) -> Result<()> {
    if tape.value(v).is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            layer,
            name: name.to_string(),
        })
    }
}
