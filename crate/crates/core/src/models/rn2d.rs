//! RN2D: a 2D residual network that reads the pairwise absolute-difference
//! matrix of two series and emits a scalar relevance score.
//!
//! ```text
//! D [w, h, 1] -> conv 7x7/2 (1->64) -> relu
//!             -> 8 x bottleneck (64 -> 16 -> 64, stride 2)
//!             -> global average pool [64] -> linear (64 -> 1)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_layer_output, PairModel};
use crate::distance::pairwise_abs_matrix;
use crate::error::{Error, Result};
use crate::scorer::{check_finite, Scorer};
use crate::tensor::{BoundLayer, LayerParams, Parameterized, Tape, Tensor, Var};

pub const STEM_CHANNELS: usize = 64;
pub const NECK_CHANNELS: usize = 16;
pub const BLOCK_COUNT: usize = 8;

/// Residual bottleneck: 1x1 reduce, 3x3 stride-2, 1x1 expand, with a 1x1
/// stride-2 projection on the skip path.
#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckBlockParams {
    pub reduce: LayerParams,
    pub spatial: LayerParams,
    pub expand: LayerParams,
    pub skip: LayerParams,
}

impl BottleneckBlockParams {
    pub fn new<R: rand::Rng + ?Sized>(n_in: usize, n_neck: usize, n_out: usize, rng: &mut R) -> Self {
        Self {
            reduce: LayerParams::conv2d(1, 1, n_in, n_neck, 1, rng),
            spatial: LayerParams::conv2d(3, 3, n_neck, n_neck, 2, rng),
            expand: LayerParams::conv2d(1, 1, n_neck, n_out, 1, rng),
            skip: LayerParams::conv2d(1, 1, n_in, n_out, 2, rng),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for l in self.parts() {
            l.validate()?;
        }
        let chain = [
            ("reduce->spatial", self.reduce.out_channels(), self.spatial.in_channels()),
            ("spatial->expand", self.spatial.out_channels(), self.expand.in_channels()),
            ("skip input", self.reduce.in_channels(), self.skip.in_channels()),
            ("skip output", self.expand.out_channels(), self.skip.out_channels()),
            ("skip stride", self.spatial.stride, self.skip.stride),
        ];
        for (axis, expected, got) in chain {
            if expected != got {
                return Err(Error::ShapeMismatch { axis, expected, got });
            }
        }
        Ok(())
    }

    fn parts(&self) -> [&LayerParams; 4] {
        [&self.reduce, &self.spatial, &self.expand, &self.skip]
    }
}

impl Parameterized for BottleneckBlockParams {
    fn layers(&self) -> Vec<(String, &LayerParams)> {
        ["reduce", "spatial", "expand", "skip"]
            .into_iter()
            .map(String::from)
            .zip(self.parts())
            .collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut LayerParams> {
        vec![&mut self.reduce, &mut self.spatial, &mut self.expand, &mut self.skip]
    }
}

/// `relu(skip(x) + expand(relu(spatial(relu(reduce(x))))))` on bound layers
/// `[reduce, spatial, expand, skip]`.
pub fn bottleneck_bound(tape: &mut Tape, x: Var, layers: &[BoundLayer]) -> Result<Var> {
    let [reduce, spatial, expand, skip] = layers else {
        return Err(Error::Invalid("a bottleneck block has exactly four layers".into()));
    };
    let h = reduce.forward(tape, x)?;
    let h = tape.relu(h);
    let h = spatial.forward(tape, h)?;
    let h = tape.relu(h);
    let out = expand.forward(tape, h)?;
    let shortcut = skip.forward(tape, x)?;
    let merged = tape.add(out, shortcut)?;
    Ok(tape.relu(merged))
}

/// Gradient-free bottleneck block on a `[h, w, n_in]` map.
pub fn bottleneck_forward(x: &Tensor, p: &BottleneckBlockParams) -> Result<Tensor> {
    p.validate()?;
    let mut tape = Tape::new();
    let bound: Vec<BoundLayer> = p.parts().iter().map(|l| l.bind(&mut tape)).collect();
    let xv = tape.constant(x.clone());
    let y = bottleneck_bound(&mut tape, xv, &bound)?;
    Ok(tape.value(y).clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rn2dModel {
    pub stem: LayerParams,
    pub blocks: Vec<BottleneckBlockParams>,
    pub head: LayerParams,
}

impl Rn2dModel {
    /// He-uniform weights and zero biases, drawn from a seeded stream.
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stem = LayerParams::conv2d(7, 7, 1, STEM_CHANNELS, 2, &mut rng);
        let blocks = (0..BLOCK_COUNT)
            .map(|_| BottleneckBlockParams::new(STEM_CHANNELS, NECK_CHANNELS, STEM_CHANNELS, &mut rng))
            .collect();
        let head = LayerParams::linear(STEM_CHANNELS, 1, &mut rng);
        Self { stem, blocks, head }
    }

    /// Exact number of scalars in the architecture.
    pub const fn expected_param_count() -> usize {
        let (c, n) = (STEM_CHANNELS, NECK_CHANNELS);
        let stem = 7 * 7 * c + c;
        let block = (c * n + n) + (3 * 3 * n * n + n) + (n * c + c) + (c * c + c);
        let head = c + 1;
        stem + BLOCK_COUNT * block + head
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.len() != BLOCK_COUNT {
            return Err(Error::ShapeMismatch {
                axis: "block count",
                expected: BLOCK_COUNT,
                got: self.blocks.len(),
            });
        }
        for b in &self.blocks {
            b.validate()?;
            let settings = (b.reduce.in_channels(), b.reduce.out_channels(), b.expand.out_channels());
            if settings != (STEM_CHANNELS, NECK_CHANNELS, STEM_CHANNELS) {
                return Err(Error::Invalid(format!("block channel setting {settings:?} is not 64->16->64")));
            }
        }
        let count = self.param_count();
        if count != Self::expected_param_count() {
            return Err(Error::ShapeMismatch {
                axis: "parameter count",
                expected: Self::expected_param_count(),
                got: count,
            });
        }
        Ok(())
    }

    /// Records the score of `(a, b)`; `bound` comes from [`Parameterized::bind`].
    /// Layer indices in errors: 0 is the stem, 1..=8 the blocks, 9 the head.
    pub fn forward(&self, tape: &mut Tape, bound: &[BoundLayer], a: &[f64], b: &[f64]) -> Result<Var> {
        let d = pairwise_abs_matrix(a, b)?;
        let x = tape.constant(d.to_tensor());
        let mut h = bound[0].forward(tape, x)?;
        h = tape.relu(h);
        check_layer_output(tape, h, 0, "stem")?;
        for (i, layers) in bound[1..1 + 4 * BLOCK_COUNT].chunks_exact(4).enumerate() {
            h = bottleneck_bound(tape, h, layers)?;
            check_layer_output(tape, h, i + 1, "bottleneck")?;
        }
        let pooled = tape.global_avg_pool(h)?;
        let score = bound[1 + 4 * BLOCK_COUNT].forward(tape, pooled)?;
        check_layer_output(tape, score, BLOCK_COUNT + 1, "head")?;
        Ok(score)
    }

    pub fn score(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let s = self.forward(&mut tape, &bound, a, b)?;
        Ok(tape.value(s).data()[0])
    }
}

impl Parameterized for Rn2dModel {
    fn layers(&self) -> Vec<(String, &LayerParams)> {
        let mut out = vec![("stem".to_string(), &self.stem)];
        for (i, b) in self.blocks.iter().enumerate() {
            for (part, l) in ["reduce", "spatial", "expand", "skip"].into_iter().zip(b.parts()) {
                out.push((format!("block{i}.{part}"), l));
            }
        }
        out.push(("head".to_string(), &self.head));
        out
    }

    fn layers_mut(&mut self) -> Vec<&mut LayerParams> {
        let mut out = vec![&mut self.stem];
        for b in &mut self.blocks {
            out.extend([&mut b.reduce, &mut b.spatial, &mut b.expand, &mut b.skip]);
        }
        out.push(&mut self.head);
        out
    }
}

impl PairModel for Rn2dModel {
    fn kind(&self) -> &'static str {
        "rn2d"
    }

    fn triplet_scores(
        &self,
        tape: &mut Tape,
        bound: &[BoundLayer],
        anchor: &[f64],
        positive: &[f64],
        negative: &[f64],
    ) -> Result<(Var, Var)> {
        let pos = self.forward(tape, bound, anchor, positive)?;
        let neg = self.forward(tape, bound, anchor, negative)?;
        Ok((pos, neg))
    }

    fn scorer(&self) -> Box<dyn Scorer + '_> {
        Box::new(Rn2dScorer { model: self })
    }
}

/// Scores with a frozen RN2D model; the query is the first argument of the network.
pub struct Rn2dScorer<'a> {
    pub model: &'a Rn2dModel,
}

impl Scorer for Rn2dScorer<'_> {
    fn name(&self) -> &str {
        "rn2d"
    }

    fn score(&self, query: &[f64], candidate: &[f64]) -> Result<f64> {
        check_finite(self.model.score(query, candidate)?, "rn2d")
    }

    fn score_all(&self, query: &[f64], candidates: &[&[f64]]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.model.bind(&mut tape);
        let mark = tape.len();
        let mut out = Vec::with_capacity(candidates.len());
        for c in candidates {
            let s = self.model.forward(&mut tape, &bound, query, c)?;
            out.push(check_finite(tape.value(s).data()[0], "rn2d")?);
            tape.truncate(mark);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_is_exact() {
        let m = Rn2dModel::new(0);
        assert_eq!(Rn2dModel::expected_param_count(), 72129);
        assert_eq!(m.param_count(), 72129);
        m.validate().unwrap();
    }

    #[test]
    fn zero_head_scores_zero() {
        let mut m = Rn2dModel::new(3);
        m.head.weight.data_mut().fill(0.0);
        let a: Vec<f64> = (0..32).map(|i| (i as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..32).map(|i| (i as f64 * 0.7).cos()).collect();
        assert_eq!(m.score(&a, &b).unwrap(), 0.0);
        assert_eq!(m.score(&b, &a).unwrap(), 0.0);
    }

    #[test]
    fn rejects_wrong_block_count() {
        let mut m = Rn2dModel::new(1);
        m.blocks.pop();
        assert!(m.validate().is_err());
    }
}
