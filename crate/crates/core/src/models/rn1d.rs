//! Siamese RN1D baseline: a 1D residual encoder whose embeddings are compared
//! with the Euclidean distance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_layer_output, PairModel};
use crate::error::{Error, Result};
use crate::scorer::{check_finite, PreparedScorer, Scorer};
use crate::tensor::{BoundLayer, LayerParams, Parameterized, Tape, Tensor, Var};

pub const EMBEDDING_DIM: usize = 64;
pub const BLOCK_CHANNELS: [usize; 3] = [64, 128, 128];
pub const KERNEL_WIDTHS: [usize; 3] = [8, 5, 3];
pub const MIN_LENGTH: usize = 8;

/// Three stride-1 convolutions (widths 8, 5, 3) with a residual connection.
/// The shortcut is a 1x1 projection when the channel count changes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock1d {
    pub convs: [LayerParams; 3],
    pub shortcut: Option<LayerParams>,
}

impl ResBlock1d {
    fn new<R: rand::Rng + ?Sized>(c_in: usize, c_out: usize, rng: &mut R) -> Self {
        let convs = [
            LayerParams::conv1d(KERNEL_WIDTHS[0], c_in, c_out, 1, rng),
            LayerParams::conv1d(KERNEL_WIDTHS[1], c_out, c_out, 1, rng),
            LayerParams::conv1d(KERNEL_WIDTHS[2], c_out, c_out, 1, rng),
        ];
        let shortcut = (c_in != c_out).then(|| LayerParams::conv1d(1, c_in, c_out, 1, rng));
        Self { convs, shortcut }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rn1dEncoder {
    pub blocks: Vec<ResBlock1d>,
    pub projection: LayerParams,
}

impl Rn1dEncoder {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c_in = 1;
        let mut blocks = Vec::with_capacity(BLOCK_CHANNELS.len());
        for &c in &BLOCK_CHANNELS {
            blocks.push(ResBlock1d::new(c_in, c, &mut rng));
            c_in = c;
        }
        let projection = LayerParams::linear(c_in, EMBEDDING_DIM, &mut rng);
        Self { blocks, projection }
    }

    /// Records the embedding of `x` on the tape.
    pub fn embed_on(&self, tape: &mut Tape, bound: &[BoundLayer], x: &[f64]) -> Result<Var> {
        if x.len() < MIN_LENGTH {
            return Err(Error::Invalid(format!(
                "rn1d needs series of length >= {MIN_LENGTH}, got {}",
                x.len()
            )));
        }
        let mut h = tape.constant(Tensor::new(vec![x.len(), 1], x.to_vec())?);
        let mut idx = 0;
        for (bi, block) in self.blocks.iter().enumerate() {
            let input = h;
            for k in 0..3 {
                h = bound[idx].forward(tape, h)?;
                idx += 1;
                if k < 2 {
                    h = tape.relu(h);
                }
            }
            let shortcut = if block.shortcut.is_some() {
                idx += 1;
                bound[idx - 1].forward(tape, input)?
            } else {
                input
            };
            let merged = tape.add(h, shortcut)?;
            h = tape.relu(merged);
            check_layer_output(tape, h, bi, "residual block")?;
        }
        let pooled = tape.global_avg_pool(h)?;
        let e = bound[idx].forward(tape, pooled)?;
        check_layer_output(tape, e, self.blocks.len(), "projection")?;
        Ok(e)
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let e = self.embed_on(&mut tape, &bound, x)?;
        Ok(tape.value(e).data().to_vec())
    }

    /// `-||embed(a) - embed(b)||`.
    pub fn score(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(-embedding_distance(&self.embed(a)?, &self.embed(b)?))
    }

    fn distance_on(&self, tape: &mut Tape, ea: Var, eb: Var) -> Result<Var> {
        let diff = tape.sub(ea, eb)?;
        let dist = tape.l2_norm(diff);
        Ok(tape.scale(dist, -1.0))
    }
}

pub fn embedding_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl Parameterized for Rn1dEncoder {
    fn layers(&self) -> Vec<(String, &LayerParams)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            for (k, c) in b.convs.iter().enumerate() {
                out.push((format!("block{i}.conv{k}"), c));
            }
            if let Some(s) = &b.shortcut {
                out.push((format!("block{i}.shortcut"), s));
            }
        }
        out.push(("projection".to_string(), &self.projection));
        out
    }

    fn layers_mut(&mut self) -> Vec<&mut LayerParams> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.extend(b.convs.iter_mut());
            if let Some(s) = &mut b.shortcut {
                out.push(s);
            }
        }
        out.push(&mut self.projection);
        out
    }
}

impl PairModel for Rn1dEncoder {
    fn kind(&self) -> &'static str {
        "rn1d"
    }

    fn triplet_scores(
        &self,
        tape: &mut Tape,
        bound: &[BoundLayer],
        anchor: &[f64],
        positive: &[f64],
        negative: &[f64],
    ) -> Result<(Var, Var)> {
        let ea = self.embed_on(tape, bound, anchor)?;
        let ep = self.embed_on(tape, bound, positive)?;
        let en = self.embed_on(tape, bound, negative)?;
        let pos = self.distance_on(tape, ea, ep)?;
        let neg = self.distance_on(tape, ea, en)?;
        Ok((pos, neg))
    }

    fn scorer(&self) -> Box<dyn Scorer + '_> {
        Box::new(Rn1dScorer { encoder: self })
    }
}

pub struct Rn1dScorer<'a> {
    pub encoder: &'a Rn1dEncoder,
}

impl Scorer for Rn1dScorer<'_> {
    fn name(&self) -> &str {
        "rn1d"
    }

    fn score(&self, query: &[f64], candidate: &[f64]) -> Result<f64> {
        check_finite(self.encoder.score(query, candidate)?, "rn1d")
    }

    /// Embeds the database once; each query then costs one embedding.
    fn prepare<'a>(&'a self, database: &[&'a [f64]]) -> Result<Box<dyn PreparedScorer + 'a>> {
        let embeddings = database
            .iter()
            .map(|x| self.encoder.embed(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(PreparedRn1d {
            encoder: self.encoder,
            embeddings,
        }))
    }
}

struct PreparedRn1d<'a> {
    encoder: &'a Rn1dEncoder,
    embeddings: Vec<Vec<f64>>,
}

impl PreparedScorer for PreparedRn1d<'_> {
    fn score_query(&self, query: &[f64]) -> Result<Vec<f64>> {
        let q = self.encoder.embed(query)?;
        self.embeddings
            .iter()
            .map(|e| check_finite(-embedding_distance(&q, e), "rn1d"))
            .collect()
    }
}
