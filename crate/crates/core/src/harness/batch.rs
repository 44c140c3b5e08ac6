use crate::data::{BlmEpisode, Category, EmbeddingStore, CANDIDATES, CONTEXT_LEN};
use crate::error::{Error, Result};
use crate::model::EMBED_DIM;
use crate::tensor::Tensor;

/// Dense tensors for a run of episodes.
pub struct EpisodeBatch {
    /// `[B, 7, 768]`.
    pub context: Tensor<f32>,
    /// `[B, 768]`.
    pub correct: Tensor<f32>,
    /// `[B * 5, 768]`, episode-major.
    pub wrong: Tensor<f32>,
}

impl EpisodeBatch {
    pub fn len(&self) -> usize {
        self.context.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn vector<'a>(store: &'a EmbeddingStore, id: &str) -> Result<&'a [f32]> {
    store.get(id).ok_or_else(|| Error::Integrity { missing: vec![id.to_string()] })
}

fn check_shape(ep: &BlmEpisode) -> Result<()> {
    if ep.candidates.len() != CANDIDATES || ep.context.len() != CONTEXT_LEN {
        return Err(Error::Data(format!(
            "episode has {} context sentences and {} candidates; expected {CONTEXT_LEN} and {CANDIDATES}",
            ep.context.len(),
            ep.candidates.len()
        )));
    }
    Ok(())
}

/// Context stack `[B, 7, 768]` of the given episodes.
pub fn context_tensor(episodes: &[&BlmEpisode], store: &EmbeddingStore) -> Result<Tensor<f32>> {
    let mut data = Vec::with_capacity(episodes.len() * CONTEXT_LEN * EMBED_DIM);
    for ep in episodes {
        check_shape(ep)?;
        for id in &ep.context {
            data.extend_from_slice(vector(store, id)?);
        }
    }
    Tensor::new(vec![episodes.len(), CONTEXT_LEN, EMBED_DIM], data)
}

pub fn assemble(episodes: &[&BlmEpisode], store: &EmbeddingStore) -> Result<EpisodeBatch> {
    let context = context_tensor(episodes, store)?;
    let b = episodes.len();
    let mut correct = Vec::with_capacity(b * EMBED_DIM);
    let mut wrong = Vec::with_capacity(b * (CANDIDATES - 1) * EMBED_DIM);
    for ep in episodes {
        for c in &ep.candidates {
            let v = vector(store, &c.id)?;
            if c.category == Category::Correct {
                correct.extend_from_slice(v);
            } else {
                wrong.extend_from_slice(v);
            }
        }
    }
    if correct.len() != b * EMBED_DIM {
        return Err(Error::Data("every episode needs exactly one correct candidate".into()));
    }
    Ok(EpisodeBatch {
        context,
        correct: Tensor::new(vec![b, EMBED_DIM], correct)?,
        wrong: Tensor::new(vec![b * (CANDIDATES - 1), EMBED_DIM], wrong)?,
    })
}

/// Candidate vectors of one episode in listed order.
pub fn candidate_vectors<'a>(ep: &BlmEpisode, store: &'a EmbeddingStore) -> Result<Vec<&'a [f32]>> {
    check_shape(ep)?;
    ep.candidates.iter().map(|c| vector(store, &c.id)).collect()
}
