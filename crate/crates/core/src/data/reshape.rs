use crate::error::{Error, Result};
use crate::model::{Reshape, EMBED_DIM};
use crate::tensor::Tensor;

/// Row-major `rows × cols` view of one embedding: `out[i][j] = v[i * cols + j]`.
pub fn reshape_embedding(v: &[f32], shape: Reshape) -> Result<Tensor<f32>> {
    if shape.rows * shape.cols != v.len() || v.len() != EMBED_DIM {
        return Err(Error::Config(format!("cannot view a length-{} embedding as {shape}", v.len())));
    }
    Tensor::new(vec![shape.rows, shape.cols], v.to_vec())
}

/// Inverse of [`reshape_embedding`].
pub fn flatten_embedding(m: &Tensor<f32>) -> Vec<f32> {
    m.data().to_vec()
}
