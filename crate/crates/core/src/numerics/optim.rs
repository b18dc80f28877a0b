use super::matrix::Matrix;
use super::tape::{ParamGrads, ParamId};
use crate::error::{Error, Result};

/// A model whose tensors can be enumerated in a fixed order. The position of
/// a tensor in that order is its [`ParamId`].
pub trait Parameters {
    fn named_tensors(&self) -> Vec<(String, &Matrix)>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;

    fn tensor_shapes(&self) -> Vec<(usize, usize)> {
        self.named_tensors()
            .iter()
            .map(|(_, m)| m.shape())
            .collect()
    }

    fn num_scalars(&self) -> usize {
        self.named_tensors().iter().map(|(_, m)| m.len()).sum()
    }
}

/// `p <- p - lr * g` for every tensor that has a gradient.
pub fn sgd_step<P: Parameters + ?Sized>(params: &mut P, grads: &ParamGrads, lr: f64) -> Result<()> {
    let mut tensors = params.tensors_mut();
    if tensors.len() != grads.len() {
        return Err(Error::InvalidShape(format!(
            "{} gradient slots for {} parameter tensors",
            grads.len(),
            tensors.len()
        )));
    }
    for (i, p) in tensors.iter().enumerate() {
        if let Some(g) = grads.get(ParamId(i)) {
            p.check_same_shape(g, "sgd_step")?;
        }
    }
    for (i, p) in tensors.iter_mut().enumerate() {
        if let Some(g) = grads.get(ParamId(i)) {
            for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                *pv -= lr * gv;
            }
        }
    }
    Ok(())
}
