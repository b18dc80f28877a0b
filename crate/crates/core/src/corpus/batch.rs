use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Shuffled index batches over `n` items. The last batch may be short.
pub fn batch_indices(n: usize, batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument(
            "batch size must be at least 1".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Seeded, shuffled batches of references into `items`.
pub fn batch_iter<T>(
    items: &[T],
    batch_size: usize,
    seed: u64,
) -> Result<impl Iterator<Item = Vec<&T>>> {
    let batches = batch_indices(items.len(), batch_size, seed)?;
    Ok(batches
        .into_iter()
        .map(move |b| b.into_iter().map(|i| &items[i]).collect()))
}
