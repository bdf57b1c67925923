use rand::Rng;

use crate::error::{Error, Result};

/// Draws `n_images - 1` distinct pool indices other than `base_index`,
/// uniformly without replacement, in draw order.
pub fn select_sources<R: Rng + ?Sized>(
    pool_len: usize,
    base_index: usize,
    n_images: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n_images == 0 {
        return Err(Error::Domain("group size must be at least 1".into()));
    }
    if base_index >= pool_len {
        return Err(Error::Domain(format!(
            "base index {base_index} outside pool of {pool_len}"
        )));
    }
    if pool_len < n_images {
        return Err(Error::PoolTooSmall {
            pool: pool_len,
            requested: n_images,
        });
    }
    let picks = rand::seq::index::sample(rng, pool_len - 1, n_images - 1);
    Ok(picks
        .into_iter()
        .map(|i| if i >= base_index { i + 1 } else { i })
        .collect())
}
