use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeds;

/// Number of training items for a class of `n` items: the nearest integer
/// to `fraction * n`, kept within `[1, n - 1]` so both sides are nonempty.
pub fn train_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Per-class seeded assignment; `true` marks a training item. Items are
/// identified by position, and each class is shuffled with a stream derived
/// from the seed and the class name, so adding a class never disturbs the
/// others.
pub fn stratified_assign<S: AsRef<str>>(classes: &[S], fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("train fraction must lie in (0, 1), got {fraction}")));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in classes.iter().enumerate() {
        members.entry(c.as_ref()).or_default().push(i);
    }
    let mut out = vec![false; classes.len()];
    for (class, mut idx) in members {
        if idx.len() < 2 {
            return Err(Error::DegenerateDataset(format!(
                "class '{class}' has {} model(s); a split needs at least 2",
                idx.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[seeds::label(class)]));
        idx.shuffle(&mut rng);
        for &i in &idx[..train_count(idx.len(), fraction)] {
            out[i] = true;
        }
    }
    Ok(out)
}
