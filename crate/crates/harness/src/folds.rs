use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::HarnessError;

/// Split participants into `k` disjoint test sets whose sizes differ by at
/// most one. Duplicate ids are collapsed; the split depends only on the id
/// set and the seed.
pub fn make_folds(participants: &[String], k: usize, seed: u64) -> Result<Vec<Vec<String>>, HarnessError> {
    let mut ids: Vec<String> = participants.to_vec();
    ids.sort();
    ids.dedup();
    if k < 2 || ids.len() < k {
        return Err(HarnessError::TooFewParticipants { needed: k.max(2), got: ids.len() });
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}
