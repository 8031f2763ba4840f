use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sagaze_core::SaLabel;

use crate::HarnessError;

/// Indices of a class-balanced resample of `(participant, label)` items.
///
/// Whole minority-class window sets of randomly chosen participants are
/// duplicated while they fit the remaining deficit; the rest is filled
/// with distinct windows of one more random minority participant. The
/// output lists every original index first, then the duplicates.
pub fn oversample_indices(participants: &[&str], labels: &[SaLabel], seed: u64) -> Result<Vec<usize>, HarnessError> {
    assert_eq!(participants.len(), labels.len(), "one label per item");
    let poor = labels.iter().filter(|&&l| l == SaLabel::Poor).count();
    let good = labels.len() - poor;
    if poor == 0 || good == 0 {
        return Err(HarnessError::SingleClassFold);
    }
    let mut out: Vec<usize> = (0..labels.len()).collect();
    if poor == good {
        return Ok(out);
    }
    let minority = if poor < good { SaLabel::Poor } else { SaLabel::Good };
    let mut deficit = good.abs_diff(poor);

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, (&p, &l)) in participants.iter().zip(labels).enumerate() {
        if l == minority {
            groups.entry(p).or_default().push(i);
        }
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while deficit > 0 {
        let g = &groups[rng.random_range(0..groups.len())];
        if g.len() <= deficit {
            out.extend_from_slice(g);
            deficit -= g.len();
        } else {
            let mut pick = g.clone();
            pick.shuffle(&mut rng);
            pick.truncate(deficit);
            pick.sort_unstable();
            out.extend(pick);
            deficit = 0;
        }
    }
    Ok(out)
}

/// Balance the classes of `items` by duplication (see [`oversample_indices`]).
pub fn oversample<T: Clone>(
    items: &[T],
    participant: impl Fn(&T) -> &str,
    label: impl Fn(&T) -> SaLabel,
    seed: u64,
) -> Result<Vec<T>, HarnessError> {
    let pids: Vec<&str> = items.iter().map(&participant).collect();
    let labels: Vec<SaLabel> = items.iter().map(&label).collect();
    Ok(oversample_indices(&pids, &labels, seed)?.into_iter().map(|i| items[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cohort(good_users: usize, poor_users: usize, per: usize) -> (Vec<String>, Vec<SaLabel>) {
        let mut p = Vec::new();
        let mut l = Vec::new();
        for u in 0..good_users + poor_users {
            for _ in 0..per {
                p.push(format!("P{u:02}"));
                l.push(if u < good_users { SaLabel::Good } else { SaLabel::Poor });
            }
        }
        (p, l)
    }

    #[test]
    fn unbalanced_becomes_equal() {
        // 360 windows: 210 good, 150 poor
        let (p, l) = cohort(7, 5, 30);
        let refs: Vec<&str> = p.iter().map(String::as_str).collect();
        let idx = oversample_indices(&refs, &l, 4).unwrap();
        let poor = idx.iter().filter(|&&i| l[i] == SaLabel::Poor).count();
        assert_eq!(poor, idx.len() - poor);
        assert_eq!(poor, 210);
        assert_eq!(&idx[..360], &(0..360).collect::<Vec<_>>()[..]);
        assert_eq!(idx, oversample_indices(&refs, &l, 4).unwrap());
    }

    #[test]
    fn top_up_uses_distinct_windows() {
        // 10 good windows against one poor participant with 4: duplicate the
        // set once, then top up with 2 distinct windows
        let mut p = vec!["G"; 10];
        let mut l = vec![SaLabel::Good; 10];
        p.extend(["B"; 4]);
        l.extend([SaLabel::Poor; 4]);
        let idx = oversample_indices(&p, &l, 1).unwrap();
        assert_eq!(idx.len(), 20);
        let mut extra: Vec<usize> = idx[14..].to_vec();
        assert_eq!(&extra[..4], &[10, 11, 12, 13]);
        extra.drain(..4);
        extra.dedup();
        assert_eq!(extra.len(), 2);
        assert!(extra.iter().all(|&i| l[i] == SaLabel::Poor));
    }

    #[test]
    fn balanced_is_unchanged_and_single_class_fails() {
        let (p, l) = cohort(2, 2, 3);
        let refs: Vec<&str> = p.iter().map(String::as_str).collect();
        assert_eq!(oversample_indices(&refs, &l, 0).unwrap(), (0..12).collect::<Vec<_>>());
        let (p, l) = cohort(3, 0, 3);
        let refs: Vec<&str> = p.iter().map(String::as_str).collect();
        assert!(matches!(oversample_indices(&refs, &l, 0), Err(HarnessError::SingleClassFold)));
    }
}
