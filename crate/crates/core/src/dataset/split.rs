//! Train/val/test assignment that covers the dynamic range.
//!
//! Records are ordered by transient loudness and the held-out splits are
//! placed at even strides across that order: validation takes positions
//! including both extremes, test takes the stride midpoints. The result is
//! deterministic given the record order.

use super::Split;

/// Assign splits by loudness-ordered strides.
///
/// `pinned_train`, when given, forces that record into the train split by
/// swapping it with the nearest train record in the sorted order (the
/// reference hit must stay trainable). Returns `Err(n)` when there are too
/// few records.
pub fn assign_splits(
    lkfs_t: &[f64],
    val_frac: f64,
    test_frac: f64,
    pinned_train: Option<usize>,
) -> Result<Vec<Split>, usize> {
    let n = lkfs_t.len();
    if n < 10 {
        return Err(n);
    }
    let n_val = ((n as f64 * val_frac).round() as usize).max(1);
    let n_test = ((n as f64 * test_frac).round() as usize).max(1);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lkfs_t[a].partial_cmp(&lkfs_t[b]).unwrap().then(a.cmp(&b)));

    // Sorted positions for each held-out split.
    let mut assigned = vec![Split::Train; n];
    let mut taken = vec![false; n];
    let mut place = |sorted_pos: usize, split: Split, taken: &mut Vec<bool>| {
        // Advance to the next free position on collision.
        let mut p = sorted_pos;
        while taken[p % n] {
            p += 1;
        }
        taken[p % n] = true;
        assigned[order[p % n]] = split;
    };

    if n_val == 1 {
        place(n / 2, Split::Val, &mut taken);
    } else {
        for i in 0..n_val {
            let pos = (i as f64 * (n - 1) as f64 / (n_val - 1) as f64).round() as usize;
            place(pos, Split::Val, &mut taken);
        }
    }
    for i in 0..n_test {
        let pos = ((2 * i + 1) as f64 * (n - 1) as f64 / (2 * n_test) as f64).round() as usize;
        place(pos, Split::Test, &mut taken);
    }

    if let Some(pinned) = pinned_train {
        if assigned[pinned] != Split::Train {
            let sorted_pos = order.iter().position(|&i| i == pinned).unwrap();
            // Nearest train record in sorted order.
            let swap_with = (0..n)
                .filter(|&p| assigned[order[p]] == Split::Train)
                .min_by_key(|&p| p.abs_diff(sorted_pos))
                .expect("train split is never empty");
            assigned[order[swap_with]] = assigned[pinned];
            assigned[pinned] = Split::Train;
        }
    }

    Ok(assigned)
}
