//! Order statistics shared by metric extraction and session aggregation.

use std::cmp::Ordering;

/// Median of `values`; an even count takes the mean of the two middle values.
///
/// Returns `None` for an empty slice. The slice is reordered in place.
pub fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Some(upper)
    } else {
        let lower_max = lower
            .iter()
            .copied()
            .max_by(f64::total_cmp)
            .expect("even-length slice has a lower half");
        Some((lower_max + upper) / 2.0)
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut owned = values.to_vec();
    median_in_place(&mut owned)
}

/// 1-based nearest rank for percentile `p` (in percent) over `n` values: `ceil(p·n/100)`, at least 1.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    let rank = (p * n as f64 / 100.0).ceil();
    (rank as usize).clamp(1, n.max(1))
}

/// Nearest-rank percentile of `values`, `p` in percent (0, 100].
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut owned = values.to_vec();
    let k = nearest_rank(p, owned.len()) - 1;
    let (_, v, _) = owned.select_nth_unstable_by(k, f64::total_cmp);
    Some(*v)
}

/// Total order on scores that sorts larger values first.
pub(crate) fn descending(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}
