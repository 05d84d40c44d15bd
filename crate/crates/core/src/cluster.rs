//! Two-cluster analysis of ratio tails in the compactified metric
//! m(t) = t/(1+t). Shared by the forge's certification and the empirical
//! classifier.

/// Result of splitting a set of m-values at the largest gap.
#[derive(Debug, Clone, Copy)]
pub struct ClusterSplit {
    /// Gap between the clusters: min(hi) - max(lo).
    pub separation: f64,
    pub lo_count: usize,
    pub hi_count: usize,
    /// Visits: maximal consecutive runs of steps inside each cluster, in
    /// time order. A sequence that decays through the gap once has one
    /// visit per side; genuine oscillation keeps re-entering both.
    pub lo_visits: usize,
    pub hi_visits: usize,
    /// Indices (into the input slice) of the boundary elements.
    pub lo_max_index: usize,
    pub hi_min_index: usize,
    /// Indices of the median elements of each cluster, by value order.
    pub lo_median_index: usize,
    pub hi_median_index: usize,
    /// max - min over all values.
    pub amplitude: f64,
}

/// Splits values into two clusters at the largest gap of the sorted order
/// and counts the time-ordered visits to each side. Returns `None` when
/// there are fewer than two distinct values.
pub fn two_cluster_split(values: &[f64]) -> Option<ClusterSplit> {
    if values.len() < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("no NaN m-values"));
    let lo_val = values[order[0]];
    let hi_val = values[*order.last().unwrap()];
    let amplitude = hi_val - lo_val;
    let mut best_gap = 0.0;
    let mut best_at = None;
    for w in 0..order.len() - 1 {
        let gap = values[order[w + 1]] - values[order[w]];
        if gap > best_gap {
            best_gap = gap;
            best_at = Some(w);
        }
    }
    let split = best_at?;
    let lo = &order[..=split];
    let hi = &order[split + 1..];
    let boundary = values[order[split]];
    let mut lo_visits = 0usize;
    let mut hi_visits = 0usize;
    let mut in_lo: Option<bool> = None;
    for &v in values {
        let is_lo = v <= boundary;
        if in_lo != Some(is_lo) {
            if is_lo {
                lo_visits += 1;
            } else {
                hi_visits += 1;
            }
            in_lo = Some(is_lo);
        }
    }
    Some(ClusterSplit {
        separation: best_gap,
        lo_count: lo.len(),
        hi_count: hi.len(),
        lo_visits,
        hi_visits,
        lo_max_index: order[split],
        hi_min_index: order[split + 1],
        lo_median_index: lo[lo.len() / 2],
        hi_median_index: hi[hi.len() / 2],
        amplitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_period_two_tail() {
        let values = [0.5, 2.0 / 3.0, 0.5, 2.0 / 3.0, 0.5, 2.0 / 3.0];
        let split = two_cluster_split(&values).unwrap();
        assert!((split.separation - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(split.lo_count, 3);
        assert_eq!(split.hi_count, 3);
        assert_eq!(split.lo_visits, 3);
        assert_eq!(split.hi_visits, 3);
        assert_eq!(values[split.lo_median_index], 0.5);
        assert!((values[split.hi_median_index] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_decay_has_single_visits() {
        // Decays through a wide gap once: one visit per side, however many
        // samples land in each cluster.
        let mut values: Vec<f64> = (0..20).map(|i| 0.9 - 0.001 * i as f64).collect();
        values.extend((0..20).map(|i| 0.1 - 0.001 * i as f64));
        let split = two_cluster_split(&values).unwrap();
        assert!(split.separation > 0.7);
        assert_eq!(split.lo_visits, 1);
        assert_eq!(split.hi_visits, 1);
    }

    #[test]
    fn constant_values_do_not_split() {
        let values = [0.25; 8];
        assert!(two_cluster_split(&values).is_none());
        assert!(two_cluster_split(&[0.1]).is_none());
    }

    #[test]
    fn drifting_values_have_small_separation() {
        let values: Vec<f64> = (0..100).map(|i| i as f64 / 1000.0).collect();
        let split = two_cluster_split(&values).unwrap();
        assert!(split.separation <= 0.0011);
        assert!((split.amplitude - 0.099).abs() < 1e-12);
    }
}
