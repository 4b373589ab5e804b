use crate::data::{LabeledInstance, VIOLATION};

/// A binary split: instances with `x[feature] < threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Information gain in bits.
    pub gain: f64,
}

/// Gains at or below this are treated as zero; it only absorbs rounding in
/// the entropy sums.
const MIN_GAIN: f64 = 1e-12;

pub(crate) fn entropy(pos: usize, n: usize) -> f64 {
    if n == 0 || pos == 0 || pos == n {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// Threshold between two consecutive distinct values such that `lo` goes
/// left and `hi` goes right.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// Best entropy-gain split over midpoints between consecutive distinct
/// values of each candidate feature. Earlier features and lower thresholds
/// win ties. `None` when no split has positive gain.
pub fn select_split(instances: &[LabeledInstance], features: &[usize]) -> Option<Split> {
    let rows: Vec<&[f64]> = instances.iter().map(|i| &i.x[..]).collect();
    let y: Vec<u8> = instances.iter().map(|i| i.y).collect();
    select_split_rows(&rows, &y, features)
}

pub(crate) fn select_split_rows(rows: &[&[f64]], y: &[u8], features: &[usize]) -> Option<Split> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let total_pos = y.iter().filter(|&&v| v == VIOLATION).count();
    let parent = entropy(total_pos, n);
    if parent == 0.0 {
        return None;
    }
    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = (0..n).collect();
    for &j in features {
        order.sort_by(|&a, &b| rows[a][j].total_cmp(&rows[b][j]));
        let mut left_pos = 0;
        for k in 1..n {
            if y[order[k - 1]] == VIOLATION {
                left_pos += 1;
            }
            let lo = rows[order[k - 1]][j];
            let hi = rows[order[k]][j];
            if lo == hi {
                continue;
            }
            let right_pos = total_pos - left_pos;
            let children = (k as f64 * entropy(left_pos, k) + (n - k) as f64 * entropy(right_pos, n - k)) / n as f64;
            let gain = parent - children;
            if gain > MIN_GAIN && best.is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    feature: j,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
    }
    best
}
