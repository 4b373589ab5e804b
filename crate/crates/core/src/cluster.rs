//! Lloyd's k-means with k-means++ seeding, and the two-group split used to
//! pick the most relevant feature contributions.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("no points to cluster")]
    EmptyInput,
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("k = {k} but there are {distinct} distinct points")]
    BadK { k: usize, distinct: usize },
    #[error("need at least 2 values to split, got {0}")]
    TooFewValues(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iter: usize,
    pub n_init: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_iter: 100,
            n_init: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster id of each input point.
    pub assignment: Vec<usize>,
    /// Sum of squared distances from each point to its centroid.
    pub sse: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lower id.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(p, &centroids[0]);
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(p, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn sse_of(points: &[Vec<f64>], centroids: &[Vec<f64>], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

fn check_points(points: &[Vec<f64>], k: usize) -> Result<(), ClusterError> {
    let Some(first) = points.first() else {
        return Err(ClusterError::EmptyInput);
    };
    let dim = first.len();
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite { index });
        }
    }
    let distinct: BTreeSet<Vec<u64>> = points
        .iter()
        // +0.0 and -0.0 are the same point.
        .map(|p| p.iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    if k == 0 || k > distinct.len() {
        return Err(ClusterError::BadK {
            k,
            distinct: distinct.len(),
        });
    }
    Ok(())
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut r = rng.gen::<f64>() * total;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("k <= distinct points");
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && r < d {
                pick = i;
                break;
            }
            r -= d;
        }
        let c = points[pick].clone();
        for (di, p) in d2.iter_mut().zip(points) {
            *di = di.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn means(points: &[Vec<f64>], assignment: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let k = centroids.len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
    }
}

/// One Lloyd run from the given centroids, followed by single-point moves
/// (Hartigan's rule) until no move lowers the sse. Returns the clustering
/// and the sse after every step.
pub(crate) fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> (Clustering, Vec<f64>) {
    let k = centroids.len();
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut history = vec![sse_of(points, &centroids, &assignment)];
    let mut stable = false;
    for _ in 0..max_iter {
        means(points, &assignment, &mut centroids);
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        history.push(sse_of(points, &centroids, &next));
        if next == assignment {
            stable = true;
            break;
        }
        assignment = next;
    }
    if stable {
        let mut counts = vec![0usize; k];
        for &a in &assignment {
            counts[a] += 1;
        }
        let mut moves = 0;
        let mut moved = true;
        while moved && moves < max_iter * points.len() {
            moved = false;
            for (i, p) in points.iter().enumerate() {
                let a = assignment[i];
                if counts[a] < 2 {
                    continue;
                }
                let na = counts[a] as f64;
                let remove = na / (na - 1.0) * sq_dist(p, &centroids[a]);
                let mut best: Option<(usize, f64)> = None;
                for b in (0..k).filter(|&b| b != a) {
                    let nb = counts[b] as f64;
                    let add = nb / (nb + 1.0) * sq_dist(p, &centroids[b]);
                    if add < remove * (1.0 - 1e-12) && best.is_none_or(|(_, c)| add < c) {
                        best = Some((b, add));
                    }
                }
                if let Some((b, _)) = best {
                    assignment[i] = b;
                    counts[a] -= 1;
                    counts[b] += 1;
                    means(points, &assignment, &mut centroids);
                    history.push(sse_of(points, &centroids, &assignment));
                    moved = true;
                    moves += 1;
                }
            }
        }
    } else {
        assignment = points.iter().map(|p| nearest(p, &centroids)).collect();
    }
    let sse = sse_of(points, &centroids, &assignment);
    (
        Clustering {
            centroids,
            assignment,
            sse,
        },
        history,
    )
}

/// Best of `cfg.n_init` seeded Lloyd runs, chosen by lowest sse and then
/// lowest run index.
pub fn kmeans(points: &[Vec<f64>], cfg: &ClusterConfig) -> Result<Clustering, ClusterError> {
    check_points(points, cfg.k)?;
    let runs: Vec<Clustering> = (0..cfg.n_init.max(1))
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(run as u64);
            let init = seed_centroids(points, cfg.k, &mut rng);
            lloyd(points, init, cfg.max_iter).0
        })
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.sse.total_cmp(&b.sse).then(i.cmp(j)))
        .map(|(_, c)| c)
        .expect("at least one run");
    Ok(best)
}

/// Result of splitting scored items into a high and a low group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoGroups<T> {
    pub high: Vec<T>,
    pub low: Vec<T>,
    /// All values were equal; everything was put in `high`.
    pub degenerate: bool,
}

/// 2-means on the values; `high` is the cluster with the larger centroid.
/// Items are sorted by (value, id) first so the result does not depend on
/// input order. Both groups come back in descending value order.
pub fn split_two_groups<T: Clone + Ord>(values: &[(T, f64)], cfg: &ClusterConfig) -> Result<TwoGroups<T>, ClusterError> {
    if values.len() < 2 {
        return Err(ClusterError::TooFewValues(values.len()));
    }
    if let Some(index) = values.iter().position(|(_, v)| !v.is_finite()) {
        return Err(ClusterError::NonFinite { index });
    }
    let mut sorted: Vec<&(T, f64)> = values.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let descending = |items: Vec<&(T, f64)>| items.into_iter().rev().map(|(id, _)| id.clone()).collect::<Vec<_>>();
    if sorted.first().map(|e| e.1) == sorted.last().map(|e| e.1) {
        return Ok(TwoGroups {
            high: descending(sorted),
            low: Vec::new(),
            degenerate: true,
        });
    }
    let points: Vec<Vec<f64>> = sorted.iter().map(|(_, v)| vec![*v]).collect();
    let c = kmeans(&points, &ClusterConfig { k: 2, ..*cfg })?;
    let high_id = usize::from(c.centroids[1][0] > c.centroids[0][0]);
    let (high, low): (Vec<_>, Vec<_>) = sorted
        .into_iter()
        .zip(&c.assignment)
        .partition(|(_, &a)| a == high_id);
    Ok(TwoGroups {
        high: descending(high.into_iter().map(|(e, _)| e).collect()),
        low: descending(low.into_iter().map(|(e, _)| e).collect()),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_d(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn symmetric_gaps() {
        let pts = one_d(&[0.0, 0.1, 0.9, 1.0]);
        let c = kmeans(&pts, &ClusterConfig::default()).unwrap();
        assert_eq!(c.assignment[0], c.assignment[1]);
        assert_eq!(c.assignment[2], c.assignment[3]);
        assert_ne!(c.assignment[0], c.assignment[2]);
        assert!((c.sse - 0.01).abs() < 1e-12);
    }

    #[test]
    fn k_equal_to_distinct_points_is_exact() {
        let pts = vec![vec![0.0, 1.0], vec![3.0, -2.0], vec![0.0, 1.0], vec![5.0, 5.0]];
        let c = kmeans(&pts, &ClusterConfig { k: 3, ..Default::default() }).unwrap();
        assert_eq!(c.sse, 0.0);
        assert_eq!(c.assignment[0], c.assignment[2]);
        let mut cs = c.centroids.clone();
        cs.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        assert_eq!(cs, vec![vec![0.0, 1.0], vec![3.0, -2.0], vec![5.0, 5.0]]);
    }

    #[test]
    fn errors() {
        let cfg = ClusterConfig::default();
        assert_eq!(kmeans(&[], &cfg), Err(ClusterError::EmptyInput));
        assert!(matches!(
            kmeans(&[vec![1.0], vec![1.0, 2.0]], &cfg),
            Err(ClusterError::DimensionMismatch { index: 1, .. })
        ));
        assert_eq!(
            kmeans(&one_d(&[1.0, 1.0, 1.0]), &cfg),
            Err(ClusterError::BadK { k: 2, distinct: 1 })
        );
        assert!(matches!(kmeans(&one_d(&[1.0, f64::NAN]), &cfg), Err(ClusterError::NonFinite { index: 1 })));
        assert_eq!(
            split_two_groups(&[("a", 1.0)], &cfg),
            Err(ClusterError::TooFewValues(1))
        );
    }

    #[test]
    fn two_values() {
        let g = split_two_groups(&[("first", 5.0), ("second", 0.1)], &ClusterConfig::default()).unwrap();
        assert_eq!(g.high, vec!["first"]);
        assert_eq!(g.low, vec!["second"]);
        assert!(!g.degenerate);
    }

    #[test]
    fn all_equal_is_degenerate() {
        let g = split_two_groups(&[("a", 0.3), ("b", 0.3), ("c", 0.3)], &ClusterConfig::default()).unwrap();
        assert!(g.degenerate);
        assert_eq!(g.high.len(), 3);
        assert!(g.low.is_empty());
    }

    #[test]
    fn table_values_split_into_three_and_four() {
        let vals = [
            ("WT_NO_DELAY", 1.08254896),
            ("HIST_REP_COUNTRY", 0.899847),
            ("LANG_ALL_ALPHA", 0.7261543),
            ("HASH_REC_DIVERSITY", 0.15714292),
            ("WT_DELAYED", 0.12748878),
            ("LANG_ALL_CHAR_REP", 0.12),
            ("HIST_REP_ARTICLE", 0.093548),
        ];
        let g = split_two_groups(&vals, &ClusterConfig::default()).unwrap();
        assert_eq!(g.high, vec!["WT_NO_DELAY", "HIST_REP_COUNTRY", "LANG_ALL_ALPHA"]);
        assert_eq!(g.low.len(), 4);
    }

    proptest! {
        #[test]
        fn lloyd_descends_and_assigns_to_nearest(
            pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 3..30),
            k in 1usize..4,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = seed_centroids(&pts, k.min(pts.len()), &mut rng);
            let (c, history) = lloyd(&pts, init, 100);
            for w in history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
            }
            for (p, &a) in pts.iter().zip(&c.assignment) {
                let da = sq_dist(p, &c.centroids[a]);
                prop_assert!(c.centroids.iter().all(|cc| sq_dist(p, cc) >= da));
            }
            prop_assert!((c.sse - sse_of(&pts, &c.centroids, &c.assignment)).abs() == 0.0);
        }

        #[test]
        fn split_is_a_contiguous_partition_independent_of_order(
            vals in prop::collection::vec(0.0f64..5.0, 2..15),
            rot in 0usize..15,
        ) {
            let items: Vec<(usize, f64)> = vals.iter().copied().enumerate().collect();
            let cfg = ClusterConfig::default();
            let g = split_two_groups(&items, &cfg).unwrap();
            let mut all: Vec<usize> = g.high.iter().chain(&g.low).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..vals.len()).collect::<Vec<_>>());
            if let (Some(min_high), Some(max_low)) = (
                g.high.iter().map(|&i| vals[i]).reduce(f64::min),
                g.low.iter().map(|&i| vals[i]).reduce(f64::max),
            ) {
                prop_assert!(min_high >= max_low);
            }
            let mut rotated = items.clone();
            rotated.rotate_left(rot % items.len());
            prop_assert_eq!(split_two_groups(&rotated, &cfg).unwrap(), g);
        }
    }
}
