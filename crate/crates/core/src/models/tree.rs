//! CART regression tree grown by greedy variance reduction.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{FeatureRow, WINDOW_LEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Features considered at each node; values `>= 6` use all of them.
    pub max_features: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_features: WINDOW_LEN,
            min_samples_leaf: 1,
        }
    }
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

pub fn predict_tree(tree: &TreeNode, x: &[f64]) -> f64 {
    tree.predict(x)
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
    n_left: usize,
}

struct Grower<'a, R: ?Sized> {
    x: &'a [FeatureRow],
    y: &'a [f64],
    cfg: TreeConfig,
    rng: &'a mut R,
}

/// Grows a regression tree on `(x, y)`.
///
/// Splits minimise the summed squared deviation of the two children, over
/// midpoints between consecutive distinct feature values. Growth stops when
/// a node is pure, holds fewer than `2 * min_samples_leaf` rows, or no split
/// reduces the deviation. Equal-gain candidates resolve to the lowest
/// feature index and then the smallest threshold.
pub fn train_tree<R: Rng + ?Sized>(
    x: &[FeatureRow],
    y: &[f64],
    cfg: &TreeConfig,
    rng: &mut R,
) -> Result<TreeNode> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if cfg.max_features == 0 || cfg.min_samples_leaf == 0 {
        return Err(Error::Config(
            "max_features and min_samples_leaf must be positive".into(),
        ));
    }
    let mut grower = Grower {
        x,
        y,
        cfg: *cfg,
        rng,
    };
    let idx: Vec<usize> = (0..x.len()).collect();
    Ok(grower.grow(idx))
}

impl<R: Rng + ?Sized> Grower<'_, R> {
    fn grow(&mut self, idx: Vec<usize>) -> TreeNode {
        let first = self.y[idx[0]];
        if idx.iter().all(|&i| self.y[i] == first) {
            return TreeNode::Leaf { value: first };
        }
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        if idx.len() < 2 * self.cfg.min_samples_leaf {
            return TreeNode::Leaf { value: mean };
        }
        let Some(best) = self.best_split(&idx, mean) else {
            return TreeNode::Leaf { value: mean };
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x[i][best.feature] <= best.threshold);
        debug_assert_eq!(left.len(), best.n_left);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.grow(left)),
            right: Box::new(self.grow(right)),
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        if self.cfg.max_features >= WINDOW_LEN {
            return (0..WINDOW_LEN).collect();
        }
        let mut f = index::sample(self.rng, WINDOW_LEN, self.cfg.max_features).into_vec();
        f.sort_unstable();
        f
    }

    fn best_split(&mut self, idx: &[usize], mean: f64) -> Option<Best> {
        let n = idx.len();
        let min_leaf = self.cfg.min_samples_leaf;
        let mut best: Option<Best> = None;
        let mut order = idx.to_vec();
        for feature in self.candidate_features() {
            let x = self.x;
            order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
            // Centred targets keep the running sums small.
            let total: f64 = order.iter().map(|&i| self.y[i] - mean).sum();
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += self.y[order[k - 1]] - mean;
                let lo = x[order[k - 1]][feature];
                let hi = x[order[k]][feature];
                if lo == hi || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                // SSE(parent) - SSE(children) = n_l n_r / n * (mean_l - mean_r)^2
                let (nl, nr) = (k as f64, (n - k) as f64);
                let diff = left_sum / nl - (total - left_sum) / nr;
                let gain = nl * nr / n as f64 * diff * diff;
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Best {
                        gain,
                        feature,
                        threshold,
                        n_left: k,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    fn row(v: f64) -> FeatureRow {
        [v; WINDOW_LEN]
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let x: Vec<_> = (0..10).map(|i| row(i as f64)).collect();
        let y = vec![417.3; 10];
        let t = train_tree(&x, &y, &TreeConfig::default(), &mut rng()).unwrap();
        assert_eq!(t, TreeNode::Leaf { value: 417.3 });
    }

    #[test]
    fn two_rows_perfect_separation() {
        let x = vec![row(0.0), row(1.0)];
        let y = vec![10.0, 20.0];
        let t = train_tree(&x, &y, &TreeConfig::default(), &mut rng()).unwrap();
        assert_eq!(t.depth(), 1);
        // lowest feature index wins the tie between identical columns
        assert!(matches!(t, TreeNode::Split { feature: 0, threshold, .. } if threshold == 0.5));
        assert_eq!(t.predict(&x[0]), 10.0);
        assert_eq!(t.predict(&x[1]), 20.0);
    }

    #[test]
    fn duplicate_rows_get_group_means() {
        // 20 rows drawn from 5 distinct feature rows, with conflicting targets.
        let distinct = [row(1.0), row(2.0), row(3.0), [1.0, 9.0, 1.0, 1.0, 1.0, 1.0], row(5.0)];
        let x: Vec<FeatureRow> = (0..20).map(|i| distinct[(i * 7) % 5]).collect();
        let y: Vec<f64> = (0..20).map(|i| 400.0 + ((i * 13) % 11) as f64).collect();
        let t = train_tree(&x, &y, &TreeConfig::default(), &mut rng()).unwrap();

        // brute-force oracle: group by exact row bits
        let mut groups: HashMap<Vec<u64>, (f64, usize)> = HashMap::new();
        for (r, v) in x.iter().zip(&y) {
            let e = groups.entry(r.iter().map(|f| f.to_bits()).collect()).or_default();
            e.0 += v;
            e.1 += 1;
        }
        for r in &x {
            let (s, c) = groups[&r.iter().map(|f| f.to_bits()).collect::<Vec<_>>()];
            assert!((t.predict(r) - s / c as f64).abs() < 1e-9);
        }
        assert_eq!(t.n_leaves(), 5);
    }

    #[test]
    fn identical_features_conflicting_targets_is_mean_leaf() {
        let x = vec![row(1.0); 4];
        let y = vec![1.0, 2.0, 3.0, 6.0];
        let t = train_tree(&x, &y, &TreeConfig::default(), &mut rng()).unwrap();
        assert_eq!(t, TreeNode::Leaf { value: 3.0 });
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let x: Vec<_> = (0..9).map(|i| row(i as f64)).collect();
        let y: Vec<f64> = (0..9).map(|i| (i * i) as f64).collect();
        let cfg = TreeConfig {
            min_samples_leaf: 3,
            ..TreeConfig::default()
        };
        let t = train_tree(&x, &y, &cfg, &mut rng()).unwrap();
        fn leaf_sizes(t: &TreeNode, x: &[FeatureRow], out: &mut HashMap<u64, usize>) {
            for r in x {
                *out.entry(t.predict(r).to_bits()).or_default() += 1;
            }
        }
        let mut sizes = HashMap::new();
        leaf_sizes(&t, &x, &mut sizes);
        assert!(sizes.values().all(|&c| c >= 3), "{sizes:?}");
    }

    #[test]
    fn routing_rule() {
        let t = TreeNode::Split {
            feature: 0,
            threshold: 415.0,
            left: Box::new(TreeNode::Leaf { value: 410.0 }),
            right: Box::new(TreeNode::Leaf { value: 420.0 }),
        };
        assert_eq!(predict_tree(&t, &[414.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 410.0);
        assert_eq!(predict_tree(&t, &[415.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 410.0);
        assert_eq!(predict_tree(&t, &[415.5, 0.0, 0.0, 0.0, 0.0, 0.0]), 420.0);
        let leaf = TreeNode::Leaf { value: 400.0 };
        assert_eq!(predict_tree(&leaf, &row(-3.0)), 400.0);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(matches!(
            train_tree(&[], &[], &TreeConfig::default(), &mut rng()),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            train_tree(&[row(1.0)], &[1.0, 2.0], &TreeConfig::default(), &mut rng()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn adjacent_floats_still_partition() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let x = vec![row(a), row(b)];
        let t = train_tree(&x, &[0.0, 1.0], &TreeConfig::default(), &mut rng()).unwrap();
        assert_eq!(t.predict(&x[0]), 0.0);
        assert_eq!(t.predict(&x[1]), 1.0);
    }
}
