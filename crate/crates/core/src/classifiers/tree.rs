use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Minimum impurity decrease, weighted by the node's share of the rows.
    pub min_impurity_decrease: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 8, min_leaf: 5, min_impurity_decrease: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf { score: f64, n: usize },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn leaf_score(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { score, .. } => return score,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Gini impurity decrease for this node (unweighted).
    pub decrease: f64,
}

pub fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Best Gini split of the given rows. Thresholds are midpoints between
/// consecutive distinct values; ties keep the lowest feature, then the
/// lowest threshold.
pub fn best_split(data: &Dataset, rows: &[usize], min_leaf: usize) -> Option<Split> {
    let n = rows.len();
    let pos_total = rows.iter().filter(|&&i| data.y[i]).count();
    let parent = gini(pos_total, n);
    let mut best: Option<Split> = None;
    let mut order = rows.to_vec();
    for f in 0..data.arity() {
        order.sort_by(|&a, &b| data.x[a][f].total_cmp(&data.x[b][f]));
        let mut pos_left = 0;
        for k in 0..n.saturating_sub(1) {
            pos_left += data.y[order[k]] as usize;
            let (lo, hi) = (data.x[order[k]][f], data.x[order[k + 1]][f]);
            let n_left = k + 1;
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let child = (n_left as f64 * gini(pos_left, n_left)
                + (n - n_left) as f64 * gini(pos_total - pos_left, n - n_left))
                / n as f64;
            let decrease = parent - child;
            if best.map_or(true, |b| decrease > b.decrease) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Split { feature: f, threshold, decrease });
            }
        }
    }
    best
}

pub fn train_tree(data: &Dataset, config: &TreeConfig) -> Result<TreeModel> {
    let mut model = TreeModel { nodes: Vec::new() };
    let rows: Vec<usize> = (0..data.len()).collect();
    grow(data, config, &rows, 0, &mut model.nodes);
    Ok(model)
}

fn grow(data: &Dataset, config: &TreeConfig, rows: &[usize], depth: usize, nodes: &mut Vec<TreeNode>) -> usize {
    let id = nodes.len();
    let pos = rows.iter().filter(|&&i| data.y[i]).count();
    nodes.push(TreeNode::Leaf { score: pos as f64 / rows.len().max(1) as f64, n: rows.len() });
    if depth >= config.max_depth || pos == 0 || pos == rows.len() || rows.len() < 2 * config.min_leaf {
        return id;
    }
    let Some(split) = best_split(data, rows, config.min_leaf.max(1)) else {
        return id;
    };
    let weight = rows.len() as f64 / data.len() as f64;
    if weight * split.decrease < config.min_impurity_decrease {
        return id;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| data.x[i][split.feature] <= split.threshold);
    let left = grow(data, config, &l, depth + 1, nodes);
    let right = grow(data, config, &r, depth + 1, nodes);
    nodes[id] = TreeNode::Split { feature: split.feature, threshold: split.threshold, left, right };
    id
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::blobs;
    use super::*;

    #[test]
    fn separable_line_gives_stump() {
        let x: Vec<Vec<f64>> = (-6..=6).filter(|&i| i != 0).map(|i| vec![i as f64]).collect();
        let y = x.iter().map(|r| r[0] > 0.0).collect();
        let d = Dataset::new(x, y).unwrap();
        let m = train_tree(&d, &TreeConfig::default()).unwrap();
        assert_eq!(m.depth(), 1);
        let TreeNode::Split { threshold, .. } = m.nodes[0] else { panic!() };
        assert!(threshold > -1.0 && threshold < 1.0);
        assert_eq!(super::super::training_error(&wrap(m, 1), &d).unwrap(), 0.0);
    }

    fn wrap(m: TreeModel, arity: usize) -> super::super::TrainedModel {
        super::super::TrainedModel { arity, threshold: 0.5, params: super::super::ModelParams::Tree(m) }
    }

    #[test]
    fn pure_data_is_one_leaf() {
        let d = Dataset::new((0..20).map(|i| vec![i as f64]).collect(), vec![true; 20]).unwrap();
        let m = train_tree(&d, &TreeConfig::default()).unwrap();
        assert_eq!(m.nodes.len(), 1);
    }

    /// Exhaustive oracle: every (feature, midpoint) pair scored directly.
    #[test]
    fn root_split_matches_exhaustive_search() {
        for seed in 0..5 {
            let d = blobs(30, 2, 1.0, 100 + seed);
            let m = train_tree(&d, &TreeConfig { min_leaf: 1, ..Default::default() }).unwrap();
            let count = |pred: &dyn Fn(&Vec<f64>) -> bool| {
                let rows: Vec<bool> = d.x.iter().zip(&d.y).filter(|(x, _)| pred(x)).map(|(_, &y)| y).collect();
                let pos = rows.iter().filter(|&&y| y).count() as f64;
                let n = rows.len() as f64;
                (n, if n == 0.0 { 0.0 } else { 1.0 - (pos / n).powi(2) - (1.0 - pos / n).powi(2) })
            };
            let mut best = (f64::INFINITY, 0, 0.0);
            for f in 0..2 {
                let mut vals: Vec<f64> = d.x.iter().map(|r| r[f]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                for w in vals.windows(2) {
                    let t = (w[0] + w[1]) / 2.0;
                    let (nl, gl) = count(&|x| x[f] <= t);
                    let (nr, gr) = count(&|x| x[f] > t);
                    let impurity = (nl * gl + nr * gr) / 30.0;
                    if impurity < best.0 - 1e-12 {
                        best = (impurity, f, t);
                    }
                }
            }
            let TreeNode::Split { feature, threshold, .. } = m.nodes[0] else { panic!("no root split") };
            assert_eq!(feature, best.1);
            assert!((threshold - best.2).abs() < 1e-12);
        }
    }

    #[test]
    fn respects_depth_and_leaf_limits() {
        let d = blobs(400, 3, 0.5, 8);
        let cfg = TreeConfig { max_depth: 3, min_leaf: 7, ..Default::default() };
        let m = train_tree(&d, &cfg).unwrap();
        assert!(m.depth() <= 3);
        for node in &m.nodes {
            if let TreeNode::Leaf { n, .. } = node {
                assert!(*n >= 7);
            }
        }
    }
}
