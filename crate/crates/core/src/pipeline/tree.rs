//! Depth-limited CART classifier with Gini impurity.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
}

fn majority(y: &[usize], rows: &[usize], k: usize) -> usize {
    let mut counts = vec![0usize; k];
    for &r in rows {
        counts[y[r]] += 1;
    }
    // Lowest class index wins ties.
    (0..k).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap_or(0)
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    k: usize,
    max_depth: usize,
    min_leaf: usize,
}

impl Builder<'_> {
    fn build(&self, rows: Vec<usize>, depth: usize) -> Node {
        let leaf = Node::Leaf { class: majority(self.y, &rows, self.k) };
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return leaf;
        }
        let mut parent = vec![0usize; self.k];
        for &r in &rows {
            parent[self.y[r]] += 1;
        }
        if parent.iter().filter(|&&c| c > 0).count() < 2 {
            return leaf;
        }
        let n = rows.len();
        let parent_impurity = gini(&parent, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = rows.clone();
        for f in 0..self.x.cols() {
            sorted.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)).then(a.cmp(&b)));
            let mut left = vec![0usize; self.k];
            for i in 0..n - 1 {
                left[self.y[sorted[i]]] += 1;
                let (lo, hi) = (self.x.get(sorted[i], f), self.x.get(sorted[i + 1], f));
                let n_left = i + 1;
                if lo == hi || n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
                let weighted = (n_left as f64 * gini(&left, n_left) + (n - n_left) as f64 * gini(&right, n - n_left)) / n as f64;
                let gain = parent_impurity - weighted;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        let Some((_, feature, threshold)) = best else { return leaf };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| self.x.get(r, feature) <= threshold);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.build(l, depth + 1)),
            right: Box::new(self.build(r, depth + 1)),
        }
    }
}

impl DecisionTree {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, max_depth: usize, min_samples_leaf: usize) -> Self {
        let b = Builder { x, y, k: n_classes, max_depth, min_leaf: min_samples_leaf.max(1) };
        DecisionTree { root: b.build((0..x.rows()).collect(), 0) }
    }

    pub fn predict_row(&self, x: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { class } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.rows()).map(|r| self.predict_row(x.row(r))).collect()
    }
}
