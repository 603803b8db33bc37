//! Binary regression trees.
//!
//! One grower serves both CART and gradient boosting. A node's score is
//! `G^2 / (H + l2)` where `G` sums the per-row targets and `H` the per-row
//! weights; for CART the target is `y` and the weight 1, so the gain is the
//! usual reduction in squared error. Leaf values are `G / (H + l2)`.

use serde::{Deserialize, Serialize};

use super::{clip_probability, Frame, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 5, min_leaf: 5 }
    }
}

impl TreeParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::Config("tree min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    probability: bool,
}

pub(crate) struct Growth {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub l2: f64,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index (into [`Tree::nodes`]) of the leaf a feature row falls into.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub(crate) fn raw_value(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn predict(&self, x: &Frame) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let v = self.raw_value(&x.row(i));
                if self.probability {
                    clip_probability(v)
                } else {
                    v
                }
            })
            .collect()
    }

    pub(crate) fn set_leaf_value(&mut self, leaf: usize, value: f64) {
        self.nodes[leaf] = Node::Leaf { value };
    }
}

pub(crate) fn fit_cart(params: &TreeParams, x: &Frame, y: &[f64], task: Task) -> Result<Tree> {
    let growth = Growth { max_depth: params.max_depth, min_leaf: params.min_leaf, l2: 0.0 };
    let weights = vec![1.0; y.len()];
    let mut tree = grow(x, y, &weights, &growth);
    tree.probability = task == Task::BinaryProbability;
    Ok(tree)
}

/// Grow a tree on per-row targets `g` and weights `h`.
pub(crate) fn grow(x: &Frame, g: &[f64], h: &[f64], growth: &Growth) -> Tree {
    let columns: Vec<Vec<f64>> = (0..x.ncols()).map(|j| x.column(j)).collect();
    // Per-feature row order, sorted once; children inherit the relative order.
    let orders: Vec<Vec<usize>> = columns
        .iter()
        .map(|c| {
            let mut idx: Vec<usize> = (0..g.len()).collect();
            idx.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut tree = Tree { nodes: Vec::new(), probability: false };
    let members = vec![true; g.len()];
    build(&mut tree, &columns, &orders, &members, g, h, growth, 0);
    tree
}

#[allow(clippy::too_many_arguments)]
fn build(
    tree: &mut Tree,
    columns: &[Vec<f64>],
    orders: &[Vec<usize>],
    members: &[bool],
    g: &[f64],
    h: &[f64],
    growth: &Growth,
    depth: usize,
) -> usize {
    let (gsum, hsum, count) = members.iter().enumerate().filter(|(_, &m)| m).fold(
        (0.0, 0.0, 0usize),
        |(gs, hs, c), (i, _)| (gs + g[i], hs + h[i], c + 1),
    );
    let value = if hsum + growth.l2 > 0.0 { gsum / (hsum + growth.l2) } else { 0.0 };
    let at = tree.nodes.len();
    tree.nodes.push(Node::Leaf { value });

    if depth >= growth.max_depth || count < 2 * growth.min_leaf {
        return at;
    }
    let parent = score(gsum, hsum, growth.l2);
    let mut best: Option<(f64, usize, f64)> = None;
    for (j, order) in orders.iter().enumerate() {
        let col = &columns[j];
        let mut gl = 0.0;
        let mut hl = 0.0;
        let mut nl = 0usize;
        let rows: Vec<usize> = order.iter().copied().filter(|&i| members[i]).collect();
        for w in 0..rows.len().saturating_sub(1) {
            let i = rows[w];
            gl += g[i];
            hl += h[i];
            nl += 1;
            let next = rows[w + 1];
            if col[i] == col[next] || nl < growth.min_leaf || count - nl < growth.min_leaf {
                continue;
            }
            let gain = score(gl, hl, growth.l2) + score(gsum - gl, hsum - hl, growth.l2) - parent;
            if best.is_none_or(|(b, _, _)| gain > b) {
                best = Some((gain, j, 0.5 * (col[i] + col[next])));
            }
        }
    }

    let tol = 1e-12 * parent.abs().max(1e-300) + 1e-300;
    let Some((gain, feature, threshold)) = best else { return at };
    if !(gain > tol) {
        return at;
    }
    let col = &columns[feature];
    let left_members: Vec<bool> = members.iter().enumerate().map(|(i, &m)| m && col[i] <= threshold).collect();
    let right_members: Vec<bool> = members.iter().enumerate().map(|(i, &m)| m && col[i] > threshold).collect();
    let left = build(tree, columns, orders, &left_members, g, h, growth, depth + 1);
    let right = build(tree, columns, orders, &right_members, g, h, growth, depth + 1);
    tree.nodes[at] = Node::Split { feature, threshold, left, right };
    at
}

fn score(g: f64, h: f64, l2: f64) -> f64 {
    let d = h + l2;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}
