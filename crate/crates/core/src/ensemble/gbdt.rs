//! Gradient boosted regression trees with squared loss and sample weights.
//!
//! Trees are grown level by level with an exact greedy split search. Each
//! feature keeps its nonzero entries presorted, and the zero entries of a
//! node are handled as one block, so one-hot indicators cost as much as their
//! nonzeros.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::features::WeightKernel;
use crate::error::ensure_dim;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtSpec {
    pub name: String,
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Temporal sample weighting. The default decays into the past.
    pub kernel: WeightKernel,
}

impl Default for GbdtSpec {
    fn default() -> Self {
        Self {
            name: "GB".into(),
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
            kernel: WeightKernel::temporal(0.01),
        }
    }
}

impl GbdtSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("GBDT needs at least one tree"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(format!("learning rate {} outside (0, 1]", self.learning_rate)));
        }
        if self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::invalid("max depth and min samples per leaf must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// A fitted boosted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    n_features: usize,
    base: f64,
    trees: Vec<Tree>,
}

/// Fitted model plus the weighted mean squared training error after the
/// initial constant and after every boosting round.
#[derive(Debug, Clone)]
pub struct GbdtFit {
    pub model: Gbdt,
    pub training_loss: Vec<f64>,
}

#[derive(Clone, Copy, Default)]
struct Sums {
    g: f64,
    h: f64,
    n: usize,
}

impl Sums {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn minus(&self, o: &Sums) -> Sums {
        Sums {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }

    fn score(&self) -> f64 {
        if self.h > 0.0 {
            self.g * self.g / self.h
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Per-node state while scanning one feature in sorted order.
#[derive(Clone, Copy)]
struct Scan {
    left: Sums,
    last: f64,
}

struct SortedColumns {
    /// Nonzero entries `(value, row)` of each feature, ascending by value.
    nonzero: Vec<Vec<(f64, u32)>>,
    /// Position in `nonzero[j]` where the non-negative values begin.
    zero_at: Vec<usize>,
}

impl SortedColumns {
    fn new(x: ArrayView2<f64>) -> Self {
        let p = x.ncols();
        let mut nonzero = Vec::with_capacity(p);
        let mut zero_at = Vec::with_capacity(p);
        for j in 0..p {
            let mut col: Vec<(f64, u32)> = x
                .column(j)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (*v, i as u32))
                .collect();
            col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            zero_at.push(col.partition_point(|e| e.0 < 0.0));
            nonzero.push(col);
        }
        Self { nonzero, zero_at }
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

/// Consider splitting the node in front of `value`, then absorb the entry.
fn visit(
    scan: &mut Scan,
    total: &Sums,
    value: f64,
    add: Sums,
    feature: usize,
    min_leaf: usize,
    best: &mut Option<Candidate>,
) {
    if scan.left.n >= min_leaf && value > scan.last {
        let right = total.minus(&scan.left);
        if right.n >= min_leaf && scan.left.h > 0.0 && right.h > 0.0 {
            let gain = scan.left.score() + right.score() - total.score();
            if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                *best = Some(Candidate {
                    gain,
                    feature,
                    threshold: midpoint(scan.last, value),
                });
            }
        }
    }
    scan.left.g += add.g;
    scan.left.h += add.h;
    scan.left.n += add.n;
    scan.last = value;
}

struct Builder<'x, 'a> {
    x: ArrayView2<'x, f64>,
    cols: &'a SortedColumns,
    spec: &'a GbdtSpec,
}

impl Builder<'_, '_> {
    /// Grows one tree on gradients `g` and hessians `h`; returns the tree and
    /// the leaf index of every row.
    fn grow(&self, g: &[f64], h: &[f64]) -> (Tree, Vec<u32>) {
        let n = g.len();
        let mut node_of = vec![0u32; n];
        let mut nodes = vec![Node::Leaf(0.0)];
        let mut active: Vec<usize> = vec![0];
        // slot of each node id in the `active` list, usize::MAX when inactive
        let mut slot = vec![0usize];
        for _depth in 0..self.spec.max_depth {
            if active.is_empty() {
                break;
            }
            let k = active.len();
            let mut totals = vec![Sums::default(); k];
            for i in 0..n {
                let s = slot[node_of[i] as usize];
                if s != usize::MAX {
                    totals[s].add(g[i], h[i]);
                }
            }
            let mut best: Vec<Option<Candidate>> = vec![None; k];
            let mut nz = vec![Sums::default(); k];
            let mut scans = vec![Scan { left: Sums::default(), last: f64::NEG_INFINITY }; k];
            for (j, col) in self.cols.nonzero.iter().enumerate() {
                nz.iter_mut().for_each(|s| *s = Sums::default());
                for &(_, r) in col {
                    let s = slot[node_of[r as usize] as usize];
                    if s != usize::MAX {
                        nz[s].add(g[r as usize], h[r as usize]);
                    }
                }
                let zeros: Vec<Sums> = (0..k).map(|s| totals[s].minus(&nz[s])).collect();
                scans.iter_mut().for_each(|s| {
                    *s = Scan {
                        left: Sums::default(),
                        last: f64::NEG_INFINITY,
                    }
                });
                let zero_at = self.cols.zero_at[j];
                for (pos, &(v, r)) in col.iter().enumerate() {
                    if pos == zero_at {
                        self.visit_zeros(&mut scans, &totals, &zeros, j, &mut best);
                    }
                    let s = slot[node_of[r as usize] as usize];
                    if s != usize::MAX {
                        let add = Sums {
                            g: g[r as usize],
                            h: h[r as usize],
                            n: 1,
                        };
                        visit(&mut scans[s], &totals[s], v, add, j, self.spec.min_samples_leaf, &mut best[s]);
                    }
                }
                if zero_at == col.len() {
                    self.visit_zeros(&mut scans, &totals, &zeros, j, &mut best);
                }
            }

            let mut next = Vec::new();
            let mut split_of: Vec<Option<(usize, f64, u32, u32)>> = vec![None; k];
            for (s, &node) in active.iter().enumerate() {
                match best[s] {
                    Some(c) => {
                        let left = nodes.len();
                        nodes.push(Node::Leaf(0.0));
                        nodes.push(Node::Leaf(0.0));
                        nodes[node] = Node::Split {
                            feature: c.feature,
                            threshold: c.threshold,
                            left,
                            right: left + 1,
                        };
                        split_of[s] = Some((c.feature, c.threshold, left as u32, left as u32 + 1));
                        next.push(left);
                        next.push(left + 1);
                    }
                    None => nodes[node] = Node::Leaf(leaf_value(&totals[s])),
                }
            }
            for i in 0..n {
                let s = slot[node_of[i] as usize];
                if s == usize::MAX {
                    continue;
                }
                if let Some((f, t, l, r)) = split_of[s] {
                    node_of[i] = if self.x[[i, f]] <= t { l } else { r };
                }
            }
            slot = vec![usize::MAX; nodes.len()];
            for (s, &node) in next.iter().enumerate() {
                slot[node] = s;
            }
            active = next;
        }
        if !active.is_empty() {
            let mut totals = vec![Sums::default(); nodes.len()];
            for i in 0..n {
                totals[node_of[i] as usize].add(g[i], h[i]);
            }
            for &node in &active {
                nodes[node] = Node::Leaf(leaf_value(&totals[node]));
            }
        }
        (Tree { nodes }, node_of)
    }

    fn visit_zeros(
        &self,
        scans: &mut [Scan],
        totals: &[Sums],
        zeros: &[Sums],
        feature: usize,
        best: &mut [Option<Candidate>],
    ) {
        for s in 0..scans.len() {
            if zeros[s].n > 0 {
                visit(
                    &mut scans[s],
                    &totals[s],
                    0.0,
                    zeros[s],
                    feature,
                    self.spec.min_samples_leaf,
                    &mut best[s],
                );
            }
        }
    }
}

/// Newton step for squared loss: the weighted mean residual.
fn leaf_value(s: &Sums) -> f64 {
    if s.h > 0.0 {
        s.g / s.h
    } else {
        0.0
    }
}

fn weighted_mse(y: &[f64], f: &[f64], w: &[f64], wsum: f64) -> f64 {
    y.iter().zip(f).zip(w).map(|((y, f), w)| w * (y - f) * (y - f)).sum::<f64>() / wsum
}

impl Gbdt {
    pub fn fit(x: ArrayView2<f64>, y: &[f64], weights: &[f64], spec: &GbdtSpec) -> Result<GbdtFit> {
        spec.validate()?;
        let n = x.nrows();
        ensure_dim(n, y.len())?;
        ensure_dim(n, weights.len())?;
        if n == 0 {
            return Err(Error::invalid("GBDT needs training data"));
        }
        if n > u32::MAX as usize {
            return Err(Error::invalid("too many GBDT training rows"));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GBDT training data".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("GBDT weights must be positive and finite"));
        }
        let wsum: f64 = weights.iter().sum();
        let base = y.iter().zip(weights).map(|(y, w)| y * w).sum::<f64>() / wsum;
        let mut f = vec![base; n];
        let cols = SortedColumns::new(x);
        let builder = Builder { x, cols: &cols, spec };
        let mut trees = Vec::with_capacity(spec.n_trees);
        let mut losses = vec![weighted_mse(y, &f, weights, wsum)];
        let mut g = vec![0.0; n];
        for _ in 0..spec.n_trees {
            for i in 0..n {
                g[i] = weights[i] * (y[i] - f[i]);
            }
            let (mut tree, leaf_of) = builder.grow(&g, weights);
            for node in tree.nodes.iter_mut() {
                if let Node::Leaf(v) = node {
                    *v *= spec.learning_rate;
                }
            }
            for i in 0..n {
                if let Node::Leaf(v) = tree.nodes[leaf_of[i] as usize] {
                    f[i] += v;
                }
            }
            losses.push(weighted_mse(y, &f, weights, wsum));
            trees.push(tree);
        }
        Ok(GbdtFit {
            model: Gbdt {
                n_features: x.ncols(),
                base,
                trees,
            },
            training_loss: losses,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        ensure_dim(self.n_features, row.len())?;
        Ok(self.base + self.trees.iter().map(|t| t.predict(row)).sum::<f64>())
    }
}
