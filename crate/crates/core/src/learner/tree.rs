//! Weighted CART trees, stored as flat node arrays.
//!
//! Instance weights act as multiplicities in every statistic: an instance of
//! weight `k` contributes exactly like `k` identical instances of weight 1.
//! Instances with zero weight are ignored.

use rand::seq::index::sample;
use rand::Rng;

/// Impurity used to grow a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Weighted Gini impurity of 0/1 targets.
    Gini,
    /// Weighted squared error of real-valued targets.
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all of them.
    pub mtry: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    /// Split feature, or `None` for a leaf.
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub value: f64,
}

impl TreeNode {
    pub fn leaf(value: f64) -> Self {
        Self {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Follows `x[feature] <= threshold` to the left down to a leaf value.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match node.feature {
                None => return node.value,
                Some(f) => {
                    i = if x[f] <= node.threshold {
                        node.left
                    } else {
                        node.right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i].feature {
                None => 0,
                Some(_) => 1 + go(t, t.nodes[i].left).max(go(t, t.nodes[i].right)),
            }
        }
        go(self, 0)
    }
}

/// Training data view shared by every split search.
pub struct Dataset<'a> {
    pub rows: &'a [Vec<f64>],
    pub targets: &'a [f64],
    pub weights: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted impurity decrease (not normalized by total weight).
    pub gain: f64,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    w: f64,
    wy: f64,
    wyy: f64,
}

impl Stats {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.wy += w * y;
        self.wyy += w * y * y;
    }

    fn sub(self, o: Stats) -> Stats {
        Stats {
            w: self.w - o.w,
            wy: self.wy - o.wy,
            wyy: self.wyy - o.wyy,
        }
    }

    /// Weight times impurity.
    fn cost(&self, criterion: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            // w * (1 - p² - (1-p)²) = 2 w p (1 - p), p = wy / w
            Criterion::Gini => 2.0 * self.wy * (self.w - self.wy) / self.w,
            Criterion::SquaredError => self.wyy - self.wy * self.wy / self.w,
        }
    }
}

fn node_stats(data: &Dataset<'_>, samples: &[usize]) -> Stats {
    let mut s = Stats::default();
    for &i in samples {
        s.add(data.weights[i], data.targets[i]);
    }
    s
}

/// Best split of `samples` over `features`, if any split leaves at least
/// `min_leaf` samples on each side and strictly reduces impurity.
pub fn best_split(
    data: &Dataset<'_>,
    samples: &[usize],
    features: &[usize],
    criterion: Criterion,
    min_leaf: usize,
) -> Option<Split> {
    let total = node_stats(data, samples);
    let parent_cost = total.cost(criterion);
    let mut best: Option<Split> = None;
    let mut order = samples.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| data.rows[a][f].total_cmp(&data.rows[b][f]));
        let mut left = Stats::default();
        for k in 0..order.len().saturating_sub(1) {
            let i = order[k];
            left.add(data.weights[i], data.targets[i]);
            let (here, next) = (data.rows[i][f], data.rows[order[k + 1]][f]);
            if here == next || k + 1 < min_leaf || order.len() - k - 1 < min_leaf {
                continue;
            }
            let gain = parent_cost - left.cost(criterion) - total.sub(left).cost(criterion);
            if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                let mut threshold = here + (next - here) / 2.0;
                if threshold >= next {
                    threshold = here;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Grows a tree over the positive-weight instances. `leaf_value` maps a
/// leaf's samples to its output.
pub fn grow<R: Rng>(
    data: &Dataset<'_>,
    params: &TreeParams,
    rng: &mut R,
    leaf_value: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    let samples: Vec<usize> = (0..data.rows.len())
        .filter(|&i| data.weights[i] > 0.0)
        .collect();
    let n_features = data.rows.first().map_or(0, Vec::len);
    let mut tree = Tree { nodes: Vec::new() };
    grow_node(
        data, params, rng, leaf_value, samples, 0, n_features, &mut tree,
    );
    tree
}

#[allow(clippy::too_many_arguments)]
fn grow_node<R: Rng>(
    data: &Dataset<'_>,
    params: &TreeParams,
    rng: &mut R,
    leaf_value: &dyn Fn(&[usize]) -> f64,
    samples: Vec<usize>,
    depth: usize,
    n_features: usize,
    tree: &mut Tree,
) -> usize {
    let id = tree.nodes.len();
    tree.nodes.push(TreeNode::leaf(leaf_value(&samples)));
    if params.max_depth.is_some_and(|d| depth >= d) || samples.len() < 2 * params.min_leaf.max(1) {
        return id;
    }
    let features: Vec<usize> = match params.mtry {
        Some(k) if k < n_features => {
            let mut f = sample(rng, n_features, k).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..n_features).collect(),
    };
    let Some(split) = best_split(data, &samples, &features, params.criterion, params.min_leaf)
    else {
        return id;
    };
    let (left, right): (Vec<usize>, Vec<usize>) = samples
        .into_iter()
        .partition(|&i| data.rows[i][split.feature] <= split.threshold);
    let l = grow_node(
        data,
        params,
        rng,
        leaf_value,
        left,
        depth + 1,
        n_features,
        tree,
    );
    let r = grow_node(
        data,
        params,
        rng,
        leaf_value,
        right,
        depth + 1,
        n_features,
        tree,
    );
    let node = &mut tree.nodes[id];
    node.feature = Some(split.feature);
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    id
}

/// Weighted mean target of `samples`.
pub fn weighted_mean(data: &Dataset<'_>, samples: &[usize]) -> f64 {
    let s = node_stats(data, samples);
    if s.w > 0.0 {
        s.wy / s.w
    } else {
        0.0
    }
}
