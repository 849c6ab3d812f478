use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{grow, Criterion, Dataset, Tree, TreeParams};
use super::Hyperparameters;

pub(super) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Logistic-loss gradient boosting.
///
/// Each round fits a squared-error tree to the residuals `y - p` and sets
/// every leaf to the Newton step `Σ w (y - p) / Σ w p (1 - p)`. Returns the
/// initial log-odds and the trees; the additive model is
/// `base + learning_rate * Σ tree(x)`.
pub(super) fn train_gbm(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    params: &Hyperparameters,
    seed: u64,
) -> (f64, Vec<Tree>) {
    let n = rows.len();
    let total_w: f64 = weights.iter().sum();
    let pos_w: f64 = weights.iter().zip(targets).map(|(w, y)| w * y).sum();
    let prior = (pos_w / total_w).clamp(1e-6, 1.0 - 1e-6);
    let base = (prior / (1.0 - prior)).ln();

    let tree_params = TreeParams {
        criterion: Criterion::SquaredError,
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        mtry: params.mtry,
    };
    // only consulted when mtry subsamples features
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margin = vec![base; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut residual = vec![0.0; n];
    let mut hessian = vec![0.0; n];
    for _ in 0..params.n_trees {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            residual[i] = targets[i] - p;
            hessian[i] = p * (1.0 - p);
        }
        let data = Dataset {
            rows,
            targets: &residual,
            weights,
        };
        let newton = |samples: &[usize]| {
            let num: f64 = samples.iter().map(|&i| weights[i] * residual[i]).sum();
            let den: f64 = samples.iter().map(|&i| weights[i] * hessian[i]).sum();
            num / den.max(1e-12)
        };
        let tree = grow(&data, &tree_params, &mut rng, &newton);
        for (m, row) in margin.iter_mut().zip(rows) {
            *m += params.learning_rate * tree.predict(row);
        }
        trees.push(tree);
    }
    (base, trees)
}

pub(super) fn gbm_score(base: f64, learning_rate: f64, trees: &[Tree], x: &[f64]) -> f64 {
    let margin = base + learning_rate * trees.iter().map(|t| t.predict(x)).sum::<f64>();
    sigmoid(margin)
}
