use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{grow, weighted_mean, Criterion, Dataset, Tree, TreeParams};
use super::Hyperparameters;

/// Random forest of unpruned Gini trees.
///
/// With bootstrapping on, each tree sees `n` draws made with probability
/// proportional to instance weight, and uses the draw counts as its weights.
/// Without it, every tree sees the original weights.
pub(super) fn train_forest(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    params: &Hyperparameters,
    seed: u64,
) -> Vec<Tree> {
    let n = rows.len();
    let tree_params = TreeParams {
        criterion: Criterion::Gini,
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        mtry: params.mtry,
    };
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| master.next_u64()).collect();
    let picker = WeightedIndex::new(weights).expect("positive weights");

    let one = |tree_seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
        let counts = if params.bootstrap {
            let mut c = vec![0.0; n];
            for _ in 0..n {
                c[picker.sample(&mut rng)] += 1.0;
            }
            c
        } else {
            weights.to_vec()
        };
        let data = Dataset {
            rows,
            targets,
            weights: &counts,
        };
        grow(&data, &tree_params, &mut rng, &|s| weighted_mean(&data, s))
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        tree_seeds.into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        tree_seeds.into_iter().map(one).collect()
    }
}

/// Fraction of trees whose leaf majority is indoor (leaf mean >= 0.5).
pub(super) fn forest_score(trees: &[Tree], x: &[f64]) -> f64 {
    let votes = trees.iter().filter(|t| t.predict(x) >= 0.5).count();
    votes as f64 / trees.len() as f64
}
