use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wifio_core::features::{ols, select_neighborhood_sizes, FeatureSet};
use wifio_core::{Error, FeatureMatrix, Label};

/// Coefficients and t statistics from `(X'X)^-1 X'y`.
fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let (n, p) = x.shape();
    let xtx_inv = (x.transpose() * x).try_inverse().unwrap();
    let beta = &xtx_inv * x.transpose() * y;
    let rss = (y - x * &beta).norm_squared();
    let s2 = rss / (n - p) as f64;
    let t = (0..p)
        .map(|j| beta[j] / (s2 * xtx_inv[(j, j)]).sqrt())
        .collect();
    (beta.iter().copied().collect(), t)
}

#[test]
fn fixed_design_matches_normal_equations() {
    #[rustfmt::skip]
    let x = DMatrix::from_row_slice(10, 3, &[
        1.0, 0.5, 3.0,
        1.0, 1.5, 2.0,
        1.0, 2.0, 7.0,
        1.0, 3.5, 1.0,
        1.0, 4.0, 4.0,
        1.0, 5.5, 6.0,
        1.0, 6.0, 2.5,
        1.0, 7.5, 8.0,
        1.0, 8.0, 3.0,
        1.0, 9.5, 5.0,
    ]);
    let y = DVector::from_row_slice(&[1.2, 2.9, 1.1, 5.6, 4.4, 4.9, 7.8, 6.1, 9.2, 8.3]);
    let fit = ols(&x, &y).unwrap();
    let (beta, t) = normal_equations(&x, &y);
    for j in 0..3 {
        assert!((fit.coefficients[j] - beta[j]).abs() < 1e-9);
        assert!((fit.t_stats[j] - t[j]).abs() < 1e-9);
    }
    assert_eq!(fit.residual_df, 7);
}

/// With two residual degrees of freedom the t distribution has the closed
/// form `P(|T| > t) = 1 - t / sqrt(2 + t^2)`.
#[test]
fn two_sided_p_values_in_closed_form() {
    let x = DMatrix::from_row_slice(
        5,
        3,
        &[
            1.0, 0.0, 1.0, 1.0, 1.0, 3.0, 1.0, 2.0, 0.0, 1.0, 4.0, 2.0, 1.0, 5.0, 5.0,
        ],
    );
    let y = DVector::from_row_slice(&[0.3, 1.9, 2.2, 3.7, 5.5]);
    let fit = ols(&x, &y).unwrap();
    assert_eq!(fit.residual_df, 2);
    for j in 0..3 {
        let t = fit.t_stats[j].abs();
        let want = 1.0 - t / (2.0 + t * t).sqrt();
        assert!(
            (fit.p_values[j] - want).abs() < 1e-9,
            "{} vs {want}",
            fit.p_values[j]
        );
    }
}

/// 500 nodes over the default 20 columns; `power_d2` is the label plus a
/// little noise, every other column is independent noise.
fn one_informative(seed: u64) -> (FeatureMatrix, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = FeatureSet::default().names();
    let informative = names.iter().position(|n| n == "power_d2").unwrap();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..500 {
        let indoor = i % 5 != 0;
        labels.push(if indoor {
            Label::Indoor
        } else {
            Label::Outdoor
        });
        rows.push(
            (0..names.len())
                .map(|j| {
                    if j == informative {
                        f64::from(u8::from(indoor)) + 0.2 * noise.sample(&mut rng)
                    } else {
                        noise.sample(&mut rng)
                    }
                })
                .collect(),
        );
    }
    (FeatureMatrix { names, rows }, labels)
}

#[test]
fn selects_the_single_informative_column() {
    let (features, labels) = one_informative(1);
    let report = select_neighborhood_sizes(&features, &labels).unwrap();
    let selected: Vec<&str> = report
        .entries
        .iter()
        .filter(|e| e.selected)
        .map(|e| e.name.as_str())
        .collect();
    assert_eq!(selected, ["power_d2"]);
    let set = report.selected_set();
    assert_eq!(set.power, vec![2]);
    assert!(set.neighbors.is_empty() && set.aps.is_empty() && set.fps.is_empty());
}

/// Across many draws, noise columns are selected about as often as the
/// significance level says.
#[test]
fn noise_columns_selected_at_the_nominal_rate() {
    let (mut false_positives, mut tests) = (0, 0);
    for seed in 100..140 {
        let (features, labels) = one_informative(seed);
        let report = select_neighborhood_sizes(&features, &labels).unwrap();
        for e in &report.entries {
            if e.name == "power_d2" {
                assert!(e.selected && e.p_value.unwrap() < 1e-12);
            } else {
                tests += 1;
                false_positives += usize::from(e.selected);
            }
        }
    }
    let rate = false_positives as f64 / tests as f64;
    assert!(rate < 0.1, "false positive rate {rate}");
}

#[test]
fn single_class_is_rejected() {
    let (features, _) = one_informative(2);
    let labels = vec![Label::Indoor; 500];
    assert_eq!(
        select_neighborhood_sizes(&features, &labels).unwrap_err(),
        Error::DegenerateLabels
    );
}

#[test]
fn constant_and_duplicate_columns_are_set_aside() {
    let (mut features, labels) = one_informative(3);
    for row in &mut features.rows {
        row[0] = 4.0;
        row[2] = row[1];
    }
    let report = select_neighborhood_sizes(&features, &labels).unwrap();
    assert_eq!(report.entries[0].dropped.as_deref(), Some("constant"));
    assert!(report.entries[2]
        .dropped
        .as_deref()
        .unwrap()
        .starts_with("duplicate"));
    assert!(!report.entries[0].selected && !report.entries[2].selected);
}
