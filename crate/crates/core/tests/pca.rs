use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use recession_core::pca::{parse_projection_csv, pca_fit, pca_project_export};
use recession_core::FeatureMatrix;

/// Cyclic Jacobi eigenvalues of a small symmetric matrix.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn correlation(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mean: Vec<f64> = (0..p).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..p)
        .map(|c| (rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
        .collect();
    (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / ((n - 1.0) * sd[i] * sd[j])
                })
                .collect()
        })
        .collect()
}

fn gaussian(seed: u64, n: usize, p: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // mixing makes the columns correlated
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..p)
                .map(|j| z[j] + 0.5 * z[(j + 1) % p] + 0.1 * j as f64 * z[0])
                .collect()
        })
        .collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
    let p = rows[0].len();
    FeatureMatrix::from_complete(
        (0..rows.len()).map(|i| format!("r{i}")).collect(),
        (0..p).map(|j| format!("f{j}")).collect(),
        rows,
    )
    .unwrap()
}

#[test]
fn eigenvalues_match_jacobi_oracle() {
    let rows = gaussian(8, 200, 5);
    let oracle = jacobi_eigenvalues(correlation(&rows));
    let fit = pca_fit(&matrix(rows), 5).unwrap();
    for (a, b) in fit.eigenvalues.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }
    assert!((fit.eigenvalues.iter().sum::<f64>() - 5.0).abs() < 1e-8);
}

#[test]
fn mse_non_increasing_and_vanishes_at_full_rank() {
    let m = matrix(gaussian(8, 200, 5));
    let mse: Vec<f64> = (1..=5).map(|k| pca_fit(&m, k).unwrap().reconstruction_mse).collect();
    assert!(mse.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{mse:?}");
    assert!(mse[4] < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn structural_invariants(seed in any::<u64>(), n in 6usize..60, p in 2usize..7, k_frac in 0.0f64..1.0) {
        let k = 1 + ((p - 1) as f64 * k_frac) as usize;
        let fit = pca_fit(&matrix(gaussian(seed, n, p)), k).unwrap();
        for (i, a) in fit.components.iter().enumerate() {
            for (j, b) in fit.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - expected).abs() < 1e-9);
            }
            let pivot = a.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            prop_assert!(pivot > 0.0);
        }
        prop_assert!(fit.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((fit.eigenvalues.iter().sum::<f64>() - p as f64).abs() < 1e-8);
        prop_assert!(fit.explained_ratio.iter().sum::<f64>() <= 1.0 + 1e-12);
        for c in 0..k {
            let mean = fit.projected.iter().map(|r| r[c]).sum::<f64>() / n as f64;
            prop_assert!(mean.abs() < 1e-9);
        }
        let csv = pca_project_export(&fit, &fit.row_labels).unwrap();
        let back = parse_projection_csv(csv.as_bytes()).unwrap();
        for ((label, coords), (row_label, row)) in back.iter().zip(fit.row_labels.iter().zip(&fit.projected)) {
            prop_assert_eq!(label, row_label);
            for (a, b) in coords.iter().zip(row) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
