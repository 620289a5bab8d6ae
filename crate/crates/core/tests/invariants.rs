use marketmode::correlogram::{acf, ccf};
use marketmode::eigen::{max_eigenpair, relative_residual};
use marketmode::mrw::{fit_zeta_points, zeta_model};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Correlation matrix of `n` columns built from a flat row-major sample.
fn correlation(n: usize, data: &[f64]) -> DMatrix<f64> {
    let t = data.len() / n;
    let mut g = DMatrix::from_row_slice(t, n, &data[..t * n]);
    for mut col in g.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
        let s = col.norm();
        col /= s;
    }
    g.transpose() * g
}

proptest! {
    #[test]
    fn leading_eigenvalue_of_a_correlation_matrix_lies_in_one_to_n(
        n in 2usize..8,
        data in prop::collection::vec(-1.0f64..1.0, 200),
    ) {
        let c = correlation(n, &data);
        let pair = max_eigenpair(&c).unwrap();
        prop_assert!(pair.value >= 1.0 - 1e-9 && pair.value <= n as f64 + 1e-9);
        prop_assert!(relative_residual(&c, pair.value, &pair.vector) < 1e-8);
        prop_assert!((pair.vector.norm() - 1.0).abs() < 1e-9);
        prop_assert!(pair.vector.iter().sum::<f64>() >= 0.0);
        let spectrum = pair.spectrum.unwrap();
        prop_assert!((spectrum.iter().sum::<f64>() - n as f64).abs() < 1e-8);
    }

    #[test]
    fn correlograms_are_bounded_and_self_ccf_is_one_at_zero(
        xs in prop::collection::vec(-10.0f64..10.0, 30..120),
    ) {
        prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-6));
        let a = acf(&xs, 5).unwrap();
        prop_assert_eq!(a.values[0], 1.0);
        prop_assert!(a.values.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        let c = ccf(&xs, &xs, 5).unwrap();
        prop_assert!((c.at(0).unwrap() - 1.0).abs() < 1e-12);
        for k in 1..=5 {
            prop_assert!((c.at(k).unwrap() - c.at(-k).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn zeta_fit_inverts_the_model(lambda2 in 0.0f64..0.2) {
        let q: Vec<f64> = (1..=8).map(|i| i as f64 * 0.5).collect();
        let zeta: Vec<f64> = q.iter().map(|&q| zeta_model(q, lambda2)).collect();
        let fit = fit_zeta_points(&q, &zeta).unwrap();
        prop_assert!((fit.lambda2 - lambda2).abs() < 1e-10);
        prop_assert!(fit.residual < 1e-10);
        prop_assert!((zeta_model(2.0, lambda2) - 1.0).abs() < 1e-15);
    }
}
