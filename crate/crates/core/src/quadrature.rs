//! Gauss–Legendre rules on the unit interval.

use nalgebra::DMatrix;

/// Nodes in `(0, 1)` (ascending) and weights summing to 1, by the
/// Golub–Welsch eigenvalue method.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1, "quadrature needs at least one point");
    let jacobi = DMatrix::from_fn(points, points, |i, j| {
        let k = i.max(j) as f64;
        if i.abs_diff(j) == 1 {
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let w = eig.eigenvectors[(0, i)].powi(2);
            (0.5 * (x + 1.0), w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
