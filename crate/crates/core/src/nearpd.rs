//! Projection onto positive-definite matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::linalg::SymmetricMatrix;

/// Eigenvalue floor used when none is configured.
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-6;

const MAX_ITER: usize = 500;
const TOL: f64 = 1e-10;

fn clamp_eigen(a: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let e = SymmetricEigen::new(a.clone());
    let vals = e.eigenvalues.map(|v| v.max(floor));
    let v = &e.eigenvectors;
    let x = v * DMatrix::from_diagonal(&vals) * v.transpose();
    (&x + x.transpose()) * 0.5
}

fn min_eig(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn has_unit_diagonal(a: &SymmetricMatrix) -> bool {
    (0..a.dim()).all(|i| (a.get(i, i) - 1.0).abs() < 1e-12)
}

/// Nearest positive-definite matrix with all eigenvalues `>= eigen_floor`.
///
/// Inputs already satisfying the floor are returned unchanged. Unit-diagonal
/// inputs are treated as correlation matrices: alternating projections with
/// Dykstra's correction between the eigenvalue-floored cone and the
/// unit-diagonal subspace, so the output is again a correlation matrix.
/// Other inputs get the closed-form Frobenius projection (eigenvalue clamp).
pub fn nearest_positive_definite(input: &SymmetricMatrix, eigen_floor: f64) -> SymmetricMatrix {
    let n = input.dim();
    if n == 0 || min_eig(input.as_matrix()) >= eigen_floor {
        return input.clone();
    }
    if !has_unit_diagonal(input) {
        let x = clamp_eigen(input.as_matrix(), eigen_floor * (1.0 + 1e-6) + 1e-14);
        return SymmetricMatrix::symmetrized(&x).expect("square");
    }

    // aim slightly above the floor so eigen-solver noise cannot undercut it
    let target = eigen_floor * (1.0 + 1e-6) + 1e-14;
    let mut y = input.as_matrix().clone();
    let mut correction = DMatrix::<f64>::zeros(n, n);
    for _ in 0..MAX_ITER {
        let r = &y - &correction;
        let x = clamp_eigen(&r, target);
        correction = &x - &r;
        let mut next = x;
        for i in 0..n {
            next[(i, i)] = 1.0;
        }
        let change = (&next - &y).norm() / next.norm().max(1.0);
        y = next;
        if change < TOL {
            break;
        }
    }

    // restore the floor exactly while keeping a unit diagonal
    let x = clamp_eigen(&y, target);
    let s: Vec<f64> = (0..n).map(|i| 1.0 / x[(i, i)].sqrt()).collect();
    let mut z = DMatrix::from_fn(n, n, |i, j| x[(i, j)] * s[i] * s[j]);
    for i in 0..n {
        z[(i, i)] = 1.0;
    }
    let lam = min_eig(&z);
    if lam < target {
        // shrink toward the identity just enough to lift the minimum eigenvalue
        let t = ((target - lam) / (1.0 - lam)).min(1.0);
        z = DMatrix::from_fn(
            n,
            n,
            |i, j| {
                if i == j {
                    1.0
                } else {
                    (1.0 - t) * z[(i, j)]
                }
            },
        );
    }
    SymmetricMatrix::symmetrized(&z).expect("square")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_definite_input_unchanged() {
        let a = SymmetricMatrix::from_row_major(2, &[1.0, 0.9, 0.9, 1.0]).unwrap();
        let b = nearest_positive_definite(&a, DEFAULT_EIGEN_FLOOR);
        assert_eq!(a, b);
    }

    #[test]
    fn sign_flipped_correlation_projects_to_analytic_optimum() {
        // eigenvalues -0.8, 1.9, 1.9; nearest correlation matrix has
        // off-diagonals of magnitude 1/2 (its smallest eigenvalue 1 - 2x hits 0)
        let a =
            SymmetricMatrix::from_row_major(3, &[1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0])
                .unwrap();
        let b = nearest_positive_definite(&a, DEFAULT_EIGEN_FLOOR);
        assert!(b.is_positive_definite());
        assert!(b.min_eigenvalue() >= DEFAULT_EIGEN_FLOOR * 0.999);
        for i in 0..3 {
            assert_eq!(b.get(i, i), 1.0);
        }
        assert!((b.get(0, 1) - 0.5).abs() < 1e-3);
        assert!((b.get(0, 2) - 0.5).abs() < 1e-3);
        assert!((b.get(1, 2) + 0.5).abs() < 1e-3);
    }

    #[test]
    fn general_matrix_gets_eigen_clamp() {
        let a = SymmetricMatrix::from_row_major(2, &[2.0, 3.0, 3.0, 2.0]).unwrap();
        let b = nearest_positive_definite(&a, 0.01);
        assert!(b.min_eigenvalue() >= 0.01 - 1e-12);
        // eigenvalues 5 and -1 -> 5 and 0.01
        assert!((b.get(0, 0) - 2.505).abs() < 1e-7);
        assert!((b.get(0, 1) - 2.495).abs() < 1e-7);
    }

    #[test]
    fn idempotent() {
        let a =
            SymmetricMatrix::from_row_major(3, &[1.0, 0.95, 0.1, 0.95, 1.0, 0.95, 0.1, 0.95, 1.0])
                .unwrap();
        let once = nearest_positive_definite(&a, 1e-4);
        let twice = nearest_positive_definite(&once, 1e-4);
        assert_eq!(once, twice);
    }
}
