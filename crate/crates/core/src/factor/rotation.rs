use nalgebra::{DMatrix, Matrix3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Restriction on one loading of the rotated factor model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignRestriction {
    Pos,
    Neg,
    Any,
    /// Negative, and larger in magnitude than every other loading in its row.
    NegDominant,
}

/// Sign pattern over the 8 instruments x 3 factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignRestrictionMatrix {
    cells: [[SignRestriction; 3]; 8],
}

/// Rows holding the three sovereign-spread instruments.
const SPREAD_ROWS: std::ops::RangeInclusive<usize> = 4..=6;

impl SignRestrictionMatrix {
    /// Rejects patterns that place a dominance cell outside the spread rows
    /// of the third factor.
    pub fn new(cells: [[SignRestriction; 3]; 8]) -> Result<Self> {
        for (i, row) in cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if *cell == SignRestriction::NegDominant && (j != 2 || !SPREAD_ROWS.contains(&i)) {
                    return Err(Error::Invalid(format!(
                        "dominance restriction at ({i}, {j}) is only allowed on the spread rows of the third factor"
                    )));
                }
            }
        }
        Ok(Self { cells })
    }

    /// Monetary / information / spread pattern for
    /// (OIS 1y, 2y, 5y, 10y, IT-OIS 2y, 5y, 10y, STOXX50).
    pub fn three_shock() -> Self {
        use SignRestriction::*;
        Self {
            cells: [
                [Pos, Pos, Pos],
                [Pos, Pos, Pos],
                [Pos, Pos, Pos],
                [Pos, Any, Pos],
                [Pos, Neg, NegDominant],
                [Pos, Neg, NegDominant],
                [Pos, Neg, NegDominant],
                [Neg, Pos, Pos],
            ],
        }
    }

    pub fn cell(&self, row: usize, col: usize) -> SignRestriction {
        self.cells[row][col]
    }
}

/// True when `rotated` (8 x 3) satisfies every cell of `restrictions`.
pub fn check_sign_restrictions(rotated: &DMatrix<f64>, restrictions: &SignRestrictionMatrix) -> bool {
    if rotated.shape() != (8, 3) {
        return false;
    }
    for i in 0..8 {
        for j in 0..3 {
            let v = rotated[(i, j)];
            let ok = match restrictions.cells[i][j] {
                SignRestriction::Pos => v > 0.0,
                SignRestriction::Neg => v < 0.0,
                SignRestriction::Any => true,
                SignRestriction::NegDominant => {
                    v < 0.0 && (0..3).filter(|&c| c != j).all(|c| v.abs() > rotated[(i, c)].abs())
                }
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

/// One Haar-distributed draw from O(3) and whether it passed the restrictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationCandidate {
    pub q: Matrix3<f64>,
    pub accepted: bool,
}

/// Haar draw on O(3): QR of a standard Gaussian matrix with the signs of
/// R's diagonal moved into Q.
pub fn sample_orthonormal<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let g = Matrix3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..3 {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    /// A loading matrix that satisfies the three-shock pattern.
    pub(crate) fn admissible() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            8,
            3,
            &[
                0.9, 0.3, 0.2, //
                0.8, 0.4, 0.2, //
                0.6, 0.5, 0.3, //
                0.4, -0.1, 0.3, //
                0.2, -0.1, -0.5, //
                0.2, -0.2, -0.6, //
                0.1, -0.2, -0.7, //
                -0.5, 0.4, 0.3,
            ],
        )
    }

    #[test]
    fn admissible_pattern_passes() {
        assert!(check_sign_restrictions(&admissible(), &SignRestrictionMatrix::three_shock()));
    }

    #[test]
    fn single_violation_fails() {
        let mut m = admissible();
        m[(7, 0)] = 0.5;
        assert!(!check_sign_restrictions(&m, &SignRestrictionMatrix::three_shock()));
    }

    #[test]
    fn dominance_compares_absolute_values() {
        let mut m = admissible();
        m[(4, 0)] = 0.2;
        m[(4, 1)] = -0.1;
        m[(4, 2)] = -0.15;
        assert!(!check_sign_restrictions(&m, &SignRestrictionMatrix::three_shock()));
    }

    #[test]
    fn dominance_outside_spread_rows_is_rejected() {
        let mut cells = [[SignRestriction::Any; 3]; 8];
        cells[0][2] = SignRestriction::NegDominant;
        assert!(SignRestrictionMatrix::new(cells).is_err());
        cells[0][2] = SignRestriction::Any;
        cells[5][2] = SignRestriction::NegDominant;
        assert!(SignRestrictionMatrix::new(cells).is_ok());
    }

    #[test]
    fn draws_are_orthonormal_and_reproducible() {
        for i in 0..200 {
            let q = sample_orthonormal(&mut stream_rng(3, i));
            assert!((q.transpose() * q - Matrix3::identity()).norm() < 1e-12);
            assert!((q.determinant().abs() - 1.0).abs() < 1e-12);
        }
        let a = sample_orthonormal(&mut stream_rng(9, 4));
        let b = sample_orthonormal(&mut stream_rng(9, 4));
        assert_eq!(a, b);
    }

    #[test]
    fn haar_draws_have_zero_mean_and_both_determinants() {
        let n = 10_000;
        let mut mean = Matrix3::zeros();
        let mut negative = 0;
        for i in 0..n {
            let q = sample_orthonormal(&mut stream_rng(21, i));
            mean += q;
            negative += (q.determinant() < 0.0) as usize;
        }
        mean /= n as f64;
        assert!(mean.iter().all(|v| v.abs() < 0.05), "{mean}");
        let share = negative as f64 / n as f64;
        assert!((share - 0.5).abs() < 0.03, "{share}");
    }
}
