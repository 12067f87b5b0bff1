//! Dense real-matrix kernels shared by every analysis module.
//!
//! Matrices are plain [`nalgebra::DMatrix<f64>`] values. Externally supplied
//! matrices enter through [`mat_from_rows`] / [`mat_checked`], which reject
//! ragged input and non-finite entries. Every kernel takes its operands by
//! reference and returns freshly allocated results.
//!
//! Definiteness is always decided from a full symmetric eigendecomposition so
//! that callers get the extremal eigenvalue as a witness.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{IohdError, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Inversions above this condition number are refused.
pub const CONDITION_CAP: f64 = 1e12;

/// Threshold coefficients for symmetry, definiteness and equality tests.
///
/// The fields are scale-relative: the absolute threshold applied to a test on
/// matrix `M` is `sym_tol * |M|_inf` for symmetry, `psd_tol * max(1, scale)`
/// for eigenvalue slack and `eq_tol * max(1, scale)` for equality residuals,
/// where `scale` is the infinity norm of the quantities being compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub sym_tol: f64,
    pub psd_tol: f64,
    pub eq_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sym_tol: 1e-10,
            psd_tol: 1e-9,
            eq_tol: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn new(sym_tol: f64, psd_tol: f64, eq_tol: f64) -> Result<Self> {
        for (name, v) in [
            ("sym_tol", sym_tol),
            ("psd_tol", psd_tol),
            ("eq_tol", eq_tol),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(IohdError::InvalidParameter(format!(
                    "{name} must be a finite nonnegative number, got {v}"
                )));
            }
        }
        Ok(Self {
            sym_tol,
            psd_tol,
            eq_tol,
        })
    }

    pub fn sym_threshold(&self, m: &Mat) -> f64 {
        self.sym_tol * norm_inf(m)
    }

    pub fn psd_threshold(&self, scale: f64) -> f64 {
        self.psd_tol * scale.max(1.0)
    }

    pub fn eq_threshold(&self, scale: f64) -> f64 {
        self.eq_tol * scale.max(1.0)
    }
}

/// Builds a matrix from row-major nested rows.
pub fn mat_from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(IohdError::Dimension(format!(
            "ragged matrix: row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    mat_checked(nrows, ncols, &data)
}

/// Builds a `rows x cols` matrix from row-major data, rejecting non-finite entries.
pub fn mat_checked(rows: usize, cols: usize, data: &[f64]) -> Result<Mat> {
    if data.len() != rows * cols {
        return Err(IohdError::Dimension(format!(
            "{rows}x{cols} matrix needs {} entries, got {}",
            rows * cols,
            data.len()
        )));
    }
    let m = Mat::from_row_slice(rows, cols, data);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(IohdError::NonFinite { what: what.into() })
    }
}

pub fn ensure_square(m: &Mat, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(IohdError::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Maximum absolute row sum.
pub fn norm_inf(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute column sum.
pub fn norm_one(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `|M - M^T|_inf`.
pub fn asymmetry(m: &Mat) -> f64 {
    norm_inf(&(m - m.transpose()))
}

pub fn ensure_symmetric(m: &Mat, what: &str, tol: &Tolerances) -> Result<()> {
    ensure_square(m, what)?;
    let residual = asymmetry(m);
    let threshold = tol.sym_threshold(m);
    if residual <= threshold {
        Ok(())
    } else {
        Err(IohdError::NotSymmetric {
            what: what.into(),
            residual,
            threshold,
        })
    }
}

/// Splits a square matrix into its symmetric part `(M + M^T)/2` and skew part `(M - M^T)/2`.
pub fn sym_skew_split(m: &Mat) -> Result<(Mat, Mat)> {
    ensure_square(m, "matrix to split")?;
    let mt = m.transpose();
    let sym = (m + &mt) * 0.5;
    let skew = (m - &mt) * 0.5;
    Ok((sym, skew))
}

pub fn sym_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of `sym(M)` in ascending order.
pub fn sym_eigenvalues(m: &Mat) -> Vector {
    let mut ev: Vec<f64> = SymmetricEigen::new(sym_part(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    Vector::from_vec(ev)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdCheck {
    pub holds: bool,
    /// Smallest eigenvalue of the symmetric part.
    pub min_eig: f64,
}

/// Positive semidefiniteness: `lambda_min(sym(M)) >= -psd`.
pub fn is_psd(m: &Mat, tol: &Tolerances) -> Result<PsdCheck> {
    ensure_symmetric(m, "matrix", tol)?;
    let min_eig = extremal(m).0;
    Ok(PsdCheck {
        holds: min_eig >= -tol.psd_threshold(norm_inf(m)),
        min_eig,
    })
}

/// Positive definiteness with margin: `lambda_min(sym(M)) > psd`.
pub fn is_pd(m: &Mat, tol: &Tolerances) -> Result<PsdCheck> {
    ensure_symmetric(m, "matrix", tol)?;
    let min_eig = extremal(m).0;
    Ok(PsdCheck {
        holds: min_eig > tol.psd_threshold(norm_inf(m)),
        min_eig,
    })
}

pub fn max_eig_sym(m: &Mat, tol: &Tolerances) -> Result<f64> {
    ensure_symmetric(m, "matrix", tol)?;
    Ok(extremal(m).1)
}

pub fn min_eig_sym(m: &Mat, tol: &Tolerances) -> Result<f64> {
    ensure_symmetric(m, "matrix", tol)?;
    Ok(extremal(m).0)
}

fn extremal(m: &Mat) -> (f64, f64) {
    if m.is_empty() {
        return (0.0, 0.0);
    }
    let ev = sym_eigenvalues(m);
    (ev[0], ev[ev.len() - 1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCheck {
    pub holds: bool,
    /// `lambda_max(P A^T + A P)`.
    pub lambda_max: f64,
}

/// Tests `P A^T + A P <= 0`.
pub fn lyapunov_check(a: &Mat, p: &Mat, tol: &Tolerances) -> Result<LyapunovCheck> {
    ensure_square(a, "A")?;
    ensure_symmetric(p, "P", tol)?;
    if a.nrows() != p.nrows() {
        return Err(IohdError::Dimension(format!(
            "A is {n}x{n} but P is {k}x{k}",
            n = a.nrows(),
            k = p.nrows()
        )));
    }
    let ap = a * p;
    let residual = sym_part(&(&ap + ap.transpose()));
    let lambda_max = extremal(&residual).1;
    let scale = norm_inf(a) * norm_inf(p);
    Ok(LyapunovCheck {
        holds: lambda_max <= tol.psd_threshold(scale),
        lambda_max,
    })
}

/// 2-norm condition number via singular values; infinite when singular.
pub fn condition_number(m: &Mat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a square matrix, refused above [`CONDITION_CAP`].
pub fn inverse_checked(m: &Mat, what: &str) -> Result<Mat> {
    ensure_square(m, what)?;
    let condition = condition_number(m);
    if condition.is_nan() || condition > CONDITION_CAP {
        return Err(IohdError::Singular {
            what: what.into(),
            condition,
        });
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| IohdError::Singular {
            what: what.into(),
            condition,
        })
}

/// Schur complement `P11 - P12 C2^T (C2 P22 C2^T)^{-1} C2 P12^T` of a symmetric
/// matrix `P` partitioned after its first `n1` rows and columns.
pub fn schur_complement(p: &Mat, n1: usize, c2: &Mat, tol: &Tolerances) -> Result<Mat> {
    ensure_symmetric(p, "P", tol)?;
    let n = p.nrows();
    if n1 > n || c2.ncols() != n - n1 {
        return Err(IohdError::Dimension(format!(
            "cannot partition {n}x{n} P at {n1} against C2 of width {}",
            c2.ncols()
        )));
    }
    let n2 = n - n1;
    let p11 = p.view((0, 0), (n1, n1));
    let p12 = p.view((0, n1), (n1, n2));
    let p22 = p.view((n1, n1), (n2, n2));
    let coupling = p12 * c2.transpose();
    let inner = c2 * p22 * c2.transpose();
    let inner_inv = inverse_checked(&inner, "C2 P22 C2^T")?;
    let out = p11 - &coupling * inner_inv * coupling.transpose();
    // symmetric in exact arithmetic
    Ok(sym_part(&out))
}

pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Principal square root of a symmetric PSD matrix; negative eigenvalues are clipped to zero.
pub fn sqrt_psd(m: &Mat) -> Mat {
    let eig = SymmetricEigen::new(sym_part(m));
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Numerical rank with singular-value threshold `rel * sigma_max`.
pub fn rank(m: &Mat, rel: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let cutoff = rel * sv.max();
    sv.iter().filter(|&&s| s > cutoff).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn split_nilpotent() {
        let (s, k) = sym_skew_split(&dmatrix![0.0, 1.0; 0.0, 0.0]).unwrap();
        assert_eq!(s, dmatrix![0.0, 0.5; 0.5, 0.0]);
        assert_eq!(k, dmatrix![0.0, 0.5; -0.5, 0.0]);
    }

    #[test]
    fn split_symmetric_has_zero_skew() {
        let (s, k) = sym_skew_split(&dmatrix![2.0, 1.0; 1.0, 3.0]).unwrap();
        assert_eq!(k, Mat::zeros(2, 2));
        assert_eq!(s, dmatrix![2.0, 1.0; 1.0, 3.0]);
    }

    #[test]
    fn split_rejects_non_square() {
        assert!(matches!(
            sym_skew_split(&Mat::zeros(2, 3)),
            Err(IohdError::Dimension(_))
        ));
    }

    #[test]
    fn psd_examples() {
        let id = is_psd(&Mat::identity(2, 2), &tol()).unwrap();
        assert!(id.holds);
        assert_relative_eq!(id.min_eig, 1.0, epsilon = 1e-14);

        let indefinite = is_psd(&dmatrix![1.0, 0.0; 0.0, -1.0], &tol()).unwrap();
        assert!(!indefinite.holds);
        assert_relative_eq!(indefinite.min_eig, -1.0, epsilon = 1e-14);

        // trace 4 > 0, det 2 > 0
        assert!(
            is_psd(&dmatrix![1.0, -1.0; -1.0, 3.0], &tol())
                .unwrap()
                .holds
        );
    }

    #[test]
    fn psd_rejects_asymmetric() {
        assert!(matches!(
            is_psd(&dmatrix![1.0, 2.0; 0.0, 1.0], &tol()),
            Err(IohdError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn lyapunov_examples() {
        let i2 = Mat::identity(2, 2);
        let neg = lyapunov_check(&(-&i2), &i2, &tol()).unwrap();
        assert!(neg.holds);
        assert_relative_eq!(neg.lambda_max, -2.0, epsilon = 1e-14);

        let rot = lyapunov_check(&dmatrix![0.0, 1.0; -1.0, 0.0], &i2, &tol()).unwrap();
        assert!(rot.holds);
        assert_eq!(rot.lambda_max, 0.0);

        assert!(!lyapunov_check(&i2, &i2, &tol()).unwrap().holds);
    }

    #[test]
    fn lyapunov_dimension_mismatch() {
        assert!(lyapunov_check(&Mat::identity(2, 2), &Mat::identity(3, 3), &tol()).is_err());
    }

    #[test]
    fn schur_examples() {
        // P12 = 0 leaves P11 unchanged
        let p = dmatrix![2.0, 0.0, 0.0; 0.0, 3.0, 1.0; 0.0, 1.0, 4.0];
        let c2 = dmatrix![1.0, 0.5];
        let s = schur_complement(&p, 1, &c2, &tol()).unwrap();
        assert_eq!(s, dmatrix![2.0]);

        // 4/3 - (1/3) * 3 * (1/3) = 1
        let p = dmatrix![4.0 / 3.0, 2.0 / 3.0; 2.0 / 3.0, 4.0 / 3.0];
        let s = schur_complement(&p, 1, &dmatrix![0.5], &tol()).unwrap();
        assert_relative_eq!(s[(0, 0)], 1.0, epsilon = 1e-14);

        let p = dmatrix![2.0, 1.0; 1.0, 2.0];
        let s = schur_complement(&p, 1, &dmatrix![1.0], &tol()).unwrap();
        assert_relative_eq!(s[(0, 0)], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn schur_singular_inner_block() {
        let p = dmatrix![2.0, 1.0; 1.0, 2.0];
        match schur_complement(&p, 1, &dmatrix![0.0], &tol()) {
            Err(IohdError::Singular { condition, .. }) => assert!(condition > CONDITION_CAP),
            other => panic!("expected singularity error, got {other:?}"),
        }
    }

    #[test]
    fn max_eig_examples() {
        assert_relative_eq!(
            max_eig_sym(&Mat::identity(3, 3), &tol()).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            max_eig_sym(&dmatrix![2.0, 0.0; 0.0, 5.0], &tol()).unwrap(),
            5.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            max_eig_sym(&dmatrix![2.0, 1.0; 1.0, 2.0], &tol()).unwrap(),
            3.0,
            epsilon = 1e-13
        );
        assert!(max_eig_sym(&dmatrix![0.0, 1.0; 0.0, 0.0], &tol()).is_err());
    }

    #[test]
    fn tolerances_reject_negative() {
        assert!(Tolerances::new(-1.0, 0.0, 0.0).is_err());
        assert!(Tolerances::new(0.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn ragged_and_non_finite_input() {
        assert!(mat_from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(matches!(
            mat_from_rows(&[vec![1.0, f64::INFINITY]]),
            Err(IohdError::NonFinite { .. })
        ));
        let m = mat_from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m[(1, 0)], 3.0);
    }

    #[test]
    fn block_diag_layout() {
        let b = block_diag(&[&dmatrix![1.0], &dmatrix![2.0, 3.0]]);
        assert_eq!(b, dmatrix![1.0, 0.0, 0.0; 0.0, 2.0, 3.0]);
    }
}
