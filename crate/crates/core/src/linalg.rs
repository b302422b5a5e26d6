//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues at or below this are treated as zero when extracting ranges.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Orthonormal basis (as columns) of the range of a symmetric PSD matrix.
pub fn range_basis(c: &DMatrix<f64>) -> DMatrix<f64> {
    let d = c.nrows();
    if d == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(c.clone());
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lambda)| lambda > RANK_CUTOFF)
        .map(|(j, _)| eig.eigenvectors.column(j).into_owned())
        .collect();
    columns_to_matrix(d, &cols)
}

/// Symmetric factor `L` with `L Lᵀ = c`, built from the eigen-decomposition so
/// that semidefinite matrices are handled without pivoting.
pub fn psd_factor(c: &DMatrix<f64>) -> DMatrix<f64> {
    let d = c.nrows();
    if d == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(c.clone());
    let mut factor = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    factor
}

/// Splits `R^d` into the kernel of the stacked `rows` and its orthogonal
/// complement. Returns `(kernel, complement)` as column bases.
pub fn kernel_split(rows: &[DVector<f64>], d: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    if d == 0 {
        return (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0));
    }
    // Zero-pad so the SVD returns a full d×d right factor.
    let m = rows.len().max(d);
    let mut stacked = DMatrix::<f64>::zeros(m, d);
    for (i, r) in rows.iter().enumerate() {
        stacked.row_mut(i).copy_from(&r.transpose());
    }
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = RANK_CUTOFF * sigma_max.max(1.0);

    let mut kernel = Vec::new();
    let mut complement = Vec::new();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let v = v_t.row(j).transpose().into_owned();
        if s > cutoff {
            complement.push(v);
        } else {
            kernel.push(v);
        }
    }
    (columns_to_matrix(d, &kernel), columns_to_matrix(d, &complement))
}

pub fn columns_to_matrix(d: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::<f64>::zeros(d, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).copy_from(c);
    }
    out
}

/// Pairwise summation in a fixed order; the result depends only on the input
/// order, not on how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Empirical quantile (type 7, linear interpolation). `sorted` must be sorted.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_single_row_in_r2() {
        let rows = vec![DVector::from_vec(vec![1.0, 0.0])];
        let (kernel, complement) = kernel_split(&rows, 2);
        assert_eq!(kernel.ncols(), 1);
        assert_eq!(complement.ncols(), 1);
        assert!((kernel[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn empty_rows_give_full_kernel() {
        let (kernel, complement) = kernel_split(&[], 3);
        assert_eq!(kernel.ncols(), 3);
        assert_eq!(complement.ncols(), 0);
    }

    #[test]
    fn psd_factor_reproduces_matrix() {
        let c = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let l = psd_factor(&c);
        let back = &l * l.transpose();
        assert!((back - c).abs().max() < 1e-15);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }
}
