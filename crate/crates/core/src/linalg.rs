//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Squared Euclidean norm of row `k`.
pub fn row_norm_sqr(m: &CMat, k: usize) -> f64 {
    m.row(k).iter().map(|z| z.norm_sqr()).sum()
}

/// Stack the listed rows of `m` into a new matrix.
pub fn select_rows(m: &CMat, rows: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Stack the listed columns of `m` into a new matrix.
pub fn select_cols(m: &CMat, cols: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// `sum_n a[n] * b[n]` without conjugation, summed in index order.
pub fn dot(a: impl Iterator<Item = Complex64>, b: impl Iterator<Item = Complex64>) -> Complex64 {
    a.zip(b).fold(ZERO, |acc, (x, y)| acc + x * y)
}

/// Inner product of row `k` of `h` with column `g` of `w`.
pub fn row_col(h: &CMat, k: usize, w: &CMat, g: usize) -> Complex64 {
    dot(h.row(k).iter().copied(), w.column(g).iter().copied())
}

/// Right singular vectors of `m` (as columns) with their singular values,
/// sorted by decreasing singular value. The returned basis spans C^ncols.
pub fn right_singular(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.ncols();
    let padded = if m.nrows() < n {
        let mut p = CMat::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| sv[i]).collect();
    // Rows of v_t are the conjugated right singular vectors.
    let basis = CMat::from_fn(n, order.len(), |r, c| v_t[(order[c], r)].conj());
    (values, basis)
}

/// Numerical rank using the usual `max(dim) * eps * sigma_max` cutoff.
pub fn numerical_rank(values: &[f64], dim: usize) -> usize {
    let smax = values.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let tol = dim as f64 * f64::EPSILON * smax;
    values.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis (columns) of the null space of the rows of `c`.
pub fn null_space(c: &CMat) -> CMat {
    let n = c.ncols();
    if c.nrows() == 0 {
        return CMat::identity(n, n);
    }
    let (values, basis) = right_singular(c);
    let rank = numerical_rank(&values, c.nrows().max(n));
    basis.columns(rank, n - rank).into_owned()
}

/// Frobenius norm squared.
pub fn fro_sqr(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Angular distance in [0, pi/2] between two complex vectors, ignoring a
/// common unit-modulus factor.
pub fn angular_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let ip = a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y);
    (ip.norm() / (na * nb)).clamp(0.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_is_orthogonal_to_rows() {
        let c = CMat::from_fn(2, 4, |i, j| Complex64::new((i + 2 * j) as f64, (i * j) as f64 - 1.0));
        let z = null_space(&c);
        assert_eq!(z.ncols(), 2);
        let prod = &c * &z;
        assert!(fro_sqr(&prod) < 1e-24);
        let gram = z.adjoint() * &z;
        assert!((gram - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_tall_matrix_has_null_space() {
        let r = [Complex64::new(1.0, 0.5), Complex64::new(-2.0, 0.0), Complex64::new(0.0, 1.0)];
        let c = CMat::from_fn(4, 3, |i, j| r[j] * (i as f64 + 1.0));
        assert_eq!(null_space(&c).ncols(), 2);
    }

    #[test]
    fn angular_distance_ignores_phase() {
        let a = [Complex64::new(1.0, 2.0), Complex64::new(0.5, -1.0)];
        let rot = Complex64::from_polar(3.0, 0.7);
        let b: Vec<_> = a.iter().map(|z| z * rot).collect();
        assert!(angular_distance(&a, &b) < 1e-7);
    }
}
