//! Power-iteration estimate of the largest singular value.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Deterministic, non-degenerate starting vector for power iteration.
pub(crate) fn initial_vector(n: usize) -> Array1<f64> {
    // Golden-ratio sequence: no exact zeros and no symmetry with common bases.
    let v = Array1::from_iter((0..n).map(|i| {
        let x = ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract();
        x - 0.37
    }));
    let norm = v.dot(&v).sqrt();
    v / norm
}

/// Runs `iters` rounds of power iteration starting from the left vector `u`.
///
/// Returns the refreshed `(u, v, sigma)` with `sigma = u^T W v`.
pub fn power_iteration(weight: ArrayView2<f64>, u: ArrayView1<f64>, iters: usize) -> (Array1<f64>, Array1<f64>, f64) {
    let mut u = u.to_owned();
    let mut v = weight.t().dot(&u);
    for _ in 0..iters.max(1) {
        v = weight.t().dot(&u);
        let vn = v.dot(&v).sqrt().max(1e-300);
        v /= vn;
        u = weight.dot(&v);
        let un = u.dot(&u).sqrt().max(1e-300);
        u /= un;
    }
    let sigma = u.dot(&weight.dot(&v));
    (u, v, sigma)
}

/// Exact top singular triplet `(u, v, sigma)` from a full SVD, with the
/// signs fixed so that `u` agrees with the `hint` direction.
pub fn top_singular_triplet(weight: ArrayView2<f64>, hint: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>, f64) {
    let (r, c) = weight.dim();
    let m = nalgebra::DMatrix::from_fn(r, c, |i, j| weight[[i, j]]);
    let svd = m.svd(true, true);
    let (k, sigma) =
        svd.singular_values.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, s)| {
                if *s > best.1 {
                    (i, *s)
                } else {
                    best
                }
            },
        );
    let u_mat = svd.u.expect("requested u");
    let vt = svd.v_t.expect("requested v_t");
    let mut u = Array1::from_iter(u_mat.column(k).iter().cloned());
    let mut v = Array1::from_iter(vt.row(k).iter().cloned());
    if u.dot(&hint) < 0.0 {
        u.mapv_inplace(|x| -x);
        v.mapv_inplace(|x| -x);
    }
    (u, v, sigma)
}

/// Largest singular value estimate after `iters` power iterations from a
/// fixed start vector.
pub fn spectral_norm_estimate(weight: ArrayView2<f64>, iters: usize) -> Result<f64> {
    if weight.iter().all(|w| *w == 0.0) {
        return Err(Error::InvalidArgument("spectral norm of a zero matrix".into()));
    }
    let u0 = initial_vector(weight.nrows());
    Ok(power_iteration(weight, u0.view(), iters).2)
}

/// Divides `weight` by its estimated largest singular value.
pub fn spectral_normalize(weight: ArrayView2<f64>, iters: usize) -> Result<(Array2<f64>, f64)> {
    let sigma = spectral_norm_estimate(weight, iters)?;
    Ok((weight.mapv(|w| w / sigma), sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_triplet_on_nearly_degenerate_matrix() {
        // power iteration crawls when the top two singular values are this close
        let w = array![[2.0, 0.0, 0.0], [0.0, 1.999, 0.0], [0.0, 0.0, 0.5]];
        let (u, v, s) = top_singular_triplet(w.view(), initial_vector(3).view());
        assert!((s - 2.0).abs() < 1e-12);
        assert!((u.dot(&w.dot(&v)) - 2.0).abs() < 1e-12);
        assert!((u[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_matrix() {
        let (w, s) = spectral_normalize(array![[3.0, 0.0], [0.0, 1.0]].view(), 5).unwrap();
        assert!((s - 3.0).abs() < 1e-3);
        assert!((w[[0, 0]] - 1.0).abs() < 1e-3);
        assert!((w[[1, 1]] - 1.0 / 3.0).abs() < 1e-3);
        assert_eq!(w[[0, 1]], 0.0);
    }

    #[test]
    fn orthogonal_matrix_is_unchanged() {
        let (c, s) = (0.6f64, 0.8f64);
        let q = array![[c, -s], [s, c]];
        let (w, sigma) = spectral_normalize(q.view(), 5).unwrap();
        assert!((sigma - 1.0).abs() < 1e-3);
        for (a, b) in w.iter().zip(q.iter()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn rank_one_outer_product() {
        let u = array![1.0, 2.0, 2.0];
        let v = array![3.0, 4.0];
        let w = Array2::from_shape_fn((3, 2), |(i, j)| u[i] * v[j]);
        let s = spectral_norm_estimate(w.view(), 5).unwrap();
        assert!((s - 3.0 * 5.0).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_is_an_error() {
        assert!(spectral_normalize(Array2::<f64>::zeros((2, 3)).view(), 5).is_err());
    }
}
