use ndarray::ArrayView2;

use crate::error::{Error, Result};

fn mean_pair_distance(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    for x in a.rows() {
        let mut row = 0.0;
        for y in b.rows() {
            let mut sq = 0.0;
            for (p, q) in x.iter().zip(y.iter()) {
                let d = p - q;
                sq += d * d;
            }
            row += sq.sqrt();
        }
        total += row;
    }
    total / (a.nrows() * b.nrows()) as f64
}

/// `2 E|x - y| - E|x - x'| - E|y - y'|` over all pairs, self-pairs included.
pub fn energy_distance(p: ArrayView2<f64>, q: ArrayView2<f64>) -> Result<f64> {
    if p.nrows() == 0 || q.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "energy distance needs non-empty sample sets".into(),
        ));
    }
    if p.ncols() != q.ncols() {
        return Err(Error::dims(p.ncols(), q.ncols(), "energy distance samples"));
    }
    let cross = mean_pair_distance(p, q);
    let within_p = mean_pair_distance(p, p);
    let within_q = mean_pair_distance(q, q);
    Ok(2.0 * cross - within_p - within_q)
}
