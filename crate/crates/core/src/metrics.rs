//! Agreement and error measures used to score decompositions.

use nalgebra::DMatrix;

use crate::spectral::Partition;

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
///
/// Returns 1 when both partitions are identical up to relabeling, including
/// the degenerate case where both put everything in one cluster.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions cover different item counts");
    let n = a.len();
    let mut table = vec![vec![0usize; b.num_clusters()]; a.num_clusters()];
    for i in 0..n {
        table[a.label(i)][b.label(i)] += 1;
    }
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let rows: f64 = a.sizes().into_iter().map(choose2).sum();
    let cols: f64 = b.sizes().into_iter().map(choose2).sum();
    let total = choose2(n);
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Largest per-row relative error `max_t |x - y| / max_t |y|` (absolute when
/// the reference row is identically zero).
pub fn max_relative_error(actual: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    assert_eq!(actual.shape(), reference.shape());
    (0..reference.nrows())
        .map(|i| {
            let scale = reference.row(i).amax();
            let err = (actual.row(i) - reference.row(i)).amax();
            if scale > 0.0 {
                err / scale
            } else {
                err
            }
        })
        .fold(0.0, f64::max)
}
