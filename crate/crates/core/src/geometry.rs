//! Fixed-width feature-space points and the Euclidean helpers shared by the
//! clustering modules.

/// Number of behavioural features per instance.
pub const DIM: usize = 8;

/// A point in feature space.
pub type Point = [f64; DIM];

#[inline]
pub fn sq_dist(a: &Point, b: &Point) -> f64 {
    let mut acc = 0.0;
    for i in 0..DIM {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Coordinate-wise mean of the points selected by `idx`.
///
/// Panics if `idx` is empty.
pub fn mean_of(points: &[Point], idx: &[usize]) -> Point {
    assert!(!idx.is_empty(), "mean of an empty index set");
    let mut acc = [0.0; DIM];
    for &i in idx {
        for (a, v) in acc.iter_mut().zip(points[i].iter()) {
            *a += v;
        }
    }
    let n = idx.len() as f64;
    acc.map(|a| a / n)
}

/// Embed a low-dimensional coordinate list into feature space, zero padded.
pub fn embed(coords: &[f64]) -> Point {
    assert!(coords.len() <= DIM);
    let mut p = [0.0; DIM];
    p[..coords.len()].copy_from_slice(coords);
    p
}

/// Number of distinct points, compared bitwise.
pub fn distinct_count(points: &[Point]) -> usize {
    let mut keys: Vec<[u64; DIM]> = points.iter().map(|p| p.map(f64::to_bits)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        assert_eq!(dist(&embed(&[0.0]), &embed(&[3.0, 4.0])), 5.0);
    }

    #[test]
    fn distinct_ignores_duplicates() {
        let pts = vec![embed(&[1.0]), embed(&[1.0]), embed(&[2.0])];
        assert_eq!(distinct_count(&pts), 2);
    }
}
