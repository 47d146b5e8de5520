//! Euclidean norms and point-to-set distances.
//!
//! The Euclidean norm is used throughout the crate; state, input and
//! discrete-input spaces are never mixed inside a single norm.

/// Euclidean norm of a vector.
pub fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean distance between two points of equal dimension.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `dist(x, A) = min_{y in A} ||x - y||` over a finite sample set.
///
/// Returns `f64::INFINITY` for an empty set.
pub fn point_set_distance<'a, I>(x: &[f64], set: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    set.into_iter()
        .map(|y| distance_sq(x, y))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| alpha * xi + yi).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pythagorean_triple() {
        assert_eq!(euclidean(&[3.0, 4.0]), 5.0);
        assert_eq!(distance(&[1.0, 1.0], &[4.0, 5.0]), 5.0);
    }

    #[test]
    fn empty_set_is_infinitely_far() {
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(point_set_distance(&[0.0], empty.iter().map(|v| v.as_slice())).is_infinite());
    }

    fn point() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0..10.0f64, 3)
    }

    proptest! {
        #[test]
        fn set_distance_bounded_by_every_member(x in point(), set in proptest::collection::vec(point(), 1..20)) {
            let d = point_set_distance(&x, set.iter().map(|v| v.as_slice()));
            for y in &set {
                prop_assert!(d <= distance(&x, y) + 1e-12);
            }
        }

        #[test]
        fn set_distance_is_one_lipschitz(x in point(), y in point(), set in proptest::collection::vec(point(), 1..20)) {
            let dx = point_set_distance(&x, set.iter().map(|v| v.as_slice()));
            let dy = point_set_distance(&y, set.iter().map(|v| v.as_slice()));
            prop_assert!((dx - dy).abs() <= distance(&x, &y) + 1e-12);
        }
    }
}
