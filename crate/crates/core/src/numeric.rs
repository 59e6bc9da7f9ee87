//! Rounding helpers that ignore floating-point noise at integer boundaries.

const SNAP: f64 = 1e-9;

/// `ceil(x)`, treating values within `1e-9` of an integer as that integer.
pub(crate) fn ceil_snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// `floor(x)`, treating values within `1e-9` of an integer as that integer.
pub(crate) fn floor_snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

/// Clamps a rounded threshold into `[0, n]` and converts it.
pub(crate) fn count_in_range(x: f64, n: usize) -> Option<usize> {
    if x < 0.0 || x > n as f64 {
        None
    } else {
        Some(x as usize)
    }
}
