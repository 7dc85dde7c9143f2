//! Cosine cutoff envelope shared by the network and the short-range priors.

use std::f64::consts::PI;

/// Cosine envelope φ(d).
///
/// With `lower == 0` this is `½(cos(πd/r_u) + 1)` on `[0, r_u)`. With a
/// positive lower cutoff it is the bump `½(cos(π(2(d−r_l)/(r_u−r_l) + 1)) + 1)`
/// on `[r_l, r_u)`. Zero everywhere else, including at `d = r_u`.
#[inline]
pub fn cosine_cutoff(d: f64, lower: f64, upper: f64) -> f64 {
    cosine_cutoff_with_grad(d, lower, upper).0
}

/// φ(d) and dφ/dd.
#[inline]
pub fn cosine_cutoff_with_grad(d: f64, lower: f64, upper: f64) -> (f64, f64) {
    if d >= upper {
        return (0.0, 0.0);
    }
    if lower > 0.0 {
        if d < lower {
            return (0.0, 0.0);
        }
        let w = PI * 2.0 / (upper - lower);
        let arg = w * (d - lower) + PI;
        (0.5 * (arg.cos() + 1.0), -0.5 * w * arg.sin())
    } else {
        let w = PI / upper;
        (0.5 * ((w * d).cos() + 1.0), -0.5 * w * (w * d).sin())
    }
}
