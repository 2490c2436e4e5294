//! Shared random draws used by scene generation, acquisition noise, and
//! factor initialization.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::RealScalar;

/// One circularly symmetric complex Gaussian draw with unit variance,
/// i.e. real and imaginary parts are independent N(0, 1/2).
pub(crate) fn complex_randn<R: RealScalar>(rng: &mut impl Rng) -> Complex<R> {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(
        R::of(re * std::f64::consts::FRAC_1_SQRT_2),
        R::of(im * std::f64::consts::FRAC_1_SQRT_2),
    )
}

/// Zero-mean Laplace draw with scale `b`, via the inverse CDF.
pub(crate) fn laplace(rng: &mut impl Rng, b: f64) -> f64 {
    // u is uniform on (-1/2, 1/2); the endpoints have probability zero and
    // u == -1/2 would take ln(0), so nudge it away.
    let mut u: f64 = rng.random::<f64>() - 0.5;
    if u == -0.5 {
        u = 0.5;
    }
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}
