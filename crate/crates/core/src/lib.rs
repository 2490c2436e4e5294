//! Spatial channel covariance estimation for hybrid analog/digital receive
//! front-ends over time-varying frequency-selective multipath channels.
//!
//! The measurement snapshots across RF chains, subcarriers, and frames form a
//! third-order tensor whose low-rank canonical polyadic structure carries the
//! per-path angles, delays, and gains. The estimator factorizes that tensor by
//! alternating least squares ([`als`]), recovers each angle of arrival from its
//! effective steering column by polynomial rooting ([`aoa`]), and rebuilds the
//! spatial covariance from the factors ([`covariance`]). Fisher-information
//! bounds for the angle estimates live in [`crlb`]; subspace (MUSIC) and
//! compressed-sensing (SOMP) reference methods in [`baselines`].
//!
//! All numerics are generic over the real scalar type through [`RealScalar`];
//! the `f64` instantiations used by the simulator are aliased at the crate
//! root ([`Tensor3`], [`Factors`], ...).

pub mod acquisition;
pub mod als;
pub mod aoa;
pub mod baselines;
pub mod channel;
pub mod covariance;
pub mod crlb;
pub mod linalg;
mod sampling;
pub mod tensor;

use num_complex::Complex;

/// Real scalar type over which the library is generic.
///
/// `nalgebra::RealField` supplies the elementary functions and lets
/// `Complex<Self>` drive nalgebra's complex decompositions; `FromPrimitive`
/// covers conversion of literal constants and counts.
pub trait RealScalar:
    Copy
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::Euclid
    + nalgebra::RealField
{
    /// Converts an `f64` constant, panicking only for non-representable input.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }

    /// Converts a count; exact for every size this library can allocate.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// Widens to `f64` (exact for `f32` and `f64`).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("real scalar widens to f64")
    }
}

impl RealScalar for f32 {}
impl RealScalar for f64 {}

/// Complex zero over a generic real scalar.
pub(crate) fn czero<R: RealScalar>() -> Complex<R> {
    Complex::new(R::zero(), R::zero())
}

/// Polar constructor `r exp(j theta)` over a generic real scalar.
pub(crate) fn cis<R: RealScalar>(r: R, theta: R) -> Complex<R> {
    Complex::new(r * theta.cos(), r * theta.sin())
}

/// Errors surfaced by the estimation pipeline.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Operand shapes are inconsistent.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical procedure failed (rank deficiency, non-convergence, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The method does not apply to this configuration.
    #[error("not applicable: {0}")]
    NotApplicable(String),
    /// Invalid configuration values.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Default real scalar of the simulator.
pub type Real = f64;
/// Complex value over [`Real`].
pub type C64 = Complex<Real>;
/// Dense complex matrix over [`Real`].
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector over [`Real`].
pub type CVec = nalgebra::DVector<C64>;
/// Third-order complex tensor over [`Real`].
pub type Tensor3 = tensor::ComplexTensor3<Real>;
/// CPD factor triple over [`Real`].
pub type Factors = tensor::FactorTriple<Real>;
