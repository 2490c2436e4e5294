//! Angle-of-arrival recovery from estimated effective steering columns.
//!
//! After the decomposition, each mode-1 factor column is a scaled copy of the
//! combined steering vector `w* a(phi)`. The angle is found without any grid:
//! the alignment objective between the column and `w* a(z)` over unit-modulus
//! `z` is a Laurent polynomial whose on-circle zeros mark perfect alignment,
//! so rooting it and keeping the best unit-circle candidate recovers `z` and
//! thus the angle. The complex scale is then read off by projection.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use crate::acquisition::HybridCombiner;
use crate::linalg::polynomial_roots;
use crate::{cis, czero, Error, RealScalar, Result};

/// Roots this close to the unit circle (in modulus) are treated as lying on
/// it; the conjugate-reciprocal pair collapses to one candidate.
const ON_CIRCLE_TOL: f64 = 1e-9;

/// Angular gap below which two on-circle candidates are merged.
const MERGE_TOL: f64 = 1e-6;

/// One recovered path direction.
#[derive(Debug, Clone, PartialEq)]
pub struct AoaEstimate<R: RealScalar> {
    /// Angle of arrival in radians, inside `[-pi/2, pi/2]`.
    pub phi_hat: R,
    /// Unit-modulus phase-step root; its argument is
    /// `2 pi * spacing_ratio * sin(phi_hat)`.
    pub z_hat: Complex<R>,
    /// Complex scale tying the estimated column to the physical steering
    /// vector: the factor column approximates `delta_hat * w* a(z_hat)`.
    pub delta_hat: Complex<R>,
}

/// Steering vector evaluated at a point of the unit circle: entries
/// `z^0, z^1, ..., z^{n_ant-1}`.
pub fn unit_circle_steering<R: RealScalar>(
    z: Complex<R>,
    n_ant: usize,
) -> DVector<Complex<R>> {
    let mut out = DVector::from_element(n_ant, Complex::new(R::one(), R::zero()));
    for n in 1..n_ant {
        out[n] = out[n - 1] * z;
    }
    out
}

/// Coefficients of the alignment polynomial for one estimated column.
///
/// With `q = w (|b|^2 I - b b*) w*` (Hermitian, PSD), the on-circle
/// alignment error is `a*(z) q a(z) = sum_m coef(m) z^m` with
/// `coef(m) = sum over the m-th superdiagonal of q` for
/// `m = -(n_ant-1) .. n_ant-1`. Returned in ascending order of `m`, i.e. the
/// ordinary coefficients of `z^{n_ant-1} a*(z) q a(z)`, length `2 n_ant - 1`.
/// The coefficients satisfy `coef(-m) = conj(coef(m))`.
pub fn aoa_polynomial_coeffs<R: RealScalar>(
    b_hat: &DVector<Complex<R>>,
    w: &DMatrix<Complex<R>>,
) -> Result<Vec<Complex<R>>> {
    if w.ncols() != b_hat.len() {
        return Err(Error::Dimension(format!(
            "column of length {} does not match combiner with {} chains",
            b_hat.len(),
            w.ncols()
        )));
    }
    let bsq = b_hat.norm_squared();
    if bsq == R::zero() {
        return Err(Error::Domain("estimated steering column is zero".into()));
    }
    let n_ant = w.nrows();
    let wb = w * b_hat;
    // q = |b|^2 w w* - (w b)(w b)*
    let mut q = w * w.adjoint() * Complex::new(bsq, R::zero());
    for n1 in 0..n_ant {
        for n2 in 0..n_ant {
            q[(n1, n2)] -= wb[n1] * wb[n2].conj();
        }
    }
    let mut coeffs = vec![czero::<R>(); 2 * n_ant - 1];
    for n1 in 0..n_ant {
        for n2 in 0..n_ant {
            coeffs[n2 + n_ant - 1 - n1] += q[(n1, n2)];
        }
    }
    Ok(coeffs)
}

/// Recovers the angle of arrival and complex scale of one estimated column.
///
/// Roots the alignment polynomial, keeps the `n_ant - 1` roots inside the
/// unit circle (on-circle pairs collapse to a single candidate), pushes each
/// onto the circle, and picks the candidate maximizing the matched-filter
/// ratio `|b* w* a(z)|^2 / norm(w* a(z))^2`. The angle assumes
/// `spacing_ratio <= 1/2` for an unambiguous arcsine.
pub fn recover_aoa<R: RealScalar>(
    b_hat: &DVector<Complex<R>>,
    comb: &HybridCombiner<R>,
    spacing_ratio: R,
) -> Result<AoaEstimate<R>> {
    let w = comb.w();
    let coeffs = aoa_polynomial_coeffs(b_hat, w)?;
    let scale = coeffs
        .iter()
        .fold(R::zero(), |acc, z| acc.max(z.modulus()));
    if scale == R::zero() {
        return Err(Error::NotApplicable(
            "alignment polynomial vanishes identically; the column carries no direction".into(),
        ));
    }
    let roots = polynomial_roots(&coeffs)?;
    let lo = R::of(1.0 - ON_CIRCLE_TOL);
    let hi = R::of(1.0 + ON_CIRCLE_TOL);
    let mut candidates: Vec<Complex<R>> = Vec::new();
    let mut on_circle: Vec<Complex<R>> = Vec::new();
    for root in &roots {
        let m = root.modulus();
        if m < lo {
            if m > R::zero() {
                candidates.push(root.unscale(m));
            }
        } else if m <= hi {
            on_circle.push(root.unscale(m));
        }
    }
    // On-circle roots arrive as conjugate-reciprocal pairs that collapse to
    // (numerically) the same point: keep one representative per cluster.
    let merge = R::of(MERGE_TOL);
    for z in on_circle {
        if !candidates
            .iter()
            .any(|c| (c - z).modulus() < merge)
        {
            candidates.push(z);
        }
    }
    if candidates.is_empty() {
        // Conjugate-reciprocal pairing guarantees inside roots whenever any
        // root exists; reaching this means the rooting degenerated.
        return Err(Error::Numerical(
            "no unit-circle candidates among the polynomial roots".into(),
        ));
    }
    let n_ant = w.nrows();
    let mut best: Option<(R, R, Complex<R>)> = None;
    for z in candidates {
        let wa = w.adjoint() * unit_circle_steering(z, n_ant);
        let den = wa.norm_squared();
        if den == R::zero() {
            continue;
        }
        let num = b_hat.dotc(&wa).modulus_squared();
        let score = num / den;
        let better = match &best {
            None => true,
            Some((s, n, _)) => score > *s || (score == *s && num > *n),
        };
        if better {
            best = Some((score, num, z));
        }
    }
    let (_, _, z_hat) =
        best.ok_or_else(|| Error::Numerical("every candidate was annihilated by w".into()))?;
    let ratio = z_hat.argument() / (R::two_pi() * spacing_ratio);
    let phi_hat = ratio.max(-R::one()).min(R::one()).asin();
    let wa = w.adjoint() * unit_circle_steering(z_hat, n_ant);
    let delta_hat = unit_circle_steering(z_hat, n_ant).dotc(&(w * b_hat))
        / Complex::new(wa.norm_squared(), R::zero());
    Ok(AoaEstimate {
        phi_hat,
        z_hat,
        delta_hat,
    })
}

/// Steering vector for an angle through the phase-step parametrization used
/// by [`recover_aoa`]: identical to the physical array response.
pub fn steering_for_angle<R: RealScalar>(
    phi_rad: R,
    n_ant: usize,
    spacing_ratio: R,
) -> DVector<Complex<R>> {
    let z = cis(R::one(), R::two_pi() * spacing_ratio * phi_rad.sin());
    unit_circle_steering(z, n_ant)
}
