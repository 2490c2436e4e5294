//! Hybrid analog/digital combining and noisy measurement synthesis.
//!
//! The receiver observes the channel through `m_rf` chains: an analog
//! phase-shifter matrix with unit-modulus entries followed by a digital
//! stage that whitens the combined noise. Measurements across
//! (RF chain, subcarrier, frame) again form a third-order tensor, obtained
//! from the channel tensor by a mode-1 product with the combiner's
//! conjugate transpose plus white complex Gaussian noise.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;

use crate::linalg::hermitian_inv_sqrt;
use crate::sampling::complex_randn;
use crate::tensor::{mode1_product, ComplexTensor3};
use crate::{Error, RealScalar, Result};

/// Rank-revealing floor for the whitening stage, relative to the largest
/// Gram eigenvalue.
const WHITEN_RANK_TOL: f64 = 1e-12;

/// Analog/digital receive combiner pair.
///
/// `w = w_rf * w_bb` has orthonormal columns, so noise that is white at the
/// antennas stays white (same variance, identity covariance) at the chains.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridCombiner<R: RealScalar> {
    w_rf: DMatrix<Complex<R>>,
    w_bb: DMatrix<Complex<R>>,
    w: DMatrix<Complex<R>>,
}

impl<R: RealScalar> HybridCombiner<R> {
    /// Analog stage, `n_ant` by `m_rf`, unit-modulus entries.
    pub fn w_rf(&self) -> &DMatrix<Complex<R>> {
        &self.w_rf
    }

    /// Digital whitening stage, `m_rf` by `m_rf`.
    pub fn w_bb(&self) -> &DMatrix<Complex<R>> {
        &self.w_bb
    }

    /// Combined matrix `w_rf * w_bb` with orthonormal columns.
    pub fn w(&self) -> &DMatrix<Complex<R>> {
        &self.w
    }

    /// Number of receive antennas.
    pub fn n_ant(&self) -> usize {
        self.w.nrows()
    }

    /// Number of RF chains.
    pub fn m_rf(&self) -> usize {
        self.w.ncols()
    }
}

/// Draws the analog combiner: i.i.d. phases uniform on `[0, 2 pi)`, unit
/// amplitude.
pub fn draw_rf_combiner<R: RealScalar>(
    n_ant: usize,
    m_rf: usize,
    rng: &mut impl Rng,
) -> Result<DMatrix<Complex<R>>> {
    if m_rf == 0 || m_rf > n_ant {
        return Err(Error::Config(format!(
            "need 1 <= m_rf <= n_ant, got m_rf = {m_rf}, n_ant = {n_ant}"
        )));
    }
    Ok(DMatrix::from_fn(n_ant, m_rf, |_, _| {
        let theta = R::of(rng.random::<f64>() * 2.0 * std::f64::consts::PI);
        crate::cis(R::one(), theta)
    }))
}

/// Completes an analog stage with the digital whitening stage
/// `w_bb = (w_rf* w_rf)^{-1/2}`, computed by Hermitian eigendecomposition.
/// Fails if the analog columns are numerically rank deficient.
pub fn whitened_combiner<R: RealScalar>(w_rf: DMatrix<Complex<R>>) -> Result<HybridCombiner<R>> {
    let gram = w_rf.adjoint() * &w_rf;
    let w_bb = hermitian_inv_sqrt(&gram, R::of(WHITEN_RANK_TOL))?;
    let w = &w_rf * &w_bb;
    Ok(HybridCombiner { w_rf, w_bb, w })
}

/// Convenience draw of a full combiner: random analog phases, whitening
/// digital stage.
pub fn draw_combiner<R: RealScalar>(
    n_ant: usize,
    m_rf: usize,
    rng: &mut impl Rng,
) -> Result<HybridCombiner<R>> {
    whitened_combiner(draw_rf_combiner(n_ant, m_rf, rng)?)
}

/// Synthesizes the baseband measurement tensor: the channel tensor combined
/// down to `m_rf` chains along mode 1, plus i.i.d. circularly symmetric
/// complex Gaussian noise with variance `sigma^2` per entry.
pub fn measure<R: RealScalar>(
    h: &ComplexTensor3<R>,
    comb: &HybridCombiner<R>,
    sigma: R,
    rng: &mut impl Rng,
) -> Result<ComplexTensor3<R>> {
    if sigma < R::zero() {
        return Err(Error::Domain("noise level must be nonnegative".into()));
    }
    let mut y = mode1_product(h, &comb.w.adjoint())?;
    if sigma > R::zero() {
        let (m, k, t) = y.dims();
        let s = Complex::new(sigma, R::zero());
        for i3 in 0..t {
            for i2 in 0..k {
                for i1 in 0..m {
                    y[(i1, i2, i3)] += complex_randn::<R>(rng) * s;
                }
            }
        }
    }
    Ok(y)
}
