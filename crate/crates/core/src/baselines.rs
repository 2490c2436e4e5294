//! Baseline estimators: subspace (MUSIC) angle scanning and greedy sparse
//! (SOMP) recovery on an angle dictionary.
//!
//! Both consume the same measurement tensor and combiner as the
//! decomposition path so comparisons stay paired. The subspace method scans
//! a sine-domain grid of the pseudospectrum built from the measurement
//! sample covariance; the sparse method greedily selects dictionary atoms by
//! aggregate correlation across all measurement fibers and rebuilds a
//! covariance from the least-squares coefficients on the selected support.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::acquisition::HybridCombiner;
use crate::channel::array_response;
use crate::covariance::CovarianceMatrix;
use crate::linalg::{hermitian_eig_desc, lstsq};
use crate::tensor::{ComplexTensor3, Mode};
use crate::{czero, Error, RealScalar, Result};

/// Default pseudospectrum scan resolution.
pub const DEFAULT_MUSIC_GRID: usize = 2048;

/// Default dictionary size for a given array.
pub fn default_grid_size(n_ant: usize) -> usize {
    2 * n_ant
}

/// Array-response dictionary on a uniform sine-domain angle grid.
#[derive(Debug, Clone)]
pub struct Dictionary<R: RealScalar> {
    a_d: DMatrix<Complex<R>>,
    grid_angles: Vec<R>,
}

impl<R: RealScalar> Dictionary<R> {
    /// Atom matrix, antennas by grid points; every entry unit modulus.
    pub fn a_d(&self) -> &DMatrix<Complex<R>> {
        &self.a_d
    }

    /// Angle (radians) of each grid point.
    pub fn grid_angles(&self) -> &[R] {
        &self.grid_angles
    }

    pub fn n_ant(&self) -> usize {
        self.a_d.nrows()
    }

    pub fn n_grid(&self) -> usize {
        self.a_d.ncols()
    }
}

/// Builds the dictionary: grid points uniform in `sin(phi)` over `[-1, 1)`
/// (the first point maps to `sin(phi) = -1`), one array response per point.
pub fn build_dictionary<R: RealScalar>(
    n_ant: usize,
    n_grid: usize,
    spacing_ratio: R,
) -> Result<Dictionary<R>> {
    if n_ant == 0 {
        return Err(Error::Config("dictionary needs at least one antenna".into()));
    }
    if n_grid < 2 || n_grid < n_ant {
        return Err(Error::Config(format!(
            "grid size {n_grid} must be at least 2 and at least the antenna count {n_ant}"
        )));
    }
    let mut a_d = DMatrix::from_element(n_ant, n_grid, czero::<R>());
    let mut grid_angles = Vec::with_capacity(n_grid);
    let step = R::of(2.0) / R::of_usize(n_grid);
    for i in 0..n_grid {
        let s = -R::one() + step * R::of_usize(i);
        let phi = s.asin();
        a_d.set_column(i, &array_response(phi, n_ant, spacing_ratio));
        grid_angles.push(phi);
    }
    Ok(Dictionary { a_d, grid_angles })
}

/// Sample covariance of the measurement fibers: `(1/(KT)) Y1 Y1^H` over the
/// mode-1 unfolding. Hermitian PSD by construction.
pub fn sample_covariance_y<R: RealScalar>(y: &ComplexTensor3<R>) -> CovarianceMatrix<R> {
    let (_, k, t) = y.dims();
    let y1 = y.unfold(Mode::One);
    let scale = Complex::new(R::one() / R::of_usize((k * t).max(1)), R::zero());
    CovarianceMatrix::from_quadratic(&y1 * y1.adjoint() * scale)
}

/// Result of the subspace scan: peak angles (highest peak first) and the
/// orthonormalized span of their full-array responses.
#[derive(Debug, Clone)]
pub struct MusicEstimate<R: RealScalar> {
    /// Recovered angles in radians, in decreasing pseudospectrum height.
    pub aoas_rad: Vec<R>,
    /// Orthonormal basis (antennas by `l`) of the recovered steering span.
    pub subspace: DMatrix<Complex<R>>,
}

/// Subspace angle estimation: eigendecomposes the measurement sample
/// covariance, scans `1 / ||U_n^H W^H a(phi)||^2` over a sine-uniform grid
/// with parabolic peak refinement, and returns the `l` highest peaks.
/// Needs a nonempty noise subspace, so `l` must stay below the chain count.
pub fn music_estimate<R: RealScalar>(
    y: &ComplexTensor3<R>,
    comb: &HybridCombiner<R>,
    l: usize,
    grid_size: usize,
    spacing_ratio: R,
) -> Result<MusicEstimate<R>> {
    let (m, _, _) = y.dims();
    if m != comb.m_rf() {
        return Err(Error::Dimension(format!(
            "measurement has {m} chains but the combiner {}",
            comb.m_rf()
        )));
    }
    if l >= comb.m_rf() {
        return Err(Error::NotApplicable(format!(
            "subspace scan needs a nonempty noise subspace ({l} paths with {} chains)",
            comb.m_rf()
        )));
    }
    if grid_size < 4 {
        return Err(Error::Config(format!(
            "pseudospectrum grid of {grid_size} points is too coarse"
        )));
    }
    let n_ant = comb.n_ant();
    if l == 0 {
        return Ok(MusicEstimate {
            aoas_rad: Vec::new(),
            subspace: DMatrix::from_element(n_ant, 0, czero::<R>()),
        });
    }
    let r_y = sample_covariance_y(y);
    let eig = hermitian_eig_desc(r_y.matrix());
    let u_n = eig.vectors.columns(l, m - l).into_owned();
    let w_adj = comb.w().adjoint();

    let step = R::of(2.0) / R::of_usize(grid_size);
    let mut sines = Vec::with_capacity(grid_size);
    let mut height = Vec::with_capacity(grid_size);
    let floor = R::of(1e-300);
    for i in 0..grid_size {
        let s = -R::one() + step * R::of_usize(i);
        let b_w = &w_adj * array_response(s.asin(), n_ant, spacing_ratio);
        let d = (u_n.adjoint() * b_w).norm_squared();
        sines.push(s);
        height.push(R::one() / d.max(floor));
    }

    let peak_at = |i: usize| -> bool {
        let left_ok = i == 0 || height[i] > height[i - 1];
        let right_ok = i + 1 == grid_size || height[i] >= height[i + 1];
        left_ok && right_ok
    };
    let mut candidates: Vec<usize> = (0..grid_size).filter(|&i| peak_at(i)).collect();
    candidates.sort_by(|&a, &b| height[b].partial_cmp(&height[a]).expect("finite heights"));
    if candidates.len() < l {
        // Degenerate spectra (flat or monotone): fall back to the largest
        // remaining grid values away from already-chosen points.
        let mut rest: Vec<usize> = (0..grid_size)
            .filter(|i| !candidates.contains(i))
            .collect();
        rest.sort_by(|&a, &b| height[b].partial_cmp(&height[a]).expect("finite heights"));
        for i in rest {
            if candidates.len() >= l {
                break;
            }
            if candidates.iter().all(|&j| j.abs_diff(i) > 1) {
                candidates.push(i);
            }
        }
        if candidates.len() < l {
            return Err(Error::Numerical(
                "pseudospectrum has too few distinct peaks".into(),
            ));
        }
    }

    let mut aoas = Vec::with_capacity(l);
    for &i in candidates.iter().take(l) {
        let mut s = sines[i];
        if i > 0 && i + 1 < grid_size {
            // Parabolic vertex through the peak and its neighbors; the
            // offset stays within half a grid step by the peak property.
            let (ym, y0, yp) = (height[i - 1], height[i], height[i + 1]);
            let denom = ym - R::of(2.0) * y0 + yp;
            if denom.abs() > R::zero() {
                let offset = R::of(0.5) * (ym - yp) / denom;
                s += offset * step;
            }
        }
        aoas.push(s.max(-R::one()).min(R::one()).asin());
    }

    let mut steer = DMatrix::from_element(n_ant, l, czero::<R>());
    for (j, &phi) in aoas.iter().enumerate() {
        steer.set_column(j, &array_response(phi, n_ant, spacing_ratio));
    }
    let subspace = steer.qr().q();
    Ok(MusicEstimate {
        aoas_rad: aoas,
        subspace,
    })
}

/// Result of the greedy sparse recovery: selected grid indices in pick
/// order, the rebuilt covariance, and the residual norm after each round
/// (starting with the initial norm).
#[derive(Debug, Clone)]
pub struct SompEstimate<R: RealScalar> {
    /// Dictionary column indices, in selection order.
    pub support: Vec<usize>,
    /// `(1/(KT)) A_S (X X^H) A_S^H` with `X` the joint least-squares
    /// coefficients on the support.
    pub covariance: CovarianceMatrix<R>,
    /// Residual Frobenius norms: one entry before any selection, then one
    /// per round; non-increasing.
    pub residual_norms: Vec<R>,
}

/// Simultaneous orthogonal matching pursuit across all measurement fibers:
/// each round picks the unselected atom with the largest normalized
/// aggregate correlation against the residuals, then re-projects all fibers
/// jointly on the selected set.
pub fn somp_estimate<R: RealScalar>(
    y: &ComplexTensor3<R>,
    comb: &HybridCombiner<R>,
    dict: &Dictionary<R>,
    l: usize,
) -> Result<SompEstimate<R>> {
    let (m, k, t) = y.dims();
    if m != comb.m_rf() {
        return Err(Error::Dimension(format!(
            "measurement has {m} chains but the combiner {}",
            comb.m_rf()
        )));
    }
    if comb.n_ant() != dict.n_ant() {
        return Err(Error::Dimension(format!(
            "combiner is for {} antennas but the dictionary {}",
            comb.n_ant(),
            dict.n_ant()
        )));
    }
    if l > dict.n_grid() {
        return Err(Error::Dimension(format!(
            "cannot select {l} atoms from a grid of {}",
            dict.n_grid()
        )));
    }
    let y1 = y.unfold(Mode::One);
    let phi = comb.w().adjoint() * dict.a_d();
    let atom_norms: Vec<R> = (0..phi.ncols())
        .map(|j| phi.column(j).norm_squared().max(R::default_epsilon()))
        .collect();

    let mut support: Vec<usize> = Vec::with_capacity(l);
    let mut residual = y1.clone();
    let mut residual_norms = vec![residual.norm()];
    let mut coeffs = DMatrix::from_element(0, y1.ncols(), czero::<R>());
    for _ in 0..l {
        let corr = phi.adjoint() * &residual;
        let mut best: Option<(usize, R)> = None;
        for j in 0..phi.ncols() {
            if support.contains(&j) {
                continue;
            }
            let score = corr.row(j).norm_squared() / atom_norms[j];
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let (pick, _) = best.ok_or_else(|| {
            Error::Numerical("no atom left to select".into())
        })?;
        support.push(pick);
        let phi_s = phi.select_columns(support.iter());
        coeffs = lstsq(&phi_s, &y1, R::of(1e-12))?;
        residual = &y1 - phi_s * &coeffs;
        let norm = residual.norm();
        debug_assert!(
            norm <= residual_norms.last().copied().unwrap_or(norm) + R::of(1e-9),
            "enlarging the support cannot grow the least-squares residual"
        );
        residual_norms.push(norm);
    }

    let a_s = dict.a_d().select_columns(support.iter());
    let scale = Complex::new(R::one() / R::of_usize((k * t).max(1)), R::zero());
    let covariance = if support.is_empty() {
        CovarianceMatrix::from_quadratic(DMatrix::from_element(
            dict.n_ant(),
            dict.n_ant(),
            czero::<R>(),
        ))
    } else {
        CovarianceMatrix::from_quadratic(&a_s * (&coeffs * coeffs.adjoint()) * a_s.adjoint() * scale)
    };
    Ok(SompEstimate {
        support,
        covariance,
        residual_norms,
    })
}
