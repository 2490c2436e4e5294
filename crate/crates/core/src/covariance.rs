//! Spatial covariance reconstruction and comparison metrics.
//!
//! The spatial covariance over the full array is reconstructed from the
//! decomposition factors after angle recovery, and compared against the
//! ground-truth covariance through the relative projection efficiency (RPE):
//! the fraction of channel energy captured when beamforming along the
//! estimated dominant subspace instead of the true one. Angle accuracy is
//! scored by an assignment-matched mean squared error, and the analytic
//! relation between angle CRLBs and achievable RPE gives a lower-bound curve
//! for `1 - eta`.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use crate::acquisition::HybridCombiner;
use crate::aoa::{recover_aoa, unit_circle_steering, AoaEstimate};
use crate::linalg::{hermitian_eig_desc, hermitian_pinv};
use crate::tensor::FactorTriple;
use crate::{czero, Error, RealScalar, Result};

/// Relative tolerance for the Hermitian validation in
/// [`CovarianceMatrix::new`].
const HERMITIAN_TOL: f64 = 1e-10;

/// Relative eigenvalue floor below which validation treats a matrix as
/// indefinite rather than PSD.
const PSD_TOL: f64 = 1e-10;

/// A spatial covariance matrix, Hermitian positive semidefinite by
/// construction or by validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<R: RealScalar> {
    r: DMatrix<Complex<R>>,
}

impl<R: RealScalar> CovarianceMatrix<R> {
    /// Wraps a caller-supplied matrix after checking squareness, Hermitian
    /// symmetry (relative tolerance 1e-10), and positive semidefiniteness
    /// (eigenvalues above `-1e-10` times the largest).
    pub fn new(r: DMatrix<Complex<R>>) -> Result<Self> {
        if r.nrows() != r.ncols() {
            return Err(Error::Dimension(format!(
                "covariance must be square, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        let scale = r.norm();
        if (&r - r.adjoint()).norm() > R::of(HERMITIAN_TOL) * scale {
            return Err(Error::Domain("covariance is not Hermitian".into()));
        }
        if scale > R::zero() {
            let eig = hermitian_eig_desc(&r);
            let lead = eig.values[0];
            let tail = eig.values[r.nrows() - 1];
            if tail < -R::of(PSD_TOL) * lead.abs() {
                return Err(Error::Domain(format!(
                    "covariance is not positive semidefinite (eigenvalue {:?})",
                    tail
                )));
            }
        }
        Ok(Self { r })
    }

    /// Wraps a matrix that is Hermitian PSD by construction (quadratic
    /// form); only exact re-symmetrization is applied.
    pub(crate) fn from_quadratic(r: DMatrix<Complex<R>>) -> Self {
        let sym = (&r + r.adjoint()) * Complex::new(R::of(0.5), R::zero());
        Self { r: sym }
    }

    /// The matrix itself.
    pub fn matrix(&self) -> &DMatrix<Complex<R>> {
        &self.r
    }

    /// Side length.
    pub fn dim(&self) -> usize {
        self.r.nrows()
    }
}

/// Relative projection efficiency of an estimated covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct RpeResult<R: RealScalar> {
    /// Captured-energy ratio, in `[0, 1]` up to rounding.
    pub eta: R,
    /// Subspace dimension used for both projections.
    pub m_rf: usize,
    /// Energy captured by the estimated subspace.
    pub trace_num: R,
    /// Energy captured by the true dominant subspace.
    pub trace_den: R,
    /// True when the eigenvalue at the subspace cut is (numerically) tied
    /// with the next one, making the dominant subspace ill-defined.
    pub cut_degenerate: bool,
}

/// Ground-truth spatial covariance of a low-rank channel: the sample
/// covariance of all antenna-domain fibers. With factors `(A, C, G)` it
/// collapses to `(1/(K T)) A ((C^T C~) had (G^T G~)) A^H` where `~` is the
/// entrywise conjugate, since fiber `(k, t)` is `A (c_k had g_t)`.
pub fn true_covariance<R: RealScalar>(factors: &FactorTriple<R>) -> CovarianceMatrix<R> {
    let (_, k_sbcr, t_frm) = factors.dims();
    let m = cross_gram(factors.f2(), factors.f3());
    let scale = Complex::new(R::one() / R::of_usize(k_sbcr * t_frm), R::zero());
    CovarianceMatrix::from_quadratic(factors.f1() * m * factors.f1().adjoint() * scale)
}

/// `(C^T C~) had (G^T G~)`: entry `(l, l')` sums
/// `c_{k l} conj(c_{k l'}) g_{t l} conj(g_{t l'})` over `(k, t)`, the path
/// cross-correlation seen by the fiber average.
fn cross_gram<R: RealScalar>(
    c_mat: &DMatrix<Complex<R>>,
    g_mat: &DMatrix<Complex<R>>,
) -> DMatrix<Complex<R>> {
    (c_mat.transpose() * c_mat.conjugate())
        .component_mul(&(g_mat.transpose() * g_mat.conjugate()))
}

/// Covariance rebuilt from estimated factors: steering columns `a_hat`,
/// their complex scales `delta_hat`, and the subcarrier/frame factors. The
/// estimated path permutation cancels inside the quadratic form, so it is
/// never needed explicitly.
pub fn reconstruct_covariance<R: RealScalar>(
    a_hat: &DMatrix<Complex<R>>,
    delta_hat: &DVector<Complex<R>>,
    c_hat: &DMatrix<Complex<R>>,
    g_hat: &DMatrix<Complex<R>>,
) -> Result<CovarianceMatrix<R>> {
    let l = a_hat.ncols();
    if delta_hat.len() != l || c_hat.ncols() != l || g_hat.ncols() != l {
        return Err(Error::Dimension(format!(
            "path counts disagree: {} steering columns, {} scales, {} pulse columns, {} gain columns",
            l,
            delta_hat.len(),
            c_hat.ncols(),
            g_hat.ncols()
        )));
    }
    let k_sbcr = c_hat.nrows();
    let t_frm = g_hat.nrows();
    if k_sbcr == 0 || t_frm == 0 {
        return Err(Error::Dimension(
            "need at least one subcarrier and one frame".into(),
        ));
    }
    let m = cross_gram(c_hat, g_hat);
    // The scale triple per path multiplies to one, so folding delta into the
    // steering columns makes the whole sandwich cancel: s m s^H with
    // s = a_hat diag(delta).
    let mut s = a_hat.clone();
    for j in 0..l {
        let d = delta_hat[j];
        for i in 0..s.nrows() {
            s[(i, j)] *= d;
        }
    }
    let scale = Complex::new(R::one() / R::of_usize(k_sbcr * t_frm), R::zero());
    Ok(CovarianceMatrix::from_quadratic(
        &s * m * s.adjoint() * scale,
    ))
}

/// Full covariance estimator after the decomposition: recovers one angle and
/// scale per factor column, rebuilds the array-domain steering matrix, and
/// assembles the covariance. Returns the per-path estimates alongside.
pub fn estimate_covariance<R: RealScalar>(
    factors: &FactorTriple<R>,
    comb: &HybridCombiner<R>,
    spacing_ratio: R,
) -> Result<(CovarianceMatrix<R>, Vec<AoaEstimate<R>>)> {
    let rank = factors.rank();
    let n_ant = comb.n_ant();
    let mut a_hat = DMatrix::from_element(n_ant, rank, czero::<R>());
    let mut delta = DVector::from_element(rank, czero::<R>());
    let mut estimates = Vec::with_capacity(rank);
    for j in 0..rank {
        let b = factors.f1().column(j).into_owned();
        let est = recover_aoa(&b, comb, spacing_ratio)?;
        a_hat.set_column(j, &unit_circle_steering(est.z_hat, n_ant));
        delta[j] = est.delta_hat;
        estimates.push(est);
    }
    let cov = reconstruct_covariance(&a_hat, &delta, factors.f2(), factors.f3())?;
    Ok((cov, estimates))
}

/// Relative projection efficiency: the channel energy captured by the
/// dominant `m_rf`-dimensional eigenspace of the estimate, relative to the
/// energy captured by the true dominant eigenspace.
pub fn rpe<R: RealScalar>(
    r_true: &CovarianceMatrix<R>,
    r_est: &CovarianceMatrix<R>,
    m_rf: usize,
) -> Result<RpeResult<R>> {
    let n = r_true.dim();
    if r_est.dim() != n {
        return Err(Error::Dimension(format!(
            "covariances disagree in size: {} vs {}",
            n,
            r_est.dim()
        )));
    }
    if m_rf == 0 || m_rf > n {
        return Err(Error::Dimension(format!(
            "subspace dimension {m_rf} must lie in 1..={n}"
        )));
    }
    if r_true.matrix().norm() == R::zero() {
        return Err(Error::Domain(
            "projection efficiency is undefined for a zero covariance".into(),
        ));
    }
    let eig_true = hermitian_eig_desc(r_true.matrix());
    let eig_est = hermitian_eig_desc(r_est.matrix());
    let cut_degenerate = m_rf < n && {
        let scale = eig_est.values[0].abs().max(R::default_epsilon());
        (eig_est.values[m_rf - 1] - eig_est.values[m_rf]).abs() <= R::of(1e-12) * scale
    };
    let u_true = eig_true.vectors.columns(0, m_rf);
    let u_est = eig_est.vectors.columns(0, m_rf);
    let trace_den = (u_true.adjoint() * r_true.matrix() * u_true)
        .trace()
        .real();
    let trace_num = (u_est.adjoint() * r_true.matrix() * u_est).trace().real();
    Ok(RpeResult {
        eta: trace_num / trace_den,
        m_rf,
        trace_num,
        trace_den,
        cut_degenerate,
    })
}

/// Projection efficiency of an explicitly supplied beamforming subspace:
/// the channel energy captured by the span of `basis`, relative to the
/// energy of the true dominant `m_rf`-dimensional eigenspace. Subspace
/// estimators produce a basis directly rather than a covariance estimate,
/// and the span may be narrower than `m_rf` (it then captures less energy).
/// A wider basis is rejected, which keeps the ratio in `[0, 1]`.
pub fn rpe_from_subspace<R: RealScalar>(
    r_true: &CovarianceMatrix<R>,
    basis: &DMatrix<Complex<R>>,
    m_rf: usize,
) -> Result<RpeResult<R>> {
    let n = r_true.dim();
    if basis.nrows() != n {
        return Err(Error::Dimension(format!(
            "basis has {} rows but the covariance is {n}x{n}",
            basis.nrows()
        )));
    }
    if m_rf == 0 || m_rf > n {
        return Err(Error::Dimension(format!(
            "subspace dimension {m_rf} must lie in 1..={n}"
        )));
    }
    if basis.ncols() == 0 || basis.ncols() > m_rf {
        return Err(Error::Dimension(format!(
            "basis with {} columns cannot stand in for a {m_rf}-beam front end",
            basis.ncols()
        )));
    }
    if r_true.matrix().norm() == R::zero() {
        return Err(Error::Domain(
            "projection efficiency is undefined for a zero covariance".into(),
        ));
    }
    let eig_true = hermitian_eig_desc(r_true.matrix());
    let u_true = eig_true.vectors.columns(0, m_rf);
    let trace_den = (u_true.adjoint() * r_true.matrix() * u_true)
        .trace()
        .real();
    // Projector trace onto span(basis), written in the small Gram domain so
    // the result is invariant to any invertible recombination of the columns.
    let gram = basis.adjoint() * basis;
    let projected = basis.adjoint() * r_true.matrix() * basis;
    let trace_num = (hermitian_pinv(&gram, R::of(1e-12)) * projected)
        .trace()
        .real();
    Ok(RpeResult {
        eta: trace_num / trace_den,
        m_rf,
        trace_num,
        trace_den,
        // No estimated spectrum exists here, so there is no eigenvalue cut
        // to flag.
        cut_degenerate: false,
    })
}

/// Folds an angle into the half-open ULA-unambiguous interval
/// `[-pi/2, pi/2]` by reflecting through the sine.
fn fold_angle<R: RealScalar>(phi: R) -> R {
    phi.sin().asin()
}

/// Distance between two folded angles, wrapped with period pi so that the
/// two ends of the interval are neighbors (as their steering vectors are).
fn folded_distance<R: RealScalar>(a: R, b: R) -> R {
    let d = (fold_angle(a) - fold_angle(b)).abs();
    d.min(R::pi() - d)
}

/// Minimum-cost perfect assignment on a square cost matrix; returns the
/// column assigned to each row.
fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    debug_assert_eq!(n, cost.ncols());
    // Potentials-based augmenting path method; indices are 1-based with a
    // virtual column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if matched[j] > 0 {
            row_to_col[matched[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Mean squared angular error under the best one-to-one pairing of estimated
/// and true angles (the decomposition returns paths in arbitrary order).
/// Distances are wrapped in the folded domain `[-pi/2, pi/2]`; the result is
/// in squared radians.
pub fn aoa_mse<R: RealScalar>(phi_true: &[R], phi_est: &[R]) -> Result<R> {
    if phi_true.len() != phi_est.len() {
        return Err(Error::Dimension(format!(
            "angle vectors disagree in length: {} vs {}",
            phi_true.len(),
            phi_est.len()
        )));
    }
    let n = phi_true.len();
    if n == 0 {
        return Ok(R::zero());
    }
    let cost = DMatrix::from_fn(n, n, |i, j| {
        let d = folded_distance(phi_true[i], phi_est[j]).as_f64();
        d * d
    });
    let assign = hungarian(&cost);
    let mut total = R::zero();
    for (i, &j) in assign.iter().enumerate() {
        let d = folded_distance(phi_true[i], phi_est[j]);
        total += d * d;
    }
    Ok(total / R::of_usize(n))
}

/// Analytic lower bound on the expected projection-efficiency loss
/// `1 - E[eta]` implied by the angle CRLBs:
/// `(n_ant^2 pi^2 spacing^2 / (3 L)) sum_l cos^2(phi_l) crlb_l`.
pub fn rpe_lower_bound<R: RealScalar>(
    phi_true: &[R],
    crlb_phi: &[R],
    n_ant: usize,
    spacing_ratio: R,
) -> Result<R> {
    if phi_true.len() != crlb_phi.len() {
        return Err(Error::Dimension(format!(
            "angle and CRLB vectors disagree in length: {} vs {}",
            phi_true.len(),
            crlb_phi.len()
        )));
    }
    if phi_true.is_empty() {
        return Ok(R::zero());
    }
    let n = R::of_usize(n_ant);
    let l = R::of_usize(phi_true.len());
    let lead = n * n * R::pi() * R::pi() * spacing_ratio * spacing_ratio
        / (R::of(3.0) * l);
    let sum = phi_true
        .iter()
        .zip(crlb_phi.iter())
        .fold(R::zero(), |acc, (&phi, &c)| {
            let cs = phi.cos();
            acc + cs * cs * c
        });
    Ok(lead * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{draw_combiner, measure};
    use crate::als::{cpd_als, AlsOptions};
    use crate::channel::{array_response, channel_tensor, draw_scene, SceneConfig, SceneKind};
    use crate::sampling::complex_randn;
    use crate::tensor::Mode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        Complex::new(re, im)
    }

    fn random_cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C> {
        DMatrix::from_fn(rows, cols, |_, _| complex_randn::<f64>(rng))
    }

    fn small_scene(rng: &mut ChaCha8Rng) -> crate::channel::ChannelScene<f64> {
        let cfg = SceneConfig {
            n_ant: 8,
            k_sbcr: 12,
            t_frm: 5,
            n_cp: 3,
            spacing_ratio: 0.5,
            kind: SceneKind::Discrete { n_paths: 3 },
        };
        draw_scene(&cfg, rng).unwrap()
    }

    #[test]
    fn single_path_unit_everything_gives_rank_one_outer_product() {
        let a = array_response(0.37f64, 6, 0.5);
        let factors = FactorTriple::new(
            DMatrix::from_columns(&[a.clone()]),
            DMatrix::from_element(10, 1, c(1.0, 0.0)),
            DMatrix::from_element(4, 1, c(1.0, 0.0)),
        )
        .unwrap();
        let cov = true_covariance(&factors);
        let want = &a * a.adjoint();
        assert!(
            (cov.matrix() - &want).norm() < 1e-12 * want.norm(),
            "all-ones pulse and gains must collapse to a a*"
        );
    }

    #[test]
    fn true_covariance_matches_fiber_sample_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scene = small_scene(&mut rng);
        let (h, factors) = channel_tensor(&scene);
        let cov = true_covariance(&factors);
        let h1 = h.unfold(Mode::One);
        let want = &h1 * h1.adjoint() / c((scene.k_sbcr() * scene.t_frm()) as f64, 0.0);
        assert!(
            (cov.matrix() - &want).norm() < 1e-10 * want.norm(),
            "factor form must equal the brute-force fiber average"
        );
    }

    #[test]
    fn scaling_gains_scales_covariance_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let scene = small_scene(&mut rng);
        let (_, factors) = channel_tensor(&scene);
        let alpha = c(0.0, -1.5);
        let scaled = FactorTriple::new(
            factors.f1().clone(),
            factors.f2().clone(),
            factors.f3().map(|g| g * alpha),
        )
        .unwrap();
        let r1 = true_covariance(&factors);
        let r2 = true_covariance(&scaled);
        let want = r1.matrix() * c(alpha.norm_sqr(), 0.0);
        assert!((r2.matrix() - &want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn perfect_factors_reconstruct_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scene = small_scene(&mut rng);
        let (_, factors) = channel_tensor(&scene);
        let r_true = true_covariance(&factors);
        // Permute paths and spread an arbitrary scale triple with unit product
        // across the factors.
        let perm = [2usize, 0, 1];
        let d_b = [c(0.5, 0.8), c(-1.2, 0.1), c(0.0, 2.0)];
        let d_c = [c(1.0, -1.0), c(0.3, 0.0), c(0.0, -0.5)];
        let l = 3;
        let mut a_hat = DMatrix::from_element(8, l, c(0.0, 0.0));
        let mut c_hat = DMatrix::from_element(12, l, c(0.0, 0.0));
        let mut g_hat = DMatrix::from_element(5, l, c(0.0, 0.0));
        let mut delta = DVector::from_element(l, c(0.0, 0.0));
        for j in 0..l {
            let src = perm[j];
            let d_g = (d_b[j] * d_c[j]).inv();
            a_hat.set_column(j, &factors.f1().column(src));
            c_hat.set_column(j, &factors.f2().column(src).map(|v| v * d_c[j]));
            g_hat.set_column(j, &factors.f3().column(src).map(|v| v * d_g));
            delta[j] = d_b[j];
        }
        let r_est = reconstruct_covariance(&a_hat, &delta, &c_hat, &g_hat).unwrap();
        assert!(
            (r_est.matrix() - r_true.matrix()).norm() < 1e-10 * r_true.matrix().norm(),
            "permutation and unit-product scalings must cancel exactly"
        );
    }

    #[test]
    fn noiseless_pipeline_reconstructs_the_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = SceneConfig {
            n_ant: 16,
            k_sbcr: 16,
            t_frm: 8,
            n_cp: 4,
            spacing_ratio: 0.5,
            kind: SceneKind::Discrete { n_paths: 3 },
        };
        let scene = draw_scene(&cfg, &mut rng).unwrap();
        let (h, factors) = channel_tensor(&scene);
        let comb = draw_combiner::<f64>(16, 6, &mut rng).unwrap();
        let y = measure(&h, &comb, 0.0, &mut rng).unwrap();
        let (est_factors, diag) = cpd_als(&y, &AlsOptions::new(3), &mut rng).unwrap();
        assert!(diag.final_residual < 1e-8, "noiseless fit should be exact");
        let (r_est, estimates) = estimate_covariance(&est_factors, &comb, 0.5).unwrap();
        let r_true = true_covariance(&factors);
        let rel = (r_est.matrix() - r_true.matrix()).norm() / r_true.matrix().norm();
        assert!(
            rel <= 1e-6,
            "noiseless end-to-end reconstruction error {rel} too large"
        );
        assert_eq!(estimates.len(), 3);
        let mse = aoa_mse(
            scene.aoas_rad(),
            &estimates.iter().map(|e| e.phi_hat).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!(mse < 1e-10, "noiseless angle recovery should be exact, got {mse}");
    }

    #[test]
    fn arbitrary_reconstruction_is_hermitian_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let a_hat = random_cmat(&mut rng, 6, 3);
            let c_hat = random_cmat(&mut rng, 7, 3);
            let g_hat = random_cmat(&mut rng, 4, 3);
            let delta = DVector::from_fn(3, |_, _| complex_randn::<f64>(&mut rng));
            let r = reconstruct_covariance(&a_hat, &delta, &c_hat, &g_hat).unwrap();
            let m = r.matrix();
            assert!((m - m.adjoint()).norm() <= 1e-10 * m.norm().max(1e-300));
            let eig = hermitian_eig_desc(m);
            assert!(
                eig.values[5] >= -1e-10 * eig.values[0].abs(),
                "quadratic form produced a negative eigenvalue"
            );
            // Rank cannot exceed the path count.
            assert!(
                eig.values[3] <= 1e-10 * eig.values[0].max(1e-300),
                "rank must not exceed the number of paths"
            );
        }
    }

    #[test]
    fn reconstruction_rejects_inconsistent_path_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a_hat = random_cmat(&mut rng, 6, 3);
        let c_hat = random_cmat(&mut rng, 7, 2);
        let g_hat = random_cmat(&mut rng, 4, 3);
        let delta = DVector::from_element(3, c(1.0, 0.0));
        assert!(matches!(
            reconstruct_covariance(&a_hat, &delta, &c_hat, &g_hat),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn covariance_constructor_validates_hermitian_and_psd() {
        let mut bad = DMatrix::from_element(2, 2, c(0.0, 0.0));
        bad[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(CovarianceMatrix::new(bad), Err(Error::Domain(_))));
        let mut indef = DMatrix::from_element(2, 2, c(0.0, 0.0));
        indef[(0, 0)] = c(1.0, 0.0);
        indef[(1, 1)] = c(-1.0, 0.0);
        assert!(matches!(
            CovarianceMatrix::new(indef),
            Err(Error::Domain(_))
        ));
        let rect = DMatrix::from_element(2, 3, c(0.0, 0.0));
        assert!(matches!(
            CovarianceMatrix::new(rect),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rpe_of_identical_covariances_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scene = small_scene(&mut rng);
        let (_, factors) = channel_tensor(&scene);
        let r = true_covariance(&factors);
        let res = rpe(&r, &r, 4).unwrap();
        assert!(
            (res.eta - 1.0).abs() < 1e-12,
            "perfect estimate must capture all energy, got {}",
            res.eta
        );
        assert!(res.eta <= 1.0 + 1e-10);
    }

    #[test]
    fn rpe_vanishes_when_estimate_spans_the_null_space() {
        let mut r_true = DMatrix::from_element(4, 4, c(0.0, 0.0));
        r_true[(0, 0)] = c(1.0, 0.0);
        let mut r_est = DMatrix::from_element(4, 4, c(0.0, 0.0));
        r_est[(2, 2)] = c(2.0, 0.0);
        r_est[(3, 3)] = c(1.0, 0.0);
        let rt = CovarianceMatrix::new(r_true).unwrap();
        let re = CovarianceMatrix::new(r_est).unwrap();
        let res = rpe(&rt, &re, 2).unwrap();
        assert_eq!(res.eta, 0.0, "orthogonal estimate captures nothing");
    }

    #[test]
    fn rpe_matches_single_path_beam_overlap() {
        // One path at phi, estimate at phi plus a tenth of a degree: eta
        // reduces to the squared normalized array-response correlation.
        let n = 64;
        let phi = 0.3f64;
        let e = 0.1f64.to_radians();
        let a1 = array_response(phi, n, 0.5);
        let a2 = array_response(phi + e, n, 0.5);
        let r1 = CovarianceMatrix::from_quadratic(&a1 * a1.adjoint());
        let r2 = CovarianceMatrix::from_quadratic(&a2 * a2.adjoint());
        let res = rpe(&r1, &r2, 1).unwrap();
        let overlap = a1.dotc(&a2).norm_sqr() / (n as f64 * n as f64);
        assert!(
            (res.eta - overlap).abs() < 1e-3,
            "eta {} should match beam overlap {}",
            res.eta,
            overlap
        );
    }

    #[test]
    fn rpe_depends_only_on_the_dominant_eigenspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scene = small_scene(&mut rng);
        let (_, factors) = channel_tensor(&scene);
        let r = true_covariance(&factors);
        let b = random_cmat(&mut rng, 8, 8);
        let other = CovarianceMatrix::from_quadratic(&b * b.adjoint());
        let squared =
            CovarianceMatrix::from_quadratic(other.matrix() * other.matrix());
        let e1 = rpe(&r, &other, 3).unwrap();
        let e2 = rpe(&r, &squared, 3).unwrap();
        assert!(
            (e1.eta - e2.eta).abs() < 1e-10,
            "squaring preserves eigenvectors, so eta must not move"
        );
    }

    #[test]
    fn rpe_ignores_positive_scaling_of_either_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_cmat(&mut rng, 6, 4);
        let b = random_cmat(&mut rng, 6, 4);
        let ra = CovarianceMatrix::from_quadratic(&a * a.adjoint());
        let rb = CovarianceMatrix::from_quadratic(&b * b.adjoint());
        let ra5 = CovarianceMatrix::from_quadratic(ra.matrix() * c(5.0, 0.0));
        let rb3 = CovarianceMatrix::from_quadratic(rb.matrix() * c(0.3, 0.0));
        let e1 = rpe(&ra, &rb, 2).unwrap();
        let e2 = rpe(&ra5, &rb3, 2).unwrap();
        assert!((e1.eta - e2.eta).abs() < 1e-12);
    }

    #[test]
    fn rpe_rejects_zero_truth_and_bad_dims() {
        let z = CovarianceMatrix::new(DMatrix::from_element(3, 3, c(0.0, 0.0))).unwrap();
        let id = CovarianceMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(rpe(&z, &id, 2), Err(Error::Domain(_))));
        let small = CovarianceMatrix::new(DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(rpe(&id, &small, 2), Err(Error::Dimension(_))));
        assert!(matches!(rpe(&id, &id, 0), Err(Error::Dimension(_))));
        assert!(matches!(rpe(&id, &id, 4), Err(Error::Dimension(_))));
    }

    #[test]
    fn subspace_rpe_agrees_with_covariance_rpe_on_its_eigenvectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let scene = small_scene(&mut rng);
        let (_, factors) = channel_tensor(&scene);
        let r = true_covariance(&factors);
        let b = random_cmat(&mut rng, 8, 5);
        let est = CovarianceMatrix::from_quadratic(&b * b.adjoint());
        let via_cov = rpe(&r, &est, 3).unwrap();
        let top = hermitian_eig_desc(est.matrix()).vectors.columns(0, 3).into_owned();
        let via_basis = rpe_from_subspace(&r, &top, 3).unwrap();
        assert!(
            (via_cov.eta - via_basis.eta).abs() < 1e-10,
            "handing over the dominant eigenvectors directly must not change eta: {} vs {}",
            via_cov.eta,
            via_basis.eta
        );
    }

    #[test]
    fn subspace_rpe_sees_only_the_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let scene = small_scene(&mut rng);
        let (_, factors) = channel_tensor(&scene);
        let r = true_covariance(&factors);
        let basis = random_cmat(&mut rng, 8, 3);
        let mix = random_cmat(&mut rng, 3, 3);
        let e1 = rpe_from_subspace(&r, &basis, 4).unwrap();
        let e2 = rpe_from_subspace(&r, &(&basis * &mix), 4).unwrap();
        assert!(
            (e1.eta - e2.eta).abs() < 1e-9,
            "recombining basis columns keeps the span, so eta must not move: {} vs {}",
            e1.eta,
            e2.eta
        );
        assert!(e1.eta >= 0.0 && e1.eta <= 1.0 + 1e-10);
    }

    #[test]
    fn subspace_rpe_rejects_misshapen_bases() {
        let id = CovarianceMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let wide = DMatrix::from_element(4, 3, c(1.0, 0.0));
        assert!(
            matches!(rpe_from_subspace(&id, &wide, 2), Err(Error::Dimension(_))),
            "basis wider than the beam count would let eta exceed one"
        );
        let empty = DMatrix::from_element(4, 0, c(0.0, 0.0));
        assert!(matches!(rpe_from_subspace(&id, &empty, 2), Err(Error::Dimension(_))));
        let short = DMatrix::from_element(3, 2, c(1.0, 0.0));
        assert!(matches!(rpe_from_subspace(&id, &short, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn hungarian_matches_brute_force_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let n = 4;
            let cost = DMatrix::from_fn(n, n, |_, _| {
                rand::Rng::random::<f64>(&mut rng) * 10.0
            });
            let assign = hungarian(&cost);
            let got: f64 = assign
                .iter()
                .enumerate()
                .map(|(i, &j)| cost[(i, j)])
                .sum();
            // Brute force over all 24 permutations.
            let mut best = f64::INFINITY;
            let perms = [
                [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1],
                [0, 3, 1, 2], [0, 3, 2, 1], [1, 0, 2, 3], [1, 0, 3, 2],
                [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
                [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0],
                [2, 3, 0, 1], [2, 3, 1, 0], [3, 0, 1, 2], [3, 0, 2, 1],
                [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
            ];
            for p in perms {
                let total: f64 = p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
                if total < best {
                    best = total;
                }
            }
            assert!(
                (got - best).abs() < 1e-9,
                "assignment cost {got} is not optimal {best}"
            );
            // The assignment must be a permutation.
            let mut seen = [false; 4];
            for &j in &assign {
                assert!(!seen[j], "column {j} assigned twice");
                seen[j] = true;
            }
        }
    }

    #[test]
    fn aoa_mse_basic_cases() {
        assert_eq!(aoa_mse::<f64>(&[0.1, -0.4], &[0.1, -0.4]).unwrap(), 0.0);
        let single = aoa_mse(&[0.2f64], &[0.21]).unwrap();
        assert!((single - 1e-4).abs() < 1e-12);
        let permuted = aoa_mse(&[0.1f64, -0.3, 0.7], &[0.7, 0.1, -0.3]).unwrap();
        assert!(permuted < 1e-20, "pairing must absorb permutations");
        assert!(matches!(
            aoa_mse(&[0.1f64], &[0.1, 0.2]),
            Err(Error::Dimension(_))
        ));
        assert_eq!(aoa_mse::<f64>(&[], &[]).unwrap(), 0.0);
    }

    #[test]
    fn aoa_mse_folds_mirror_angles_together() {
        // pi - 0.1 and 0.1 share a sine, hence a steering vector.
        let mse = aoa_mse(&[std::f64::consts::PI - 0.1], &[0.1f64]).unwrap();
        assert!(mse < 1e-20, "mirror angles must be identified, got {mse}");
    }

    #[test]
    fn aoa_mse_wraps_at_the_interval_ends() {
        let a = std::f64::consts::FRAC_PI_2 - 0.01;
        let b = -(std::f64::consts::FRAC_PI_2 - 0.01);
        let mse = aoa_mse(&[a], &[b]).unwrap();
        assert!(
            (mse - 0.02f64.powi(2)).abs() < 1e-10,
            "interval endpoints are neighbors, got {mse}"
        );
    }

    #[test]
    fn rpe_lower_bound_closed_forms() {
        assert_eq!(
            rpe_lower_bound(&[0.3f64, -0.2], &[0.0, 0.0], 64, 0.5).unwrap(),
            0.0
        );
        let endfire = rpe_lower_bound(
            &[std::f64::consts::FRAC_PI_2],
            &[1e-3f64],
            16,
            0.5,
        )
        .unwrap();
        assert!(endfire < 1e-30, "cos^2 kills endfire contributions");
        let c_val = 2.5e-6f64;
        let single = rpe_lower_bound(&[0.0f64], &[c_val], 32, 0.5).unwrap();
        let want =
            (32.0f64 * 32.0 * std::f64::consts::PI.powi(2) * 0.25 / 3.0) * c_val;
        assert!((single - want).abs() < 1e-15 * want);
        assert!(matches!(
            rpe_lower_bound(&[0.0f64], &[1.0, 2.0], 8, 0.5),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn degenerate_eigenvalue_cut_is_flagged() {
        let id = CovarianceMatrix::new(DMatrix::<C>::identity(4, 4)).unwrap();
        let mut distinct = DMatrix::from_element(4, 4, c(0.0, 0.0));
        for i in 0..4 {
            distinct[(i, i)] = c((4 - i) as f64, 0.0);
        }
        let rd = CovarianceMatrix::new(distinct).unwrap();
        assert!(rpe(&rd, &id, 2).unwrap().cut_degenerate);
        assert!(!rpe(&id, &rd, 2).unwrap().cut_degenerate);
    }
}
