//! Cramer-Rao lower bounds for the angle estimates.
//!
//! The deterministic-parameter bound treats angles, delays, and per-frame
//! gains as unknowns of the whitened measurement model and eliminates the
//! nuisance blocks through a Schur complement. The gain block of the Fisher
//! information has Kronecker structure (gains enter one frame at a time), so
//! the elimination never forms the full gain-sized matrices: every reduction
//! collapses to path-by-path Hadamard products. A finite-difference Fisher
//! information is provided as an independent cross-check, and a separate
//! bound covers the subspace (MUSIC-style) estimator that ignores the
//! factorization structure.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use crate::acquisition::HybridCombiner;
use crate::channel::{array_response, pulse_coeffs, pulse_coeffs_derivative, ChannelScene};
use crate::linalg::hermitian_inv_checked;
use crate::tensor::{from_factors, ComplexTensor3, FactorTriple};
use crate::{czero, Error, RealScalar, Result};

/// Condition-number ceiling for every inversion inside the bound; scenes
/// beyond it are reported as degenerate rather than silently regularized.
const COND_LIMIT: f64 = 1e12;

/// Fisher information of the measurement tensor with respect to the
/// parameter stack `[angles, delays, gains, conj(gains)]`. Gains are
/// vectorized path-major (frame index fastest). The real blocks use the
/// real-parameter convention; the gain blocks use the complex (augmented)
/// convention, under which the gain/conjugate-gain cross block vanishes.
#[derive(Debug, Clone)]
pub struct FimBlocks<R: RealScalar> {
    /// Angle-angle block, `L x L` real symmetric.
    pub omega_phi_phi: DMatrix<R>,
    /// Delay-delay block, `L x L` real symmetric.
    pub omega_tau_tau: DMatrix<R>,
    /// Angle-delay block, `L x L` real.
    pub omega_phi_tau: DMatrix<R>,
    /// Gain-gain block, `TL x TL` complex Hermitian, equal to a path
    /// cross-Gram Kronecker the frame identity.
    pub omega_gg: DMatrix<Complex<R>>,
    /// Angle-gain block, `L x TL` complex.
    pub omega_phi_g: DMatrix<Complex<R>>,
    /// Delay-gain block, `L x TL` complex.
    pub omega_tau_g: DMatrix<Complex<R>>,
    // Path-sized cores behind the structured elimination; all carry the
    // 1/sigma^2 scaling already.
    h_core: DMatrix<Complex<R>>,
    f_core: DMatrix<Complex<R>>,
    e_core: DMatrix<Complex<R>>,
    g_gram: DMatrix<Complex<R>>,
    n_paths: usize,
    t_frm: usize,
}

fn to_complex<R: RealScalar>(m: &DMatrix<R>) -> DMatrix<Complex<R>> {
    m.map(|x| Complex::new(x, R::zero()))
}

fn real_part<R: RealScalar>(m: &DMatrix<Complex<R>>) -> DMatrix<R> {
    m.map(|z| z.re)
}

impl<R: RealScalar> FimBlocks<R> {
    /// Number of propagation paths.
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    /// Number of frames.
    pub fn t_frm(&self) -> usize {
        self.t_frm
    }

    /// Angle-to-nuisance coupling row `[omega_phi_tau, omega_phi_g,
    /// conj(omega_phi_g)]`, `L x (L + 2TL)`.
    pub fn omega_1(&self) -> DMatrix<Complex<R>> {
        let l = self.n_paths;
        let tl = self.t_frm * l;
        let mut m = DMatrix::from_element(l, l + 2 * tl, czero::<R>());
        m.view_mut((0, 0), (l, l)).copy_from(&to_complex(&self.omega_phi_tau));
        m.view_mut((0, l), (l, tl)).copy_from(&self.omega_phi_g);
        m.view_mut((0, l + tl), (l, tl))
            .copy_from(&self.omega_phi_g.conjugate());
        m
    }

    /// Nuisance-parameter information `[[omega_tau_tau, omega_tau_g,
    /// conj(omega_tau_g)], [., omega_gg, 0], [., 0, conj(omega_gg)]]`,
    /// `(L + 2TL)` square Hermitian.
    pub fn omega_2(&self) -> DMatrix<Complex<R>> {
        let l = self.n_paths;
        let tl = self.t_frm * l;
        let n = l + 2 * tl;
        let mut m = DMatrix::from_element(n, n, czero::<R>());
        m.view_mut((0, 0), (l, l)).copy_from(&to_complex(&self.omega_tau_tau));
        m.view_mut((0, l), (l, tl)).copy_from(&self.omega_tau_g);
        m.view_mut((0, l + tl), (l, tl))
            .copy_from(&self.omega_tau_g.conjugate());
        m.view_mut((l, 0), (tl, l)).copy_from(&self.omega_tau_g.adjoint());
        m.view_mut((l + tl, 0), (tl, l))
            .copy_from(&self.omega_tau_g.transpose());
        m.view_mut((l, l), (tl, tl)).copy_from(&self.omega_gg);
        m.view_mut((l + tl, l + tl), (tl, tl))
            .copy_from(&self.omega_gg.conjugate());
        m
    }

    /// The complete augmented Fisher information with the angle block in the
    /// leading position, `(2L + 2TL)` square Hermitian PSD.
    pub fn full_fim(&self) -> DMatrix<Complex<R>> {
        let l = self.n_paths;
        let o1 = self.omega_1();
        let o2 = self.omega_2();
        let n = l + o2.nrows();
        let mut m = DMatrix::from_element(n, n, czero::<R>());
        m.view_mut((0, 0), (l, l)).copy_from(&to_complex(&self.omega_phi_phi));
        m.view_mut((0, l), (l, o1.ncols())).copy_from(&o1);
        m.view_mut((l, 0), (o1.ncols(), l)).copy_from(&o1.adjoint());
        m.view_mut((l, l), (o2.nrows(), o2.ncols())).copy_from(&o2);
        m
    }
}

/// Log-likelihood of a measurement tensor under the whitened model: with
/// mean built from the scene through the combiner and i.i.d. circular noise
/// of standard deviation `sigma`,
/// `f = -MKT ln(pi sigma^2) - ||Y - mean||^2 / sigma^2`.
pub fn log_likelihood<R: RealScalar>(
    y: &ComplexTensor3<R>,
    scene: &ChannelScene<R>,
    comb: &HybridCombiner<R>,
    sigma: R,
) -> Result<R> {
    if sigma <= R::zero() {
        return Err(Error::Domain(format!(
            "noise level must be positive, got {sigma:?}"
        )));
    }
    let (b, _, c, _, g) = model_matrices(scene, comb)?;
    let mean = from_factors(&FactorTriple::new(b, c, g.clone())?);
    if y.dims() != mean.dims() {
        return Err(Error::Dimension(format!(
            "measurement dims {:?} do not match model dims {:?}",
            y.dims(),
            mean.dims()
        )));
    }
    let mut res = R::zero();
    for (yi, mi) in y.data().iter().zip(mean.data().iter()) {
        res += (yi - mi).modulus_squared();
    }
    let (m, k, t) = y.dims();
    let mkt = R::of_usize(m * k * t);
    Ok(-mkt * (R::pi() * sigma * sigma).ln() - res / (sigma * sigma))
}

/// Derivative of the combined array response `W^H a(phi)` with respect to
/// the angle: `W^H diag(j 2 pi s n cos phi) a(phi)` over antennas `n`.
pub fn steering_derivative<R: RealScalar>(
    phi: R,
    n_ant: usize,
    spacing_ratio: R,
    comb: &HybridCombiner<R>,
) -> DVector<Complex<R>> {
    let a = array_response(phi, n_ant, spacing_ratio);
    let two_pi_s_cos = R::of(2.0) * R::pi() * spacing_ratio * phi.cos();
    let scaled = DVector::from_fn(n_ant, |n, _| {
        a[n] * Complex::new(R::zero(), two_pi_s_cos * R::of_usize(n))
    });
    comb.w().adjoint() * scaled
}

/// Model factor matrices through the combiner: `(B, B_dot, C, C_dot, G)`
/// with `B = W^H A` and the dotted versions the per-path derivatives in
/// angle and delay.
fn model_matrices<R: RealScalar>(
    scene: &ChannelScene<R>,
    comb: &HybridCombiner<R>,
) -> Result<(
    DMatrix<Complex<R>>,
    DMatrix<Complex<R>>,
    DMatrix<Complex<R>>,
    DMatrix<Complex<R>>,
    DMatrix<Complex<R>>,
)> {
    if comb.n_ant() != scene.n_ant() {
        return Err(Error::Dimension(format!(
            "combiner is for {} antennas but the scene has {}",
            comb.n_ant(),
            scene.n_ant()
        )));
    }
    let l = scene.n_paths();
    let (m_rf, k, n_cp) = (comb.m_rf(), scene.k_sbcr(), scene.n_cp());
    let w_adj = comb.w().adjoint();
    let mut b = DMatrix::from_element(m_rf, l, czero::<R>());
    let mut b_dot = DMatrix::from_element(m_rf, l, czero::<R>());
    let mut c = DMatrix::from_element(k, l, czero::<R>());
    let mut c_dot = DMatrix::from_element(k, l, czero::<R>());
    for j in 0..l {
        let phi = scene.aoas_rad()[j];
        let a = array_response(phi, scene.n_ant(), scene.spacing_ratio());
        b.set_column(j, &(&w_adj * a));
        b_dot.set_column(
            j,
            &steering_derivative(phi, scene.n_ant(), scene.spacing_ratio(), comb),
        );
        let tau = scene.delays()[j];
        c.set_column(j, &pulse_coeffs(tau, k, n_cp)?);
        c_dot.set_column(j, &pulse_coeffs_derivative(tau, k, n_cp)?);
    }
    Ok((b, b_dot, c, c_dot, scene.gains().clone()))
}

/// All Fisher information blocks of the whitened model at the true scene
/// parameters. Every block carries an explicit `1/sigma^2`.
pub fn fim_blocks<R: RealScalar>(
    scene: &ChannelScene<R>,
    comb: &HybridCombiner<R>,
    sigma: R,
) -> Result<FimBlocks<R>> {
    if sigma <= R::zero() {
        return Err(Error::Domain(format!(
            "noise level must be positive, got {sigma:?}"
        )));
    }
    let (b, b_dot, c, c_dot, g) = model_matrices(scene, comb)?;
    let l = scene.n_paths();
    let t = scene.t_frm();
    let inv_s2 = R::one() / (sigma * sigma);
    let cs2 = Complex::new(inv_s2, R::zero());
    let two_s2 = Complex::new(R::of(2.0) * inv_s2, R::zero());

    let bb = b.adjoint() * &b;
    let bdbd = b_dot.adjoint() * &b_dot;
    let bdb = b_dot.adjoint() * &b;
    let cc = c.adjoint() * &c;
    let cdcd = c_dot.adjoint() * &c_dot;
    let ccd = c.adjoint() * &c_dot;
    let cdc = c_dot.adjoint() * &c;
    let gg = g.adjoint() * &g;

    let omega_phi_phi = real_part(&(bdbd.component_mul(&cc).component_mul(&gg) * two_s2));
    let omega_tau_tau = real_part(&(bb.component_mul(&cdcd).component_mul(&gg) * two_s2));
    let omega_phi_tau = real_part(&(bdb.component_mul(&ccd).component_mul(&gg) * two_s2));

    let h_core = bb.component_mul(&cc) * cs2;
    let f_core = bdb.component_mul(&cc) * cs2;
    let e_core = bb.component_mul(&cdc) * cs2;

    let omega_gg = h_core.kronecker(&DMatrix::<Complex<R>>::identity(t, t));
    // Row l, column block l' of the angle-gain coupling scales the core by
    // the conjugated gains of the ROW path at each frame.
    let fill_gain_block = |core: &DMatrix<Complex<R>>| {
        DMatrix::from_fn(l, t * l, |row, col| {
            let lp = col / t;
            let tt = col % t;
            core[(row, lp)] * g[(tt, row)].conj()
        })
    };
    let omega_phi_g = fill_gain_block(&f_core);
    let omega_tau_g = fill_gain_block(&e_core);

    Ok(FimBlocks {
        omega_phi_phi,
        omega_tau_tau,
        omega_phi_tau,
        omega_gg,
        omega_phi_g,
        omega_tau_g,
        h_core,
        f_core,
        e_core,
        g_gram: gg,
        n_paths: l,
        t_frm: t,
    })
}

fn degenerate(what: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Numerical(format!("degenerate scene: {what} not invertible ({e})"))
}

/// Per-angle Cramer-Rao bounds after eliminating delays and gains: the
/// diagonal of the inverted angle Schur complement. The gain elimination
/// uses the Kronecker structure of the gain block, so only path-sized
/// matrices are ever inverted.
pub fn crlb_phi<R: RealScalar>(blocks: &FimBlocks<R>) -> Result<DVector<R>> {
    let l = blocks.n_paths;
    let two = Complex::new(R::of(2.0), R::zero());
    let h_inv =
        hermitian_inv_checked(&blocks.h_core, R::of(COND_LIMIT)).map_err(degenerate("gain information"))?;
    let gg = &blocks.g_gram;
    // Eliminating both gain blocks leaves path-sized couplings; the pair of
    // conjugate blocks contributes twice the real part.
    let fhf = (&blocks.f_core * &h_inv * blocks.f_core.adjoint()).component_mul(gg);
    let fhe = (&blocks.f_core * &h_inv * blocks.e_core.adjoint()).component_mul(gg);
    let ehe = (&blocks.e_core * &h_inv * blocks.e_core.adjoint()).component_mul(gg);
    let q_dq = fhf.map(|z| Complex::new(z.re, R::zero())) * two;
    let q_dr = fhe.map(|z| Complex::new(z.re, R::zero())) * two;
    let r_dr = ehe.map(|z| Complex::new(z.re, R::zero())) * two;

    let s_tau = to_complex(&blocks.omega_tau_tau) - r_dr;
    let s_tau_inv =
        hermitian_inv_checked(&s_tau, R::of(COND_LIMIT)).map_err(degenerate("delay information"))?;
    let x = to_complex(&blocks.omega_phi_tau) - q_dr;
    let schur = to_complex(&blocks.omega_phi_phi) - q_dq - &x * s_tau_inv * x.adjoint();
    let schur_inv =
        hermitian_inv_checked(&schur, R::of(COND_LIMIT)).map_err(degenerate("angle information"))?;
    let mut out = DVector::from_element(l, R::zero());
    for i in 0..l {
        let v = schur_inv[(i, i)].re;
        if !(v > R::zero()) {
            return Err(Error::Numerical(format!(
                "angle bound {i} is not positive: {v:?}"
            )));
        }
        out[i] = v;
    }
    Ok(out)
}

/// Scaling convention for the subspace-estimator bound's leading factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MusicCrlbScale {
    /// `sigma^2 / 2`: the noise-power convention consistent with the tensor
    /// bound's scaling. Default.
    NoisePower,
    /// `sigma / 2`: alternative amplitude convention, kept selectable for
    /// comparison.
    PrintedAmplitude,
}

/// Angle bound for a subspace estimator that treats the combined steering
/// matrix directly, with the noise-power convention.
pub fn music_crlb<R: RealScalar>(
    scene: &ChannelScene<R>,
    comb: &HybridCombiner<R>,
    sigma: R,
) -> Result<DVector<R>> {
    music_crlb_scaled(scene, comb, sigma, MusicCrlbScale::NoisePower)
}

/// [`music_crlb`] with an explicit choice of leading-factor convention.
/// The bound is the diagonal of
/// `scale * (sum_{t,k} Re(Z_{t,k}^H B_dot^H P B_dot Z_{t,k}))^{-1}` with
/// `P` the projector onto the orthogonal complement of the steering range
/// and `Z_{t,k} = diag(g_t had c_k)`; the sum collapses to a single
/// Hadamard product of path Grams.
pub fn music_crlb_scaled<R: RealScalar>(
    scene: &ChannelScene<R>,
    comb: &HybridCombiner<R>,
    sigma: R,
    scale: MusicCrlbScale,
) -> Result<DVector<R>> {
    if sigma <= R::zero() {
        return Err(Error::Domain(format!(
            "noise level must be positive, got {sigma:?}"
        )));
    }
    let l = scene.n_paths();
    if l > comb.m_rf() {
        return Err(Error::NotApplicable(format!(
            "subspace bound needs at least as many chains as paths ({} < {l})",
            comb.m_rf()
        )));
    }
    let (b, b_dot, c, _, g) = model_matrices(scene, comb)?;
    let bb = b.adjoint() * &b;
    let bb_inv = hermitian_inv_checked(&bb, R::of(COND_LIMIT))
        .map_err(degenerate("steering Gram"))?;
    let proj = DMatrix::<Complex<R>>::identity(comb.m_rf(), comb.m_rf())
        - &b * bb_inv * b.adjoint();
    let m0 = b_dot.adjoint() * proj * &b_dot;
    let weights = (g.adjoint() * &g).component_mul(&(c.adjoint() * &c));
    let s_mat = m0
        .component_mul(&weights)
        .map(|z| Complex::new(z.re, R::zero()));
    let s_inv = hermitian_inv_checked(&s_mat, R::of(COND_LIMIT))
        .map_err(degenerate("subspace curvature"))?;
    let factor = match scale {
        MusicCrlbScale::NoisePower => sigma * sigma / R::of(2.0),
        MusicCrlbScale::PrintedAmplitude => sigma / R::of(2.0),
    };
    let mut out = DVector::from_element(l, R::zero());
    for i in 0..l {
        let v = s_inv[(i, i)].re * factor;
        if !(v > R::zero()) {
            return Err(Error::Numerical(format!(
                "subspace bound {i} is not positive: {v:?}"
            )));
        }
        out[i] = v;
    }
    Ok(out)
}

/// Independent Fisher information via central finite differences of the
/// model mean, assembled in the same augmented parameter convention as
/// [`fim_blocks`] (`[angles, delays, gains, conj(gains)]`). Intended for
/// validating the analytic blocks on small instances; delays must lie
/// strictly inside `(0, n_cp)` so the differencing stays in range.
pub fn fim_finite_difference<R: RealScalar>(
    scene: &ChannelScene<R>,
    comb: &HybridCombiner<R>,
    sigma: R,
) -> Result<DMatrix<Complex<R>>> {
    if sigma <= R::zero() {
        return Err(Error::Domain(format!(
            "noise level must be positive, got {sigma:?}"
        )));
    }
    if comb.n_ant() != scene.n_ant() {
        return Err(Error::Dimension(
            "combiner and scene antenna counts differ".into(),
        ));
    }
    let l = scene.n_paths();
    let t = scene.t_frm();
    let n_params = 2 * l + 2 * t * l;
    // Real parameter stack: angles, delays, Re gains, Im gains (path-major,
    // frame fastest).
    let mut rho = Vec::with_capacity(n_params);
    rho.extend_from_slice(scene.aoas_rad());
    rho.extend_from_slice(scene.delays());
    for j in 0..l {
        for tt in 0..t {
            rho.push(scene.gains()[(tt, j)].re);
        }
    }
    for j in 0..l {
        for tt in 0..t {
            rho.push(scene.gains()[(tt, j)].im);
        }
    }

    let mean_of = |rho: &[R]| -> Result<DMatrix<Complex<R>>> {
        let mut a = DMatrix::from_element(scene.n_ant(), l, czero::<R>());
        let mut c = DMatrix::from_element(scene.k_sbcr(), l, czero::<R>());
        let mut g = DMatrix::from_element(t, l, czero::<R>());
        for j in 0..l {
            a.set_column(
                j,
                &array_response(rho[j], scene.n_ant(), scene.spacing_ratio()),
            );
            c.set_column(j, &pulse_coeffs(rho[l + j], scene.k_sbcr(), scene.n_cp())?);
            for tt in 0..t {
                g[(tt, j)] = Complex::new(
                    rho[2 * l + j * t + tt],
                    rho[2 * l + t * l + j * t + tt],
                );
            }
        }
        let b = comb.w().adjoint() * a;
        let kr = crate::tensor::khatri_rao(&g, &c)?;
        Ok(b * kr.transpose())
    };

    let h = R::of(1e-5);
    let m_rows = comb.m_rf() * scene.k_sbcr() * t;
    let mut jac = DMatrix::from_element(m_rows, n_params, czero::<R>());
    let two_h = Complex::new(R::of(2.0) * h, R::zero());
    for p in 0..n_params {
        let mut hi = rho.clone();
        hi[p] += h;
        let mut lo = rho.clone();
        lo[p] -= h;
        let diff = (mean_of(&hi)? - mean_of(&lo)?).unscale(two_h.re);
        for (r, z) in diff.iter().enumerate() {
            jac[(r, p)] = *z;
        }
    }
    let omega_real = (jac.adjoint() * &jac)
        .map(|z| Complex::new(z.re * R::of(2.0) / (sigma * sigma), R::zero()));
    // Transform the real-parameter FIM to the augmented complex convention:
    // identity on angles and delays, (1/2) [[I, jI], [I, -jI]] on the
    // (Re, Im) gain pair.
    let tl = t * l;
    let mut a_mat = DMatrix::from_element(n_params, n_params, czero::<R>());
    for i in 0..2 * l {
        a_mat[(i, i)] = Complex::new(R::one(), R::zero());
    }
    let half = R::of(0.5);
    for i in 0..tl {
        a_mat[(2 * l + i, 2 * l + i)] = Complex::new(half, R::zero());
        a_mat[(2 * l + i, 2 * l + tl + i)] = Complex::new(R::zero(), half);
        a_mat[(2 * l + tl + i, 2 * l + i)] = Complex::new(half, R::zero());
        a_mat[(2 * l + tl + i, 2 * l + tl + i)] = Complex::new(R::zero(), -half);
    }
    Ok(&a_mat * omega_real * a_mat.adjoint())
}
