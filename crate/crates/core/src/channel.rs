//! Multipath channel scenes and their low-rank tensor representation.
//!
//! A scene is a set of propagation paths, each with an angle of arrival, a
//! fractional sample delay, and one complex gain per frame. The frequency
//! domain channel over (antenna, subcarrier, frame) is a third-order tensor
//! whose rank equals the number of paths: mode factors are the array response
//! matrix, the pulse-shaping coefficient matrix, and the gain matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;

use crate::sampling::{complex_randn, laplace};
use crate::tensor::{ComplexTensor3, FactorTriple};
use crate::{Error, RealScalar, Result};

/// Configuration for drawing a random multipath scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig<R: RealScalar> {
    /// Number of receive antennas in the uniform linear array.
    pub n_ant: usize,
    /// Number of OFDM subcarriers.
    pub k_sbcr: usize,
    /// Number of frames over which path gains vary.
    pub t_frm: usize,
    /// Cyclic prefix length in samples; delays live in `[0, n_cp]`.
    pub n_cp: usize,
    /// Antenna spacing divided by carrier wavelength.
    pub spacing_ratio: R,
    /// How path angles and delays are laid out.
    pub kind: SceneKind<R>,
}

/// Path layout for a random scene.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneKind<R: RealScalar> {
    /// Independent paths: every angle and delay is drawn separately.
    Discrete {
        /// Number of paths.
        n_paths: usize,
    },
    /// Paths arrive in clusters that share a delay and spread around a
    /// common angle.
    Clustered(ClusterConfig<R>),
}

/// Geometry of a clustered scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig<R: RealScalar> {
    /// Number of clusters.
    pub n_clusters: usize,
    /// Subrays per cluster.
    pub n_subrays: usize,
    /// Scale of the Laplacian angular offsets around each cluster center,
    /// in radians.
    pub angular_spread_rad: R,
}

/// A concrete multipath scene: per-path angles and delays plus per-frame
/// complex gains, together with the array and waveform geometry needed to
/// expand it into a channel tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScene<R: RealScalar> {
    aoas_rad: Vec<R>,
    delays: Vec<R>,
    gains: DMatrix<Complex<R>>,
    n_ant: usize,
    k_sbcr: usize,
    n_cp: usize,
    spacing_ratio: R,
}

impl<R: RealScalar> ChannelScene<R> {
    /// Builds a scene after validating its invariants: at least one path,
    /// matching per-path lengths, angles in `(-pi, pi]`, delays in
    /// `[0, n_cp]`, and positive dimensions.
    pub fn new(
        aoas_rad: Vec<R>,
        delays: Vec<R>,
        gains: DMatrix<Complex<R>>,
        n_ant: usize,
        k_sbcr: usize,
        n_cp: usize,
        spacing_ratio: R,
    ) -> Result<Self> {
        let n_paths = aoas_rad.len();
        if n_paths == 0 {
            return Err(Error::Dimension("scene must have at least one path".into()));
        }
        if delays.len() != n_paths || gains.ncols() != n_paths {
            return Err(Error::Dimension(format!(
                "per-path lengths disagree: {} angles, {} delays, {} gain columns",
                n_paths,
                delays.len(),
                gains.ncols()
            )));
        }
        if gains.nrows() == 0 {
            return Err(Error::Dimension("scene needs at least one frame".into()));
        }
        if n_ant == 0 || k_sbcr == 0 || n_cp == 0 {
            return Err(Error::Dimension(
                "antenna count, subcarrier count, and cyclic prefix must be positive".into(),
            ));
        }
        if spacing_ratio <= R::zero() {
            return Err(Error::Domain("antenna spacing ratio must be positive".into()));
        }
        for (l, phi) in aoas_rad.iter().enumerate() {
            if !(*phi > -R::pi() && *phi <= R::pi()) {
                return Err(Error::Domain(format!(
                    "angle {l} lies outside (-pi, pi]"
                )));
            }
        }
        let n_cp_r = R::of_usize(n_cp);
        for (l, tau) in delays.iter().enumerate() {
            if !(*tau >= R::zero() && *tau <= n_cp_r) {
                return Err(Error::Domain(format!(
                    "delay {l} lies outside [0, {n_cp}]"
                )));
            }
        }
        Ok(Self {
            aoas_rad,
            delays,
            gains,
            n_ant,
            k_sbcr,
            n_cp,
            spacing_ratio,
        })
    }

    /// Angles of arrival in radians, one per path.
    pub fn aoas_rad(&self) -> &[R] {
        &self.aoas_rad
    }

    /// Fractional sample delays, one per path.
    pub fn delays(&self) -> &[R] {
        &self.delays
    }

    /// Per-frame path gains, `t_frm` rows by `n_paths` columns.
    pub fn gains(&self) -> &DMatrix<Complex<R>> {
        &self.gains
    }

    /// Number of paths.
    pub fn n_paths(&self) -> usize {
        self.aoas_rad.len()
    }

    /// Number of receive antennas.
    pub fn n_ant(&self) -> usize {
        self.n_ant
    }

    /// Number of subcarriers.
    pub fn k_sbcr(&self) -> usize {
        self.k_sbcr
    }

    /// Number of frames.
    pub fn t_frm(&self) -> usize {
        self.gains.nrows()
    }

    /// Cyclic prefix length in samples.
    pub fn n_cp(&self) -> usize {
        self.n_cp
    }

    /// Antenna spacing divided by carrier wavelength.
    pub fn spacing_ratio(&self) -> R {
        self.spacing_ratio
    }
}

/// Uniform linear array response for an angle of arrival, antenna `n`
/// carrying phase `2 pi * spacing_ratio * n * sin(phi)` for `n = 0..n_ant`.
pub fn array_response<R: RealScalar>(
    phi_rad: R,
    n_ant: usize,
    spacing_ratio: R,
) -> DVector<Complex<R>> {
    let step = R::two_pi() * spacing_ratio * phi_rad.sin();
    DVector::from_fn(n_ant, |n, _| crate::cis(R::one(), step * R::of_usize(n)))
}

/// Normalized sinc, `sin(pi x) / (pi x)` with value one at zero.
fn sinc<R: RealScalar>(x: R) -> R {
    if x == R::zero() {
        R::one()
    } else {
        let px = R::pi() * x;
        px.sin() / px
    }
}

/// Derivative of the normalized sinc. The closed form `(cos(pi x) - sinc(x)) / x`
/// cancels catastrophically near zero, so a quartic series takes over there.
fn sinc_derivative<R: RealScalar>(x: R) -> R {
    if x.abs() < R::of(1e-4) {
        let p2 = R::pi() * R::pi();
        let p4 = p2 * p2;
        -p2 * x / R::of(3.0) + p4 * x * x * x / R::of(30.0)
    } else {
        (( R::pi() * x).cos() - sinc(x)) / x
    }
}

fn check_delay<R: RealScalar>(delay: R, n_cp: usize) -> Result<()> {
    if delay >= R::zero() && delay <= R::of_usize(n_cp) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "delay must lie in [0, {n_cp}] samples"
        )))
    }
}

/// Frequency-domain pulse-shaping coefficients of a path with fractional
/// sample delay `delay`: subcarrier `k` holds
/// `sum_{d=0}^{n_cp-1} sinc(d - delay) exp(-j 2 pi k d / k_sbcr)`.
pub fn pulse_coeffs<R: RealScalar>(
    delay: R,
    k_sbcr: usize,
    n_cp: usize,
) -> Result<DVector<Complex<R>>> {
    check_delay(delay, n_cp)?;
    Ok(pulse_sum(delay, k_sbcr, n_cp, sinc, false))
}

/// Derivative of [`pulse_coeffs`] with respect to the delay, used by the
/// estimation error bound. Equal to minus the same sum with the sinc
/// replaced by its derivative.
pub fn pulse_coeffs_derivative<R: RealScalar>(
    delay: R,
    k_sbcr: usize,
    n_cp: usize,
) -> Result<DVector<Complex<R>>> {
    check_delay(delay, n_cp)?;
    Ok(pulse_sum(delay, k_sbcr, n_cp, sinc_derivative, true))
}

fn pulse_sum<R: RealScalar>(
    delay: R,
    k_sbcr: usize,
    n_cp: usize,
    pulse: fn(R) -> R,
    negate: bool,
) -> DVector<Complex<R>> {
    let weights: Vec<R> = (0..n_cp)
        .map(|d| pulse(R::of_usize(d) - delay))
        .collect();
    let sign = if negate { -R::one() } else { R::one() };
    DVector::from_fn(k_sbcr, |k, _| {
        let mut acc = Complex::new(R::zero(), R::zero());
        for (d, w) in weights.iter().enumerate() {
            let phase = -R::two_pi() * R::of_usize(k) * R::of_usize(d) / R::of_usize(k_sbcr);
            acc += crate::cis(*w, phase);
        }
        acc * sign
    })
}

/// Wraps an angle into `(-pi, pi]`.
fn wrap_angle<R: RealScalar>(phi: R) -> R {
    let wrapped = R::pi() - (R::pi() - phi).rem_euclid(&R::two_pi());
    // rem_euclid never returns 2 pi exactly, so wrapped is already in range;
    // guard anyway against rounding at the open endpoint.
    if wrapped <= -R::pi() {
        R::pi()
    } else {
        wrapped
    }
}

/// Draws a random scene. Discrete scenes draw every angle uniformly on
/// `(-pi, pi]` and every delay uniformly on `[0, n_cp)`; clustered scenes
/// draw one center angle and one shared delay per cluster, then spread
/// subrays around the center with Laplacian offsets. All gains are complex
/// Gaussian with variance `1 / n_paths` so the expected channel energy per
/// (subcarrier, frame) entry is independent of the path count.
pub fn draw_scene<R: RealScalar>(
    cfg: &SceneConfig<R>,
    rng: &mut impl Rng,
) -> Result<ChannelScene<R>> {
    let (aoas, delays) = match &cfg.kind {
        SceneKind::Discrete { n_paths } => {
            if *n_paths == 0 {
                return Err(Error::Config("path count must be positive".into()));
            }
            let aoas = (0..*n_paths)
                .map(|_| R::of(std::f64::consts::PI * (1.0 - 2.0 * rng.random::<f64>())))
                .collect::<Vec<_>>();
            let delays = (0..*n_paths)
                .map(|_| R::of(rng.random::<f64>() * cfg.n_cp as f64))
                .collect::<Vec<_>>();
            (aoas, delays)
        }
        SceneKind::Clustered(cluster) => {
            if cluster.n_clusters == 0 || cluster.n_subrays == 0 {
                return Err(Error::Config(
                    "cluster and subray counts must be positive".into(),
                ));
            }
            if cluster.angular_spread_rad < R::zero() {
                return Err(Error::Config("angular spread must be nonnegative".into()));
            }
            let n_paths = cluster.n_clusters * cluster.n_subrays;
            let mut aoas = Vec::with_capacity(n_paths);
            let mut delays = Vec::with_capacity(n_paths);
            let spread = cluster.angular_spread_rad.as_f64();
            for _ in 0..cluster.n_clusters {
                let center = std::f64::consts::PI * (1.0 - 2.0 * rng.random::<f64>());
                let delay = R::of(rng.random::<f64>() * cfg.n_cp as f64);
                for _ in 0..cluster.n_subrays {
                    let offset = laplace(rng, spread);
                    aoas.push(wrap_angle(R::of(center + offset)));
                    delays.push(delay);
                }
            }
            (aoas, delays)
        }
    };
    let n_paths = aoas.len();
    let scale = R::of(1.0 / n_paths as f64).sqrt();
    let gains = DMatrix::from_fn(cfg.t_frm, n_paths, |_, _| {
        complex_randn::<R>(rng) * Complex::new(scale, R::zero())
    });
    ChannelScene::new(
        aoas,
        delays,
        gains,
        cfg.n_ant,
        cfg.k_sbcr,
        cfg.n_cp,
        cfg.spacing_ratio,
    )
}

/// Expands a scene into its channel tensor of shape
/// `(n_ant, k_sbcr, t_frm)` along with the generating factor triple
/// (array responses, pulse coefficients, gains).
pub fn channel_tensor<R: RealScalar>(
    scene: &ChannelScene<R>,
) -> (ComplexTensor3<R>, FactorTriple<R>) {
    let n_paths = scene.n_paths();
    let mut a = DMatrix::zeros(scene.n_ant, n_paths);
    let mut c = DMatrix::zeros(scene.k_sbcr, n_paths);
    for l in 0..n_paths {
        a.set_column(
            l,
            &array_response(scene.aoas_rad[l], scene.n_ant, scene.spacing_ratio),
        );
        let col = pulse_coeffs(scene.delays[l], scene.k_sbcr, scene.n_cp)
            .expect("scene validated its delays");
        c.set_column(l, &col);
    }
    let factors = FactorTriple::new(a, c, scene.gains.clone())
        .expect("factor dimensions come from one scene");
    let tensor = crate::tensor::from_factors(&factors);
    (tensor, factors)
}
