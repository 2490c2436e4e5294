//! Canonical polyadic decomposition of the measurement tensor by alternating
//! least squares.
//!
//! Each sweep solves three linear least-squares problems, one per mode,
//! holding the other two factors fixed. The normal-equations form only ever
//! inverts an R x R Gram matrix built from Hadamard products of the factor
//! Grams, so a sweep costs little beyond the unfolding multiplies. The
//! objective (relative residual) never increases across sweeps; restarts from
//! fresh random initializations guard against bad local minima.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;

use crate::linalg::{general_eig, hermitian_pinv, lstsq};
use crate::sampling::complex_randn;
use crate::tensor::{khatri_rao, ComplexTensor3, FactorTriple, Mode};
use crate::{Error, RealScalar, Result};

/// Factor initialization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// I.i.d. complex Gaussian entries.
    Random,
    /// Closed-form warm start from the leading singular subspaces: two
    /// random mixtures of the mode-3 slices are projected onto those
    /// subspaces and their generalized eigenvectors seed the factors, which
    /// recovers noiseless low-rank tensors outright and sidesteps the slow
    /// swamps that trap random starts when factor columns are nearly
    /// collinear. Falls back to leading singular vectors padded with random
    /// columns when the pencil is unavailable (rank above the first two
    /// mode dimensions, a single slice, or a singular projection). Only the
    /// first restart is warm; later restarts are random draws.
    SvdWarm,
}

/// Tuning knobs for the alternating least-squares solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsOptions<R: RealScalar> {
    /// Target decomposition rank.
    pub rank: usize,
    /// Hard cap on sweeps per restart.
    pub max_iters: usize,
    /// Stop once the relative fit change between sweeps drops below this.
    pub rel_tol: R,
    /// Number of independent initializations; the best final fit wins.
    pub n_restarts: usize,
    /// How factors are initialized.
    pub init_mode: InitMode,
    /// Relative truncation threshold for the Gram pseudoinverse.
    pub pinv_tol: R,
}

impl<R: RealScalar> AlsOptions<R> {
    /// Defaults for a given rank: 500 sweeps, relative tolerance 1e-8,
    /// 3 random restarts, pseudoinverse truncation 1e-10.
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            max_iters: 500,
            rel_tol: R::of(1e-8),
            n_restarts: 3,
            init_mode: InitMode::Random,
            pinv_tol: R::of(1e-10),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if !(self.rel_tol > R::zero()) {
            return Err(Error::Config("rel_tol must be positive".into()));
        }
        if self.n_restarts == 0 {
            return Err(Error::Config("need at least one restart".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("need at least one sweep".into()));
        }
        Ok(())
    }
}

/// Convergence record of the winning restart.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsDiagnostics<R: RealScalar> {
    /// Final relative residual, `norm(y - reconstruction) / norm(y)`.
    pub final_residual: R,
    /// Sweeps executed by the winning restart.
    pub iterations: usize,
    /// Which restart won.
    pub restart_index: usize,
    /// Relative residual after every sweep of the winning restart;
    /// non-increasing.
    pub fit_history: Vec<R>,
}

/// One mode update of the alternating scheme: the least-squares factor for
/// `y_unfold = F (f_a kr f_b)^T`, computed through the Hadamard-of-Grams
/// normal equations with a truncated pseudoinverse.
pub fn als_update_mode<R: RealScalar>(
    y_unfold: &DMatrix<Complex<R>>,
    f_a: &DMatrix<Complex<R>>,
    f_b: &DMatrix<Complex<R>>,
    pinv_tol: R,
) -> Result<DMatrix<Complex<R>>> {
    let kr = khatri_rao(f_a, f_b)?;
    if kr.nrows() != y_unfold.ncols() {
        return Err(Error::Dimension(format!(
            "unfolding has {} columns but the Khatri-Rao product has {} rows",
            y_unfold.ncols(),
            kr.nrows()
        )));
    }
    let gram = (f_a.adjoint() * f_a).component_mul(&(f_b.adjoint() * f_b));
    let gram_pinv = hermitian_pinv(&gram, pinv_tol);
    Ok(y_unfold * (kr * gram_pinv).conjugate())
}

fn random_factor<R: RealScalar>(
    rows: usize,
    rank: usize,
    rng: &mut impl Rng,
) -> DMatrix<Complex<R>> {
    DMatrix::from_fn(rows, rank, |_, _| complex_randn::<R>(rng))
}

type Seed<R> = (
    DMatrix<Complex<R>>,
    DMatrix<Complex<R>>,
    DMatrix<Complex<R>>,
);

/// One slice-pencil attempt for a fixed pair of mode-3 mixing weights.
/// Projecting the two mixed slices onto the leading singular subspaces
/// gives a matrix pencil whose eigenvectors identify the mode-1 factor; the
/// remaining factors follow from rank-1 fits of the least-squares
/// coefficients. Exact on noiseless rank-R data in exact arithmetic, but
/// the accuracy hinges on the mixture keeping the pencil's eigenvalue
/// ratios apart, which is why the caller scores several attempts.
fn pencil_attempt<R: RealScalar>(
    y1: &DMatrix<Complex<R>>,
    u: &DMatrix<Complex<R>>,
    dims: (usize, usize, usize),
    rank: usize,
    pinv_tol: R,
    weights: (&DVector<Complex<R>>, &DVector<Complex<R>>),
) -> Option<Seed<R>> {
    let (_, i2, i3) = dims;
    let mut s_a = DMatrix::from_element(y1.nrows(), i2, crate::czero::<R>());
    let mut s_b = s_a.clone();
    for t in 0..i3 {
        let slice = y1.columns(t * i2, i2);
        s_a += slice * weights.0[t];
        s_b += slice * weights.1[t];
    }

    let v_full = s_a.clone().svd(false, true).v_t?;
    let v = v_full.rows(0, rank).adjoint();

    let a_hat = u.adjoint() * &s_a * &v;
    let b_hat = u.adjoint() * &s_b * &v;
    let m = b_hat.clone().lu().solve(&a_hat)?;
    let (_, w) = general_eig(&m).ok()?;
    let mut f1 = u * (b_hat * w);
    for r in 0..rank {
        let norm = f1.column(r).norm();
        if !(norm > R::zero()) || !norm.is_finite() {
            return None;
        }
        let col = f1.column(r) / Complex::new(norm, R::zero());
        f1.set_column(r, &col);
    }

    let coeffs = lstsq(&f1, y1, pinv_tol).ok()?;
    let mut f2 = DMatrix::from_element(i2, rank, crate::czero::<R>());
    let mut f3 = DMatrix::from_element(i3, rank, crate::czero::<R>());
    for r in 0..rank {
        let flat = DMatrix::from_fn(i2, i3, |j, t| coeffs[(r, t * i2 + j)]);
        let svd = flat.svd(true, true);
        let spread = svd.singular_values[0].sqrt();
        let left = svd.u.as_ref()?.column(0).into_owned();
        let right = svd.v_t.as_ref()?.row(0).transpose();
        f2.set_column(r, &(left * Complex::new(spread, R::zero())));
        f3.set_column(r, &(right * Complex::new(spread, R::zero())));
    }
    if f1.iter().chain(f2.iter()).chain(f3.iter()).any(|z| !z.is_finite()) {
        return None;
    }
    Some((f1, f2, f3))
}

/// Slice-pencil warm start: several mixing-weight attempts, scored by the
/// relative residual of the seeded reconstruction, best one returned. The
/// first attempt mixes with the two dominant mode-3 singular vectors, the
/// rest with random weights; attempts stop early once one reaches the
/// rounding floor. Returns None when the pencil is structurally unavailable
/// (rank above the first two mode dimensions, a single slice) or every
/// attempt fails, letting the caller fall back.
fn pencil_init<R: RealScalar>(
    y1: &DMatrix<Complex<R>>,
    y3: &DMatrix<Complex<R>>,
    dims: (usize, usize, usize),
    rank: usize,
    pinv_tol: R,
    rng: &mut impl Rng,
) -> Option<Seed<R>> {
    let (i1, i2, i3) = dims;
    if rank > i1.min(i2) || i3 < 2 {
        return None;
    }
    let u_full = y1.clone().svd(true, false).u?;
    let u = u_full.columns(0, rank).into_owned();
    let norm_y = y1.norm();
    let floor = R::default_epsilon() * R::of(16.0 * ((i1 * i2 * i3) as f64).sqrt());

    let dominant: Option<(DVector<Complex<R>>, DVector<Complex<R>>)> = y3
        .clone()
        .svd(true, false)
        .u
        .filter(|m| m.ncols() >= 2)
        .map(|m| (m.column(0).into_owned(), m.column(1).into_owned()));

    let n_random_attempts = 3;
    let mut best: Option<(R, Seed<R>)> = None;
    for attempt in 0..1 + n_random_attempts {
        let weights = if attempt == 0 {
            match &dominant {
                Some((a, b)) => (a.clone(), b.clone()),
                None => continue,
            }
        } else {
            (
                DVector::from_fn(i3, |_, _| complex_randn::<R>(rng)),
                DVector::from_fn(i3, |_, _| complex_randn::<R>(rng)),
            )
        };
        let Some(seed) = pencil_attempt(y1, &u, dims, rank, pinv_tol, (&weights.0, &weights.1))
        else {
            continue;
        };
        let kr = khatri_rao(&seed.2, &seed.1).expect("seed factors share the rank");
        let score = (y1 - &seed.0 * kr.transpose()).norm() / norm_y;
        if !score.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, seed));
        }
        if best.as_ref().is_some_and(|(s, _)| *s <= floor) {
            break;
        }
    }
    best.map(|(_, seed)| seed)
}

fn warm_factor<R: RealScalar>(
    unfold: &DMatrix<Complex<R>>,
    rank: usize,
    rng: &mut impl Rng,
) -> DMatrix<Complex<R>> {
    let rows = unfold.nrows();
    let svd = unfold.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors were requested");
    let take = rank.min(u.ncols());
    DMatrix::from_fn(rows, rank, |i, j| {
        if j < take {
            u[(i, j)]
        } else {
            complex_randn::<R>(rng)
        }
    })
}

/// Rank-R canonical polyadic decomposition of `y` by alternating least
/// squares with restarts. Returns the best factors found and the winning
/// restart's convergence record.
pub fn cpd_als<R: RealScalar>(
    y: &ComplexTensor3<R>,
    opts: &AlsOptions<R>,
    rng: &mut impl Rng,
) -> Result<(FactorTriple<R>, AlsDiagnostics<R>)> {
    opts.validate()?;
    if y.data().iter().any(|z| !z.is_finite()) {
        return Err(Error::Domain("input tensor has non-finite entries".into()));
    }
    let (i1, i2, i3) = y.dims();
    let cap = (i2 * i3).min(i1 * i3).min(i1 * i2);
    if opts.rank > cap {
        return Err(Error::Config(format!(
            "rank {} exceeds the largest decomposable rank {} for dims {:?}",
            opts.rank,
            cap,
            y.dims()
        )));
    }
    let norm_y = y.norm();
    if norm_y == R::zero() {
        let factors = FactorTriple::new(
            DMatrix::from_element(i1, opts.rank, crate::czero::<R>()),
            DMatrix::from_element(i2, opts.rank, crate::czero::<R>()),
            DMatrix::from_element(i3, opts.rank, crate::czero::<R>()),
        )
        .expect("zero factors are consistent");
        let diag = AlsDiagnostics {
            final_residual: R::zero(),
            iterations: 0,
            restart_index: 0,
            fit_history: Vec::new(),
        };
        return Ok((factors, diag));
    }

    let y1 = y.unfold(Mode::One);
    let y2 = y.unfold(Mode::Two);
    let y3 = y.unfold(Mode::Three);

    // Relative residual of an exact fit executed in floating point; at or
    // below this the decomposition is as good as it can get and the
    // relative-change stop test would chase rounding jitter forever.
    let fit_floor =
        R::default_epsilon() * R::of(4.0 * ((i1 * i2 * i3) as f64).sqrt());

    let mut best: Option<(FactorTriple<R>, AlsDiagnostics<R>)> = None;
    for restart in 0..opts.n_restarts {
        let warm = restart == 0 && opts.init_mode == InitMode::SvdWarm;
        let pencil = if warm {
            pencil_init(&y1, &y3, (i1, i2, i3), opts.rank, opts.pinv_tol, rng)
        } else {
            None
        };
        let (mut f1, mut f2, mut f3) = match pencil {
            Some(seed) => seed,
            None if warm => (
                warm_factor(&y1, opts.rank, rng),
                warm_factor(&y2, opts.rank, rng),
                warm_factor(&y3, opts.rank, rng),
            ),
            None => (
                random_factor(i1, opts.rank, rng),
                random_factor(i2, opts.rank, rng),
                random_factor(i3, opts.rank, rng),
            ),
        };
        let mut history: Vec<R> = Vec::new();
        let mut iterations = 0;
        for _ in 0..opts.max_iters {
            f1 = als_update_mode(&y1, &f3, &f2, opts.pinv_tol)?;
            f2 = als_update_mode(&y2, &f3, &f1, opts.pinv_tol)?;
            f3 = als_update_mode(&y3, &f2, &f1, opts.pinv_tol)?;
            iterations += 1;
            let kr = khatri_rao(&f2, &f1).expect("ranks match by construction");
            let fit = (&y3 - &f3 * kr.transpose()).norm() / norm_y;
            if let Some(&prev) = history.last() {
                debug_assert!(
                    fit <= prev + R::of(1e-12) * prev.max(R::one()),
                    "alternating least squares must not increase the objective"
                );
                history.push(fit);
                if fit <= fit_floor
                    || (prev - fit).abs() < opts.rel_tol * prev.max(R::default_epsilon())
                {
                    break;
                }
            } else {
                history.push(fit);
                if fit <= fit_floor {
                    break;
                }
            }
        }
        let final_residual = *history.last().expect("at least one sweep ran");
        let replace = match &best {
            None => true,
            Some((_, d)) => final_residual < d.final_residual,
        };
        if replace {
            let factors = FactorTriple::new(f1.clone(), f2.clone(), f3.clone())
                .expect("modes share the options rank");
            best = Some((
                factors,
                AlsDiagnostics {
                    final_residual,
                    iterations,
                    restart_index: restart,
                    fit_history: history,
                },
            ));
        }
    }
    Ok(best.expect("at least one restart ran"))
}
