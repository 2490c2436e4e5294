//! Dense complex linear-algebra helpers shared across the estimator: sorted
//! Hermitian eigendecompositions, spectral pseudoinverses and inverse square
//! roots, guarded Hermitian inversion, least squares, and polynomial roots
//! via balanced companion matrices.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;

use crate::{czero, Error, RealScalar, Result};

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
pub struct HermitianEig<R: RealScalar> {
    pub values: DVector<R>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: DMatrix<Complex<R>>,
}

/// Eigendecomposition of a Hermitian matrix, sorted by descending eigenvalue.
/// Ties keep the eigensolver's original order, so the result is deterministic.
pub fn hermitian_eig_desc<R: RealScalar>(m: &DMatrix<Complex<R>>) -> HermitianEig<R> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = DMatrix::from_element(n, n, czero::<R>());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEig { values, vectors }
}

/// Spectral pseudoinverse of a Hermitian PSD matrix. Eigenvalues at or below
/// `rel_tol` times the largest are truncated instead of inverted.
pub fn hermitian_pinv<R: RealScalar>(m: &DMatrix<Complex<R>>, rel_tol: R) -> DMatrix<Complex<R>> {
    let eig = hermitian_eig_desc(m);
    let n = m.nrows();
    let lead = if n > 0 { eig.values[0].abs() } else { R::zero() };
    let mut out = DMatrix::from_element(n, n, czero::<R>());
    if lead == R::zero() {
        return out;
    }
    let cut = lead * rel_tol;
    for i in 0..n {
        let lam = eig.values[i];
        if lam.abs() <= cut {
            continue;
        }
        let v = eig.vectors.column(i);
        let w = Complex::new(R::one() / lam, R::zero());
        // out += w * v v^H, accumulated column by column.
        for col in 0..n {
            let vc = v[col].conj() * w;
            for row in 0..n {
                out[(row, col)] += v[row] * vc;
            }
        }
    }
    out
}

/// Inverse square root of a Hermitian positive definite matrix. Fails when
/// the smallest eigenvalue drops below `rel_tol` times the largest.
pub fn hermitian_inv_sqrt<R: RealScalar>(
    m: &DMatrix<Complex<R>>,
    rel_tol: R,
) -> Result<DMatrix<Complex<R>>> {
    let eig = hermitian_eig_desc(m);
    let n = m.nrows();
    let lead = eig.values[0];
    let tail = eig.values[n - 1];
    if lead <= R::zero() || tail < rel_tol * lead {
        return Err(Error::Numerical(format!(
            "matrix is numerically rank deficient (eigenvalue range {:?} .. {:?})",
            tail, lead
        )));
    }
    let mut out = DMatrix::from_element(n, n, czero::<R>());
    for i in 0..n {
        let v = eig.vectors.column(i);
        let w = Complex::new(R::one() / eig.values[i].sqrt(), R::zero());
        for col in 0..n {
            let vc = v[col].conj() * w;
            for row in 0..n {
                out[(row, col)] += v[row] * vc;
            }
        }
    }
    Ok(out)
}

/// Inverse of a Hermitian positive definite matrix, rejected when the
/// condition number exceeds `max_cond` or positivity fails.
pub fn hermitian_inv_checked<R: RealScalar>(
    m: &DMatrix<Complex<R>>,
    max_cond: R,
) -> Result<DMatrix<Complex<R>>> {
    let eig = hermitian_eig_desc(m);
    let n = m.nrows();
    let lead = eig.values[0];
    let tail = eig.values[n - 1];
    if tail <= R::zero() || lead / tail > max_cond {
        return Err(Error::Numerical(format!(
            "Hermitian inverse rejected: eigenvalues span {:?} .. {:?}",
            tail, lead
        )));
    }
    let mut out = DMatrix::from_element(n, n, czero::<R>());
    for i in 0..n {
        let v = eig.vectors.column(i);
        let w = Complex::new(R::one() / eig.values[i], R::zero());
        for col in 0..n {
            let vc = v[col].conj() * w;
            for row in 0..n {
                out[(row, col)] += v[row] * vc;
            }
        }
    }
    Ok(out)
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD.
pub fn lstsq<R: RealScalar>(
    a: &DMatrix<Complex<R>>,
    b: &DMatrix<Complex<R>>,
    rel_tol: R,
) -> Result<DMatrix<Complex<R>>> {
    let svd = a.clone().svd(true, true);
    let cut = svd.singular_values.max() * rel_tol;
    svd.solve(b, cut)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))
}

/// Eigenvalues and right eigenvectors of a small general (non-Hermitian)
/// complex matrix, computed from its Schur form by triangular back
/// substitution. Eigenvectors are unit norm, one column per eigenvalue, in
/// the Schur diagonal's order. Near-defective pairs get clamped divisors
/// instead of an error, so vectors for clustered eigenvalues are best-effort;
/// callers that only need a subspace seed (warm starts, pencils) tolerate
/// that, callers needing certified accuracy should check the residual.
pub fn general_eig<R: RealScalar>(
    m: &DMatrix<Complex<R>>,
) -> Result<(DVector<Complex<R>>, DMatrix<Complex<R>>)> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let max_iter = 100 * n.max(10);
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), R::default_epsilon(), max_iter)
        .ok_or_else(|| {
            Error::Numerical(format!("Schur iteration did not converge for size {n}"))
        })?;
    let (q, t) = schur.unpack();
    let scale = t.iter().fold(R::zero(), |acc, z| acc.max(z.modulus()));
    let floor = R::default_epsilon() * scale.max(R::one());
    let values = DVector::from_fn(n, |i, _| t[(i, i)]);
    let mut vectors = DMatrix::from_element(n, n, czero::<R>());
    for i in 0..n {
        let lambda = values[i];
        let mut y = DVector::from_element(n, czero::<R>());
        y[i] = Complex::new(R::one(), R::zero());
        for j in (0..i).rev() {
            let mut s = czero::<R>();
            for k in j + 1..=i {
                s += t[(j, k)] * y[k];
            }
            let mut d = t[(j, j)] - lambda;
            if d.modulus() < floor {
                // Repeated eigenvalue: damp rather than divide by zero.
                d = if d.modulus() == R::zero() {
                    Complex::new(floor, R::zero())
                } else {
                    d * Complex::new(floor / d.modulus(), R::zero())
                };
            }
            y[j] = -s / d;
        }
        let mut v = &q * y;
        let norm = v.norm();
        v /= Complex::new(norm, R::zero());
        vectors.set_column(i, &v);
    }
    Ok((values, vectors))
}

/// Balances a square complex matrix in place by diagonal similarity scaling
/// with powers of two, equalizing row and column magnitudes. Eigenvalues are
/// unchanged; eigenvalue iteration accuracy improves for lopsided matrices.
fn balance_in_place<R: RealScalar>(m: &mut DMatrix<Complex<R>>) {
    let n = m.nrows();
    let two = R::of(2.0);
    let shrink = R::of(0.95);
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = R::zero();
            let mut r = R::zero();
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].modulus();
                    r += m[(i, j)].modulus();
                }
            }
            if c == R::zero() || r == R::zero() {
                continue;
            }
            let s = c + r;
            let mut f = R::one();
            while c < r / two {
                c *= two;
                r /= two;
                f *= two;
            }
            while c >= r * two {
                c /= two;
                r *= two;
                f /= two;
            }
            if c + r < shrink * s {
                converged = false;
                let fi = Complex::new(f, R::zero());
                let inv = Complex::new(R::one() / f, R::zero());
                for j in 0..n {
                    m[(i, j)] *= inv;
                }
                for j in 0..n {
                    m[(j, i)] *= fi;
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// All complex roots of `c[0] + c[1] z + ... + c[d] z^d`, via the eigenvalues
/// of the balanced companion matrix. Leading and trailing coefficients that
/// are negligible against the largest one are trimmed first; trimmed trailing
/// coefficients contribute exact zero roots.
pub fn polynomial_roots<R: RealScalar>(coeffs: &[Complex<R>]) -> Result<Vec<Complex<R>>> {
    let scale = coeffs
        .iter()
        .fold(R::zero(), |acc, z| if z.modulus() > acc { z.modulus() } else { acc });
    if scale == R::zero() {
        return Err(Error::Domain("zero polynomial has no defined roots".into()));
    }
    let tol = scale * R::of(1e-14);
    let mut hi = coeffs.len() - 1;
    while hi > 0 && coeffs[hi].modulus() <= tol {
        hi -= 1;
    }
    let mut lo = 0;
    let mut roots = Vec::new();
    while lo < hi && coeffs[lo].modulus() <= tol {
        roots.push(czero::<R>());
        lo += 1;
    }
    let deg = hi - lo;
    if deg == 0 {
        return Ok(roots);
    }
    if deg == 1 {
        roots.push(-coeffs[lo] / coeffs[hi]);
        return Ok(roots);
    }
    let lead = coeffs[hi];
    let mut comp = DMatrix::from_element(deg, deg, czero::<R>());
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[lo + i] / lead;
        if i + 1 < deg {
            comp[(i + 1, i)] = Complex::new(R::one(), R::zero());
        }
    }
    balance_in_place(&mut comp);
    let max_iter = 100 * deg.max(10);
    let schur = nalgebra::linalg::Schur::try_new(comp, R::default_epsilon(), max_iter)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "companion eigenvalue iteration did not converge for degree {deg}"
            ))
        })?;
    let vals = schur.eigenvalues().ok_or_else(|| {
        Error::Numerical("companion eigenvalues could not be extracted".into())
    })?;
    roots.extend(vals.iter().copied());
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        Complex::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C> {
        DMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn hermitian_eig_sorts_descending_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 5, 5);
        let h = &a * a.adjoint();
        let eig = hermitian_eig_desc(&h);
        for i in 1..5 {
            assert!(eig.values[i - 1] >= eig.values[i]);
        }
        let diag = DMatrix::from_fn(5, 5, |i, j| {
            if i == j {
                c(eig.values[i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let recon = &eig.vectors * diag * eig.vectors.adjoint();
        assert!((recon - h).norm() < 1e-10);
    }

    #[test]
    fn pinv_of_rank_deficient_gram_satisfies_moore_penrose() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 2, 4);
        let g = a.adjoint() * &a; // 4x4, rank 2
        let p = hermitian_pinv(&g, 1e-10);
        assert!((&g * &p * &g - &g).norm() < 1e-10);
        assert!((&p * &g * &p - &p).norm() < 1e-10);
    }

    #[test]
    fn inv_sqrt_whitens_a_gram_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_matrix(&mut rng, 8, 4);
        let g = w.adjoint() * &w;
        let s = hermitian_inv_sqrt(&g, 1e-12).unwrap();
        let eye = DMatrix::from_fn(4, 4, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!((&s * &g * &s - eye).norm() < 1e-10);
    }

    #[test]
    fn inv_sqrt_rejects_rank_deficiency() {
        let mut a = DMatrix::from_element(3, 3, c(0.0, 0.0));
        a[(0, 0)] = c(1.0, 0.0);
        a[(1, 1)] = c(1.0, 0.0);
        assert!(matches!(
            hermitian_inv_sqrt(&a, 1e-12),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn checked_inverse_enforces_condition_bound() {
        let mut a = DMatrix::from_element(2, 2, c(0.0, 0.0));
        a[(0, 0)] = c(1.0, 0.0);
        a[(1, 1)] = c(1e-14, 0.0);
        assert!(hermitian_inv_checked(&a, 1e12).is_err());
        a[(1, 1)] = c(0.5, 0.0);
        let inv = hermitian_inv_checked(&a, 1e12).unwrap();
        assert!((inv[(1, 1)] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn lstsq_matches_exact_solution_of_tall_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 6, 3);
        let x = random_matrix(&mut rng, 3, 2);
        let b = &a * &x;
        let got = lstsq(&a, &b, 1e-12).unwrap();
        assert!((got - x).norm() < 1e-10);
    }

    #[test]
    fn general_eigenpairs_satisfy_the_defining_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 5, 5);
        let (values, vectors) = general_eig(&a).unwrap();
        for i in 0..5 {
            let v = vectors.column(i).into_owned();
            let residual = (&a * &v - &v * values[i]).norm();
            assert!(
                residual < 1e-9,
                "eigenpair {i} residual {residual} exceeds tolerance"
            );
            assert!((v.norm() - 1.0).abs() < 1e-12, "eigenvector {i} not unit norm");
        }
    }

    #[test]
    fn general_eig_recovers_a_planted_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let planted = [c(2.0, 0.5), c(-1.0, 1.5), c(0.3, -2.0), c(4.0, 0.0)];
        let d = DMatrix::from_fn(4, 4, |i, j| if i == j { planted[i] } else { c(0.0, 0.0) });
        let p = random_matrix(&mut rng, 4, 4);
        let a = &p * d * p.clone().try_inverse().unwrap();
        let (values, _) = general_eig(&a).unwrap();
        let mut got: Vec<C> = values.iter().copied().collect();
        let mut want = planted.to_vec();
        got.sort_by_key(sort_key);
        want.sort_by_key(sort_key);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-8, "eigenvalue {g} strayed from planted {w}");
        }
    }

    #[test]
    fn general_eig_rejects_non_square_input() {
        let m = DMatrix::from_element(2, 3, c(1.0, 0.0));
        assert!(general_eig(&m).is_err(), "rectangular input must be refused");
    }

    fn sort_key(z: &C) -> (i64, i64) {
        ((z.re * 1e6).round() as i64, (z.im * 1e6).round() as i64)
    }

    #[test]
    fn roots_of_expanded_cubic_recover_known_values() {
        // (z - 1)(z - 2i)(z + 0.5 - 0.5i)
        let r1 = c(1.0, 0.0);
        let r2 = c(0.0, 2.0);
        let r3 = c(-0.5, 0.5);
        let c0 = -r1 * r2 * r3;
        let c1 = r1 * r2 + r1 * r3 + r2 * r3;
        let c2 = -(r1 + r2 + r3);
        let c3 = c(1.0, 0.0);
        let mut roots = polynomial_roots(&[c0, c1, c2, c3]).unwrap();
        let mut expect = vec![r1, r2, r3];
        roots.sort_by_key(sort_key);
        expect.sort_by_key(sort_key);
        for (got, want) in roots.iter().zip(expect.iter()) {
            assert!((got - want).norm() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn roots_of_z_squared_plus_one_are_imaginary_units() {
        let roots = polynomial_roots(&[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let mut ims: Vec<f64> = roots.iter().map(|z| z.im).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ims[0] + 1.0).abs() < 1e-12 && (ims[1] - 1.0).abs() < 1e-12);
        assert!(roots.iter().all(|z| z.re.abs() < 1e-12));
    }

    #[test]
    fn trailing_zero_coefficients_become_zero_roots() {
        // z^3 - z = z (z - 1)(z + 1)
        let roots =
            polynomial_roots(&[c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(roots.len(), 3);
        let mut res: Vec<f64> = roots.iter().map(|z| z.re).collect();
        res.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((res[0] + 1.0).abs() < 1e-10);
        assert!(res[1].abs() < 1e-12);
        assert!((res[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_polynomial_is_rejected() {
        assert!(matches!(
            polynomial_roots(&[c(0.0, 0.0), c(0.0, 0.0)]),
            Err(Error::Domain(_))
        ));
    }
}
