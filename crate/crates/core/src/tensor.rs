//! Dense third-order complex tensors: unfolding and folding, Khatri-Rao and
//! Hadamard products, mode-1 products, norms, and construction from CPD
//! factors.
//!
//! Entries are stored with the first index fastest, so the mode-1 unfolding is
//! a plain column-major reshape. Indices are zero-based throughout the API;
//! the unfolding column order places the next-lower mode index fastest, which
//! makes `unfold(t, 1) = F1 * khatri_rao(F3, F2)^T` hold for CPD tensors.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;

use crate::{Error, RealScalar, Result};

/// Unfolding / folding mode of a third-order tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
    Three,
}

/// Dense third-order complex tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor3<R: RealScalar> {
    dims: (usize, usize, usize),
    data: Vec<Complex<R>>,
}

impl<R: RealScalar> ComplexTensor3<R> {
    /// Wraps raw entries laid out with the first index fastest.
    pub fn new(dims: (usize, usize, usize), data: Vec<Complex<R>>) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(Error::Dimension("tensor dims must be positive".into()));
        }
        if data.len() != n {
            return Err(Error::Dimension(format!(
                "tensor data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self::new(dims, vec![crate::czero::<R>(); dims.0 * dims.1 * dims.2])
            .expect("consistent by construction")
    }

    /// Builds a tensor entry by entry from a function of the indices.
    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> Complex<R>,
    ) -> Self {
        let mut t = Self::zeros(dims);
        for i3 in 0..dims.2 {
            for i2 in 0..dims.1 {
                for i1 in 0..dims.0 {
                    t[(i1, i2, i3)] = f(i1, i2, i3);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex<R>] {
        &self.data
    }

    #[inline]
    fn lin(&self, i1: usize, i2: usize, i3: usize) -> usize {
        debug_assert!(i1 < self.dims.0 && i2 < self.dims.1 && i3 < self.dims.2);
        i1 + self.dims.0 * (i2 + self.dims.1 * i3)
    }

    /// Matricizes the tensor along `mode`; columns are the mode-`mode` fibers.
    pub fn unfold(&self, mode: Mode) -> DMatrix<Complex<R>> {
        let (i1, i2, i3) = self.dims;
        match mode {
            Mode::One => DMatrix::from_column_slice(i1, i2 * i3, &self.data),
            Mode::Two => {
                let mut m = DMatrix::from_element(i2, i1 * i3, crate::czero::<R>());
                for c in 0..i3 {
                    for b in 0..i2 {
                        for a in 0..i1 {
                            m[(b, a + i1 * c)] = self.data[self.lin(a, b, c)];
                        }
                    }
                }
                m
            }
            Mode::Three => {
                let mut m = DMatrix::from_element(i3, i1 * i2, crate::czero::<R>());
                for c in 0..i3 {
                    for b in 0..i2 {
                        for a in 0..i1 {
                            m[(c, a + i1 * b)] = self.data[self.lin(a, b, c)];
                        }
                    }
                }
                m
            }
        }
    }

    /// Frobenius-style norm: square root of the summed squared magnitudes.
    pub fn norm(&self) -> R {
        self.data
            .iter()
            .fold(R::zero(), |acc, z| acc + z.modulus_squared())
            .sqrt()
    }
}

impl<R: RealScalar> std::ops::Index<(usize, usize, usize)> for ComplexTensor3<R> {
    type Output = Complex<R>;
    fn index(&self, (i1, i2, i3): (usize, usize, usize)) -> &Complex<R> {
        let k = self.lin(i1, i2, i3);
        &self.data[k]
    }
}

impl<R: RealScalar> std::ops::IndexMut<(usize, usize, usize)> for ComplexTensor3<R> {
    fn index_mut(&mut self, (i1, i2, i3): (usize, usize, usize)) -> &mut Complex<R> {
        let k = self.lin(i1, i2, i3);
        &mut self.data[k]
    }
}

/// Inverse of [`ComplexTensor3::unfold`] for the same mode and dims.
pub fn fold<R: RealScalar>(
    m: &DMatrix<Complex<R>>,
    mode: Mode,
    dims: (usize, usize, usize),
) -> Result<ComplexTensor3<R>> {
    let (i1, i2, i3) = dims;
    let expect = match mode {
        Mode::One => (i1, i2 * i3),
        Mode::Two => (i2, i1 * i3),
        Mode::Three => (i3, i1 * i2),
    };
    if m.shape() != expect {
        return Err(Error::Dimension(format!(
            "fold expects a {}x{} matrix for dims {:?}, got {}x{}",
            expect.0,
            expect.1,
            dims,
            m.nrows(),
            m.ncols()
        )));
    }
    let mut t = ComplexTensor3::zeros(dims);
    for c in 0..i3 {
        for b in 0..i2 {
            for a in 0..i1 {
                t[(a, b, c)] = match mode {
                    Mode::One => m[(a, b + i2 * c)],
                    Mode::Two => m[(b, a + i1 * c)],
                    Mode::Three => m[(c, a + i1 * b)],
                };
            }
        }
    }
    Ok(t)
}

/// Column-wise Khatri-Rao product: column r is `kron(a_r, b_r)`, with the
/// second operand's index running fastest.
pub fn khatri_rao<R: RealScalar>(
    a: &DMatrix<Complex<R>>,
    b: &DMatrix<Complex<R>>,
) -> Result<DMatrix<Complex<R>>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "khatri_rao needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ia, ib, r) = (a.nrows(), b.nrows(), a.ncols());
    let mut out = DMatrix::from_element(ia * ib, r, crate::czero::<R>());
    for col in 0..r {
        for i in 0..ia {
            let ai = a[(i, col)];
            for j in 0..ib {
                out[(i * ib + j, col)] = ai * b[(j, col)];
            }
        }
    }
    Ok(out)
}

/// Entrywise (Hadamard) product.
pub fn hadamard<R: RealScalar>(
    a: &DMatrix<Complex<R>>,
    b: &DMatrix<Complex<R>>,
) -> Result<DMatrix<Complex<R>>> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "hadamard needs equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.component_mul(b))
}

/// Mode-1 product: contracts the first mode with `m`, so that
/// `unfold(result, 1) = m * unfold(t, 1)`.
pub fn mode1_product<R: RealScalar>(
    t: &ComplexTensor3<R>,
    m: &DMatrix<Complex<R>>,
) -> Result<ComplexTensor3<R>> {
    let (i1, i2, i3) = t.dims();
    if m.ncols() != i1 {
        return Err(Error::Dimension(format!(
            "mode-1 product needs {} columns, got {}",
            i1,
            m.ncols()
        )));
    }
    fold(&(m * t.unfold(Mode::One)), Mode::One, (m.nrows(), i2, i3))
}

/// The three factor matrices of a CPD, sharing the column count `rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTriple<R: RealScalar> {
    f1: DMatrix<Complex<R>>,
    f2: DMatrix<Complex<R>>,
    f3: DMatrix<Complex<R>>,
}

impl<R: RealScalar> FactorTriple<R> {
    pub fn new(
        f1: DMatrix<Complex<R>>,
        f2: DMatrix<Complex<R>>,
        f3: DMatrix<Complex<R>>,
    ) -> Result<Self> {
        let r = f1.ncols();
        if r == 0 {
            return Err(Error::Dimension("factor rank must be at least 1".into()));
        }
        if f2.ncols() != r || f3.ncols() != r {
            return Err(Error::Dimension(format!(
                "factor column counts differ: {}, {}, {}",
                r,
                f2.ncols(),
                f3.ncols()
            )));
        }
        Ok(Self { f1, f2, f3 })
    }

    pub fn rank(&self) -> usize {
        self.f1.ncols()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.f1.nrows(), self.f2.nrows(), self.f3.nrows())
    }

    pub fn f1(&self) -> &DMatrix<Complex<R>> {
        &self.f1
    }

    pub fn f2(&self) -> &DMatrix<Complex<R>> {
        &self.f2
    }

    pub fn f3(&self) -> &DMatrix<Complex<R>> {
        &self.f3
    }

    pub fn into_parts(self) -> (DMatrix<Complex<R>>, DMatrix<Complex<R>>, DMatrix<Complex<R>>) {
        (self.f1, self.f2, self.f3)
    }
}

/// Evaluates the CPD sum: entry (i1,i2,i3) = sum_r F1(i1,r) F2(i2,r) F3(i3,r).
pub fn from_factors<R: RealScalar>(f: &FactorTriple<R>) -> ComplexTensor3<R> {
    let (i1, i2, i3) = f.dims();
    let kr = khatri_rao(&f.f3, &f.f2).expect("equal ranks by construction");
    let unfolded = &f.f1 * kr.transpose();
    fold(&unfolded, Mode::One, (i1, i2, i3)).expect("consistent by construction")
}
