//! Dense matrices, third-order tensors, and the small linear algebra the
//! estimator needs (Cholesky solves, matricization, Khatri-Rao products).
//!
//! Matricization convention, fixed once for the whole crate: the mode-n
//! unfolding orders the remaining modes ascending with the lower mode varying
//! fastest. For a tensor of shape `(m, p, K)`:
//!
//! * mode 1: `m x (pK)`, column index `j + p*k`
//! * mode 2: `p x (mK)`, column index `i + m*k`
//! * mode 3: `K x (mp)`, column index `i + m*j`

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { S::one() } else { S::zero() })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix<S> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, other.rows, "matmul inner dimensions");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == S::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// `self^T * self`, accumulated symmetrically.
    pub fn gram(&self) -> Matrix<S> {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..self.cols {
                for b in a..self.cols {
                    let v = g.get(a, b) + r[a] * r[b];
                    g.set(a, b, v);
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                g.set(a, b, g.get(b, a));
            }
        }
        g
    }

    pub fn frob_norm(&self) -> S {
        self.data.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    pub fn scale(&mut self, c: S) {
        for x in &mut self.data {
            *x *= c;
        }
    }

    pub fn add_assign(&mut self, other: &Matrix<S>) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn sub(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn column_norms(&self) -> Vec<S> {
        let mut norms = vec![S::zero(); self.cols];
        for i in 0..self.rows {
            let r = self.row(i);
            for (n, &x) in norms.iter_mut().zip(r) {
                *n += x * x;
            }
        }
        norms.into_iter().map(|x| x.sqrt()).collect()
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix; returns
/// the lower factor, or `None` when a pivot is not strictly positive.
pub fn cholesky<S: Scalar>(a: &Matrix<S>) -> Option<Matrix<S>> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "cholesky needs a square matrix");
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= S::zero() || !s.is_finite() {
                    return None;
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Solve `A x = b` for symmetric positive-definite `A` via Cholesky.
pub fn cholesky_solve<S: Scalar>(a: &Matrix<S>, b: &[S]) -> Option<Vec<S>> {
    let l = cholesky(a)?;
    let n = a.rows();
    assert_eq!(b.len(), n);
    // forward substitution L y = b
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    // back substitution L^T x = y
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Some(x)
}

/// Solve `A x = b` for an SPD-up-to-conditioning `A`, escalating a ridge on
/// the diagonal until the Cholesky succeeds. Returns the solution plus the
/// ridge that was needed (zero in the well-conditioned case).
pub fn ridge_solve<S: Scalar>(a: &Matrix<S>, b: &[S]) -> (Vec<S>, S) {
    if let Some(x) = cholesky_solve(a, b) {
        return (x, S::zero());
    }
    let n = a.rows();
    let scale = (0..n)
        .map(|i| a.get(i, i).abs())
        .fold(S::zero(), S::max)
        .max(S::one());
    let mut ridge = S::from_f64_lossy(1e-12) * scale;
    loop {
        let mut aj = a.clone();
        for i in 0..n {
            aj.set(i, i, aj.get(i, i) + ridge);
        }
        if let Some(x) = cholesky_solve(&aj, b) {
            return (x, ridge);
        }
        ridge = ridge * S::from_f64_lossy(100.0);
        if ridge > scale * S::from_f64_lossy(1e6) {
            // Hopeless conditioning; fall back to a scaled gradient step.
            let bn = b.iter().map(|&x| x * x).sum::<S>().sqrt().max(S::one());
            return (b.iter().map(|&x| x / bn).collect(), ridge);
        }
    }
}

/// Solve a general square system `A x = b` by Gaussian elimination with
/// partial pivoting.
pub fn solve_general<S: Scalar>(a: &Matrix<S>, b: &[S]) -> Option<Vec<S>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m.get(r, col).abs() > m.get(piv, col).abs() {
                piv = r;
            }
        }
        if m.get(piv, col).abs() < S::from_f64_lossy(1e-300) {
            return None;
        }
        if piv != col {
            for c in 0..n {
                let tmp = m.get(col, c);
                m.set(col, c, m.get(piv, c));
                m.set(piv, c, tmp);
            }
            rhs.swap(col, piv);
        }
        let d = m.get(col, col);
        for r in col + 1..n {
            let f = m.get(r, col) / d;
            if f == S::zero() {
                continue;
            }
            for c in col..n {
                let v = m.get(r, c) - f * m.get(col, c);
                m.set(r, c, v);
            }
            rhs[r] = rhs[r] - f * rhs[col];
        }
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in i + 1..n {
            s -= m.get(i, k) * x[k];
        }
        x[i] = s / m.get(i, i);
    }
    Some(x)
}

/// Khatri-Rao product: column r of the result is the Kronecker product of
/// column r of `a` with column r of `b`; shape `(a.rows * b.rows) x R`.
pub fn khatri_rao<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>> {
    if a.cols() != b.cols() {
        return Err(Error::DimMismatch(format!(
            "khatri_rao column counts {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    let r = a.cols();
    let mut out = Matrix::zeros(a.rows() * b.rows(), r);
    for ia in 0..a.rows() {
        for ib in 0..b.rows() {
            let row = ia * b.rows() + ib;
            for c in 0..r {
                out.set(row, c, a.get(ia, c) * b.get(ib, c));
            }
        }
    }
    Ok(out)
}

/// Dense third-order coefficient tensor, shape `(m, p, K)`; entry `[i, j, k]`
/// is the coefficient of basis `k` transferring predictor `j` to response `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefTensor<S> {
    m: usize,
    p: usize,
    k: usize,
    data: Vec<S>,
}

impl<S: Scalar> CoefTensor<S> {
    pub fn zeros(m: usize, p: usize, k: usize) -> Self {
        assert!(m > 0 && p > 0 && k > 0, "tensor dims must be positive");
        CoefTensor { m, p, k, data: vec![S::zero(); m * p * k] }
    }

    pub fn from_fn(m: usize, p: usize, k: usize, mut f: impl FnMut(usize, usize, usize) -> S) -> Self {
        let mut t = Self::zeros(m, p, k);
        for i in 0..m {
            for j in 0..p {
                for l in 0..k {
                    t.set(i, j, l, f(i, j, l));
                }
            }
        }
        t
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.p, self.k)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, l: usize) -> usize {
        debug_assert!(i < self.m && j < self.p && l < self.k);
        (i * self.p + j) * self.k + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> S {
        self.data[self.idx(i, j, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, l: usize, v: S) {
        let ix = self.idx(i, j, l);
        self.data[ix] = v;
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// Slice `[i, ., .]` as a `p x K` matrix.
    pub fn slice_response(&self, i: usize) -> Matrix<S> {
        Matrix::from_fn(self.p, self.k, |j, l| self.get(i, j, l))
    }

    pub fn set_slice_response(&mut self, i: usize, slice: &Matrix<S>) {
        assert_eq!((slice.rows(), slice.cols()), (self.p, self.k));
        for j in 0..self.p {
            for l in 0..self.k {
                self.set(i, j, l, slice.get(j, l));
            }
        }
    }

    /// Fiber `[i, j, .]` of length K.
    pub fn fiber(&self, i: usize, j: usize) -> Vec<S> {
        (0..self.k).map(|l| self.get(i, j, l)).collect()
    }

    pub fn set_fiber(&mut self, i: usize, j: usize, fiber: &[S]) {
        assert_eq!(fiber.len(), self.k);
        for (l, &v) in fiber.iter().enumerate() {
            self.set(i, j, l, v);
        }
    }

    pub fn frob_norm(&self) -> S {
        self.data.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    pub fn sub(&self, other: &CoefTensor<S>) -> CoefTensor<S> {
        assert_eq!(self.dims(), other.dims());
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        CoefTensor { m: self.m, p: self.p, k: self.k, data }
    }

    pub fn add(&self, other: &CoefTensor<S>) -> CoefTensor<S> {
        assert_eq!(self.dims(), other.dims());
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        CoefTensor { m: self.m, p: self.p, k: self.k, data }
    }

    pub fn scaled(&self, c: S) -> CoefTensor<S> {
        let data = self.data.iter().map(|&a| a * c).collect();
        CoefTensor { m: self.m, p: self.p, k: self.k, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Mode-n unfolding (see the module docs for the index convention).
pub fn matricize<S: Scalar>(t: &CoefTensor<S>, mode: usize) -> Result<Matrix<S>> {
    let (m, p, k) = t.dims();
    match mode {
        1 => Ok(Matrix::from_fn(m, p * k, |i, col| t.get(i, col % p, col / p))),
        2 => Ok(Matrix::from_fn(p, m * k, |j, col| t.get(col % m, j, col / m))),
        3 => Ok(Matrix::from_fn(k, m * p, |l, col| t.get(col % m, col / m, l))),
        _ => Err(Error::Domain(format!("matricize mode {mode} not in 1..=3"))),
    }
}

/// Inverse of [`matricize`]: fold a mode-n unfolding back into a tensor of
/// the given dims.
pub fn fold<S: Scalar>(mat: &Matrix<S>, mode: usize, dims: (usize, usize, usize)) -> Result<CoefTensor<S>> {
    let (m, p, k) = dims;
    let expect = match mode {
        1 => (m, p * k),
        2 => (p, m * k),
        3 => (k, m * p),
        _ => return Err(Error::Domain(format!("fold mode {mode} not in 1..=3"))),
    };
    if (mat.rows(), mat.cols()) != expect {
        return Err(Error::DimMismatch(format!(
            "fold mode {mode}: matrix {}x{} does not match dims {m}x{p}x{k}",
            mat.rows(),
            mat.cols()
        )));
    }
    let t = match mode {
        1 => CoefTensor::from_fn(m, p, k, |i, j, l| mat.get(i, j + p * l)),
        2 => CoefTensor::from_fn(m, p, k, |i, j, l| mat.get(j, i + m * l)),
        _ => CoefTensor::from_fn(m, p, k, |i, j, l| mat.get(l, i + m * j)),
    };
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{CounterRng, RngSeed};

    fn random_tensor(m: usize, p: usize, k: usize, seed: u64) -> CoefTensor<f64> {
        let mut rng = CounterRng::new(RngSeed::new(seed, 0));
        CoefTensor::from_fn(m, p, k, |_, _, _| rng.standard_normal())
    }

    #[test]
    fn khatri_rao_scalar_case() {
        let a = Matrix::from_vec(1, 1, vec![1.0]);
        let b = Matrix::from_vec(1, 1, vec![1.0]);
        let kr = khatri_rao(&a, &b).unwrap();
        assert_eq!(kr.as_slice(), &[1.0]);
    }

    #[test]
    fn khatri_rao_hand_kronecker() {
        // a = (1,2)^T, b = (3,4)^T -> kron = (3,4,6,8)^T
        let a = Matrix::from_vec(2, 1, vec![1.0, 2.0]);
        let b = Matrix::from_vec(2, 1, vec![3.0, 4.0]);
        let kr = khatri_rao(&a, &b).unwrap();
        assert_eq!(kr.as_slice(), &[3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn khatri_rao_matches_per_column_kronecker_oracle() {
        let mut rng = CounterRng::new(RngSeed::new(3, 0));
        let a = Matrix::from_fn(3, 2, |_, _| rng.standard_normal());
        let b = Matrix::from_fn(4, 2, |_, _| rng.standard_normal());
        let kr = khatri_rao(&a, &b).unwrap();
        for r in 0..2 {
            // naive per-column Kronecker
            for ia in 0..3 {
                for ib in 0..4 {
                    let expect = a.get(ia, r) * b.get(ib, r);
                    assert_eq!(kr.get(ia * 4 + ib, r), expect);
                }
            }
        }
    }

    #[test]
    fn khatri_rao_column_mismatch_errors() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(2, 3);
        assert!(khatri_rao::<f64>(&a, &b).is_err());
    }

    #[test]
    fn matricize_singleton() {
        let mut t = CoefTensor::zeros(1, 1, 1);
        t.set(0, 0, 0, 4.25);
        let m = matricize(&t, 1).unwrap();
        assert_eq!((m.rows(), m.cols()), (1, 1));
        assert_eq!(m.get(0, 0), 4.25);
    }

    #[test]
    fn matricize_fold_round_trip_all_modes() {
        let t = random_tensor(4, 3, 2, 99);
        for mode in 1..=3 {
            let m = matricize(&t, mode).unwrap();
            let back = fold(&m, mode, t.dims()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn matricize_invalid_mode_errors() {
        let t = random_tensor(2, 2, 2, 1);
        assert!(matricize(&t, 0).is_err());
        assert!(matricize(&t, 4).is_err());
    }

    #[test]
    fn mode1_column_ordering_is_mode2_fastest() {
        // entry [i, j, k] must land in column j + p*k
        let t = random_tensor(2, 3, 2, 5);
        let m1 = matricize(&t, 1).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                for l in 0..2 {
                    assert_eq!(m1.get(i, j + 3 * l), t.get(i, j, l));
                }
            }
        }
    }

    #[test]
    fn cholesky_solves_spd_system() {
        // A = L L^T with a known L
        let l = Matrix::from_vec(3, 3, vec![2.0, 0.0, 0.0, 0.5, 1.5, 0.0, -1.0, 0.3, 1.1]);
        let a = l.matmul(&l.transpose());
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a.get(i, j) * x_true[j]).sum()).collect();
        let x = cholesky_solve(&a, &b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn solve_general_matches_known_solution() {
        let a = Matrix::from_vec(2, 2, vec![0.0, 1.0, 2.0, 1.0]);
        let x: Vec<f64> = solve_general(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn generic_over_f32() {
        let a = Matrix::<f32>::from_vec(2, 1, vec![1.0, 2.0]);
        let b = Matrix::<f32>::from_vec(2, 1, vec![3.0, 4.0]);
        let kr = khatri_rao(&a, &b).unwrap();
        assert_eq!(kr.as_slice(), &[3.0f32, 4.0, 6.0, 8.0]);
    }
}
