//! CP (CANDECOMP/PARAFAC) factor representation of the coefficient tensor.

use crate::error::{Error, Result};
use crate::rng::{CounterRng, RngSeed};
use crate::scalar::Scalar;
use crate::tensor::{CoefTensor, Matrix};

/// Rank-R decomposition `B = sum_r nu_r by_r o bx_r o bc_r` together with the
/// background intensities `mu`.
///
/// Normalization convention: every factor column has unit Euclidean norm,
/// `nu_r` carries the product of the pre-normalization column norms, and the
/// sign of `nu_r` is kept nonnegative by flipping the response-mode column.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors<S> {
    pub weights: Vec<S>,
    pub by: Matrix<S>,
    pub bx: Matrix<S>,
    pub bc: Matrix<S>,
    pub mu: Vec<S>,
}

impl<S: Scalar> CpFactors<S> {
    pub fn new(weights: Vec<S>, by: Matrix<S>, bx: Matrix<S>, bc: Matrix<S>, mu: Vec<S>) -> Result<Self> {
        let r = weights.len();
        if by.cols() != r || bx.cols() != r || bc.cols() != r {
            return Err(Error::DimMismatch(format!(
                "factor column counts ({}, {}, {}) must equal rank {r}",
                by.cols(),
                bx.cols(),
                bc.cols()
            )));
        }
        if mu.len() != by.rows() {
            return Err(Error::DimMismatch(format!(
                "mu length {} must equal response dim {}",
                mu.len(),
                by.rows()
            )));
        }
        Ok(CpFactors { weights, by, bx, bc, mu })
    }

    /// All-zero factors of the given shape.
    pub fn zeros(m: usize, p: usize, k: usize, rank: usize) -> Self {
        CpFactors {
            weights: vec![S::zero(); rank],
            by: Matrix::zeros(m, rank),
            bx: Matrix::zeros(p, rank),
            bc: Matrix::zeros(k, rank),
            mu: vec![S::zero(); m],
        }
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.by.rows(), self.bx.rows(), self.bc.rows())
    }

    /// Rescale every column to unit norm, absorbing norms and signs into the
    /// weights (zero columns keep weight zero).
    pub fn normalize(&mut self) {
        let r = self.rank();
        for c in 0..r {
            let mut w = self.weights[c];
            for mat in [&mut self.by, &mut self.bx, &mut self.bc] {
                let norm = (0..mat.rows()).map(|i| mat.get(i, c) * mat.get(i, c)).sum::<S>().sqrt();
                if norm > S::zero() {
                    for i in 0..mat.rows() {
                        let v = mat.get(i, c) / norm;
                        mat.set(i, c, v);
                    }
                    w = w * norm;
                } else {
                    w = S::zero();
                }
            }
            if w < S::zero() {
                w = -w;
                for i in 0..self.by.rows() {
                    let v = -self.by.get(i, c);
                    self.by.set(i, c, v);
                }
            }
            self.weights[c] = w;
        }
    }

    /// Compose the dense coefficient tensor.
    pub fn compose(&self) -> CoefTensor<S> {
        let (m, p, k) = self.dims();
        let r = self.rank();
        let mut t = CoefTensor::zeros(m, p, k);
        for c in 0..r {
            let w = self.weights[c];
            if w == S::zero() {
                continue;
            }
            for i in 0..m {
                let wy = w * self.by.get(i, c);
                if wy == S::zero() {
                    continue;
                }
                for j in 0..p {
                    let wyx = wy * self.bx.get(j, c);
                    for l in 0..k {
                        let v = t.get(i, j, l) + wyx * self.bc.get(l, c);
                        t.set(i, j, l, v);
                    }
                }
            }
        }
        t
    }
}

/// Compose factors after checking internal consistency.
pub fn cp_compose<S: Scalar>(f: &CpFactors<S>) -> Result<CoefTensor<S>> {
    let r = f.rank();
    if f.by.cols() != r || f.bx.cols() != r || f.bc.cols() != r {
        return Err(Error::DimMismatch("factor column counts differ from rank".into()));
    }
    Ok(f.compose())
}

/// Greedy rank-R initialization of CP factors from a dense tensor: repeatedly
/// take the dominant singular structure of the mode-1 unfolding of the
/// residual and split its right vector into a rank-one `p x K` pair.
/// Deterministic given the seed (used to start the power iterations).
pub fn cp_init<S: Scalar>(target: &CoefTensor<S>, rank: usize, seed: RngSeed) -> CpFactors<S> {
    let (m, p, k) = target.dims();
    let mut residual = target.clone();
    let mut f = CpFactors::zeros(m, p, k, rank);
    let mut rng = CounterRng::new(seed.child(0x6370_696e, 0)); // "cpin"
    for c in 0..rank {
        let unf = crate::tensor::matricize(&residual, 1).expect("mode 1 valid");
        let (sigma, u, v) = dominant_singular_triplet(&unf, &mut rng);
        if sigma <= S::from_f64_lossy(1e-14) {
            break; // residual numerically zero; leave trailing columns zero
        }
        // split v (length pK, index j + p*l) into bx (p) x bc (K)
        let vmat = Matrix::from_fn(p, k, |j, l| v[j + p * l]);
        let (_, bx, bc) = dominant_singular_triplet(&vmat, &mut rng);
        // weight recovered by projecting the residual on the rank-1 candidate
        let mut w = S::zero();
        for i in 0..m {
            for j in 0..p {
                for l in 0..k {
                    w += residual.get(i, j, l) * u[i] * bx[j] * bc[l];
                }
            }
        }
        for i in 0..m {
            f.by.set(i, c, u[i]);
        }
        for j in 0..p {
            f.bx.set(j, c, bx[j]);
        }
        for l in 0..k {
            f.bc.set(l, c, bc[l]);
        }
        f.weights[c] = w;
        // deflate
        for i in 0..m {
            for j in 0..p {
                for l in 0..k {
                    let v = residual.get(i, j, l) - w * u[i] * bx[j] * bc[l];
                    residual.set(i, j, l, v);
                }
            }
        }
    }
    f.normalize();
    f
}

/// Dominant singular triplet of a dense matrix via power iteration on
/// `A A^T` (or `A^T A`, whichever is smaller).
fn dominant_singular_triplet<S: Scalar>(a: &Matrix<S>, rng: &mut CounterRng) -> (S, Vec<S>, Vec<S>) {
    let (rows, cols) = (a.rows(), a.cols());
    let mut u: Vec<S> = (0..rows).map(|_| S::from_f64_lossy(rng.standard_normal())).collect();
    normalize_vec(&mut u);
    let mut v = vec![S::zero(); cols];
    let mut sigma = S::zero();
    for _ in 0..200 {
        // v = A^T u
        for x in v.iter_mut() {
            *x = S::zero();
        }
        for i in 0..rows {
            let ui = u[i];
            let row = a.row(i);
            for (vj, &aij) in v.iter_mut().zip(row) {
                *vj += aij * ui;
            }
        }
        let vn = normalize_vec(&mut v);
        // u = A v
        for i in 0..rows {
            let row = a.row(i);
            u[i] = row.iter().zip(&v).map(|(&aij, &vj)| aij * vj).sum();
        }
        let un = normalize_vec(&mut u);
        let new_sigma = un;
        if (new_sigma - sigma).abs() <= S::from_f64_lossy(1e-13) * new_sigma.max(S::one()) {
            sigma = new_sigma;
            break;
        }
        sigma = new_sigma;
        let _ = vn;
    }
    (sigma, u, v)
}

fn normalize_vec<S: Scalar>(v: &mut [S]) -> S {
    let n = v.iter().map(|&x| x * x).sum::<S>().sqrt();
    if n > S::zero() {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}
