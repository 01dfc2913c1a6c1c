//! Log-likelihood of the intensity model, its derivatives, and the Newton
//! solver for the per-response subproblem.
//!
//! The event term is always summed exactly at the observed event times. The
//! integral term integrates the floored intensity (under the linear link the
//! raw predictor can go negative and an unfloored integral would make the
//! likelihood unbounded above). With `exact_pieces` and a linear link it is
//! computed as exact per-event antiderivatives of the raw predictor plus a
//! grid-evaluated correction `int (eps - u)_+` that vanishes wherever the
//! intensity stays above the floor; otherwise a trapezoidal rule on the grid
//! is used.
//!
//! Scaling convention: the joint log-likelihood reported by [`log_lik`]
//! carries the `1/T` factor so values are comparable across horizons;
//! per-response quantities ([`PerResponseFit::loglik`], [`grad_hess_i`]) are
//! unscaled.

use rayon::prelude::*;

use crate::basis::BasisSpec;
use crate::cp::CpFactors;
use crate::error::{Error, Result};
use crate::events::MultiProcess;
use crate::features::{feature_integrals, FeatureTable};
use crate::link::{LinkSpec, EPS_FLOOR};
use crate::scalar::Scalar;
use crate::tensor::{ridge_solve, CoefTensor, Matrix};

/// Uniform quadrature grid `0, delta, ..., T` for the intensity integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid<S> {
    pub delta: S,
    /// Use exact breakpoint antiderivatives where the integrand allows it.
    pub exact_pieces: bool,
}

impl<S: Scalar> QuadratureGrid<S> {
    pub fn new(delta: S, exact_pieces: bool) -> Result<Self> {
        if !(delta > S::zero()) {
            return Err(Error::InvalidConfig(format!("grid step must be > 0, got {delta}")));
        }
        Ok(QuadratureGrid { delta, exact_pieces })
    }

    /// Grid points covering `[0, T]`; `delta` must divide `T` within 1e-9.
    pub fn points(&self, horizon: S) -> Result<Vec<S>> {
        let ratio = (horizon / self.delta).to_f64_lossy();
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "grid step {} does not divide horizon {horizon}",
                self.delta
            )));
        }
        let n = n as usize;
        let mut pts: Vec<S> = (0..n).map(|q| self.delta * S::from_usize_lossy(q)).collect();
        pts.push(horizon);
        Ok(pts)
    }
}

impl<S: Scalar> Default for QuadratureGrid<S> {
    fn default() -> Self {
        QuadratureGrid { delta: S::from_f64_lossy(0.05), exact_pieces: true }
    }
}

/// Precomputed convolution features for one data set: everything the
/// likelihood and its derivatives need that does not depend on parameters.
pub struct LikelihoodData<S> {
    pub link: LinkSpec,
    pub grid: QuadratureGrid<S>,
    m: usize,
    p: usize,
    k: usize,
    pk: usize,
    horizon: S,
    event_counts: Vec<usize>,
    /// features at each response's own event times
    event_features: Vec<FeatureTable<S>>,
    /// exact integrals of G over [0, T] when the analytic path applies
    analytic_integrals: Option<Matrix<S>>,
    /// features at grid points plus trapezoid weights otherwise
    grid_features: Option<FeatureTable<S>>,
    grid_weights: Vec<S>,
    /// plain grid used by the analytic path for the floor correction
    floor_features: Option<FeatureTable<S>>,
    floor_weights: Vec<S>,
    /// coordinatewise extrema of the floor grid rows per block of nodes;
    /// features are locally supported, so the blockwise lower bound on the
    /// predictor is tight enough to skip most of the grid
    floor_blocks: Vec<FloorBlock<S>>,
    /// column-major copy of the floor grid for dense scans
    floor_cols: Vec<S>,
}

const FLOOR_BLOCK_NODES: usize = 64;

struct FloorBlock<S> {
    start: usize,
    end: usize,
    /// dims with a nonzero feature somewhere in the block: (dim, min, max)
    active: Vec<(u32, S, S)>,
}

impl<S: Scalar> LikelihoodData<S> {
    pub fn build(
        x: &MultiProcess<S>,
        y: &MultiProcess<S>,
        bases: &[BasisSpec<S>],
        link: LinkSpec,
        grid: QuadratureGrid<S>,
    ) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::InvalidConfig("need at least one basis".into()));
        }
        if x.horizon() != y.horizon() {
            return Err(Error::DimMismatch(format!(
                "predictor horizon {} vs response horizon {}",
                x.horizon(),
                y.horizon()
            )));
        }
        let horizon = x.horizon();
        let pk = x.dim() * bases.len();
        let event_features = y
            .iter()
            .map(|s| FeatureTable::build(x, bases, s.times()))
            .collect::<Result<Vec<_>>>()?;
        let analytic_ok = grid.exact_pieces && link == LinkSpec::Linear;
        let analytic_integrals = if analytic_ok { feature_integrals(x, bases) } else { None };
        let (grid_features, grid_weights) = if analytic_integrals.is_none() {
            let pts = grid.points(horizon)?;
            if grid.exact_pieces {
                // piecewise trapezoid: nodes include the feature jump points,
                // evaluated from the correct side of each jump
                let jumps = crate::features::feature_breakpoints(x, bases);
                let mut nodes = pts;
                nodes.extend_from_slice(&jumps);
                nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite grid nodes"));
                nodes.dedup();
                let mut times = Vec::with_capacity(nodes.len() + jumps.len());
                let mut sides = Vec::with_capacity(times.capacity());
                let mut left_row = Vec::with_capacity(nodes.len());
                let mut right_row = Vec::with_capacity(nodes.len());
                for &u in &nodes {
                    let is_jump = jumps
                        .binary_search_by(|x_v| x_v.partial_cmp(&u).expect("finite"))
                        .is_ok();
                    left_row.push(times.len());
                    times.push(u);
                    sides.push(false);
                    if is_jump {
                        right_row.push(times.len());
                        times.push(u);
                        sides.push(true);
                    } else {
                        right_row.push(times.len() - 1);
                    }
                }
                let mut w = vec![S::zero(); times.len()];
                let half = S::from_f64_lossy(0.5);
                for q in 0..nodes.len() - 1 {
                    let len = nodes[q + 1] - nodes[q];
                    w[right_row[q]] += half * len;
                    w[left_row[q + 1]] += half * len;
                }
                let table = FeatureTable::build_sided(x, bases, &times, &sides)?;
                (Some(table), w)
            } else {
                let table = FeatureTable::build(x, bases, &pts)?;
                let n = pts.len();
                let mut w = vec![grid.delta; n];
                w[0] = grid.delta / (S::one() + S::one());
                w[n - 1] = w[0];
                (Some(table), w)
            }
        } else {
            (None, Vec::new())
        };
        #[allow(clippy::type_complexity)]
        let (floor_features, floor_weights, floor_blocks, floor_cols) = if analytic_integrals
            .is_some()
        {
            let pts = grid.points(horizon)?;
            let table = FeatureTable::build(x, bases, &pts)?;
            let n = pts.len();
            let mut w = vec![grid.delta; n];
            w[0] = grid.delta / (S::one() + S::one());
            w[n - 1] = w[0];
            let mut blocks = Vec::with_capacity(n.div_ceil(FLOOR_BLOCK_NODES));
            let mut start = 0;
            while start < n {
                let end = (start + FLOOR_BLOCK_NODES).min(n);
                let mut col_min = vec![S::infinity(); pk];
                let mut col_max = vec![S::neg_infinity(); pk];
                for q in start..end {
                    for (d, &v) in table.row(q).iter().enumerate() {
                        col_min[d] = col_min[d].min(v);
                        col_max[d] = col_max[d].max(v);
                    }
                }
                let active = (0..pk)
                    .filter(|&d| col_min[d] != S::zero() || col_max[d] != S::zero())
                    .map(|d| (d as u32, col_min[d], col_max[d]))
                    .collect();
                blocks.push(FloorBlock { start, end, active });
                start = end;
            }
            let mut cols = vec![S::zero(); n * pk];
            for q in 0..n {
                for (d, &v) in table.row(q).iter().enumerate() {
                    cols[d * n + q] = v;
                }
            }
            (Some(table), w, blocks, cols)
        } else {
            (None, Vec::new(), Vec::new(), Vec::new())
        };
        Ok(LikelihoodData {
            link,
            grid,
            m: y.dim(),
            p: x.dim(),
            k: bases.len(),
            pk,
            horizon,
            event_counts: y.iter().map(|s| s.len()).collect(),
            event_features,
            analytic_integrals,
            grid_features,
            grid_weights,
            floor_features,
            floor_weights,
            floor_blocks,
            floor_cols,
        })
    }

    #[inline]
    pub fn n_responses(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn coef_len(&self) -> usize {
        self.pk
    }

    #[inline]
    pub fn predictor_dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn basis_count(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn horizon(&self) -> S {
        self.horizon
    }

    #[inline]
    pub fn event_count(&self, i: usize) -> usize {
        self.event_counts[i]
    }

    pub fn total_events(&self) -> usize {
        self.event_counts.iter().sum()
    }
}

#[inline]
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

// integrand of the compensator: the floored intensity
impl<S: Scalar> LikelihoodData<S> {
    /// True when the block's coordinatewise bound proves `u >= eps + h` on
    /// every node in it, making its correction contribution exactly zero.
    #[inline]
    fn block_inactive(&self, block: &FloorBlock<S>, mu_i: S, slice: &[S], eps: S) -> bool {
        let mut bound = mu_i;
        for &(d, lo, hi) in &block.active {
            let c = slice[d as usize];
            bound += if c > S::zero() { c * lo } else { c * hi };
        }
        bound >= eps + S::from_f64_lossy(FLOOR_BAND)
    }

    /// Indices of floor blocks whose certificate fails; `None` means a dense
    /// scan is cheaper.
    fn active_floor_blocks(&self, mu_i: S, slice: &[S], eps: S) -> Option<Vec<usize>> {
        let mut active = Vec::new();
        for (b, block) in self.floor_blocks.iter().enumerate() {
            if !self.block_inactive(block, mu_i, slice, eps) {
                active.push(b);
            }
        }
        if active.len() * 3 >= self.floor_blocks.len() {
            None
        } else {
            Some(active)
        }
    }

    /// Dense column-major evaluation of the predictor on the floor grid.
    fn floor_predictor_into(&self, mu_i: S, slice: &[S], out: &mut Vec<S>) {
        let n = self.floor_weights.len();
        out.clear();
        out.resize(n, mu_i);
        for (d, &c) in slice.iter().enumerate() {
            if c == S::zero() {
                continue;
            }
            let col = &self.floor_cols[d * n..(d + 1) * n];
            for (u, &g) in out.iter_mut().zip(col) {
                *u += c * g;
            }
        }
    }
}

/// Width of the quadratic band smoothing the floor hinge; keeps the
/// subproblem objective twice differentiable for the Newton solver.
const FLOOR_BAND: f64 = 1e-3;

/// `int (eps - u)_+` hinge smoothed over `[eps - h, eps + h]`.
#[inline]
fn hinge<S: Scalar>(eps: S, u: S) -> S {
    let h = S::from_f64_lossy(FLOOR_BAND);
    if u >= eps + h {
        S::zero()
    } else if u <= eps - h {
        eps - u
    } else {
        let d = eps + h - u;
        d * d / (S::from_f64_lossy(4.0) * h)
    }
}

#[inline]
fn hinge_d1<S: Scalar>(eps: S, u: S) -> S {
    let h = S::from_f64_lossy(FLOOR_BAND);
    if u >= eps + h {
        S::zero()
    } else if u <= eps - h {
        -S::one()
    } else {
        -(eps + h - u) / (S::from_f64_lossy(2.0) * h)
    }
}

#[inline]
fn hinge_d2<S: Scalar>(eps: S, u: S) -> S {
    let h = S::from_f64_lossy(FLOOR_BAND);
    if u >= eps + h || u <= eps - h {
        S::zero()
    } else {
        S::one() / (S::from_f64_lossy(2.0) * h)
    }
}

#[inline]
fn integrand_eval<S: Scalar>(link: LinkSpec, eps: S, u: S) -> S {
    match link {
        LinkSpec::Linear => u.max(eps),
        _ => link.eval(u),
    }
}

#[inline]
fn integrand_d1<S: Scalar>(link: LinkSpec, eps: S, u: S) -> S {
    match link {
        LinkSpec::Linear => {
            if u > eps {
                S::one()
            } else {
                S::zero()
            }
        }
        _ => link.d1(u),
    }
}

#[inline]
fn integrand_d2<S: Scalar>(link: LinkSpec, eps: S, u: S) -> S {
    match link {
        LinkSpec::Linear => S::zero(),
        _ => link.d2(u),
    }
}

/// Unscaled log-likelihood of response `i` at `(mu_i, slice)`.
pub fn log_lik_i<S: Scalar>(data: &LikelihoodData<S>, i: usize, mu_i: S, slice: &[S]) -> S {
    let eps = S::from_f64_lossy(EPS_FLOOR);
    let link = data.link;
    let table = &data.event_features[i];
    let mut event_term = S::zero();
    for q in 0..table.n_rows() {
        let u = mu_i + dot(table.row(q), slice);
        event_term += link.eval(u).max(eps).ln();
    }
    let integral = match &data.analytic_integrals {
        Some(ints) => {
            // raw linear part exactly, plus the floor correction where the
            // predictor dips below the floor
            let raw = mu_i * data.horizon + dot(ints.as_slice(), slice);
            let mut corr = S::zero();
            match data.active_floor_blocks(mu_i, slice, eps) {
                Some(active) => {
                    let table = data.floor_features.as_ref().expect("floor grid built");
                    for &b in &active {
                        let block = &data.floor_blocks[b];
                        for q in block.start..block.end {
                            let u = mu_i + dot(table.row(q), slice);
                            corr += data.floor_weights[q] * hinge(eps, u);
                        }
                    }
                }
                None => {
                    let mut u_all = Vec::new();
                    data.floor_predictor_into(mu_i, slice, &mut u_all);
                    for (q, &u) in u_all.iter().enumerate() {
                        corr += data.floor_weights[q] * hinge(eps, u);
                    }
                }
            }
            raw + corr
        }
        None => {
            let table = data.grid_features.as_ref().expect("grid features built");
            let mut acc = S::zero();
            for q in 0..table.n_rows() {
                let u = mu_i + dot(table.row(q), slice);
                acc += data.grid_weights[q] * integrand_eval(link, eps, u);
            }
            acc
        }
    };
    event_term - integral
}

/// Joint log-likelihood `(1/T) sum_i L_i`, with `B` given as a dense tensor.
pub fn log_lik_tensor<S: Scalar>(
    data: &LikelihoodData<S>,
    mu: &[S],
    tensor: &CoefTensor<S>,
) -> Result<S> {
    let (m, p, k) = tensor.dims();
    if m != data.m || p * k != data.pk || mu.len() != m {
        return Err(Error::DimMismatch(format!(
            "tensor {m}x{p}x{k} with {} mu entries vs data with m = {}, pK = {}",
            mu.len(),
            data.m,
            data.pk
        )));
    }
    let mut total = S::zero();
    for i in 0..m {
        let slice = tensor.slice_response(i);
        total += log_lik_i(data, i, mu[i], slice.as_slice());
    }
    let value = total / data.horizon;
    if !value.is_finite() {
        return Err(Error::NonFinite("log-likelihood".into()));
    }
    Ok(value)
}

/// Joint log-likelihood with `B` given in CP factor form.
pub fn log_lik_factors<S: Scalar>(data: &LikelihoodData<S>, f: &CpFactors<S>) -> Result<S> {
    log_lik_tensor(data, &f.mu, &f.compose())
}

/// One-call convenience that builds the feature cache and evaluates.
pub fn log_lik<S: Scalar>(
    mu: &[S],
    tensor: &CoefTensor<S>,
    x: &MultiProcess<S>,
    y: &MultiProcess<S>,
    bases: &[BasisSpec<S>],
    link: LinkSpec,
    grid: QuadratureGrid<S>,
) -> Result<S> {
    let data = LikelihoodData::build(x, y, bases, link, grid)?;
    log_lik_tensor(&data, mu, tensor)
}

/// Unscaled gradient (length `1 + pK`, entry 0 is `mu_i`) and Hessian of the
/// log-likelihood of response `i`. Derivatives honor the floor: where the
/// raw intensity sits at the floor the event term contributes zero slope.
pub fn grad_hess_i<S: Scalar>(
    data: &LikelihoodData<S>,
    i: usize,
    mu_i: S,
    slice: &[S],
) -> (Vec<S>, Matrix<S>) {
    let eps = S::from_f64_lossy(EPS_FLOOR);
    let link = data.link;
    let d = 1 + data.pk;
    let mut grad = vec![S::zero(); d];
    let mut hess = Matrix::zeros(d, d);

    // symmetric rank-1 update over the augmented feature (1, row); only the
    // upper triangle is touched, mirrored once at the end
    let rank1 = |row: &[S], w1: S, w2: S, grad: &mut [S], hess: &mut Matrix<S>| {
        if w1 != S::zero() {
            grad[0] += w1;
            for (g, &x_v) in grad[1..].iter_mut().zip(row) {
                *g += w1 * x_v;
            }
        }
        if w2 != S::zero() {
            let n = row.len() + 1;
            let hd = hess.as_mut_slice();
            hd[0] += w2;
            for (h, &xb) in hd[1..n].iter_mut().zip(row) {
                *h += w2 * xb;
            }
            for (a, &xa) in row.iter().enumerate() {
                let wxa = w2 * xa;
                let off = (a + 1) * n + (a + 1);
                for (h, &xb) in hd[off..(a + 2) * n].iter_mut().zip(&row[a..]) {
                    *h += wxa * xb;
                }
            }
        }
    };

    let table = &data.event_features[i];
    for q in 0..table.n_rows() {
        let row = table.row(q);
        let u = mu_i + dot(row, slice);
        let raw = link.eval(u);
        if raw > eps {
            let d1 = link.d1(u);
            let d2 = link.d2(u);
            let w1 = d1 / raw;
            let w2 = (d2 * raw - d1 * d1) / (raw * raw);
            rank1(row, w1, w2, &mut grad, &mut hess);
        }
    }

    match &data.analytic_integrals {
        Some(ints) => {
            // raw linear part: d/dmu int = T, d/dA = int G, curvature zero
            grad[0] -= data.horizon;
            for (g, &v) in grad[1..].iter_mut().zip(ints.as_slice()) {
                *g -= v;
            }
            // floor correction: below the floor the compensator flattens
            let table = data.floor_features.as_ref().expect("floor grid built");
            match data.active_floor_blocks(mu_i, slice, eps) {
                Some(active) => {
                    for &b in &active {
                        let block = &data.floor_blocks[b];
                        for q in block.start..block.end {
                            let row = table.row(q);
                            let u = mu_i + dot(row, slice);
                            let d1 = hinge_d1(eps, u);
                            if d1 != S::zero() {
                                let w = data.floor_weights[q];
                                rank1(row, -w * d1, -w * hinge_d2(eps, u), &mut grad, &mut hess);
                            }
                        }
                    }
                }
                None => {
                    let mut u_all = Vec::new();
                    data.floor_predictor_into(mu_i, slice, &mut u_all);
                    for (q, &u) in u_all.iter().enumerate() {
                        let d1 = hinge_d1(eps, u);
                        if d1 != S::zero() {
                            let w = data.floor_weights[q];
                            rank1(table.row(q), -w * d1, -w * hinge_d2(eps, u), &mut grad, &mut hess);
                        }
                    }
                }
            }
        }
        None => {
            let gtable = data.grid_features.as_ref().expect("grid features built");
            for q in 0..gtable.n_rows() {
                let row = gtable.row(q);
                let u = mu_i + dot(row, slice);
                let w = data.grid_weights[q];
                rank1(
                    row,
                    -w * integrand_d1(link, eps, u),
                    -w * integrand_d2(link, eps, u),
                    &mut grad,
                    &mut hess,
                );
            }
        }
    }

    // mirror the upper triangle
    for a in 0..d {
        for b in 0..a {
            hess.set(a, b, hess.get(b, a));
        }
    }
    (grad, hess)
}

/// Result of one per-response solve.
#[derive(Debug, Clone)]
pub struct PerResponseFit<S> {
    pub mu: S,
    pub slice: Matrix<S>,
    /// Unscaled log-likelihood of this response at the solution.
    pub loglik: S,
    pub converged: bool,
    pub iterations: usize,
}

/// Quadratic anchor `(weight/2) * ||A - target||_F^2` added to the negated
/// log-likelihood in the subproblem objective.
pub struct Anchor<'a, S> {
    pub weight: S,
    pub target: &'a Matrix<S>,
}

/// Newton controls for the subproblem solver.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions<S> {
    pub tol: S,
    pub max_iter: usize,
    /// Tikhonov term `(ridge/2)(mu^2 + ||A||^2)`, used by the warm start
    /// where event-poor series would otherwise diverge.
    pub ridge: S,
}

impl<S: Scalar> Default for NewtonOptions<S> {
    fn default() -> Self {
        NewtonOptions { tol: S::from_f64_lossy(1e-8), max_iter: 50, ridge: S::zero() }
    }
}

fn subproblem_objective<S: Scalar>(
    data: &LikelihoodData<S>,
    i: usize,
    mu_i: S,
    slice: &[S],
    weight: S,
    anchors: &[Anchor<'_, S>],
    ridge: S,
) -> S {
    let mut f = -log_lik_i(data, i, mu_i, slice) * weight;
    let half = S::from_f64_lossy(0.5);
    for a in anchors {
        let mut q = S::zero();
        for (&s, &t) in slice.iter().zip(a.target.as_slice()) {
            let d = s - t;
            q += d * d;
        }
        f += half * a.weight * q;
    }
    if ridge > S::zero() {
        let q = mu_i * mu_i + slice.iter().map(|&s| s * s).sum::<S>();
        f += half * weight * ridge * q;
    }
    f
}

/// Minimize `-weight * L_i + sum anchors + weight * ridge / 2 * ||theta||^2`
/// over `(mu_i, A_i)` by damped projected Newton with step halving. The
/// weight carries the `1/T` likelihood scaling of the joint objective; with
/// no anchors it does not move the minimizer. Under the linear and rectifier
/// links the background intensity is kept at or above the floor, which
/// removes the degenerate flat region where every intensity sits on the
/// floor. Non-convergence is reported, not fatal: the best iterate is
/// returned with `converged = false`.
pub fn solve_mu_a_subproblem<S: Scalar>(
    data: &LikelihoodData<S>,
    i: usize,
    init_mu: S,
    init_slice: &Matrix<S>,
    weight: S,
    anchors: &[Anchor<'_, S>],
    opts: NewtonOptions<S>,
) -> PerResponseFit<S> {
    let d = 1 + data.pk;
    let eps = S::from_f64_lossy(EPS_FLOOR);
    let mu_floor = match data.link {
        LinkSpec::Sigmoid => S::neg_infinity(),
        _ => eps,
    };
    let mut mu_i = init_mu.max(mu_floor);
    let mut slice: Vec<S> = init_slice.as_slice().to_vec();
    let mut f_cur = subproblem_objective(data, i, mu_i, &slice, weight, anchors, opts.ridge);
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iter {
        iterations = it + 1;
        let (ll_grad, ll_hess) = grad_hess_i(data, i, mu_i, &slice);
        // gradient and Hessian of the full objective (negated log-likelihood)
        let mut grad: Vec<S> = ll_grad.iter().map(|&g| -g * weight).collect();
        let mut hess = ll_hess;
        hess.scale(-weight);
        let mut anchor_weight = S::zero();
        for a in anchors {
            anchor_weight += a.weight;
            for (idx, (&s, &t)) in slice.iter().zip(a.target.as_slice()).enumerate() {
                grad[idx + 1] += a.weight * (s - t);
            }
        }
        for idx in 1..d {
            hess.set(idx, idx, hess.get(idx, idx) + anchor_weight);
        }
        if opts.ridge > S::zero() {
            let r = weight * opts.ridge;
            grad[0] += r * mu_i;
            hess.set(0, 0, hess.get(0, 0) + r);
            for idx in 1..d {
                grad[idx] += r * slice[idx - 1];
                hess.set(idx, idx, hess.get(idx, idx) + r);
            }
        }

        // at the bound, an outward gradient is inactive (KKT)
        let mut gnorm = S::zero();
        for (idx, &g) in grad.iter().enumerate() {
            let eff = if idx == 0 && mu_i <= mu_floor && g > S::zero() { S::zero() } else { g };
            gnorm = gnorm.max(eff.abs());
        }
        if gnorm < opts.tol {
            converged = true;
            break;
        }

        let neg_grad: Vec<S> = grad.iter().map(|&g| -g).collect();
        let (mut dir, _) = ridge_solve(&hess, &neg_grad);
        // keep single steps bounded; halving handles the rest
        let dn = dir.iter().map(|&x| x * x).sum::<S>().sqrt();
        let cap = S::from_f64_lossy(1e3);
        if dn > cap {
            let sc = cap / dn;
            for x in dir.iter_mut() {
                *x *= sc;
            }
        }

        let mut step = S::one();
        let mut accepted = false;
        for _ in 0..45 {
            let mu_new = (mu_i + step * dir[0]).max(mu_floor);
            let slice_new: Vec<S> =
                slice.iter().zip(&dir[1..]).map(|(&s, &d)| s + step * d).collect();
            let f_new =
                subproblem_objective(data, i, mu_new, &slice_new, weight, anchors, opts.ridge);
            if f_new.is_finite() && f_new < f_cur {
                mu_i = mu_new;
                slice = slice_new;
                f_cur = f_new;
                accepted = true;
                break;
            }
            step = step / (S::one() + S::one());
        }
        if !accepted {
            // no descent along the Newton direction; treat as converged if
            // the gradient is small-ish, otherwise report failure
            converged = gnorm < opts.tol * S::from_f64_lossy(1e4);
            break;
        }
    }

    let slice_mat = Matrix::from_vec(init_slice.rows(), init_slice.cols(), slice.clone());
    PerResponseFit {
        mu: mu_i,
        slice: slice_mat,
        loglik: log_lik_i(data, i, mu_i, &slice),
        converged,
        iterations,
    }
}

/// Starting value for `mu_i`: the constant-intensity fit through the link.
fn mu_start<S: Scalar>(data: &LikelihoodData<S>, i: usize) -> S {
    let rate = (S::from_usize_lossy(data.event_count(i)) / data.horizon)
        .max(S::from_f64_lossy(1e-4));
    match data.link {
        LinkSpec::Linear | LinkSpec::Rectifier => rate,
        LinkSpec::Sigmoid => {
            let r = rate.min(S::from_f64_lossy(1.0 - 1e-4));
            (r / (S::one() - r)).ln()
        }
    }
}

/// Per-response maximum likelihood with a small ridge: the warm start of the
/// penalized fit and the plain baseline estimator.
pub fn fit_unpenalized<S: Scalar>(
    data: &LikelihoodData<S>,
    ridge: S,
) -> (Vec<S>, CoefTensor<S>, Vec<PerResponseFit<S>>) {
    let m = data.n_responses();
    let (p, k) = (data.p, data.k);
    let opts = NewtonOptions { ridge, ..NewtonOptions::default() };
    let fits: Vec<PerResponseFit<S>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let init = Matrix::zeros(p, k);
            solve_mu_a_subproblem(data, i, mu_start(data, i), &init, S::one(), &[], opts)
        })
        .collect();
    let mut mu = Vec::with_capacity(m);
    let mut tensor = CoefTensor::zeros(m, p, k);
    for (i, f) in fits.iter().enumerate() {
        mu.push(f.mu);
        tensor.set_slice_response(i, &f.slice);
    }
    (mu, tensor, fits)
}

/// Warm-start pair shared by penalized fits: background intensities and the
/// dense per-response tensor from [`fit_unpenalized`].
pub fn cp_warm_init<S: Scalar>(data: &LikelihoodData<S>, ridge: S) -> (Vec<S>, CoefTensor<S>) {
    let (mu, tensor, _) = fit_unpenalized(data, ridge);
    (mu, tensor)
}
