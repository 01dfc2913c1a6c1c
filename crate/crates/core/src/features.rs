//! Convolution features `G_jk(t) = (g^(k) * dX_j)(t)`: the response of basis
//! `k` to the strictly-past events of predictor `j`.
//!
//! [`convolve_features`] computes one time point directly. The incremental
//! [`ConvolutionWalker`] serves the likelihood (features at every response
//! event, queried in sorted order) and the response simulator (segment bounds
//! plus candidate evaluations) in amortized linear time.

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::events::MultiProcess;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Feature matrix `G(t)`, shape `p x K`, entries nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<S> {
    pub values: Matrix<S>,
}

impl<S: Scalar> FeatureMatrix<S> {
    pub fn dims(&self) -> (usize, usize) {
        (self.values.rows(), self.values.cols())
    }
}

/// Direct evaluation of `G(t)` from strictly-past events.
pub fn convolve_features<S: Scalar>(
    x: &MultiProcess<S>,
    bases: &[BasisSpec<S>],
    t: S,
) -> Result<FeatureMatrix<S>> {
    if t < S::zero() || t > x.horizon() {
        return Err(Error::Domain(format!(
            "query time {t} outside [0, {}]",
            x.horizon()
        )));
    }
    let p = x.dim();
    let k = bases.len();
    let mut values = Matrix::zeros(p, k);
    for j in 0..p {
        let times = x.series(j).times();
        let n_past = x.series(j).count_before(t);
        for (kk, basis) in bases.iter().enumerate() {
            // only lags within the basis support contribute
            let start = match basis.support_end() {
                Some(end) => times[..n_past].partition_point(|&tl| t - tl > end),
                None => 0,
            };
            let mut acc = S::zero();
            for &tl in &times[start..n_past] {
                acc += basis.eval_unchecked(t - tl);
            }
            values.set(j, kk, acc);
        }
    }
    Ok(FeatureMatrix { values })
}

/// `int_0^T G_jk(t) dt`, exact per event, for bases with a closed-form
/// antiderivative. `None` if any basis lacks one.
pub fn feature_integrals<S: Scalar>(
    x: &MultiProcess<S>,
    bases: &[BasisSpec<S>],
) -> Option<Matrix<S>> {
    let horizon = x.horizon();
    let p = x.dim();
    let k = bases.len();
    let mut out = Matrix::zeros(p, k);
    for (kk, basis) in bases.iter().enumerate() {
        basis.integral_to(horizon)?;
        for j in 0..p {
            let mut acc = S::zero();
            for &tl in x.series(j).times() {
                acc += basis.integral_to(horizon - tl)?;
            }
            out.set(j, kk, acc);
        }
    }
    Some(out)
}

/// Per-predictor, per-basis incremental convolution state. Queries must be
/// issued with nondecreasing times.
pub struct ConvolutionWalker<'a, S> {
    x: &'a MultiProcess<S>,
    bases: &'a [BasisSpec<S>],
    /// next unabsorbed event index per predictor
    next_event: Vec<usize>,
    /// ExpDecay aggregates: per (j, k), sum of exp(-rate * (ref - t_l)) over
    /// absorbed events, referenced at `ref_time[j*K + k]`
    decay_sum: Vec<S>,
    decay_ref: Vec<S>,
    /// Indicator/LogDecay window start pointer per (j, k)
    window_lo: Vec<usize>,
}

impl<'a, S: Scalar> ConvolutionWalker<'a, S> {
    pub fn new(x: &'a MultiProcess<S>, bases: &'a [BasisSpec<S>]) -> Self {
        let p = x.dim();
        let k = bases.len();
        ConvolutionWalker {
            x,
            bases,
            next_event: vec![0; p],
            decay_sum: vec![S::zero(); p * k],
            decay_ref: vec![S::zero(); p * k],
            window_lo: vec![0; p * k],
        }
    }

    #[inline]
    fn k(&self) -> usize {
        self.bases.len()
    }

    /// Absorb events with `t_l < t` (strict past).
    pub fn absorb_before(&mut self, t: S) {
        self.absorb(t, false);
    }

    /// Absorb events with `t_l <= t`.
    pub fn absorb_through(&mut self, t: S) {
        self.absorb(t, true);
    }

    fn absorb(&mut self, t: S, inclusive: bool) {
        let k = self.k();
        for j in 0..self.x.dim() {
            let times = self.x.series(j).times();
            let mut idx = self.next_event[j];
            while idx < times.len() && (times[idx] < t || (inclusive && times[idx] == t)) {
                let tl = times[idx];
                for (kk, basis) in self.bases.iter().enumerate() {
                    if let BasisSpec::ExpDecay { rate, .. } = basis {
                        let s = j * k + kk;
                        let shift = (-(*rate) * (tl - self.decay_ref[s])).exp();
                        self.decay_sum[s] = self.decay_sum[s] * shift + S::one();
                        self.decay_ref[s] = tl;
                    }
                }
                idx += 1;
            }
            self.next_event[j] = idx;
        }
    }

    /// Evaluate `G(t)` over the absorbed events only. Callers guarantee that
    /// every event strictly before `t` has been absorbed and none after.
    ///
    /// `right_limit` selects the value just after `t` for windowed bases: an
    /// indicator contribution whose cutoff expires exactly at `t` belongs to
    /// the left limit only. The comparison is written as `t_l + cutoff` vs
    /// `t` so nodes produced by [`feature_breakpoints`] resolve the side
    /// exactly in floating point.
    pub fn eval_into(&mut self, t: S, right_limit: bool, out: &mut [S]) {
        let k = self.k();
        debug_assert_eq!(out.len(), self.x.dim() * k);
        for j in 0..self.x.dim() {
            let times = self.x.series(j).times();
            let absorbed = self.next_event[j];
            for (kk, basis) in self.bases.iter().enumerate() {
                let s = j * k + kk;
                out[s] = match *basis {
                    BasisSpec::ExpDecay { rate, leading } => {
                        if self.decay_sum[s] == S::zero() {
                            S::zero()
                        } else {
                            leading * self.decay_sum[s] * (-rate * (t - self.decay_ref[s])).exp()
                        }
                    }
                    BasisSpec::Indicator { height, cutoff } => {
                        let lo = self.advance_window(s, j, cutoff, t, right_limit, absorbed);
                        height * S::from_usize_lossy(absorbed - lo)
                    }
                    BasisSpec::LogDecay { horizon } => {
                        let lo = self.advance_window(s, j, horizon, t, right_limit, absorbed);
                        let mut acc = S::zero();
                        for &tl in &times[lo..absorbed] {
                            acc += (S::one() + horizon - (t - tl)).ln();
                        }
                        acc
                    }
                };
            }
        }
    }

    /// First absorbed event index still inside the width-`width` window at
    /// `t`. The shared pointer passes events expired on both sides; events
    /// expiring exactly at `t` are skipped locally for right limits.
    fn advance_window(
        &mut self,
        s: usize,
        j: usize,
        width: S,
        t: S,
        right_limit: bool,
        absorbed: usize,
    ) -> usize {
        let times = self.x.series(j).times();
        let mut lo = self.window_lo[s];
        while lo < absorbed && times[lo] + width < t {
            lo += 1;
        }
        self.window_lo[s] = lo;
        if right_limit {
            let mut lo_r = lo;
            while lo_r < absorbed && times[lo_r] + width <= t {
                lo_r += 1;
            }
            lo_r
        } else {
            lo
        }
    }
}

/// Sorted interior time points where `G` can jump: predictor event times and
/// indicator cutoff expiries inside `(0, T)`.
pub fn feature_breakpoints<S: Scalar>(x: &MultiProcess<S>, bases: &[BasisSpec<S>]) -> Vec<S> {
    let horizon = x.horizon();
    let mut pts = Vec::new();
    for s in x.iter() {
        for &t in s.times() {
            if t > S::zero() && t < horizon {
                pts.push(t);
            }
            for b in bases {
                if let BasisSpec::Indicator { cutoff, .. } = b {
                    let e = t + *cutoff;
                    if e > S::zero() && e < horizon {
                        pts.push(e);
                    }
                }
            }
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    pts.dedup();
    pts
}

/// Features evaluated at a sorted list of query times, stored flat with rows
/// of length `p*K` in `j*K + k` layout.
pub struct FeatureTable<S> {
    pk: usize,
    flat: Vec<S>,
}

impl<S: Scalar> FeatureTable<S> {
    /// Build the table; `times` must be nondecreasing and within `[0, T]`.
    /// Every row is a strict-past (left-limit) evaluation.
    pub fn build(x: &MultiProcess<S>, bases: &[BasisSpec<S>], times: &[S]) -> Result<Self> {
        Self::check_times(x, times)?;
        let pk = x.dim() * bases.len();
        let mut flat = vec![S::zero(); times.len() * pk];
        let mut walker = ConvolutionWalker::new(x, bases);
        for (q, &t) in times.iter().enumerate() {
            walker.absorb_before(t);
            walker.eval_into(t, false, &mut flat[q * pk..(q + 1) * pk]);
        }
        Ok(FeatureTable { pk, flat })
    }

    /// Sided variant for integration nodes: rows marked `right_limit` are
    /// evaluated just after their time point.
    pub fn build_sided(
        x: &MultiProcess<S>,
        bases: &[BasisSpec<S>],
        times: &[S],
        right_limit: &[bool],
    ) -> Result<Self> {
        Self::check_times(x, times)?;
        if times.len() != right_limit.len() {
            return Err(Error::DimMismatch("times vs side flags".into()));
        }
        let pk = x.dim() * bases.len();
        let mut flat = vec![S::zero(); times.len() * pk];
        let mut walker = ConvolutionWalker::new(x, bases);
        for (q, (&t, &right)) in times.iter().zip(right_limit).enumerate() {
            if right {
                walker.absorb_through(t);
            } else {
                walker.absorb_before(t);
            }
            walker.eval_into(t, right, &mut flat[q * pk..(q + 1) * pk]);
        }
        Ok(FeatureTable { pk, flat })
    }

    fn check_times(x: &MultiProcess<S>, times: &[S]) -> Result<()> {
        for w in times.windows(2) {
            if w[1] < w[0] {
                return Err(Error::Domain("feature query times must be sorted".into()));
            }
        }
        if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
            if first < S::zero() || last > x.horizon() {
                return Err(Error::Domain("feature query times outside [0, T]".into()));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn row(&self, q: usize) -> &[S] {
        &self.flat[q * self.pk..(q + 1) * self.pk]
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        if self.pk == 0 {
            0
        } else {
            self.flat.len() / self.pk
        }
    }

    #[inline]
    pub fn row_len(&self) -> usize {
        self.pk
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::EventSeries;
    use crate::rng::{CounterRng, RngSeed};

    fn mp(series: Vec<Vec<f64>>, horizon: f64) -> MultiProcess<f64> {
        MultiProcess::new(
            series
                .into_iter()
                .map(|t| EventSeries::new(t, horizon).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn no_past_events_gives_zero_column() {
        let x = mp(vec![vec![1.5], vec![0.2]], 2.0);
        let bases = vec![BasisSpec::exp_decay(5.0, 1.0).unwrap()];
        let g = convolve_features(&x, &bases, 1.0).unwrap();
        assert_eq!(g.values.get(0, 0), 0.0);
        assert!(g.values.get(1, 0) > 0.0);
    }

    #[test]
    fn single_event_exp_decay() {
        let x = mp(vec![vec![1.0]], 2.0);
        let bases = vec![BasisSpec::exp_decay(5.0, 1.0).unwrap()];
        let g = convolve_features(&x, &bases, 1.2).unwrap();
        assert!((g.values.get(0, 0) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn indicator_counts_only_events_within_cutoff() {
        // events at 0.9 and 1.15, cutoff 0.1, query 1.2: only 1.15 contributes
        let x = mp(vec![vec![0.9, 1.15]], 2.0);
        let bases = vec![BasisSpec::indicator(0.2, 0.1).unwrap()];
        let g = convolve_features(&x, &bases, 1.2).unwrap();
        // enumeration oracle: lag 0.3 > 0.1 (out), lag 0.05 <= 0.1 (in)
        assert!((g.values.get(0, 0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn query_outside_horizon_errors() {
        let x = mp(vec![vec![0.5]], 2.0);
        let bases = vec![BasisSpec::indicator(0.2, 0.1).unwrap()];
        assert!(convolve_features(&x, &bases, -0.1).is_err());
        assert!(convolve_features(&x, &bases, 2.1).is_err());
    }

    #[test]
    fn strictly_past_is_causal() {
        // an event exactly at the query time must not contribute,
        // and events after t never change G(t)
        let x1 = mp(vec![vec![0.5, 1.0]], 2.0);
        let x2 = mp(vec![vec![0.5, 1.0, 1.2, 1.9]], 2.0);
        let bases = vec![
            BasisSpec::exp_decay(5.0, 1.0).unwrap(),
            BasisSpec::indicator(0.2, 0.5).unwrap(),
        ];
        let g1 = convolve_features(&x1, &bases, 1.0).unwrap();
        let g2 = convolve_features(&x2, &bases, 1.0).unwrap();
        assert_eq!(g1.values, g2.values);
        // only the 0.5 event contributes
        assert!((g1.values.get(0, 0) - (-2.5f64).exp()).abs() < 1e-12);
        assert_eq!(g1.values.get(0, 1), 0.2);
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let mut rng = CounterRng::new(RngSeed::new(17, 0));
        let horizon = 10.0;
        let series: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let mut t = 0.0;
                let mut v = Vec::new();
                loop {
                    t += rng.exponential(2.0);
                    if t > horizon {
                        break;
                    }
                    v.push(t);
                }
                v
            })
            .collect();
        let x = mp(series, horizon);
        let bases = vec![
            BasisSpec::exp_decay(5.0, 1.0).unwrap(),
            BasisSpec::indicator(0.2, 0.1).unwrap(),
            BasisSpec::log_decay(1.0).unwrap(),
        ];
        let mut queries: Vec<f64> = (0..40).map(|_| rng.uniform_range(0.0, horizon)).collect();
        // include event times themselves as queries to exercise strictness
        queries.extend(x.series(0).times().iter().copied());
        queries.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let table = FeatureTable::build(&x, &bases, &queries).unwrap();
        for (q, &t) in queries.iter().enumerate() {
            let direct = convolve_features(&x, &bases, t).unwrap();
            let row = table.row(q);
            for j in 0..3 {
                for k in 0..3 {
                    let a = direct.values.get(j, k);
                    let b = row[j * 3 + k];
                    assert!(
                        (a - b).abs() < 1e-9 * (1.0 + a.abs()),
                        "mismatch at t={t} j={j} k={k}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn integrals_match_fine_trapezoid() {
        let x = mp(vec![vec![0.3, 1.1, 4.0], vec![2.2]], 5.0);
        let bases = vec![
            BasisSpec::exp_decay(5.0, 1.0).unwrap(),
            BasisSpec::indicator(0.2, 0.1).unwrap(),
        ];
        let exact = feature_integrals(&x, &bases).unwrap();
        let n = 400_000;
        let h = 5.0 / n as f64;
        for j in 0..2 {
            for k in 0..2 {
                let mut acc = 0.0;
                for i in 0..=n {
                    let t = i as f64 * h;
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    acc += w * convolve_features(&x, &bases, t).unwrap().values.get(j, k);
                }
                let approx = acc * h;
                assert!(
                    (exact.get(j, k) - approx).abs() < 2e-3,
                    "j={j} k={k}: {} vs {approx}",
                    exact.get(j, k)
                );
            }
        }
    }

    #[test]
    fn log_decay_blocks_closed_form_integrals() {
        let x = mp(vec![vec![0.5]], 2.0);
        let bases = vec![BasisSpec::log_decay(2.0).unwrap()];
        assert!(feature_integrals(&x, &bases).is_none());
    }
}
