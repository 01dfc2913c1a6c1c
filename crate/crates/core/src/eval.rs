//! Evaluation metrics: coefficient RMSE and deviance, clustering Rand index,
//! binned AUC, and the first-order moment diagnostic.

use crate::basis::BasisSpec;
use crate::cp::CpFactors;
use crate::error::{Error, Result};
use crate::events::{EventSeries, MultiProcess};
use crate::features::FeatureTable;
use crate::link::LinkSpec;
use crate::scalar::Scalar;
use crate::tensor::CoefTensor;

/// Root mean square error over all tensor entries.
pub fn rmse<S: Scalar>(est: &CoefTensor<S>, truth: &CoefTensor<S>) -> Result<S> {
    if est.dims() != truth.dims() {
        return Err(Error::DimMismatch(format!("{:?} vs {:?}", est.dims(), truth.dims())));
    }
    let (m, p, k) = est.dims();
    let n = S::from_usize_lossy(m * p * k);
    Ok((est.sub(truth).frob_norm().powi(2) / n).sqrt())
}

/// Frobenius distance between two coefficient tensors.
pub fn deviance<S: Scalar>(a: &CoefTensor<S>, b: &CoefTensor<S>) -> Result<S> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(a.sub(b).frob_norm())
}

/// Fraction of item pairs on which two partitions agree (co-clustered in
/// both or separated in both). Partitions are label vectors over the same
/// item set.
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch(format!(
            "partition sizes {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let m = a.len();
    if m < 2 {
        return Err(Error::Domain("rand index needs at least two items".into()));
    }
    let mut agree = 0usize;
    for i in 0..m {
        for j in i + 1..m {
            let same_a = a[i] == a[j];
            let same_b = b[i] == b[j];
            if same_a == same_b {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (m * (m - 1) / 2) as f64)
}

/// One response series binned over a window: binary occupancy and a model
/// score per bin.
#[derive(Debug, Clone)]
pub struct BinnedSeries<S> {
    pub occupancy: Vec<bool>,
    pub scores: Vec<S>,
}

impl<S: Scalar> BinnedSeries<S> {
    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }
}

/// Bin a series over `[from, to)` into unit-width (by default) bins:
/// occupancy is 1 when the bin holds at least one event.
pub fn bin_occupancy<S: Scalar>(series: &EventSeries<S>, from: S, to: S, width: S) -> Result<Vec<bool>> {
    if !(width > S::zero()) || !(to > from) {
        return Err(Error::Domain("binning needs width > 0 and to > from".into()));
    }
    let n = ((to - from) / width).floor().to_f64_lossy() as usize;
    let mut occ = vec![false; n];
    for &t in series.times() {
        if t < from || t >= to {
            continue;
        }
        let idx = ((t - from) / width).floor().to_f64_lossy() as usize;
        if idx < n {
            occ[idx] = true;
        }
    }
    Ok(occ)
}

/// Predicted intensity of each response at the bin midpoints of
/// `[from, to)`: the score vector paired with [`bin_occupancy`].
pub fn predicted_bin_scores<S: Scalar>(
    mu: &[S],
    tensor: &CoefTensor<S>,
    x: &MultiProcess<S>,
    bases: &[BasisSpec<S>],
    link: LinkSpec,
    from: S,
    to: S,
    width: S,
) -> Result<Vec<Vec<S>>> {
    let (m, p, k) = tensor.dims();
    if p != x.dim() || k != bases.len() || mu.len() != m {
        return Err(Error::DimMismatch("score prediction shapes".into()));
    }
    let n = ((to - from) / width).floor().to_f64_lossy() as usize;
    let half = S::from_f64_lossy(0.5);
    let mids: Vec<S> = (0..n)
        .map(|b| from + width * (S::from_usize_lossy(b) + half))
        .collect();
    let table = FeatureTable::build(x, bases, &mids)?;
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let slice = tensor.slice_response(i);
        let scores = (0..n)
            .map(|b| {
                let u = mu[i]
                    + table
                        .row(b)
                        .iter()
                        .zip(slice.as_slice())
                        .map(|(&g, &c)| g * c)
                        .sum::<S>();
                link.eval(u).max(S::zero())
            })
            .collect();
        out.push(scores);
    }
    Ok(out)
}

/// Area under the ROC curve over the pooled bins of all series, in the
/// rank-statistic form `P(score+ > score-) + P(tie)/2` with midrank ties.
pub fn auc<S: Scalar>(bins: &[BinnedSeries<S>]) -> Result<f64> {
    let mut pairs: Vec<(f64, bool)> = Vec::new();
    for b in bins {
        if b.occupancy.len() != b.scores.len() {
            return Err(Error::DimMismatch("occupancy vs scores".into()));
        }
        for (&occ, &s) in b.occupancy.iter().zip(&b.scores) {
            pairs.push((s.to_f64_lossy(), occ));
        }
    }
    let n_pos = pairs.iter().filter(|(_, y)| *y).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Domain(format!(
            "AUC needs both classes, got {n_pos} positive and {n_neg} negative bins"
        )));
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    // midranks over ties
    let n = pairs.len();
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pairs[j + 1].0 == pairs[i].0 {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0; // 1-based average rank
        for item in pairs.iter().take(j + 1).skip(i) {
            if item.1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Empirical vs predicted first-order moments under the linear link: the
/// stationary mean response rates must match `mu + (int omega) Lambda_x`.
#[derive(Debug, Clone)]
pub struct MomentReport<S> {
    pub lambda_x: Vec<S>,
    pub lambda_y: Vec<S>,
    pub predicted_y: Vec<S>,
    pub z_scores: Vec<S>,
}

impl<S: Scalar> MomentReport<S> {
    pub fn max_abs_z(&self) -> S {
        self.z_scores.iter().fold(S::zero(), |m, &z| m.max(z.abs()))
    }
}

/// First-order moment check for a linear-link model: compares empirical
/// response rates against `mu + (sum_k B[.,.,k] int g_k) Lambda_x_hat`.
/// Errors when a basis has no finite total integral (LogDecay).
pub fn moment_check_first_order<S: Scalar>(
    x: &MultiProcess<S>,
    y: &MultiProcess<S>,
    factors: &CpFactors<S>,
    bases: &[BasisSpec<S>],
) -> Result<MomentReport<S>> {
    let (m, p, k) = factors.dims();
    if p != x.dim() || m != y.dim() || k != bases.len() {
        return Err(Error::DimMismatch("moment check shapes".into()));
    }
    let mut basis_integrals = Vec::with_capacity(k);
    for b in bases {
        match b.total_integral() {
            Some(v) => basis_integrals.push(v),
            None => {
                return Err(Error::UnsupportedBasis(
                    "first-order moment check needs integrable bases".into(),
                ))
            }
        }
    }
    let horizon = x.horizon();
    let lambda_x: Vec<S> =
        x.iter().map(|s| S::from_usize_lossy(s.len()) / horizon).collect();
    let lambda_y: Vec<S> =
        y.iter().map(|s| S::from_usize_lossy(s.len()) / y.horizon()).collect();
    let tensor = factors.compose();
    let mut predicted_y = Vec::with_capacity(m);
    let mut z_scores = Vec::with_capacity(m);
    for i in 0..m {
        let mut pred = factors.mu[i];
        for j in 0..p {
            let omega_int: S = (0..k)
                .map(|l| tensor.get(i, j, l) * basis_integrals[l])
                .sum();
            pred += omega_int * lambda_x[j];
        }
        predicted_y.push(pred);
        let se = (lambda_y[i].max(S::from_f64_lossy(1e-12)) / horizon).sqrt();
        z_scores.push((lambda_y[i] - pred) / se);
    }
    Ok(MomentReport { lambda_x, lambda_y, predicted_y, z_scores })
}

/// One metric line in the report format `metric,value,scope`.
pub fn metric_csv_row(metric: &str, value: f64, scope: &str) -> String {
    format!("{metric},{value:.9e},{scope}")
}

pub fn metric_csv_header() -> &'static str {
    "metric,value,scope"
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
    fn rmse_trivial_cases_and_loop_oracle() {
        let t = random_tensor(3, 4, 2, 1);
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
        let shifted = CoefTensor::from_fn(3, 4, 2, |i, j, k| t.get(i, j, k) + 1.0);
        assert!((rmse(&shifted, &t).unwrap() - 1.0).abs() < 1e-12);

        let u = random_tensor(3, 4, 2, 2);
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..2 {
                    acc += (t.get(i, j, k) - u.get(i, j, k)).powi(2);
                }
            }
        }
        let expect = (acc / 24.0).sqrt();
        assert!((rmse(&t, &u).unwrap() - expect).abs() < 1e-12);

        let bad = random_tensor(3, 4, 3, 3);
        assert!(rmse(&t, &bad).is_err());
    }

    #[test]
    fn deviance_trivial_and_oracle() {
        let t = random_tensor(2, 2, 2, 5);
        assert_eq!(deviance(&t, &t).unwrap(), 0.0);
        let mut u = t.clone();
        u.set(1, 0, 1, t.get(1, 0, 1) + 3.0);
        assert!((deviance(&t, &u).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rand_index_cases() {
        // identical partitions
        assert_eq!(rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        // m = 4: {12}{34} vs singletons -> 4 of 6 pairs agree
        let ri = rand_index(&[0, 0, 1, 1], &[0, 1, 2, 3]).unwrap();
        assert!((ri - 4.0 / 6.0).abs() < 1e-12);
        // singletons vs one block: nothing agrees
        assert_eq!(rand_index(&[0, 1, 2], &[0, 0, 0]).unwrap(), 0.0);
        // symmetry and relabel invariance
        let a = [0, 1, 0, 2, 2];
        let b = [3, 3, 1, 1, 0];
        assert_eq!(rand_index(&a, &b).unwrap(), rand_index(&b, &a).unwrap());
        let b2 = [7, 7, 9, 9, 4];
        assert_eq!(rand_index(&a, &b).unwrap(), rand_index(&a, &b2).unwrap());
        assert!(rand_index(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn auc_separable_constant_and_hand_case() {
        let perfect = BinnedSeries {
            occupancy: vec![true, true, false, false],
            scores: vec![0.9, 0.8, 0.2, 0.1],
        };
        assert_eq!(auc(&[perfect]).unwrap(), 1.0);

        let constant = BinnedSeries {
            occupancy: vec![true, false, true, false],
            scores: vec![0.5, 0.5, 0.5, 0.5],
        };
        assert!((auc(&[constant]).unwrap() - 0.5).abs() < 1e-12);

        // 3 positives, 3 negatives with one crossing:
        // concordant pair count oracle
        let mixed = BinnedSeries {
            occupancy: vec![true, true, true, false, false, false],
            scores: vec![0.9, 0.7, 0.3, 0.4, 0.2, 0.1],
        };
        let mut concordant = 0.0;
        for (sp, yp) in mixed.scores.iter().zip(&mixed.occupancy) {
            if !yp {
                continue;
            }
            for (sn, yn) in mixed.scores.iter().zip(&mixed.occupancy) {
                if *yn {
                    continue;
                }
                if sp > sn {
                    concordant += 1.0;
                } else if sp == sn {
                    concordant += 0.5;
                }
            }
        }
        let expect = concordant / 9.0;
        assert!((auc(&[mixed]).unwrap() - expect).abs() < 1e-12);

        let degenerate = BinnedSeries { occupancy: vec![true, true], scores: vec![0.1, 0.2] };
        assert!(auc(&[degenerate]).is_err());
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = CounterRng::new(RngSeed::new(31, 0));
        let occupancy: Vec<bool> = (0..40).map(|_| rng.bernoulli(0.4)).collect();
        let scores: Vec<f64> = (0..40).map(|_| rng.uniform()).collect();
        let a = auc(&[BinnedSeries { occupancy: occupancy.clone(), scores: scores.clone() }])
            .unwrap();
        let transformed: Vec<f64> = scores.iter().map(|&s| (3.0 * s + 1.0).exp()).collect();
        let b = auc(&[BinnedSeries { occupancy, scores: transformed }]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rmse_and_deviance_triangle_inequality() {
        for seed in 0..5 {
            let a = random_tensor(3, 3, 2, 40 + seed);
            let b = random_tensor(3, 3, 2, 50 + seed);
            let c = random_tensor(3, 3, 2, 60 + seed);
            let ab = deviance(&a, &b).unwrap();
            let bc = deviance(&b, &c).unwrap();
            let ac = deviance(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
            let r_ab = rmse(&a, &b).unwrap();
            let r_bc = rmse(&b, &c).unwrap();
            let r_ac = rmse(&a, &c).unwrap();
            assert!(r_ac <= r_ab + r_bc + 1e-12);
        }
    }

    #[test]
    fn bin_occupancy_half_open_window() {
        let s = EventSeries::new(vec![0.5, 1.0, 2.9, 3.0], 4.0).unwrap();
        let occ = bin_occupancy(&s, 1.0, 3.0, 1.0).unwrap();
        // [1,2): event at 1.0; [2,3): event at 2.9; 3.0 excluded
        assert_eq!(occ, vec![true, true]);
    }

    #[test]
    fn moment_check_zero_model() {
        let x = crate::simulate::simulate_poisson(&vec![0.5f64; 3], 3000.0, RngSeed::new(41, 0))
            .unwrap();
        let mu = vec![0.3, 0.4];
        let y = crate::simulate::simulate_poisson(&[0.3f64, 0.4], 3000.0, RngSeed::new(42, 0))
            .unwrap();
        let bases = crate::simulate::ScenarioSpec::bases::<f64>();
        let mut f = CpFactors::zeros(2, 3, 3, 1);
        f.mu = mu;
        let report = moment_check_first_order(&x, &y, &f, &bases).unwrap();
        assert!(report.max_abs_z() < 4.0, "z = {:?}", report.z_scores);
    }

    #[test]
    fn moment_check_rejects_log_decay() {
        let x = crate::simulate::simulate_poisson(&[0.5f64], 100.0, RngSeed::new(43, 0)).unwrap();
        let y = crate::simulate::simulate_poisson(&[0.5f64], 100.0, RngSeed::new(44, 0)).unwrap();
        let bases = vec![BasisSpec::log_decay(10.0f64).unwrap()];
        let f = CpFactors::<f64>::zeros(1, 1, 1, 1);
        assert!(matches!(
            moment_check_first_order(&x, &y, &f, &bases),
            Err(Error::UnsupportedBasis(_))
        ));
    }

    #[test]
    fn indicator_total_integral_feeds_linear_map() {
        // omega with known integral: height 0.2, cutoff 0.1 -> 0.02
        let bases = vec![BasisSpec::indicator(0.2f64, 0.1).unwrap()];
        let x = crate::simulate::simulate_poisson(&[2.0f64], 5000.0, RngSeed::new(45, 0)).unwrap();
        let lambda_x = x.series(0).len() as f64 / 5000.0;
        let mut f = CpFactors::<f64>::zeros(1, 1, 1, 1);
        f.weights = vec![1.0];
        f.by.set(0, 0, 1.0);
        f.bx.set(0, 0, 1.0);
        f.bc.set(0, 0, 1.0);
        f.mu = vec![0.05];
        let y = crate::simulate::simulate_response(
            &f,
            &bases,
            LinkSpec::Linear,
            &x,
            RngSeed::new(46, 0),
        )
        .unwrap();
        let report = moment_check_first_order(&x, &y, &f, &bases).unwrap();
        let expect = 0.05 + 0.02 * lambda_x;
        assert!((report.predicted_y[0] - expect).abs() < 1e-12);
        assert!(report.max_abs_z() < 4.0);
    }
}
