//! BIC computation and the sequential tuning protocol for the rank and the
//! two penalty parameters.

use crate::admm::{default_cluster_eps, extract_clusters, fit_admm, AdmmConfig, FitResult};
use crate::cp::CpFactors;
use crate::error::{Error, Result};
use crate::likelihood::{cp_warm_init, LikelihoodData};
use crate::scalar::Scalar;

/// Candidate values for the three tuning dimensions.
#[derive(Debug, Clone)]
pub struct TuneGrid<S> {
    pub ranks: Vec<usize>,
    pub tau_s: Vec<S>,
    pub tau_f: Vec<S>,
}

impl<S: Scalar> TuneGrid<S> {
    /// Rank 1..=6, ten log-spaced points per penalty. Overridable.
    pub fn default_grid() -> Self {
        let log_spaced = |lo: f64, hi: f64, n: usize| -> Vec<S> {
            (0..n)
                .map(|i| {
                    let f = i as f64 / (n - 1) as f64;
                    S::from_f64_lossy(lo * (hi / lo).powf(f))
                })
                .collect()
        };
        TuneGrid {
            ranks: (1..=6).collect(),
            tau_s: log_spaced(1e-4, 1e-1, 10),
            tau_f: log_spaced(1e-4, 1e-1, 10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranks.is_empty() || self.tau_s.is_empty() || self.tau_f.is_empty() {
            return Err(Error::InvalidConfig("tuning grids must be nonempty".into()));
        }
        if self.ranks.windows(2).any(|w| w[1] <= w[0]) || self.ranks[0] == 0 {
            return Err(Error::InvalidConfig("rank grid must be ascending and positive".into()));
        }
        for taus in [&self.tau_s, &self.tau_f] {
            if taus.iter().any(|&t| t < S::zero()) {
                return Err(Error::InvalidConfig("penalty grids must be nonnegative".into()));
            }
            if taus.windows(2).any(|w| w[1] <= w[0]) && taus.len() > 1 {
                return Err(Error::InvalidConfig("penalty grids must be ascending".into()));
            }
        }
        Ok(())
    }
}

/// Which tuning stage a BIC was computed for; the stage decides how the
/// effective number of parameters is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneStage {
    Rank,
    Sparsity,
    Fusion,
}

impl TuneStage {
    pub fn label(&self) -> &'static str {
        match self {
            TuneStage::Rank => "rank",
            TuneStage::Sparsity => "sparsity",
            TuneStage::Fusion => "fusion",
        }
    }
}

/// One BIC evaluation.
#[derive(Debug, Clone, Copy)]
pub struct BicReport<S> {
    pub value: S,
    pub n_events: usize,
    pub p_e: usize,
    pub stage: TuneStage,
    /// Scaled (per unit time) log-likelihood of the fit.
    pub loglik: S,
}

fn nnz<S: Scalar>(vals: impl Iterator<Item = S>) -> usize {
    vals.filter(|v| *v != S::zero()).count()
}

/// Effective parameter count of a fitted factor set at the given stage.
///
/// Rank stage: `R (m + p + K - 2)` exactly. The sparse stages count nonzero
/// latent parameters per component (factor entries plus the weight, minus
/// the three unit-norm constraints) plus the nonzero background intensities;
/// the fusion stage counts each subgroup's response row once.
pub fn effective_parameters<S: Scalar>(factors: &CpFactors<S>, stage: TuneStage) -> usize {
    let (m, p, k) = factors.dims();
    let r = factors.rank();
    match stage {
        TuneStage::Rank => r * (m + p + k - 2),
        TuneStage::Sparsity | TuneStage::Fusion => {
            let labels = if stage == TuneStage::Fusion {
                Some(extract_clusters(factors, default_cluster_eps::<S>(r)))
            } else {
                None
            };
            let mut count = nnz(factors.mu.iter().copied());
            for c in 0..r {
                if factors.weights[c] == S::zero() {
                    continue;
                }
                let by_nnz = match &labels {
                    Some(labels) => {
                        let n_clusters = labels.iter().max().map_or(0, |&x| x + 1);
                        (0..n_clusters)
                            .filter(|&g| {
                                (0..m).any(|i| labels[i] == g && factors.by.get(i, c) != S::zero())
                            })
                            .count()
                    }
                    None => nnz((0..m).map(|i| factors.by.get(i, c))),
                };
                let bx_nnz = nnz((0..p).map(|j| factors.bx.get(j, c)));
                let bc_nnz = nnz((0..k).map(|l| factors.bc.get(l, c)));
                if by_nnz + bx_nnz + bc_nnz == 0 {
                    continue;
                }
                // entries + weight - three norm constraints
                count += (by_nnz + bx_nnz + bc_nnz + 1).saturating_sub(3);
            }
            count
        }
    }
}

/// `-2 L + log(N) p_e` with `L` the unscaled joint log-likelihood and `N`
/// the total response event count.
pub fn bic<S: Scalar>(
    fit: &FitResult<S>,
    data: &LikelihoodData<S>,
    stage: TuneStage,
) -> Result<BicReport<S>> {
    let n = data.total_events();
    if n == 0 {
        return Err(Error::NoEvents("BIC is undefined without response events".into()));
    }
    let p_e = effective_parameters(&fit.factors, stage);
    let unscaled = fit.loglik * data.horizon();
    let two = S::one() + S::one();
    let value = -two * unscaled + S::from_usize_lossy(n).ln() * S::from_usize_lossy(p_e);
    Ok(BicReport { value, n_events: n, p_e, stage, loglik: fit.loglik })
}

/// One row of the tuning trace.
#[derive(Debug, Clone)]
pub struct TuneTraceRow {
    pub stage: &'static str,
    pub param: f64,
    pub bic: f64,
    pub p_e: usize,
    pub loglik: f64,
    pub skipped: bool,
}

impl TuneTraceRow {
    pub fn csv_header() -> &'static str {
        "stage,param,bic,p_e,loglik"
    }

    pub fn to_csv_row(&self) -> String {
        if self.skipped {
            format!("{},{:.6e},skipped,,", self.stage, self.param)
        } else {
            format!(
                "{},{:.6e},{:.9e},{},{:.9e}",
                self.stage, self.param, self.bic, self.p_e, self.loglik
            )
        }
    }
}

/// Result of the sequential sweep: the selected configuration, its fit, and
/// the full trace.
pub struct TuneResult<S> {
    pub config: AdmmConfig<S>,
    pub best_fit: FitResult<S>,
    pub trace: Vec<TuneTraceRow>,
}

/// Tune `(R, tau_s, tau_f)` one dimension at a time: rank first with both
/// penalties off, then the sparsity penalty at the chosen rank, then the
/// fusion penalty. Later sweep points warm-start from the previous fit.
/// Failed grid points are recorded and skipped; if a whole stage fails the
/// sweep errors out.
pub fn tune_sequential<S: Scalar>(
    data: &LikelihoodData<S>,
    grid: &TuneGrid<S>,
    template: &AdmmConfig<S>,
) -> Result<TuneResult<S>> {
    grid.validate()?;
    template.validate()?;
    let mut trace = Vec::new();

    // the unpenalized warm start is shared by every grid point
    let (mu0, warm) = cp_warm_init(data, template.init_ridge);

    // stage 1: rank
    let mut best: Option<(usize, S, FitResult<S>)> = None;
    for &r in &grid.ranks {
        let config = AdmmConfig { rank: r, tau_s: S::zero(), tau_f: S::zero(), ..*template };
        let init = crate::cp::cp_init(&warm, r, crate::rng::RngSeed::new(template.seed, 0));
        match fit_admm(data, &config, Some((mu0.clone(), init))) {
            Ok(fit) => {
                let report = bic(&fit, data, TuneStage::Rank)?;
                trace.push(TuneTraceRow {
                    stage: TuneStage::Rank.label(),
                    param: r as f64,
                    bic: report.value.to_f64_lossy(),
                    p_e: report.p_e,
                    loglik: report.loglik.to_f64_lossy(),
                    skipped: false,
                });
                if best.as_ref().map_or(true, |(_, b, _)| report.value < *b) {
                    best = Some((r, report.value, fit));
                }
            }
            Err(_) => trace.push(TuneTraceRow {
                stage: TuneStage::Rank.label(),
                param: r as f64,
                bic: f64::NAN,
                p_e: 0,
                loglik: f64::NAN,
                skipped: true,
            }),
        }
    }
    let (best_rank, _, mut best_fit) =
        best.ok_or_else(|| Error::InvalidConfig("every rank-stage fit failed".into()))?;

    // stage 2: sparsity at the chosen rank
    let mut best_tau_s = S::zero();
    let mut best_bic = bic(&best_fit, data, TuneStage::Sparsity)?.value;
    let mut prev_fit = best_fit.clone();
    for &tau_s in &grid.tau_s {
        let config = AdmmConfig { rank: best_rank, tau_s, tau_f: S::zero(), ..*template };
        let init = Some((prev_fit.factors.mu.clone(), prev_fit.factors.clone()));
        match fit_admm(data, &config, init) {
            Ok(fit) => {
                let report = bic(&fit, data, TuneStage::Sparsity)?;
                trace.push(TuneTraceRow {
                    stage: TuneStage::Sparsity.label(),
                    param: tau_s.to_f64_lossy(),
                    bic: report.value.to_f64_lossy(),
                    p_e: report.p_e,
                    loglik: report.loglik.to_f64_lossy(),
                    skipped: false,
                });
                prev_fit = fit.clone();
                if report.value < best_bic {
                    best_bic = report.value;
                    best_tau_s = tau_s;
                    best_fit = fit;
                }
            }
            Err(_) => trace.push(TuneTraceRow {
                stage: TuneStage::Sparsity.label(),
                param: tau_s.to_f64_lossy(),
                bic: f64::NAN,
                p_e: 0,
                loglik: f64::NAN,
                skipped: true,
            }),
        }
    }

    // stage 3: fusion at the chosen rank and sparsity
    let mut best_tau_f = S::zero();
    let mut best_bic = bic(&best_fit, data, TuneStage::Fusion)?.value;
    let mut prev_fit = best_fit.clone();
    for &tau_f in &grid.tau_f {
        let config = AdmmConfig { rank: best_rank, tau_s: best_tau_s, tau_f, ..*template };
        let init = Some((prev_fit.factors.mu.clone(), prev_fit.factors.clone()));
        match fit_admm(data, &config, init) {
            Ok(fit) => {
                let report = bic(&fit, data, TuneStage::Fusion)?;
                trace.push(TuneTraceRow {
                    stage: TuneStage::Fusion.label(),
                    param: tau_f.to_f64_lossy(),
                    bic: report.value.to_f64_lossy(),
                    p_e: report.p_e,
                    loglik: report.loglik.to_f64_lossy(),
                    skipped: false,
                });
                prev_fit = fit.clone();
                if report.value < best_bic {
                    best_bic = report.value;
                    best_tau_f = tau_f;
                    best_fit = fit;
                }
            }
            Err(_) => trace.push(TuneTraceRow {
                stage: TuneStage::Fusion.label(),
                param: tau_f.to_f64_lossy(),
                bic: f64::NAN,
                p_e: 0,
                loglik: f64::NAN,
                skipped: true,
            }),
        }
    }

    let config =
        AdmmConfig { rank: best_rank, tau_s: best_tau_s, tau_f: best_tau_f, ..*template };
    Ok(TuneResult { config, best_fit, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::LinkSpec;
    use crate::rng::{CounterRng, RngSeed};
    use crate::simulate::{simulate_poisson, ScenarioSpec};
    use crate::tensor::{CoefTensor, Matrix};

    #[test]
    fn rank_stage_formula() {
        // m = 60, p = 60, K = 3, R = 3 -> 3 * 121 = 363
        let f = CpFactors::<f64>::zeros(60, 60, 3, 3);
        assert_eq!(effective_parameters(&f, TuneStage::Rank), 363);
    }

    #[test]
    fn sparsity_stage_counts_only_mu_for_zero_fit() {
        let mut f = CpFactors::<f64>::zeros(5, 4, 3, 2);
        f.mu = vec![0.1; 5];
        assert_eq!(effective_parameters(&f, TuneStage::Sparsity), 5);
    }

    #[test]
    fn fusion_stage_counts_clusters_once() {
        let mut rng = CounterRng::new(RngSeed::new(7, 0));
        let m = 12;
        let r = 2;
        let mut f = CpFactors::<f64>::zeros(m, 6, 3, r);
        f.mu = vec![0.1; m];
        f.weights = vec![1.0; r];
        // four groups of three identical rows
        for g in 0..4 {
            let row: Vec<f64> = (0..r).map(|_| rng.standard_normal()).collect();
            for i in 3 * g..3 * (g + 1) {
                for c in 0..r {
                    f.by.set(i, c, row[c]);
                }
            }
        }
        f.bx = Matrix::from_fn(6, r, |_, _| rng.standard_normal());
        f.bc = Matrix::from_fn(3, r, |_, _| rng.standard_normal());
        let sparse = effective_parameters(&f, TuneStage::Sparsity);
        let fused = effective_parameters(&f, TuneStage::Fusion);
        assert!(fused < sparse, "{fused} vs {sparse}");
        // per component: 4 unique rows + 6 + 3 + 1 - 3 = 11; plus mu
        assert_eq!(fused, 12 + 2 * 11);
    }

    #[test]
    fn pe_monotone_on_sparse_support() {
        let mut rng = CounterRng::new(RngSeed::new(9, 0));
        let (m, p, k, r) = (12, 12, 3, 2);
        let mut f = CpFactors::<f64>::zeros(m, p, k, r);
        f.mu = vec![0.1; m];
        f.weights = vec![1.0; r];
        for c in 0..r {
            for i in 0..4 {
                f.by.set(i + 4 * c, c, rng.standard_normal());
            }
            for j in 0..3 {
                f.bx.set(j + 3 * c, c, rng.standard_normal());
            }
            f.bc.set(c, c, rng.standard_normal());
        }
        let rank = effective_parameters(&f, TuneStage::Rank);
        let sparse = effective_parameters(&f, TuneStage::Sparsity);
        let fused = effective_parameters(&f, TuneStage::Fusion);
        assert!(fused <= sparse, "{fused} vs {sparse}");
        assert!(sparse <= rank, "{sparse} vs {rank}");
    }

    #[test]
    fn bic_requires_events() {
        let bases = ScenarioSpec::bases::<f64>();
        let x = simulate_poisson(&[0.5f64], 50.0, RngSeed::new(11, 0)).unwrap();
        let y = crate::events::MultiProcess::new(vec![
            crate::events::EventSeries::empty(50.0).unwrap(),
        ])
        .unwrap();
        let data = LikelihoodData::build(
            &x,
            &y,
            &bases,
            LinkSpec::Linear,
            crate::likelihood::QuadratureGrid::default(),
        )
        .unwrap();
        let config = AdmmConfig::<f64> { rank: 1, max_iter: 5, ..Default::default() };
        let fit = fit_admm(&data, &config, None).unwrap();
        assert!(bic(&fit, &data, TuneStage::Rank).is_err());
    }

    fn tiny_data(seed: u64) -> LikelihoodData<f64> {
        let bases = ScenarioSpec::bases::<f64>();
        let x = simulate_poisson(&vec![0.5f64; 2], 250.0, RngSeed::new(seed, 0)).unwrap();
        let truth_mu = vec![0.15, 0.2];
        let truth = CoefTensor::from_fn(2, 2, 3, |i, j, _| if i == j { 0.15 } else { 0.0 });
        let y = crate::simulate::simulate_response_tensor(
            &truth_mu,
            &truth,
            &bases,
            LinkSpec::Linear,
            &x,
            RngSeed::new(seed + 1, 0),
        )
        .unwrap();
        LikelihoodData::build(
            &x,
            &y,
            &bases,
            LinkSpec::Linear,
            crate::likelihood::QuadratureGrid::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_point_grids_return_that_config() {
        let data = tiny_data(21);
        let grid = TuneGrid { ranks: vec![2], tau_s: vec![0.01], tau_f: vec![0.01] };
        let template = AdmmConfig::<f64> { max_iter: 40, ..Default::default() };
        let out = tune_sequential(&data, &grid, &template).unwrap();
        assert_eq!(out.config.rank, 2);
        assert_eq!(out.trace.len(), 3);
    }

    #[test]
    fn bic_flat_once_sparsity_saturates() {
        let data = tiny_data(23);
        let grid = TuneGrid { ranks: vec![1], tau_s: vec![100.0, 200.0, 400.0], tau_f: vec![0.0] };
        let template =
            AdmmConfig::<f64> { max_iter: 2000, tol: 1e-7, ..Default::default() };
        let out = tune_sequential(&data, &grid, &template).unwrap();
        let sat: Vec<&TuneTraceRow> =
            out.trace.iter().filter(|r| r.stage == "sparsity").collect();
        assert_eq!(sat.len(), 3);
        // beyond the all-zero threshold the fit no longer changes
        assert_eq!(sat[0].p_e, sat[1].p_e);
        assert_eq!(sat[1].p_e, sat[2].p_e);
        assert!((sat[0].bic - sat[1].bic).abs() < 1e-4, "{} vs {}", sat[0].bic, sat[1].bic);
        assert!((sat[1].bic - sat[2].bic).abs() < 1e-4, "{} vs {}", sat[1].bic, sat[2].bic);
    }

    #[test]
    fn grid_validation() {
        let mut g = TuneGrid::<f64> { ranks: vec![], tau_s: vec![0.1], tau_f: vec![0.1] };
        assert!(g.validate().is_err());
        g.ranks = vec![2, 1];
        assert!(g.validate().is_err());
        g.ranks = vec![1, 2];
        assert!(g.validate().is_ok());
    }
}
