use std::time::Instant;

use tppreg_core::admm::{fit_admm, fit_group_sparse, AdmmConfig};
use tppreg_core::eval::rmse;
use tppreg_core::likelihood::{cp_warm_init, LikelihoodData, QuadratureGrid};
use tppreg_core::simulate::{make_scenario, PredictorKind, ScenarioSpec, Study};
use tppreg_core::tuning::{bic, TuneStage};
use tppreg_core::LinkSpec;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("rmse");
    let seeds: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3);
    let t_horizon: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(800.0);
    let tau_s: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.5);

    for seed in 0..seeds {
        let spec = ScenarioSpec {
            study: Study::S1,
            m: 20,
            p: 20,
            horizon: t_horizon,
            link: LinkSpec::Linear,
            predictor: PredictorKind::Poisson,
            seed: 1000 + seed,
            stream: 0,
        };
        let t0 = Instant::now();
        let data = make_scenario::<f64>(&spec).unwrap();
        let n_events: usize = data.y.total_events();
        let nx: usize = data.x.total_events();
        let gen_time = t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let ldata = LikelihoodData::build(
            &data.x, &data.y,
            &tppreg_core::simulate::ScenarioSpec::bases::<f64>(),
            LinkSpec::Linear, QuadratureGrid::default()).unwrap();
        let build_time = t0.elapsed().as_secs_f64();

        match mode {
            "rmse" => {
                let t0 = Instant::now();
                let (mu0, unpen) = cp_warm_init(&ldata, 0.1);
                let unpen_time = t0.elapsed().as_secs_f64();
                let r_unpen = rmse(&unpen, &data.truth_tensor).unwrap();

                let t0 = Instant::now();
                let (_, sparse, _) = fit_group_sparse(
                    &ldata, tau_s, 1.0, 1e-4, 200, Default::default()).unwrap();
                let sparse_time = t0.elapsed().as_secs_f64();
                let r_sparse = rmse(&sparse, &data.truth_tensor).unwrap();

                let t0 = Instant::now();
                let config = AdmmConfig::<f64> { rank: 3, tau_s, ..Default::default() };
                let full = fit_admm(&ldata, &config, None).unwrap();
                let full_time = t0.elapsed().as_secs_f64();
                let r_full = rmse(&full.tensor, &data.truth_tensor).unwrap();

                // also rank-only (no sparsity)
                let config0 = AdmmConfig::<f64> { rank: 3, tau_s: 0.0, ..Default::default() };
                let rank_only = fit_admm(&ldata, &config0, None).unwrap();
                let r_rank = rmse(&rank_only.tensor, &data.truth_tensor).unwrap();

                let _ = (mu0, gen_time, build_time);
                println!(
                    "seed {seed}: ny={n_events} nx={nx} | unpen {r_unpen:.4} ({unpen_time:.1}s) sparse {r_sparse:.4} ({sparse_time:.1}s) full {r_full:.4} ({full_time:.1}s, {} iters) rankonly {r_rank:.4}",
                    full.state.iterations
                );
            }
            "rank" => {
                let (mu0, unpen) = cp_warm_init(&ldata, 0.1);
                let mut line = format!("seed {seed}: ny={n_events} bic:");
                let mut best = (0usize, f64::INFINITY);
                for r in 1..=5 {
                    let config = AdmmConfig::<f64> { rank: r, ..Default::default() };
                    let init = tppreg_core::cp_init(&unpen, r, tppreg_core::RngSeed::new(0, 0));
                    let fit = fit_admm(&ldata, &config, Some((mu0.clone(), init))).unwrap();
                    let report = bic(&fit, &ldata, TuneStage::Rank).unwrap();
                    line += &format!(" R{r}={:.1}", report.value);
                    if report.value < best.1 { best = (r, report.value); }
                }
                line += &format!("  -> picked R={}", best.0);
                println!("{line}");
            }
            _ => panic!("unknown mode"),
        }
    }
}
