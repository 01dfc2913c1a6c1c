use tppreg_core::admm::{fit_admm, fit_group_sparse, AdmmConfig};
use tppreg_core::eval::rmse;
use tppreg_core::likelihood::{cp_warm_init, LikelihoodData, QuadratureGrid};
use tppreg_core::simulate::{make_scenario, PredictorKind, ScenarioSpec, Study};
use tppreg_core::LinkSpec;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_seeds: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2);
    for seed in 0..n_seeds {
        let spec = ScenarioSpec {
            study: Study::S1, m: 20, p: 20, horizon: 800.0,
            link: LinkSpec::Linear, predictor: PredictorKind::Poisson,
            seed: 1000 + seed, stream: 0,
        };
        let data = make_scenario::<f64>(&spec).unwrap();
        let ldata = LikelihoodData::build(
            &data.x, &data.y, &ScenarioSpec::bases::<f64>(), LinkSpec::Linear,
            QuadratureGrid::default()).unwrap();
        let (mu0, warm) = cp_warm_init(&ldata, 0.1);
        let r_unpen = rmse(&warm, &data.truth_tensor).unwrap();
        let mut line = format!("seed {seed}: unpen={r_unpen:.3} | full:");
        for tau_s in [0.0, 0.01, 0.02, 0.04, 0.08] {
            let config = AdmmConfig::<f64> { rank: 3, tau_s, max_iter: 300, ..Default::default() };
            let init = tppreg_core::cp_init(&warm, 3, tppreg_core::RngSeed::new(0, 0));
            let fit = fit_admm(&ldata, &config, Some((mu0.clone(), init))).unwrap();
            let r = rmse(&fit.tensor, &data.truth_tensor).unwrap();
            line += &format!(" t{tau_s}={r:.3}({})", fit.state.iterations);
        }
        line += " | sparse:";
        for tau_s in [0.01, 0.02, 0.04, 0.08] {
            let (_, sp, _) = fit_group_sparse(&ldata, tau_s, 1.0, 1e-4, 100, Default::default()).unwrap();
            let r = rmse(&sp, &data.truth_tensor).unwrap();
            line += &format!(" t{tau_s}={r:.3}");
        }
        println!("{line}");
    }
}
