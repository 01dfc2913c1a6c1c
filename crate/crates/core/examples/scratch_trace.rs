use tppreg_core::admm::{fit_admm, AdmmConfig};
use tppreg_core::eval::rmse;
use tppreg_core::likelihood::{LikelihoodData, QuadratureGrid};
use tppreg_core::simulate::{make_scenario, PredictorKind, ScenarioSpec, Study};
use tppreg_core::LinkSpec;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let max_iter: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let tau_s: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.5);
    let rho: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let spec = ScenarioSpec {
        study: Study::S1, m: 20, p: 20, horizon: 800.0,
        link: LinkSpec::Linear, predictor: PredictorKind::Poisson, seed: 1000, stream: 0,
    };
    let data = make_scenario::<f64>(&spec).unwrap();
    let ldata = LikelihoodData::build(
        &data.x, &data.y, &ScenarioSpec::bases::<f64>(), LinkSpec::Linear,
        QuadratureGrid::default()).unwrap();
    let t0 = std::time::Instant::now();
    let sweeps: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(6);
    let config = AdmmConfig::<f64> { rank: 3, tau_s, rho, max_iter, factor_sweeps: sweeps, ..Default::default() };
    let fit = fit_admm(&ldata, &config, None).unwrap();
    for d in fit.diagnostics.iter().step_by(100) {
        eprintln!("{}", d.to_csv_row());
    }
    let last = fit.diagnostics.last().unwrap();
    eprintln!("{}", last.to_csv_row());
    eprintln!("iters={} time={:.0}s rmse={:.4}", fit.state.iterations, t0.elapsed().as_secs_f64(),
        rmse(&fit.tensor, &data.truth_tensor).unwrap());
}
