use std::time::Instant;

use tppreg_core::admm::{fit_admm, AdmmConfig};
use tppreg_core::likelihood::{cp_warm_init, LikelihoodData, QuadratureGrid};
use tppreg_core::simulate::{make_scenario, PredictorKind, ScenarioSpec, Study};
use tppreg_core::LinkSpec;

fn main() {
    let spec = ScenarioSpec {
        study: Study::S1, m: 20, p: 20, horizon: 800.0,
        link: LinkSpec::Linear, predictor: PredictorKind::Poisson, seed: 1000, stream: 0,
    };
    let t0 = Instant::now();
    let data = make_scenario::<f64>(&spec).unwrap();
    eprintln!("scenario: {:.2}s, ny = {}", t0.elapsed().as_secs_f64(), data.y.total_events());

    let t0 = Instant::now();
    let ldata = LikelihoodData::build(
        &data.x, &data.y, &ScenarioSpec::bases::<f64>(), LinkSpec::Linear,
        QuadratureGrid::default()).unwrap();
    eprintln!("features: {:.2}s", t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let (_mu0, _unpen) = cp_warm_init(&ldata, 1e-6);
    eprintln!("warm init: {:.2}s", t0.elapsed().as_secs_f64());

    for iters in [5usize, 20] {
        let t0 = Instant::now();
        let config = AdmmConfig::<f64> { rank: 3, tau_s: 0.5, max_iter: iters, ..Default::default() };
        let fit = fit_admm(&ldata, &config, None).unwrap();
        eprintln!("admm {iters} iters: {:.2}s (res {:.2e})", t0.elapsed().as_secs_f64(), fit.state.residuals.max());
    }
}
