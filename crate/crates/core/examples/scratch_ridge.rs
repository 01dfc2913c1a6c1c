use tppreg_core::eval::rmse;
use tppreg_core::likelihood::{cp_warm_init, LikelihoodData, QuadratureGrid};
use tppreg_core::simulate::{make_scenario, PredictorKind, ScenarioSpec, Study};
use tppreg_core::LinkSpec;

fn main() {
    for seed in 0..2u64 {
        let spec = ScenarioSpec {
            study: Study::S1, m: 20, p: 20, horizon: 800.0,
            link: LinkSpec::Linear, predictor: PredictorKind::Poisson,
            seed: 1000 + seed, stream: 0,
        };
        let data = make_scenario::<f64>(&spec).unwrap();
        let ldata = LikelihoodData::build(
            &data.x, &data.y, &ScenarioSpec::bases::<f64>(), LinkSpec::Linear,
            QuadratureGrid::default()).unwrap();
        let mut line = format!("seed {seed}:");
        for ridge in [1e-6, 1e-3, 1e-2, 0.1, 0.3, 1.0, 3.0, 10.0] {
            let t0 = std::time::Instant::now();
            let (_, unpen) = cp_warm_init(&ldata, ridge);
            let r = rmse(&unpen, &data.truth_tensor).unwrap();
            line += &format!(" r{ridge:.0e}={r:.3}({:.0}s)", t0.elapsed().as_secs_f64());
        }
        println!("{line}");
    }
}
