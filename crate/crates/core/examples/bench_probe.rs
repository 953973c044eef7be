// timing probe for criterion-7-sized trials
use std::time::Instant;
fn main() {
    let sc = lmm_core::experiments::Scenario {
        name: "probe".into(),
        spectrum: "finite:k_max=20".into(),
        theta: lmm_core::lmm::ThetaPreset::Cos3,
        gamma_rule: lmm_core::experiments::GammaRule::Const { value: 0.0 },
        sigma_x_rule: lmm_core::experiments::SigmaXRule::Const { value: 0.5 },
        p_rule: lmm_core::experiments::PRule::PowerLaw { coeff: 4.0, alpha: 1.0 },
        sigma_y: 0.4,
        n_grid: vec![128],
        trials: 4,
        n_test: 250,
        seed: 1,
        noise_family: lmm_core::rng::NoiseFamily::Gaussian,
        allow_pinv: true,
    };
    let t0 = Instant::now();
    let res: lmm_core::Sweep = lmm_core::experiments::run_rate_sweep(&sc, 0).unwrap();
    println!("4 trials at n=128, p=65536: {:.2?} ({:.2?}/trial)", t0.elapsed(), t0.elapsed() / 4);
    println!("median mse {:?} slope {:?}", res.medians, res.slope);
}
