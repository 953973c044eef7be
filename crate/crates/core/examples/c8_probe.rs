use lmm_core::experiments::*;
use lmm_core::lmm::ThetaPreset;
use lmm_core::rng::NoiseFamily;

fn main() {
    for seed in [101u64, 202, 303] {
        for eps in [0.25f64, 0.5, 1.0] {
            let sc = Scenario {
                name: format!("explicit-eps={eps}"),
                spectrum: "finite:k_max=40".into(),
                theta: ThetaPreset::Cos3,
                gamma_rule: GammaRule::PowerLaw { coeff: 1.0, exponent: eps / 2.0 },
                sigma_x_rule: SigmaXRule::Zero,
                p_rule: PRule::PowerLaw { coeff: 1.0, alpha: 0.25 },
                sigma_y: 0.4,
                n_grid: vec![128],
                trials: 50,
                n_test: 250,
                seed,
                noise_family: NoiseFamily::Gaussian,
                allow_pinv: true,
            };
            let res: lmm_core::Sweep = run_rate_sweep(&sc, 0).unwrap();
            let n_pinv = res.records.iter().filter(|r| r.used_pinv).count();
            let n_fail = res.records.iter().filter(|r| r.solver_failed).count();
            println!("seed {seed} eps {eps}: gamma {:.5} median {:.6} (pinv {n_pinv}, fail {n_fail})",
                     sc.gamma_rule.at(128), res.medians[0]);
        }
        println!();
    }
}
