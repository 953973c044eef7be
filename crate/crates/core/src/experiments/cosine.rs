//! The cosine benign-overfitting demo: learning z -> cos(3z) from n = 60
//! noisy points under three eigenvalue regimes, with regularisation
//! supplied either explicitly (gamma > 0, sigma_x = 0) or implicitly
//! (gamma = 0, sigma_x = sqrt(n gamma_ref)).

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lmm::{generate_dataset, LmmConfig, TargetSpec};
use crate::ridge::{fit_dual, kernel_predict, kernel_ridge_fit, predict};
use crate::rng::{NoiseFamily, SeedTree};
use crate::scalar::Real;
use crate::spectrum::{EigenSpectrum, DEFAULT_TRUNC};

/// Demo training size.
pub const DEMO_N: usize = 60;
/// Demo response-noise level.
pub const DEMO_SIGMA_Y: f64 = 0.4;
/// Reference penalty: explicit mode uses gamma = GAMMA_REF, implicit mode
/// uses sigma_x = sqrt(n * GAMMA_REF).
pub const GAMMA_REF: f64 = 1e-4;
/// Test points emitted for plotting.
pub const DEMO_TEST_POINTS: usize = 1000;

/// Eigenvalue regime of the demo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CosineRegime {
    /// lambda_k = 1 for k <= 20.
    Finite,
    /// lambda_k = e^{-k}.
    Exp,
    /// lambda_k = k^{-4}.
    Poly,
}

impl CosineRegime {
    pub fn spectrum<T: Real>(self, trunc: Option<usize>) -> Result<EigenSpectrum<T>> {
        match self {
            CosineRegime::Finite => {
                EigenSpectrum::finite_rank_trunc(20, T::one(), trunc.unwrap_or(20))
            }
            CosineRegime::Exp => {
                EigenSpectrum::exponential(T::one(), trunc.unwrap_or(DEFAULT_TRUNC))
            }
            CosineRegime::Poly => {
                EigenSpectrum::polynomial(T::of(2.0), trunc.unwrap_or(DEFAULT_TRUNC))
            }
        }
    }
}

/// Regularisation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegMode {
    Explicit,
    Implicit,
}

/// Demo output: the fixed training set and the test-point prediction table.
#[derive(Debug, Clone)]
pub struct CosineDemo<T> {
    pub regime: CosineRegime,
    pub reg_mode: RegMode,
    pub p: usize,
    pub gamma: T,
    pub sigma_x: T,
    /// (z_i, y_i) training pairs.
    pub train: Vec<(T, T)>,
    /// (z_test, g(z_test), prediction) rows, one per test point.
    pub predictions: Vec<(T, T, T)>,
    /// Same test points pushed through the kernel-ridge comparator with
    /// regulariser sigma_x^2 + n gamma.
    pub kernel_oracle: Vec<T>,
    pub train_mse: T,
    pub test_mse: T,
    pub kernel_oracle_mse: T,
}

/// Runs the demo: n = 60, sigma_y = 0.4, 1000 test predictions.
pub fn run_cosine_demo<T: Real>(
    regime: CosineRegime,
    reg_mode: RegMode,
    p: usize,
    seed: u64,
    trunc: Option<usize>,
    sigma_y: Option<f64>,
) -> Result<CosineDemo<T>> {
    let spec = regime.spectrum::<T>(trunc)?;
    let n = DEMO_N;
    let (gamma, sigma_x) = match reg_mode {
        RegMode::Explicit => (T::of(GAMMA_REF), T::zero()),
        RegMode::Implicit => (T::zero(), T::of((n as f64 * GAMMA_REF).sqrt())),
    };
    let config = LmmConfig {
        spectrum: spec.clone(),
        sigma_x,
        sigma_y: T::of(sigma_y.unwrap_or(DEMO_SIGMA_Y)),
        noise: NoiseFamily::Gaussian,
    };
    let target = TargetSpec::cos3(&spec)?;
    let tree = SeedTree::new(seed);
    let mut rng = tree.stream("cosine-demo/train");
    let ds = generate_dataset(&config, &target, n, p, &mut rng)?;
    let sol = fit_dual(&ds.x, &ds.y, gamma)?;

    let train: Vec<(T, T)> = ds.z.iter().copied().zip(ds.y.iter().copied()).collect();
    let residuals = sol.train_residuals(&ds.x, &ds.y);
    let train_mse = residuals.iter().map(|&r| r * r).sum::<T>() / T::of_usize(n);

    // Kernel-ridge comparator on the same draw.
    let reg = sigma_x * sigma_x + T::of_usize(n) * gamma;
    let theta_hat = kernel_ridge_fit(&ds.phi, &ds.y, reg)?;

    let mut test_rng = tree.stream("cosine-demo/test");
    let mut predictions = Vec::with_capacity(DEMO_TEST_POINTS);
    let mut kernel_oracle = Vec::with_capacity(DEMO_TEST_POINTS);
    let mut test_mse = T::zero();
    let mut oracle_mse = T::zero();
    for _ in 0..DEMO_TEST_POINTS {
        let (z_t, x_t) = ds.make_test_point(&mut test_rng)?;
        let pred = predict(&sol, &ds.x, &x_t)?;
        let g = target.g_at(&spec, z_t)?;
        let krr = kernel_predict(&spec, &theta_hat, z_t)?;
        test_mse += (pred - g) * (pred - g);
        oracle_mse += (krr - g) * (krr - g);
        predictions.push((z_t, g, pred));
        kernel_oracle.push(krr);
    }
    let m = T::of_usize(DEMO_TEST_POINTS);
    Ok(CosineDemo {
        regime,
        reg_mode,
        p,
        gamma,
        sigma_x,
        train,
        predictions,
        kernel_oracle,
        train_mse,
        test_mse: test_mse / m,
        kernel_oracle_mse: oracle_mse / m,
    })
}
