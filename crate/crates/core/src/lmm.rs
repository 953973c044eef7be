//! Sampling from the latent metric model.
//!
//! A dataset realization has three independent sources of randomness:
//! latent locations z_i (i.i.d. uniform on [0, pi]), a panel of p random
//! functions psi_j (zero-mean Gaussian processes with the implicit kernel
//! as covariance), and additive covariate noise E. Responses are
//! y_i = g(z_i) + eps_i with g(z) = <phi(z), theta*>.
//!
//! The panel is sampled through its Karhunen-Loeve expansion, which makes
//! the random projection W with X = sqrt(p) Phi Wᵀ + sigma_x E available
//! exactly: W_jk = xi_jk / sqrt(p) with xi_jk i.i.d. standard normal on the
//! coordinates with lambda_k > 0. Columns of W for lambda_k = 0 are
//! identically zero and are not stored; every derived quantity is unchanged
//! by dropping them because the matching feature coordinates vanish too.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{standard_normal, uniform01, NoiseFamily, Stream};
use crate::scalar::Real;
use crate::spectrum::EigenSpectrum;

/// Regression target g(z) = sum_k sqrt(lambda_k) theta*_k u_k(z).
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec<T> {
    theta: Vec<T>,
}

/// Named target presets accepted in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaPreset {
    /// Coefficients chosen so that g(z) = cos(3z).
    Cos3,
    /// Explicit coefficient vector (padded with zeros to the truncation).
    Explicit(Vec<f64>),
}

impl<T: Real> TargetSpec<T> {
    /// Builds a target from explicit coefficients, enforcing theta_k = 0
    /// wherever lambda_k = 0.
    pub fn from_coeffs(spec: &EigenSpectrum<T>, mut theta: Vec<T>) -> Result<Self> {
        if theta.len() > spec.trunc() {
            return Err(Error::Config(format!(
                "theta has {} coefficients but the spectrum retains {}",
                theta.len(),
                spec.trunc()
            )));
        }
        theta.resize(spec.trunc(), T::zero());
        for (idx, &t) in theta.iter().enumerate() {
            if t != T::zero() && spec.lambda(idx + 1) == T::zero() {
                return Err(Error::Config(format!(
                    "theta_{} is nonzero but lambda_{} = 0",
                    idx + 1,
                    idx + 1
                )));
            }
        }
        Ok(TargetSpec { theta })
    }

    /// theta*_3 = 1 / sqrt(2 lambda_3), all other coefficients zero, so
    /// that g(z) = cos(3z).
    pub fn cos3(spec: &EigenSpectrum<T>) -> Result<Self> {
        let l3 = spec.lambda(3);
        if l3 <= T::zero() {
            return Err(Error::Config(
                "cos3 target needs lambda_3 > 0 (rank >= 3)".into(),
            ));
        }
        let mut theta = vec![T::zero(); spec.trunc()];
        theta[2] = T::one() / (T::of(2.0) * l3).sqrt();
        TargetSpec::from_coeffs(spec, theta)
    }

    pub fn from_preset(spec: &EigenSpectrum<T>, preset: &ThetaPreset) -> Result<Self> {
        match preset {
            ThetaPreset::Cos3 => Self::cos3(spec),
            ThetaPreset::Explicit(v) => {
                Self::from_coeffs(spec, v.iter().map(|&x| T::of(x)).collect())
            }
        }
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    /// g(z) = <phi(z), theta*>.
    pub fn g_at(&self, spec: &EigenSpectrum<T>, z: T) -> Result<T> {
        let phi = spec.feature_map(z)?;
        Ok(crate::linalg::dot(phi.as_slice(), &self.theta))
    }

    /// Grid approximation of sup_z |g(z)|^2.
    pub fn sup_g_sq(&self, spec: &EigenSpectrum<T>, grid: &[T]) -> Result<T> {
        let mut sup = T::zero();
        for &z in grid {
            let g = self.g_at(spec, z)?;
            sup = sup.max(g * g);
        }
        Ok(sup)
    }

    /// ||theta_{>k}||^2 weighted by Lambda_{>k}.
    pub fn tail_norm_lambda_sq(&self, spec: &EigenSpectrum<T>, k: usize) -> T {
        self.theta
            .iter()
            .enumerate()
            .skip(k)
            .map(|(idx, &t)| spec.lambda(idx + 1) * t * t)
            .sum()
    }

    /// ||theta_{<=k}||^2 weighted by Lambda_{<=k}^{-1}; coordinates with
    /// lambda = 0 have theta = 0 by construction and contribute nothing.
    pub fn head_norm_lambda_inv_sq(&self, spec: &EigenSpectrum<T>, k: usize) -> T {
        self.theta
            .iter()
            .take(k)
            .enumerate()
            .map(|(idx, &t)| {
                let l = spec.lambda(idx + 1);
                if t == T::zero() {
                    T::zero()
                } else {
                    t * t / l
                }
            })
            .sum()
    }
}

/// Generating configuration carried by every dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmConfig<T> {
    pub spectrum: EigenSpectrum<T>,
    pub sigma_x: T,
    pub sigma_y: T,
    pub noise: NoiseFamily,
}

/// One realized draw from the latent metric model.
#[derive(Debug, Clone)]
pub struct LmmDataset<T> {
    pub n: usize,
    pub p: usize,
    /// Latent locations, length n.
    pub z: Vec<T>,
    /// Feature rows phi(z_i), n x trunc.
    pub phi: Mat<T>,
    /// Random projection, p x nonzero_count (trailing zero columns of the
    /// conceptual p x trunc matrix are not stored).
    pub w: Mat<T>,
    /// Function panel Psi_ij = psi_j(z_i) = sqrt(p) (Phi Wᵀ)_ij, n x p.
    pub psi: Mat<T>,
    /// Covariate noise, n x p.
    pub e_mat: Mat<T>,
    /// Covariates X = Psi + sigma_x E, n x p.
    pub x: Mat<T>,
    /// Response noise, length n.
    pub eps: Vec<T>,
    /// Responses y_i = g(z_i) + eps_i.
    pub y: Vec<T>,
    pub config: LmmConfig<T>,
}

/// n i.i.d. uniform draws on [0, pi].
pub fn sample_latents<T: Real>(n: usize, rng: &mut Stream) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    Ok((0..n).map(|_| uniform01::<T>(rng) * T::PI()).collect())
}

/// Feature rows for a latent vector: row i is phi(z_i).
pub fn feature_rows<T: Real>(spec: &EigenSpectrum<T>, z: &[T]) -> Result<Mat<T>> {
    let mut phi = Mat::zeros(z.len(), spec.trunc());
    for (i, &zi) in z.iter().enumerate() {
        let row = spec.feature_map(zi)?;
        phi.row_mut(i).copy_from_slice(row.as_slice());
    }
    Ok(phi)
}

/// Samples the Gaussian function panel via the Karhunen-Loeve expansion.
///
/// Returns (Psi, W) with Psi = sqrt(p) Phi Wᵀ held exactly, W_jk i.i.d.
/// N(0, 1/p) on coordinates with lambda_k > 0. Consequently
/// E[(1/p) <psi(z), psi(z')>] = kernel_eval(z, z') and E[WᵀW] = I on the
/// non-null coordinates.
pub fn sample_gp_panel<T: Real>(
    spec: &EigenSpectrum<T>,
    z: &[T],
    p: usize,
    rng: &mut Stream,
) -> Result<(Mat<T>, Mat<T>)> {
    if p == 0 {
        return Err(Error::Domain("p must be >= 1".into()));
    }
    let phi = feature_rows(spec, z)?;
    let k_nz = spec.nonzero_count();
    let inv_sqrt_p = T::one() / T::of_usize(p).sqrt();
    let mut w = Mat::zeros(p, k_nz);
    for j in 0..p {
        let row = w.row_mut(j);
        for wk in row.iter_mut() {
            *wk = standard_normal::<T>(rng) * inv_sqrt_p;
        }
    }
    let psi = panel_from_projection(spec, &phi, &w, p);
    Ok((psi, w))
}

/// Psi = sqrt(p) Phi Wᵀ restricted to the stored (non-null) coordinates.
fn panel_from_projection<T: Real>(
    spec: &EigenSpectrum<T>,
    phi: &Mat<T>,
    w: &Mat<T>,
    p: usize,
) -> Mat<T> {
    let k_nz = w.cols();
    let sqrt_p = T::of_usize(p).sqrt();
    let mut phi_nz = phi.columns(0, k_nz);
    phi_nz.scale(sqrt_p);
    debug_assert_eq!(k_nz, spec.nonzero_count());
    phi_nz.matmul_nt(w)
}

/// Assembles a full dataset realization.
///
/// Draw order (part of the reproducibility contract): latents, projection
/// W, covariate noise E row-major, response noise eps.
pub fn generate_dataset<T: Real>(
    config: &LmmConfig<T>,
    target: &TargetSpec<T>,
    n: usize,
    p: usize,
    rng: &mut Stream,
) -> Result<LmmDataset<T>> {
    if config.sigma_x < T::zero() || config.sigma_y < T::zero() {
        return Err(Error::Config("noise levels must be >= 0".into()));
    }
    let spec = &config.spectrum;
    let z = sample_latents(n, rng)?;
    let phi = feature_rows(spec, &z)?;
    let k_nz = spec.nonzero_count();
    let inv_sqrt_p = T::one() / T::of_usize(p).sqrt();
    let mut w = Mat::zeros(p, k_nz);
    for j in 0..p {
        for wk in w.row_mut(j).iter_mut() {
            *wk = standard_normal::<T>(rng) * inv_sqrt_p;
        }
    }
    let psi = panel_from_projection(spec, &phi, &w, p);

    let mut e_mat = Mat::zeros(n, p);
    for i in 0..n {
        for e in e_mat.row_mut(i).iter_mut() {
            *e = config.noise.sample(rng);
        }
    }

    let mut x = psi.clone();
    x.add_scaled(config.sigma_x, &e_mat);

    let eps: Vec<T> = (0..n).map(|_| config.sigma_y * config.noise.sample(rng)).collect();
    let theta = target.theta();
    let y: Vec<T> = (0..n)
        .map(|i| crate::linalg::dot(phi.row(i), theta) + eps[i])
        .collect();

    Ok(LmmDataset {
        n,
        p,
        z,
        phi,
        w,
        psi,
        e_mat,
        x,
        eps,
        y,
        config: config.clone(),
    })
}

impl<T: Real> LmmDataset<T> {
    /// Fresh test pair (z_test, x_test) with x_test = sqrt(p) W phi(z_test)
    /// + sigma_x e_test, reusing the dataset's W: the test covariate is
    ///   exchangeable with, but dependent on, the training covariates.
    pub fn make_test_point(&self, rng: &mut Stream) -> Result<(T, Vec<T>)> {
        let z_test = uniform01::<T>(rng) * T::PI();
        let phi_t = self.config.spectrum.feature_map(z_test)?;
        let k_nz = self.w.cols();
        let sqrt_p = T::of_usize(self.p).sqrt();
        let mut x_test = self.w.mat_vec(&phi_t.as_slice()[..k_nz]);
        for x in &mut x_test {
            *x *= sqrt_p;
        }
        for x in x_test.iter_mut() {
            *x += self.config.sigma_x * self.config.noise.sample(rng);
        }
        Ok((z_test, x_test))
    }

    /// Max elementwise deviation of X from sqrt(p) Phi Wᵀ + sigma_x E,
    /// recomputed from the stored factors.
    pub fn projection_identity_error(&self) -> T {
        let mut recon = panel_from_projection(&self.config.spectrum, &self.phi, &self.w, self.p);
        recon.add_scaled(self.config.sigma_x, &self.e_mat);
        recon.max_abs_diff(&self.x)
    }

    /// Kernel Gram of the feature rows, K = Phi Phiᵀ. Null coordinates
    /// contribute nothing and are skipped.
    pub fn kernel_gram(&self) -> Mat<T> {
        self.kernel_gram_tail(0)
    }

    /// Tail kernel Gram K_{>k} = Phi_{>k} Phi_{>k}ᵀ (K_{>0} = K).
    pub fn kernel_gram_tail(&self, k: usize) -> Mat<T> {
        let k_nz = self.config.spectrum.nonzero_count();
        if k >= k_nz {
            return Mat::zeros(self.n, self.n);
        }
        self.phi.columns(k, k_nz).gram_nt(T::one())
    }

    /// Replaces W by an orthonormalized copy (WᵀW = I exactly) and rebuilds
    /// Psi and X accordingly. Forces the first term of the perturbation
    /// matrix to zero; used as an oracle configuration.
    pub fn with_orthonormal_w(mut self) -> Result<Self> {
        let p = self.p;
        let k = self.w.cols();
        if p < k {
            return Err(Error::Dim(format!(
                "cannot orthonormalize W: p = {p} < {k} retained coordinates"
            )));
        }
        // modified Gram-Schmidt on columns
        let mut cols: Vec<Vec<T>> = (0..k)
            .map(|c| (0..p).map(|r| self.w[(r, c)]).collect())
            .collect();
        for c in 0..k {
            for prev in 0..c {
                let proj = crate::linalg::dot(&cols[c], &cols[prev]);
                let prev_col = cols[prev].clone();
                crate::linalg::axpy(-proj, &prev_col, &mut cols[c]);
            }
            let norm = crate::linalg::norm2_sq(&cols[c]).sqrt();
            if norm == T::zero() {
                return Err(Error::Dim("rank-deficient W cannot be orthonormalized".into()));
            }
            for v in &mut cols[c] {
                *v /= norm;
            }
        }
        for (c, col) in cols.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                self.w[(r, c)] = v;
            }
        }
        self.psi = panel_from_projection(&self.config.spectrum, &self.phi, &self.w, p);
        self.x = self.psi.clone();
        self.x.add_scaled(self.config.sigma_x, &self.e_mat);
        Ok(self)
    }
}

/// Moment constants of the Gaussian panel and the covariate noise:
///
///   v1 = sup_{z,z'} Var[psi_j(z) psi_j(z')]
///      = sup_{z,z'} f(z,z) f(z',z') + f(z,z')^2   (Isserlis)
///   v2 = sup_z f(z,z)
///   v3 = E[E_ij^4]
///
/// Suprema are over the supplied grid. For a Mercer kernel the v1 supremum
/// is attained on the diagonal (Cauchy-Schwarz gives f(z,z')^2 <=
/// f(z,z) f(z',z')), so v1 = 2 v2^2 without scanning pairs.
pub fn moment_constants<T: Real>(
    spec: &EigenSpectrum<T>,
    grid: &[T],
    noise: NoiseFamily,
) -> Result<(T, T, T)> {
    let mut v2 = T::zero();
    for &z in grid {
        v2 = v2.max(spec.kernel_eval(z, z)?);
    }
    let v1 = T::of(2.0) * v2 * v2;
    Ok((v1, v2, noise.fourth_moment::<T>()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use crate::spectrum::latent_grid;
    use approx::assert_abs_diff_eq;
    use num_traits::FloatConst;

    fn stream(label: &str) -> Stream {
        SeedTree::new(20240517).stream(label)
    }

    fn config(preset: &str, sigma_x: f64, sigma_y: f64) -> LmmConfig<f64> {
        LmmConfig {
            spectrum: preset.parse().unwrap(),
            sigma_x,
            sigma_y,
            noise: NoiseFamily::Gaussian,
        }
    }

    #[test]
    fn latents_require_positive_n() {
        let mut rng = stream("latents");
        assert!(sample_latents::<f64>(0, &mut rng).is_err());
    }

    #[test]
    fn latents_mean_near_half_pi() {
        let mut rng = stream("latents-clt");
        let n = 100_000;
        let z = sample_latents::<f64>(n, &mut rng).unwrap();
        let mean: f64 = z.iter().sum::<f64>() / n as f64;
        // CLT band: 3 * (pi / sqrt(12)) / sqrt(n)
        let band = 3.0 * (f64::PI() / 12f64.sqrt()) / (n as f64).sqrt();
        assert!((mean - f64::PI() / 2.0).abs() < band, "mean {mean}");
        for &zi in &z {
            assert!((0.0..=f64::PI()).contains(&zi));
        }
    }

    #[test]
    fn latents_deterministic_replay() {
        let a = sample_latents::<f64>(64, &mut stream("replay")).unwrap();
        let b = sample_latents::<f64>(64, &mut stream("replay")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_spectrum_panel_is_zero() {
        let spec: EigenSpectrum<f64> = EigenSpectrum::finite_rank(4, 0.0).unwrap();
        let z = sample_latents(5, &mut stream("zero-spec")).unwrap();
        let (psi, w) = sample_gp_panel(&spec, &z, 16, &mut stream("zero-spec-panel")).unwrap();
        assert_eq!(w.cols(), 0);
        assert_eq!(psi.max_abs(), 0.0);
    }

    #[test]
    fn panel_covariance_matches_kernel() {
        // (1/p) sum_j psi_j(z1) psi_j(z2) concentrates on kernel_eval(z1, z2).
        let spec: EigenSpectrum<f64> = "finite:k_max=5".parse().unwrap();
        let z = vec![0.7f64, 2.1];
        let p = 20_000;
        let (psi, _) = sample_gp_panel(&spec, &z, p, &mut stream("panel-cov")).unwrap();
        let prods: Vec<f64> = (0..p).map(|j| psi[(0, j)] * psi[(1, j)]).collect();
        let mean = prods.iter().sum::<f64>() / p as f64;
        let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (p as f64 - 1.0);
        let se = (var / p as f64).sqrt();
        let expect = spec.kernel_eval(z[0], z[1]).unwrap();
        assert!(
            (mean - expect).abs() <= 3.0 * se,
            "mean {mean}, kernel {expect}, se {se}"
        );
    }

    #[test]
    fn w_gram_concentrates_at_rate_sqrt_p() {
        let spec: EigenSpectrum<f64> = "finite:k_max=20".parse().unwrap();
        let z = sample_latents(4, &mut stream("wgram-z")).unwrap();
        let max_dev = |p: usize, trial: usize| -> f64 {
            let mut rng = stream(&format!("wgram/{p}/{trial}"));
            let (_, w) = sample_gp_panel(&spec, &z, p, &mut rng).unwrap();
            let mut gram = w.matmul_tn(&w);
            gram.add_diag(-1.0);
            gram.max_abs()
        };
        let median = |mut v: Vec<f64>| -> f64 {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let trials = 15;
        let lo = median((0..trials).map(|t| max_dev(1000, t)).collect());
        let hi = median((0..trials).map(|t| max_dev(4000, t)).collect());
        let ratio = lo / hi;
        assert!(
            (1.6..=2.5).contains(&ratio),
            "deviation should scale ~ p^-1/2, ratio {ratio}"
        );
    }

    #[test]
    fn noiseless_rank_one_dataset_is_exact() {
        let cfg = config("finite:k_max=1", 0.0, 0.0);
        let target = TargetSpec::from_coeffs(&cfg.spectrum, vec![0.5]).unwrap();
        let ds = generate_dataset(&cfg, &target, 12, 8, &mut stream("rank1")).unwrap();
        for i in 0..ds.n {
            let expect = 0.5 * f64::SQRT_2() * ds.z[i].cos();
            assert_abs_diff_eq!(ds.y[i], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn cos3_target_reproduces_cosine() {
        let cfg = config("exp:a=1,trunc=64", 0.0, 0.0);
        let target = TargetSpec::cos3(&cfg.spectrum).unwrap();
        for &z in latent_grid::<f64>(50).iter() {
            let g = target.g_at(&cfg.spectrum, z).unwrap();
            assert_abs_diff_eq!(g, (3.0 * z).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn response_noise_variance_matches() {
        // Var(y - g(z)) should be sigma_y^2 = 0.16.
        let cfg = config("finite:k_max=3", 0.0, 0.4);
        let target = TargetSpec::cos3(&cfg.spectrum).unwrap();
        let mut rng = stream("sigma-y");
        let reps = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..reps {
            let ds = generate_dataset(&cfg, &target, 4, 2, &mut rng).unwrap();
            for i in 0..ds.n {
                let r = ds.y[i] - target.g_at(&cfg.spectrum, ds.z[i]).unwrap();
                sum += r * r;
                sum_sq += r.powi(4);
            }
        }
        let m = reps as f64 * 4.0;
        let mean = sum / m;
        let se = ((sum_sq / m - mean * mean) / m).sqrt();
        assert!((mean - 0.16).abs() <= 3.0 * se, "var {mean} se {se}");
    }

    #[test]
    fn projection_identity_holds_exactly() {
        for preset in ["finite:k_max=20", "exp:a=1,trunc=512", "poly:a=2,trunc=256"] {
            let cfg = config(preset, 0.7, 0.4);
            let target = TargetSpec::cos3(&cfg.spectrum).unwrap();
            let ds =
                generate_dataset(&cfg, &target, 10, 40, &mut stream(preset)).unwrap();
            assert!(ds.projection_identity_error() <= 1e-10, "{preset}");
        }
    }

    #[test]
    fn dataset_replay_is_bit_identical() {
        let cfg = config("finite:k_max=8", 0.3, 0.2);
        let target = TargetSpec::cos3(&cfg.spectrum).unwrap();
        let a = generate_dataset(&cfg, &target, 6, 32, &mut stream("replay-ds")).unwrap();
        let b = generate_dataset(&cfg, &target, 6, 32, &mut stream("replay-ds")).unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.x.data(), b.x.data());
        assert_eq!(a.y, b.y);
        assert_eq!(a.w.data(), b.w.data());
    }

    #[test]
    fn test_point_rank_one_structure() {
        let cfg = config("finite:k_max=1", 0.0, 0.0);
        let target = TargetSpec::from_coeffs(&cfg.spectrum, vec![1.0]).unwrap();
        let ds = generate_dataset(&cfg, &target, 4, 16, &mut stream("tp")).unwrap();
        let (z_t, x_t) = ds.make_test_point(&mut stream("tp-draw")).unwrap();
        let phi1 = f64::SQRT_2() * z_t.cos();
        let sqrt_p = (ds.p as f64).sqrt();
        for (j, &x_tj) in x_t.iter().enumerate() {
            assert_abs_diff_eq!(x_tj, sqrt_p * phi1 * ds.w[(j, 0)], epsilon = 1e-12);
        }
    }

    #[test]
    fn test_point_deterministic() {
        let cfg = config("finite:k_max=4", 0.2, 0.1);
        let target = TargetSpec::cos3(&cfg.spectrum).unwrap();
        let ds = generate_dataset(&cfg, &target, 4, 16, &mut stream("tp-det")).unwrap();
        let a = ds.make_test_point(&mut stream("tp-det-draw")).unwrap();
        let b = ds.make_test_point(&mut stream("tp-det-draw")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn test_point_inner_products_track_kernel() {
        // E[(1/p) <x_test, x_i>] = E_{z_test}[kernel(z_test, z_i)] over test draws.
        let cfg = config("finite:k_max=4", 0.5, 0.0);
        let target = TargetSpec::cos3(&cfg.spectrum).unwrap();
        let ds = generate_dataset(&cfg, &target, 3, 4096, &mut stream("tp-mc")).unwrap();
        let mut rng = stream("tp-mc-draws");
        let reps = 4000;
        let i = 1usize;
        let mut vals = Vec::with_capacity(reps);
        for _ in 0..reps {
            let (z_t, x_t) = ds.make_test_point(&mut rng).unwrap();
            let ip = crate::linalg::dot(&x_t, ds.x.row(i)) / ds.p as f64;
            let k = cfg.spectrum.kernel_eval(z_t, ds.z[i]).unwrap();
            vals.push(ip - k);
        }
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "bias {mean} vs se {se}");
    }

    #[test]
    fn orthonormalized_w_has_identity_gram() {
        let cfg = config("finite:k_max=6", 0.4, 0.1);
        let target = TargetSpec::cos3(&cfg.spectrum).unwrap();
        let ds = generate_dataset(&cfg, &target, 5, 64, &mut stream("orth")).unwrap();
        let y_before = ds.y.clone();
        let ds = ds.with_orthonormal_w().unwrap();
        let mut gram = ds.w.matmul_tn(&ds.w);
        gram.add_diag(-1.0);
        assert!(gram.max_abs() < 1e-12);
        assert!(ds.projection_identity_error() <= 1e-12);
        assert_eq!(ds.y, y_before);
    }

    #[test]
    fn moment_constants_known_values() {
        let grid = latent_grid::<f64>(256);
        let zero: EigenSpectrum<f64> = EigenSpectrum::finite_rank(3, 0.0).unwrap();
        assert_eq!(
            moment_constants(&zero, &grid, NoiseFamily::Gaussian).unwrap(),
            (0.0, 0.0, 3.0)
        );
        let spec: EigenSpectrum<f64> = "finite:k_max=20".parse().unwrap();
        let (v1, v2, v3) = moment_constants(&spec, &grid, NoiseFamily::Gaussian).unwrap();
        assert_abs_diff_eq!(v2, 40.0, epsilon = 1e-9);
        assert_abs_diff_eq!(v1, 3200.0, epsilon = 1e-6);
        assert_eq!(v3, 3.0);
        let (.., v3r) = moment_constants(&spec, &grid, NoiseFamily::Rademacher).unwrap();
        assert_eq!(v3r, 1.0);
    }

    #[test]
    fn v1_diagonal_shortcut_matches_pair_scan() {
        // Brute-force sup over a coarse grid of pairs agrees with 2 v2^2.
        let spec: EigenSpectrum<f64> = "exp:a=1,trunc=128".parse().unwrap();
        let grid = latent_grid::<f64>(40);
        let (v1, ..) = moment_constants(&spec, &grid, NoiseFamily::Gaussian).unwrap();
        let mut brute = 0.0f64;
        for &z in &grid {
            for &z2 in &grid {
                let fzz = spec.kernel_eval(z, z).unwrap();
                let fz2 = spec.kernel_eval(z2, z2).unwrap();
                let fcross = spec.kernel_eval(z, z2).unwrap();
                brute = brute.max(fzz * fz2 + fcross * fcross);
            }
        }
        assert_abs_diff_eq!(v1, brute, epsilon = 1e-9);
    }

    #[test]
    fn rademacher_noise_supported() {
        let mut cfg = config("finite:k_max=4", 0.5, 0.3);
        cfg.noise = NoiseFamily::Rademacher;
        let target = TargetSpec::cos3(&cfg.spectrum).unwrap();
        let ds = generate_dataset(&cfg, &target, 8, 32, &mut stream("rademacher")).unwrap();
        for i in 0..ds.n {
            for j in 0..ds.p {
                assert!((ds.e_mat[(i, j)].abs() - 1.0).abs() < 1e-12);
            }
        }
        assert!(ds.projection_identity_error() <= 1e-10);
    }
}
