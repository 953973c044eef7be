//! Convergence-rate sweeps over growing sample size.
//!
//! A [`Scenario`] pins the spectrum, target, regularisation rules and grid;
//! [`run_rate_sweep`] executes trials * |n_grid| independent runs, records
//! the full per-trial diagnostics, and fits a log-log slope through the
//! per-n medians of the test error. Trials are scheduled on a work pool but
//! own label-derived RNG streams, so results are byte-identical for any
//! worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eig;
use crate::lmm::{generate_dataset, LmmConfig, LmmDataset, TargetSpec, ThetaPreset};
use crate::ridge::{fit_dual, fit_dual_pinv, RidgeSolution};
use crate::risk::{
    delta_matrix, event_indicators_cached, exact_terms, excess_risk_mc,
    mu_n_kernel_tail_numeric,
};
use crate::rng::{NoiseFamily, SeedTree};
use crate::scalar::Real;
use crate::spectrum::EigenSpectrum;

/// Memory guard for a single trial's dense panels (X, E, Psi plus one
/// transient), in bytes.
const TRIAL_MEMORY_LIMIT: usize = 6 << 30;

/// Regularisation schedule gamma(n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaRule {
    Const { value: f64 },
    /// gamma = coeff * n^{-exponent} (decaying regularisation).
    PowerLaw { coeff: f64, exponent: f64 },
}

impl GammaRule {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            GammaRule::Const { value } => value,
            GammaRule::PowerLaw { coeff, exponent } => coeff * (n as f64).powf(-exponent),
        }
    }
}

/// Covariate-noise schedule sigma_x(n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaXRule {
    Zero,
    Const { value: f64 },
    /// sigma_x = sqrt(n * gamma_ref): the implicit counterpart of an
    /// explicit penalty gamma_ref.
    Tied { gamma_ref: f64 },
}

impl SigmaXRule {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            SigmaXRule::Zero => 0.0,
            SigmaXRule::Const { value } => value,
            SigmaXRule::Tied { gamma_ref } => (n as f64 * gamma_ref).sqrt(),
        }
    }
}

/// Ambient-dimension schedule p(n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum PRule {
    Fixed { value: usize },
    /// p = floor(coeff * n^{1+alpha}).
    PowerLaw { coeff: f64, alpha: f64 },
}

impl PRule {
    pub fn at(&self, n: usize) -> usize {
        match *self {
            PRule::Fixed { value } => value,
            PRule::PowerLaw { coeff, alpha } => {
                (coeff * (n as f64).powf(1.0 + alpha)).floor() as usize
            }
        }
    }
}

fn default_n_test() -> usize {
    250
}

fn default_trials() -> usize {
    50
}

fn default_allow_pinv() -> bool {
    true
}

/// One sweep configuration. Deserializes strictly: unknown keys are fatal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Spectrum preset, e.g. "finite:k_max=20", "exp:a=1", "poly:a=2".
    pub spectrum: String,
    pub theta: ThetaPreset,
    pub gamma_rule: GammaRule,
    pub sigma_x_rule: SigmaXRule,
    pub p_rule: PRule,
    pub sigma_y: f64,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise_family: NoiseFamily,
    /// Fall back to least-squares pseudo-inversion when gamma = 0 leaves
    /// the Gram rank deficient (recorded per trial, never silent).
    #[serde(default = "default_allow_pinv")]
    pub allow_pinv: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Config("n_grid must be non-empty".into()));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("n_grid must be strictly ascending".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.n_test < 2 {
            return Err(Error::Config("n_test must be >= 2".into()));
        }
        for &n in &self.n_grid {
            let p = self.p_rule.at(n);
            if p == 0 {
                return Err(Error::Config(format!(
                    "p rule yields p = 0 at n = {n}; increase the coefficient"
                )));
            }
            let bytes = 4 * n * p * std::mem::size_of::<f64>();
            if bytes > TRIAL_MEMORY_LIMIT {
                return Err(Error::Config(format!(
                    "scenario '{}' needs ~{} MiB of dense panels at n = {n}, p = {p}; \
                     the per-trial limit is {} MiB",
                    self.name,
                    bytes >> 20,
                    TRIAL_MEMORY_LIMIT >> 20
                )));
            }
        }
        Ok(())
    }
}

/// One (n, trial) measurement. Metric fields are NaN when the record's
/// stage could not run (e.g. exact decomposition under a pseudo-inverse
/// fit); `solver_failed` marks trials where even the fit was impossible.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord<T> {
    pub n: usize,
    pub p: usize,
    pub gamma: T,
    pub sigma_x: T,
    pub trial: usize,
    pub train_mse: T,
    /// Mean of y_i^2 on the trial's training set (interpolation checks are
    /// relative to this scale).
    pub mean_y_sq: T,
    pub test_mse: T,
    pub test_se: T,
    pub b: T,
    pub v: T,
    pub s1: T,
    pub s2: T,
    pub s3: T,
    pub delta_opnorm: T,
    pub mu_n_k: T,
    pub mu_n_a: T,
    pub event_c: bool,
    pub event_d: bool,
    pub solver_failed: bool,
    pub used_pinv: bool,
}

/// Aggregated sweep output.
#[derive(Debug, Clone)]
pub struct SweepResult<T> {
    pub scenario: String,
    pub n_grid: Vec<usize>,
    pub records: Vec<SweepRecord<T>>,
    /// Median test MSE per n over non-failed trials.
    pub medians: Vec<T>,
    /// Log-log slope of median test MSE vs n (needs >= 3 usable grid
    /// points with positive medians).
    pub slope: Option<(T, T)>,
}

/// Ordinary least squares on (ln n, ln val); the standard error comes from
/// the residual variance. Errors on non-positive values or fewer than
/// three points.
pub fn fit_loglog_slope<T: Real>(ns: &[usize], vals: &[T]) -> Result<(T, T)> {
    if ns.len() != vals.len() {
        return Err(Error::Dim("ns and vals must have equal length".into()));
    }
    if ns.len() < 3 {
        return Err(Error::Domain("slope fit needs at least 3 points".into()));
    }
    if vals.iter().any(|&v| v <= T::zero() || !v.is_finite()) {
        return Err(Error::Domain("slope fit needs positive finite values".into()));
    }
    let m = T::of_usize(ns.len());
    let xs: Vec<T> = ns.iter().map(|&n| T::of_usize(n).ln()).collect();
    let ys: Vec<T> = vals.iter().map(|&v| v.ln()).collect();
    let x_bar = xs.iter().copied().sum::<T>() / m;
    let y_bar = ys.iter().copied().sum::<T>() / m;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - x_bar) * (x - x_bar);
        sxy += (x - x_bar) * (y - y_bar);
    }
    if sxx <= T::zero() {
        return Err(Error::Domain("slope fit needs distinct n values".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let mut rss = T::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        let r = y - (intercept + slope * x);
        rss += r * r;
    }
    let dof = m - T::of(2.0);
    let se = (rss / dof / sxx).sqrt();
    Ok((slope, se))
}

fn nan_record<T: Real>(n: usize, p: usize, gamma: T, sigma_x: T, trial: usize) -> SweepRecord<T> {
    let nan = T::nan();
    SweepRecord {
        n,
        p,
        gamma,
        sigma_x,
        trial,
        train_mse: nan,
        mean_y_sq: nan,
        test_mse: nan,
        test_se: nan,
        b: nan,
        v: nan,
        s1: nan,
        s2: nan,
        s3: nan,
        delta_opnorm: nan,
        mu_n_k: nan,
        mu_n_a: nan,
        event_c: false,
        event_d: false,
        solver_failed: false,
        used_pinv: false,
    }
}

fn run_trial<T: Real>(
    sc: &Scenario,
    spec: &EigenSpectrum<T>,
    target: &TargetSpec<T>,
    tree: &SeedTree,
    n: usize,
    trial: usize,
) -> Result<SweepRecord<T>> {
    let p = sc.p_rule.at(n);
    let gamma = T::of(sc.gamma_rule.at(n));
    let sigma_x = T::of(sc.sigma_x_rule.at(n));
    let config = LmmConfig {
        spectrum: spec.clone(),
        sigma_x,
        sigma_y: T::of(sc.sigma_y),
        noise: sc.noise_family,
    };
    let label = format!("rate-sweep/{}/n={n}/trial={trial}", sc.name);
    let mut rng = tree.stream(&label);
    let ds = generate_dataset(&config, target, n, p, &mut rng)?;

    let mut rec = nan_record(n, p, gamma, sigma_x, trial);
    rec.mean_y_sq = ds.y.iter().map(|&v| v * v).sum::<T>() / T::of_usize(n);

    // Concentration diagnostics are solver independent.
    let delta = delta_matrix(&ds);
    let mu_n_k = mu_n_kernel_tail_numeric(&ds, 0);
    let (event_c, event_d) =
        event_indicators_cached(delta.opnorm, mu_n_k, sigma_x, n, gamma);
    rec.delta_opnorm = delta.opnorm;
    rec.mu_n_k = mu_n_k;
    rec.event_c = event_c;
    rec.event_d = event_d;

    let fit = if sc.allow_pinv {
        fit_dual_pinv(&ds.x, &ds.y, gamma)
    } else {
        fit_dual(&ds.x, &ds.y, gamma)
    };
    let sol: RidgeSolution<T> = match fit {
        Ok(sol) => sol,
        Err(_) => {
            rec.solver_failed = true;
            rec.mu_n_a = gram_min_eig(&ds, gamma);
            return Ok(rec);
        }
    };
    rec.mu_n_a = sol.min_eig_a;
    rec.used_pinv = sol.rank_deficient;

    let residuals = sol.train_residuals(&ds.x, &ds.y);
    rec.train_mse =
        residuals.iter().map(|&r| r * r).sum::<T>() / T::of_usize(n);

    let mc = excess_risk_mc(&ds, &sol, target, sc.n_test, &mut rng)?;
    rec.test_mse = mc.mean;
    rec.test_se = mc.stderr;

    if !sol.rank_deficient {
        let [b, v, s1, s2, s3] = exact_terms(&ds, &sol, target)?;
        rec.b = b;
        rec.v = v;
        rec.s1 = s1;
        rec.s2 = s2;
        rec.s3 = s3;
    }
    Ok(rec)
}

fn gram_min_eig<T: Real>(ds: &LmmDataset<T>, gamma: T) -> T {
    let mut a = ds.x.gram_nt(T::one() / T::of_usize(ds.p));
    a.add_diag(T::of_usize(ds.n) * gamma);
    sym_eig(&a).min_eig()
}

/// Runs the sweep on a pool of `workers` threads (0 = all available).
/// Per-record failures are flagged, never fatal.
pub fn run_rate_sweep<T: Real>(sc: &Scenario, workers: usize) -> Result<SweepResult<T>> {
    sc.validate()?;
    let spec: EigenSpectrum<T> = sc.spectrum.parse()?;
    let target = TargetSpec::from_preset(&spec, &sc.theta)?;
    let tree = SeedTree::new(sc.seed);

    let tasks: Vec<(usize, usize)> = sc
        .n_grid
        .iter()
        .flat_map(|&n| (0..sc.trials).map(move |t| (n, t)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let mut records: Vec<SweepRecord<T>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(n, trial)| {
                run_trial(sc, &spec, &target, &tree, n, trial).unwrap_or_else(|e| {
                    log::warn!("trial n={n} t={trial} failed: {e}");
                    let p = sc.p_rule.at(n);
                    let mut r = nan_record(
                        n,
                        p,
                        T::of(sc.gamma_rule.at(n)),
                        T::of(sc.sigma_x_rule.at(n)),
                        trial,
                    );
                    r.solver_failed = true;
                    r
                })
            })
            .collect()
    });
    // Deterministic reduce order regardless of scheduling.
    records.sort_by_key(|r| (r.n, r.trial));

    let medians: Vec<T> = sc
        .n_grid
        .iter()
        .map(|&n| {
            let mut vals: Vec<T> = records
                .iter()
                .filter(|r| r.n == n && !r.solver_failed && r.test_mse.is_finite())
                .map(|r| r.test_mse)
                .collect();
            if vals.is_empty() {
                return T::nan();
            }
            vals.sort_by(|a, b| a.partial_cmp(b).expect("finite medians"));
            let m = vals.len();
            if m % 2 == 1 {
                vals[m / 2]
            } else {
                (vals[m / 2 - 1] + vals[m / 2]) / T::of(2.0)
            }
        })
        .collect();

    let usable: Vec<(usize, T)> = sc
        .n_grid
        .iter()
        .copied()
        .zip(medians.iter().copied())
        .filter(|(_, m)| m.is_finite() && *m > T::zero())
        .collect();
    let slope = if usable.len() >= 3 {
        let ns: Vec<usize> = usable.iter().map(|&(n, _)| n).collect();
        let vs: Vec<T> = usable.iter().map(|&(_, v)| v).collect();
        fit_loglog_slope(&ns, &vs).ok()
    } else {
        None
    };

    Ok(SweepResult {
        scenario: sc.name.clone(),
        n_grid: sc.n_grid.clone(),
        records,
        medians,
        slope,
    })
}
