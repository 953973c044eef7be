//! Mercer eigensystem of the implicit kernel.
//!
//! The latent space is [0, pi] with the uniform measure and the cosine
//! eigenbasis u_k(z) = sqrt(2) cos(kz), which is orthonormal in L2. A
//! spectrum assigns eigenvalues lambda_1 >= lambda_2 >= ... >= 0 in one of
//! three regimes (finite rank, exponential decay, polynomial decay), and
//! everything else — kernel evaluations, feature maps, tail statistics,
//! the concentration coefficient — is derived from it.
//!
//! Infinite regimes are truncated at `trunc` coordinates for all finite
//! computations (default 1e4). Tail sums accumulate from the smallest
//! retained eigenvalue upward to limit cancellation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default truncation for the infinite-rank regimes.
pub const DEFAULT_TRUNC: usize = 10_000;

/// Default evaluation grid size on [0, pi].
pub const DEFAULT_GRID: usize = 2048;

/// Tolerance for the latent-domain check.
const DOMAIN_TOL: f64 = 1e-12;

/// Eigenvalue decay regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayRegime {
    FiniteRank,
    Exponential,
    Polynomial,
}

/// Eigenvalue sequence of the implicit kernel, truncated for computation.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum<T> {
    regime: DecayRegime,
    /// Rank; `None` means infinite.
    k_max: Option<usize>,
    /// Decay rate: lambda_k = scale * e^{-a k} (exponential) or
    /// scale * k^{-(a+2)} (polynomial). Unused for finite rank.
    a: T,
    /// Coordinates retained for all finite computations.
    trunc: usize,
    /// Multiplier applied to every eigenvalue.
    scale: T,
    /// Precomputed lambda_1..lambda_trunc.
    lambdas: Vec<T>,
}

/// Truncated feature map value phi(z).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    /// coords[k-1] = sqrt(lambda_k) u_k(z).
    pub coords: Vec<T>,
}

impl<T: Real> FeatureVector<T> {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coords
    }

    pub fn dot(&self, other: &FeatureVector<T>) -> T {
        crate::linalg::dot(&self.coords, &other.coords)
    }
}

/// Tail statistics of the eigenvalue sequence past a cut index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailStats<T> {
    pub k: usize,
    /// tr(Lambda_{>k})
    pub trace_tail: T,
    /// tr(Lambda^2_{>k})
    pub trace_tail_sq: T,
    /// lambda_{k+1}
    pub op_norm_tail: T,
    /// tr(Lambda_{>k}) / lambda_{k+1}
    pub r_k: T,
    /// tr(Lambda_{>k})^2 / tr(Lambda^2_{>k})
    pub r_cap_k: T,
    /// r_k of the squared spectrum: tr(Lambda^2_{>k}) / lambda_{k+1}^2
    pub r_k_sq: T,
    /// True when lambda_{k+1} = 0 (r_k, R_k set to 0 by convention).
    pub degenerate: bool,
}

/// Evaluates the k-th basis function u_k(z) = sqrt(2) cos(kz).
///
/// Orthonormal under the uniform measure on [0, pi]:
/// (1/pi) * int_0^pi u_m u_n dz = delta_{mn}.
pub fn eigenfunction_eval<T: Real>(k: usize, z: T) -> Result<T> {
    if k == 0 {
        return Err(Error::Domain("eigenfunction index k must be >= 1".into()));
    }
    check_domain(z)?;
    Ok(T::SQRT_2() * (T::of_usize(k) * z).cos())
}

fn check_domain<T: Real>(z: T) -> Result<()> {
    let tol = T::of(DOMAIN_TOL);
    if z < -tol || z > T::PI() + tol {
        return Err(Error::Domain(format!("latent point {z} outside [0, pi]")));
    }
    Ok(())
}

/// Equispaced grid of `len` points on [0, pi], endpoints included.
pub fn latent_grid<T: Real>(len: usize) -> Vec<T> {
    assert!(len >= 2, "grid needs at least two points");
    let step = T::PI() / T::of_usize(len - 1);
    (0..len).map(|i| T::of_usize(i) * step).collect()
}

impl<T: Real> EigenSpectrum<T> {
    /// lambda_k = scale for k <= k_max, zero after.
    pub fn finite_rank(k_max: usize, scale: T) -> Result<Self> {
        Self::finite_rank_trunc(k_max, scale, k_max)
    }

    pub fn finite_rank_trunc(k_max: usize, scale: T, trunc: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::Config("finite rank requires k_max >= 1".into()));
        }
        if trunc < k_max {
            return Err(Error::Config(format!(
                "trunc ({trunc}) must be >= k_max ({k_max})"
            )));
        }
        Self::build(DecayRegime::FiniteRank, Some(k_max), T::one(), trunc, scale)
    }

    /// lambda_k = scale * e^{-a k}.
    pub fn exponential(a: T, trunc: usize) -> Result<Self> {
        Self::build(DecayRegime::Exponential, None, a, trunc, T::one())
    }

    /// lambda_k = scale * k^{-(a+2)}.
    pub fn polynomial(a: T, trunc: usize) -> Result<Self> {
        Self::build(DecayRegime::Polynomial, None, a, trunc, T::one())
    }

    fn build(
        regime: DecayRegime,
        k_max: Option<usize>,
        a: T,
        trunc: usize,
        scale: T,
    ) -> Result<Self> {
        if trunc == 0 {
            return Err(Error::Config("trunc must be >= 1".into()));
        }
        if scale < T::zero() {
            return Err(Error::Config("scale must be non-negative".into()));
        }
        if k_max.is_none() && a <= T::zero() {
            // a > 0 is what makes sum_k k*lambda_k finite in both infinite regimes.
            return Err(Error::Config("decay rate a must be > 0".into()));
        }
        let lambdas = (1..=trunc)
            .map(|k| {
                let v = match regime {
                    DecayRegime::FiniteRank => {
                        if k <= k_max.expect("finite rank has k_max") {
                            T::one()
                        } else {
                            T::zero()
                        }
                    }
                    DecayRegime::Exponential => (-a * T::of_usize(k)).exp(),
                    DecayRegime::Polynomial => T::of_usize(k).powf(-(a + T::of(2.0))),
                };
                scale * v
            })
            .collect();
        Ok(EigenSpectrum { regime, k_max, a, trunc, scale, lambdas })
    }

    /// Returns a copy truncated to a different length.
    pub fn with_trunc(&self, trunc: usize) -> Result<Self> {
        if let Some(k_max) = self.k_max {
            if trunc < k_max {
                return Err(Error::Config(format!(
                    "trunc ({trunc}) must be >= k_max ({k_max})"
                )));
            }
        }
        Self::build(self.regime, self.k_max, self.a, trunc, self.scale)
    }

    pub fn regime(&self) -> DecayRegime {
        self.regime
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// Rank (`None` = infinite).
    pub fn k_max(&self) -> Option<usize> {
        self.k_max
    }

    /// lambda_k, 1-based; zero past the truncation.
    pub fn lambda(&self, k: usize) -> T {
        assert!(k >= 1, "eigenvalue index is 1-based");
        if k <= self.trunc {
            self.lambdas[k - 1]
        } else {
            T::zero()
        }
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    /// Number of leading strictly positive eigenvalues among the retained
    /// coordinates. Exponential regimes underflow to exact zero past
    /// roughly 745/a in f64; those coordinates are genuinely null here.
    pub fn nonzero_count(&self) -> usize {
        self.lambdas.iter().take_while(|&&l| l > T::zero()).count()
    }

    /// Kernel value f(z, z') = sum_k lambda_k u_k(z) u_k(z')
    /// = 2 sum_k lambda_k cos(kz) cos(kz').
    pub fn kernel_eval(&self, z: T, z2: T) -> Result<T> {
        check_domain(z)?;
        check_domain(z2)?;
        let mut acc = T::zero();
        // smallest terms first
        for k in (1..=self.trunc).rev() {
            let l = self.lambdas[k - 1];
            if l == T::zero() {
                continue;
            }
            let kf = T::of_usize(k);
            acc += l * T::of(2.0) * (kf * z).cos() * (kf * z2).cos();
        }
        Ok(acc)
    }

    /// Truncated feature map phi(z); its self inner products reproduce
    /// `kernel_eval` at the same truncation.
    pub fn feature_map(&self, z: T) -> Result<FeatureVector<T>> {
        check_domain(z)?;
        let coords = (1..=self.trunc)
            .map(|k| {
                let l = self.lambdas[k - 1];
                if l == T::zero() {
                    T::zero()
                } else {
                    l.sqrt() * T::SQRT_2() * (T::of_usize(k) * z).cos()
                }
            })
            .collect();
        Ok(FeatureVector { coords })
    }

    /// Tail statistics over retained coordinates k+1..trunc. Cuts at or
    /// past the truncation yield the all-zero degenerate tail, so
    /// finite-rank presets compose cleanly at k = k_max.
    pub fn tail_stats(&self, k: usize) -> Result<TailStats<T>> {
        if k >= self.trunc {
            return Ok(TailStats {
                k,
                trace_tail: T::zero(),
                trace_tail_sq: T::zero(),
                op_norm_tail: T::zero(),
                r_k: T::zero(),
                r_cap_k: T::zero(),
                r_k_sq: T::zero(),
                degenerate: true,
            });
        }
        let mut trace_tail = T::zero();
        let mut trace_tail_sq = T::zero();
        for j in (k + 1..=self.trunc).rev() {
            let l = self.lambdas[j - 1];
            trace_tail += l;
            trace_tail_sq += l * l;
        }
        let op_norm_tail = self.lambda(k + 1);
        let degenerate = op_norm_tail == T::zero();
        let (r_k, r_cap_k, r_k_sq) = if degenerate {
            (T::zero(), T::zero(), T::zero())
        } else {
            let r_k = trace_tail / op_norm_tail;
            let r_cap_k = if trace_tail_sq > T::zero() {
                trace_tail * trace_tail / trace_tail_sq
            } else {
                T::zero()
            };
            let r_k_sq = trace_tail_sq / (op_norm_tail * op_norm_tail);
            (r_k, r_cap_k, r_k_sq)
        };
        Ok(TailStats {
            k,
            trace_tail,
            trace_tail_sq,
            op_norm_tail,
            r_k,
            r_cap_k,
            r_k_sq,
            degenerate,
        })
    }

    /// Grid approximations of the extremal coefficients
    ///
    ///   alpha_k = inf_z ||phi(z)_{>k}||^2 / tr(Lambda_{>k})
    ///   beta_k  = sup_z max of the three deviation ratios
    ///
    /// over the supplied latent grid. True extrema are over the whole latent
    /// space; the grid is a configurable approximation.
    pub fn alpha_beta(&self, k: usize, grid: &[T]) -> Result<(T, T)> {
        if grid.is_empty() {
            return Err(Error::Domain("alpha_beta requires a non-empty grid".into()));
        }
        let tail = self.tail_stats(k)?;
        if tail.trace_tail <= T::zero() {
            return Err(Error::EmptyTail { k });
        }
        let mut alpha = T::infinity();
        let mut beta = T::neg_infinity();
        for &z in grid {
            check_domain(z)?;
            let mut head_u = T::zero();
            let mut tail_phi = T::zero();
            let mut tail_lphi = T::zero();
            for j in (1..=self.trunc).rev() {
                let kf = T::of_usize(j);
                let u = T::SQRT_2() * (kf * z).cos();
                let l = self.lambdas[j - 1];
                if j <= k {
                    head_u += u * u;
                } else if l > T::zero() {
                    let phi_sq = l * u * u;
                    tail_phi += phi_sq;
                    tail_lphi += l * phi_sq;
                }
            }
            let ratio_tail = tail_phi / tail.trace_tail;
            alpha = alpha.min(ratio_tail);
            let mut b = ratio_tail;
            if k > 0 {
                b = b.max(head_u / T::of_usize(k));
            }
            if tail.trace_tail_sq > T::zero() {
                b = b.max(tail_lphi / tail.trace_tail_sq);
            }
            beta = beta.max(b);
        }
        Ok((alpha, beta))
    }

    /// Concentration coefficient
    ///
    ///   rho_{k,n} = (lambda_{k+1} + mu_1((1/n) K_{>k}) + sigma_x^2/n + gamma)
    ///             / (mu_n((1/n) K_{>k}) + sigma_x^2/n + gamma)
    ///
    /// where (mu_1, mu_n) are the extreme eigenvalues of the scaled tail
    /// Gram matrix, supplied by the caller from a realized dataset.
    pub fn rho(
        &self,
        gram_tail_eigs: (T, T),
        k: usize,
        n: usize,
        sigma_x: T,
        gamma: T,
    ) -> Result<T> {
        let (mu_1, mu_n) = gram_tail_eigs;
        if mu_n < T::zero() || mu_1 < mu_n {
            return Err(Error::Domain(format!(
                "tail Gram eigenvalues must satisfy mu_1 >= mu_n >= 0 (got {mu_1}, {mu_n})"
            )));
        }
        if sigma_x < T::zero() || gamma < T::zero() {
            return Err(Error::Domain("sigma_x and gamma must be >= 0".into()));
        }
        let nf = T::of_usize(n);
        let shift = sigma_x * sigma_x / nf + gamma;
        let denom = mu_n + shift;
        if denom <= T::zero() {
            return Err(Error::ZeroDenominator(
                "mu_n + sigma_x^2/n + gamma = 0 (event D)".into(),
            ));
        }
        let op_tail = if k < self.trunc { self.lambda(k + 1) } else { T::zero() };
        Ok((op_tail + mu_1 + shift) / denom)
    }
}

impl<T: Real> fmt::Display for EigenSpectrum<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.regime {
            DecayRegime::FiniteRank => {
                write!(f, "finite:k_max={}", self.k_max.expect("finite rank"))?
            }
            DecayRegime::Exponential => write!(f, "exp:a={}", self.a)?,
            DecayRegime::Polynomial => write!(f, "poly:a={}", self.a)?,
        }
        if self.scale != T::one() {
            write!(f, ",scale={}", self.scale)?;
        }
        let default_trunc = match self.regime {
            DecayRegime::FiniteRank => self.k_max.expect("finite rank"),
            _ => DEFAULT_TRUNC,
        };
        if self.trunc != default_trunc {
            write!(f, ",trunc={}", self.trunc)?;
        }
        Ok(())
    }
}

impl<T: Real> FromStr for EigenSpectrum<T> {
    type Err = Error;

    /// Parses preset names like `finite:k_max=20`, `exp:a=1`,
    /// `poly:a=2,scale=0.5,trunc=4096`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("spectrum preset '{s}': {msg}"));
        let (head, args) = s.split_once(':').ok_or_else(|| bad("expected 'regime:params'"))?;
        let mut k_max = None;
        let mut a = None;
        let mut scale = T::one();
        let mut trunc = None;
        for part in args.split(',') {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| bad("expected key=value parameters"))?;
            match key.trim() {
                "k_max" => {
                    k_max = Some(
                        val.trim()
                            .parse::<usize>()
                            .map_err(|_| bad("k_max must be a positive integer"))?,
                    )
                }
                "a" => {
                    a = Some(T::of(
                        val.trim().parse::<f64>().map_err(|_| bad("a must be a number"))?,
                    ))
                }
                "scale" => {
                    scale = T::of(
                        val.trim()
                            .parse::<f64>()
                            .map_err(|_| bad("scale must be a number"))?,
                    )
                }
                "trunc" => {
                    trunc = Some(
                        val.trim()
                            .parse::<usize>()
                            .map_err(|_| bad("trunc must be a positive integer"))?,
                    )
                }
                other => return Err(bad(&format!("unknown parameter '{other}'"))),
            }
        }
        match head.trim() {
            "finite" => {
                let k_max = k_max.ok_or_else(|| bad("finite regime needs k_max"))?;
                Self::finite_rank_trunc(k_max, scale, trunc.unwrap_or(k_max))
            }
            "exp" => {
                let a = a.ok_or_else(|| bad("exp regime needs a"))?;
                let mut spec = Self::exponential(a, trunc.unwrap_or(DEFAULT_TRUNC))?;
                spec.scale = scale;
                if scale != T::one() {
                    for l in &mut spec.lambdas {
                        *l *= scale;
                    }
                }
                Ok(spec)
            }
            "poly" => {
                let a = a.ok_or_else(|| bad("poly regime needs a"))?;
                let mut spec = Self::polynomial(a, trunc.unwrap_or(DEFAULT_TRUNC))?;
                spec.scale = scale;
                if scale != T::one() {
                    for l in &mut spec.lambdas {
                        *l *= scale;
                    }
                }
                Ok(spec)
            }
            other => Err(bad(&format!("unknown regime '{other}'"))),
        }
    }
}
