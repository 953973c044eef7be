//! Scaled ridge / ridge-less regression.
//!
//! Solves argmin_beta (1/n)||y - p^{-1/2} X beta||^2 + gamma ||beta||^2 in
//! dual form through the n x n matrix A = p^{-1} X Xᵀ + n gamma I. A full
//! symmetric eigendecomposition of A is kept on the solution: it is cheap at
//! these sizes (n <= 512), gives the smallest eigenvalue diagnostic for
//! free, and makes repeated A^{-1} applications in the risk decomposition
//! stable for gamma = 0.

use crate::error::{Error, Result};
use crate::linalg::{dot, sym_eig, Mat, SymEig};
use crate::scalar::Real;
use crate::spectrum::EigenSpectrum;

/// Relative eigenvalue cutoff: modes below `RANK_TOL * mu_1` count as null.
pub const RANK_TOL: f64 = 1e-10;

/// How the fit was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Dual,
    Primal,
    KernelOracle,
}

/// Fitted dual solution. Predictions only ever touch the training data
/// through p^{-1}-scaled inner products.
#[derive(Debug, Clone)]
pub struct RidgeSolution<T> {
    /// (p^{-1} X Xᵀ + n gamma I)^{-1} y.
    pub dual_coef: Vec<T>,
    pub gamma: T,
    /// Smallest eigenvalue of A (true value, also when rank deficient).
    pub min_eig_a: T,
    pub mode: SolveMode,
    /// True when the gamma = 0 Gram was rank deficient and null modes were
    /// dropped (pseudo-inverse fit). `fit_dual` never does this silently.
    pub rank_deficient: bool,
    pub n: usize,
    pub p: usize,
    /// Eigensystem of A, retained for downstream diagnostics.
    pub eig_a: SymEig<T>,
}

impl<T: Real> RidgeSolution<T> {
    /// Applies A^{-1} (with the fit's thresholding) to a vector.
    pub fn apply_inv(&self, v: &[T]) -> Vec<T> {
        let tol = if self.rank_deficient { T::of(RANK_TOL) } else { T::zero() };
        self.eig_a.apply_inv_vec(v, tol)
    }

    /// Applies A^{-1} to each column of a matrix.
    pub fn apply_inv_mat(&self, m: &Mat<T>) -> Mat<T> {
        let tol = if self.rank_deficient { T::of(RANK_TOL) } else { T::zero() };
        self.eig_a.apply_inv_mat(m, tol)
    }

    /// Primal coefficients beta = p^{-1/2} Xᵀ dual_coef.
    pub fn primal_coef(&self, x: &Mat<T>) -> Vec<T> {
        let mut beta = x.t_vec(&self.dual_coef);
        let s = T::one() / T::of_usize(self.p).sqrt();
        for b in &mut beta {
            *b *= s;
        }
        beta
    }

    /// Training residuals y - p^{-1} X Xᵀ dual_coef.
    pub fn train_residuals(&self, x: &Mat<T>, y: &[T]) -> Vec<T> {
        let gram_dual = {
            let xt_dual = x.t_vec(&self.dual_coef);
            let mut v = x.mat_vec(&xt_dual);
            let inv_p = T::one() / T::of_usize(self.p);
            for vi in &mut v {
                *vi *= inv_p;
            }
            v
        };
        y.iter().zip(gram_dual).map(|(&yi, gi)| yi - gi).collect()
    }
}

fn scaled_gram<T: Real>(x: &Mat<T>) -> Mat<T> {
    x.gram_nt(T::one() / T::of_usize(x.cols()))
}

fn fit_dual_inner<T: Real>(
    x: &Mat<T>,
    y: &[T],
    gamma: T,
    allow_pinv: bool,
) -> Result<RidgeSolution<T>> {
    let n = x.rows();
    let p = x.cols();
    if n == 0 || p == 0 {
        return Err(Error::Dim("fit_dual needs n >= 1 and p >= 1".into()));
    }
    if y.len() != n {
        return Err(Error::Dim(format!("y has length {}, expected {n}", y.len())));
    }
    if gamma < T::zero() {
        return Err(Error::Config("gamma must be >= 0".into()));
    }
    let mut a = scaled_gram(x);
    a.add_diag(T::of_usize(n) * gamma);
    let eig_a = sym_eig(&a);
    let min_eig = eig_a.min_eig();
    let tol = T::of(RANK_TOL) * eig_a.max_eig().max(T::zero());
    let singular = min_eig <= tol;
    if gamma == T::zero() && singular && !allow_pinv {
        return Err(Error::SingularGram {
            min_eig: min_eig.as_f64(),
            tol: tol.as_f64(),
        });
    }
    let rank_deficient = singular;
    let dual_coef = if rank_deficient {
        eig_a.apply_inv_vec(y, T::of(RANK_TOL))
    } else {
        eig_a.apply_inv_vec(y, T::zero())
    };
    Ok(RidgeSolution {
        dual_coef,
        gamma,
        min_eig_a: min_eig,
        mode: SolveMode::Dual,
        rank_deficient,
        n,
        p,
        eig_a,
    })
}

/// Dual ridge fit. For gamma = 0 the Gram matrix must be invertible
/// (relative tolerance [`RANK_TOL`]); callers that want the least-squares
/// pseudo-inverse fallback use [`fit_dual_pinv`].
pub fn fit_dual<T: Real>(x: &Mat<T>, y: &[T], gamma: T) -> Result<RidgeSolution<T>> {
    fit_dual_inner(x, y, gamma, false)
}

/// Dual fit with pseudo-inversion of null Gram modes. The returned
/// `min_eig_a` still reports the true smallest eigenvalue.
pub fn fit_dual_pinv<T: Real>(x: &Mat<T>, y: &[T], gamma: T) -> Result<RidgeSolution<T>> {
    fit_dual_inner(x, y, gamma, true)
}

/// Prediction p^{-1} x_testᵀ Xᵀ dual_coef.
pub fn predict<T: Real>(sol: &RidgeSolution<T>, x: &Mat<T>, x_test: &[T]) -> Result<T> {
    if x.rows() != sol.n || x.cols() != sol.p {
        return Err(Error::Dim(format!(
            "training matrix is {}x{}, solution was fit on {}x{}",
            x.rows(),
            x.cols(),
            sol.n,
            sol.p
        )));
    }
    if x_test.len() != sol.p {
        return Err(Error::Dim(format!(
            "test vector has length {}, expected {}",
            x_test.len(),
            sol.p
        )));
    }
    let inv_p = T::one() / T::of_usize(sol.p);
    let mut acc = T::zero();
    for (i, &c) in sol.dual_coef.iter().enumerate() {
        acc += c * dot(x.row(i), x_test);
    }
    Ok(acc * inv_p)
}

/// Primal-form fit (p^{-1} XᵀX + n gamma I)^{-1} p^{-1/2} Xᵀ y. Solves a
/// p x p system; intended as the independent algebraic route for checking
/// the dual path, not for large p.
pub fn fit_primal<T: Real>(x: &Mat<T>, y: &[T], gamma: T) -> Result<Vec<T>> {
    let n = x.rows();
    let p = x.cols();
    if y.len() != n {
        return Err(Error::Dim(format!("y has length {}, expected {n}", y.len())));
    }
    let mut gram_p = x.matmul_tn(x);
    gram_p.scale(T::one() / T::of_usize(p));
    gram_p.add_diag(T::of_usize(n) * gamma);
    let eig = sym_eig(&gram_p);
    let tol = T::of(RANK_TOL) * eig.max_eig().max(T::zero());
    if eig.min_eig() <= tol {
        return Err(Error::SingularGram {
            min_eig: eig.min_eig().as_f64(),
            tol: tol.as_f64(),
        });
    }
    let mut xty = x.t_vec(y);
    let s = T::one() / T::of_usize(p).sqrt();
    for v in &mut xty {
        *v *= s;
    }
    Ok(eig.apply_inv_vec(&xty, T::zero()))
}

/// Primal prediction p^{-1/2} x_testᵀ beta.
pub fn predict_primal<T: Real>(beta: &[T], x_test: &[T]) -> T {
    dot(beta, x_test) / T::of_usize(beta.len()).sqrt()
}

/// Kernel ridge regression on explicit feature rows:
/// theta_hat = Phiᵀ (Phi Phiᵀ + reg I)^{-1} y with reg = sigma_x^2 + n gamma.
/// The p -> infinity comparator for the latent model fit.
pub fn kernel_ridge_fit<T: Real>(phi: &Mat<T>, y: &[T], reg: T) -> Result<Vec<T>> {
    if reg <= T::zero() {
        return Err(Error::Config("kernel ridge regulariser must be > 0".into()));
    }
    if phi.rows() != y.len() {
        return Err(Error::Dim(format!(
            "Phi has {} rows, y has length {}",
            phi.rows(),
            y.len()
        )));
    }
    let mut g = phi.gram_nt(T::one());
    g.add_diag(reg);
    let eig = sym_eig(&g);
    let alpha = eig.apply_inv_vec(y, T::zero());
    Ok(phi.t_vec(&alpha))
}

/// Kernel predictor z -> <phi(z), theta_hat>.
pub fn kernel_predict<T: Real>(
    spec: &EigenSpectrum<T>,
    theta_hat: &[T],
    z: T,
) -> Result<T> {
    let phi = spec.feature_map(z)?;
    if phi.len() != theta_hat.len() {
        return Err(Error::Dim(format!(
            "theta_hat has length {}, spectrum retains {}",
            theta_hat.len(),
            phi.len()
        )));
    }
    Ok(dot(phi.as_slice(), theta_hat))
}
