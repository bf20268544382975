//! Constraint propagation through a tensor low-rank prior.
//!
//! Solves
//!
//! ```text
//! min  tnn(C) + lambda ||E||_F^2
//! s.t. C(:,:,1) = Z,  C(:,:,2) = A,  A0 = A + E,
//!      Z_ij = +1 on must-links,  Z_ij = -1 on cannot-links
//! ```
//!
//! by ADMM with an auxiliary `D = Z` that carries the hard clamps. Each sweep
//! updates C (t-SVT), Z (closed form), A (multiplicative, keeps A >= 0),
//! E (closed form), D (clamp), then the multipliers and the penalty `mu`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ConstraintMatrix, ConstraintSet, SimilarityMatrix};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;
use crate::tensor::{tsvt, PairTensor};

/// Offset added to `A0` when seeding `A`, so the multiplicative update can
/// move every entry.
pub const A_INIT_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Weight on the residual `||E||_F^2`.
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once every primal residual (max-abs) is below this.
    pub tol: f64,
    pub rho: f64,
    pub mu0: f64,
    pub mu_max: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            lambda: 0.03,
            max_iter: 500,
            tol: 1e-6,
            rho: 1.1,
            mu0: 1e-3,
            mu_max: 1e10,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.rho > 1.0) {
            return Err(Error::invalid(format!("rho must be > 1, got {}", self.rho)));
        }
        if !(self.mu0 > 0.0 && self.mu0 <= self.mu_max) {
            return Err(Error::invalid("need 0 < mu0 <= mu_max"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be > 0"));
        }
        Ok(())
    }
}

/// Max-abs primal residuals of the four equality constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `A0 - A - E`
    pub reconstruction: f64,
    /// `Z - C(:,:,1)`
    pub constraint_slice: f64,
    /// `A - C(:,:,2)`
    pub similarity_slice: f64,
    /// `Z - D`
    pub auxiliary: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.reconstruction
            .max(self.constraint_slice)
            .max(self.similarity_slice)
            .max(self.auxiliary)
    }

    pub fn all_below(&self, tol: f64) -> bool {
        self.reconstruction < tol
            && self.constraint_slice < tol
            && self.similarity_slice < tol
            && self.auxiliary < tol
    }
}

/// Full solver state. Fields are public so callers can inspect or seed
/// individual variables; [`AdmmState::step`] runs one complete sweep.
#[derive(Debug, Clone)]
pub struct AdmmState<T> {
    pub a0: DenseMatrix<T>,
    pub c: PairTensor<T>,
    pub a: DenseMatrix<T>,
    pub z: DenseMatrix<T>,
    pub e: DenseMatrix<T>,
    pub d: DenseMatrix<T>,
    pub y1: DenseMatrix<T>,
    pub y2: PairTensor<T>,
    pub y3: DenseMatrix<T>,
    pub mu: T,
    pub rho: T,
    pub mu_max: T,
    /// `(i, j, +-1)` clamps applied to `D`, both orientations listed.
    clamps: Vec<(usize, usize, T)>,
}

impl<T: Scalar> AdmmState<T> {
    /// Initial state: multipliers, C, Z and E at zero; `A = A0 + 1e-6`;
    /// `D` zero except for the constraint clamps.
    pub fn new(a0: &SimilarityMatrix<T>, constraints: &ConstraintSet, cfg: &AdmmConfig) -> Result<Self> {
        cfg.validate()?;
        let n = a0.n();
        constraints.check_bounds(n)?;
        let mut clamps = Vec::with_capacity(2 * constraints.len());
        for c in constraints.iter() {
            let v = T::from_i8(c.kind.sign()).unwrap();
            clamps.push((c.i, c.j, v));
            clamps.push((c.j, c.i, v));
        }
        let zeros = DenseMatrix::zeros(n, n);
        let mut d = zeros.clone();
        for &(i, j, v) in &clamps {
            d[(i, j)] = v;
        }
        let offset = T::lit(A_INIT_OFFSET);
        Ok(Self {
            a0: a0.matrix().clone(),
            c: PairTensor::zeros(n),
            a: a0.map(|v| v + offset),
            z: zeros.clone(),
            e: zeros.clone(),
            d,
            y1: zeros.clone(),
            y2: PairTensor::zeros(n),
            y3: zeros,
            mu: T::lit(cfg.mu0),
            rho: T::lit(cfg.rho),
            mu_max: T::lit(cfg.mu_max),
            clamps,
        })
    }

    pub fn n(&self) -> usize {
        self.a0.rows()
    }

    pub fn clamps(&self) -> &[(usize, usize, T)] {
        &self.clamps
    }

    /// `C = tsvt(X + Y2 / mu, 1 / mu)` with `X = (Z, A)`.
    pub fn update_c(&self) -> Result<PairTensor<T>> {
        let inv_mu = T::one() / self.mu;
        let first = self.z.zip_map(self.y2.first(), |z, y| z + y * inv_mu);
        let second = self.a.zip_map(self.y2.second(), |a, y| a + y * inv_mu);
        tsvt(&PairTensor::new(first, second)?, inv_mu)
    }

    /// `Z = (C1 - Y2_1 / mu + D - Y3 / mu) / 2`.
    pub fn update_z(&self) -> DenseMatrix<T> {
        let inv_mu = T::one() / self.mu;
        let half = T::lit(0.5);
        let n = self.n();
        let (c1, y21) = (self.c.first(), self.y2.first());
        DenseMatrix::from_fn(n, n, |i, j| {
            (c1[(i, j)] - y21[(i, j)] * inv_mu + self.d[(i, j)] - self.y3[(i, j)] * inv_mu) * half
        })
    }

    /// Multiplicative update built from the positive/negative parts of the
    /// gradient of the augmented Lagrangian in `A`.
    pub fn update_a(&self) -> DenseMatrix<T> {
        let inv_mu = T::one() / self.mu;
        let two = T::lit(2.0);
        let eps = T::guard();
        let zero = T::zero();
        let pos = |v: T| v.max(zero);
        let neg = |v: T| (-v).max(zero);
        let n = self.n();
        let (c2, y22) = (self.c.second(), self.y2.second());
        DenseMatrix::from_fn(n, n, |i, j| {
            let idx = (i, j);
            let (a, e, y1, c, y2) = (self.a[idx], self.e[idx], self.y1[idx], c2[idx], y22[idx]);
            let num = self.a0[idx] + pos(y1) * inv_mu + pos(c) + neg(e) + neg(y2) * inv_mu;
            let den = two * a + pos(e) + pos(y2) * inv_mu + neg(y1) * inv_mu + neg(c) + eps;
            a * (num / den)
        })
    }

    /// `E = (mu A0 + Y1 - mu A) / (2 lambda + mu)`.
    pub fn update_e(&self, lambda: T) -> DenseMatrix<T> {
        let mu = self.mu;
        let denom = T::lit(2.0) * lambda + mu;
        let n = self.n();
        DenseMatrix::from_fn(n, n, |i, j| {
            (mu * self.a0[(i, j)] + self.y1[(i, j)] - mu * self.a[(i, j)]) / denom
        })
    }

    /// `D = Z + Y3 / mu`, then +1 / -1 on must-link / cannot-link pairs.
    pub fn update_d(&self) -> DenseMatrix<T> {
        let inv_mu = T::one() / self.mu;
        let mut d = self.z.zip_map(&self.y3, |z, y| z + y * inv_mu);
        for &(i, j, v) in &self.clamps {
            d[(i, j)] = v;
        }
        d
    }

    /// Dual ascent on all multipliers with the current `mu`, then
    /// `mu <- min(rho mu, mu_max)`.
    pub fn update_multipliers(&mut self) {
        let mu = self.mu;
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                let idx = (i, j);
                self.y1[idx] += mu * (self.a0[idx] - self.a[idx] - self.e[idx]);
                self.y3[idx] += mu * (self.z[idx] - self.d[idx]);
            }
        }
        let r1 = self.z.sub(self.c.first());
        let r2 = self.a.sub(self.c.second());
        self.y2.first_mut().axpy(mu, &r1);
        self.y2.second_mut().axpy(mu, &r2);
        self.mu = (self.rho * mu).min(self.mu_max);
    }

    pub fn residuals(&self) -> Residuals {
        let n = self.n();
        let mut r = [T::zero(); 4];
        let (c1, c2) = (self.c.first(), self.c.second());
        for i in 0..n {
            for j in 0..n {
                let idx = (i, j);
                r[0] = r[0].max((self.a0[idx] - self.a[idx] - self.e[idx]).abs());
                r[1] = r[1].max((self.z[idx] - c1[idx]).abs());
                r[2] = r[2].max((self.a[idx] - c2[idx]).abs());
                r[3] = r[3].max((self.z[idx] - self.d[idx]).abs());
            }
        }
        Residuals {
            reconstruction: r[0].to_f64_lossy(),
            constraint_slice: r[1].to_f64_lossy(),
            similarity_slice: r[2].to_f64_lossy(),
            auxiliary: r[3].to_f64_lossy(),
        }
    }

    /// One full sweep: C, Z, A, E, D, multipliers. Returns the residuals of
    /// the updated primal variables.
    pub fn step(&mut self, lambda: T) -> Result<Residuals> {
        self.c = self.update_c()?;
        self.z = self.update_z();
        self.a = self.update_a();
        self.e = self.update_e(lambda);
        self.d = self.update_d();
        let res = self.residuals();
        self.update_multipliers();
        Ok(res)
    }
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome<T> {
    /// Refined similarity, clipped to `[0, 1]`.
    pub a: SimilarityMatrix<T>,
    /// Propagated constraint evidence, clipped to `[-1, 1]`. Known pairs are
    /// not re-clamped.
    pub z: ConstraintMatrix<T>,
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<Residuals>,
}

/// Runs sweeps until all residuals fall below `cfg.tol` or `cfg.max_iter`
/// sweeps have run. Without convergence the iterate with the smallest
/// maximum residual is returned and `converged` is false.
pub fn admm_solve<T: Scalar>(
    a0: &SimilarityMatrix<T>,
    constraints: &ConstraintSet,
    cfg: &AdmmConfig,
) -> Result<AdmmOutcome<T>> {
    let mut state = AdmmState::new(a0, constraints, cfg)?;
    let lambda = T::lit(cfg.lambda);
    let mut history = Vec::new();
    let mut best: Option<(f64, DenseMatrix<T>, DenseMatrix<T>)> = None;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let res = state.step(lambda)?;
        history.push(res);
        if res.all_below(cfg.tol) {
            converged = true;
            break;
        }
        let worst = res.max();
        if best.as_ref().map_or(true, |(b, _, _)| worst < *b) {
            best = Some((worst, state.a.clone(), state.z.clone()));
        }
    }
    let (a, z) = match (converged, best) {
        (false, Some((_, a, z))) => (a, z),
        _ => (state.a, state.z),
    };
    Ok(AdmmOutcome {
        a: SimilarityMatrix::clamped(a)?,
        z: ConstraintMatrix::clamped(z)?,
        converged,
        iterations: history.len(),
        residual_history: history,
    })
}
