//! Concrete counterexample: recover vectors from a Gram factor, interpolate
//! convex functions through the required subgradient pairs, and replay one
//! ADMM iteration.
//!
//! With `β = 1`, `A = B = I`, `b = 0` and `z* = 0`, one iteration reads
//!
//! ```text
//! x⁺ = prox_f(z − y)
//! y⁺ = prox_g(z − x⁺)
//! z⁺ = z − γ(x⁺ + y⁺)
//! ```
//!
//! and the measure is `R = ‖z − z*‖² + γ‖y‖² + (γ−1)‖x + y‖²`.

use nalgebra::{DMatrix, DVector, Matrix2x5, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::certificate::build_certificate;
use crate::error::{Error, Result};
use crate::interpolate::{interpolant, MonotonePoint, PiecewiseConvexFn};
use crate::model::{GammaContext, SymMat5, GOLDEN_RATIO};

/// Largest piece count accepted by [`prox_step`].
pub const MAX_PROX_PIECES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl AdmmState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            x: vec![0.0; dim],
            y: vec![0.0; dim],
            z: vec![0.0; dim],
        }
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    /// Largest coordinate difference across all three blocks.
    pub fn max_abs_diff(&self, other: &AdmmState) -> f64 {
        [
            (&self.x, &other.x),
            (&self.y, &other.y),
            (&self.z, &other.z),
        ]
        .iter()
        .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// `‖z − z*‖² + γ‖y‖² + (γ−1)‖x + y‖²`
pub fn measure_r(state: &AdmmState, z_star: &[f64], ctx: &GammaContext) -> f64 {
    let g = ctx.gamma();
    norm2(&sub(&state.z, z_star))
        + g * norm2(&state.y)
        + (g - 1.0) * norm2(&add(&state.x, &state.y))
}

/// Eigenvalues (descending) and matching eigenvectors of `x`.
fn sorted_eigen(x: &SymMat5) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(*x.as_matrix());
    let mut idx: Vec<usize> = (0..5).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = idx
        .iter()
        .map(|&i| {
            eig.eigenvectors
                .column(i)
                .into_owned()
                .resize_vertically(5, 0.0)
        })
        .collect();
    (values, vectors)
}

/// Factor `P` (`m × 5`) with `PᵀP ≈ X`, keeping eigenpairs above `tolerance·λmax`.
pub fn factor_gram(x: &SymMat5, tolerance: f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = sorted_eigen(x);
    let lmax = values[0].max(0.0);
    if values[4] < -tolerance * lmax.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "matrix is not positive semidefinite (eigenvalue {:e})",
            values[4]
        )));
    }
    let kept: Vec<usize> = (0..5).filter(|&i| values[i] > tolerance * lmax).collect();
    let mut p = DMatrix::zeros(kept.len().max(1), 5);
    for (row, &i) in kept.iter().enumerate() {
        let s = values[i].sqrt();
        for j in 0..5 {
            p[(row, j)] = s * vectors[i][j];
        }
    }
    Ok(p)
}

/// Rank-two factor `P` with `PᵀP ≈ X`, from the two dominant eigenpairs.
///
/// Plain Cholesky breaks down on rank-deficient input, hence the eigendecomposition.
pub fn factor_rank2(x: &SymMat5, tolerance: f64) -> Result<Matrix2x5<f64>> {
    let (values, vectors) = sorted_eigen(x);
    let lmax = values[0];
    if values[2] > tolerance * lmax || values[4] < -tolerance * lmax.max(1.0) {
        let offending = if values[2] > tolerance * lmax {
            values[2]
        } else {
            values[4]
        };
        return Err(Error::Rank {
            rank: 2,
            eigenvalue: offending,
            lambda_max: lmax,
        });
    }
    let mut p = Matrix2x5::zeros();
    for row in 0..2 {
        let s = values[row].max(0.0).sqrt();
        for j in 0..5 {
            p[(row, j)] = s * vectors[row][j];
        }
    }
    Ok(p)
}

/// Reconstructed problem instance with the iterate pair it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleInstance {
    pub gamma: f64,
    pub dimension: usize,
    pub z_star: Vec<f64>,
    pub state_k: AdmmState,
    pub designated_next: AdmmState,
    pub f: PiecewiseConvexFn,
    pub g: PiecewiseConvexFn,
}

impl CounterexampleInstance {
    pub fn ctx(&self) -> GammaContext {
        GammaContext::new(self.gamma).expect("instance gamma validated on construction")
    }

    /// Pairs that must lie in `∂f`.
    pub fn s1(&self) -> Vec<MonotonePoint> {
        s1(&self.state_k, &self.designated_next, &self.z_star)
    }

    /// Pairs that must lie in `∂g`.
    pub fn s2(&self) -> Vec<MonotonePoint> {
        s2(
            &self.state_k,
            &self.designated_next,
            &self.z_star,
            self.gamma,
        )
    }

    pub fn r_k(&self) -> f64 {
        measure_r(&self.state_k, &self.z_star, &self.ctx())
    }

    pub fn r_next(&self) -> f64 {
        measure_r(&self.designated_next, &self.z_star, &self.ctx())
    }

    /// JSON export payload.
    pub fn export(&self) -> CounterexampleExport {
        CounterexampleExport {
            gamma: self.gamma,
            z_star: self.z_star.clone(),
            state_k: self.state_k.clone(),
            next: self.designated_next.clone(),
            f: self.f.clone(),
            g: self.g.clone(),
            r_k: self.r_k(),
            r_next: self.r_next(),
        }
    }
}

/// Serialized form of a [`CounterexampleInstance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleExport {
    pub gamma: f64,
    pub z_star: Vec<f64>,
    pub state_k: AdmmState,
    pub next: AdmmState,
    pub f: PiecewiseConvexFn,
    pub g: PiecewiseConvexFn,
    #[serde(rename = "R_k")]
    pub r_k: f64,
    #[serde(rename = "R_next")]
    pub r_next: f64,
}

fn s1(k: &AdmmState, next: &AdmmState, z_star: &[f64]) -> Vec<MonotonePoint> {
    let dim = k.dimension();
    vec![
        MonotonePoint::new(vec![0.0; dim], z_star.to_vec()),
        MonotonePoint::new(next.x.clone(), sub(&sub(&k.z, &next.x), &k.y)),
    ]
}

fn s2(k: &AdmmState, next: &AdmmState, z_star: &[f64], gamma: f64) -> Vec<MonotonePoint> {
    let dim = k.dimension();
    vec![
        MonotonePoint::new(vec![0.0; dim], z_star.to_vec()),
        MonotonePoint::new(
            k.y.clone(),
            add(&k.z, &scale(&add(&k.x, &k.y), gamma - 1.0)),
        ),
        MonotonePoint::new(next.y.clone(), sub(&sub(&k.z, &next.x), &next.y)),
    ]
}

/// Builds an instance from a Gram factor whose columns are
/// `x_k, y_k, x_{k+1}, y_{k+1}, z_k` (with `z* = 0`).
pub fn instance_from_factor(
    ctx: &GammaContext,
    factor: &DMatrix<f64>,
) -> Result<CounterexampleInstance> {
    if factor.ncols() != 5 {
        return Err(Error::DimensionMismatch {
            expected: 5,
            found: factor.ncols(),
        });
    }
    let dim = factor.nrows();
    let col = |j: usize| -> Vec<f64> { factor.column(j).iter().copied().collect() };
    let gamma = ctx.gamma();
    let z_star = vec![0.0; dim];
    let state_k = AdmmState {
        x: col(0),
        y: col(1),
        z: col(4),
    };
    let x_next = col(2);
    let y_next = col(3);
    let z_next = sub(&state_k.z, &scale(&add(&x_next, &y_next), gamma));
    let designated_next = AdmmState {
        x: x_next,
        y: y_next,
        z: z_next,
    };
    let f = interpolant(&s1(&state_k, &designated_next, &z_star))?;
    let g = interpolant(&s2(&state_k, &designated_next, &z_star, gamma))?;
    Ok(CounterexampleInstance {
        gamma,
        dimension: dim,
        z_star,
        state_k,
        designated_next,
        f,
        g,
    })
}

/// Two-dimensional instance from the analytic factor `√α·P̄`.
///
/// Only defined above the golden ratio, where the certificate is claimed.
pub fn build_instance(ctx: &GammaContext) -> Result<CounterexampleInstance> {
    if !ctx.above_golden_ratio() {
        return Err(Error::OutsideClaimedRegion {
            gamma: ctx.gamma(),
            threshold: GOLDEN_RATIO,
        });
    }
    let cert = build_certificate(ctx)?;
    let p = cert.factor();
    let factor = DMatrix::from_fn(2, 5, |i, j| p[(i, j)]);
    instance_from_factor(ctx, &factor)
}

/// `argmin_x h(x) + ½‖x − v‖²` for a max-affine `h`.
///
/// Enumerates active sets in order of increasing size. For a candidate set
/// `T` the minimizer is `x = v − Σ λ_k a_k` with the pieces in `T` tight at a
/// common value `t` and `λ` on the simplex; the first candidate with
/// nonnegative multipliers and no piece above `t` is returned.
pub fn prox_step(h: &PiecewiseConvexFn, v: &[f64]) -> Result<Vec<f64>> {
    let n = h.pieces.len();
    if n > MAX_PROX_PIECES {
        return Err(Error::Size {
            count: n,
            max: MAX_PROX_PIECES,
        });
    }
    if v.len() != h.domain_dimension {
        return Err(Error::DimensionMismatch {
            expected: h.domain_dimension,
            found: v.len(),
        });
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let values_at_v: Vec<f64> = h.pieces.iter().map(|p| p.eval(v)).collect();
    let scale = 1.0
        + values_at_v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
        + h.pieces
            .iter()
            .map(|p| dot(&p.slope, &p.slope))
            .fold(0.0f64, f64::max);
    let tol = 1e-10 * scale;

    let mut subsets: Vec<u32> = (1u32..(1 << n)).collect();
    subsets.sort_by_key(|m| (m.count_ones(), *m));
    for mask in subsets {
        let active: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let m = active.len();
        let mut kkt = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &i) in active.iter().enumerate() {
            for (c, &j) in active.iter().enumerate() {
                kkt[(r, c)] = dot(&h.pieces[i].slope, &h.pieces[j].slope);
            }
            kkt[(r, m)] = 1.0;
            kkt[(m, r)] = 1.0;
            rhs[r] = values_at_v[i];
        }
        rhs[m] = 1.0;
        let Some(sol) = kkt.clone().lu().solve(&rhs) else {
            continue;
        };
        if !sol.iter().all(|x| x.is_finite()) || (&kkt * &sol - &rhs).amax() > tol {
            continue;
        }
        if sol.rows(0, m).iter().any(|&l| l < -tol) {
            continue;
        }
        let mut x = v.to_vec();
        for (r, &i) in active.iter().enumerate() {
            for (xk, ak) in x.iter_mut().zip(&h.pieces[i].slope) {
                *xk -= sol[r] * ak;
            }
        }
        let t = h.pieces[active[0]].eval(&x);
        if h.pieces.iter().all(|p| p.eval(&x) <= t + tol) {
            return Ok(x);
        }
    }
    Err(Error::Enumeration)
}

/// One iteration from `instance.state_k`.
pub fn admm_step(instance: &CounterexampleInstance) -> Result<AdmmState> {
    ScalarSplitting::normalized(instance.f.clone(), instance.g.clone(), instance.dimension)
        .step(&instance.state_k, instance.gamma)
}

/// `min f(x) + g(y)` s.t. `a·x + b·y = rhs` with scalar coupling `A = aI`,
/// `B = bI`, solved by ADMM with penalty `penalty`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSplitting {
    pub f: PiecewiseConvexFn,
    pub g: PiecewiseConvexFn,
    pub a: f64,
    pub b: f64,
    pub rhs: Vec<f64>,
    pub penalty: f64,
}

impl ScalarSplitting {
    /// `a = b = 1`, `rhs = 0`, unit penalty.
    pub fn normalized(f: PiecewiseConvexFn, g: PiecewiseConvexFn, dim: usize) -> Self {
        Self {
            f,
            g,
            a: 1.0,
            b: 1.0,
            rhs: vec![0.0; dim],
            penalty: 1.0,
        }
    }

    fn residual(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        sub(&add(&scale(x, self.a), &scale(y, self.b)), &self.rhs)
    }

    /// One iteration with dual step length `gamma`.
    pub fn step(&self, state: &AdmmState, gamma: f64) -> Result<AdmmState> {
        let beta = self.penalty;
        // argmin_x f(x) + (β a²/2)‖x − (rhs − b·y + z/β)/a‖²
        let zb = scale(&state.z, 1.0 / beta);
        let vx = scale(
            &add(&sub(&self.rhs, &scale(&state.y, self.b)), &zb),
            1.0 / self.a,
        );
        let x = prox_step(&self.f.scaled(1.0 / (beta * self.a * self.a)), &vx)?;
        let vy = scale(&add(&sub(&self.rhs, &scale(&x, self.a)), &zb), 1.0 / self.b);
        let y = prox_step(&self.g.scaled(1.0 / (beta * self.b * self.b)), &vy)?;
        let z = sub(&state.z, &scale(&self.residual(&x, &y), gamma * beta));
        Ok(AdmmState { x, y, z })
    }

    /// `‖z − z*‖² + γβ²‖B(y − y*)‖² + (γ−1)β²‖Ax + By − rhs‖²`
    pub fn measure(&self, state: &AdmmState, y_star: &[f64], z_star: &[f64], gamma: f64) -> f64 {
        let b2 = self.penalty * self.penalty;
        norm2(&sub(&state.z, z_star))
            + gamma * b2 * norm2(&scale(&sub(&state.y, y_star), self.b))
            + (gamma - 1.0) * b2 * norm2(&self.residual(&state.x, &state.y))
    }
}
