//! Parametric matrices of the lifted one-step problem.
//!
//! Every quantity in the one-iteration analysis is an inner product between
//! five vectors. Stacking them as the columns of a factor
//! `P = [A x_k, B y_k, A x_{k+1}, B y_{k+1}, z_k - z*]` turns each quadratic
//! constraint into a linear functional of the Gram matrix `X = PᵀP`. The
//! column order is shared by every module in this crate, see [`GramColumn`].

use nalgebra::{Matrix5, SymmetricEigen, Vector5};

use crate::error::{Error, Result};

/// The golden ratio `(√5 + 1) / 2`.
pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// Column labels of the Gram factor, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramColumn {
    /// `A x_k`
    AxCurrent = 0,
    /// `B y_k`
    ByCurrent = 1,
    /// `A x_{k+1}`
    AxNext = 2,
    /// `B y_{k+1}`
    ByNext = 3,
    /// `z_k - z*`
    DualError = 4,
}

/// Dual step length together with the scalars derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaContext {
    gamma: f64,
    sqrt_term: f64,
}

impl GammaContext {
    /// Rejects `gamma <= 1` and non-finite values.
    pub fn new(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma <= 1.0 {
            return Err(Error::InvalidGamma { gamma });
        }
        // (γ-1)(γ+1) loses less precision than γ²-1 close to 1.
        let sqrt_term = ((gamma - 1.0) * (gamma + 1.0)).sqrt();
        Ok(Self { gamma, sqrt_term })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `√(γ² − 1)`
    pub fn sqrt_term(&self) -> f64 {
        self.sqrt_term
    }

    pub fn phi(&self) -> f64 {
        GOLDEN_RATIO
    }

    /// True when `γ` lies strictly above the golden ratio.
    pub fn above_golden_ratio(&self) -> bool {
        self.gamma > GOLDEN_RATIO
    }
}

/// Dense symmetric 5×5 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat5(Matrix5<f64>);

impl SymMat5 {
    /// Wraps `m`, replacing it with `(m + mᵀ) / 2`.
    pub fn new(m: Matrix5<f64>) -> Self {
        Self((m + m.transpose()) * 0.5)
    }

    pub fn zeros() -> Self {
        Self(Matrix5::zeros())
    }

    pub fn identity() -> Self {
        Self(Matrix5::identity())
    }

    pub fn from_diagonal(d: [f64; 5]) -> Self {
        Self(Matrix5::from_diagonal(&Vector5::from(d)))
    }

    pub fn from_rows(rows: [[f64; 5]; 5]) -> Self {
        Self::new(Matrix5::from_fn(|i, j| rows[i][j]))
    }

    /// Entry `(i, j)` with zero-based indices.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix5<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix5<f64> {
        self.0
    }

    /// Trace inner product `tr(AᵀB)`, computed as the elementwise sum of products.
    pub fn inner(&self, other: &SymMat5) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0 * factor)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 5] {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2], ev[3], ev[4]]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

impl std::ops::Add for SymMat5 {
    type Output = SymMat5;
    fn add(self, rhs: SymMat5) -> SymMat5 {
        SymMat5(self.0 + rhs.0)
    }
}

impl std::ops::Sub for SymMat5 {
    type Output = SymMat5;
    fn sub(self, rhs: SymMat5) -> SymMat5 {
        SymMat5(self.0 - rhs.0)
    }
}

impl std::ops::Mul<f64> for SymMat5 {
    type Output = SymMat5;
    fn mul(self, rhs: f64) -> SymMat5 {
        self.scale(rhs)
    }
}

/// Zero-based unit vector.
pub fn unit(i: usize) -> Vector5<f64> {
    let mut v = Vector5::zeros();
    v[i] = 1.0;
    v
}

/// Symmetric outer product `(u vᵀ + v uᵀ) / 2`.
pub fn sym_outer(u: &Vector5<f64>, v: &Vector5<f64>) -> SymMat5 {
    let uv = u * v.transpose();
    SymMat5(uv + uv.transpose()) * 0.5
}

/// `max ⟨C, X⟩` subject to `⟨A_i, X⟩ ≥ 0`, `⟨A_eq, X⟩ = rhs`, `X ⪰ 0`.
///
/// [`build_problem`] always yields six inequalities; other counts are
/// accepted for small test problems.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub objective: SymMat5,
    pub inequalities: Vec<SymMat5>,
    pub equality: SymMat5,
    pub equality_rhs: f64,
}

impl SdpProblem {
    pub fn new(
        objective: SymMat5,
        inequalities: Vec<SymMat5>,
        equality: SymMat5,
        equality_rhs: f64,
    ) -> Self {
        Self {
            objective,
            inequalities,
            equality,
            equality_rhs,
        }
    }

    /// Assembles the matrices for an arbitrary real `gamma` without validation.
    ///
    /// The formulas are polynomial in `gamma`, so boundary values such as
    /// `gamma = 1` are well defined here even though [`GammaContext`] rejects them.
    pub fn assemble(gamma: f64) -> Self {
        let e = |i: usize| unit(i - 1);
        let g1 = gamma - 1.0;
        let e12 = e(1) + e(2);
        let e34 = e(3) + e(4);

        let a1 = sym_outer(&e(3), &(e(5) - e(3) - e(2)));
        let a2 = sym_outer(&e(2), &(e(5) + e12 * g1));
        let a3 = sym_outer(&e(4), &(e(5) - e(3) - e(4)));
        let a4 = sym_outer(&(e(2) - e(4)), &(e34 + e12 * g1));
        let a5 = sym_outer(&e(4), &(-e34 - e12 * g1)) + sym_outer(&e(2), &(e(5) + e12 * g1));
        let a6 = sym_outer(&e(2), &(e34 + e12 * g1)) + sym_outer(&e(4), &(e(5) - e(3) - e(4)));

        let a7 =
            sym_outer(&e(5), &e(5)) + sym_outer(&e(2), &e(2)) * gamma + sym_outer(&e12, &e12) * g1;

        let w = e(5) - e34 * gamma;
        let c = sym_outer(&w, &w) + sym_outer(&e(4), &e(4)) * gamma + sym_outer(&e34, &e34) * g1;

        Self::new(c, vec![a1, a2, a3, a4, a5, a6], a7, 1.0)
    }

    /// Evaluates `(⟨A_i, X⟩ for each inequality, ⟨A_eq, X⟩, ⟨C, X⟩)`.
    pub fn constraint_values(&self, x: &SymMat5) -> ConstraintValues {
        ConstraintValues {
            inequalities: self.inequalities.iter().map(|a| a.inner(x)).collect(),
            equality: self.equality.inner(x),
            objective: self.objective.inner(x),
        }
    }
}

/// Output of [`SdpProblem::constraint_values`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintValues {
    pub inequalities: Vec<f64>,
    pub equality: f64,
    pub objective: f64,
}

/// Builds the one-step problem for a validated step length.
pub fn build_problem(ctx: &GammaContext) -> SdpProblem {
    SdpProblem::assemble(ctx.gamma())
}

/// Free-function form of [`SdpProblem::constraint_values`].
pub fn constraint_values(problem: &SdpProblem, x: &SymMat5) -> ConstraintValues {
    problem.constraint_values(x)
}
