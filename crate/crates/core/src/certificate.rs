//! Analytic rank-two feasible point `X_f = α·P̄ᵀP̄` and its objective value.
//!
//! Above the golden ratio the numerical optimum has rank two and all six
//! inequalities active. The closed-form factor below reproduces it exactly, so
//! its objective is a certified lower bound on the worst-case growth of the
//! measure. Everything here is a pure function of `γ`.

use nalgebra::{Matrix2x5, Matrix5};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{build_problem, GammaContext, SymMat5};

/// Vanishing threshold for denominators.
const DENOMINATOR_EPS: f64 = 1e-13;
/// Radicands in `[-RADICAND_EPS, 0)` are treated as rounding and clamped to zero.
const RADICAND_EPS: f64 = 1e-13;

/// Rank-two certificate at a fixed `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTwoCertificate {
    pub gamma: f64,
    pub alpha: f64,
    /// Two rows, columns in [`GramColumn`](crate::model::GramColumn) order.
    pub pbar: Matrix2x5<f64>,
    pub xf: SymMat5,
    /// `⟨C, X_f⟩` via the trace inner product.
    pub objective_value: f64,
}

impl RankTwoCertificate {
    /// Gram factor `√α·P̄`, whose columns are the five lifted vectors.
    pub fn factor(&self) -> Matrix2x5<f64> {
        self.pbar * self.alpha.sqrt()
    }
}

fn nonzero(gamma: f64, what: &'static str, value: f64) -> Result<f64> {
    if value.abs() < DENOMINATOR_EPS || !value.is_finite() {
        Err(Error::Domain { gamma, what, value })
    } else {
        Ok(value)
    }
}

/// Builds `α`, `P̄` and `X_f` from their entrywise closed forms.
pub fn build_certificate(ctx: &GammaContext) -> Result<RankTwoCertificate> {
    let g = ctx.gamma();
    let r = ctx.sqrt_term();

    let radicand = 1.0 + g - g * g + (g - 1.0) * r;
    if radicand < -RADICAND_EPS || !radicand.is_finite() {
        return Err(Error::Domain {
            gamma: g,
            what: "1 + γ - γ² + (γ-1)√(γ²-1)",
            value: radicand,
        });
    }
    let q = radicand.max(0.0).sqrt();

    // Shared factor -1 - 3γ + 2γ² + (3 - 2γ)√(γ²-1).
    let t = -1.0 - 3.0 * g + 2.0 * g * g + (3.0 - 2.0 * g) * r;

    let alpha_den = nonzero(
        g,
        "denominator of alpha",
        -8.0 - g + 6.0 * g * g - g * g * g + (-6.0 + 3.0 * g + g * g) * r,
    )?;
    let alpha = (g * g - 2.0) / alpha_den;

    let p11_den = nonzero(g, "denominator of P(1,1)", -2.0 - g * t)?;
    let p13_den = nonzero(g, "denominator of P(1,3)", (1.0 + g) * q)?;
    let p15_den = nonzero(g, "denominator of P(1,5)", g * (2.0 + g * t))?;

    let mut pbar = Matrix2x5::zeros();
    pbar[(0, 0)] = t * q / p11_den;
    pbar[(0, 1)] = q / g;
    pbar[(0, 2)] = -r / p13_den;
    pbar[(0, 3)] = (1.0 - g * g - g * r) * q / (g + g * g);
    pbar[(0, 4)] = -2.0 * (g - 1.0) * q / p15_den;
    pbar[(1, 2)] = (1.0 + g + r) / (1.0 + g);
    pbar[(1, 4)] = 1.0;

    let gram: Matrix5<f64> = pbar.transpose() * pbar * alpha;
    let xf = SymMat5::new(gram);
    let objective_value = build_problem(ctx).objective.inner(&xf);
    Ok(RankTwoCertificate {
        gamma: g,
        alpha,
        pbar,
        xf,
        objective_value,
    })
}

/// Two algebraically equivalent closed forms of `⟨C, X_f⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    /// `[3 + 2/(γ−1) − 2γ² + 2(γ²−γ−1)√(γ²−1)/(γ−1)]⁻¹`
    Expanded,
    /// `[2(1+γ−γ²)/((γ−1)(γ+√(γ²−1))) + 1]⁻¹`
    Compact,
}

pub fn closed_form_objective(ctx: &GammaContext, variant: ClosedForm) -> Result<f64> {
    let g = ctx.gamma();
    let r = ctx.sqrt_term();
    let gm1 = nonzero(g, "γ - 1", g - 1.0)?;
    let bracket = match variant {
        ClosedForm::Expanded => 3.0 + 2.0 / gm1 - 2.0 * g * g + 2.0 * (-1.0 - g + g * g) * r / gm1,
        ClosedForm::Compact => 2.0 * (1.0 + g - g * g) / (gm1 * (g + r)) + 1.0,
    };
    Ok(1.0 / nonzero(g, "closed-form bracket", bracket)?)
}

/// Numerical replacement for a symbolic feasibility check of `X_f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub gamma: f64,
    pub alpha: f64,
    pub inequality_values: Vec<f64>,
    /// `⟨A_eq, X_f⟩ − 1`
    pub equality_residual: f64,
    /// Ascending.
    pub eigenvalues: [f64; 5],
    /// Eigenvalues above `1e-8·λmax`.
    pub rank: usize,
    pub objective_trace: f64,
    pub objective_expanded: f64,
    pub objective_compact: f64,
    /// Largest pairwise difference of the three objective evaluations.
    pub max_discrepancy: f64,
    /// `γ > φ`; feasibility and growth are only claimed there.
    pub within_claimed_region: bool,
}

/// Thresholds used by [`FeasibilityReport::passes`].
pub const INEQUALITY_TOL: f64 = 1e-10;
pub const EQUALITY_TOL: f64 = 1e-10;
pub const DISCREPANCY_TOL: f64 = 1e-10;
pub const RANK_RELATIVE_TOL: f64 = 1e-8;

impl FeasibilityReport {
    pub fn inequalities_hold(&self) -> bool {
        self.inequality_values.iter().all(|&v| v >= -INEQUALITY_TOL)
    }

    /// All residual checks pass and the objective exceeds 1 inside the claimed region.
    pub fn passes(&self) -> bool {
        let residuals_ok = self.inequalities_hold()
            && self.equality_residual.abs() <= EQUALITY_TOL
            && self.rank == 2
            && self.alpha > 0.0
            && self.max_discrepancy <= DISCREPANCY_TOL * (1.0 + self.objective_compact.abs());
        residuals_ok && (!self.within_claimed_region || self.objective_trace > 1.0)
    }
}

pub fn feasibility_report(ctx: &GammaContext) -> Result<FeasibilityReport> {
    let cert = build_certificate(ctx)?;
    let problem = build_problem(ctx);
    let vals = problem.constraint_values(&cert.xf);
    let eigenvalues = cert.xf.eigenvalues();
    let lmax = eigenvalues[4].abs();
    let rank = eigenvalues
        .iter()
        .filter(|&&e| e > RANK_RELATIVE_TOL * lmax)
        .count();

    let objective_trace = vals.objective;
    let objective_expanded = closed_form_objective(ctx, ClosedForm::Expanded)?;
    let objective_compact = closed_form_objective(ctx, ClosedForm::Compact)?;
    let max_discrepancy = (objective_trace - objective_expanded)
        .abs()
        .max((objective_trace - objective_compact).abs())
        .max((objective_expanded - objective_compact).abs());

    Ok(FeasibilityReport {
        gamma: ctx.gamma(),
        alpha: cert.alpha,
        inequality_values: vals.inequalities,
        equality_residual: vals.equality - problem.equality_rhs,
        eigenvalues,
        rank,
        objective_trace,
        objective_expanded,
        objective_compact,
        max_discrepancy,
        within_claimed_region: ctx.above_golden_ratio(),
    })
}
