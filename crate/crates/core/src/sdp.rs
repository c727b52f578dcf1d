//! Primal-dual interior-point solver for the lifted problem.
//!
//! The problem `max ⟨C,X⟩ s.t. ⟨A_i,X⟩ ≥ 0, ⟨A_eq,X⟩ = 1, X ⪰ 0` is rewritten
//! over the product cone `S⁵₊ × R^k₊` with explicit slacks `s_i = ⟨A_i,X⟩`:
//!
//! ```text
//! min ⟨-C, X⟩   s.t.  ⟨A_i, X⟩ - s_i = 0   (i < k)
//!                     ⟨A_eq, X⟩      = 1
//!                     (X, s) ∈ S⁵₊ × R^k₊
//! ```
//!
//! Each iteration takes a Mehrotra predictor-corrector step along the
//! Nesterov–Todd direction. The scaling is computed as `R = L U Λ^{-1/4}` where
//! `L = X^{1/2}` and `L Z L = U Λ Uᵀ`; in the scaled space both iterates equal
//! the diagonal matrix `Λ^{1/2}`, so the complementarity equation decouples
//! entrywise.
//!
//! Dual sign convention used in [`SdpSolution`]: multipliers `λ_i ≥ 0` for the
//! inequalities, a free multiplier `y` for the equality, and
//!
//! ```text
//! Z = y·A_eq − Σ λ_i A_i − C ⪰ 0,     dual objective = y·rhs.
//! ```

use nalgebra::{DMatrix, DVector, Matrix5, SymmetricEigen, Vector5};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{SdpProblem, SymMat5};

const STEP_TO_BOUNDARY: f64 = 0.98;
const OBJECTIVE_BLOWUP: f64 = 1e6;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktResiduals {
    /// Max of equality violation, negative slack magnitude and negative eigenvalue of X.
    pub primal_infeas: f64,
    /// Frobenius norm of `y·A_eq − Σ λ_i A_i − C − Z`, or a larger cone violation of `λ` or `Z`.
    pub dual_infeas: f64,
    /// `|⟨C,X⟩ − y·rhs| / (1 + |⟨C,X⟩|)`
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal_infeas.max(self.dual_infeas).max(self.gap)
    }
}

/// One row of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: KktResiduals,
    pub mu: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: SymMat5,
    /// `⟨A_i, X⟩` recomputed from `x`.
    pub slack: Vec<f64>,
    pub dual_ineq: Vec<f64>,
    pub dual_eq: f64,
    pub dual_slack_matrix: SymMat5,
    pub objective: f64,
    pub status: SolveStatus,
    pub residuals: KktResiduals,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub diagnostic: Option<String>,
}

impl SdpSolution {
    pub fn dual_objective(&self, problem: &SdpProblem) -> f64 {
        self.dual_eq * problem.equality_rhs
    }
}

/// Recomputes the KKT residuals of `solution` from scratch.
pub fn kkt_report(problem: &SdpProblem, solution: &SdpSolution) -> KktResiduals {
    residuals(
        problem,
        &solution.x,
        &solution.dual_ineq,
        solution.dual_eq,
        &solution.dual_slack_matrix,
    )
}

fn residuals(
    problem: &SdpProblem,
    x: &SymMat5,
    lambda: &[f64],
    y: f64,
    z: &SymMat5,
) -> KktResiduals {
    let vals = problem.constraint_values(x);
    let mut primal = (vals.equality - problem.equality_rhs).abs();
    for &v in &vals.inequalities {
        primal = primal.max(-v);
    }
    primal = primal.max(-x.min_eigenvalue());

    let mut stationarity = problem.equality * y - problem.objective - *z;
    for (a, &l) in problem.inequalities.iter().zip(lambda) {
        stationarity = stationarity - *a * l;
    }
    let mut dual = stationarity.frobenius_norm();
    for &l in lambda {
        dual = dual.max(-l);
    }
    dual = dual.max(-z.min_eigenvalue());

    let dual_obj = y * problem.equality_rhs;
    let gap = (vals.objective - dual_obj).abs() / (1.0 + vals.objective.abs());
    KktResiduals {
        primal_infeas: primal.max(0.0),
        dual_infeas: dual,
        gap,
    }
}

/// Solves `problem` to the given tolerance on all three KKT residuals.
pub fn solve(problem: &SdpProblem, tolerance: f64, max_iterations: usize) -> Result<SdpSolution> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    Ok(Solver::new(problem).run(tolerance, max_iterations))
}

/// Iterate of the standard-form problem. `y` holds the inequality
/// multipliers followed by the (negated) equality multiplier.
#[derive(Clone)]
struct Iterate {
    x: Matrix5<f64>,
    s: DVector<f64>,
    y: DVector<f64>,
    z: Matrix5<f64>,
    w: DVector<f64>,
}

/// Search direction, with the conic blocks also kept in the scaled space.
struct Direction {
    dx: Matrix5<f64>,
    ds: DVector<f64>,
    dy: DVector<f64>,
    dz: Matrix5<f64>,
    dw: DVector<f64>,
    dx_scaled: Matrix5<f64>,
    dz_scaled: Matrix5<f64>,
    ds_scaled: DVector<f64>,
    dw_scaled: DVector<f64>,
}

/// NT scaling data for one iterate.
///
/// `R` satisfies `R⁻¹ X R⁻ᵀ = Rᵀ Z R = diag(v)`; the orthant block uses
/// `d = √(s/w)` and `v_orth = √(s·w)`.
struct Scaling {
    r: Matrix5<f64>,
    v: Vector5<f64>,
    d: DVector<f64>,
    v_orth: DVector<f64>,
}

struct Residual {
    rp: DVector<f64>,
    rd: Matrix5<f64>,
    rd_s: DVector<f64>,
}

/// Scaled constraint operator `B` (one column per constraint, rows are the
/// svec of `Rᵀ A_j R` followed by the orthant block), factored as `B = Q T`.
///
/// The Newton system reduces to `BᵀB dy = rhs`. Solving it through the QR
/// factors and forming the primal step as `base + Q T⁻ᵀ rhs` keeps the primal
/// block accurate even when `BᵀB` is badly conditioned near a rank-deficient
/// optimum.
struct NewtonSystem {
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    t: DMatrix<f64>,
}

impl NewtonSystem {
    fn new(b: DMatrix<f64>) -> Option<Self> {
        let qr = b.clone().qr();
        let t = qr.r();
        let q = qr.q();
        let scale = t.diagonal().amax();
        if scale.is_nan() || scale <= 0.0 || t.diagonal().iter().any(|d| d.abs() <= scale * 1e-15) {
            return None;
        }
        Some(Self { b, q, t })
    }

    /// Returns `(dy, B dy)` for `BᵀB dy = rhs`, with `B dy` computed as `Q T⁻ᵀ rhs`.
    fn solve(&self, rhs: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let u = self.t.transpose().solve_lower_triangular(rhs)?;
        let dy = self.t.solve_upper_triangular(&u)?;
        Some((dy, &self.q * u))
    }
}

struct Solver<'a> {
    problem: &'a SdpProblem,
    /// Constraint matrices, inequalities first, then the equality.
    rows: Vec<Matrix5<f64>>,
    b: DVector<f64>,
    c: Matrix5<f64>,
    k: usize,
}

impl<'a> Solver<'a> {
    fn new(problem: &'a SdpProblem) -> Self {
        let k = problem.inequalities.len();
        let mut rows: Vec<Matrix5<f64>> = problem
            .inequalities
            .iter()
            .map(|a| *a.as_matrix())
            .collect();
        rows.push(*problem.equality.as_matrix());
        let mut b = DVector::zeros(k + 1);
        b[k] = problem.equality_rhs;
        Self {
            problem,
            rows,
            b,
            c: -*problem.objective.as_matrix(),
            k,
        }
    }

    fn nu(&self) -> f64 {
        (5 + self.k) as f64
    }

    fn initial(&self) -> Iterate {
        let trace_eq = self.problem.equality.as_matrix().trace();
        let scale = if trace_eq > 0.0 { 1.0 / trace_eq } else { 1.0 };
        let x = Matrix5::identity() * scale;
        let s = DVector::from_iterator(
            self.k,
            self.rows[..self.k].iter().map(|a| inner(a, &x).max(1.0)),
        );
        Iterate {
            x,
            s,
            y: DVector::zeros(self.k + 1),
            z: Matrix5::identity(),
            w: DVector::from_element(self.k, 1.0),
        }
    }

    fn residual(&self, it: &Iterate) -> Residual {
        let mut rp = self.b.clone();
        for (j, a) in self.rows.iter().enumerate() {
            rp[j] -= inner(a, &it.x);
            if j < self.k {
                rp[j] += it.s[j];
            }
        }
        let mut rd = self.c - it.z;
        for (j, a) in self.rows.iter().enumerate() {
            rd -= a * it.y[j];
        }
        let rd_s = DVector::from_iterator(self.k, (0..self.k).map(|j| it.y[j] - it.w[j]));
        Residual { rp, rd, rd_s }
    }

    fn mu(&self, it: &Iterate) -> f64 {
        (inner(&it.x, &it.z) + it.s.dot(&it.w)) / self.nu()
    }

    fn solution_view(&self, it: &Iterate) -> (SymMat5, Vec<f64>, f64, SymMat5) {
        (
            SymMat5::new(it.x),
            it.w.iter().copied().collect(),
            -it.y[self.k],
            SymMat5::new(it.z),
        )
    }

    fn scaling(&self, it: &Iterate) -> Option<Scaling> {
        let l = sym_sqrt(&it.x)?;
        let m = symmetrize(&(l * it.z * l));
        let eig = SymmetricEigen::new(m);
        if eig.eigenvalues.iter().any(|&e| e.is_nan() || e <= 0.0) {
            return None;
        }
        let quarter = eig.eigenvalues.map(|e| e.powf(-0.25));
        let r = l * eig.eigenvectors * Matrix5::from_diagonal(&quarter);
        let v = eig.eigenvalues.map(f64::sqrt);

        let d = it.s.zip_map(&it.w, |s, w| (s / w).sqrt());
        let v_orth = it.s.zip_map(&it.w, |s, w| (s * w).sqrt());
        if d.iter()
            .chain(v_orth.iter())
            .any(|x| !x.is_finite() || *x <= 0.0)
        {
            return None;
        }
        Some(Scaling { r, v, d, v_orth })
    }

    fn newton_system(&self, sc: &Scaling) -> Option<NewtonSystem> {
        let n = self.rows.len();
        let mut b = DMatrix::zeros(SVEC_LEN + self.k, n);
        for (j, a) in self.rows.iter().enumerate() {
            let scaled = sc.r.transpose() * a * sc.r;
            for (i, v) in svec(&scaled).iter().enumerate() {
                b[(i, j)] = *v;
            }
            if j < self.k {
                b[(SVEC_LEN + j, j)] = -sc.d[j];
            }
        }
        NewtonSystem::new(b)
    }

    /// Solves the Newton system for the scaled complementarity right-hand side
    /// `(rc_psd, rc_orth)`.
    fn direction(
        &self,
        sc: &Scaling,
        sys: &NewtonSystem,
        res: &Residual,
        rc_psd: &Matrix5<f64>,
        rc_orth: &DVector<f64>,
    ) -> Option<Direction> {
        // dX̃ + dZ̃ = H̃ with diag(v)∘H̃ = rc in the Jordan sense.
        let h = Matrix5::from_fn(|i, j| 2.0 * rc_psd[(i, j)] / (sc.v[i] + sc.v[j]));
        let h_orth = rc_orth.component_div(&sc.v_orth);
        let rd_scaled = sc.r.transpose() * res.rd * sc.r;

        let mut base = DVector::zeros(SVEC_LEN + self.k);
        for (i, v) in svec(&symmetrize(&(h - rd_scaled))).iter().enumerate() {
            base[i] = *v;
        }
        for j in 0..self.k {
            base[SVEC_LEN + j] = h_orth[j] - sc.d[j] * res.rd_s[j];
        }
        let rhs = &res.rp - sys.b.transpose() * &base;
        let (dy, b_dy) = sys.solve(&rhs)?;
        let u = base + b_dy;

        let dx_scaled = smat(u.rows(0, SVEC_LEN).as_slice());
        let ds_scaled = u.rows(SVEC_LEN, self.k).into_owned();
        let dz_scaled = h - dx_scaled;
        let dw_scaled = &h_orth - &ds_scaled;

        let dx = symmetrize(&(sc.r * dx_scaled * sc.r.transpose()));
        let mut dz = res.rd;
        for (j, a) in self.rows.iter().enumerate() {
            dz -= a * dy[j];
        }
        let dz = symmetrize(&dz);
        let ds = ds_scaled.component_mul(&sc.d);
        let dw = DVector::from_iterator(self.k, (0..self.k).map(|j| res.rd_s[j] + dy[j]));

        let ok = dx
            .iter()
            .chain(dz.iter())
            .chain(dy.iter())
            .all(|x| x.is_finite());
        ok.then_some(Direction {
            dx,
            ds,
            dy,
            dz,
            dw,
            dx_scaled,
            dz_scaled,
            ds_scaled,
            dw_scaled,
        })
    }

    /// Largest steps keeping the primal and dual iterates in the cone,
    /// measured in the scaled space where both iterates equal `diag(v)`.
    fn max_steps(&self, sc: &Scaling, dir: &Direction) -> (f64, f64) {
        let inv_half = sc.v.map(|v| 1.0 / v.sqrt());
        let ap = psd_step(&dir.dx_scaled, &inv_half).min(orthant_step(&sc.v_orth, &dir.ds_scaled));
        let ad = psd_step(&dir.dz_scaled, &inv_half).min(orthant_step(&sc.v_orth, &dir.dw_scaled));
        (ap, ad)
    }

    fn run(&self, tolerance: f64, max_iterations: usize) -> SdpSolution {
        let mut it = self.initial();
        let mut history = Vec::new();
        let mut status = SolveStatus::MaxIterations;
        let mut diagnostic = None;
        let mut iterations = 0;
        let mut last_steps = (0.0, 0.0);

        loop {
            let (x, lambda, y, z) = self.solution_view(&it);
            let kkt = residuals(self.problem, &x, &lambda, y, &z);
            let primal_objective = self.problem.objective.inner(&x);
            let mu = self.mu(&it);
            history.push(IterationRecord {
                primal_objective,
                dual_objective: y * self.problem.equality_rhs,
                residuals: kkt,
                mu,
                step_primal: last_steps.0,
                step_dual: last_steps.1,
            });

            if kkt.max() < tolerance {
                status = SolveStatus::Optimal;
                break;
            }
            if primal_objective.abs() > OBJECTIVE_BLOWUP || !primal_objective.is_finite() {
                status = SolveStatus::NumericalFailure;
                diagnostic = Some(format!(
                    "primal objective {primal_objective:e} exceeded {OBJECTIVE_BLOWUP:e}; problem may be unbounded"
                ));
                break;
            }
            if iterations >= max_iterations {
                break;
            }

            match self.step(&it, mu) {
                Ok((next, steps)) => {
                    it = next;
                    last_steps = steps;
                }
                Err(msg) => {
                    status = SolveStatus::NumericalFailure;
                    diagnostic = Some(msg);
                    break;
                }
            }
            iterations += 1;
        }

        let (x, dual_ineq, dual_eq, z) = self.solution_view(&it);
        let residuals = residuals(self.problem, &x, &dual_ineq, dual_eq, &z);
        let vals = self.problem.constraint_values(&x);
        SdpSolution {
            x,
            slack: vals.inequalities,
            dual_ineq,
            dual_eq,
            dual_slack_matrix: z,
            objective: vals.objective,
            status,
            residuals,
            iterations,
            history,
            diagnostic,
        }
    }

    fn step(&self, it: &Iterate, mu: f64) -> std::result::Result<(Iterate, (f64, f64)), String> {
        let sc = self
            .scaling(it)
            .ok_or_else(|| "iterate left the interior of the cone".to_string())?;
        let sys = self
            .newton_system(&sc)
            .ok_or_else(|| "scaled constraint operator is rank deficient".to_string())?;
        let res = self.residual(it);

        // Predictor: pure Newton step towards complementarity.
        let v2 = Matrix5::from_diagonal(&sc.v.map(|v| -v * v));
        let v2_orth = sc.v_orth.map(|v| -v * v);
        let aff = self
            .direction(&sc, &sys, &res, &v2, &v2_orth)
            .ok_or_else(|| "predictor direction is not finite".to_string())?;
        let (ap, ad) = self.max_steps(&sc, &aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff = (inner(&(it.x + aff.dx * ap), &(it.z + aff.dz * ad))
            + (&it.s + &aff.ds * ap).dot(&(&it.w + &aff.dw * ad)))
            / self.nu();
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector with the second-order term of the scaled complementarity.
        let (dx_t, dz_t) = (aff.dx_scaled, aff.dz_scaled);
        let jordan = (dx_t * dz_t + dz_t * dx_t) * 0.5;
        let rc = Matrix5::identity() * (sigma * mu) + v2 - jordan;
        let rc_orth = v2_orth.add_scalar(sigma * mu) - aff.ds_scaled.component_mul(&aff.dw_scaled);
        let dir = self
            .direction(&sc, &sys, &res, &rc, &rc_orth)
            .ok_or_else(|| "corrector direction is not finite".to_string())?;

        let (ap, ad) = self.max_steps(&sc, &dir);
        let ap = (STEP_TO_BOUNDARY * ap).min(1.0);
        let ad = (STEP_TO_BOUNDARY * ad).min(1.0);
        let next = Iterate {
            x: symmetrize(&(it.x + dir.dx * ap)),
            s: &it.s + &dir.ds * ap,
            y: &it.y + &dir.dy * ad,
            z: symmetrize(&(it.z + dir.dz * ad)),
            w: &it.w + &dir.dw * ad,
        };
        Ok((next, (ap, ad)))
    }
}

const SVEC_LEN: usize = 15;

/// Upper-triangle vectorization with off-diagonals scaled by √2, so that
/// `svec(A)·svec(B) = ⟨A, B⟩`.
fn svec(m: &Matrix5<f64>) -> [f64; SVEC_LEN] {
    let mut out = [0.0; SVEC_LEN];
    let mut k = 0;
    for i in 0..5 {
        for j in i..5 {
            out[k] = if i == j {
                m[(i, j)]
            } else {
                std::f64::consts::SQRT_2 * m[(i, j)]
            };
            k += 1;
        }
    }
    out
}

fn smat(v: &[f64]) -> Matrix5<f64> {
    let mut m = Matrix5::zeros();
    let mut k = 0;
    for i in 0..5 {
        for j in i..5 {
            if i == j {
                m[(i, j)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

fn inner(a: &Matrix5<f64>, b: &Matrix5<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn symmetrize(m: &Matrix5<f64>) -> Matrix5<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric square root; `None` unless `m` is positive definite.
fn sym_sqrt(m: &Matrix5<f64>) -> Option<Matrix5<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().any(|&e| e.is_nan() || e <= 0.0) {
        return None;
    }
    let q = eig.eigenvectors;
    Some(q * Matrix5::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q.transpose())
}

/// Largest `α` with `diag(v) + α·D ⪰ 0`, given `inv_half = v^{-1/2}`.
fn psd_step(d: &Matrix5<f64>, inv_half: &Vector5<f64>) -> f64 {
    let scaled = Matrix5::from_fn(|i, j| d[(i, j)] * inv_half[i] * inv_half[j]);
    let lmin = SymmetricEigen::new(symmetrize(&scaled)).eigenvalues.min();
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn orthant_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}
