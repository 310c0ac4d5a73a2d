//! ADMM for the constrained binary quadratic pattern sub-problem
//! `min_X sum_t (x^t)' G x^t` subject to row sums `b`, column sums at most
//! `N_b`, and binary entries.
//!
//! The binary set and the affine sum set get one auxiliary variable each:
//!
//! ```text
//! Z1 <- round(X + Y1/rho1)                       (binary projection)
//! Z2 <- proj_{X'1 = Nb 1, X1 = b}(X + Y2/rho2)   (affine projection)
//! X  <- (2G + (rho1+rho2) I)^-1 (rho1 Z1 + rho2 Z2 - Y1 - Y2)
//! Y_k <- Y_k + gamma rho_k (X - Z_k)
//! ```
//!
//! The output is the rounded `X` after a fixed iteration budget; per-slot
//! capacity violations are repaired downstream.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::metrics::{perturbed_fractional_pattern, BeamHoppingPattern};

/// Penalty and iteration schedule. The penalties grow by `rho_growth`
/// each iteration until `rho_cap`.
#[derive(Debug, Clone)]
pub struct AdmmConfig {
    /// Initial rho1; `None` applies [`default_rho1`] to uniform demand
    /// (callers with demand knowledge resolve it themselves).
    pub rho1_init: Option<f64>,
    /// rho2 / rho1 ratio.
    pub rho2_ratio: f64,
    pub rho_growth: f64,
    pub rho_cap: f64,
    /// Dual ascent step.
    pub gamma: f64,
    pub iterations: usize,
    /// Slot-breaking amplitude of the fractional warm start.
    pub init_perturbation: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho1_init: None,
            rho2_ratio: 2.2,
            rho_growth: 1.01,
            rho_cap: 3.6,
            gamma: 1.0,
            iterations: 300,
            init_perturbation: 1.0,
        }
    }
}

/// Initial penalty from traffic-demand disparity:
/// `0.1 * (min_i N_i / max_i N_i) + 0.2`.
///
/// Larger disparity starts the schedule lower, giving the quadratic term
/// more room to shape the pattern before the penalties bind.
pub fn default_rho1(demands: &[f64]) -> f64 {
    let min = demands.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = demands.iter().cloned().fold(0.0f64, f64::max);
    if max.is_nan() || max <= 0.0 {
        return 0.3;
    }
    0.1 * (min / max) + 0.2
}

/// One solver iteration's diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct SolverIteration {
    pub objective: f64,
    /// ||X - Z1||_F
    pub residual_z1: f64,
    /// ||X - Z2||_F
    pub residual_z2: f64,
}

pub const SOLVER_TRACE_SCHEMA: &str = "beamhop-solver-trace-v1";

/// Per-iteration trace as CSV (`iter,objective,residual1,residual2`).
pub fn solver_trace_to_csv(trace: &[SolverIteration]) -> String {
    let mut out = format!("# schema: {SOLVER_TRACE_SCHEMA}\niter,objective,residual1,residual2\n");
    for (k, it) in trace.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", k + 1, it.objective, it.residual_z1, it.residual_z2));
    }
    out
}

/// Solver result: rounded binary pattern, final relaxed iterate, trace.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub pattern: BeamHoppingPattern,
    pub relaxed: DMatrix<f64>,
    pub trace: Vec<SolverIteration>,
}

/// Quadratic objective `sum_t (x^t)' G x^t`.
pub fn pattern_objective(g: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    (g * x).dot(x)
}

/// Binary projection: elementwise nearest of {0, 1}, ties (exactly 0.5)
/// round up.
pub fn project_binary(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| if v >= 0.5 { 1.0 } else { 0.0 })
}

/// Euclidean projection onto `{X : X'1 = n_b 1, X1 = b}`.
///
/// The correction is `u 1' + 1 v'` with `u, v` from the centering
/// identities; requires the consistent targets `sum b = n_slot * n_b`.
pub fn project_affine(m: &DMatrix<f64>, b: &[f64], n_b: usize) -> Result<DMatrix<f64>> {
    let n_c = m.nrows();
    let n_slot = m.ncols();
    if b.len() != n_c {
        return Err(Error::DimensionMismatch(format!(
            "allocation has {} entries for {n_c} rows",
            b.len()
        )));
    }
    let total_b: f64 = b.iter().sum();
    let capacity = (n_slot * n_b) as f64;
    if (total_b - capacity).abs() > 1e-9 * capacity.max(1.0) {
        return Err(Error::Infeasible(format!(
            "row-sum target {total_b} inconsistent with column-sum target {capacity}"
        )));
    }

    let row_sums = m.column_sum(); // length n_c (sum over columns per row)
    let col_sums = m.row_sum(); // 1 x n_slot
    let u: Vec<f64> = (0..n_c).map(|i| (b[i] - row_sums[i]) / n_slot as f64).collect();
    let su: f64 = u.iter().sum();
    let v: Vec<f64> = (0..n_slot)
        .map(|t| (n_b as f64 - col_sums[t] - su) / n_c as f64)
        .collect();
    Ok(DMatrix::from_fn(n_c, n_slot, |i, t| m[(i, t)] + u[i] + v[t]))
}

/// Closed-form X-update `(2G + (rho1 + rho2) I)^-1 (rho1 Z1 + rho2 Z2 - Y1 - Y2)`.
pub fn x_update(
    z1: &DMatrix<f64>,
    z2: &DMatrix<f64>,
    y1: &DMatrix<f64>,
    y2: &DMatrix<f64>,
    g: &DMatrix<f64>,
    rho1: f64,
    rho2: f64,
) -> DMatrix<f64> {
    let chol = factor_x_system(g, rho1 + rho2);
    x_update_with(&chol, z1, z2, y1, y2, rho1, rho2)
}

fn factor_x_system(g: &DMatrix<f64>, rho_sum: f64) -> Cholesky<f64, Dyn> {
    let n = g.nrows();
    let system = g * 2.0 + DMatrix::identity(n, n) * rho_sum;
    // strictly PD for PSD G and positive penalties
    system.cholesky().expect("2G + (rho1+rho2) I must be positive definite")
}

fn x_update_with(
    chol: &Cholesky<f64, Dyn>,
    z1: &DMatrix<f64>,
    z2: &DMatrix<f64>,
    y1: &DMatrix<f64>,
    y2: &DMatrix<f64>,
    rho1: f64,
    rho2: f64,
) -> DMatrix<f64> {
    let rhs = z1 * rho1 + z2 * rho2 - y1 - y2;
    chol.solve(&rhs)
}

/// Augmented Lagrangian of the sub-problem at the given point, with the
/// indicator terms dropped (valid whenever `Z1`, `Z2` lie in their sets).
#[allow(clippy::too_many_arguments)]
pub fn augmented_lagrangian(
    x: &DMatrix<f64>,
    z1: &DMatrix<f64>,
    z2: &DMatrix<f64>,
    y1: &DMatrix<f64>,
    y2: &DMatrix<f64>,
    g: &DMatrix<f64>,
    rho1: f64,
    rho2: f64,
) -> f64 {
    let d1 = x - z1;
    let d2 = x - z2;
    pattern_objective(g, x)
        + y1.dot(&d1)
        + y2.dot(&d2)
        + 0.5 * rho1 * d1.norm_squared()
        + 0.5 * rho2 * d2.norm_squared()
}

/// Runs the ADMM loop and rounds the final iterate.
///
/// `X` starts from the uniform fractional pattern `b_i / n_slot`, duals
/// from zero. The rounded output is binary but may violate per-slot
/// capacity; the alternating-optimization driver repairs it.
pub fn solve_admm(
    g: &DMatrix<f64>,
    b: &[usize],
    n_slot: usize,
    n_b: usize,
    config: &AdmmConfig,
) -> Result<SolverOutput> {
    let n_c = g.nrows();
    if g.ncols() != n_c || b.len() != n_c {
        return Err(Error::DimensionMismatch("G must be square with one row per cell".into()));
    }
    let bf: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let mut rho1 = config.rho1_init.unwrap_or(0.3);
    let mut rho2 = config.rho2_ratio * rho1;

    let mut x = perturbed_fractional_pattern(&bf, n_slot, config.init_perturbation);
    let mut y1 = DMatrix::zeros(n_c, n_slot);
    let mut y2 = DMatrix::zeros(n_c, n_slot);
    let mut trace = Vec::with_capacity(config.iterations);
    let mut chol: Option<(f64, Cholesky<f64, Dyn>)> = None;

    for _ in 0..config.iterations {
        let z1 = project_binary(&(&x + &y1 / rho1));
        let z2 = project_affine(&(&x + &y2 / rho2), &bf, n_b)?;
        let rho_sum = rho1 + rho2;
        if chol.as_ref().is_none_or(|(r, _)| *r != rho_sum) {
            chol = Some((rho_sum, factor_x_system(g, rho_sum)));
        }
        x = x_update_with(&chol.as_ref().unwrap().1, &z1, &z2, &y1, &y2, rho1, rho2);
        y1 += (&x - &z1) * (config.gamma * rho1);
        y2 += (&x - &z2) * (config.gamma * rho2);
        trace.push(SolverIteration {
            objective: pattern_objective(g, &x),
            residual_z1: (&x - &z1).norm(),
            residual_z2: (&x - &z2).norm(),
        });
        rho1 = (rho1 * config.rho_growth).min(config.rho_cap);
        rho2 = (rho2 * config.rho_growth).min(config.rho_cap);
    }

    Ok(SolverOutput { pattern: BeamHoppingPattern::from_rounding(&x), relaxed: x, trace })
}
