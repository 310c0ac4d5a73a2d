//! l2-box ADMM for the pattern sub-problem: the binary constraint is
//! replaced by the exact intersection of the unit box with the sphere
//! `||X - (1/2) 11'||_F = sqrt(Nc Nslot) / 2`, which turns the hard
//! rounding step into smooth projections. The sum constraints move into
//! the objective as penalties, so the X-update becomes a Sylvester
//! equation
//!
//! ```text
//! A X + X B = C
//! A = 2G + (rho1 + rho2) I + rho3 11'     (Nc x Nc)
//! B = rho3 11'                            (Nslot x Nslot)
//! C = rho1 Z1 + rho2 Z2 - Y1 - Y2 - 1 y3' - y4 1'
//!     + rho3 Nb 11' + rho3 b 1'
//! ```
//!
//! obtained by differentiating the augmented Lagrangian; the coefficients
//! are certified by the finite-difference stationarity tests. `B` is rank
//! one, so its eigenbasis is formed analytically (a Householder basis
//! whose first column is the normalized all-ones vector) and only `A`
//! needs an eigendecomposition per call.

use nalgebra::{DMatrix, DVector};

use crate::admm::{pattern_objective, SolverIteration, SolverOutput};
use crate::error::{Error, Result};
use crate::metrics::{perturbed_fractional_pattern, BeamHoppingPattern};
use crate::sylvester::solve_symmetric_prefactored;

/// Penalty schedule; one value drives rho1 = rho2 = rho3.
#[derive(Debug, Clone)]
pub struct L2BoxConfig {
    /// Initial penalty; `None` lets the caller derive it from demand
    /// disparity (falls back to 0.11).
    pub rho_init: Option<f64>,
    pub rho_growth: f64,
    pub rho_cap: f64,
    pub gamma: f64,
    pub iterations: usize,
    /// Slot-breaking amplitude of the fractional warm start.
    pub init_perturbation: f64,
}

impl Default for L2BoxConfig {
    fn default() -> Self {
        Self {
            rho_init: None,
            rho_growth: 1.01,
            rho_cap: 3.6,
            gamma: 1.0,
            iterations: 300,
            init_perturbation: 1.0,
        }
    }
}

/// Elementwise clamp to the unit box.
pub fn project_box(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.clamp(0.0, 1.0))
}

/// Projection onto the sphere `||X - (1/2) 11'||_F = sqrt(n) / 2` where
/// `n` is the entry count. The exact center has no nearest point, so a
/// fixed direction (+1 on entry (0,0), balanced remainder) is used there;
/// the result always has the exact sphere radius.
pub fn project_sphere(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.len() as f64;
    let radius = n.sqrt() / 2.0;
    let centered = m.map(|v| v - 0.5);
    let norm = centered.norm();
    let direction = if norm < 1e-300 {
        let mut d = DMatrix::from_element(m.nrows(), m.ncols(), if m.len() > 1 { -1.0 / (n - 1.0) } else { 0.0 });
        d[(0, 0)] = 1.0;
        let dn = d.norm();
        d / dn
    } else {
        centered / norm
    };
    direction * radius + DMatrix::from_element(m.nrows(), m.ncols(), 0.5)
}

/// Orthonormal basis whose first column is the normalized all-ones vector
/// (symmetric Householder reflector), diagonalizing `11'`.
fn ones_eigenbasis(m: usize) -> DMatrix<f64> {
    if m == 1 {
        return DMatrix::identity(1, 1);
    }
    let w = DMatrix::from_element(m, 1, 1.0 / (m as f64).sqrt());
    let mut v = -w.clone();
    v[(0, 0)] += 1.0;
    let vtv = v.norm_squared();
    DMatrix::identity(m, m) - &v * v.transpose() * (2.0 / vtv)
}

/// X-update: solves the Sylvester system stated in the module docs and
/// verifies the residual `||AX + XB - C||_F <= 1e-8 max(||C||_F, 1)`.
#[allow(clippy::too_many_arguments)]
pub fn x_update_sylvester(
    g: &DMatrix<f64>,
    z1: &DMatrix<f64>,
    z2: &DMatrix<f64>,
    y1: &DMatrix<f64>,
    y2: &DMatrix<f64>,
    y3: &DVector<f64>,
    y4: &DVector<f64>,
    b: &[f64],
    n_b: usize,
    rho1: f64,
    rho2: f64,
    rho3: f64,
) -> Result<DMatrix<f64>> {
    let n_c = g.nrows();
    let n_slot = z1.ncols();
    if z1.nrows() != n_c || y3.len() != n_slot || y4.len() != n_c || b.len() != n_c {
        return Err(Error::DimensionMismatch("l2box x-update operands disagree".into()));
    }

    let a = g * 2.0
        + DMatrix::identity(n_c, n_c) * (rho1 + rho2)
        + DMatrix::from_element(n_c, n_c, rho3);
    let b_mat = DMatrix::from_element(n_slot, n_slot, rho3);
    let c = z1 * rho1 + z2 * rho2 - y1 - y2
        + DMatrix::from_fn(n_c, n_slot, |i, t| {
            -y3[t] - y4[i] + rho3 * n_b as f64 + rho3 * b[i]
        });

    let eig_a = a.clone().symmetric_eigen();
    let lambda_a: Vec<f64> = eig_a.eigenvalues.iter().cloned().collect();
    let u_b = ones_eigenbasis(n_slot);
    let mut lambda_b = vec![0.0; n_slot];
    lambda_b[0] = rho3 * n_slot as f64;

    let x = solve_symmetric_prefactored(&eig_a.eigenvectors, &lambda_a, &u_b, &lambda_b, &c)?;
    let residual = (&a * &x + &x * &b_mat - &c).norm();
    let bound = 1e-8 * c.norm().max(1.0);
    if residual > bound {
        return Err(Error::SolverResidual { residual, bound });
    }
    Ok(x)
}

/// Augmented Lagrangian of the l2-box formulation (indicators dropped;
/// valid when `Z1`, `Z2` lie in their sets).
#[allow(clippy::too_many_arguments)]
pub fn augmented_lagrangian(
    x: &DMatrix<f64>,
    z1: &DMatrix<f64>,
    z2: &DMatrix<f64>,
    y1: &DMatrix<f64>,
    y2: &DMatrix<f64>,
    y3: &DVector<f64>,
    y4: &DVector<f64>,
    g: &DMatrix<f64>,
    b: &[f64],
    n_b: usize,
    rho1: f64,
    rho2: f64,
    rho3: f64,
) -> f64 {
    let d1 = x - z1;
    let d2 = x - z2;
    let col_gap = DVector::from_fn(x.ncols(), |t, _| x.column(t).sum() - n_b as f64);
    let row_gap = DVector::from_fn(x.nrows(), |i, _| x.row(i).sum() - b[i]);
    pattern_objective(g, x)
        + y1.dot(&d1)
        + y2.dot(&d2)
        + y3.dot(&col_gap)
        + y4.dot(&row_gap)
        + 0.5 * rho1 * d1.norm_squared()
        + 0.5 * rho2 * d2.norm_squared()
        + 0.5 * rho3 * col_gap.norm_squared()
        + 0.5 * rho3 * row_gap.norm_squared()
}

/// Runs the l2-box ADMM loop and rounds the final iterate. The output may
/// violate per-slot capacity; the driver repairs it.
pub fn solve_l2box(
    g: &DMatrix<f64>,
    b: &[usize],
    n_slot: usize,
    n_b: usize,
    config: &L2BoxConfig,
) -> Result<SolverOutput> {
    let n_c = g.nrows();
    if g.ncols() != n_c || b.len() != n_c {
        return Err(Error::DimensionMismatch("G must be square with one row per cell".into()));
    }
    let bf: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let mut rho = config.rho_init.unwrap_or(0.3);

    let mut x = perturbed_fractional_pattern(&bf, n_slot, config.init_perturbation);
    let mut y1 = DMatrix::zeros(n_c, n_slot);
    let mut y2 = DMatrix::zeros(n_c, n_slot);
    let mut y3 = DVector::zeros(n_slot);
    let mut y4 = DVector::zeros(n_c);
    let mut trace = Vec::with_capacity(config.iterations);

    for _ in 0..config.iterations {
        let z1 = project_box(&(&x + &y1 / rho));
        let z2 = project_sphere(&(&x + &y2 / rho));
        x = x_update_sylvester(g, &z1, &z2, &y1, &y2, &y3, &y4, &bf, n_b, rho, rho, rho)?;
        y1 += (&x - &z1) * (config.gamma * rho);
        y2 += (&x - &z2) * (config.gamma * rho);
        for t in 0..n_slot {
            y3[t] += config.gamma * rho * (x.column(t).sum() - n_b as f64);
        }
        for i in 0..n_c {
            y4[i] += config.gamma * rho * (x.row(i).sum() - bf[i]);
        }
        trace.push(SolverIteration {
            objective: pattern_objective(g, &x),
            residual_z1: (&x - &z1).norm(),
            residual_z2: (&x - &z2).norm(),
        });
        rho = (rho * config.rho_growth).min(config.rho_cap);
    }

    Ok(SolverOutput { pattern: BeamHoppingPattern::from_rounding(&x), relaxed: x, trace })
}
