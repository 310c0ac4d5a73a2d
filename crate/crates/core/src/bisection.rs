//! Max-min weighted collision avoidance over integer beam allocations,
//! solved by bisection on the epigraph variable.
//!
//! For a target level `xi`, the smallest allocation satisfying
//! `P_a,i(b_i) * P_d,i^low >= xi` is
//!
//! ```text
//! f_bar_i(xi) = alpha_i / ((1 - exp((ln xi - ln p_i) / (N_i - 1))) N_R)
//! f_i(xi)     = min(max(ceil(f_bar_i(xi)), 1), N_slot)
//! ```
//!
//! `sum_i f_i(xi)` is non-decreasing in `xi`, so feasibility against the
//! capacity `N_slot * N_b` is monotone and bisection converges linearly to
//! the optimum, which saturates the capacity under the usual no-coincident-
//! jump condition.

use crate::error::{Error, Result};
use crate::metrics::{collision_avoidance, BeamAllocation};
use crate::scenario::Scenario;

/// Floor applied to decoding bounds before logarithms.
const P_D_EPS: f64 = 1e-12;
/// Bisection stops early once the interval is narrower than this.
const INTERVAL_EPS: f64 = 1e-12;
/// Default iteration budget.
pub const DEFAULT_MAX_ITER: usize = 100;

/// Minimum allocation `f_bar_i(xi)` attaining weighted level `xi` for one
/// cell. Returns `+inf` when the level is unattainable (`xi >= p_d_low`)
/// and `0` for single-device cells, which meet any level at `b = 1`.
pub fn f_bar(xi: f64, alpha: f64, n_devices: f64, n_r: usize, p_d_low: f64) -> f64 {
    if n_devices <= 1.0 {
        return 0.0;
    }
    let p = p_d_low.clamp(P_D_EPS, 1.0);
    let xi = xi.max(0.0);
    if xi >= p {
        return f64::INFINITY;
    }
    let t = ((xi.ln() - p.ln()) / (n_devices - 1.0)).exp();
    alpha / ((1.0 - t) * n_r as f64)
}

/// Per-cell allocation `f_i(xi)` for a target level.
pub fn allocation_for(xi: f64, scenario: &Scenario, p_d_low: &[f64]) -> BeamAllocation {
    let n_slot = scenario.n_slot;
    let counts = scenario
        .cells
        .iter()
        .zip(p_d_low)
        .map(|(c, &p)| {
            let fb = f_bar(xi, c.activation, c.demand, scenario.link.n_r, p);
            if fb.is_infinite() {
                n_slot
            } else {
                (fb.ceil().max(1.0) as usize).min(n_slot)
            }
        })
        .collect();
    BeamAllocation::new(counts)
}

/// Minimum weighted collision avoidance `min_i P_a,i(b_i) * p_d_low_i`.
///
/// Shared objective definition for the bisection and for exhaustive-search
/// validation, with the decoding bounds floored the same way `f_bar`
/// floors them.
pub fn weighted_min_objective(scenario: &Scenario, b: &[usize], p_d_low: &[f64]) -> Result<f64> {
    let mut min = f64::INFINITY;
    for (i, cell) in scenario.cells.iter().enumerate() {
        let p_a = collision_avoidance(cell.activation, cell.demand, scenario.link.n_r, b[i])?;
        let v = p_a * p_d_low[i].clamp(P_D_EPS, 1.0);
        if v < min {
            min = v;
        }
    }
    Ok(min)
}

#[derive(Debug, Clone)]
pub struct BisectionResult {
    pub allocation: BeamAllocation,
    /// Final feasible level (lower bisection bound).
    pub xi_star: f64,
    pub iterations: usize,
}

/// Bisection over the weighted collision-avoidance level.
///
/// Starts from `[0, min_i p_d_low_i]`, halves the interval `max_iter`
/// times (early exit below an absolute width of 1e-12), derives the
/// allocation from the feasible lower bound, then distributes leftover
/// capacity one slot at a time to the cell with the lowest weighted rate
/// (ties to the lowest index).
pub fn bisect(scenario: &Scenario, p_d_low: &[f64], max_iter: usize) -> Result<BisectionResult> {
    let n = scenario.n_cells();
    if p_d_low.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} decoding bounds for {n} cells",
            p_d_low.len()
        )));
    }
    let capacity = scenario.n_slot * scenario.n_b;
    if n > capacity {
        return Err(Error::Infeasible(format!(
            "{n} cells cannot each get a slot within capacity {capacity}"
        )));
    }

    let mut xi_l: f64 = 0.0;
    let mut xi_u = p_d_low
        .iter()
        .map(|&p| p.clamp(P_D_EPS, 1.0))
        .fold(f64::INFINITY, f64::min);
    let mut iterations = 0;
    while iterations < max_iter && xi_u - xi_l >= INTERVAL_EPS {
        let mid = 0.5 * (xi_l + xi_u);
        let b = allocation_for(mid, scenario, p_d_low);
        if b.total() <= capacity {
            xi_l = mid;
        } else {
            xi_u = mid;
        }
        iterations += 1;
    }

    let mut allocation = allocation_for(xi_l, scenario, p_d_low);
    debug_assert!(allocation.total() <= capacity);

    // ceiling slack: hand remaining slots to the currently worst cell
    while allocation.total() < capacity {
        let mut worst: Option<(usize, f64)> = None;
        for (i, cell) in scenario.cells.iter().enumerate() {
            if allocation.counts[i] >= scenario.n_slot {
                continue;
            }
            let p_a = collision_avoidance(
                cell.activation,
                cell.demand,
                scenario.link.n_r,
                allocation.counts[i],
            )?;
            let v = p_a * p_d_low[i].clamp(P_D_EPS, 1.0);
            if worst.is_none_or(|(_, w)| v < w) {
                worst = Some((i, v));
            }
        }
        match worst {
            Some((i, _)) => allocation.counts[i] += 1,
            None => break, // every cell already at n_slot
        }
    }
    Ok(BisectionResult { allocation, xi_star: xi_l, iterations })
}

/// Empirical check of the no-coincident-jump condition: `sum_i f_i` grows
/// by at most one at every discontinuity. The jump of `f_i` from `k` to
/// `k + 1` sits exactly at `xi = p_d_low_i * P_a,i(k)`, so the condition
/// holds iff no two cells share a jump point.
pub fn lemma_step_condition_holds(scenario: &Scenario, p_d_low: &[f64]) -> Result<bool> {
    let mut jumps: Vec<(f64, usize)> = Vec::new();
    for (i, cell) in scenario.cells.iter().enumerate() {
        if cell.demand <= 1.0 {
            continue;
        }
        let p = p_d_low[i].clamp(P_D_EPS, 1.0);
        for k in 1..scenario.n_slot {
            let p_a = collision_avoidance(cell.activation, cell.demand, scenario.link.n_r, k)?;
            jumps.push((p * p_a, i));
        }
    }
    jumps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in jumps.windows(2) {
        let (xi_a, cell_a) = w[0];
        let (xi_b, cell_b) = w[1];
        if cell_a != cell_b && (xi_b - xi_a).abs() <= 1e-9 * xi_b.abs().max(1e-300) {
            return Ok(false);
        }
    }
    Ok(true)
}
